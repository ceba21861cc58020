//! Electromagnetic drive: laser pulse, rod near field, field providers and
//! the derived coupling constants.

pub mod gfactor;
pub mod plasmon;
pub mod provider;
pub mod pulse;

pub use gfactor::{g_factor, GFactor, GFactorRequest};
pub use plasmon::{
    dipole_field, plasmon_scalar_potential, polarizability, rod_dipole, DrudeMetal, NanorodGeometry, Permittivity,
};
pub use provider::{
    load_field_series, record_series, write_field_series, AnalyticPlasmon, FieldFrame, FieldProvider, FieldSample,
    FieldSeries, NoField,
};
pub use pulse::{incident_vector_potential, volkov_phase, LaserPulse};
