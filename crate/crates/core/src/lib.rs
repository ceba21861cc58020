//! Pseudospectral time-dependent Hartree-Fock propagation of two free-electron
//! wavepackets driven by laser-induced plasmonic near fields.
//!
//! All numerics run in Hartree atomic units; see [`units`] for conversions.
//! Every type is generic over the scalar ([`Real`]: `f32` or `f64`); the
//! aliases at the crate root fix it to `f64`.

pub mod container;
pub mod em;
pub mod engine;
pub mod error;
pub mod grid;
pub mod observables;
pub mod poisson;
pub mod real;
pub mod spectral;
pub mod units;
pub mod wavepacket;
pub mod weak_coupling;

pub use engine::{
    energy_functional, propagate, rhs, richardson_ratio, run, step, total_momentum, Cap, MemorySink, NullSink,
    PropagatorConfig, RunSummary, Scheme, Sink, SpinMode, SystemState, Terms,
};
pub use error::{Error, Result};
pub use grid::{ComplexField, GridSpec, RealField};
pub use observables::{
    comb_spacing, density_difference, fringe_visibility, mutual_correlation, one_particle_density,
    pair_density_slice, pinem_spectrum, pinem_total, Convention, PairDensitySlice, PinemBins,
    PinemSpectrum, Space,
};
pub use poisson::{build_kernel, exchange_kernel, hartree_potential, ScreenedKernel};
pub use real::Real;
pub use rustfft::num_complex::Complex;
pub use spectral::{spectral_gradient, spectral_laplacian, Axis, Spectral};
pub use units::PhysicalConstants;
pub use wavepacket::{
    free_dispersion, fwhm_to_sigma, gram_schmidt, inner_product, make_gaussian_wavepacket,
    to_momentum_space, to_momentum_space_in_frame, GaussianPacket, MomentumAmplitude, Spin,
    Wavepacket,
};
pub use weak_coupling::{
    correlation_rate, default_reduced_dt, delta_rate, density_rate, volkov_reduced_step,
    ReducedPairState,
};

pub type Grid = GridSpec<f64>;
pub type Field = ComplexField<f64>;
pub type Density = RealField<f64>;
pub type Orbital = Wavepacket<f64>;
