//! Hartree atomic units and conversions at the configuration boundary.
//!
//! Internally hbar = m0 = e = 4*pi*eps0 = 1. Lengths are in bohr, energies in
//! hartree, times in atomic time units. The conversion constants are CODATA 2018.

use crate::real::Real;

/// Bohr radius in nanometres.
pub const BOHR_NM: f64 = 0.052_917_721_090_3;
/// Hartree energy in electronvolts.
pub const HARTREE_EV: f64 = 27.211_386_245_988;
/// Atomic unit of time in femtoseconds.
pub const AU_TIME_FS: f64 = 0.024_188_843_265_857;
/// Atomic unit of electric field in V/m.
pub const AU_FIELD_V_PER_M: f64 = 5.142_206_747_63e11;
/// Speed of light in atomic units (inverse fine-structure constant).
pub const SPEED_OF_LIGHT_AU: f64 = 137.035_999_084;

#[inline]
pub fn nm_to_au<T: Real>(v: f64) -> T {
    T::c(v / BOHR_NM)
}

#[inline]
pub fn au_to_nm<T: Real>(v: T) -> f64 {
    v.to_f64_lossy() * BOHR_NM
}

#[inline]
pub fn ev_to_au<T: Real>(v: f64) -> T {
    T::c(v / HARTREE_EV)
}

#[inline]
pub fn au_to_ev<T: Real>(v: T) -> f64 {
    v.to_f64_lossy() * HARTREE_EV
}

#[inline]
pub fn fs_to_au<T: Real>(v: f64) -> T {
    T::c(v / AU_TIME_FS)
}

#[inline]
pub fn au_to_fs<T: Real>(v: T) -> f64 {
    v.to_f64_lossy() * AU_TIME_FS
}

#[inline]
pub fn field_si_to_au<T: Real>(v: f64) -> T {
    T::c(v / AU_FIELD_V_PER_M)
}

#[inline]
pub fn field_au_to_si<T: Real>(v: T) -> f64 {
    v.to_f64_lossy() * AU_FIELD_V_PER_M
}

/// Physical constants expressed in the internal unit system.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct PhysicalConstants<T> {
    pub m0: T,
    pub e: T,
    pub hbar: T,
    pub eps0: T,
    pub c: T,
}

impl<T: Real> PhysicalConstants<T> {
    pub fn atomic() -> Self {
        Self {
            m0: T::one(),
            e: T::one(),
            hbar: T::one(),
            eps0: T::one() / (T::c(4.0) * T::PI()),
            c: T::c(SPEED_OF_LIGHT_AU),
        }
    }

    /// Coulomb prefactor e^2 / (4 pi eps0).
    pub fn coulomb(&self) -> T {
        self.e * self.e / (T::c(4.0) * T::PI() * self.eps0)
    }
}

impl<T: Real> Default for PhysicalConstants<T> {
    fn default() -> Self {
        Self::atomic()
    }
}

/// Nonrelativistic speed of an electron with the given kinetic energy (au).
pub fn electron_speed<T: Real>(kinetic_energy: T) -> T {
    (T::c(2.0) * kinetic_energy).sqrt()
}

/// Photon angular frequency for a vacuum wavelength (au).
pub fn photon_omega<T: Real>(wavelength: T) -> T {
    T::c(2.0) * T::PI() * T::c(SPEED_OF_LIGHT_AU) / wavelength
}
