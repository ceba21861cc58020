//! Gaussian laser pulse and its potentials.
//!
//! The field `E(t) = E0 exp(-s^2 / 2 tau^2) cos(w0 s)`, `s = t - t_center`, is
//! held as a sum of positive-frequency modes so that the vector potential,
//! its time integral and any linear response (the rod dipole) follow in
//! closed form from the same representation.

use rustfft::num_complex::Complex;

use crate::error::{invalid, Result};
use crate::real::Real;
use crate::units::SPEED_OF_LIGHT_AU;

/// Half-width of the pulse support in units of `tau`; outside it the field
/// and the vector potential are zero.
const SUPPORT: f64 = 12.0;
/// Spectral cutoff `|nu| tau`.
const CUTOFF: f64 = 9.0;

#[derive(Clone, Debug, PartialEq)]
pub struct LaserPulse<T> {
    pub wavelength: T,
    /// Intensity FWHM.
    pub fwhm_duration: T,
    pub peak_field: T,
    pub polarization: [T; 2],
    pub t_center: T,
    modes: Vec<Mode>,
}

/// One spectral component `Re[amp exp(-i omega s)]` of the field.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Mode {
    pub omega: f64,
    pub amp: f64,
}

impl<T: Real> LaserPulse<T> {
    pub fn new(wavelength: T, fwhm_duration: T, peak_field: T, polarization: [T; 2], t_center: T) -> Result<Self> {
        if !(wavelength > T::zero()) {
            return Err(invalid("wavelength", "must be positive"));
        }
        if !(fwhm_duration > T::zero()) {
            return Err(invalid("fwhm_duration", "must be positive"));
        }
        if !(peak_field >= T::zero()) || !peak_field.is_finite() {
            return Err(invalid("peak_field", "must be finite and non-negative"));
        }
        let n = (polarization[0] * polarization[0] + polarization[1] * polarization[1]).sqrt();
        if (n - T::one()).abs() > T::c(1e-6) {
            return Err(invalid("polarization", "must be a unit vector"));
        }
        let mut p = Self {
            wavelength,
            fwhm_duration,
            peak_field,
            polarization,
            t_center,
            modes: Vec::new(),
        };
        p.modes = p.build_modes()?;
        Ok(p)
    }

    fn build_modes(&self) -> Result<Vec<Mode>> {
        let tau = self.tau().to_f64_lossy();
        let w0 = self.omega().to_f64_lossy();
        let e0 = self.peak_field.to_f64_lossy();
        if w0 * tau <= CUTOFF + 1.0 {
            return Err(invalid("fwhm_duration", "pulse must contain several optical cycles"));
        }
        let dnu = 2.0 * std::f64::consts::PI / (2.0 * SUPPORT * tau);
        let jmax = (CUTOFF / (tau * dnu)).ceil() as i64;
        let pref = e0 * dnu / (2.0 * std::f64::consts::PI) * tau * (2.0 * std::f64::consts::PI).sqrt();
        Ok((-jmax..=jmax)
            .map(|j| {
                let nu = j as f64 * dnu;
                Mode {
                    omega: w0 + nu,
                    amp: pref * (-0.5 * nu * nu * tau * tau).exp(),
                }
            })
            .collect())
    }

    /// Photon angular frequency.
    pub fn omega(&self) -> T {
        T::c(2.0) * T::PI() * T::c(SPEED_OF_LIGHT_AU) / self.wavelength
    }

    /// Free-space photon wavenumber.
    pub fn k0(&self) -> T {
        self.omega() / T::c(SPEED_OF_LIGHT_AU)
    }

    /// Field envelope width: `E ~ exp(-s^2 / 2 tau^2)`.
    pub fn tau(&self) -> T {
        self.fwhm_duration / (T::c(2.0) * T::LN_2().sqrt())
    }

    pub fn modes(&self) -> &[Mode] {
        &self.modes
    }

    /// Times outside which the pulse is identically zero.
    pub fn support(&self) -> (T, T) {
        let h = T::c(SUPPORT) * self.tau();
        (self.t_center - h, self.t_center + h)
    }

    /// `Re sum_j f(omega_j) amp_j exp(-i omega_j s)`, zero outside the support.
    pub fn synthesize(&self, t: T, f: impl Fn(f64) -> Complex<f64>) -> f64 {
        let s = (t - self.t_center).to_f64_lossy();
        let tau = self.tau().to_f64_lossy();
        if s.abs() > SUPPORT * tau {
            return 0.0;
        }
        self.modes
            .iter()
            .map(|m| (f(m.omega) * m.amp * Complex::from_polar(1.0, -m.omega * s)).re)
            .sum()
    }

    /// Scalar field along the polarization.
    pub fn field_scalar(&self, t: T) -> T {
        T::c(self.synthesize(t, |_| Complex::new(1.0, 0.0)))
    }

    /// Scalar vector potential `A = -int E dt` along the polarization.
    pub fn vector_potential_scalar(&self, t: T) -> T {
        T::c(self.synthesize(t, |w| Complex::new(0.0, -1.0 / w)))
    }

    /// Primitive `F(t) = int_{-inf}^t A dt'`, constant outside the support.
    pub fn vector_potential_primitive(&self, t: T) -> T {
        let (lo, hi) = self.support();
        let tc = if t < lo { lo } else if t > hi { hi } else { t };
        let s = (tc - self.t_center).to_f64_lossy();
        let v: f64 = self
            .modes
            .iter()
            .map(|m| (Complex::new(1.0 / (m.omega * m.omega), 0.0) * m.amp * Complex::from_polar(1.0, -m.omega * s)).re)
            .sum();
        T::c(v)
    }

    pub fn field(&self, t: T) -> [T; 2] {
        let e = self.field_scalar(t);
        [self.polarization[0] * e, self.polarization[1] * e]
    }
}

/// Uniform incident vector potential `A(t)`.
pub fn incident_vector_potential<T: Real>(pulse: &LaserPulse<T>, t: T) -> [T; 2] {
    let a = pulse.vector_potential_scalar(t);
    [pulse.polarization[0] * a, pulse.polarization[1] * a]
}

/// `int_{t0}^{t1} k.A(tau) dtau` for the uniform incident potential.
///
/// An envelope with carrier `k` driven by this potential evolves as
/// `exp(-i volkov_phase)`.
pub fn volkov_phase<T: Real>(pulse: &LaserPulse<T>, k: [T; 2], t0: T, t1: T) -> T {
    let kp = k[0] * pulse.polarization[0] + k[1] * pulse.polarization[1];
    kp * (pulse.vector_potential_primitive(t1) - pulse.vector_potential_primitive(t0))
}
