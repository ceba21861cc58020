//! Quasistatic near field of a metallic cylinder driven by the laser pulse.
//!
//! The rod responds as a line dipole `p(t)` per unit length, built mode by
//! mode from `alpha(omega) E(omega)` with the 2D polarizability
//! `alpha = R^2 (eps - 1) / 2 (eps + 1)` (atomic units). Outside the rod the
//! scattered potential is `phi = 2 p.r / r^2`; inside it is the uniform-field
//! solution `2 p.r / R^2`, continuous at the surface.

use rustfft::num_complex::Complex;

use crate::error::{invalid, Result};
use crate::grid::{GridSpec, RealField};
use crate::real::Real;

use super::pulse::LaserPulse;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct DrudeMetal {
    pub eps_inf: f64,
    /// Plasma frequency (au).
    pub omega_p: f64,
    /// Damping rate (au).
    pub gamma: f64,
}

impl DrudeMetal {
    pub fn new(eps_inf: f64, omega_p: f64, gamma: f64) -> Result<Self> {
        if !(eps_inf >= 1.0) {
            return Err(invalid("eps_inf", "must be >= 1"));
        }
        if !(omega_p > 0.0) {
            return Err(invalid("omega_p", "must be positive"));
        }
        if !(gamma >= 0.0) {
            return Err(invalid("gamma", "must be non-negative"));
        }
        Ok(Self {
            eps_inf,
            omega_p,
            gamma,
        })
    }

    pub fn permittivity(&self, omega: f64) -> Complex<f64> {
        let w = Complex::new(omega, 0.0);
        Complex::new(self.eps_inf, 0.0) - self.omega_p * self.omega_p / (w * w + Complex::new(0.0, self.gamma) * w)
    }

    /// Frequency where `Re eps = -1` for vanishing damping.
    pub fn dipole_resonance(&self) -> f64 {
        self.omega_p / (self.eps_inf + 1.0).sqrt()
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub enum Permittivity {
    Drude(DrudeMetal),
    /// Dispersionless dielectric.
    Constant(f64),
}

impl Permittivity {
    pub fn eval(&self, omega: f64) -> Complex<f64> {
        match self {
            Permittivity::Drude(m) => m.permittivity(omega),
            Permittivity::Constant(e) => Complex::new(*e, 0.0),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct NanorodGeometry<T> {
    pub radius: T,
    pub center: [T; 2],
}

impl<T: Real> NanorodGeometry<T> {
    pub fn new(radius: T, center: [T; 2]) -> Result<Self> {
        if !(radius > T::zero()) {
            return Err(invalid("radius", "must be positive"));
        }
        Ok(Self { radius, center })
    }
}

/// Line-dipole polarizability per unit length (au).
pub fn polarizability(radius: f64, eps: Complex<f64>) -> Complex<f64> {
    radius * radius * (eps - 1.0) / (2.0 * (eps + 1.0))
}

/// Dipole moment per unit length induced by the pulse at time `t`.
pub fn rod_dipole<T: Real>(pulse: &LaserPulse<T>, eps: &Permittivity, radius: T, t: T) -> [T; 2] {
    let r = radius.to_f64_lossy();
    let p = pulse.synthesize(t, |w| polarizability(r, eps.eval(w)));
    [pulse.polarization[0] * T::c(p), pulse.polarization[1] * T::c(p)]
}

/// Spatial profiles `(f_x, f_y)` with `phi = p_x f_x + p_y f_y`.
pub fn dipole_profiles<T: Real>(grid: &GridSpec<T>, rod: &NanorodGeometry<T>) -> (RealField<T>, RealField<T>) {
    let r2min = rod.radius * rod.radius;
    let two = T::c(2.0);
    let fx = RealField::from_fn(*grid, |x, y| {
        let (dx, dy) = (x - rod.center[0], y - rod.center[1]);
        two * dx / (dx * dx + dy * dy).max(r2min)
    });
    let fy = RealField::from_fn(*grid, |x, y| {
        let (dx, dy) = (x - rod.center[0], y - rod.center[1]);
        two * dy / (dx * dx + dy * dy).max(r2min)
    });
    (fx, fy)
}

/// Scattered potential of the rod on a grid at time `t`.
pub fn plasmon_scalar_potential<T: Real>(
    pulse: &LaserPulse<T>,
    eps: &Permittivity,
    rod: &NanorodGeometry<T>,
    grid: &GridSpec<T>,
    t: T,
) -> RealField<T> {
    let p = rod_dipole(pulse, eps, rod.radius, t);
    let (fx, fy) = dipole_profiles(grid, rod);
    RealField {
        grid: *grid,
        values: fx.values.iter().zip(&fy.values).map(|(a, b)| p[0] * *a + p[1] * *b).collect(),
    }
}

/// Scattered near field `-grad phi` at a point.
pub fn dipole_field<T: Real>(p: [T; 2], rod: &NanorodGeometry<T>, x: T, y: T) -> [T; 2] {
    let (dx, dy) = (x - rod.center[0], y - rod.center[1]);
    let r2 = dx * dx + dy * dy;
    let two = T::c(2.0);
    if r2 <= rod.radius * rod.radius {
        let s = -two / (rod.radius * rod.radius);
        return [s * p[0], s * p[1]];
    }
    let pr = p[0] * dx + p[1] * dy;
    let four = T::c(4.0);
    [
        -two * p[0] / r2 + four * pr * dx / (r2 * r2),
        -two * p[1] / r2 + four * pr * dy / (r2 * r2),
    ]
}
