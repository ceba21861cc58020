//! Electron-photon coupling constant of a sampled field.

use rustfft::num_complex::Complex;

use crate::error::{invalid, Error, Result};
use crate::grid::signed_bin;
use crate::real::Real;

use super::provider::FieldProvider;

/// Parameters of a g-factor evaluation.
///
/// The optical phasor `E(r)` with `E(r, t) = Re[E(r) exp(-i omega t)]` is
/// extracted over `window` (ideally an integer number of optical periods)
/// with `samples` midpoint nodes.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct GFactorRequest<T> {
    pub speed: T,
    pub omega: T,
    /// Transverse coordinate of the electron trajectory.
    pub y_electron: T,
    pub window: (T, T),
    pub samples: usize,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct GFactor<T> {
    pub value: Complex<T>,
    /// Phase-matched momentum actually used (nearest grid bin to `omega / v`).
    pub kx: T,
}

/// `g = (1 / 2 omega) integral dx E_x(x, y_e; omega) exp(-i k_x x)` with
/// `k_x = omega / v`, i.e. `(1 / 2 omega) int dk_y / 2 pi E_x(k_x, k_y) e^{i k_y y_e}`.
pub fn g_factor<T: Real>(provider: &dyn FieldProvider<T>, req: &GFactorRequest<T>) -> Result<GFactor<T>> {
    if !(req.speed > T::zero()) || !(req.omega > T::zero()) {
        return Err(invalid("g_factor", "speed and omega must be positive"));
    }
    if req.samples == 0 || !(req.window.1 > req.window.0) {
        return Err(invalid("g_factor", "window must be non-empty"));
    }
    let g = *provider.grid();
    let k_target = req.omega / req.speed;
    let bin = g.kx_bin(k_target).ok_or(Error::MomentumOutOfRange {
        k: k_target.to_f64_lossy(),
        k_max: g.kx_max().to_f64_lossy(),
    })?;
    let kx = T::c(signed_bin(bin, g.nx) as f64) * g.dkx();

    let span = req.window.1 - req.window.0;
    let dt = span / T::c(req.samples as f64);
    let mut phasor = vec![Complex::new(T::zero(), T::zero()); g.len()];
    for s in 0..req.samples {
        let t = req.window.0 + (T::c(s as f64) + T::c(0.5)) * dt;
        let e = provider.electric_field_x(t)?;
        let w = Complex::from_polar(T::c(2.0) * dt / span, req.omega * t);
        for (p, v) in phasor.iter_mut().zip(&e.values) {
            *p = *p + w * *v;
        }
    }

    // x transform row by row, then trigonometric interpolation to y_e
    let mut rows = Vec::with_capacity(g.ny);
    for j in 0..g.ny {
        let mut acc = Complex::new(T::zero(), T::zero());
        for i in 0..g.nx {
            acc = acc + phasor[g.index(i, j)] * Complex::from_polar(T::one(), -kx * g.x(i));
        }
        rows.push(acc * g.dx);
    }
    let at_y = trig_interpolate(&rows, g.y0, g.dy, req.y_electron);
    Ok(GFactor {
        value: at_y / (T::c(2.0) * req.omega),
        kx,
    })
}

/// Band-limited interpolation of periodic samples `f(y0 + j dy)` at `y`.
/// The Nyquist component is split symmetrically so the interpolant is real
/// for real data.
fn trig_interpolate<T: Real>(f: &[Complex<T>], y0: T, dy: T, y: T) -> Complex<T> {
    let n = f.len();
    let period = dy * T::c(n as f64);
    let mut acc = Complex::new(T::zero(), T::zero());
    for m in 0..n {
        let km = T::c(signed_bin(m, n) as f64) * T::c(2.0) * T::PI() / period;
        let mut coef = Complex::new(T::zero(), T::zero());
        for (j, v) in f.iter().enumerate() {
            coef = coef + *v * Complex::from_polar(T::one(), -km * dy * T::c(j as f64));
        }
        let u = y - y0;
        let basis = if n % 2 == 0 && m == n / 2 {
            Complex::new((km * u).cos(), T::zero())
        } else {
            Complex::from_polar(T::one(), km * u)
        };
        acc = acc + coef * basis;
    }
    acc / T::c(n as f64)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn trig_interpolation_is_exact_at_nodes_and_for_band_limited_data() {
        let n = 16;
        let (y0, dy) = (-3.0, 0.5);
        let q = 2.0 * std::f64::consts::PI / (n as f64 * dy);
        let f: Vec<Complex<f64>> = (0..n)
            .map(|j| {
                let y = y0 + j as f64 * dy;
                Complex::new((3.0 * q * y).cos() + 0.5, (q * y).sin())
            })
            .collect();
        assert!((trig_interpolate(&f, y0, dy, y0 + 5.0 * dy) - f[5]).norm() < 1e-12);
        let y = 0.123;
        let expect = Complex::new((3.0 * q * y).cos() + 0.5, (q * y).sin());
        assert!((trig_interpolate(&f, y0, dy, y) - expect).norm() < 1e-12);
    }
}
