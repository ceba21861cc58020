//! Weak-coupling reduction: rate equations for densities and the mutual
//! correlation under electron-electron terms only, and a reduced propagator
//! for a second electron driven by a Volkov first electron.
//!
//! Products use full-wavefunction phases, `C = psi_1^* psi_2` with
//! `exp(i (k_2 - k_1).r)` attached. All rates are time derivatives in atomic
//! units (`hbar = e = 1`).

use rustfft::num_complex::Complex;

use crate::em::{volkov_phase, LaserPulse};
use crate::engine::rk4_stability_limit;
use crate::error::{invalid, Error, Result};
use crate::grid::{ComplexField, RealField};
use crate::observables::{density_difference, mutual_correlation, Convention};
use crate::poisson::{exchange_into, ScreenedKernel};
use crate::real::Real;
use crate::wavepacket::Wavepacket;

fn conv_real<T: Real>(kernel: &ScreenedKernel<T>, f: &[T]) -> Vec<T> {
    let mut b: Vec<Complex<T>> = f.iter().map(|v| Complex::new(*v, T::zero())).collect();
    kernel.convolve_in_place(&mut b);
    b.into_iter().map(|v| v.re).collect()
}

fn conv_complex<T: Real>(kernel: &ScreenedKernel<T>, f: &[Complex<T>]) -> Vec<Complex<T>> {
    let mut b = f.to_vec();
    kernel.convolve_in_place(&mut b);
    b
}

fn checked_correlation<T: Real>(
    w1: &Wavepacket<T>,
    w2: &Wavepacket<T>,
    kernel: &ScreenedKernel<T>,
) -> Result<ComplexField<T>> {
    kernel.grid.check_same(w1.grid())?;
    mutual_correlation(w1, w2, Convention::Full)
}

/// `d_t |psi_2|^2 = 2 Im[C (V * C^*)]`.
pub fn density_rate<T: Real>(w1: &Wavepacket<T>, w2: &Wavepacket<T>, kernel: &ScreenedKernel<T>) -> Result<RealField<T>> {
    let c = checked_correlation(w1, w2, kernel)?;
    let cc: Vec<Complex<T>> = c.values.iter().map(|v| v.conj()).collect();
    let vc = conv_complex(kernel, &cc);
    Ok(RealField {
        grid: c.grid,
        values: c.values.iter().zip(&vc).map(|(a, b)| T::c(2.0) * (*a * *b).im).collect(),
    })
}

/// `d_t C = -i [C (V * Delta) - Delta (V * C)]`.
pub fn correlation_rate<T: Real>(
    w1: &Wavepacket<T>,
    w2: &Wavepacket<T>,
    kernel: &ScreenedKernel<T>,
) -> Result<ComplexField<T>> {
    let c = checked_correlation(w1, w2, kernel)?;
    let d = density_difference(w1, w2)?;
    let vd = conv_real(kernel, &d.values);
    let vc = conv_complex(kernel, &c.values);
    let mi = Complex::new(T::zero(), -T::one());
    Ok(ComplexField {
        grid: c.grid,
        values: (0..c.values.len())
            .map(|i| mi * (c.values[i] * vd[i] - vc[i] * d.values[i]))
            .collect(),
    })
}

/// `d_t Delta = d_t |psi_1|^2 - d_t |psi_2|^2 = -4 Im[C (V * C^*)]`.
pub fn delta_rate<T: Real>(w1: &Wavepacket<T>, w2: &Wavepacket<T>, kernel: &ScreenedKernel<T>) -> Result<RealField<T>> {
    let mut r = density_rate(w1, w2, kernel)?;
    for v in r.values.iter_mut() {
        *v = -T::c(2.0) * *v;
    }
    Ok(r)
}

/// Second electron together with a prescribed first electron whose envelope
/// is frozen and only acquires the Volkov phase of the uniform laser field.
#[derive(Clone, Debug, PartialEq)]
pub struct ReducedPairState<T> {
    /// First electron at `origin`.
    pub psi1: Wavepacket<T>,
    pub psi2: Wavepacket<T>,
    pub time: T,
    /// Reference time of `psi1`.
    pub origin: T,
    /// Scales both interaction terms; 1 is physical.
    pub interaction_scale: T,
}

impl<T: Real> ReducedPairState<T> {
    pub fn new(psi1: Wavepacket<T>, psi2: Wavepacket<T>, time: T) -> Result<Self> {
        psi1.grid().check_same(psi2.grid())?;
        let s = Self {
            psi1,
            psi2,
            time,
            origin: time,
            interaction_scale: T::one(),
        };
        s.validate()?;
        Ok(s)
    }

    pub fn validate(&self) -> Result<()> {
        let tol = T::one() + T::c(1e-10);
        for w in [&self.psi1, &self.psi2] {
            if !w.envelope.is_finite() {
                return Err(Error::NonFinite("reduced pair state"));
            }
            if w.norm_sqr() > tol {
                return Err(invalid("reduced pair state", "orbital norm exceeds 1"));
            }
        }
        Ok(())
    }

    /// The first electron at time `t`.
    pub fn psi1_at(&self, pulse: Option<&LaserPulse<T>>, t: T) -> Wavepacket<T> {
        let mut w = self.psi1.clone();
        if let Some(p) = pulse {
            let ph = volkov_phase(p, w.carrier_k, self.origin, t);
            if ph != T::zero() {
                w.envelope.scale(Complex::from_polar(T::one(), -ph));
            }
        }
        w
    }
}

/// `d_t psi_2 = -i s [(V * |psi_1|^2) psi_2 + v_21 psi_1]` and the spectral radius of the bracket.
fn reduced_rhs<T: Real>(
    kernel: &ScreenedKernel<T>,
    psi1: &Wavepacket<T>,
    env2: &[Complex<T>],
    carrier2: [T; 2],
    scale: T,
) -> (Vec<Complex<T>>, T) {
    let n1: Vec<T> = psi1.envelope.values.iter().map(|v| v.norm_sqr()).collect();
    let vh = conv_real(kernel, &n1);
    let dk = [psi1.carrier_k[0] - carrier2[0], psi1.carrier_k[1] - carrier2[1]];
    let mut vx = vec![Complex::new(T::zero(), T::zero()); env2.len()];
    exchange_into(kernel, &psi1.envelope.values, env2, dk, &mut vx);
    let lam = vh.iter().fold(T::zero(), |a, v| a.max(v.abs()))
        + vx.iter().fold(T::zero(), |a, v| a.max(v.norm_sqr())).sqrt();
    let out = (0..env2.len())
        .map(|i| {
            let w = env2[i] * vh[i] + vx[i] * psi1.envelope.values[i];
            Complex::new(w.im, -w.re) * scale
        })
        .collect();
    (out, lam * scale)
}

/// Default step: a twentieth of the inverse interaction strength, capped at
/// half the RK4 stability limit.
pub fn default_reduced_dt<T: Real>(state: &ReducedPairState<T>, kernel: &ScreenedKernel<T>) -> T {
    let (_, lam) = reduced_rhs(
        kernel,
        &state.psi1,
        &state.psi2.envelope.values,
        state.psi2.carrier_k,
        state.interaction_scale,
    );
    if !(lam > T::zero()) {
        return T::c(1.0);
    }
    (T::c(0.05) / lam).min(T::c(0.5) * rk4_stability_limit(lam))
}

/// Advances the second electron by `dt` with classical RK4.
pub fn volkov_reduced_step<T: Real>(
    state: &ReducedPairState<T>,
    pulse: Option<&LaserPulse<T>>,
    kernel: &ScreenedKernel<T>,
    dt: T,
) -> Result<ReducedPairState<T>> {
    if !(dt > T::zero()) {
        return Err(invalid("dt", "must be positive"));
    }
    kernel.grid.check_same(state.psi2.grid())?;
    let s = state.interaction_scale;
    let k2 = state.psi2.carrier_k;
    let t = state.time;
    let half = dt / T::c(2.0);
    let p0 = state.psi1_at(pulse, t);
    let pm = state.psi1_at(pulse, t + half);
    let p1 = state.psi1_at(pulse, t + dt);
    let u = &state.psi2.envelope.values;
    let axpy = |k: &[Complex<T>], h: T| -> Vec<Complex<T>> { u.iter().zip(k).map(|(a, b)| *a + *b * h).collect() };
    let (r1, lam) = reduced_rhs(kernel, &p0, u, k2, s);
    let (r2, _) = reduced_rhs(kernel, &pm, &axpy(&r1, half), k2, s);
    let (r3, _) = reduced_rhs(kernel, &pm, &axpy(&r2, half), k2, s);
    let (r4, _) = reduced_rhs(kernel, &p1, &axpy(&r3, dt), k2, s);
    let limit = rk4_stability_limit(lam);
    if dt > limit {
        return Err(Error::StabilityViolated {
            dt: dt.to_f64_lossy(),
            bound: limit.to_f64_lossy(),
        });
    }
    let (c1, c2) = (dt / T::c(6.0), dt / T::c(3.0));
    let mut next = state.clone();
    for (i, v) in next.psi2.envelope.values.iter_mut().enumerate() {
        *v = *v + r1[i] * c1 + (r2[i] + r3[i]) * c2 + r4[i] * c1;
    }
    next.time = t + dt;
    if !next.psi2.envelope.is_finite() {
        return Err(Error::NonFinite("reduced step"));
    }
    Ok(next)
}
