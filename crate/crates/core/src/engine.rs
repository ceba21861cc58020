//! Time propagation of the coupled envelope equations.
//!
//! For orbital `n` with carrier `k` the envelope obeys (atomic units)
//!
//! ```text
//! i d_t env = [ -1/2 (lap + 2i k.grad) - i A.grad + A.k + V_H - phi ] env
//!             + sum_m v_nm env_m
//! ```
//!
//! with `V_H` the Hartree potential of the other orbitals and `v_nm` the
//! exchange potential of same-spin partners. In Fourier space the kinetic
//! part and the uniform part of `A` form the diagonal operator
//! `L(q) = q^2/2 + k.q + A.(q + k)`.
//!
//! The default scheme treats `L` exactly with an integrating factor and the
//! remaining terms with classical RK4 (Lawson RK4). A plain RK4 on the full
//! right-hand side is also available.

use std::time::Instant;

use rustfft::num_complex::Complex;

use crate::em::{FieldProvider, FieldSample};
use crate::error::{invalid, Error, Result};
use crate::grid::{ComplexField, GridSpec};
use crate::poisson::{exchange_into, plane_wave, ScreenedKernel};
use crate::real::Real;
use crate::spectral::Spectral;
use crate::wavepacket::{free_dispersion, inner_product, Spin, Wavepacket};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum SpinMode {
    Polarized,
    Unpolarized,
}

#[derive(Clone, Debug, PartialEq)]
pub struct SystemState<T> {
    pub orbitals: Vec<Wavepacket<T>>,
    pub time: T,
    pub spin_mode: SpinMode,
}

impl<T: Real> SystemState<T> {
    pub fn new(orbitals: Vec<Wavepacket<T>>, time: T, spin_mode: SpinMode) -> Result<Self> {
        if orbitals.is_empty() {
            return Err(Error::OrbitalCount { expected: 1, found: 0 });
        }
        let g = *orbitals[0].grid();
        for o in &orbitals[1..] {
            g.check_same(o.grid())?;
        }
        match spin_mode {
            SpinMode::Polarized => {
                if orbitals.iter().any(|o| o.spin != orbitals[0].spin) {
                    return Err(Error::SpinConfiguration("polarized state requires equal spins".into()));
                }
                for a in 0..orbitals.len() {
                    for b in a + 1..orbitals.len() {
                        let s = inner_product(&orbitals[a], &orbitals[b])?.norm();
                        let na = orbitals[a].norm_sqr().sqrt();
                        let nb = orbitals[b].norm_sqr().sqrt();
                        let overlap = s / (na * nb);
                        if overlap > T::one() - T::c(1e-9) {
                            return Err(Error::ParallelOrbitals {
                                overlap: overlap.to_f64_lossy(),
                            });
                        }
                    }
                }
            }
            SpinMode::Unpolarized => {
                if orbitals.len() == 2 && orbitals[0].spin == orbitals[1].spin {
                    return Err(Error::SpinConfiguration(
                        "unpolarized two-electron state requires opposite spins".into(),
                    ));
                }
            }
        }
        Ok(Self {
            orbitals,
            time,
            spin_mode,
        })
    }

    pub fn grid(&self) -> &GridSpec<T> {
        self.orbitals[0].grid()
    }

    pub fn norms(&self) -> Vec<T> {
        self.orbitals.iter().map(|o| o.norm_sqr()).collect()
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Scheme {
    /// Exact diagonal propagation of kinetic and uniform-`A` terms, RK4 for the rest.
    IntegratingFactorRk4,
    /// Classical RK4 on the full right-hand side.
    Rk4,
}

/// Switches for individual terms of the equations of motion.
///
/// Everything except the default is meant for tests and oracle comparisons.
#[derive(Clone, Debug, PartialEq)]
pub struct Terms<T> {
    pub kinetic: bool,
    pub hartree: bool,
    pub exchange: bool,
    /// Multiplies both electron-electron terms (`e^2` scaling).
    pub interaction_scale: T,
    /// Orbitals that feel only the external field; they still act as sources.
    pub passive: Vec<usize>,
}

impl<T: Real> Default for Terms<T> {
    fn default() -> Self {
        Self {
            kinetic: true,
            hartree: true,
            exchange: true,
            interaction_scale: T::one(),
            passive: Vec::new(),
        }
    }
}

/// Absorbing layer `W = strength (xi_x^4 + xi_y^4)`, `xi` the fractional
/// depth into the layer along each axis.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Cap<T> {
    pub width: [T; 2],
    pub strength: T,
}

impl<T: Real> Cap<T> {
    pub fn none() -> Self {
        Self {
            width: [T::zero(); 2],
            strength: T::zero(),
        }
    }

    /// Layers of `fraction` of the domain on every side.
    pub fn fraction(grid: &GridSpec<T>, fraction: T, strength: T) -> Self {
        Self {
            width: [grid.lx() * fraction, grid.ly() * fraction],
            strength,
        }
    }

    pub fn potential(&self, grid: &GridSpec<T>) -> Vec<T> {
        let depth = |u: T, lo: T, len: T, w: T| -> T {
            if !(w > T::zero()) {
                return T::zero();
            }
            let a = (lo + w - u) / w;
            let b = (u - (lo + len - w)) / w;
            a.max(b).max(T::zero()).min(T::one())
        };
        let mut out = Vec::with_capacity(grid.len());
        for j in 0..grid.ny {
            let yi = depth(grid.y(j), grid.y0, grid.ly(), self.width[1]);
            for i in 0..grid.nx {
                let xi = depth(grid.x(i), grid.x0, grid.lx(), self.width[0]);
                out.push(self.strength * (xi.powi(4) + yi.powi(4)));
            }
        }
        out
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct PropagatorConfig<T> {
    pub dt: T,
    pub t_end: T,
    pub cap: Cap<T>,
    pub snapshot_stride: usize,
    /// Step-size ratio used by self-convergence checks.
    pub convergence_dt_factor: T,
    pub scheme: Scheme,
    pub terms: Terms<T>,
}

impl<T: Real> PropagatorConfig<T> {
    pub fn new(dt: T, t_end: T) -> Self {
        Self {
            dt,
            t_end,
            cap: Cap::none(),
            snapshot_stride: 1,
            convergence_dt_factor: T::c(2.0),
            scheme: Scheme::IntegratingFactorRk4,
            terms: Terms::default(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.dt > T::zero()) || !self.dt.is_finite() {
            return Err(invalid("dt", "must be positive and finite"));
        }
        if !self.t_end.is_finite() {
            return Err(invalid("t_end", "must be finite"));
        }
        if self.cap.width.iter().any(|w| !(*w >= T::zero())) || !(self.cap.strength >= T::zero()) {
            return Err(invalid("cap", "width and strength must be non-negative"));
        }
        if self.snapshot_stride == 0 {
            return Err(invalid("snapshot_stride", "must be >= 1"));
        }
        if !(self.convergence_dt_factor > T::one()) {
            return Err(invalid("convergence_dt_factor", "must exceed 1"));
        }
        Ok(())
    }
}

/// Largest stable RK4 step for a spectral radius `lambda` along the imaginary axis.
pub fn rk4_stability_limit<T: Real>(lambda: T) -> T {
    T::c(2.0 * std::f64::consts::SQRT_2) / lambda
}

/// Spectral radius of the diagonal operator `L` for an orbital (uniform `A` included).
pub fn linear_spectral_radius<T: Real>(grid: &GridSpec<T>, k: [T; 2], a: [T; 2], kinetic: bool) -> T {
    let mut m = T::zero();
    for &qx in &[grid.kx(grid.nx / 2), grid.kx(grid.nx / 2 - 1)] {
        for &qy in &[grid.ky(grid.ny / 2), grid.ky(grid.ny / 2 - 1), T::zero()] {
            let mut l = a[0] * (qx + k[0]) + a[1] * (qy + k[1]);
            if kinetic {
                l = l + (qx * qx + qy * qy) / T::c(2.0) + k[0] * qx + k[1] * qy;
            }
            m = m.max(l.abs());
        }
    }
    m
}

/// Suggested default step: half the RK4 stability limit for the terms the
/// chosen scheme integrates explicitly.
pub fn suggest_dt<T: Real>(
    state: &SystemState<T>,
    provider: &dyn FieldProvider<T>,
    scheme: Scheme,
    interaction_bound: T,
) -> T {
    let mut lambda = provider.potential_bound() + interaction_bound;
    let g = state.grid();
    let kmax = g.kx_max().hypot(g.ky_max());
    if scheme == Scheme::Rk4 {
        let lin = state
            .orbitals
            .iter()
            .map(|o| linear_spectral_radius(g, o.carrier_k, [T::zero(); 2], true))
            .fold(T::zero(), T::max);
        lambda = lambda + lin;
    }
    lambda = lambda + provider.sampled_a_bound() * kmax;
    if !(lambda > T::zero()) {
        lambda = T::c(1e-3);
    }
    T::c(0.5) * rk4_stability_limit(lambda)
}

type Buf<T> = Vec<Complex<T>>;

/// Reusable propagation workspace bound to one grid, kernel and orbital set.
pub struct Propagator<'a, T: Real> {
    kernel: &'a ScreenedKernel<T>,
    spectral: Spectral<T>,
    grid: GridSpec<T>,
    terms: Terms<T>,
    scheme: Scheme,
    carriers: Vec<[T; 2]>,
    spins: Vec<Spin>,
    /// `exp(i (k_m - k_n).r)` for pairs `n < m` with non-zero offset.
    pair_phase: Vec<Option<Buf<T>>>,
    cap: Vec<T>,
    qx: Vec<T>,
    qy: Vec<T>,
    last_lambda: T,
    /// Kinetic half-step factors `exp(-i (q^2/2 + k.q) h)` per orbital, keyed by `h`.
    kinetic_cache: Option<(T, Vec<Buf<T>>)>,
}

fn pair_index(n: usize, m: usize, count: usize) -> usize {
    debug_assert!(n < m);
    n * count + m
}

impl<'a, T: Real> Propagator<'a, T> {
    pub fn new(state: &SystemState<T>, kernel: &'a ScreenedKernel<T>, config: &PropagatorConfig<T>) -> Result<Self> {
        config.validate()?;
        let grid = *state.grid();
        kernel.grid.check_same(&grid)?;
        for &p in &config.terms.passive {
            if p >= state.orbitals.len() {
                return Err(invalid("passive", "orbital index out of range"));
            }
        }
        let count = state.orbitals.len();
        let carriers: Vec<[T; 2]> = state.orbitals.iter().map(|o| o.carrier_k).collect();
        let mut pair_phase = vec![None; count * count];
        for n in 0..count {
            for m in n + 1..count {
                let dk = [carriers[m][0] - carriers[n][0], carriers[m][1] - carriers[n][1]];
                if dk != [T::zero(); 2] {
                    pair_phase[pair_index(n, m, count)] = Some(plane_wave(&grid, dk));
                }
            }
        }
        let mut qx = Vec::with_capacity(grid.len());
        let mut qy = Vec::with_capacity(grid.len());
        for j in 0..grid.ny {
            for i in 0..grid.nx {
                qx.push(grid.kx(i));
                qy.push(grid.ky(j));
            }
        }
        Ok(Self {
            kernel,
            spectral: kernel.spectral().clone(),
            grid,
            terms: config.terms.clone(),
            scheme: config.scheme,
            carriers,
            spins: state.orbitals.iter().map(|o| o.spin).collect(),
            pair_phase,
            cap: config.cap.potential(&grid),
            qx,
            qy,
            last_lambda: T::zero(),
            kinetic_cache: None,
        })
    }

    /// Spectral radius of the explicitly integrated terms at the last evaluation.
    pub fn last_lambda(&self) -> T {
        self.last_lambda
    }

    fn interacts(&self, n: usize) -> bool {
        !self.terms.passive.contains(&n)
    }

    fn exchange_active(&self, n: usize, m: usize) -> bool {
        self.terms.exchange && self.spins[n] == self.spins[m]
    }

    /// Real-space action of the non-diagonal terms, `w_n = (V_H - phi) env_n + sum v_nm env_m`
    /// plus the sampled part of `A`, for every orbital.
    fn potential_action(&mut self, envs: &[Buf<T>], field: &FieldSample<T>) -> Result<Vec<Buf<T>>> {
        let count = envs.len();
        let len = self.grid.len();
        let zero = Complex::new(T::zero(), T::zero());
        let scale = self.terms.interaction_scale;
        let any_interacting = (0..count).any(|n| self.interacts(n)) && count > 1;

        // Hartree potentials of individual orbitals, two per complex transform.
        let mut single: Vec<Vec<T>> = Vec::new();
        if self.terms.hartree && any_interacting {
            single = vec![Vec::new(); count];
            let mut m = 0;
            while m < count {
                let mut buf: Buf<T> = if m + 1 < count {
                    envs[m]
                        .iter()
                        .zip(&envs[m + 1])
                        .map(|(a, b)| Complex::new(a.norm_sqr(), b.norm_sqr()))
                        .collect()
                } else {
                    envs[m].iter().map(|a| Complex::new(a.norm_sqr(), T::zero())).collect()
                };
                self.kernel.convolve_in_place(&mut buf);
                single[m] = buf.iter().map(|v| v.re * scale).collect();
                if m + 1 < count {
                    single[m + 1] = buf.iter().map(|v| v.im * scale).collect();
                }
                m += 2;
            }
        }

        let mut lambda_pot = T::zero();
        let mut out: Vec<Buf<T>> = Vec::with_capacity(count);
        for n in 0..count {
            let mut v: Vec<T> = field.phi.values.iter().map(|p| -*p).collect();
            if !single.is_empty() && self.interacts(n) {
                for (m, vm) in single.iter().enumerate() {
                    if m == n {
                        continue;
                    }
                    for (a, b) in v.iter_mut().zip(vm) {
                        *a = *a + *b;
                    }
                }
            }
            lambda_pot = lambda_pot.max(v.iter().fold(T::zero(), |a, b| a.max(b.abs())));
            out.push(envs[n].iter().zip(&v).map(|(e, p)| *e * *p).collect());
        }

        let mut lambda_x = T::zero();
        let mut vx = vec![zero; len];
        for n in 0..count {
            for m in n + 1..count {
                let (an, am) = (self.interacts(n), self.interacts(m));
                if !self.exchange_active(n, m) || !(an || am) {
                    continue;
                }
                let phase = &self.pair_phase[pair_index(n, m, count)];
                match phase {
                    None => exchange_into(self.kernel, &envs[m], &envs[n], [T::zero(); 2], &mut vx),
                    Some(ph) => exchange_with_phase(self.kernel, &envs[m], &envs[n], ph, &mut vx),
                }
                lambda_x = lambda_x.max(vx.iter().fold(T::zero(), |a, b| a.max(b.norm_sqr())).sqrt() * scale);
                // v_nm acts on env_m in the equation of n; v_mn = conj(v_nm) acts on env_n for m.
                if an {
                    for (o, (x, e)) in out[n].iter_mut().zip(vx.iter().zip(&envs[m])) {
                        *o = *o + *x * *e * scale;
                    }
                }
                if am {
                    for (o, (x, e)) in out[m].iter_mut().zip(vx.iter().zip(&envs[n])) {
                        *o = *o + x.conj() * *e * scale;
                    }
                }
            }
        }

        let mut lambda_a = T::zero();
        if let Some([ax, ay]) = &field.sampled_a {
            for n in 0..count {
                let k = self.carriers[n];
                let mut gx = envs[n].clone();
                self.spectral.forward(&mut gx);
                let mut gy = gx.clone();
                for idx in 0..len {
                    gx[idx] = gx[idx] * Complex::new(T::zero(), self.qx[idx]);
                    gy[idx] = gy[idx] * Complex::new(T::zero(), self.qy[idx]);
                }
                self.spectral.inverse(&mut gx);
                self.spectral.inverse(&mut gy);
                for idx in 0..len {
                    let (a0, a1) = (ax.values[idx], ay.values[idx]);
                    lambda_a = lambda_a.max(a0.hypot(a1));
                    let mi = Complex::new(T::zero(), -T::one());
                    let term = (gx[idx] * mi + envs[n][idx] * k[0]) * a0 + (gy[idx] * mi + envs[n][idx] * k[1]) * a1;
                    out[n][idx] = out[n][idx] + term;
                }
            }
        }
        let kmax = self.grid.kx_max().hypot(self.grid.ky_max());
        self.last_lambda = lambda_pot + lambda_x + lambda_a * kmax;
        for o in &out {
            if o.iter().any(|v| !v.re.is_finite() || !v.im.is_finite()) {
                return Err(Error::NonFinite("right-hand side"));
            }
        }
        Ok(out)
    }

    /// Phase `Theta_n(q) = [q^2/2 + k.q] h + F.(q + k)` of the diagonal propagator.
    fn diagonal_phase(&self, n: usize, idx: usize, h: T, f: [T; 2]) -> T {
        let k = self.carriers[n];
        let (qx, qy) = (self.qx[idx], self.qy[idx]);
        let mut th = f[0] * (qx + k[0]) + f[1] * (qy + k[1]);
        if self.terms.kinetic {
            th = th + ((qx * qx + qy * qy) / T::c(2.0) + k[0] * qx + k[1] * qy) * h;
        }
        th
    }

    /// Diagonal propagators `exp(-i Theta_n)` over an interval of length `h`
    /// with uniform-`A` integral `f`.
    fn diagonal_propagators(&mut self, h: T, f: [T; 2]) -> Vec<Buf<T>> {
        let (nx, ny) = (self.grid.nx, self.grid.ny);
        let one = Complex::new(T::one(), T::zero());
        if self.terms.kinetic && self.kinetic_cache.as_ref().map(|c| c.0) != Some(h) {
            let mut all = Vec::with_capacity(self.carriers.len());
            for k in &self.carriers {
                all.push(
                    (0..self.grid.len())
                        .map(|i| {
                            let (qx, qy) = (self.qx[i], self.qy[i]);
                            let th = ((qx * qx + qy * qy) / T::c(2.0) + k[0] * qx + k[1] * qy) * h;
                            Complex::from_polar(T::one(), -th)
                        })
                        .collect(),
                );
            }
            self.kinetic_cache = Some((h, all));
        }
        let mut out = Vec::with_capacity(self.carriers.len());
        for (n, k) in self.carriers.iter().enumerate() {
            let px: Vec<Complex<T>> = (0..nx).map(|i| Complex::from_polar(T::one(), -f[0] * (self.qx[i] + k[0]))).collect();
            let py: Vec<Complex<T>> =
                (0..ny).map(|j| Complex::from_polar(T::one(), -f[1] * (self.qy[j * nx] + k[1]))).collect();
            let mut e = Vec::with_capacity(self.grid.len());
            for (j, y) in py.iter().enumerate() {
                for (i, x) in px.iter().enumerate() {
                    let base = match &self.kinetic_cache {
                        Some((_, c)) if self.terms.kinetic => c[n][j * nx + i],
                        _ => one,
                    };
                    e.push(base * (*x * *y));
                }
            }
            out.push(e);
        }
        out
    }

    /// Full right-hand side `d_t env` in real space (plain scheme and the public `rhs`).
    fn full_rhs(&mut self, envs: &[Buf<T>], field: &FieldSample<T>) -> Result<Vec<Buf<T>>> {
        let mut w = self.potential_action(envs, field)?;
        let a = field.uniform_a;
        let mut lin_max = T::zero();
        for (n, wn) in w.iter_mut().enumerate() {
            let mut u = envs[n].clone();
            self.spectral.forward(&mut u);
            for (idx, v) in u.iter_mut().enumerate() {
                // generator of the diagonal part per unit time
                let l = self.diagonal_phase(n, idx, T::one(), a);
                lin_max = lin_max.max(l.abs());
                *v = *v * l;
            }
            self.spectral.inverse(&mut u);
            for (o, lu) in wn.iter_mut().zip(&u) {
                let s = *o + *lu;
                *o = Complex::new(s.im, -s.re);
            }
        }
        self.last_lambda = self.last_lambda + lin_max;
        Ok(w)
    }

    /// Advances all envelopes from `t` by `h`.
    pub fn step_envelopes(
        &mut self,
        envs: &mut [Buf<T>],
        t: T,
        h: T,
        provider: &dyn FieldProvider<T>,
    ) -> Result<()> {
        match self.scheme {
            Scheme::IntegratingFactorRk4 => self.step_lawson(envs, t, h, provider)?,
            Scheme::Rk4 => self.step_rk4(envs, t, h, provider)?,
        }
        let limit = rk4_stability_limit(self.last_lambda);
        if h > limit {
            return Err(Error::StabilityViolated {
                dt: h.to_f64_lossy(),
                bound: limit.to_f64_lossy(),
            });
        }
        if self.cap.iter().any(|w| *w > T::zero()) {
            let mask: Vec<T> = self.cap.iter().map(|w| (-h * *w).exp()).collect();
            for e in envs.iter_mut() {
                for (v, m) in e.iter_mut().zip(&mask) {
                    *v = *v * *m;
                }
            }
        }
        for e in envs.iter() {
            if e.iter().any(|v| !v.re.is_finite() || !v.im.is_finite()) {
                return Err(Error::NonFinite("propagated envelope"));
            }
        }
        Ok(())
    }

    fn step_rk4(&mut self, envs: &mut [Buf<T>], t: T, h: T, provider: &dyn FieldProvider<T>) -> Result<()> {
        let half = h / T::c(2.0);
        let f0 = provider.sample(t)?;
        let fm = provider.sample(t + half)?;
        let f1 = provider.sample(t + h)?;
        let axpy = |base: &[Buf<T>], k: &[Buf<T>], s: T| -> Vec<Buf<T>> {
            base.iter()
                .zip(k)
                .map(|(b, kk)| b.iter().zip(kk).map(|(x, y)| *x + *y * s).collect())
                .collect()
        };
        let k1 = self.full_rhs(envs, &f0)?;
        let lam = self.last_lambda;
        let k2 = self.full_rhs(&axpy(envs, &k1, half), &fm)?;
        let k3 = self.full_rhs(&axpy(envs, &k2, half), &fm)?;
        let k4 = self.full_rhs(&axpy(envs, &k3, h), &f1)?;
        let (s1, s2) = (h / T::c(6.0), h / T::c(3.0));
        for n in 0..envs.len() {
            for idx in 0..envs[n].len() {
                envs[n][idx] = envs[n][idx] + k1[n][idx] * s1 + (k2[n][idx] + k3[n][idx]) * s2 + k4[n][idx] * s1;
            }
        }
        self.last_lambda = lam;
        Ok(())
    }

    fn step_lawson(&mut self, envs: &mut [Buf<T>], t: T, h: T, provider: &dyn FieldProvider<T>) -> Result<()> {
        let half = h / T::c(2.0);
        let count = envs.len();
        let len = self.grid.len();
        let f0 = provider.sample(t)?;
        let fm = provider.sample(t + half)?;
        let f1 = provider.sample(t + h)?;
        let int_a = provider.uniform_a_integral(t, t + half);
        let int_b = provider.uniform_a_integral(t + half, t + h);

        // diagonal propagators over the two half steps
        let ea = self.diagonal_propagators(half, int_a);
        let eb = self.diagonal_propagators(half, int_b);

        let to_k = |s: &Spectral<T>, v: &[Buf<T>]| -> Vec<Buf<T>> {
            v.iter()
                .map(|b| {
                    let mut c = b.clone();
                    s.forward(&mut c);
                    c
                })
                .collect()
        };
        let to_r = |s: &Spectral<T>, v: Vec<Buf<T>>| -> Vec<Buf<T>> {
            v.into_iter()
                .map(|mut b| {
                    s.inverse(&mut b);
                    b
                })
                .collect()
        };
        // N(u) = -i FFT(w)
        let nonlinear = |this: &mut Self, r: &[Buf<T>], f: &FieldSample<T>| -> Result<Vec<Buf<T>>> {
            let w = this.potential_action(r, f)?;
            Ok(w.into_iter()
                .map(|mut b| {
                    this.spectral.forward(&mut b);
                    for v in b.iter_mut() {
                        *v = Complex::new(v.im, -v.re);
                    }
                    b
                })
                .collect())
        };

        let u: Vec<Buf<T>> = to_k(&self.spectral, envs);
        let k1 = nonlinear(self, envs, &f0)?;
        let lam = self.last_lambda;

        let mut s2 = Vec::with_capacity(count);
        for n in 0..count {
            s2.push((0..len).map(|i| ea[n][i] * (u[n][i] + k1[n][i] * half)).collect::<Buf<T>>());
        }
        let k2 = nonlinear(self, &to_r(&self.spectral, s2), &fm)?;
        let lam = lam.max(self.last_lambda);

        let mut s3 = Vec::with_capacity(count);
        for n in 0..count {
            s3.push((0..len).map(|i| ea[n][i] * u[n][i] + k2[n][i] * half).collect::<Buf<T>>());
        }
        let k3 = nonlinear(self, &to_r(&self.spectral, s3), &fm)?;
        let lam = lam.max(self.last_lambda);

        let mut s4 = Vec::with_capacity(count);
        for n in 0..count {
            s4.push(
                (0..len)
                    .map(|i| eb[n][i] * (ea[n][i] * u[n][i] + k3[n][i] * h))
                    .collect::<Buf<T>>(),
            );
        }
        let k4 = nonlinear(self, &to_r(&self.spectral, s4), &f1)?;
        let lam = lam.max(self.last_lambda);

        let (c1, c2) = (h / T::c(6.0), h / T::c(3.0));
        let mut next = Vec::with_capacity(count);
        for n in 0..count {
            next.push(
                (0..len)
                    .map(|i| {
                        let full = eb[n][i] * ea[n][i];
                        full * (u[n][i] + k1[n][i] * c1) + eb[n][i] * (k2[n][i] + k3[n][i]) * c2 + k4[n][i] * c1
                    })
                    .collect::<Buf<T>>(),
            );
        }
        for (dst, src) in envs.iter_mut().zip(to_r(&self.spectral, next)) {
            *dst = src;
        }
        self.last_lambda = lam;
        Ok(())
    }
}

/// `v_nm` for a pair with carrier offset, reusing a precomputed `exp(i dk.r)`.
fn exchange_with_phase<T: Real>(
    kernel: &ScreenedKernel<T>,
    env_m: &[Complex<T>],
    env_n: &[Complex<T>],
    phase: &[Complex<T>],
    out: &mut [Complex<T>],
) {
    for idx in 0..out.len() {
        out[idx] = env_m[idx].conj() * env_n[idx] * phase[idx].conj();
    }
    kernel.convolve_in_place(out);
    for idx in 0..out.len() {
        out[idx] = -out[idx] * phase[idx];
    }
}

/// Right-hand side `d_t env_n` of every orbital for a given field sample.
pub fn rhs<T: Real>(
    state: &SystemState<T>,
    field: &FieldSample<T>,
    kernel: &ScreenedKernel<T>,
    terms: &Terms<T>,
) -> Result<Vec<ComplexField<T>>> {
    let mut config = PropagatorConfig::new(T::one(), state.time);
    config.terms = terms.clone();
    config.scheme = Scheme::Rk4;
    let mut p = Propagator::new(state, kernel, &config)?;
    let envs: Vec<Buf<T>> = state.orbitals.iter().map(|o| o.envelope.values.clone()).collect();
    let out = p.full_rhs(&envs, field)?;
    Ok(out
        .into_iter()
        .map(|values| ComplexField {
            grid: *state.grid(),
            values,
        })
        .collect())
}

/// One step of length `config.dt` from `state.time`.
pub fn step<T: Real>(
    state: &SystemState<T>,
    provider: &dyn FieldProvider<T>,
    kernel: &ScreenedKernel<T>,
    config: &PropagatorConfig<T>,
) -> Result<SystemState<T>> {
    let mut p = Propagator::new(state, kernel, config)?;
    let mut envs: Vec<Buf<T>> = state.orbitals.iter().map(|o| o.envelope.values.clone()).collect();
    p.step_envelopes(&mut envs, state.time, config.dt, provider)?;
    Ok(with_envelopes(state, envs, state.time + config.dt))
}

fn with_envelopes<T: Real>(state: &SystemState<T>, envs: Vec<Buf<T>>, time: T) -> SystemState<T> {
    let mut next = state.clone();
    for (o, e) in next.orbitals.iter_mut().zip(envs) {
        o.envelope.values = e;
    }
    next.time = time;
    next
}

/// Receives snapshots during a run.
pub trait Sink<T: Real> {
    fn snapshot(&mut self, step: usize, state: &SystemState<T>) -> Result<()>;
}

/// Discards snapshots.
pub struct NullSink;

impl<T: Real> Sink<T> for NullSink {
    fn snapshot(&mut self, _step: usize, _state: &SystemState<T>) -> Result<()> {
        Ok(())
    }
}

/// Keeps every snapshot in memory.
#[derive(Default)]
pub struct MemorySink<T> {
    pub snapshots: Vec<(usize, SystemState<T>)>,
}

impl<T: Real> Sink<T> for MemorySink<T> {
    fn snapshot(&mut self, step: usize, state: &SystemState<T>) -> Result<()> {
        self.snapshots.push((step, state.clone()));
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct RunSummary<T> {
    pub steps: usize,
    pub dt: T,
    pub final_time: T,
    /// `(time, per-orbital norms)` at every snapshot.
    pub norms: Vec<(T, Vec<T>)>,
    pub snapshots: usize,
    pub wall_clock_seconds: f64,
    pub max_lambda_dt: T,
}

/// Number of equal steps of at most `dt` covering `[t0, t1]`.
pub fn step_count<T: Real>(t0: T, t1: T, dt: T) -> usize {
    let span = t1 - t0;
    if !(span > T::zero()) {
        return 0;
    }
    let n = (span / dt).to_f64_lossy();
    let r = n.round();
    if (n - r).abs() < 1e-9 * n.max(1.0) {
        r as usize
    } else {
        n.ceil() as usize
    }
}

/// Propagates to `config.t_end`, emitting the initial state, every
/// `snapshot_stride`-th step and the final state.
pub fn run<T: Real>(
    initial: &SystemState<T>,
    provider: &dyn FieldProvider<T>,
    kernel: &ScreenedKernel<T>,
    config: &PropagatorConfig<T>,
    sink: &mut dyn Sink<T>,
) -> Result<(SystemState<T>, RunSummary<T>)> {
    let clock = Instant::now();
    let mut p = Propagator::new(initial, kernel, config)?;
    let t0 = initial.time;
    let steps = step_count(t0, config.t_end, config.dt);
    let h = if steps > 0 {
        (config.t_end - t0) / T::c(steps as f64)
    } else {
        config.dt
    };
    let mut envs: Vec<Buf<T>> = initial.orbitals.iter().map(|o| o.envelope.values.clone()).collect();
    let mut state = initial.clone();
    let mut norms = vec![(t0, state.norms())];
    sink.snapshot(0, &state)?;
    let mut snapshots = 1;
    let mut max_lambda_dt = T::zero();
    for s in 1..=steps {
        let t = t0 + h * T::c((s - 1) as f64);
        p.step_envelopes(&mut envs, t, h, provider)?;
        max_lambda_dt = max_lambda_dt.max(p.last_lambda() * h);
        if s % config.snapshot_stride == 0 || s == steps {
            state = with_envelopes(&state, envs.clone(), t0 + h * T::c(s as f64));
            norms.push((state.time, state.norms()));
            sink.snapshot(s, &state)?;
            snapshots += 1;
        }
    }
    if steps == 0 {
        state = with_envelopes(&state, envs, t0);
    }
    Ok((
        state.clone(),
        RunSummary {
            steps,
            dt: h,
            final_time: state.time,
            norms,
            snapshots,
            wall_clock_seconds: clock.elapsed().as_secs_f64(),
            max_lambda_dt,
        },
    ))
}

/// Propagates without snapshots and returns the final state.
pub fn propagate<T: Real>(
    initial: &SystemState<T>,
    provider: &dyn FieldProvider<T>,
    kernel: &ScreenedKernel<T>,
    config: &PropagatorConfig<T>,
) -> Result<SystemState<T>> {
    Ok(run(initial, provider, kernel, config, &mut NullSink)?.0)
}

/// Self-convergence ratio `|u(h) - u(h/f)| / |u(h/f) - u(h/f^2)|` of the
/// final state, `f = convergence_dt_factor`; about `f^4` for a fourth-order scheme.
pub fn richardson_ratio<T: Real>(
    initial: &SystemState<T>,
    provider: &dyn FieldProvider<T>,
    kernel: &ScreenedKernel<T>,
    config: &PropagatorConfig<T>,
) -> Result<T> {
    let f = config.convergence_dt_factor;
    let mut finals = Vec::with_capacity(3);
    let mut dt = config.dt;
    for _ in 0..3 {
        let mut c = config.clone();
        c.dt = dt;
        finals.push(propagate(initial, provider, kernel, &c)?);
        dt = dt / f;
    }
    let dist = |a: &SystemState<T>, b: &SystemState<T>| -> Result<T> {
        let mut acc = T::zero();
        for (x, y) in a.orbitals.iter().zip(&b.orbitals) {
            acc = acc + x.envelope.distance_sqr(&y.envelope)?;
        }
        Ok(acc.sqrt())
    };
    let coarse = dist(&finals[0], &finals[1])?;
    let fine = dist(&finals[1], &finals[2])?;
    if !(fine > T::zero()) {
        return Err(invalid("dt", "finest step pair is identical; nothing to compare"));
    }
    Ok(coarse / fine)
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct EnergyBreakdown<T> {
    pub kinetic: T,
    pub hartree: T,
    pub exchange: T,
}

impl<T: Real> EnergyBreakdown<T> {
    pub fn total(&self) -> T {
        self.kinetic + self.hartree + self.exchange
    }
}

/// Field-free Hartree-Fock energy `sum T_n + 1/2 sum_{n!=m} (J_nm + K_nm)`.
///
/// Kinetic energies use the full momentum `k_n + q`.
pub fn energy_functional<T: Real>(state: &SystemState<T>, kernel: &ScreenedKernel<T>) -> Result<EnergyBreakdown<T>> {
    let g = *state.grid();
    kernel.grid.check_same(&g)?;
    let count = state.orbitals.len();
    let cell = g.cell_area();
    let spectral = kernel.spectral();
    let mut kinetic = T::zero();
    for o in &state.orbitals {
        let mut u = o.envelope.values.clone();
        spectral.forward(&mut u);
        let mut acc = T::zero();
        for j in 0..g.ny {
            for i in 0..g.nx {
                let k = [o.carrier_k[0] + g.kx(i), o.carrier_k[1] + g.ky(j)];
                acc = acc + u[g.index(i, j)].norm_sqr() * free_dispersion(k);
            }
        }
        // Parseval: sum |u|^2 = N sum |env|^2
        kinetic = kinetic + acc * cell / T::c(g.len() as f64);
    }
    let mut hartree = T::zero();
    let mut exchange = T::zero();
    let mut vx = vec![Complex::new(T::zero(), T::zero()); g.len()];
    for n in 0..count {
        for m in 0..count {
            if m == n {
                continue;
            }
            let rho_m: Vec<Complex<T>> =
                state.orbitals[m].envelope.values.iter().map(|v| Complex::new(v.norm_sqr(), T::zero())).collect();
            let mut vm = rho_m;
            kernel.convolve_in_place(&mut vm);
            let j: T = vm
                .iter()
                .zip(&state.orbitals[n].envelope.values)
                .fold(T::zero(), |a, (v, e)| a + v.re * e.norm_sqr());
            hartree = hartree + j * cell / T::c(2.0);
            if state.orbitals[n].spin == state.orbitals[m].spin {
                let (on, om) = (&state.orbitals[n], &state.orbitals[m]);
                let dk = [om.carrier_k[0] - on.carrier_k[0], om.carrier_k[1] - on.carrier_k[1]];
                exchange_into(kernel, &om.envelope.values, &on.envelope.values, dk, &mut vx);
                let k: T = on
                    .envelope
                    .values
                    .iter()
                    .zip(vx.iter().zip(&om.envelope.values))
                    .fold(T::zero(), |a, (en, (x, em))| a + (en.conj() * *x * *em).re);
                exchange = exchange + k * cell / T::c(2.0);
            }
        }
    }
    Ok(EnergyBreakdown {
        kinetic,
        hartree,
        exchange,
    })
}

/// Expectation value of the canonical momentum summed over orbitals.
pub fn total_momentum<T: Real>(state: &SystemState<T>, spectral: &Spectral<T>) -> [T; 2] {
    let g = *state.grid();
    let mut p = [T::zero(); 2];
    for o in &state.orbitals {
        let mut u = o.envelope.values.clone();
        spectral.forward(&mut u);
        let norm = g.cell_area() / T::c(g.len() as f64);
        for j in 0..g.ny {
            for i in 0..g.nx {
                let w = u[g.index(i, j)].norm_sqr() * norm;
                p[0] = p[0] + w * (o.carrier_k[0] + g.kx(i));
                p[1] = p[1] + w * (o.carrier_k[1] + g.ky(j));
            }
        }
    }
    p
}
