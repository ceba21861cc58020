//! Derived quantities: correlation and density functions, pair densities and
//! PINEM spectra.

use rustfft::num_complex::Complex;

use crate::engine::{SpinMode, SystemState};
use crate::error::{invalid, Error, Result};
use crate::grid::{ComplexField, RealField};
use crate::real::Real;
use crate::spectral::Spectral;
use crate::wavepacket::{free_dispersion, to_momentum_space, to_momentum_space_in_frame, MomentumAmplitude, Wavepacket};

/// Phase convention for products of two orbitals.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum Convention {
    /// Envelopes only.
    Envelope,
    /// Full wavefunctions: spatial carrier phase `exp(i (k2 - k1).r)` attached.
    Full,
}

/// `C = psi_1^* psi_2`.
pub fn mutual_correlation<T: Real>(
    w1: &Wavepacket<T>,
    w2: &Wavepacket<T>,
    convention: Convention,
) -> Result<ComplexField<T>> {
    w1.grid().check_same(w2.grid())?;
    let g = *w1.grid();
    let dk = [w2.carrier_k[0] - w1.carrier_k[0], w2.carrier_k[1] - w1.carrier_k[1]];
    let mut values = Vec::with_capacity(g.len());
    for j in 0..g.ny {
        for i in 0..g.nx {
            let idx = g.index(i, j);
            let c = w1.envelope.values[idx].conj() * w2.envelope.values[idx];
            values.push(match convention {
                Convention::Envelope => c,
                Convention::Full => c * Complex::from_polar(T::one(), dk[0] * g.x(i) + dk[1] * g.y(j)),
            });
        }
    }
    Ok(ComplexField { grid: g, values })
}

/// `|psi_1|^2 - |psi_2|^2`.
pub fn density_difference<T: Real>(w1: &Wavepacket<T>, w2: &Wavepacket<T>) -> Result<RealField<T>> {
    w1.grid().check_same(w2.grid())?;
    Ok(RealField {
        grid: *w1.grid(),
        values: w1
            .envelope
            .values
            .iter()
            .zip(&w2.envelope.values)
            .map(|(a, b)| a.norm_sqr() - b.norm_sqr())
            .collect(),
    })
}

/// `rho_1 = sum_n |psi_n|^2`, normalized to the particle number.
pub fn one_particle_density<T: Real>(state: &SystemState<T>) -> RealField<T> {
    let g = *state.grid();
    let mut values = vec![T::zero(); g.len()];
    for o in &state.orbitals {
        for (v, e) in values.iter_mut().zip(&o.envelope.values) {
            *v = *v + e.norm_sqr();
        }
    }
    RealField { grid: g, values }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Space {
    Real,
    Momentum,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum SliceAxis {
    X,
    Kx,
}

/// Two-particle density with the transverse coordinates integrated out.
///
/// Matrices are `n x n`, row index `x_1`, column index `x_2`, and `coords`
/// is ascending.
#[derive(Clone, Debug, PartialEq)]
pub struct PairDensitySlice<T> {
    pub axis: SliceAxis,
    pub coords: Vec<T>,
    pub total: Vec<T>,
    pub uncorrelated: Vec<T>,
    /// Full exchange part, `total - uncorrelated`.
    pub exchange: Vec<T>,
    /// Phase-dependent part of the exchange term (zero for opposite spins).
    pub exchange_phase: Vec<T>,
}

impl<T: Real> PairDensitySlice<T> {
    pub fn len(&self) -> usize {
        self.coords.len()
    }

    pub fn is_empty(&self) -> bool {
        self.coords.is_empty()
    }

    pub fn at(&self, m: &[T], a: usize, b: usize) -> T {
        m[a * self.coords.len() + b]
    }

    /// `sum total * d1 * d2`.
    pub fn integral(&self) -> T {
        let d = self.spacing();
        self.total.iter().fold(T::zero(), |a, v| a + *v) * d * d
    }

    pub fn spacing(&self) -> T {
        if self.coords.len() < 2 {
            T::one()
        } else {
            self.coords[1] - self.coords[0]
        }
    }
}

/// Marginal quantities along the slice axis: `|psi_n|^2` per orbital and the
/// exchange amplitude `c = sum_y psi_1^* psi_2`.
struct Marginals<T> {
    coords: Vec<T>,
    densities: [Vec<T>; 2],
    c: Vec<Complex<T>>,
}

fn real_marginals<T: Real>(a: &Wavepacket<T>, b: &Wavepacket<T>) -> Result<Marginals<T>> {
    let g = *a.grid();
    let corr = mutual_correlation(a, b, Convention::Full)?;
    let mut d = [vec![T::zero(); g.nx], vec![T::zero(); g.nx]];
    let mut c = vec![Complex::new(T::zero(), T::zero()); g.nx];
    for j in 0..g.ny {
        for i in 0..g.nx {
            let idx = g.index(i, j);
            d[0][i] = d[0][i] + a.envelope.values[idx].norm_sqr() * g.dy;
            d[1][i] = d[1][i] + b.envelope.values[idx].norm_sqr() * g.dy;
            c[i] = c[i] + corr.values[idx] * g.dy;
        }
    }
    Ok(Marginals {
        coords: (0..g.nx).map(|i| g.x(i)).collect(),
        densities: d,
        c,
    })
}

/// FFT order to ascending order along x.
fn ascending_order(n: usize) -> Vec<usize> {
    let h = n / 2;
    (h..n).chain(0..h).collect()
}

fn momentum_marginals<T: Real>(a: &Wavepacket<T>, b: &Wavepacket<T>) -> Result<Marginals<T>> {
    a.grid().check_same(b.grid())?;
    let g = *a.grid();
    let k_ref = [
        (a.carrier_k[0] + b.carrier_k[0]) / T::c(2.0),
        (a.carrier_k[1] + b.carrier_k[1]) / T::c(2.0),
    ];
    let sp = Spectral::new(g);
    let pa = to_momentum_space_in_frame(a, k_ref, &sp);
    let pb = to_momentum_space_in_frame(b, k_ref, &sp);
    let order = ascending_order(g.nx);
    let dky = g.dky();
    let mut d = [vec![T::zero(); g.nx], vec![T::zero(); g.nx]];
    let mut c = vec![Complex::new(T::zero(), T::zero()); g.nx];
    for j in 0..g.ny {
        for (out, &i) in order.iter().enumerate() {
            let idx = g.index(i, j);
            let (u, v) = (pa.values[idx], pb.values[idx]);
            d[0][out] = d[0][out] + u.norm_sqr() * dky;
            d[1][out] = d[1][out] + v.norm_sqr() * dky;
            c[out] = c[out] + u.conj() * v * dky;
        }
    }
    Ok(Marginals {
        coords: order.iter().map(|&i| k_ref[0] + g.kx(i)).collect(),
        densities: d,
        c,
    })
}

/// Hartree-Fock pair density of a two-orbital state, integrated over the
/// transverse coordinates of both particles.
///
/// Same spins: `|psi_1(1) psi_2(2) - psi_2(1) psi_1(2)|^2`; opposite spins:
/// `|psi_1(1)|^2 |psi_2(2)|^2 + |psi_2(1)|^2 |psi_1(2)|^2`.
pub fn pair_density_slice<T: Real>(state: &SystemState<T>, space: Space) -> Result<PairDensitySlice<T>> {
    if state.orbitals.len() != 2 {
        return Err(Error::OrbitalCount {
            expected: 2,
            found: state.orbitals.len(),
        });
    }
    let (a, b) = (&state.orbitals[0], &state.orbitals[1]);
    let m = match space {
        Space::Real => real_marginals(a, b)?,
        Space::Momentum => momentum_marginals(a, b)?,
    };
    let same_spin = state.spin_mode == SpinMode::Polarized && a.spin == b.spin;
    let n = m.coords.len();
    let mut total = Vec::with_capacity(n * n);
    let mut uncorrelated = Vec::with_capacity(n * n);
    let mut exchange = Vec::with_capacity(n * n);
    let mut exchange_phase = Vec::with_capacity(n * n);
    let [n1, n2] = &m.densities;
    let two = T::c(2.0);
    for p in 0..n {
        let r1 = n1[p] + n2[p];
        for q in 0..n {
            let r2 = n1[q] + n2[q];
            let unc = r1 * r2;
            let diag = -(n1[p] * n1[q] + n2[p] * n2[q]);
            let phase = if same_spin {
                -two * (m.c[p] * m.c[q].conj()).re
            } else {
                T::zero()
            };
            let x = diag + phase;
            uncorrelated.push(unc);
            exchange.push(x);
            exchange_phase.push(phase);
            total.push(unc + x);
        }
    }
    Ok(PairDensitySlice {
        axis: match space {
            Space::Real => SliceAxis::X,
            Space::Momentum => SliceAxis::Kx,
        },
        coords: m.coords,
        total,
        uncorrelated,
        exchange,
        exchange_phase,
    })
}

/// Full-coordinate pair density at grid points `p1 = (i1, j1)` and `p2 = (i2, j2)`,
/// evaluated through the same decomposition as [`pair_density_slice`].
pub fn pair_density_at<T: Real>(state: &SystemState<T>, p1: (usize, usize), p2: (usize, usize)) -> Result<T> {
    if state.orbitals.len() != 2 {
        return Err(Error::OrbitalCount {
            expected: 2,
            found: state.orbitals.len(),
        });
    }
    let (a, b) = (&state.orbitals[0], &state.orbitals[1]);
    let fa = |p: (usize, usize)| a.full_value(p.0, p.1);
    let fb = |p: (usize, usize)| b.full_value(p.0, p.1);
    let (a1, a2, b1, b2) = (fa(p1), fa(p2), fb(p1), fb(p2));
    let r1 = a1.norm_sqr() + b1.norm_sqr();
    let r2 = a2.norm_sqr() + b2.norm_sqr();
    let mut x = -(a1.norm_sqr() * a2.norm_sqr() + b1.norm_sqr() * b2.norm_sqr());
    if state.spin_mode == SpinMode::Polarized && a.spin == b.spin {
        let c1 = a1.conj() * b1;
        let c2 = a2.conj() * b2;
        x = x - T::c(2.0) * (c1 * c2.conj()).re;
    }
    Ok(r1 * r2 + x)
}

/// Energy and angle binning of a PINEM spectrum (atomic units, radians).
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct PinemBins<T> {
    pub e_min: T,
    pub e_max: T,
    pub n_energy: usize,
    /// Half-opening `phi_0` of the detector.
    pub acceptance: T,
    pub n_angle: usize,
}

impl<T: Real> PinemBins<T> {
    pub fn new(e_min: T, e_max: T, n_energy: usize, acceptance: T, n_angle: usize) -> Result<Self> {
        if n_energy == 0 || n_angle == 0 {
            return Err(invalid("bins", "need at least one energy and one angle bin"));
        }
        if !(e_max > e_min) {
            return Err(invalid("bins", "energy range is empty"));
        }
        if !(acceptance > T::zero()) || acceptance > T::PI() {
            return Err(invalid("acceptance", "must lie in (0, pi]"));
        }
        Ok(Self {
            e_min,
            e_max,
            n_energy,
            acceptance,
            n_angle,
        })
    }

    /// Bins of width at most `bin_width` spanning every momentum of the given grids.
    pub fn covering(amplitudes: &[&MomentumAmplitude<T>], bin_width: T, acceptance: T, n_angle: usize) -> Result<Self> {
        if !(bin_width > T::zero()) {
            return Err(invalid("bin_width", "must be positive"));
        }
        let (mut lo, mut hi) = (T::infinity(), T::neg_infinity());
        for a in amplitudes {
            let g = a.grid;
            for j in 0..g.ny {
                for i in 0..g.nx {
                    let (el, eh) = cell_energy_range(a, i, j);
                    lo = lo.min(el);
                    hi = hi.max(eh);
                }
            }
        }
        if !lo.is_finite() {
            return Err(invalid("amplitudes", "no momentum grid given"));
        }
        let lo = lo.max(T::zero());
        let n = ((hi - lo) / bin_width).ceil().to_f64_lossy().max(1.0) as usize;
        Self::new(lo, lo + bin_width * T::c(n as f64), n, acceptance, n_angle)
    }

    pub fn energy_width(&self) -> T {
        (self.e_max - self.e_min) / T::c(self.n_energy as f64)
    }

    pub fn angle_width(&self) -> T {
        T::c(2.0) * self.acceptance / T::c(self.n_angle as f64)
    }

    pub fn energies(&self) -> Vec<T> {
        let w = self.energy_width();
        (0..self.n_energy).map(|i| self.e_min + w * (T::c(i as f64) + T::c(0.5))).collect()
    }

    pub fn angles(&self) -> Vec<T> {
        let w = self.angle_width();
        (0..self.n_angle).map(|i| -self.acceptance + w * (T::c(i as f64) + T::c(0.5))).collect()
    }
}

/// Angle- and energy-resolved spectrum `sigma(E, phi) = E |psi(E, phi)|^2`
/// and its angular integral `Sigma(E)` over `|phi| <= phi_0`.
#[derive(Clone, Debug, PartialEq)]
pub struct PinemSpectrum<T> {
    pub bins: PinemBins<T>,
    pub energies: Vec<T>,
    pub angles: Vec<T>,
    /// `n_energy x n_angle`, energy-major.
    pub sigma: Vec<T>,
    pub total: Vec<T>,
}

impl<T: Real> PinemSpectrum<T> {
    /// `int Sigma dE`.
    pub fn integral(&self) -> T {
        self.total.iter().fold(T::zero(), |a, v| a + *v) * self.bins.energy_width()
    }

    pub fn add(&self, other: &Self) -> Result<Self> {
        if self.bins != other.bins {
            return Err(Error::Spectrum("bin layouts differ".into()));
        }
        let mut out = self.clone();
        for (a, b) in out.sigma.iter_mut().zip(&other.sigma) {
            *a = *a + *b;
        }
        for (a, b) in out.total.iter_mut().zip(&other.total) {
            *a = *a + *b;
        }
        Ok(out)
    }
}

/// Energy range covered by a momentum cell, centered on the cell-center energy.
fn cell_energy_range<T: Real>(a: &MomentumAmplitude<T>, i: usize, j: usize) -> (T, T) {
    let k = a.momentum(i, j);
    let h = [a.grid.dkx() / T::c(2.0), a.grid.dky() / T::c(2.0)];
    let near = |c: T, h: T| (c.abs() - h).max(T::zero());
    let far = |c: T, h: T| c.abs() + h;
    let lo = free_dispersion([near(k[0], h[0]), near(k[1], h[1])]);
    let hi = free_dispersion([far(k[0], h[0]), far(k[1], h[1])]);
    let e = free_dispersion(k);
    let half = (hi - lo) / T::c(2.0);
    (e - half, e + half)
}

fn cell_angle_range<T: Real>(a: &MomentumAmplitude<T>, i: usize, j: usize) -> (T, T) {
    let k = a.momentum(i, j);
    let h = [a.grid.dkx() / T::c(2.0), a.grid.dky() / T::c(2.0)];
    let phi = k[1].atan2(k[0]);
    if k[0].abs() <= h[0] && k[1].abs() <= h[1] {
        return (phi, phi);
    }
    let mut lo = T::infinity();
    let mut hi = T::neg_infinity();
    for sx in [-T::one(), T::one()] {
        for sy in [-T::one(), T::one()] {
            let c = (k[1] + sy * h[1]).atan2(k[0] + sx * h[0]);
            // unwrap relative to the center angle
            let mut d = c - phi;
            if d > T::PI() {
                d = d - T::c(2.0) * T::PI();
            } else if d < -T::PI() {
                d = d + T::c(2.0) * T::PI();
            }
            lo = lo.min(d);
            hi = hi.max(d);
        }
    }
    let half = (hi - lo) / T::c(2.0);
    (phi - half, phi + half)
}

/// Fractions of `[lo, hi]` falling into `n` uniform bins starting at `start`.
fn deposit<T: Real>(lo: T, hi: T, start: T, width: T, n: usize, mut f: impl FnMut(usize, T)) {
    if !(hi > lo) {
        let b = ((lo - start) / width).floor();
        if b >= T::zero() && b < T::c(n as f64) {
            f(b.to_f64_lossy() as usize, T::one());
        }
        return;
    }
    let span = hi - lo;
    let first = ((lo - start) / width).floor().max(T::zero());
    let last = ((hi - start) / width).floor().min(T::c(n as f64 - 1.0));
    if last < first {
        return;
    }
    let (first, last) = (first.to_f64_lossy() as usize, last.to_f64_lossy() as usize);
    for b in first..=last {
        let b0 = start + width * T::c(b as f64);
        let ov = hi.min(b0 + width) - lo.max(b0);
        if ov > T::zero() {
            f(b, ov / span);
        }
    }
}

/// Probability fraction of `a` held in the outermost 1/16 of the momentum grid.
fn edge_fraction<T: Real>(a: &MomentumAmplitude<T>) -> (T, T) {
    let g = a.grid;
    let (bx, by) = (g.nx / 16, g.ny / 16);
    let mut edge = T::zero();
    let mut all = T::zero();
    let mut kedge = T::zero();
    for j in 0..g.ny {
        let sj = crate::grid::signed_bin(j, g.ny).unsigned_abs() as usize;
        for i in 0..g.nx {
            let si = crate::grid::signed_bin(i, g.nx).unsigned_abs() as usize;
            let p = a.values[g.index(i, j)].norm_sqr();
            all = all + p;
            if si + bx >= g.nx / 2 || sj + by >= g.ny / 2 {
                edge = edge + p;
                let k = a.momentum(i, j);
                if p > T::zero() {
                    kedge = kedge.max(k[0].hypot(k[1]));
                }
            }
        }
    }
    (if all > T::zero() { edge / all } else { T::zero() }, kedge)
}

/// Largest tolerated probability fraction near the edge of the momentum grid.
pub const MOMENTUM_EDGE_TOLERANCE: f64 = 1e-6;

/// PINEM spectrum of one orbital.
///
/// Each momentum cell deposits `E |psi(k)|^2 dk` uniformly over its energy
/// and angle extent, so `int Sigma dE` equals the kinetic energy expectation
/// exactly when the bins cover every occupied momentum.
pub fn pinem_spectrum<T: Real>(w: &Wavepacket<T>, bins: &PinemBins<T>) -> Result<PinemSpectrum<T>> {
    let a = to_momentum_space(w);
    pinem_from_amplitude(&a, bins)
}

pub fn pinem_from_amplitude<T: Real>(a: &MomentumAmplitude<T>, bins: &PinemBins<T>) -> Result<PinemSpectrum<T>> {
    let (frac, kedge) = edge_fraction(a);
    if frac > T::c(MOMENTUM_EDGE_TOLERANCE) {
        return Err(Error::MomentumOutOfRange {
            k: kedge.to_f64_lossy(),
            k_max: a.grid.kx_max().to_f64_lossy(),
        });
    }
    let g = a.grid;
    let (ne, na) = (bins.n_energy, bins.n_angle);
    let (de, da) = (bins.energy_width(), bins.angle_width());
    let mut sigma = vec![T::zero(); ne * na];
    let cell = a.cell();
    let mut ebuf: Vec<(usize, T)> = Vec::new();
    for j in 0..g.ny {
        for i in 0..g.nx {
            let p = a.values[g.index(i, j)].norm_sqr() * cell;
            if p == T::zero() {
                continue;
            }
            let weight = p * free_dispersion(a.momentum(i, j)) / (de * da);
            let (el, eh) = cell_energy_range(a, i, j);
            let (pl, ph) = cell_angle_range(a, i, j);
            ebuf.clear();
            deposit(el, eh, bins.e_min, de, ne, |b, f| ebuf.push((b, f)));
            if ebuf.is_empty() {
                continue;
            }
            deposit(pl, ph, -bins.acceptance, da, na, |b, f| {
                for &(e, fe) in &ebuf {
                    sigma[e * na + b] = sigma[e * na + b] + weight * fe * f;
                }
            });
        }
    }
    let total = (0..ne)
        .map(|e| sigma[e * na..(e + 1) * na].iter().fold(T::zero(), |s, v| s + *v) * da)
        .collect();
    Ok(PinemSpectrum {
        bins: *bins,
        energies: bins.energies(),
        angles: bins.angles(),
        sigma,
        total,
    })
}

/// `Sigma = sum_n Sigma_n` on shared bins.
pub fn pinem_total<T: Real>(state: &SystemState<T>, bins: &PinemBins<T>) -> Result<PinemSpectrum<T>> {
    let mut acc: Option<PinemSpectrum<T>> = None;
    for o in &state.orbitals {
        let s = pinem_spectrum(o, bins)?;
        acc = Some(match acc {
            None => s,
            Some(a) => a.add(&s)?,
        });
    }
    acc.ok_or_else(|| Error::OrbitalCount { expected: 1, found: 0 })
}

/// Quadratic Savitzky-Golay smoothing over `2 m + 1` points; edges are left raw.
pub fn savitzky_golay<T: Real>(data: &[T], m: usize) -> Vec<T> {
    if m == 0 || data.len() < 2 * m + 1 {
        return data.to_vec();
    }
    let mf = m as f64;
    let norm = (2.0 * mf + 1.0) * (4.0 * mf * mf + 4.0 * mf - 3.0);
    let coef: Vec<T> = (0..=2 * m)
        .map(|k| {
            let i = k as f64 - mf;
            T::c((3.0 * (3.0 * mf * mf + 3.0 * mf - 1.0) - 15.0 * i * i) / norm)
        })
        .collect();
    let mut out = data.to_vec();
    for c in m..data.len() - m {
        out[c] = coef
            .iter()
            .enumerate()
            .fold(T::zero(), |a, (k, w)| a + *w * data[c + k - m]);
    }
    out
}

/// Vertex of the parabola through three equally spaced samples: `(offset, value)`.
fn parabolic_vertex<T: Real>(l: T, c: T, r: T) -> (T, T) {
    let den = l - T::c(2.0) * c + r;
    if den == T::zero() {
        return (T::zero(), c);
    }
    let off = (l - r) / (T::c(2.0) * den);
    let off = off.max(-T::one()).min(T::one());
    (off, c - (l - r) * off / T::c(4.0))
}

/// Refined comb extrema inside an energy band.
#[derive(Clone, Debug, PartialEq)]
pub struct CombExtrema<T> {
    /// `(energy, value)` of maxima, ascending in energy.
    pub peaks: Vec<(T, T)>,
    pub troughs: Vec<(T, T)>,
}

/// Locates comb maxima and minima of `Sigma(E)` within `band`.
///
/// Extrema are detected on a Savitzky-Golay smoothed copy (window below half a
/// period) and refined by a parabola through the raw samples.
pub fn comb_extrema<T: Real>(spectrum: &PinemSpectrum<T>, band: (T, T), period: T) -> Result<CombExtrema<T>> {
    if !(band.1 > band.0) {
        return Err(invalid("band", "empty energy interval"));
    }
    if !(period > T::zero()) {
        return Err(invalid("period", "must be positive"));
    }
    let de = spectrum.bins.energy_width();
    let raw = &spectrum.total;
    let n = raw.len();
    // largest odd window strictly shorter than half a period
    let half_bins = (period / (T::c(2.0) * de)).to_f64_lossy();
    let mut m = ((half_bins - 1.0) / 2.0).floor().max(0.0) as usize;
    while m > 0 && (2 * m + 1) as f64 >= half_bins {
        m -= 1;
    }
    let smooth = savitzky_golay(raw, m);
    let e = &spectrum.energies;
    let mut peaks = Vec::new();
    let mut troughs = Vec::new();
    let mut i = 1;
    while i + 1 < n {
        if e[i] < band.0 || e[i] > band.1 {
            i += 1;
            continue;
        }
        // step over plateaus
        let mut r = i;
        while r + 1 < n && smooth[r + 1] == smooth[i] {
            r += 1;
        }
        if r + 1 >= n {
            break;
        }
        let (l, c, rr) = (smooth[i - 1], smooth[i], smooth[r + 1]);
        let is_max = c > l && c > rr;
        let is_min = c < l && c < rr;
        if is_max || is_min {
            let mid = (i + r) / 2;
            let (off, val) = if mid >= 1 && mid + 1 < n {
                parabolic_vertex(raw[mid - 1], raw[mid], raw[mid + 1])
            } else {
                (T::zero(), raw[mid])
            };
            let at = e[mid] + off * de;
            if is_max {
                peaks.push((at, val));
            } else {
                troughs.push((at, val.max(T::zero())));
            }
        }
        i = r + 1;
    }
    Ok(CombExtrema { peaks, troughs })
}

/// Fringe visibility `(mean max - mean min) / (mean max + mean min)` of
/// `Sigma(E)` over the comb extrema within `band`.
///
/// A flat spectrum gives 0; a comb without any detected trough or peak is an error.
pub fn fringe_visibility<T: Real>(spectrum: &PinemSpectrum<T>, band: (T, T), period: T) -> Result<T> {
    if band.1 - band.0 < T::c(2.0) * period {
        return Err(invalid("band", "must span at least two comb periods"));
    }
    let ex = comb_extrema(spectrum, band, period)?;
    if ex.peaks.is_empty() || ex.troughs.is_empty() {
        let inside: Vec<T> = spectrum
            .energies
            .iter()
            .zip(&spectrum.total)
            .filter(|(e, _)| **e >= band.0 && **e <= band.1)
            .map(|(_, v)| *v)
            .collect();
        let hi = inside.iter().fold(T::neg_infinity(), |a, v| a.max(*v));
        let lo = inside.iter().fold(T::infinity(), |a, v| a.min(*v));
        if hi.is_finite() && hi - lo <= T::c(1e-12) * hi.abs().max(T::min_positive_value()) {
            return Ok(T::zero());
        }
        return Err(Error::NoPeaks);
    }
    let mean = |v: &[(T, T)]| v.iter().fold(T::zero(), |a, p| a + p.1) / T::c(v.len() as f64);
    let (mx, mn) = (mean(&ex.peaks), mean(&ex.troughs));
    if !(mx + mn > T::zero()) {
        return Err(Error::NoPeaks);
    }
    Ok((mx - mn) / (mx + mn))
}

/// Mean spacing of consecutive comb peaks within `band`.
pub fn comb_spacing<T: Real>(spectrum: &PinemSpectrum<T>, band: (T, T), period: T) -> Result<T> {
    let ex = comb_extrema(spectrum, band, period)?;
    if ex.peaks.len() < 2 {
        return Err(Error::NoPeaks);
    }
    let first = ex.peaks[0].0;
    let last = ex.peaks[ex.peaks.len() - 1].0;
    Ok((last - first) / T::c((ex.peaks.len() - 1) as f64))
}
