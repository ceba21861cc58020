//! Carrier/envelope representation of single-electron orbitals.
//!
//! An orbital is stored as `psi(r, t) = env(r, t) * exp(i k.r - i w t)`: the
//! grid only has to resolve the slowly varying envelope while the carrier
//! `(k, w)` is kept analytically.

use rustfft::num_complex::Complex;

use crate::error::{invalid, Error, Result};
use crate::grid::{ComplexField, GridSpec};
use crate::real::Real;
use crate::spectral::Spectral;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Spin {
    Up,
    Down,
}

impl Spin {
    pub fn flipped(self) -> Self {
        match self {
            Spin::Up => Spin::Down,
            Spin::Down => Spin::Up,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Wavepacket<T> {
    pub envelope: ComplexField<T>,
    pub carrier_k: [T; 2],
    pub carrier_omega: T,
    pub spin: Spin,
    pub label: String,
}

impl<T: Real> Wavepacket<T> {
    /// Wraps an envelope with carrier `k`; the carrier frequency follows the
    /// free dispersion `|k|^2 / 2`.
    pub fn new(envelope: ComplexField<T>, carrier_k: [T; 2], spin: Spin, label: impl Into<String>) -> Self {
        Self {
            envelope,
            carrier_omega: free_dispersion(carrier_k),
            carrier_k,
            spin,
            label: label.into(),
        }
    }

    pub fn grid(&self) -> &GridSpec<T> {
        &self.envelope.grid
    }

    pub fn norm_sqr(&self) -> T {
        self.envelope.norm_sqr()
    }

    /// Full wavefunction (carrier included, time phase dropped) at grid index.
    #[inline]
    pub fn full_value(&self, i: usize, j: usize) -> Complex<T> {
        let g = self.grid();
        let phase = self.carrier_k[0] * g.x(i) + self.carrier_k[1] * g.y(j);
        self.envelope.values[g.index(i, j)] * Complex::from_polar(T::one(), phase)
    }

    /// Group speed `|k|` (au) of the carrier.
    pub fn carrier_speed(&self) -> T {
        (self.carrier_k[0] * self.carrier_k[0] + self.carrier_k[1] * self.carrier_k[1]).sqrt()
    }
}

/// `hbar |k|^2 / 2 m0` in atomic units.
pub fn free_dispersion<T: Real>(k: [T; 2]) -> T {
    (k[0] * k[0] + k[1] * k[1]) / T::c(2.0)
}

/// Converts an intensity FWHM into the standard deviation of `|psi|^2`.
pub fn fwhm_to_sigma<T: Real>(fwhm: T) -> T {
    fwhm / (T::c(2.0) * (T::c(2.0) * T::LN_2()).sqrt())
}

/// Parameters of an anisotropic Gaussian packet.
#[derive(Clone, Debug, PartialEq)]
pub struct GaussianPacket<T> {
    pub center: [T; 2],
    /// Intensity FWHM along `direction`.
    pub fwhm_long: T,
    /// Intensity FWHM perpendicular to `direction`.
    pub fwhm_trans: T,
    pub kinetic_energy: T,
    pub direction: [T; 2],
    pub spin: Spin,
    pub label: String,
}

pub fn make_gaussian_wavepacket<T: Real>(
    grid: GridSpec<T>,
    spec: &GaussianPacket<T>,
) -> Result<Wavepacket<T>> {
    if !(spec.kinetic_energy > T::zero()) {
        return Err(invalid("kinetic_energy", "must be positive"));
    }
    if !(spec.fwhm_long > T::zero()) || !(spec.fwhm_trans > T::zero()) {
        return Err(invalid("fwhm", "widths must be positive"));
    }
    let dn = (spec.direction[0] * spec.direction[0] + spec.direction[1] * spec.direction[1]).sqrt();
    if !(dn > T::zero()) {
        return Err(invalid("direction", "must be a nonzero vector"));
    }
    let u = [spec.direction[0] / dn, spec.direction[1] / dn];
    let w = [-u[1], u[0]];

    let spacing = |v: [T; 2]| ((v[0] * grid.dx).powi(2) + (v[1] * grid.dy).powi(2)).sqrt();
    for (fwhm, dir) in [(spec.fwhm_long, u), (spec.fwhm_trans, w)] {
        let pts = fwhm / spacing(dir);
        if pts < T::c(4.0) {
            return Err(Error::UnderResolved {
                width: fwhm.to_f64_lossy(),
                points: pts.to_f64_lossy(),
            });
        }
    }

    let sl = fwhm_to_sigma(spec.fwhm_long);
    let st = fwhm_to_sigma(spec.fwhm_trans);
    let sx = ((u[0] * sl).powi(2) + (w[0] * st).powi(2)).sqrt();
    let sy = ((u[1] * sl).powi(2) + (w[1] * st).powi(2)).sqrt();
    let five = T::c(5.0);
    if spec.center[0] - five * sx < grid.x0 || spec.center[0] + five * sx > grid.x0 + grid.lx() {
        return Err(Error::PacketClipped { axis: "x" });
    }
    if spec.center[1] - five * sy < grid.y0 || spec.center[1] + five * sy > grid.y0 + grid.ly() {
        return Err(Error::PacketClipped { axis: "y" });
    }

    let four = T::c(4.0);
    let mut env = ComplexField::from_fn(grid, |x, y| {
        let rx = x - spec.center[0];
        let ry = y - spec.center[1];
        let a = rx * u[0] + ry * u[1];
        let b = rx * w[0] + ry * w[1];
        Complex::new((-(a * a) / (four * sl * sl) - (b * b) / (four * st * st)).exp(), T::zero())
    });
    let n = env.norm();
    env.scale(Complex::new(T::one() / n, T::zero()));

    let kmag = (T::c(2.0) * spec.kinetic_energy).sqrt();
    Ok(Wavepacket::new(
        env,
        [u[0] * kmag, u[1] * kmag],
        spec.spin,
        spec.label.clone(),
    ))
}

/// `<a|b>` of the full wavefunctions, carrier phases included.
pub fn inner_product<T: Real>(a: &Wavepacket<T>, b: &Wavepacket<T>) -> Result<Complex<T>> {
    a.grid().check_same(b.grid())?;
    let g = *a.grid();
    let dk = [b.carrier_k[0] - a.carrier_k[0], b.carrier_k[1] - a.carrier_k[1]];
    let mut acc = Complex::new(T::zero(), T::zero());
    for j in 0..g.ny {
        let y = g.y(j);
        for i in 0..g.nx {
            let idx = g.index(i, j);
            let ph = Complex::from_polar(T::one(), dk[0] * g.x(i) + dk[1] * y);
            acc = acc + a.envelope.values[idx].conj() * b.envelope.values[idx] * ph;
        }
    }
    Ok(acc * g.cell_area())
}

/// Orthonormalizes a pair: `|1'> = |1>`, `|2'> = (|2> - <1|2>|1>) / sqrt(1 - |<1|2>|^2)`.
///
/// Both inputs are normalized first. The carrier of each orbital is kept; the
/// projection onto `|1>` is expressed in the carrier frame of `|2>`.
pub fn gram_schmidt<T: Real>(pair: [Wavepacket<T>; 2]) -> Result<[Wavepacket<T>; 2]> {
    let [mut first, mut second] = pair;
    first.envelope.grid.check_same(&second.envelope.grid)?;
    for w in [&mut first, &mut second] {
        let n = w.norm_sqr().sqrt();
        if !(n > T::zero()) {
            return Err(invalid("pair", "orbital has zero norm"));
        }
        w.envelope.scale(Complex::new(T::one() / n, T::zero()));
    }
    let s = inner_product(&first, &second)?;
    let sabs = s.norm();
    if sabs > T::one() - T::c(1e-9) {
        return Err(Error::ParallelOrbitals {
            overlap: sabs.to_f64_lossy(),
        });
    }
    if sabs == T::zero() {
        return Ok([first, second]);
    }
    let g = *first.grid();
    let dk = [
        first.carrier_k[0] - second.carrier_k[0],
        first.carrier_k[1] - second.carrier_k[1],
    ];
    for j in 0..g.ny {
        let y = g.y(j);
        for i in 0..g.nx {
            let idx = g.index(i, j);
            let ph = Complex::from_polar(T::one(), dk[0] * g.x(i) + dk[1] * y);
            second.envelope.values[idx] = second.envelope.values[idx] - s * first.envelope.values[idx] * ph;
        }
    }
    let n = second.norm_sqr().sqrt();
    second.envelope.scale(Complex::new(T::one() / n, T::zero()));
    Ok([first, second])
}

/// Momentum-space amplitude on the lattice `carrier + q`, with `q` the FFT
/// momenta of the grid (standard FFT ordering).
///
/// Normalized so that `sum |values|^2 dkx dky` equals the real-space norm.
#[derive(Clone, Debug, PartialEq)]
pub struct MomentumAmplitude<T> {
    pub grid: GridSpec<T>,
    pub carrier: [T; 2],
    pub values: Vec<Complex<T>>,
}

impl<T: Real> MomentumAmplitude<T> {
    #[inline]
    pub fn momentum(&self, i: usize, j: usize) -> [T; 2] {
        [self.carrier[0] + self.grid.kx(i), self.carrier[1] + self.grid.ky(j)]
    }

    pub fn cell(&self) -> T {
        self.grid.dkx() * self.grid.dky()
    }

    pub fn norm_sqr(&self) -> T {
        self.values.iter().fold(T::zero(), |a, v| a + v.norm_sqr()) * self.cell()
    }

    /// Probability-weighted mean momentum.
    pub fn centroid(&self) -> [T; 2] {
        let mut acc = [T::zero(); 2];
        let mut w = T::zero();
        for j in 0..self.grid.ny {
            for i in 0..self.grid.nx {
                let p = self.values[self.grid.index(i, j)].norm_sqr();
                let k = self.momentum(i, j);
                acc[0] = acc[0] + p * k[0];
                acc[1] = acc[1] + p * k[1];
                w = w + p;
            }
        }
        [acc[0] / w, acc[1] / w]
    }

    /// `sum |k|^2 / 2 |phi(k)|^2 dk`, the kinetic energy expectation value.
    pub fn kinetic_energy(&self) -> T {
        let mut acc = T::zero();
        for j in 0..self.grid.ny {
            for i in 0..self.grid.nx {
                acc = acc + self.values[self.grid.index(i, j)].norm_sqr() * free_dispersion(self.momentum(i, j));
            }
        }
        acc * self.cell()
    }
}

/// Full-wavefunction momentum amplitude in the orbital's own carrier frame.
pub fn to_momentum_space<T: Real>(w: &Wavepacket<T>) -> MomentumAmplitude<T> {
    to_momentum_space_in_frame(w, w.carrier_k, &Spectral::new(*w.grid()))
}

/// Momentum amplitude on the lattice `k_ref + q`.
///
/// When `k_ref` differs from the orbital carrier the envelope is first
/// multiplied by `exp(i (k - k_ref).r)`, which is exact for envelopes that
/// vanish at the domain boundary.
pub fn to_momentum_space_in_frame<T: Real>(
    w: &Wavepacket<T>,
    k_ref: [T; 2],
    spectral: &Spectral<T>,
) -> MomentumAmplitude<T> {
    let g = *w.grid();
    let dk = [w.carrier_k[0] - k_ref[0], w.carrier_k[1] - k_ref[1]];
    let mut data = if dk == [T::zero(), T::zero()] {
        w.envelope.values.clone()
    } else {
        let mut v = w.envelope.values.clone();
        for j in 0..g.ny {
            let y = g.y(j);
            for i in 0..g.nx {
                v[g.index(i, j)] = v[g.index(i, j)] * Complex::from_polar(T::one(), dk[0] * g.x(i) + dk[1] * y);
            }
        }
        v
    };
    spectral.forward(&mut data);
    let s = g.cell_area() / (T::c(2.0) * T::PI());
    for j in 0..g.ny {
        let ky = g.ky(j);
        for i in 0..g.nx {
            let kx = g.kx(i);
            // FFT assumes the first sample at the origin.
            let shift = Complex::from_polar(s, -(kx * g.x0 + ky * g.y0));
            let idx = g.index(i, j);
            data[idx] = data[idx] * shift;
        }
    }
    MomentumAmplitude {
        grid: g,
        carrier: k_ref,
        values: data,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::units::{ev_to_au, nm_to_au, SPEED_OF_LIGHT_AU};

    fn grid() -> GridSpec<f64> {
        GridSpec::new(128, 64, 0.5, 0.5, -32.0, -16.0).unwrap()
    }

    fn packet(center: [f64; 2], e: f64) -> GaussianPacket<f64> {
        GaussianPacket {
            center,
            fwhm_long: 8.0,
            fwhm_trans: 4.0,
            kinetic_energy: e,
            direction: [1.0, 0.0],
            spin: Spin::Up,
            label: "t".into(),
        }
    }

    #[test]
    fn speed_at_1436_ev() {
        let e: f64 = ev_to_au(1436.0);
        let v = (2.0 * e).sqrt() / SPEED_OF_LIGHT_AU;
        // Nonrelativistic speed; the quoted 0.0748 c is the relativistic value.
        assert!((v - 0.0748).abs() / 0.0748 < 3e-3, "v/c = {v}");
    }

    #[test]
    fn normalized_with_consistent_carrier() {
        let w = make_gaussian_wavepacket(grid(), &packet([0.0, 0.0], 2.0)).unwrap();
        assert!((w.norm_sqr() - 1.0).abs() < 1e-12);
        let expected = free_dispersion(w.carrier_k);
        assert!((w.carrier_omega - expected).abs() <= 1e-12 * expected);
        assert!((w.carrier_k[0] - 2.0).abs() < 1e-12);
    }

    #[test]
    fn measured_fwhm_matches_request() {
        let nm = nm_to_au::<f64>(1.0);
        let g = GridSpec::new(512, 32, 0.5 * nm, 1.0 * nm, -128.0 * nm, -16.0 * nm).unwrap();
        let spec = GaussianPacket {
            center: [0.0, 0.0],
            fwhm_long: 33.2 * nm,
            fwhm_trans: 5.0 * nm,
            kinetic_energy: 1.0,
            direction: [1.0, 0.0],
            spin: Spin::Up,
            label: String::new(),
        };
        let w = make_gaussian_wavepacket(g, &spec).unwrap();
        // FWHM of the |psi|^2 profile along x through the centre row
        let j = g.ny / 2;
        let row: Vec<f64> = (0..g.nx).map(|i| w.envelope.values[g.index(i, j)].norm_sqr()).collect();
        let peak = row.iter().cloned().fold(0.0, f64::max);
        let half = peak / 2.0;
        let mut crossings = Vec::new();
        for i in 0..g.nx - 1 {
            if (row[i] - half) * (row[i + 1] - half) < 0.0 {
                let t = (half - row[i]) / (row[i + 1] - row[i]);
                crossings.push(g.x(i) + t * g.dx);
            }
        }
        assert_eq!(crossings.len(), 2);
        let fwhm = crossings[1] - crossings[0];
        assert!((fwhm - 33.2 * nm).abs() < g.dx, "fwhm {} nm", fwhm / nm);
    }

    #[test]
    fn rejects_under_resolved_and_clipped() {
        let mut p = packet([0.0, 0.0], 1.0);
        p.fwhm_trans = 1.5;
        assert!(matches!(
            make_gaussian_wavepacket(grid(), &p),
            Err(Error::UnderResolved { .. })
        ));
        let p = packet([28.0, 0.0], 1.0);
        assert!(matches!(
            make_gaussian_wavepacket(grid(), &p),
            Err(Error::PacketClipped { axis: "x" })
        ));
    }

    #[test]
    fn self_overlap_is_norm() {
        let w = make_gaussian_wavepacket(grid(), &packet([1.0, 2.0], 0.5)).unwrap();
        let s = inner_product(&w, &w).unwrap();
        assert!(s.im.abs() < 1e-15);
        assert!((s.re - w.norm_sqr()).abs() < 1e-14);
    }

    #[test]
    fn plane_waves_one_momentum_quantum_apart_are_orthogonal() {
        let g = grid();
        let amp = 1.0 / g.area().sqrt();
        let env = ComplexField::from_fn(g, |_, _| Complex::new(amp, 0.0));
        let a = Wavepacket::new(env.clone(), [0.3, 0.0], Spin::Up, "a");
        let b = Wavepacket::new(env, [0.3 + g.dkx(), 0.0], Spin::Up, "b");
        assert!(inner_product(&a, &b).unwrap().norm() < 1e-10);
    }

    #[test]
    fn displaced_gaussians_match_closed_form_overlap() {
        let g = grid();
        let a = make_gaussian_wavepacket(g, &packet([-2.0, 0.5], 0.5)).unwrap();
        let b = make_gaussian_wavepacket(g, &packet([3.0, -1.0], 0.5)).unwrap();
        let sl = fwhm_to_sigma(8.0f64);
        let st = fwhm_to_sigma(4.0f64);
        // <a|b> = exp(-dx^2 / 8 sl^2 - dy^2 / 8 st^2) for normalized Gaussians
        let expected = (-(5.0f64.powi(2)) / (8.0 * sl * sl) - 1.5f64.powi(2) / (8.0 * st * st)).exp();
        let s = inner_product(&a, &b).unwrap();
        assert!((s.re - expected).abs() < 1e-6 && s.im.abs() < 1e-12, "{s} vs {expected}");
    }

    #[test]
    fn gram_schmidt_orthonormalizes() {
        let g = grid();
        let a = make_gaussian_wavepacket(g, &packet([-1.0, 0.0], 0.5)).unwrap();
        let mut p = packet([1.0, 0.3], 0.5);
        p.fwhm_long = 7.0;
        let b = make_gaussian_wavepacket(g, &p).unwrap();
        let [a2, b2] = gram_schmidt([a, b]).unwrap();
        assert!(inner_product(&a2, &b2).unwrap().norm() < 1e-12);
        assert!((b2.norm_sqr() - 1.0).abs() < 1e-12);
        assert!((a2.norm_sqr() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn gram_schmidt_keeps_orthogonal_pair() {
        let g = grid();
        let amp = 1.0 / g.area().sqrt();
        let env = ComplexField::from_fn(g, |_, _| Complex::new(amp, 0.0));
        let a = Wavepacket::new(env.clone(), [0.0, 0.0], Spin::Up, "a");
        let b = Wavepacket::new(env, [g.dkx(), 0.0], Spin::Up, "b");
        let s = inner_product(&a, &b).unwrap();
        let [a2, b2] = gram_schmidt([a.clone(), b.clone()]).unwrap();
        let d = b2.envelope.distance_sqr(&b.envelope).unwrap().sqrt();
        assert!(d < 1e-10 + 2.0 * s.norm(), "{d}");
        assert!(a2.envelope.distance_sqr(&a.envelope).unwrap() < 1e-24);
    }

    #[test]
    fn gram_schmidt_rejects_parallel() {
        let w = make_gaussian_wavepacket(grid(), &packet([0.0, 0.0], 0.5)).unwrap();
        assert!(matches!(
            gram_schmidt([w.clone(), w]),
            Err(Error::ParallelOrbitals { .. })
        ));
    }

    #[test]
    fn momentum_space_parseval_and_peak() {
        let g = grid();
        let w = make_gaussian_wavepacket(g, &packet([0.0, 0.0], 0.5)).unwrap();
        let m = to_momentum_space(&w);
        assert!((m.norm_sqr() - w.norm_sqr()).abs() < 1e-12);
        let c = m.centroid();
        assert!((c[0] - w.carrier_k[0]).abs() < g.dkx());
        assert!(c[1].abs() < g.dky());
        let (imax, _) = m
            .values
            .iter()
            .enumerate()
            .max_by(|a, b| a.1.norm().partial_cmp(&b.1.norm()).unwrap())
            .unwrap();
        let k = m.momentum(imax % g.nx, imax / g.nx);
        assert!((k[0] - w.carrier_k[0]).abs() <= g.dkx());
    }

    #[test]
    fn zero_carrier_gaussian_is_centred_at_origin() {
        let g = grid();
        let mut w = make_gaussian_wavepacket(g, &packet([0.0, 0.0], 0.5)).unwrap();
        w.carrier_k = [0.0, 0.0];
        let m = to_momentum_space(&w);
        assert!(m.values[0].norm() >= m.values.iter().fold(0.0, |a: f64, v| a.max(v.norm())) - 1e-15);
    }
}
