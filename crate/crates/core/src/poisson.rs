//! Hartree and exchange potentials from FFT convolution with a confined
//! Coulomb kernel.
//!
//! Electrons live in the (x, y) plane with a Gaussian profile along z. The
//! in-plane interaction is the 3D Coulomb potential averaged over both
//! charges' z profiles, which is finite at contact:
//!
//! `V(k) = (2 pi / k) erfcx(k s / sqrt 2)`, `s = sqrt(2) sigma_z`.
//!
//! The `k = 0` entry is fixed with an Ewald lattice sum so that the periodic
//! potential of a localized charge matches the free-space one up to terms
//! quadratic in `r / L` (no constant offset).

use rustfft::num_complex::Complex;

use crate::error::{invalid, Error, Result};
use crate::grid::{ComplexField, GridSpec, RealField};
use crate::real::Real;
use crate::spectral::Spectral;
use crate::wavepacket::Wavepacket;

/// Converts a transverse intensity FWHM into `s`, the standard deviation of
/// the separation `z - z'` between two independently confined charges.
pub fn separation_sigma(transverse_width: f64) -> f64 {
    let sigma_z = transverse_width / (2.0 * (2.0 * std::f64::consts::LN_2).sqrt());
    std::f64::consts::SQRT_2 * sigma_z
}

/// Scaled complementary error function `exp(x^2) erfc(x)` for `x >= 0`.
pub fn erfcx(x: f64) -> f64 {
    if x < 25.0 {
        (x * x).exp() * libm::erfc(x)
    } else {
        let r = 1.0 / (2.0 * x * x);
        let series = 1.0 - r * (1.0 - 3.0 * r * (1.0 - 5.0 * r * (1.0 - 7.0 * r)));
        series / (x * std::f64::consts::PI.sqrt())
    }
}

/// Confined interaction at in-plane wavenumber `k > 0`.
pub fn confined_kernel_k(k: f64, s: f64) -> f64 {
    2.0 * std::f64::consts::PI / k * erfcx(k * s / std::f64::consts::SQRT_2)
}

/// `lim_{k->0} [V(k) - 2 pi / k]`, the area integral of the short-range
/// difference between the confined and the bare interaction.
pub fn confined_correction_at_zero(s: f64) -> f64 {
    -2.0 * (2.0 * std::f64::consts::PI).sqrt() * s
}

/// Ewald constant `W` such that `(1/A) sum_{k != 0} (2 pi / k) e^{ikr} + W / A`
/// equals `1/r + O(r^2)` for the rectangular lattice `lx x ly`.
pub fn ewald_zero_mode(lx: f64, ly: f64, alpha: f64) -> f64 {
    use std::f64::consts::PI;
    let area = lx * ly;
    let cut = 6.5;
    let nx = (cut / (alpha * lx)).ceil() as i64 + 1;
    let ny = (cut / (alpha * ly)).ceil() as i64 + 1;
    let mut real = 0.0;
    for m in -ny..=ny {
        for n in -nx..=nx {
            if n == 0 && m == 0 {
                continue;
            }
            let r = ((n as f64 * lx).powi(2) + (m as f64 * ly).powi(2)).sqrt();
            real += libm::erfc(alpha * r) / r;
        }
    }
    let kcut = 2.0 * alpha * cut;
    let (dkx, dky) = (2.0 * PI / lx, 2.0 * PI / ly);
    let mx = (kcut / dkx).ceil() as i64 + 1;
    let my = (kcut / dky).ceil() as i64 + 1;
    let mut recip = 0.0;
    for m in -my..=my {
        for n in -mx..=mx {
            if n == 0 && m == 0 {
                continue;
            }
            let k = ((n as f64 * dkx).powi(2) + (m as f64 * dky).powi(2)).sqrt();
            recip += 2.0 * PI / k * libm::erfc(k / (2.0 * alpha));
        }
    }
    let c = real - 2.0 * alpha / PI.sqrt() - 2.0 * PI.sqrt() / (alpha * area) + recip / area;
    -area * c
}

/// Confined Coulomb interaction tabulated on the momentum lattice of a grid.
#[derive(Clone, Debug)]
pub struct ScreenedKernel<T: Real> {
    pub grid: GridSpec<T>,
    pub transverse_width: T,
    /// `V(k)` in FFT order, row-major like the grid.
    pub kernel_k: Vec<T>,
    spectral: Spectral<T>,
}

pub fn build_kernel<T: Real>(grid: GridSpec<T>, transverse_width: T) -> Result<ScreenedKernel<T>> {
    let w = transverse_width.to_f64_lossy();
    if !(w > 0.0) || !w.is_finite() {
        return Err(invalid("transverse_width", "must be positive and finite"));
    }
    let s = separation_sigma(w);
    let lx = grid.lx().to_f64_lossy();
    let ly = grid.ly().to_f64_lossy();
    let alpha = (std::f64::consts::PI / (lx * ly)).sqrt();
    let zero = ewald_zero_mode(lx, ly, alpha) + confined_correction_at_zero(s);

    let mut kernel_k = Vec::with_capacity(grid.len());
    for j in 0..grid.ny {
        let ky = grid.ky(j).to_f64_lossy();
        for i in 0..grid.nx {
            let kx = grid.kx(i).to_f64_lossy();
            let k = (kx * kx + ky * ky).sqrt();
            let v = if i == 0 && j == 0 { zero } else { confined_kernel_k(k, s) };
            kernel_k.push(T::c(v));
        }
    }
    Ok(ScreenedKernel {
        grid,
        transverse_width,
        kernel_k,
        spectral: Spectral::new(grid),
    })
}

impl<T: Real> ScreenedKernel<T> {
    pub fn spectral(&self) -> &Spectral<T> {
        &self.spectral
    }

    /// In-place periodic convolution `V * f` of row-major grid data.
    pub fn convolve_in_place(&self, data: &mut [Complex<T>]) {
        self.spectral.forward(data);
        for (v, &k) in data.iter_mut().zip(&self.kernel_k) {
            *v = *v * k;
        }
        self.spectral.inverse(data);
    }

    pub fn convolve(&self, field: &ComplexField<T>) -> Result<ComplexField<T>> {
        self.grid.check_same(&field.grid)?;
        let mut values = field.values.clone();
        self.convolve_in_place(&mut values);
        Ok(ComplexField {
            grid: self.grid,
            values,
        })
    }

    /// `1/2 integral rho (V * rho)`, the classical self-interaction energy.
    pub fn interaction_energy(&self, density: &RealField<T>) -> Result<T> {
        let v = hartree_potential(self, density)?;
        let s = density
            .values
            .iter()
            .zip(&v.values)
            .fold(T::zero(), |a, (r, p)| a + *r * *p);
        Ok(s * self.grid.cell_area() / T::c(2.0))
    }
}

/// Potential generated by a charge density (electron charge, repulsive sign).
pub fn hartree_potential<T: Real>(kernel: &ScreenedKernel<T>, density: &RealField<T>) -> Result<RealField<T>> {
    kernel.grid.check_same(&density.grid)?;
    if let Some((index, &value)) = density.values.iter().enumerate().find(|(_, v)| !(**v >= T::zero())) {
        return Err(Error::NegativeDensity {
            index,
            value: value.to_f64_lossy(),
        });
    }
    let mut data: Vec<Complex<T>> = density.values.iter().map(|&v| Complex::new(v, T::zero())).collect();
    kernel.convolve_in_place(&mut data);
    let scale = data.iter().fold(T::zero(), |m, v| m.max(v.re.abs()));
    let residue = data.iter().fold(T::zero(), |m, v| m.max(v.im.abs()));
    if residue > T::epsilon() * T::c(1e4) * scale {
        return Err(Error::NonFinite("hartree potential (imaginary residue)"));
    }
    Ok(RealField {
        grid: kernel.grid,
        values: data.into_iter().map(|v| v.re).collect(),
    })
}

/// Exchange potential `v_nm` acting on orbital `m` in the equation of `n`.
///
/// `v_nm(r) = -e^{i dk.r} [V * (env_m^* env_n e^{-i dk.r'})](r)` with
/// `dk = k_m - k_n`; the contribution to the envelope equation of `n` is
/// `v_nm env_m`.
pub fn exchange_kernel<T: Real>(
    kernel: &ScreenedKernel<T>,
    w_m: &Wavepacket<T>,
    w_n: &Wavepacket<T>,
) -> Result<ComplexField<T>> {
    kernel.grid.check_same(w_m.grid())?;
    kernel.grid.check_same(w_n.grid())?;
    let dk = [w_m.carrier_k[0] - w_n.carrier_k[0], w_m.carrier_k[1] - w_n.carrier_k[1]];
    let mut data = vec![Complex::new(T::zero(), T::zero()); kernel.grid.len()];
    exchange_into(kernel, &w_m.envelope.values, &w_n.envelope.values, dk, &mut data);
    Ok(ComplexField {
        grid: kernel.grid,
        values: data,
    })
}

/// Writes `v_nm` into `out`, given the envelopes of `m` and `n` and `dk = k_m - k_n`.
pub(crate) fn exchange_into<T: Real>(
    kernel: &ScreenedKernel<T>,
    env_m: &[Complex<T>],
    env_n: &[Complex<T>],
    dk: [T; 2],
    out: &mut [Complex<T>],
) {
    let g = kernel.grid;
    let shifted = dk != [T::zero(), T::zero()];
    let phases = if shifted { Some(plane_wave(&g, dk)) } else { None };
    for idx in 0..g.len() {
        let mut p = env_m[idx].conj() * env_n[idx];
        if let Some(ph) = &phases {
            p = p * ph[idx].conj();
        }
        out[idx] = p;
    }
    kernel.convolve_in_place(out);
    for idx in 0..g.len() {
        let mut v = -out[idx];
        if let Some(ph) = &phases {
            v = v * ph[idx];
        }
        out[idx] = v;
    }
}

/// `exp(i k.r)` on every grid point.
pub(crate) fn plane_wave<T: Real>(g: &GridSpec<T>, k: [T; 2]) -> Vec<Complex<T>> {
    let mut out = Vec::with_capacity(g.len());
    for j in 0..g.ny {
        let y = g.y(j);
        for i in 0..g.nx {
            out.push(Complex::from_polar(T::one(), k[0] * g.x(i) + k[1] * y));
        }
    }
    out
}
