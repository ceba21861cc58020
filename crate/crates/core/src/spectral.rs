//! FFT-based spectral calculus on the periodic grid.

use std::sync::{Arc, Mutex};

use rustfft::num_complex::Complex;
use rustfft::{Fft, FftPlanner};

use crate::grid::{ComplexField, GridSpec};
use crate::real::Real;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Axis {
    X,
    Y,
}

/// Cached 2D FFT plans and momentum axes for one grid.
///
/// The forward transform is unnormalized; the inverse carries the `1/N`
/// factor so that `inverse(forward(f)) == f`.
pub struct Spectral<T: Real> {
    grid: GridSpec<T>,
    fwd_x: Arc<dyn Fft<T>>,
    inv_x: Arc<dyn Fft<T>>,
    fwd_y: Arc<dyn Fft<T>>,
    inv_y: Arc<dyn Fft<T>>,
    kx: Vec<T>,
    ky: Vec<T>,
    /// Column block buffer and FFT scratch reused across calls.
    work: Mutex<(Vec<Complex<T>>, Vec<Complex<T>>)>,
}

impl<T: Real> Clone for Spectral<T> {
    fn clone(&self) -> Self {
        Self {
            grid: self.grid,
            fwd_x: self.fwd_x.clone(),
            inv_x: self.inv_x.clone(),
            fwd_y: self.fwd_y.clone(),
            inv_y: self.inv_y.clone(),
            kx: self.kx.clone(),
            ky: self.ky.clone(),
            work: Mutex::new((Vec::new(), Vec::new())),
        }
    }
}

impl<T: Real> std::fmt::Debug for Spectral<T> {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("Spectral").field("grid", &self.grid).finish()
    }
}

impl<T: Real> Spectral<T> {
    pub fn new(grid: GridSpec<T>) -> Self {
        let mut planner = FftPlanner::new();
        Self {
            grid,
            fwd_x: planner.plan_fft_forward(grid.nx),
            inv_x: planner.plan_fft_inverse(grid.nx),
            fwd_y: planner.plan_fft_forward(grid.ny),
            inv_y: planner.plan_fft_inverse(grid.ny),
            kx: grid.kx_axis(),
            ky: grid.ky_axis(),
            work: Mutex::new((Vec::new(), Vec::new())),
        }
    }

    pub fn grid(&self) -> &GridSpec<T> {
        &self.grid
    }

    pub fn kx(&self) -> &[T] {
        &self.kx
    }

    pub fn ky(&self) -> &[T] {
        &self.ky
    }

    /// In-place unnormalized forward transform of row-major data.
    pub fn forward(&self, data: &mut [Complex<T>]) {
        self.transform(data, &self.fwd_x, &self.fwd_y);
    }

    /// In-place inverse transform including the `1/N` normalization.
    pub fn inverse(&self, data: &mut [Complex<T>]) {
        self.transform(data, &self.inv_x, &self.inv_y);
        let s = T::one() / T::c(self.grid.len() as f64);
        for v in data.iter_mut() {
            *v = *v * s;
        }
    }

    fn transform(&self, data: &mut [Complex<T>], fx: &Arc<dyn Fft<T>>, fy: &Arc<dyn Fft<T>>) {
        let (nx, ny) = (self.grid.nx, self.grid.ny);
        assert_eq!(data.len(), nx * ny, "data length does not match grid");
        let zero = Complex::new(T::zero(), T::zero());
        let mut guard = self.work.lock().unwrap_or_else(|e| e.into_inner());
        let (cols, scratch) = &mut *guard;
        let need = fx.get_inplace_scratch_len().max(fy.get_inplace_scratch_len());
        if scratch.len() < need {
            scratch.resize(need, zero);
        }
        if cols.len() < 16 * ny {
            cols.resize(16 * ny, zero);
        }
        fx.process_with_scratch(data, scratch);
        // columns in blocks of B, gathered into contiguous storage
        const B: usize = 16;
        let mut i0 = 0;
        while i0 < nx {
            let w = B.min(nx - i0);
            let block = &mut cols[..w * ny];
            for j in 0..ny {
                let row = &data[j * nx + i0..j * nx + i0 + w];
                for (c, v) in row.iter().enumerate() {
                    block[c * ny + j] = *v;
                }
            }
            fy.process_with_scratch(block, scratch);
            for j in 0..ny {
                let row = &mut data[j * nx + i0..j * nx + i0 + w];
                for (c, v) in row.iter_mut().enumerate() {
                    *v = block[c * ny + j];
                }
            }
            i0 += w;
        }
    }

    /// Multiplies the spectrum of `field` by `m(kx, ky)` and transforms back.
    pub fn apply_multiplier(
        &self,
        field: &ComplexField<T>,
        m: impl Fn(T, T) -> Complex<T>,
    ) -> ComplexField<T> {
        let mut data = field.values.clone();
        self.forward(&mut data);
        self.multiply_in_place(&mut data, m);
        self.inverse(&mut data);
        ComplexField {
            grid: field.grid,
            values: data,
        }
    }

    pub fn multiply_in_place(&self, data: &mut [Complex<T>], m: impl Fn(T, T) -> Complex<T>) {
        let nx = self.grid.nx;
        for (j, &ky) in self.ky.iter().enumerate() {
            for (i, &kx) in self.kx.iter().enumerate() {
                let idx = j * nx + i;
                data[idx] = data[idx] * m(kx, ky);
            }
        }
    }

    pub fn gradient(&self, field: &ComplexField<T>, axis: Axis) -> ComplexField<T> {
        let nyq_x = self.grid.nx / 2;
        let nyq_y = self.grid.ny / 2;
        let dkx = self.grid.dkx();
        let dky = self.grid.dky();
        // The Nyquist bin has no well-defined sign; its derivative is dropped.
        self.apply_multiplier(field, |kx, ky| match axis {
            Axis::X if is_nyquist(kx, dkx, nyq_x) => Complex::new(T::zero(), T::zero()),
            Axis::Y if is_nyquist(ky, dky, nyq_y) => Complex::new(T::zero(), T::zero()),
            Axis::X => Complex::new(T::zero(), kx),
            Axis::Y => Complex::new(T::zero(), ky),
        })
    }

    pub fn laplacian(&self, field: &ComplexField<T>) -> ComplexField<T> {
        self.apply_multiplier(field, |kx, ky| {
            Complex::new(-(kx * kx + ky * ky), T::zero())
        })
    }
}

#[inline]
fn is_nyquist<T: Real>(k: T, dk: T, half: usize) -> bool {
    (k / dk + T::c(half as f64)).abs() < T::c(0.5)
}

/// `d field / d axis` by multiplication with `i k` in Fourier space.
pub fn spectral_gradient<T: Real>(field: &ComplexField<T>, axis: Axis) -> ComplexField<T> {
    Spectral::new(field.grid).gradient(field, axis)
}

/// Laplacian by multiplication with `-(kx^2 + ky^2)` in Fourier space.
pub fn spectral_laplacian<T: Real>(field: &ComplexField<T>) -> ComplexField<T> {
    Spectral::new(field.grid).laplacian(field)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn grid() -> GridSpec<f64> {
        GridSpec::new(32, 16, 0.4, 0.7, -3.0, 1.0).unwrap()
    }

    fn plane_wave(g: GridSpec<f64>, mx: i32, my: i32) -> (ComplexField<f64>, f64, f64) {
        let qx = mx as f64 * g.dkx();
        let qy = my as f64 * g.dky();
        (
            ComplexField::from_fn(g, |x, y| Complex::from_polar(1.0, qx * x + qy * y)),
            qx,
            qy,
        )
    }

    #[test]
    fn constant_has_zero_derivatives() {
        let g = grid();
        let f = ComplexField::from_fn(g, |_, _| Complex::new(2.5, -1.0));
        for out in [
            spectral_gradient(&f, Axis::X),
            spectral_gradient(&f, Axis::Y),
            spectral_laplacian(&f),
        ] {
            assert!(out.max_abs() < 1e-13);
        }
    }

    #[test]
    fn plane_wave_derivatives_are_exact() {
        let g = grid();
        let (f, qx, qy) = plane_wave(g, 3, -2);
        let dx = spectral_gradient(&f, Axis::X);
        let dy = spectral_gradient(&f, Axis::Y);
        let lap = spectral_laplacian(&f);
        for (idx, v) in f.values.iter().enumerate() {
            let ex = Complex::new(0.0, qx) * v;
            let ey = Complex::new(0.0, qy) * v;
            let el = -(qx * qx + qy * qy) * v;
            assert!((dx.values[idx] - ex).norm() < 1e-10 * qx.abs());
            assert!((dy.values[idx] - ey).norm() < 1e-10 * qy.abs());
            assert!((lap.values[idx] - el).norm() < 1e-10 * (qx * qx + qy * qy));
        }
    }

    #[test]
    fn gaussian_gradient_matches_finite_differences_at_second_order() {
        // centred differences converge as dx^2 towards the spectral derivative
        let mut errs = Vec::new();
        for n in [64usize, 128] {
            let l = 20.0;
            let d = l / n as f64;
            let g = GridSpec::new(n, 8, d, 1.0, -l / 2.0, 0.0).unwrap();
            let f = ComplexField::from_fn(g, |x, _| {
                Complex::new((-x * x / 2.0).exp(), 0.3 * (-x * x / 3.0).exp())
            });
            let spec = spectral_gradient(&f, Axis::X);
            let mut err: f64 = 0.0;
            for i in 0..n {
                let ip = (i + 1) % n;
                let im = (i + n - 1) % n;
                let fd = (f.values[ip] - f.values[im]) / (2.0 * d);
                err = err.max((fd - spec.values[i]).norm());
            }
            errs.push(err);
        }
        let ratio = errs[0] / errs[1];
        assert!((ratio - 4.0).abs() < 0.2, "ratio {ratio}");
    }

    #[test]
    fn forward_inverse_round_trip() {
        let g = grid();
        let f = ComplexField::from_fn(g, |x, y| Complex::new((x * y).sin(), x.cos()));
        let s = Spectral::new(g);
        let mut d = f.values.clone();
        s.forward(&mut d);
        s.inverse(&mut d);
        for (a, b) in d.iter().zip(&f.values) {
            assert!((a - b).norm() < 1e-13);
        }
    }

    #[test]
    fn works_in_single_precision() {
        let g = GridSpec::<f32>::new(16, 16, 0.5, 0.5, 0.0, 0.0).unwrap();
        let q = 2.0 * g.dkx();
        let f = ComplexField::from_fn(g, |x, _| Complex::from_polar(1.0f32, q * x));
        let d = spectral_gradient(&f, Axis::X);
        for (a, v) in d.values.iter().zip(&f.values) {
            assert!((a - Complex::new(0.0, q) * v).norm() < 1e-4);
        }
    }
}
