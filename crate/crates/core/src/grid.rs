//! Uniform periodic 2D grid and the field containers living on it.
//!
//! Storage is row-major with x fastest: the value at `(i, j)` sits at
//! `j * nx + i`.

use rustfft::num_complex::Complex;

use crate::error::{Error, Result};
use crate::real::Real;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct GridSpec<T> {
    pub nx: usize,
    pub ny: usize,
    pub dx: T,
    pub dy: T,
    pub x0: T,
    pub y0: T,
}

impl<T: Real> GridSpec<T> {
    pub fn new(nx: usize, ny: usize, dx: T, dy: T, x0: T, y0: T) -> Result<Self> {
        for (n, name) in [(nx, "nx"), (ny, "ny")] {
            if n < 8 || !n.is_power_of_two() {
                return Err(Error::InvalidGrid(format!(
                    "{name} = {n} must be a power of two >= 8"
                )));
            }
        }
        if !(dx > T::zero()) || !(dy > T::zero()) || !dx.is_finite() || !dy.is_finite() {
            return Err(Error::InvalidGrid(format!(
                "spacings must be positive and finite (dx = {dx}, dy = {dy})"
            )));
        }
        if !x0.is_finite() || !y0.is_finite() {
            return Err(Error::InvalidGrid("origin must be finite".into()));
        }
        Ok(Self {
            nx,
            ny,
            dx,
            dy,
            x0,
            y0,
        })
    }

    #[inline]
    pub fn len(&self) -> usize {
        self.nx * self.ny
    }

    #[inline]
    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    #[inline]
    pub fn index(&self, i: usize, j: usize) -> usize {
        j * self.nx + i
    }

    #[inline]
    pub fn x(&self, i: usize) -> T {
        self.x0 + T::c(i as f64) * self.dx
    }

    #[inline]
    pub fn y(&self, j: usize) -> T {
        self.y0 + T::c(j as f64) * self.dy
    }

    pub fn lx(&self) -> T {
        T::c(self.nx as f64) * self.dx
    }

    pub fn ly(&self) -> T {
        T::c(self.ny as f64) * self.dy
    }

    pub fn cell_area(&self) -> T {
        self.dx * self.dy
    }

    pub fn area(&self) -> T {
        self.lx() * self.ly()
    }

    pub fn dkx(&self) -> T {
        T::c(2.0) * T::PI() / self.lx()
    }

    pub fn dky(&self) -> T {
        T::c(2.0) * T::PI() / self.ly()
    }

    /// Nyquist momentum along x, `pi / dx`.
    pub fn kx_max(&self) -> T {
        T::PI() / self.dx
    }

    pub fn ky_max(&self) -> T {
        T::PI() / self.dy
    }

    /// Angular wavenumber of FFT bin `i` along x (standard FFT ordering).
    #[inline]
    pub fn kx(&self, i: usize) -> T {
        T::c(signed_bin(i, self.nx) as f64) * self.dkx()
    }

    #[inline]
    pub fn ky(&self, j: usize) -> T {
        T::c(signed_bin(j, self.ny) as f64) * self.dky()
    }

    pub fn kx_axis(&self) -> Vec<T> {
        (0..self.nx).map(|i| self.kx(i)).collect()
    }

    pub fn ky_axis(&self) -> Vec<T> {
        (0..self.ny).map(|j| self.ky(j)).collect()
    }

    /// Nearest FFT bin for a momentum along x, or `None` outside `[-pi/dx, pi/dx)`.
    pub fn kx_bin(&self, k: T) -> Option<usize> {
        let m = (k / self.dkx()).round().to_i64()?;
        let half = (self.nx / 2) as i64;
        if m < -half || m >= half {
            return None;
        }
        Some(m.rem_euclid(self.nx as i64) as usize)
    }

    pub(crate) fn check_same(&self, other: &Self) -> Result<()> {
        if self == other {
            Ok(())
        } else {
            Err(Error::GridMismatch)
        }
    }
}

#[inline]
pub(crate) fn signed_bin(i: usize, n: usize) -> i64 {
    if i < n / 2 {
        i as i64
    } else {
        i as i64 - n as i64
    }
}

/// Complex amplitudes sampled on a grid.
#[derive(Clone, Debug, PartialEq)]
pub struct ComplexField<T> {
    pub grid: GridSpec<T>,
    pub values: Vec<Complex<T>>,
}

impl<T: Real> ComplexField<T> {
    pub fn zeros(grid: GridSpec<T>) -> Self {
        Self {
            grid,
            values: vec![Complex::new(T::zero(), T::zero()); grid.len()],
        }
    }

    pub fn from_values(grid: GridSpec<T>, values: Vec<Complex<T>>) -> Result<Self> {
        if values.len() != grid.len() {
            return Err(invalid_len(values.len(), grid.len()));
        }
        if values.iter().any(|v| !v.re.is_finite() || !v.im.is_finite()) {
            return Err(Error::NonFinite("complex field values"));
        }
        Ok(Self { grid, values })
    }

    /// Samples `f(x, y)` at every grid point.
    pub fn from_fn(grid: GridSpec<T>, mut f: impl FnMut(T, T) -> Complex<T>) -> Self {
        let mut values = Vec::with_capacity(grid.len());
        for j in 0..grid.ny {
            let y = grid.y(j);
            for i in 0..grid.nx {
                values.push(f(grid.x(i), y));
            }
        }
        Self { grid, values }
    }

    /// `sum |v|^2 dx dy`.
    pub fn norm_sqr(&self) -> T {
        self.values
            .iter()
            .fold(T::zero(), |acc, v| acc + v.norm_sqr())
            * self.grid.cell_area()
    }

    pub fn norm(&self) -> T {
        self.norm_sqr().sqrt()
    }

    /// `sum v dx dy`.
    pub fn integral(&self) -> Complex<T> {
        let s = self
            .values
            .iter()
            .fold(Complex::new(T::zero(), T::zero()), |acc, v| acc + v);
        s * self.grid.cell_area()
    }

    pub fn scale(&mut self, s: Complex<T>) {
        for v in &mut self.values {
            *v = *v * s;
        }
    }

    pub fn is_finite(&self) -> bool {
        self.values
            .iter()
            .all(|v| v.re.is_finite() && v.im.is_finite())
    }

    pub fn max_abs(&self) -> T {
        self.values
            .iter()
            .fold(T::zero(), |m, v| m.max(v.norm()))
    }

    /// Pointwise `|v|^2`.
    pub fn density(&self) -> RealField<T> {
        RealField {
            grid: self.grid,
            values: self.values.iter().map(|v| v.norm_sqr()).collect(),
        }
    }

    /// `sum |a - b|^2 dx dy`, the squared L2 distance.
    pub fn distance_sqr(&self, other: &Self) -> Result<T> {
        self.grid.check_same(&other.grid)?;
        Ok(self
            .values
            .iter()
            .zip(&other.values)
            .fold(T::zero(), |acc, (a, b)| acc + (a - b).norm_sqr())
            * self.grid.cell_area())
    }
}

/// Real values sampled on a grid (densities, potentials).
#[derive(Clone, Debug, PartialEq)]
pub struct RealField<T> {
    pub grid: GridSpec<T>,
    pub values: Vec<T>,
}

impl<T: Real> RealField<T> {
    pub fn zeros(grid: GridSpec<T>) -> Self {
        Self {
            grid,
            values: vec![T::zero(); grid.len()],
        }
    }

    pub fn from_values(grid: GridSpec<T>, values: Vec<T>) -> Result<Self> {
        if values.len() != grid.len() {
            return Err(invalid_len(values.len(), grid.len()));
        }
        Ok(Self { grid, values })
    }

    pub fn from_fn(grid: GridSpec<T>, mut f: impl FnMut(T, T) -> T) -> Self {
        let mut values = Vec::with_capacity(grid.len());
        for j in 0..grid.ny {
            let y = grid.y(j);
            for i in 0..grid.nx {
                values.push(f(grid.x(i), y));
            }
        }
        Self { grid, values }
    }

    pub fn integral(&self) -> T {
        self.values.iter().fold(T::zero(), |a, &v| a + v) * self.grid.cell_area()
    }

    pub fn max_abs(&self) -> T {
        self.values.iter().fold(T::zero(), |m, v| m.max(v.abs()))
    }

    pub fn to_complex(&self) -> ComplexField<T> {
        ComplexField {
            grid: self.grid,
            values: self
                .values
                .iter()
                .map(|&v| Complex::new(v, T::zero()))
                .collect(),
        }
    }
}

fn invalid_len(found: usize, expected: usize) -> Error {
    Error::InvalidGrid(format!(
        "value count {found} does not match grid size {expected}"
    ))
}
