//! Sources of potentials sampled on the simulation grid.

use std::path::Path;

use crate::container::{Container, ContainerWriter, GridMeta};
use crate::error::{invalid, Error, Result};
use crate::grid::{GridSpec, RealField};
use crate::real::Real;
use crate::spectral::{Axis, Spectral};

use super::plasmon::{dipole_profiles, polarizability, rod_dipole, NanorodGeometry, Permittivity};
use super::pulse::{incident_vector_potential, LaserPulse};

/// Potentials at one instant.
///
/// The vector potential is split into a spatially uniform part and an
/// optional sampled remainder; the scalar potential is the near field seen
/// by a positive unit charge (the electron energy is `-phi`).
#[derive(Clone, Debug, PartialEq)]
pub struct FieldSample<T> {
    pub time: T,
    pub uniform_a: [T; 2],
    pub sampled_a: Option<[RealField<T>; 2]>,
    pub phi: RealField<T>,
}

impl<T: Real> FieldSample<T> {
    pub fn zero(grid: GridSpec<T>, time: T) -> Self {
        Self {
            time,
            uniform_a: [T::zero(); 2],
            sampled_a: None,
            phi: RealField::zeros(grid),
        }
    }
}

pub trait FieldProvider<T: Real>: Send + Sync {
    fn grid(&self) -> &GridSpec<T>;

    /// Closed interval of times at which sampling is allowed.
    fn validity(&self) -> (T, T);

    fn sample(&self, t: T) -> Result<FieldSample<T>>;

    /// Spatially uniform part of `A` at `t`.
    fn uniform_a(&self, _t: T) -> [T; 2] {
        [T::zero(); 2]
    }

    /// `int_{t0}^{t1}` of the uniform part of `A`.
    fn uniform_a_integral(&self, _t0: T, _t1: T) -> [T; 2] {
        [T::zero(); 2]
    }

    /// Upper bound on `|phi|` over the validity window.
    fn potential_bound(&self) -> T;

    /// Upper bound on `|A - A_uniform|` over the validity window.
    fn sampled_a_bound(&self) -> T {
        T::zero()
    }

    /// Total electric field along x, `-d_x phi - d_t A_x`.
    fn electric_field_x(&self, t: T) -> Result<RealField<T>>;

    fn check_time(&self, t: T) -> Result<()> {
        let (a, b) = self.validity();
        if t < a || t > b || !t.is_finite() {
            return Err(Error::OutsideValidity {
                t: t.to_f64_lossy(),
                start: a.to_f64_lossy(),
                end: b.to_f64_lossy(),
            });
        }
        Ok(())
    }
}

/// No fields at all.
#[derive(Clone, Debug)]
pub struct NoField<T> {
    pub grid: GridSpec<T>,
}

impl<T: Real> FieldProvider<T> for NoField<T> {
    fn grid(&self) -> &GridSpec<T> {
        &self.grid
    }

    fn validity(&self) -> (T, T) {
        (T::neg_infinity(), T::infinity())
    }

    fn sample(&self, t: T) -> Result<FieldSample<T>> {
        Ok(FieldSample::zero(self.grid, t))
    }

    fn potential_bound(&self) -> T {
        T::zero()
    }

    fn electric_field_x(&self, _t: T) -> Result<RealField<T>> {
        Ok(RealField::zeros(self.grid))
    }
}

/// Uniform laser vector potential plus the quasistatic rod near field.
#[derive(Clone, Debug)]
pub struct AnalyticPlasmon<T: Real> {
    pub pulse: LaserPulse<T>,
    pub permittivity: Permittivity,
    pub rod: NanorodGeometry<T>,
    /// Disables the uniform laser term while keeping the near field.
    pub include_incident: bool,
    /// Disables the near field while keeping the uniform laser term.
    pub include_near_field: bool,
    grid: GridSpec<T>,
    fx: RealField<T>,
    fy: RealField<T>,
    window: (T, T),
}

impl<T: Real> AnalyticPlasmon<T> {
    pub fn new(pulse: LaserPulse<T>, permittivity: Permittivity, rod: NanorodGeometry<T>, grid: GridSpec<T>) -> Self {
        let (fx, fy) = dipole_profiles(&grid, &rod);
        Self {
            pulse,
            permittivity,
            rod,
            include_incident: true,
            include_near_field: true,
            grid,
            fx,
            fy,
            window: (T::neg_infinity(), T::infinity()),
        }
    }

    pub fn with_window(mut self, start: T, end: T) -> Result<Self> {
        if !(end >= start) {
            return Err(invalid("window", "end must not precede start"));
        }
        self.window = (start, end);
        Ok(self)
    }

    pub fn dipole(&self, t: T) -> [T; 2] {
        rod_dipole(&self.pulse, &self.permittivity, self.rod.radius, t)
    }

    fn dipole_bound(&self) -> f64 {
        let r = self.rod.radius.to_f64_lossy();
        self.pulse
            .modes()
            .iter()
            .map(|m| polarizability(r, self.permittivity.eval(m.omega)).norm() * m.amp.abs())
            .sum()
    }
}

impl<T: Real> FieldProvider<T> for AnalyticPlasmon<T> {
    fn grid(&self) -> &GridSpec<T> {
        &self.grid
    }

    fn validity(&self) -> (T, T) {
        self.window
    }

    fn sample(&self, t: T) -> Result<FieldSample<T>> {
        self.check_time(t)?;
        let uniform_a = if self.include_incident {
            incident_vector_potential(&self.pulse, t)
        } else {
            [T::zero(); 2]
        };
        let phi = if self.include_near_field {
            let p = self.dipole(t);
            RealField {
                grid: self.grid,
                values: self
                    .fx
                    .values
                    .iter()
                    .zip(&self.fy.values)
                    .map(|(a, b)| p[0] * *a + p[1] * *b)
                    .collect(),
            }
        } else {
            RealField::zeros(self.grid)
        };
        Ok(FieldSample {
            time: t,
            uniform_a,
            sampled_a: None,
            phi,
        })
    }

    fn uniform_a(&self, t: T) -> [T; 2] {
        if self.include_incident {
            incident_vector_potential(&self.pulse, t)
        } else {
            [T::zero(); 2]
        }
    }

    fn uniform_a_integral(&self, t0: T, t1: T) -> [T; 2] {
        if !self.include_incident {
            return [T::zero(); 2];
        }
        let d = self.pulse.vector_potential_primitive(t1) - self.pulse.vector_potential_primitive(t0);
        [self.pulse.polarization[0] * d, self.pulse.polarization[1] * d]
    }

    fn potential_bound(&self) -> T {
        if !self.include_near_field {
            return T::zero();
        }
        T::c(2.0 * self.dipole_bound() / self.rod.radius.to_f64_lossy())
    }

    fn electric_field_x(&self, t: T) -> Result<RealField<T>> {
        self.check_time(t)?;
        let inc = if self.include_incident {
            self.pulse.field(t)[0]
        } else {
            T::zero()
        };
        let p = if self.include_near_field { self.dipole(t) } else { [T::zero(); 2] };
        Ok(RealField::from_fn(self.grid, |x, y| {
            inc + super::plasmon::dipole_field(p, &self.rod, x, y)[0]
        }))
    }
}

/// One stored time slice of a field series.
#[derive(Clone, Debug, PartialEq)]
pub struct FieldFrame<T> {
    pub a_x: RealField<T>,
    pub a_y: RealField<T>,
    pub phi: RealField<T>,
}

/// Sampled potentials interpolated linearly in time.
#[derive(Clone, Debug)]
pub struct FieldSeries<T: Real> {
    grid: GridSpec<T>,
    times: Vec<T>,
    frames: Vec<FieldFrame<T>>,
    has_a: bool,
    phi_bound: T,
    a_bound: T,
    spectral: Spectral<T>,
}

impl<T: Real> FieldSeries<T> {
    pub fn new(grid: GridSpec<T>, times: Vec<T>, frames: Vec<FieldFrame<T>>) -> Result<Self> {
        if times.is_empty() || times.len() != frames.len() {
            return Err(invalid("frames", "need one frame per time and at least one frame"));
        }
        if times.windows(2).any(|w| !(w[1] > w[0])) || times.iter().any(|t| !t.is_finite()) {
            return Err(invalid("times", "must be finite and strictly increasing"));
        }
        let mut phi_bound = T::zero();
        let mut a_bound = T::zero();
        for f in &frames {
            for field in [&f.a_x, &f.a_y, &f.phi] {
                grid.check_same(&field.grid)?;
                if field.values.iter().any(|v| !v.is_finite()) {
                    return Err(Error::NonFinite("field series frame"));
                }
            }
            phi_bound = phi_bound.max(f.phi.max_abs());
            a_bound = a_bound.max(f.a_x.max_abs().hypot(f.a_y.max_abs()));
        }
        Ok(Self {
            grid,
            has_a: a_bound > T::zero(),
            times,
            frames,
            phi_bound,
            a_bound,
            spectral: Spectral::new(grid),
        })
    }

    pub fn times(&self) -> &[T] {
        &self.times
    }

    pub fn frames(&self) -> &[FieldFrame<T>] {
        &self.frames
    }

    /// Segment index `k` and weight `w` with `t = (1 - w) t_k + w t_{k+1}`.
    fn locate(&self, t: T) -> (usize, T) {
        let n = self.times.len();
        if n == 1 {
            return (0, T::zero());
        }
        let k = match self.times.partition_point(|&s| s <= t) {
            0 => 0,
            p if p >= n => n - 2,
            p => p - 1,
        };
        let w = (t - self.times[k]) / (self.times[k + 1] - self.times[k]);
        (k, w)
    }

    fn frame_at(&self, t: T) -> FieldFrame<T> {
        if self.times.len() == 1 {
            return self.frames[0].clone();
        }
        if let Ok(k) = self.times.binary_search_by(|s| s.partial_cmp(&t).expect("finite times")) {
            return self.frames[k].clone();
        }
        let (k, w) = self.locate(t);
        let (a, b) = (&self.frames[k], &self.frames[k + 1]);
        let lerp = |x: &RealField<T>, y: &RealField<T>| RealField {
            grid: self.grid,
            values: x.values.iter().zip(&y.values).map(|(p, q)| (T::one() - w) * *p + w * *q).collect(),
        };
        FieldFrame {
            a_x: lerp(&a.a_x, &b.a_x),
            a_y: lerp(&a.a_y, &b.a_y),
            phi: lerp(&a.phi, &b.phi),
        }
    }
}

impl<T: Real> FieldProvider<T> for FieldSeries<T> {
    fn grid(&self) -> &GridSpec<T> {
        &self.grid
    }

    fn validity(&self) -> (T, T) {
        if self.times.len() == 1 {
            (T::neg_infinity(), T::infinity())
        } else {
            (self.times[0], self.times[self.times.len() - 1])
        }
    }

    fn sample(&self, t: T) -> Result<FieldSample<T>> {
        self.check_time(t)?;
        let f = self.frame_at(t);
        Ok(FieldSample {
            time: t,
            uniform_a: [T::zero(); 2],
            sampled_a: if self.has_a { Some([f.a_x, f.a_y]) } else { None },
            phi: f.phi,
        })
    }

    fn potential_bound(&self) -> T {
        self.phi_bound
    }

    fn sampled_a_bound(&self) -> T {
        self.a_bound
    }

    fn electric_field_x(&self, t: T) -> Result<RealField<T>> {
        self.check_time(t)?;
        let f = self.frame_at(t);
        let grad = self.spectral.gradient(&f.phi.to_complex(), Axis::X);
        let mut out: Vec<T> = grad.values.iter().map(|v| -v.re).collect();
        if self.times.len() > 1 && self.has_a {
            let (k, _) = self.locate(t);
            let dt = self.times[k + 1] - self.times[k];
            let (a, b) = (&self.frames[k].a_x, &self.frames[k + 1].a_x);
            for (o, (p, q)) in out.iter_mut().zip(a.values.iter().zip(&b.values)) {
                *o = *o - (*q - *p) / dt;
            }
        }
        RealField::from_values(self.grid, out)
    }
}

pub const FIELD_SERIES_KIND: &str = "field_series";

fn frame_name(quantity: &str, k: usize) -> String {
    format!("{quantity}_{k:05}")
}

/// Writes a field series in the run-container format.
pub fn write_field_series<T: Real>(dir: impl AsRef<Path>, series: &FieldSeries<T>) -> Result<()> {
    let g = series.grid;
    let mut w = ContainerWriter::create(dir, FIELD_SERIES_KIND)?;
    for (k, f) in series.frames.iter().enumerate() {
        w.write_real(&frame_name("A_x", k), &[g.ny, g.nx], &f.a_x.values)?;
        w.write_real(&frame_name("A_y", k), &[g.ny, g.nx], &f.a_y.values)?;
        w.write_real(&frame_name("phi", k), &[g.ny, g.nx], &f.phi.values)?;
    }
    let times: Vec<f64> = series.times.iter().map(|t| t.to_f64_lossy()).collect();
    w.finalize(
        true,
        serde_json::json!({
            "grid": GridMeta::from_grid(&g),
            "times": times,
            "units": "atomic",
        }),
    )?;
    Ok(())
}

/// Loads a field series; `expected` is the simulation grid, if known.
pub fn load_field_series<T: Real>(path: impl AsRef<Path>, expected: Option<&GridSpec<T>>) -> Result<FieldSeries<T>> {
    let c = Container::open(path)?;
    if c.manifest.kind != FIELD_SERIES_KIND {
        return Err(Error::Container(format!("expected a field series, found `{}`", c.manifest.kind)));
    }
    let meta = &c.manifest.metadata;
    let grid_meta: GridMeta = serde_json::from_value(meta.get("grid").cloned().unwrap_or_default())
        .map_err(|e| Error::Container(format!("malformed grid header: {e}")))?;
    let times: Vec<f64> = serde_json::from_value(meta.get("times").cloned().unwrap_or_default())
        .map_err(|e| Error::Container(format!("malformed times header: {e}")))?;
    let grid: GridSpec<T> = grid_meta.to_grid()?;
    if let Some(g) = expected {
        if GridMeta::from_grid(g) != grid_meta {
            return Err(Error::GridMismatch);
        }
    }
    if times.windows(2).any(|w| !(w[1] > w[0])) {
        return Err(Error::Container("frame times are not strictly increasing".into()));
    }
    let read = |name: String| -> Result<RealField<T>> {
        let entry = c.entry(&name)?;
        if entry.shape != [grid.ny, grid.nx] {
            return Err(Error::Container(format!("dataset `{name}` has shape {:?}", entry.shape)));
        }
        let v = c.read_real(&name)?;
        RealField::from_values(grid, v.into_iter().map(T::c).collect())
    };
    let mut frames = Vec::with_capacity(times.len());
    for k in 0..times.len() {
        frames.push(FieldFrame {
            a_x: read(frame_name("A_x", k))?,
            a_y: read(frame_name("A_y", k))?,
            phi: read(frame_name("phi", k))?,
        });
    }
    FieldSeries::new(grid, times.into_iter().map(T::c).collect(), frames)
}

/// Samples any provider at the given times into a series (for export).
pub fn record_series<T: Real>(provider: &dyn FieldProvider<T>, times: &[T]) -> Result<FieldSeries<T>> {
    let g = *provider.grid();
    let mut frames = Vec::with_capacity(times.len());
    for &t in times {
        let s = provider.sample(t)?;
        let (a_x, a_y) = match s.sampled_a {
            Some([ax, ay]) => (
                RealField::from_values(g, ax.values.iter().map(|v| *v + s.uniform_a[0]).collect())?,
                RealField::from_values(g, ay.values.iter().map(|v| *v + s.uniform_a[1]).collect())?,
            ),
            None => (
                RealField::from_values(g, vec![s.uniform_a[0]; g.len()])?,
                RealField::from_values(g, vec![s.uniform_a[1]; g.len()])?,
            ),
        };
        frames.push(FieldFrame { a_x, a_y, phi: s.phi });
    }
    FieldSeries::new(g, times.to_vec(), frames)
}
