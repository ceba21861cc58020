//! Run orchestration: resolve, propagate in segments ending at every slice
//! time, and stream snapshots and observables into a run container.

use std::path::Path;

use serde::{Deserialize, Serialize};
use serde_json::json;
use tdhf_core::container::{ContainerWriter, GridMeta, Manifest};
use tdhf_core::em::{g_factor, FieldProvider, GFactorRequest};
use tdhf_core::engine::run;
use tdhf_core::observables::{comb_spacing, SliceAxis};
use tdhf_core::units::{au_to_ev, au_to_fs, HARTREE_EV};
use tdhf_core::{
    build_kernel, energy_functional, fringe_visibility, gram_schmidt, pair_density_slice, pinem_total, Complex,
    PairDensitySlice, PinemBins, PinemSpectrum, Sink, Space, SpinMode, SystemState,
};

use crate::config::{RunConfig, Scenario};
use crate::error::ScenarioError;

pub const KIND: &str = "tdhf-run";

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SnapshotRecord {
    pub index: usize,
    pub step: usize,
    /// Atomic units.
    pub time: f64,
    pub time_fs: f64,
    pub norms: Vec<f64>,
    pub datasets: Vec<String>,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct BinsMeta {
    pub e_min: f64,
    pub e_max: f64,
    pub n_energy: usize,
    pub acceptance: f64,
    pub n_angle: usize,
}

impl From<PinemBins<f64>> for BinsMeta {
    fn from(b: PinemBins<f64>) -> Self {
        Self {
            e_min: b.e_min,
            e_max: b.e_max,
            n_energy: b.n_energy,
            acceptance: b.acceptance,
            n_angle: b.n_angle,
        }
    }
}

impl BinsMeta {
    pub fn bins(&self) -> tdhf_core::Result<PinemBins<f64>> {
        PinemBins::new(self.e_min, self.e_max, self.n_energy, self.acceptance, self.n_angle)
    }
}

pub fn snapshot_prefix(index: usize) -> String {
    format!("snap{index:04}")
}

struct ContainerSink<'a> {
    writer: ContainerWriter,
    grid_shape: [usize; 2],
    bins: Option<PinemBins<f64>>,
    slices: &'a [f64],
    step_offset: usize,
    skip_initial: bool,
    records: Vec<SnapshotRecord>,
    last_spectrum: Option<PinemSpectrum<f64>>,
}

impl ContainerSink<'_> {
    fn write_slice(&mut self, prefix: &str, s: &PairDensitySlice<f64>) -> tdhf_core::Result<Vec<String>> {
        let tag = match s.axis {
            SliceAxis::X => "pair_x",
            SliceAxis::Kx => "pair_kx",
        };
        let n = s.len();
        let mut names = Vec::new();
        let coords = format!("{prefix}/{tag}/coords");
        self.writer.write_real(&coords, &[n], &s.coords)?;
        names.push(coords);
        for (part, data) in [
            ("total", &s.total),
            ("uncorrelated", &s.uncorrelated),
            ("exchange", &s.exchange),
            ("exchange_phase", &s.exchange_phase),
        ] {
            let name = format!("{prefix}/{tag}/{part}");
            self.writer.write_real(&name, &[n, n], data)?;
            names.push(name);
        }
        Ok(names)
    }
}

impl Sink<f64> for ContainerSink<'_> {
    fn snapshot(&mut self, step: usize, state: &SystemState<f64>) -> tdhf_core::Result<()> {
        if step == 0 && self.skip_initial {
            return Ok(());
        }
        let index = self.records.len();
        let prefix = snapshot_prefix(index);
        let mut datasets = Vec::new();
        for (n, o) in state.orbitals.iter().enumerate() {
            let name = format!("{prefix}/psi{}", n + 1);
            self.writer.write_complex(&name, &self.grid_shape, &o.envelope.values)?;
            datasets.push(name);
        }
        if let Some(bins) = self.bins {
            let spec = pinem_total(state, &bins)?;
            let sigma = format!("{prefix}/pinem_sigma");
            self.writer.write_real(&sigma, &[bins.n_energy, bins.n_angle], &spec.sigma)?;
            let total = format!("{prefix}/pinem_total");
            self.writer.write_real(&total, &[bins.n_energy], &spec.total)?;
            datasets.push(sigma);
            datasets.push(total);
            self.last_spectrum = Some(spec);
        }
        let at_slice = self
            .slices
            .iter()
            .any(|t| (state.time - t).abs() <= 1e-9 * t.abs().max(1.0));
        if at_slice && state.orbitals.len() == 2 {
            for space in [Space::Real, Space::Momentum] {
                let s = pair_density_slice(state, space)?;
                datasets.extend(self.write_slice(&prefix, &s)?);
            }
        }
        self.records.push(SnapshotRecord {
            index,
            step: step + self.step_offset,
            time: state.time,
            time_fs: au_to_fs(state.time),
            norms: state.norms(),
            datasets,
        });
        Ok(())
    }
}

/// Comb band used for the visibility: the first `peaks` gain orders above
/// `reference`, with half an order of margin on either side.
pub fn visibility_band(reference: f64, photon: f64, peaks: usize) -> (f64, f64) {
    (reference + 0.5 * photon, reference + (peaks as f64 + 0.5) * photon)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GFactorMeta {
    pub electron: usize,
    pub re: f64,
    pub im: f64,
    pub abs: f64,
    pub kx: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct VisibilityMeta {
    pub band_ev: [f64; 2],
    pub photon_ev: f64,
    pub value: Option<f64>,
    pub comb_spacing_ev: Option<f64>,
    pub note: Option<String>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Summary {
    pub steps: usize,
    pub final_time_fs: f64,
    pub initial_norms: Vec<f64>,
    pub final_norms: Vec<f64>,
    /// Hartree-Fock energy functional in eV.
    pub initial_energy_ev: f64,
    pub final_energy_ev: f64,
    pub max_lambda_dt: f64,
    pub g_factors: Vec<GFactorMeta>,
    pub reference_energy_ev: f64,
    pub visibility: Option<VisibilityMeta>,
    pub spectrum_span_ev: Option<[f64; 2]>,
    pub spectrum_integral: Option<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct OrbitalMeta {
    pub label: String,
    pub carrier_k: [f64; 2],
    pub spin: String,
}

/// Everything the manifest metadata holds, in typed form.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunMetadata {
    pub config: RunConfig,
    pub code_version: String,
    pub units: String,
    pub grid: GridMeta,
    pub spin_mode: String,
    pub orbitals: Vec<OrbitalMeta>,
    pub pinem_bins: Option<BinsMeta>,
    pub snapshots: Vec<SnapshotRecord>,
    pub summary: Option<Summary>,
    pub error: Option<String>,
}

impl RunMetadata {
    pub fn from_manifest(m: &Manifest) -> Result<Self, ScenarioError> {
        serde_json::from_value(m.metadata.get("run").cloned().unwrap_or_default())
            .map_err(|e| ScenarioError::Io(format!("manifest metadata: {e}")))
    }
}

fn spectrum_span(spec: &PinemSpectrum<f64>) -> Option<[f64; 2]> {
    let peak = spec.total.iter().fold(0.0f64, |a, v| a.max(*v));
    if !(peak > 0.0) {
        return None;
    }
    let keep: Vec<f64> = spec
        .energies
        .iter()
        .zip(&spec.total)
        .filter(|(_, v)| **v > 1e-6 * peak)
        .map(|(e, _)| *e)
        .collect();
    Some([au_to_ev(keep[0]), au_to_ev(keep[keep.len() - 1])])
}

/// Visibility and comb spacing of a spectrum over the standard band.
pub fn visibility_of(spec: &PinemSpectrum<f64>, reference: f64, photon: f64, peaks: usize) -> VisibilityMeta {
    let band = visibility_band(reference, photon, peaks);
    let (value, note) = match fringe_visibility(spec, band, photon) {
        Ok(v) => (Some(v), None),
        Err(e) => (None, Some(e.to_string())),
    };
    VisibilityMeta {
        band_ev: [au_to_ev(band.0), au_to_ev(band.1)],
        photon_ev: au_to_ev(photon),
        value,
        comb_spacing_ev: comb_spacing(spec, band, photon).ok().map(au_to_ev),
        note,
    }
}

fn initial_state(scenario: &Scenario) -> Result<SystemState<f64>, ScenarioError> {
    let mut orbitals = scenario.orbitals.clone();
    if scenario.orthogonalize && orbitals.len() == 2 {
        let [a, b] = gram_schmidt([orbitals[0].clone(), orbitals[1].clone()])?;
        orbitals = vec![a, b];
    }
    SystemState::new(orbitals, scenario.t_start, scenario.spin_mode).map_err(|e| ScenarioError::Config(e.to_string()))
}

/// Resolves `config`, runs it, and writes the container to `out`.
pub fn run_scenario(config: &RunConfig, out: impl AsRef<Path>) -> Result<Manifest, ScenarioError> {
    let scenario = config.resolve()?;
    let state = initial_state(&scenario)?;
    let g = scenario.grid;
    let kernel = build_kernel(g, scenario.kernel_width)?;
    let provider = scenario.provider()?;
    let bins = if scenario.pinem { Some(scenario.pinem_bins()?) } else { None };

    let mut writer = ContainerWriter::create(out.as_ref(), KIND)?;
    let xs: Vec<f64> = (0..g.nx).map(|i| g.x(i)).collect();
    let ys: Vec<f64> = (0..g.ny).map(|j| g.y(j)).collect();
    writer.write_real("axes/x", &[g.nx], &xs)?;
    writer.write_real("axes/y", &[g.ny], &ys)?;
    if let Some(b) = bins {
        writer.write_real("axes/energy", &[b.n_energy], &b.energies())?;
        writer.write_real("axes/angle", &[b.n_angle], &b.angles())?;
    }

    let mut meta = RunMetadata {
        config: config.clone(),
        code_version: env!("CARGO_PKG_VERSION").to_string(),
        units: "hartree-atomic".into(),
        grid: GridMeta::from_grid(&g),
        spin_mode: match scenario.spin_mode {
            SpinMode::Polarized => "polarized".into(),
            SpinMode::Unpolarized => "unpolarized".into(),
        },
        orbitals: state
            .orbitals
            .iter()
            .map(|o| OrbitalMeta {
                label: o.label.clone(),
                carrier_k: o.carrier_k,
                spin: format!("{:?}", o.spin).to_lowercase(),
            })
            .collect(),
        pinem_bins: bins.map(BinsMeta::from),
        snapshots: Vec::new(),
        summary: None,
        error: None,
    };

    let initial_energy = energy_functional(&state, &kernel)?.total();
    let mut sink = ContainerSink {
        writer,
        grid_shape: [g.ny, g.nx],
        bins,
        slices: &scenario.slices,
        step_offset: 0,
        skip_initial: false,
        records: Vec::new(),
        last_spectrum: None,
    };

    let mut ends = scenario.slices.clone();
    if ends.last().map_or(true, |t| (t - scenario.engine.t_end).abs() > 1e-9 * t.abs().max(1.0)) {
        ends.push(scenario.engine.t_end);
    }
    let mut current = state.clone();
    let mut steps = 0;
    let mut max_lambda_dt: f64 = 0.0;
    let clock = std::time::Instant::now();
    for (n, end) in ends.iter().enumerate() {
        let mut seg = scenario.engine.clone();
        seg.t_end = *end;
        sink.step_offset = steps;
        sink.skip_initial = n > 0;
        match run(&current, &provider, &kernel, &seg, &mut sink) {
            Ok((s, summary)) => {
                current = s;
                steps += summary.steps;
                max_lambda_dt = max_lambda_dt.max(summary.max_lambda_dt);
            }
            Err(e) => {
                meta.snapshots = std::mem::take(&mut sink.records);
                meta.error = Some(e.to_string());
                let metadata = json!({ "run": meta, "timing": { "wall_clock_s": clock.elapsed().as_secs_f64() } });
                sink.writer.finalize(false, metadata)?;
                return Err(e.into());
            }
        }
    }

    let final_energy = energy_functional(&current, &kernel)?.total();
    let omega = scenario.pulse.omega();
    let period = 2.0 * std::f64::consts::PI / omega;
    let tc = scenario.pulse.t_center;
    let (lo, hi) = provider.validity();
    // up to two whole periods either side of the pulse peak, inside the run window
    let half = ((tc - lo).min(hi - tc) / period).floor().min(2.0);
    let window = (tc - half * period, tc + half * period);
    let mut g_factors = Vec::new();
    if scenario.pinem && half >= 1.0 {
        for (n, o) in state.orbitals.iter().enumerate() {
            let y_electron = centroid_y(o);
            let gf = g_factor(
                &provider,
                &GFactorRequest {
                    speed: o.carrier_speed(),
                    omega,
                    y_electron,
                    window,
                    samples: 64,
                },
            )?;
            g_factors.push(GFactorMeta {
                electron: n + 1,
                re: gf.value.re,
                im: gf.value.im,
                abs: gf.value.norm(),
                kx: gf.kx,
            });
        }
    }
    let reference = scenario.reference_energy();
    let spectrum = sink.last_spectrum.take();
    let summary = Summary {
        steps,
        final_time_fs: au_to_fs(current.time),
        initial_norms: state.norms(),
        final_norms: current.norms(),
        initial_energy_ev: initial_energy * HARTREE_EV,
        final_energy_ev: final_energy * HARTREE_EV,
        max_lambda_dt,
        g_factors,
        reference_energy_ev: au_to_ev(reference),
        visibility: spectrum
            .as_ref()
            .map(|s| visibility_of(s, reference, omega, scenario.visibility_peaks)),
        spectrum_span_ev: spectrum.as_ref().and_then(spectrum_span),
        spectrum_integral: spectrum.as_ref().map(|s| s.integral()),
    };
    meta.snapshots = std::mem::take(&mut sink.records);
    meta.summary = Some(summary);
    let metadata = json!({ "run": meta, "timing": { "wall_clock_s": clock.elapsed().as_secs_f64() } });
    Ok(sink.writer.finalize(true, metadata)?)
}

fn centroid_y(o: &tdhf_core::Orbital) -> f64 {
    let g = o.grid();
    let mut num = 0.0;
    let mut den = 0.0;
    for j in 0..g.ny {
        for i in 0..g.nx {
            let p = o.envelope.values[g.index(i, j)].norm_sqr();
            num += p * g.y(j);
            den += p;
        }
    }
    num / den
}

/// Rebuilds the PINEM spectrum stored for snapshot `index`.
pub fn load_spectrum(
    container: &tdhf_core::container::Container,
    meta: &RunMetadata,
    index: usize,
) -> Result<PinemSpectrum<f64>, ScenarioError> {
    let bins = meta
        .pinem_bins
        .ok_or_else(|| ScenarioError::Io("run has no PINEM spectra".into()))?
        .bins()?;
    let prefix = snapshot_prefix(index);
    Ok(PinemSpectrum {
        bins,
        energies: bins.energies(),
        angles: bins.angles(),
        sigma: container.read_real(&format!("{prefix}/pinem_sigma"))?,
        total: container.read_real(&format!("{prefix}/pinem_total"))?,
    })
}

/// Rebuilds the state stored for snapshot `index`.
pub fn load_state(
    container: &tdhf_core::container::Container,
    meta: &RunMetadata,
    index: usize,
) -> Result<SystemState<f64>, ScenarioError> {
    let g = meta.grid.to_grid::<f64>()?;
    let rec = meta
        .snapshots
        .get(index)
        .ok_or_else(|| ScenarioError::Io(format!("snapshot {index} not in manifest")))?;
    let mut orbitals = Vec::new();
    for (n, o) in meta.orbitals.iter().enumerate() {
        let values: Vec<Complex<f64>> = container.read_complex(&format!("{}/psi{}", snapshot_prefix(index), n + 1))?;
        let env = tdhf_core::ComplexField::from_values(g, values)?;
        let spin = if o.spin == "down" {
            tdhf_core::Spin::Down
        } else {
            tdhf_core::Spin::Up
        };
        orbitals.push(tdhf_core::Wavepacket::new(env, o.carrier_k, spin, o.label.clone()));
    }
    let mode = if meta.spin_mode == "unpolarized" {
        SpinMode::Unpolarized
    } else {
        SpinMode::Polarized
    };
    Ok(SystemState::new(orbitals, rec.time, mode)?)
}
