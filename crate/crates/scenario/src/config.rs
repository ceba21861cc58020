//! Run configuration: a versioned JSON document in laboratory units
//! (nm, fs, eV, V/m), resolved into atomic units before a run.

use std::path::Path;

use serde::{Deserialize, Serialize};
use serde_json::Value;
use tdhf_core::em::{AnalyticPlasmon, DrudeMetal, FieldProvider, LaserPulse, NanorodGeometry, Permittivity};
use tdhf_core::engine::{linear_spectral_radius, rk4_stability_limit};
use tdhf_core::units::{ev_to_au, field_si_to_au, fs_to_au, nm_to_au};
use tdhf_core::{
    build_kernel, hartree_potential, make_gaussian_wavepacket, Cap, Density, GaussianPacket, Grid, Orbital,
    PinemBins, PropagatorConfig, Scheme, Spin, SpinMode, Terms,
};

use crate::error::ScenarioError;

pub const SCHEMA_VERSION: u32 = 1;
pub const UNITS: &str = "nm-fs-eV";

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub schema_version: u32,
    #[serde(default)]
    pub name: String,
    pub units: String,
    pub grid: GridConfig,
    pub electrons: Vec<ElectronConfig>,
    pub spin_mode: SpinModeConfig,
    pub laser: LaserConfig,
    pub rod: RodConfig,
    pub interaction: InteractionConfig,
    pub propagation: PropagationConfig,
    pub observables: ObservablesConfig,
    #[serde(default)]
    pub output_dir: Option<String>,
}

/// Grid origin is the lower-left sample; the rod axis sits at the origin of
/// the laboratory frame unless moved.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridConfig {
    pub nx: usize,
    pub ny: usize,
    pub dx_nm: f64,
    pub dy_nm: f64,
    pub x0_nm: f64,
    pub y0_nm: f64,
}

/// An electron moving along +x at height `rod surface + impact_parameter_nm`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ElectronConfig {
    pub center_x_nm: f64,
    pub impact_parameter_nm: f64,
    pub fwhm_long_nm: f64,
    pub fwhm_trans_nm: f64,
    #[serde(rename = "kinetic_energy_eV")]
    pub kinetic_energy_ev: f64,
    pub spin: SpinConfig,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SpinConfig {
    Up,
    Down,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SpinModeConfig {
    Polarized,
    Unpolarized,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LaserConfig {
    pub wavelength_nm: f64,
    pub fwhm_fs: f64,
    #[serde(rename = "peak_field_V_per_m")]
    pub peak_field_v_per_m: f64,
    pub polarization: [f64; 2],
    pub t_center_fs: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RodConfig {
    pub radius_nm: f64,
    pub center_nm: [f64; 2],
    pub permittivity: PermittivityConfig,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase", deny_unknown_fields)]
pub enum PermittivityConfig {
    Drude {
        eps_inf: f64,
        #[serde(rename = "plasma_energy_eV")]
        plasma_energy_ev: f64,
        #[serde(rename = "damping_eV")]
        damping_ev: f64,
    },
    Constant(f64),
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct InteractionConfig {
    /// FWHM of the transverse (out-of-plane) charge profile behind the confined kernel.
    pub confinement_fwhm_nm: f64,
    pub hartree: bool,
    pub exchange: bool,
    pub scale: f64,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SchemeConfig {
    IfRk4,
    Rk4,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CapConfig {
    pub width_nm: [f64; 2],
    #[serde(rename = "strength_eV")]
    pub strength_ev: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PropagationConfig {
    pub t_start_fs: f64,
    pub t_end_fs: f64,
    pub dt_fs: f64,
    pub scheme: SchemeConfig,
    pub snapshot_stride: usize,
    pub cap: Option<CapConfig>,
    /// Gram-Schmidt the initial pair before propagation.
    pub orthogonalize: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ObservablesConfig {
    pub acceptance_deg: f64,
    #[serde(rename = "energy_bin_eV")]
    pub energy_bin_ev: f64,
    pub angle_bins: usize,
    pub pinem: bool,
    /// Times at which pair-density slices are recorded; each becomes a snapshot.
    pub slices_fs: Vec<f64>,
    /// Number of gain peaks above the first electron's energy used for the visibility.
    pub visibility_peaks: usize,
}

impl RunConfig {
    pub fn from_json(text: &str) -> Result<Self, ScenarioError> {
        let cfg: Self = serde_json::from_str(text).map_err(|e| ScenarioError::Config(format!("schema: {e}")))?;
        cfg.check_header()?;
        Ok(cfg)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self, ScenarioError> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path)
            .map_err(|e| ScenarioError::Io(format!("cannot read {}: {e}", path.display())))?;
        Self::from_json(&text)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("config serializes")
    }

    /// Applies `a.b.c=value` overrides; `value` is parsed as JSON and falls
    /// back to a plain string.
    pub fn with_overrides<S: AsRef<str>>(&self, overrides: &[S]) -> Result<Self, ScenarioError> {
        if overrides.is_empty() {
            return Ok(self.clone());
        }
        let mut doc = serde_json::to_value(self).expect("config serializes");
        for o in overrides {
            let o = o.as_ref();
            let (key, raw) = o
                .split_once('=')
                .ok_or_else(|| ScenarioError::Config(format!("override `{o}` is not key=value")))?;
            let value = serde_json::from_str(raw).unwrap_or_else(|_| Value::String(raw.to_string()));
            set_path(&mut doc, key, value)?;
        }
        let cfg: Self =
            serde_json::from_value(doc).map_err(|e| ScenarioError::Config(format!("after overrides: {e}")))?;
        cfg.check_header()?;
        Ok(cfg)
    }

    fn check_header(&self) -> Result<(), ScenarioError> {
        if self.schema_version != SCHEMA_VERSION {
            return Err(ScenarioError::Config(format!(
                "schema_version {} is not supported (expected {SCHEMA_VERSION})",
                self.schema_version
            )));
        }
        if self.units != UNITS {
            return Err(ScenarioError::Config(format!("units `{}`: only `{UNITS}` is supported", self.units)));
        }
        Ok(())
    }

    /// Converts to atomic units and runs every cross-field check.
    pub fn resolve(&self) -> Result<Scenario, ScenarioError> {
        self.check_header()?;
        let cfg_err = |what: &str, e: tdhf_core::Error| ScenarioError::Config(format!("{what}: {e}"));
        let g = &self.grid;
        let grid = Grid::new(
            g.nx,
            g.ny,
            nm_to_au(g.dx_nm),
            nm_to_au(g.dy_nm),
            nm_to_au(g.x0_nm),
            nm_to_au(g.y0_nm),
        )
        .map_err(|e| cfg_err("grid", e))?;

        let r = &self.rod;
        let rod = NanorodGeometry::new(nm_to_au(r.radius_nm), [nm_to_au(r.center_nm[0]), nm_to_au(r.center_nm[1])])
            .map_err(|e| cfg_err("rod", e))?;
        let permittivity = match r.permittivity {
            PermittivityConfig::Drude {
                eps_inf,
                plasma_energy_ev,
                damping_ev,
            } => Permittivity::Drude(
                DrudeMetal::new(eps_inf, ev_to_au(plasma_energy_ev), ev_to_au(damping_ev))
                    .map_err(|e| cfg_err("rod.permittivity", e))?,
            ),
            PermittivityConfig::Constant(eps) => {
                if !(eps.is_finite() && eps > 0.0) {
                    return Err(ScenarioError::Config("rod.permittivity.constant: must be positive".into()));
                }
                Permittivity::Constant(eps)
            }
        };

        let l = &self.laser;
        let pulse = LaserPulse::new(
            nm_to_au(l.wavelength_nm),
            fs_to_au(l.fwhm_fs),
            field_si_to_au(l.peak_field_v_per_m),
            l.polarization,
            fs_to_au(l.t_center_fs),
        )
        .map_err(|e| cfg_err("laser", e))?;

        if self.electrons.is_empty() || self.electrons.len() > 2 {
            return Err(ScenarioError::Config(format!(
                "electrons: need one or two, found {}",
                self.electrons.len()
            )));
        }
        let spin_mode = match self.spin_mode {
            SpinModeConfig::Polarized => SpinMode::Polarized,
            SpinModeConfig::Unpolarized => SpinMode::Unpolarized,
        };
        let mut orbitals = Vec::new();
        for (n, e) in self.electrons.iter().enumerate() {
            if !(e.impact_parameter_nm >= 0.0) {
                return Err(ScenarioError::Config(format!("electrons[{n}].impact_parameter_nm: must be >= 0")));
            }
            let packet = GaussianPacket {
                center: [
                    nm_to_au(e.center_x_nm),
                    nm_to_au(r.center_nm[1] + r.radius_nm + e.impact_parameter_nm),
                ],
                fwhm_long: nm_to_au(e.fwhm_long_nm),
                fwhm_trans: nm_to_au(e.fwhm_trans_nm),
                kinetic_energy: ev_to_au(e.kinetic_energy_ev),
                direction: [1.0, 0.0],
                spin: match e.spin {
                    SpinConfig::Up => Spin::Up,
                    SpinConfig::Down => Spin::Down,
                },
                label: format!("electron{}", n + 1),
            };
            let o = make_gaussian_wavepacket(grid, &packet).map_err(|err| cfg_err(&format!("electrons[{n}]"), err))?;
            orbitals.push(o);
        }

        let kernel_width: f64 = nm_to_au(self.interaction.confinement_fwhm_nm);
        if !(kernel_width > 0.0) {
            return Err(ScenarioError::Config("interaction.confinement_fwhm_nm: must be positive".into()));
        }

        let p = &self.propagation;
        let t_start: f64 = fs_to_au(p.t_start_fs);
        let t_end: f64 = fs_to_au(p.t_end_fs);
        if !(t_end > t_start) {
            return Err(ScenarioError::Config("propagation: t_end_fs must exceed t_start_fs".into()));
        }
        let mut engine = PropagatorConfig::new(fs_to_au(p.dt_fs), t_end);
        engine.snapshot_stride = p.snapshot_stride;
        engine.scheme = match p.scheme {
            SchemeConfig::IfRk4 => Scheme::IntegratingFactorRk4,
            SchemeConfig::Rk4 => Scheme::Rk4,
        };
        engine.terms = Terms {
            kinetic: true,
            hartree: self.interaction.hartree,
            exchange: self.interaction.exchange,
            interaction_scale: self.interaction.scale,
            passive: Vec::new(),
        };
        if let Some(c) = &p.cap {
            engine.cap = Cap {
                width: [nm_to_au(c.width_nm[0]), nm_to_au(c.width_nm[1])],
                strength: ev_to_au(c.strength_ev),
            };
        }
        engine.validate().map_err(|e| cfg_err("propagation", e))?;

        let o = &self.observables;
        if !(o.acceptance_deg > 0.0 && o.acceptance_deg <= 180.0) {
            return Err(ScenarioError::Config("observables.acceptance_deg: must lie in (0, 180]".into()));
        }
        if !(o.energy_bin_ev > 0.0) {
            return Err(ScenarioError::Config("observables.energy_bin_eV: must be positive".into()));
        }
        if o.angle_bins == 0 {
            return Err(ScenarioError::Config("observables.angle_bins: must be >= 1".into()));
        }
        let mut slices = Vec::new();
        for &s in &o.slices_fs {
            let t: f64 = fs_to_au(s);
            if !(t > t_start && t <= t_end) {
                return Err(ScenarioError::Config(format!(
                    "observables.slices_fs: {s} fs lies outside ({}, {}] fs",
                    p.t_start_fs, p.t_end_fs
                )));
            }
            slices.push(t);
        }
        slices.sort_by(f64::total_cmp);
        slices.dedup();

        let scenario = Scenario {
            grid,
            orbitals,
            spin_mode,
            pulse,
            permittivity,
            rod,
            kernel_width,
            t_start,
            engine,
            orthogonalize: p.orthogonalize,
            slices,
            acceptance: o.acceptance_deg.to_radians(),
            energy_bin: ev_to_au(o.energy_bin_ev),
            angle_bins: o.angle_bins,
            pinem: o.pinem,
            visibility_peaks: o.visibility_peaks,
        };
        scenario.check_stability()?;
        if scenario.pinem {
            scenario.check_phase_matching()?;
            scenario.pinem_bins().map_err(|e| cfg_err("observables", e))?;
        }
        Ok(scenario)
    }
}

fn set_path(doc: &mut Value, key: &str, value: Value) -> Result<(), ScenarioError> {
    let mut cur = doc;
    let parts: Vec<&str> = key.split('.').collect();
    for (n, part) in parts.iter().enumerate() {
        let last = n + 1 == parts.len();
        cur = match cur {
            Value::Object(map) => {
                if !map.contains_key(*part) {
                    if last {
                        map.insert(part.to_string(), Value::Null);
                    } else {
                        return Err(ScenarioError::Config(format!("override `{key}`: no field `{part}`")));
                    }
                }
                map.get_mut(*part).expect("present")
            }
            Value::Array(items) => {
                let i: usize = part
                    .parse()
                    .map_err(|_| ScenarioError::Config(format!("override `{key}`: `{part}` is not an index")))?;
                let len = items.len();
                items
                    .get_mut(i)
                    .ok_or_else(|| ScenarioError::Config(format!("override `{key}`: index {i} out of {len}")))?
            }
            _ => return Err(ScenarioError::Config(format!("override `{key}`: `{part}` is not a container"))),
        };
    }
    *cur = value;
    Ok(())
}

/// A fully resolved run in atomic units.
#[derive(Clone, Debug)]
pub struct Scenario {
    pub grid: Grid,
    pub orbitals: Vec<Orbital>,
    pub spin_mode: SpinMode,
    pub pulse: LaserPulse<f64>,
    pub permittivity: Permittivity,
    pub rod: NanorodGeometry<f64>,
    pub kernel_width: f64,
    pub t_start: f64,
    pub engine: PropagatorConfig<f64>,
    pub orthogonalize: bool,
    pub slices: Vec<f64>,
    pub acceptance: f64,
    pub energy_bin: f64,
    pub angle_bins: usize,
    pub pinem: bool,
    pub visibility_peaks: usize,
}

impl Scenario {
    /// Upper bound on `|V_H| + |V_x|` from one normalized partner orbital.
    pub fn interaction_bound(&self) -> f64 {
        if self.orbitals.len() < 2 || !(self.engine.terms.hartree || self.engine.terms.exchange) {
            return 0.0;
        }
        let kernel = match build_kernel(self.grid, self.kernel_width) {
            Ok(k) => k,
            Err(_) => return f64::INFINITY,
        };
        let mut delta = Density::zeros(self.grid);
        delta.values[0] = 1.0 / self.grid.cell_area();
        let peak = hartree_potential(&kernel, &delta).map(|v| v.max_abs()).unwrap_or(f64::INFINITY);
        let terms = self.engine.terms.hartree as u8 + self.engine.terms.exchange as u8;
        self.engine.terms.interaction_scale.abs() * peak * terms as f64
    }

    /// Laser plus rod near field on the run grid, valid over the run window.
    pub fn provider(&self) -> tdhf_core::Result<AnalyticPlasmon<f64>> {
        AnalyticPlasmon::new(self.pulse.clone(), self.permittivity, self.rod, self.grid).with_window(self.t_start, self.engine.t_end)
    }

    /// Largest stable step for the terms integrated explicitly.
    pub fn stability_bound(&self) -> f64 {
        let phi = self.provider().map(|p| p.potential_bound()).unwrap_or(f64::INFINITY);
        let mut lambda = phi + self.interaction_bound();
        if self.engine.scheme == Scheme::Rk4 {
            let a_max = self.pulse.peak_field.abs() / self.pulse.omega();
            lambda += self
                .orbitals
                .iter()
                .map(|o| linear_spectral_radius(&self.grid, o.carrier_k, [a_max, 0.0], true))
                .fold(0.0, f64::max);
        }
        if lambda > 0.0 {
            rk4_stability_limit(lambda)
        } else {
            f64::INFINITY
        }
    }

    fn check_stability(&self) -> Result<(), ScenarioError> {
        let bound = self.stability_bound();
        if self.engine.dt > bound {
            return Err(ScenarioError::Config(format!(
                "propagation.dt_fs: {:.4e} fs exceeds the stability bound {:.4e} fs",
                tdhf_core::units::au_to_fs(self.engine.dt),
                tdhf_core::units::au_to_fs(bound)
            )));
        }
        Ok(())
    }

    fn check_phase_matching(&self) -> Result<(), ScenarioError> {
        for (n, o) in self.orbitals.iter().enumerate() {
            let v = o.carrier_speed();
            let kx = self.pulse.omega() / v;
            if self.grid.kx_bin(kx).is_none() {
                return Err(ScenarioError::Config(format!(
                    "electrons[{n}]: phase-matched k_x = {kx:.4e} au lies outside the momentum grid +/-{:.4e}",
                    self.grid.kx_max()
                )));
            }
        }
        Ok(())
    }

    pub fn pinem_bins(&self) -> tdhf_core::Result<PinemBins<f64>> {
        let amps: Vec<_> = self.orbitals.iter().map(tdhf_core::to_momentum_space).collect();
        let refs: Vec<_> = amps.iter().collect();
        PinemBins::covering(&refs, self.energy_bin, self.acceptance, self.angle_bins)
    }

    /// Carrier kinetic energy of the first electron.
    pub fn reference_energy(&self) -> f64 {
        tdhf_core::free_dispersion(self.orbitals[0].carrier_k)
    }
}
