//! Built-in scenarios: a polarized pair, the same pair with opposite spins,
//! and a polarized pair with the second electron moved closer to the rod.
//!
//! Each ships in a `paper` size (momentum grid wide enough for +/-60 photon
//! orders at the full field) and a `desk` size (512 x 256, field / 10).

use serde::{Deserialize, Serialize};
use tdhf_core::units::{au_to_nm, electron_speed, ev_to_au, fs_to_au};

use crate::config::*;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum Size {
    Desk,
    Paper,
}

pub const PRESETS: [&str; 3] = ["fig3_polarized", "fig4_unpolarized", "fig5_close"];

const E1_EV: f64 = 1436.0;
const E2_EV: f64 = 1424.0;
/// Time at which the first packet center passes the rod axis.
const T_PASS_FS: f64 = 9.5;

fn start_x_nm(energy_ev: f64) -> f64 {
    let v: f64 = electron_speed(ev_to_au(energy_ev));
    -au_to_nm(v * fs_to_au::<f64>(T_PASS_FS))
}

fn electron(d_nm: f64, energy_ev: f64, spin: SpinConfig) -> ElectronConfig {
    ElectronConfig {
        center_x_nm: start_x_nm(E1_EV),
        impact_parameter_nm: d_nm,
        fwhm_long_nm: 33.2,
        fwhm_trans_nm: 3.3,
        kinetic_energy_ev: energy_ev,
        spin,
    }
}

fn base(size: Size) -> RunConfig {
    let (grid, field, dt_fs, stride) = match size {
        Size::Desk => (
            GridConfig {
                nx: 512,
                ny: 256,
                dx_nm: 1.5,
                dy_nm: 0.25,
                x0_nm: -384.0,
                y0_nm: -2.0,
            },
            5e8,
            0.05,
            40,
        ),
        Size::Paper => (
            GridConfig {
                nx: 2048,
                ny: 512,
                dx_nm: 0.375,
                dy_nm: 0.125,
                x0_nm: -384.0,
                y0_nm: -2.0,
            },
            5e9,
            0.01,
            100,
        ),
    };
    RunConfig {
        schema_version: SCHEMA_VERSION,
        name: String::new(),
        units: UNITS.into(),
        grid,
        electrons: vec![
            electron(5.0, E1_EV, SpinConfig::Up),
            electron(20.0, E2_EV, SpinConfig::Up),
        ],
        spin_mode: SpinModeConfig::Polarized,
        laser: LaserConfig {
            wavelength_nm: 800.0,
            fwhm_fs: 30.0,
            peak_field_v_per_m: field,
            polarization: [-1.0, 0.0],
            t_center_fs: T_PASS_FS,
        },
        rod: RodConfig {
            radius_nm: 15.0,
            center_nm: [0.0, 0.0],
            permittivity: PermittivityConfig::Drude {
                eps_inf: 9.0,
                plasma_energy_ev: 9.0,
                damping_ev: 0.07,
            },
        },
        interaction: InteractionConfig {
            confinement_fwhm_nm: 3.3,
            hartree: true,
            exchange: true,
            scale: 1.0,
        },
        propagation: PropagationConfig {
            t_start_fs: 0.0,
            t_end_fs: 20.0,
            dt_fs,
            scheme: SchemeConfig::IfRk4,
            snapshot_stride: stride,
            cap: Some(CapConfig {
                width_nm: [30.0, 3.0],
                strength_ev: 0.5,
            }),
            orthogonalize: false,
        },
        observables: ObservablesConfig {
            acceptance_deg: 10.0,
            energy_bin_ev: 0.125,
            angle_bins: 32,
            pinem: true,
            slices_fs: vec![9.25, 18.0, 20.0],
            visibility_peaks: 5,
        },
        output_dir: None,
    }
}

pub fn preset(name: &str, size: Size) -> Option<RunConfig> {
    let mut c = base(size);
    match name {
        "fig3_polarized" => {}
        "fig4_unpolarized" => {
            c.spin_mode = SpinModeConfig::Unpolarized;
            c.electrons[1].spin = SpinConfig::Down;
        }
        "fig5_close" => {
            c.electrons[1].impact_parameter_nm = 10.0;
        }
        _ => return None,
    }
    let tag = match size {
        Size::Desk => "desk",
        Size::Paper => "paper",
    };
    c.name = format!("{name}_{tag}");
    Some(c)
}
