#![allow(dead_code)]

use tdhf_scenario::config::*;
use tdhf_scenario::{preset, RunConfig, Size};

/// Field-free, interaction-free pair on a small grid.
pub fn free_pair() -> RunConfig {
    let mut c = preset("fig4_unpolarized", Size::Desk).unwrap();
    c.name = "free_pair".into();
    c.grid = GridConfig {
        nx: 256,
        ny: 128,
        dx_nm: 0.5,
        dy_nm: 0.25,
        x0_nm: -64.0,
        y0_nm: 12.0,
    };
    for (n, e) in c.electrons.iter_mut().enumerate() {
        e.center_x_nm = -30.0 + 10.0 * n as f64;
        e.fwhm_long_nm = 8.0;
        e.fwhm_trans_nm = 2.0;
        e.kinetic_energy_ev = 60.0 - 10.0 * n as f64;
    }
    c.electrons[0].impact_parameter_nm = 8.0;
    c.electrons[1].impact_parameter_nm = 13.0;
    c.laser.peak_field_v_per_m = 0.0;
    c.interaction.hartree = false;
    c.interaction.exchange = false;
    c.interaction.scale = 0.0;
    c.propagation.t_end_fs = 2.0;
    c.propagation.dt_fs = 0.01;
    c.propagation.snapshot_stride = 50;
    c.propagation.cap = None;
    c.observables.pinem = false;
    c.observables.slices_fs = vec![1.0];
    c
}

/// A short driven run: one fast electron grazing the rod on a coarse grid.
pub fn small_driven() -> RunConfig {
    let mut c = preset("fig3_polarized", Size::Desk).unwrap();
    c.name = "small_driven".into();
    c.grid = GridConfig {
        nx: 256,
        ny: 64,
        dx_nm: 1.5,
        dy_nm: 0.5,
        x0_nm: -192.0,
        y0_nm: 12.0,
    };
    let v_nm_per_fs = 22.43;
    for e in c.electrons.iter_mut() {
        e.center_x_nm = -4.5 * v_nm_per_fs;
    }
    c.electrons[1].impact_parameter_nm = 12.0;
    c.laser.t_center_fs = 4.5;
    c.laser.peak_field_v_per_m = 1e9;
    c.propagation.t_end_fs = 9.0;
    c.propagation.snapshot_stride = 60;
    c.propagation.cap = Some(CapConfig {
        width_nm: [20.0, 1.5],
        strength_ev: 0.5,
    });
    c.observables.slices_fs = vec![4.5];
    c
}
