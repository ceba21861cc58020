//! One PASS/FAIL line per acceptance criterion.
//!
//! Run with `cargo test -p tdhf-scenario --test acceptance`.
//! Criteria listed in `KNOWN_GAPS` are reported but do not fail the target;
//! every other criterion must pass.

use std::f64::consts::PI;
use std::fs;
use std::path::Path;

use quadrature::double_exponential::integrate;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use tdhf_core::container::{Container, Manifest};
use tdhf_core::em::{AnalyticPlasmon, DrudeMetal, LaserPulse, NanorodGeometry, NoField, Permittivity};
use tdhf_core::engine::energy_functional;
use tdhf_core::units::{au_to_ev, ev_to_au, fs_to_au, nm_to_au};
use tdhf_core::*;
use tdhf_scenario::*;

/// Desk-scale shortfalls analysed in the project notes.
const KNOWN_GAPS: &[&str] = &["dephasing"];

struct Outcome {
    name: &'static str,
    pass: bool,
    detail: String,
}

fn outcome(name: &'static str, pass: bool, detail: String) -> Outcome {
    let tag = if pass { "PASS" } else { "FAIL" };
    println!("{tag} {name}: {detail}");
    Outcome { name, pass, detail }
}

fn packet(g: Grid, center: [f64; 2], fwhm: [f64; 2], energy: f64, dir: [f64; 2], spin: Spin) -> Orbital {
    make_gaussian_wavepacket(
        g,
        &GaussianPacket {
            center,
            fwhm_long: fwhm[0],
            fwhm_trans: fwhm[1],
            kinetic_energy: energy,
            direction: dir,
            spin,
            label: String::new(),
        },
    )
    .unwrap()
}

fn rod(g: Grid, e0: f64, fwhm_fs: f64, center_fs: f64, radius: f64, center: [f64; 2]) -> AnalyticPlasmon<f64> {
    let pulse = LaserPulse::new(nm_to_au(800.0), fs_to_au(fwhm_fs), e0, [1.0, 0.0], fs_to_au(center_fs)).unwrap();
    let gold = Permittivity::Drude(DrudeMetal::new(9.0, ev_to_au(9.0), ev_to_au(0.07)).unwrap());
    AnalyticPlasmon::new(pulse, gold, NanorodGeometry::new(radius, center).unwrap(), g)
}

// ---- Coulomb

fn confined_interaction(r: f64, width: f64) -> f64 {
    let sigma = width / (2.0 * (2.0 * 2f64.ln()).sqrt());
    let s = 2f64.sqrt() * sigma;
    let norm = 2.0 / ((2.0 * PI).sqrt() * s);
    let f = |z: f64| norm * (-z * z / (2.0 * s * s)).exp() / (r * r + z * z).sqrt();
    let knee = r.min(s);
    integrate(f, 0.0, knee, 1e-13).integral + integrate(f, knee, 12.0 * s, 1e-13).integral
}

fn gaussian_potential(r0: [f64; 2], sigma: f64, width: f64) -> f64 {
    let rho = |x: f64, y: f64| (-(x * x + y * y) / (2.0 * sigma * sigma)).exp() / (2.0 * PI * sigma * sigma);
    let ring = |r: f64| integrate(|t: f64| rho(r0[0] + r * t.cos(), r0[1] + r * t.sin()), 0.0, 2.0 * PI, 1e-14).integral;
    let reach = r0[0].hypot(r0[1]) + 9.0 * sigma;
    let radial = |r: f64| if r == 0.0 { 0.0 } else { r * confined_interaction(r, width) * ring(r) };
    let knee = 2.0 * width;
    integrate(radial, 0.0, knee, 1e-12).integral + integrate(radial, knee, reach, 1e-12).integral
}

fn coulomb() -> Outcome {
    let sigma: f64 = nm_to_au(5.0);
    let width: f64 = nm_to_au(3.3);
    let dx: f64 = nm_to_au(0.75);
    let g = Grid::new(512, 512, dx, dx, -256.0 * dx, -256.0 * dx).unwrap();
    let kernel = build_kernel(g, width).unwrap();
    let rho = Density::from_fn(g, |x, y| (-(x * x + y * y) / (2.0 * sigma * sigma)).exp() / (2.0 * PI * sigma * sigma));
    let phi = hartree_potential(&kernel, &rho).unwrap();
    let samples = [(0, 0), (4, 0), (0, 7), (-9, 3), (13, 0), (10, -10), (-6, -6), (0, 20), (17, 5), (-3, 14)];
    let worst = samples
        .iter()
        .map(|&(i, j)| {
            let (i, j) = ((256 + i) as usize, (256 + j) as usize);
            let want = gaussian_potential([g.x(i), g.y(j)], sigma, width);
            ((phi.values[g.index(i, j)] - want) / want).abs()
        })
        .fold(0.0f64, f64::max);
    outcome("coulomb_oracle", worst < 1e-3, format!("max relative error {worst:.2e} at 10 points (tol 1e-3)"))
}

// ---- free dispersion

fn free_dispersion_width() -> Outcome {
    let g = Grid::new(512, 512, 1.0, 1.0, -160.0, -256.0).unwrap();
    let sigma0 = 10.0;
    let fwhm = sigma0 * 2.0 * (2.0 * 2f64.ln()).sqrt();
    let w = packet(g, [-100.0, 0.0], [fwhm, fwhm], 0.125, [1.0, 0.0], Spin::Up);
    let k = build_kernel(g, 5.0).unwrap();
    let s = SystemState::new(vec![w], 0.0, SpinMode::Polarized).unwrap();
    let t = fs_to_au(10.0);
    let fin = propagate(&s, &NoField { grid: g }, &k, &PropagatorConfig::new(4.0, t)).unwrap();
    let f = &fin.orbitals[0].envelope;
    let (mut n, mut mx, mut my) = (0.0, 0.0, 0.0);
    for j in 0..g.ny {
        for i in 0..g.nx {
            let p = f.values[g.index(i, j)].norm_sqr();
            n += p;
            mx += p * g.x(i);
            my += p * g.y(j);
        }
    }
    let (mx, my) = (mx / n, my / n);
    let (mut vx, mut vy) = (0.0, 0.0);
    for j in 0..g.ny {
        for i in 0..g.nx {
            let p = f.values[g.index(i, j)].norm_sqr();
            vx += p * (g.x(i) - mx).powi(2);
            vy += p * (g.y(j) - my).powi(2);
        }
    }
    let expect = sigma0 * (1.0 + (t / (2.0 * sigma0 * sigma0)).powi(2)).sqrt();
    let worst = [(vx / n).sqrt(), (vy / n).sqrt()].iter().map(|w| (w / expect - 1.0).abs()).fold(0.0, f64::max);
    outcome("free_dispersion", worst < 1e-6, format!("width error {worst:.2e} after 10 fs (tol 1e-6)"))
}

// ---- Volkov

fn volkov() -> Outcome {
    let g = Grid::new(128, 128, 2.0, 2.0, -128.0, -128.0).unwrap();
    let w = packet(g, [0.0, 0.0], [40.0, 24.0], 0.3, [0.8, 0.6], Spin::Up);
    let mut prov = rod(g, 0.02, 10.0, 0.0, nm_to_au(15.0), [0.0, 0.0]);
    prov.include_near_field = false;
    let tau = prov.pulse.tau();
    let (t0, t1) = (-3.0 * tau, 0.2 * tau);
    let k = build_kernel(g, 5.0).unwrap();
    let s = SystemState::new(vec![w.clone()], t0, SpinMode::Polarized).unwrap();
    let fin = propagate(&s, &prov, &k, &PropagatorConfig::new(3.0, t1)).unwrap();
    let a = to_momentum_space(&w);
    let b = to_momentum_space(&fin.orbitals[0]);
    let peak = a.values.iter().fold(0.0f64, |m, v| m.max(v.norm()));
    let mut worst: f64 = 0.0;
    for j in 0..g.ny {
        for i in 0..g.nx {
            let p = a.momentum(i, j);
            let phase = (free_dispersion(p) - free_dispersion(w.carrier_k)) * (t1 - t0)
                + em::volkov_phase(&prov.pulse, p, t0, t1);
            let expect = a.values[g.index(i, j)] * Complex::from_polar(1.0, -phase);
            worst = worst.max((b.values[g.index(i, j)] - expect).norm() / peak);
        }
    }
    outcome("volkov_oracle", worst < 1e-8, format!("max amplitude error {worst:.2e} of peak (tol 1e-8)"))
}

// ---- norm and energy

fn overlapping_pair(g: Grid, spins: [Spin; 2]) -> [Orbital; 2] {
    [
        packet(g, [-20.0, -4.0], [30.0, 12.0], 0.6, [1.0, 0.0], spins[0]),
        packet(g, [-10.0, 6.0], [30.0, 12.0], 0.5, [1.0, 0.1], spins[1]),
    ]
}

fn norm_energy() -> Outcome {
    let g = Grid::new(256, 128, 1.5, 1.0, -192.0, -64.0).unwrap();
    let k = build_kernel(g, 6.0).unwrap();
    let [a, b] = overlapping_pair(g, [Spin::Up, Spin::Up]);
    let s = SystemState::new(vec![a, b], 0.0, SpinMode::Polarized).unwrap();
    let e0 = energy_functional(&s, &k).unwrap().total();
    let mut cfg = PropagatorConfig::new(0.5, fs_to_au(2.0));
    cfg.snapshot_stride = 40;
    let mut sink = MemorySink::default();
    let (_, summary) = run(&s, &NoField { grid: g }, &k, &cfg, &mut sink).unwrap();
    let fs: f64 = fs_to_au(1.0);
    let drift = summary
        .norms
        .iter()
        .filter(|(t, _)| *t > 0.0)
        .flat_map(|(t, ns)| ns.iter().map(move |n| (n - 1.0).abs() / (t / fs)))
        .fold(0.0f64, f64::max);
    let energy = sink
        .snapshots
        .iter()
        .map(|(_, st)| (energy_functional(st, &k).unwrap().total() / e0 - 1.0).abs())
        .fold(0.0f64, f64::max);
    outcome(
        "norm_and_energy",
        drift < 1e-8 && energy < 1e-6,
        format!("norm drift {drift:.2e}/fs (tol 1e-8), energy drift {energy:.2e} (tol 1e-6)"),
    )
}

// ---- spin selection

fn spin_selection() -> Outcome {
    let g = Grid::new(128, 64, 2.0, 1.5, -128.0, -48.0).unwrap();
    let k = build_kernel(g, 6.0).unwrap();
    let prov = rod(g, 0.003, 10.0, 60.0, nm_to_au(15.0), [0.0, 0.0]);
    let [a, b] = overlapping_pair(g, [Spin::Up, Spin::Down]);
    let unpol = SystemState::new(vec![a.clone(), b.clone()], 0.0, SpinMode::Unpolarized).unwrap();
    let mut up = b;
    up.spin = Spin::Up;
    let pol = SystemState::new(vec![a, up], 0.0, SpinMode::Polarized).unwrap();
    let cfg = PropagatorConfig::new(1.0, 60.0);
    let mut no_x = cfg.clone();
    no_x.terms.exchange = false;
    let u = propagate(&unpol, &prov, &k, &cfg).unwrap();
    let p = propagate(&pol, &prov, &k, &no_x).unwrap();
    let full = propagate(&pol, &prov, &k, &cfg).unwrap();
    let identical = (0..2).all(|n| u.orbitals[n].envelope.values == p.orbitals[n].envelope.values);
    let ps = pair_density_slice(&full, Space::Real).unwrap();
    let us = pair_density_slice(&u, Space::Real).unwrap();
    let peak = ps.exchange_phase.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    let zero = us.exchange_phase.iter().all(|v| *v == 0.0);
    outcome(
        "spin_selection",
        identical && peak > 0.0 && zero,
        format!("unpolarized == exchange-free bitwise: {identical}; polarized exchange peak {peak:.2e}; unpolarized exchange all zero: {zero}"),
    )
}

// ---- Pauli exclusion

fn pauli() -> Outcome {
    let g = Grid::new(128, 64, 0.5, 0.5, -32.0, -16.0).unwrap();
    let a = packet(g, [-3.0, -1.0], [8.0, 5.0], 0.5, [1.0, 0.0], Spin::Up);
    let b = packet(g, [-1.0, 0.0], [7.0, 6.0], 0.53, [1.0, 0.0], Spin::Up);
    let [a, b] = gram_schmidt([a, b]).unwrap();
    let s = SystemState::new(vec![a, b], 0.0, SpinMode::Polarized).unwrap();
    let mut max = 0.0f64;
    let mut diag = 0.0f64;
    for i in (24..104).step_by(8) {
        for j in (16..48).step_by(4) {
            diag = diag.max(observables::pair_density_at(&s, (i, j), (i, j)).unwrap().abs());
            for (k, l) in [(48, 33), (62, 30), (66, 36), (i + 4, j)] {
                max = max.max(observables::pair_density_at(&s, (i, j), (k, l)).unwrap());
            }
        }
    }
    let total = pair_density_slice(&s, Space::Real).unwrap().integral();
    outcome(
        "pauli_exclusion",
        diag <= 1e-12 * max && (total - 2.0).abs() < 1e-8,
        format!("diagonal {:.2e} of max (tol 1e-12), pair integral {total:.10} (tol 1e-8)", diag / max),
    )
}

// ---- weak-coupling rates

fn smooth_orbital(rng: &mut ChaCha8Rng, g: Grid, carrier: [f64; 2]) -> Orbital {
    let blobs: Vec<([f64; 2], f64, [f64; 2], Complex<f64>)> = (0..3)
        .map(|_| {
            (
                [rng.gen_range(-8.0..8.0), rng.gen_range(-8.0..8.0)],
                rng.gen_range(3.0..5.0),
                [rng.gen_range(-0.2..0.2), rng.gen_range(-0.2..0.2)],
                Complex::from_polar(rng.gen_range(0.3..1.0), rng.gen_range(0.0..6.28)),
            )
        })
        .collect();
    let mut f = Field::from_fn(g, |x, y| {
        blobs
            .iter()
            .map(|(c, s, k, a)| {
                let r2 = (x - c[0]).powi(2) + (y - c[1]).powi(2);
                a * Complex::from_polar((-r2 / (2.0 * s * s)).exp(), k[0] * x + k[1] * y)
            })
            .sum()
    });
    let n = f.norm();
    f.scale(Complex::new(1.0 / n, 0.0));
    Orbital::new(f, carrier, Spin::Up, "")
}

fn rms_rel(got: &[Complex<f64>], want: &[Complex<f64>]) -> f64 {
    let num: f64 = got.iter().zip(want).map(|(a, b)| (a - b).norm_sqr()).sum();
    let den: f64 = want.iter().map(|b| b.norm_sqr()).sum();
    (num / den).sqrt()
}

fn real(v: &[f64]) -> Vec<Complex<f64>> {
    v.iter().map(|x| Complex::new(*x, 0.0)).collect()
}

fn weak_coupling() -> Outcome {
    let g = Grid::new(64, 64, 1.0, 1.0, -32.0, -32.0).unwrap();
    let kernel = build_kernel(g, 2.0).unwrap();
    let h = 0.02;
    let fd = |f: [Vec<Complex<f64>>; 3]| -> Vec<Complex<f64>> {
        (0..f[0].len()).map(|i| (-3.0 * f[0][i] + 4.0 * f[1][i] - f[2][i]) / (2.0 * h)).collect()
    };
    let mut worst = [0.0f64; 3];
    for seed in 0..4 {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let a = smooth_orbital(&mut rng, g, [0.3, 0.0]);
        let b = smooth_orbital(&mut rng, g, [0.25, 0.05]);
        let state = SystemState::new(vec![a.clone(), b.clone()], 0.0, SpinMode::Polarized).unwrap();
        let mut config = PropagatorConfig::new(h, 2.0 * h);
        config.terms.kinetic = false;
        let mut sink = MemorySink::default();
        run(&state, &NoField { grid: g }, &kernel, &config, &mut sink).unwrap();
        let traj: Vec<SystemState<f64>> = sink.snapshots.into_iter().map(|(_, s)| s).collect();
        let dens = |s: &SystemState<f64>| real(&s.orbitals[1].envelope.density().values);
        let corr = |s: &SystemState<f64>| mutual_correlation(&s.orbitals[0], &s.orbitals[1], Convention::Full).unwrap().values;
        let diff = |s: &SystemState<f64>| real(&density_difference(&s.orbitals[0], &s.orbitals[1]).unwrap().values);
        let errs = [
            rms_rel(&fd([dens(&traj[0]), dens(&traj[1]), dens(&traj[2])]), &real(&density_rate(&a, &b, &kernel).unwrap().values)),
            rms_rel(&fd([corr(&traj[0]), corr(&traj[1]), corr(&traj[2])]), &correlation_rate(&a, &b, &kernel).unwrap().values),
            rms_rel(&fd([diff(&traj[0]), diff(&traj[1]), diff(&traj[2])]), &real(&delta_rate(&a, &b, &kernel).unwrap().values)),
        ];
        for (w, e) in worst.iter_mut().zip(errs) {
            *w = w.max(e);
        }
    }
    outcome(
        "weak_coupling_rates",
        worst.iter().all(|e| *e < 0.01),
        format!("RMS density {:.2e}, correlation {:.2e}, difference {:.2e} (tol 1e-2)", worst[0], worst[1], worst[2]),
    )
}

// ---- convergence order

fn richardson() -> Outcome {
    let g = Grid::new(128, 64, 2.0, 1.5, -128.0, -48.0).unwrap();
    let k = build_kernel(g, 6.0).unwrap();
    let prov = rod(g, 0.02, 10.0, 2.0, 12.0, [0.0, -20.0]);
    let a = packet(g, [-40.0, 0.0], [24.0, 10.0], 0.08, [1.0, 0.0], Spin::Up);
    let s = SystemState::new(vec![a], 0.0, SpinMode::Polarized).unwrap();
    let mut cfg = PropagatorConfig::new(0.4, 80.0);
    cfg.scheme = Scheme::Rk4;
    let r = richardson_ratio(&s, &prov, &k, &cfg).unwrap();
    outcome("convergence_order", (12.0..=20.0).contains(&r), format!("RK4 Richardson ratio {r:.3} (band 12..20)"))
}

// ---- desk scenarios

struct Desk {
    config: RunConfig,
    manifest: Manifest,
    meta: RunMetadata,
    container: Container,
}

fn desk_run(config: RunConfig, out: &Path) -> Desk {
    let manifest = run_scenario(&config, out).unwrap_or_else(|e| panic!("{}: {e}", config.name));
    assert!(manifest.complete, "{} did not complete", config.name);
    let meta = RunMetadata::from_manifest(&manifest).unwrap();
    let container = Container::open(out).unwrap();
    Desk { config, manifest, meta, container }
}

impl Desk {
    fn final_spectrum(&self) -> PinemSpectrum<f64> {
        load_spectrum(&self.container, &self.meta, self.meta.snapshots.len() - 1).unwrap()
    }

    fn visibility(&self) -> Option<f64> {
        self.meta.summary.as_ref()?.visibility.as_ref()?.value
    }
}

fn pinem_comb(run: &Desk) -> Outcome {
    let s = run.config.resolve().unwrap();
    let photon = au_to_ev(s.pulse.omega());
    let bin = run.config.observables.energy_bin_ev;
    let spacing = run.meta.summary.as_ref().and_then(|m| m.visibility.as_ref()).and_then(|v| v.comb_spacing_ev);
    let spec = run.final_spectrum();
    let state = load_state(&run.container, &run.meta, run.meta.snapshots.len() - 1).unwrap();
    let kernel = build_kernel(s.grid, s.kernel_width).unwrap();
    let kinetic = energy_functional(&state, &kernel).unwrap().kinetic;
    let rel = (spec.integral() - kinetic).abs() / kinetic;
    let spaced = spacing.is_some_and(|d| (d - photon).abs() <= bin);
    outcome(
        "pinem_comb",
        spaced && rel < 1e-6,
        format!(
            "peak spacing {} eV vs photon {photon:.4} eV (tol one bin {bin} eV); integral vs kinetic energy {rel:.2e} (tol 1e-6)",
            spacing.map_or("none".into(), |d| format!("{d:.4}"))
        ),
    )
}

fn determinism(a: &Desk, a_dir: &Path, b_dir: &Path) -> Outcome {
    let b = desk_run(a.config.clone(), b_dir);
    let same_meta = a.manifest.metadata["run"] == b.manifest.metadata["run"] && a.manifest.datasets == b.manifest.datasets;
    let differing = a
        .manifest
        .datasets
        .iter()
        .filter(|d| fs::read(a_dir.join(&d.file)).unwrap() != fs::read(b_dir.join(&d.file)).unwrap())
        .count();
    outcome(
        "determinism",
        same_meta && differing == 0,
        format!("{} datasets compared, {differing} differ; metadata identical: {same_meta}", a.manifest.datasets.len()),
    )
}

fn dephasing(pol: &Desk, unpol: &Desk) -> Outcome {
    match (pol.visibility(), unpol.visibility()) {
        (Some(p), Some(u)) => {
            let drop = 1.0 - p / u;
            outcome(
                "dephasing",
                drop >= 0.05,
                format!("visibility polarized {p:.6}, unpolarized {u:.6}, relative drop {:.2}% (needs >= 5%)", 100.0 * drop),
            )
        }
        (p, u) => outcome("dephasing", false, format!("no comb found: polarized {p:?}, unpolarized {u:?}")),
    }
}

fn orthogonalization(raw: &Desk, gs: &Desk) -> Outcome {
    let a = raw.final_spectrum();
    let b = gs.final_spectrum();
    let peak = a.total.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    let worst = a.total.iter().zip(&b.total).map(|(x, y)| (x - y).abs()).fold(0.0f64, f64::max) / peak;
    outcome("orthogonalization", worst < 1e-3, format!("max spectrum difference {worst:.2e} of peak (tol 1e-3)"))
}

fn main() {
    let mut results = vec![
        coulomb(),
        free_dispersion_width(),
        volkov(),
        norm_energy(),
        spin_selection(),
        pauli(),
        weak_coupling(),
        richardson(),
    ];

    let tmp = tempfile::tempdir().unwrap();
    let dir = |n: &str| tmp.path().join(n);
    {
        let fig3 = desk_run(preset("fig3_polarized", Size::Desk).unwrap(), &dir("fig3"));
        results.push(pinem_comb(&fig3));
        results.push(determinism(&fig3, &dir("fig3"), &dir("fig3_again")));
    }
    fs::remove_dir_all(dir("fig3")).ok();
    fs::remove_dir_all(dir("fig3_again")).ok();

    let close = preset("fig5_close", Size::Desk).unwrap();
    let pol = desk_run(close.clone(), &dir("pol"));
    let unpol = desk_run(
        close
            .with_overrides(&["spin_mode=unpolarized", "electrons.1.spin=down"])
            .unwrap(),
        &dir("unpol"),
    );
    results.push(dephasing(&pol, &unpol));
    drop(unpol);
    fs::remove_dir_all(dir("unpol")).ok();
    let gs = desk_run(close.with_overrides(&["propagation.orthogonalize=true"]).unwrap(), &dir("gs"));
    results.push(orthogonalization(&pol, &gs));

    let passed = results.iter().filter(|r| r.pass).count();
    println!("{passed}/{} criteria pass", results.len());
    let unexpected: Vec<String> = results
        .iter()
        .filter(|r| !r.pass && !KNOWN_GAPS.contains(&r.name))
        .map(|r| format!("{}: {}", r.name, r.detail))
        .collect();
    if !unexpected.is_empty() {
        eprintln!("unexpected failures: {unexpected:#?}");
        std::process::exit(1);
    }
}
