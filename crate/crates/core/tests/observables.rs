use proptest::prelude::*;
use tdhf_core::observables::{pair_density_at, pinem_from_amplitude};
use tdhf_core::*;

fn grid() -> Grid {
    Grid::new(128, 64, 0.5, 0.5, -32.0, -16.0).unwrap()
}

fn packet(g: Grid, center: [f64; 2], fwhm: [f64; 2], energy: f64, spin: Spin) -> Orbital {
    make_gaussian_wavepacket(
        g,
        &GaussianPacket {
            center,
            fwhm_long: fwhm[0],
            fwhm_trans: fwhm[1],
            kinetic_energy: energy,
            direction: [1.0, 0.0],
            spin,
            label: String::new(),
        },
    )
    .unwrap()
}

fn pair(mode: SpinMode, shift: [f64; 2], de: f64) -> SystemState<f64> {
    let g = grid();
    let s2 = if mode == SpinMode::Polarized { Spin::Up } else { Spin::Down };
    let a = packet(g, [-3.0, -1.0], [8.0, 5.0], 0.5, Spin::Up);
    let b = packet(g, [-3.0 + shift[0], -1.0 + shift[1]], [7.0, 6.0], 0.5 + de, s2);
    let [a, b] = gram_schmidt([a, b]).unwrap();
    SystemState::new(vec![a, b], 0.0, mode).unwrap()
}

/// `integral |psi|^2 dy` along x for every orbital, summed.
fn marginal(state: &SystemState<f64>) -> Vec<f64> {
    let g = *state.grid();
    let rho = one_particle_density(state);
    (0..g.nx)
        .map(|i| (0..g.ny).map(|j| rho.values[g.index(i, j)]).sum::<f64>() * g.dy)
        .collect()
}

#[test]
fn correlation_and_density_difference_identities() {
    let g = grid();
    let a = packet(g, [-3.0, 0.0], [8.0, 5.0], 0.5, Spin::Up);
    let b = packet(g, [2.0, 1.0], [7.0, 6.0], 0.45, Spin::Up);
    let c = mutual_correlation(&a, &b, Convention::Full).unwrap();
    let s = inner_product(&a, &b).unwrap();
    assert!((c.integral() - s).norm() < 1e-12);
    let mut same = b.clone();
    same.carrier_k = a.carrier_k;
    let c = mutual_correlation(&a, &same, Convention::Envelope).unwrap();
    assert!((c.integral() - inner_product(&a, &same).unwrap()).norm() < 1e-12);
    let self_c = mutual_correlation(&a, &a, Convention::Full).unwrap();
    assert!(self_c.values.iter().all(|v| v.im == 0.0 && v.re >= 0.0));
    let d = density_difference(&a, &b).unwrap();
    let r = density_difference(&b, &a).unwrap();
    assert!(d.values.iter().zip(&r.values).all(|(x, y)| *x == -*y));
    assert!(d.integral().abs() < 1e-12);
    assert!(density_difference(&a, &a).unwrap().max_abs() == 0.0);
    let far = packet(g, [20.0, 0.0], [3.0, 3.0], 0.5, Spin::Up);
    let near = packet(g, [-20.0, 0.0], [3.0, 3.0], 0.5, Spin::Up);
    assert!(mutual_correlation(&far, &near, Convention::Full).unwrap().max_abs() < 1e-30);
}

#[test]
fn one_particle_density_counts_two_electrons_in_either_mode() {
    let p = pair(SpinMode::Polarized, [3.0, 1.0], 0.02);
    let u = pair(SpinMode::Unpolarized, [3.0, 1.0], 0.02);
    let rp = one_particle_density(&p);
    assert!((rp.integral() - 2.0).abs() < 1e-10);
    assert_eq!(rp.values, one_particle_density(&u).values);
}

#[test]
fn pauli_exclusion_on_the_diagonal() {
    let s = pair(SpinMode::Polarized, [2.0, 1.0], 0.03);
    let g = grid();
    let mut max = 0.0f64;
    let mut diag = 0.0f64;
    for (i, j) in [(40, 30), (50, 32), (58, 28), (64, 40), (70, 20), (45, 35)] {
        diag = diag.max(pair_density_at(&s, (i, j), (i, j)).unwrap().abs());
        for (k, l) in [(48, 33), (62, 30), (66, 36)] {
            max = max.max(pair_density_at(&s, (i, j), (k, l)).unwrap());
        }
    }
    assert!(max > 0.0);
    assert!(diag <= 1e-12 * max, "{diag:e} vs {max:e}");
    let u = pair(SpinMode::Unpolarized, [2.0, 1.0], 0.03);
    let on = pair_density_at(&u, (60, 32), (60, 32)).unwrap();
    assert!(on > 1e-3 * max);
    let _ = g;
}

#[test]
fn pair_slices_normalize_to_two_and_split_by_spin_mode() {
    for space in [Space::Real, Space::Momentum] {
        let p = pair_density_slice(&pair(SpinMode::Polarized, [2.0, 1.0], 0.03), space).unwrap();
        let u = pair_density_slice(&pair(SpinMode::Unpolarized, [2.0, 1.0], 0.03), space).unwrap();
        assert!((p.integral() - 2.0).abs() < 1e-8, "{space:?} {}", p.integral());
        assert!((u.integral() - 2.0).abs() < 1e-8, "{space:?} {}", u.integral());
        assert!(u.exchange_phase.iter().all(|v| *v == 0.0));
        let peak = p.exchange_phase.iter().fold(0.0f64, |m, v| m.max(v.abs()));
        assert!(peak > 1e-3 * p.total.iter().fold(0.0f64, |m, v| m.max(*v)));
        for a in 0..p.len() {
            for b in 0..p.len() {
                let d = p.at(&p.exchange_phase, a, b) - p.at(&p.exchange_phase, b, a);
                assert!(d.abs() <= 1e-12 * peak);
            }
        }
        assert!(p.coords.windows(2).all(|w| w[1] > w[0]));
    }
}

#[test]
fn total_is_uncorrelated_plus_exchange_and_non_negative() {
    let s = pair_density_slice(&pair(SpinMode::Polarized, [1.0, 0.5], 0.01), Space::Real).unwrap();
    let max = s.total.iter().fold(0.0f64, |m, v| m.max(*v));
    for i in 0..s.total.len() {
        assert!((s.total[i] - s.uncorrelated[i] - s.exchange[i]).abs() <= 1e-14 * max);
        assert!(s.total[i] >= -1e-10);
    }
}

#[test]
fn pinem_integral_equals_kinetic_energy() {
    let g = grid();
    let w = packet(g, [-3.0, 0.0], [6.0, 4.0], 0.5, Spin::Up);
    let a = to_momentum_space(&w);
    let bins = PinemBins::covering(&[&a], 0.004, std::f64::consts::FRAC_PI_2, 32).unwrap();
    let s = pinem_spectrum(&w, &bins).unwrap();
    // kinetic energy from the real-space gradient of the full wavefunction
    let gx = spectral_gradient(&w.envelope, Axis::X);
    let gy = spectral_gradient(&w.envelope, Axis::Y);
    let k = w.carrier_k;
    let mut t = 0.0;
    for idx in 0..g.len() {
        let e = w.envelope.values[idx];
        let dx = gx.values[idx] + Complex::new(0.0, k[0]) * e;
        let dy = gy.values[idx] + Complex::new(0.0, k[1]) * e;
        t += 0.5 * (dx.norm_sqr() + dy.norm_sqr());
    }
    t *= g.cell_area();
    let got = s.integral();
    assert!((got - t).abs() < 1e-6 * t, "{got} {t}");
    assert!(s.sigma.iter().all(|v| *v >= 0.0));
    let de = bins.energy_width();
    for (e, row) in s.total.iter().enumerate() {
        let direct: f64 = s.sigma[e * bins.n_angle..(e + 1) * bins.n_angle].iter().sum::<f64>() * bins.angle_width();
        assert!((row - direct).abs() <= 1e-12 * row.abs().max(1e-300));
        let _ = de;
    }
}

#[test]
fn monochromatic_packet_gives_a_single_peak() {
    let g = Grid::new(1024, 128, 0.5, 1.0, -256.0, -64.0).unwrap();
    let e_star = 0.5;
    let w = packet(g, [0.0, 0.0], [100.0, 24.0], e_star, Spin::Up);
    let a = to_momentum_space(&w);
    let bins = PinemBins::new(0.3, 0.7, 40, 0.5, 8).unwrap();
    let s = pinem_from_amplitude(&a, &bins).unwrap();
    let (imax, _) = s.total.iter().enumerate().fold((0, 0.0), |m, (i, v)| if *v > m.1 { (i, *v) } else { m });
    assert!((s.energies[imax] - e_star).abs() <= bins.energy_width(), "{} {}", s.energies[imax], e_star);
    let rel = (s.integral() - e_star * w.norm_sqr()).abs() / e_star;
    assert!(rel < 2.0 * bins.energy_width() / e_star, "{rel:e}");
    // one peak: the spectrum falls monotonically on both sides
    let above = s.total.iter().filter(|v| **v > 0.5 * s.total[imax]).count();
    assert!(above as f64 * bins.energy_width() < 0.05);
}

#[test]
fn pinem_total_is_the_sum_of_orbital_spectra() {
    let st = pair(SpinMode::Polarized, [3.0, 1.0], 0.02);
    let amps: Vec<_> = st.orbitals.iter().map(to_momentum_space).collect();
    let refs: Vec<_> = amps.iter().collect();
    let bins = PinemBins::covering(&refs, 0.004, 1.0, 8).unwrap();
    let total = pinem_total(&st, &bins).unwrap();
    let a = pinem_spectrum(&st.orbitals[0], &bins).unwrap();
    let b = pinem_spectrum(&st.orbitals[1], &bins).unwrap();
    for i in 0..total.total.len() {
        assert_eq!(total.total[i], a.total[i] + b.total[i]);
    }
    let twin = SystemState {
        orbitals: vec![st.orbitals[0].clone(), st.orbitals[0].clone()],
        ..st.clone()
    };
    let doubled = pinem_total(&twin, &bins).unwrap();
    for i in 0..doubled.total.len() {
        assert_eq!(doubled.total[i], 2.0 * a.total[i]);
    }
}

#[test]
fn pinem_rejects_momenta_at_the_grid_edge() {
    let g = Grid::new(64, 64, 1.0, 1.0, -32.0, -32.0).unwrap();
    let kq = 0.9 * g.kx_max();
    let f = Field::from_fn(g, |x, y| Complex::from_polar((-(x * x + y * y) / 50.0).exp(), kq * x));
    let mut w = Orbital::new(f, [0.0, 0.0], Spin::Up, "");
    let n = w.envelope.norm();
    w.envelope.scale(Complex::new(1.0 / n, 0.0));
    let a = to_momentum_space(&w);
    let bins = PinemBins::covering(&[&a], 0.01, 1.0, 8).unwrap();
    assert!(matches!(pinem_spectrum(&w, &bins), Err(Error::MomentumOutOfRange { .. })));
}

fn random_orbital(g: Grid, seed: &[f64], spin: Spin) -> Orbital {
    let f = Field::from_fn(g, |x, y| {
        let mut v = Complex::new(0.0, 0.0);
        for c in seed.chunks(4) {
            let r2 = (x - c[0]).powi(2) + (y - c[1]).powi(2);
            v += Complex::from_polar((-r2 / 8.0).exp() * c[2], c[3] * x);
        }
        v
    });
    let mut o = Orbital::new(f, [0.2, 0.0], spin, "");
    let n = o.envelope.norm();
    o.envelope.scale(Complex::new(1.0 / n, 0.0));
    o
}

fn seeds() -> impl Strategy<Value = Vec<f64>> {
    prop::collection::vec((-6.0..6.0f64, -3.0..3.0f64, 0.2..1.0f64, -0.4..0.4f64), 3)
        .prop_map(|v| v.into_iter().flat_map(|(a, b, c, d)| [a, b, c, d]).collect())
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn pair_density_is_symmetric_and_traces_to_the_one_particle_density(s1 in seeds(), s2 in seeds(), polarized in any::<bool>()) {
        let g = Grid::new(32, 16, 0.6, 0.6, -9.6, -4.8).unwrap();
        let (mode, sp) = if polarized { (SpinMode::Polarized, Spin::Up) } else { (SpinMode::Unpolarized, Spin::Down) };
        let a = random_orbital(g, &s1, Spin::Up);
        let b = random_orbital(g, &s2, sp);
        let orbitals = match gram_schmidt([a, b]) {
            Ok(o) => o,
            Err(_) => return Ok(()),
        };
        let st = SystemState::new(orbitals.to_vec(), 0.0, mode).unwrap();
        let sl = pair_density_slice(&st, Space::Real).unwrap();
        let max = sl.total.iter().fold(0.0f64, |m, v| m.max(v.abs()));
        for i in 0..sl.len() {
            for j in 0..sl.len() {
                prop_assert!((sl.at(&sl.total, i, j) - sl.at(&sl.total, j, i)).abs() <= 1e-12 * max);
            }
        }
        let rho = marginal(&st);
        let dx = sl.spacing();
        for i in 0..sl.len() {
            let row: f64 = (0..sl.len()).map(|j| sl.at(&sl.total, i, j)).sum::<f64>() * dx;
            prop_assert!((row - rho[i]).abs() <= 1e-8 * (1.0 + rho[i]));
        }
    }
}
