use phonon_forge_core::cavity::*;
use phonon_forge_core::crystal::*;
use phonon_forge_core::linalg::orthogonality_defect;
use phonon_forge_core::Error;

fn base(n: usize) -> IonArraySpec {
    IonArraySpec::new(IonSpecies::calcium40(), n, 7e-6, vec![]).unwrap()
}

/// Centred cavity with symmetric walls; `nu_ot` in units of omega0.
fn setup(n: usize, n_s: usize, w: usize, nu_ot: f64) -> (CouplingMatrix, Partition) {
    let b = base(n);
    let (spec, part) =
        walled_cavity(&b, default_center(n), n_s, w, w, nu_ot * b.omega0()).unwrap();
    (build_coupling_matrix(&spec), part)
}

fn inner_kappas(n: usize, n_s: usize, w: usize, nu_ot: f64) -> Vec<f64> {
    let (a, part) = setup(n, n_s, w, nu_ot);
    let d = decompose(&a, &part).unwrap();
    decay_rates(&d, None).unwrap().kappas()
}

#[test]
fn single_ion_cavity_sits_at_twice_omega0() {
    let b = base(800);
    let nu = 2.0 * std::f64::consts::PI * 2.4e6 / b.omega0();
    let (a, part) = setup(800, 1, 2, nu);
    let d = decompose(&a, &part).unwrap();
    let inner = d.cavity_modes();
    assert_eq!(inner.len(), 1);
    let w = d.omega_cavity[inner[0]];
    assert!((w - 2.0).abs() < 0.15, "{w}");
}

#[test]
fn two_ion_cavity_has_com_and_breathing_modes() {
    let b = base(800);
    let nu = 2.0 * std::f64::consts::PI * 3.0e6 / b.omega0();
    let (a, part) = setup(800, 2, 1, nu);
    let d = decompose(&a, &part).unwrap();
    let w: Vec<f64> = d.cavity_modes().iter().map(|&q| d.omega_cavity[q]).collect();
    assert_eq!(w.len(), 2);
    assert!((w[0] / 1.6 - 1.0).abs() < 0.05, "{w:?}");
    assert!((w[1] / 2.5 - 1.0).abs() < 0.05, "{w:?}");
}

#[test]
fn decomposition_invariants() {
    let (a, part) = setup(500, 5, 3, 4.0);
    let d = decompose(&a, &part).unwrap();
    assert!(orthogonality_defect(d.u_cavity.as_ref()) < 1e-8);
    assert!(orthogonality_defect(d.u_bath.as_ref()) < 1e-8);
    assert!(d.omega_cavity.windows(2).all(|w| w[0] <= w[1]));
    assert!(d.omega_bath.windows(2).all(|w| w[0] <= w[1]));
    assert_eq!(d.wall_mode.iter().filter(|&&f| f).count(), 6);

    let back = d.reconstruct_cross_block();
    let (c, b) = (part.cavity_sites(), part.bath_sites());
    let mut err: f64 = 0.0;
    for (i, &ci) in c.iter().enumerate() {
        for (j, &bj) in b.iter().enumerate() {
            err = err.max((back[(i, j)] - a.get(ci, bj)).abs());
        }
    }
    assert!(err < 1e-8, "{err}");

    let top_inner = d
        .cavity_modes()
        .iter()
        .map(|&q| d.omega_cavity[q])
        .fold(0.0, f64::max);
    for (q, &wall) in d.wall_mode.iter().enumerate() {
        if wall {
            assert!(d.omega_cavity[q] > top_inner);
        }
    }
}

#[test]
fn decay_report_stores_its_own_factors() {
    let (a, part) = setup(1000, 5, 2, 5.0);
    let d = decompose(&a, &part).unwrap();
    let r = decay_rates(&d, None).unwrap();
    assert_eq!(r.modes.len(), 5);
    for m in &r.modes {
        assert!(m.in_band && m.kappa > 0.0);
        assert_eq!(m.kappa, 2.0 * std::f64::consts::PI * m.g2_bar * m.rho);
        assert!(m.samples >= MIN_WINDOW_SAMPLES);
    }
}

#[test]
fn sparse_explicit_window_is_rejected() {
    let (a, part) = setup(400, 1, 2, 5.0);
    let d = decompose(&a, &part).unwrap();
    let spacing = 4.0 / 400.0;
    match decay_rates(&d, Some(1.5 * spacing)) {
        Err(Error::SparseWindow { .. }) | Err(Error::WindowTooNarrow { .. }) => {}
        other => panic!("{other:?}"),
    }
}

#[test]
fn kappa_is_monotone_in_wall_thickness_and_strength() {
    let ws = [1, 2, 3];
    let nus = [3.0, 4.5, 6.0];
    let grid: Vec<Vec<Vec<f64>>> = ws
        .iter()
        .map(|&w| nus.iter().map(|&nu| inner_kappas(700, 2, w, nu)).collect())
        .collect();
    for q in 0..2 {
        for i in 0..3 {
            for j in 0..3 {
                let k = grid[i][j][q];
                if i + 1 < 3 {
                    assert!(grid[i + 1][j][q] <= k, "w {} nu {}: mode {q}", ws[i], nus[j]);
                }
                if j + 1 < 3 {
                    assert!(grid[i][j + 1][q] <= k, "w {} nu {}: mode {q}", ws[i], nus[j]);
                }
            }
        }
    }
}

#[test]
fn bath_dos_per_ion_converges_with_size() {
    let bath = |n: usize| {
        let (a, part) = setup(n, 1, 2, 5.0);
        decompose(&a, &part).unwrap().omega_bath
    };
    let (big, small) = (bath(1200), bath(600));
    let window = 0.1;
    let (db, ds) = (bath_dos(&big, window).unwrap(), bath_dos(&small, window).unwrap());
    assert!((db.integral() / big.len() as f64 - 1.0).abs() < 0.01);
    assert!((ds.integral() / small.len() as f64 - 1.0).abs() < 0.01);
    for i in 1..20 {
        let w = 0.2 + 2.5 * i as f64 / 20.0;
        let rb = db.density(w) / big.len() as f64;
        let rs = ds.density(w) / small.len() as f64;
        assert!((rb / rs - 1.0).abs() < 0.05, "omega {w}: {rb} vs {rs}");
    }
    assert_eq!(db.density(db.band().1 + 0.01), 0.0);
    assert_eq!(db.density(db.band().0 - 0.01), 0.0);
}

#[test]
fn strong_walls_give_markovian_decay() {
    let (a, part) = setup(1000, 1, 2, 5.9);
    let d = decompose(&a, &part).unwrap();
    let r = decay_rates(&d, None).unwrap();
    let q = d.cavity_modes()[0];
    let kappa = r.by_mode(q).unwrap().kappa;
    let tr = exact_population_trace(&a, &part, q, 0.8 * revival_time(&part), 800).unwrap();
    assert!((tr.population[0] - 1.0).abs() < 1e-12);
    assert!(tr.population.iter().all(|&p| (0.0..=1.0 + 1e-6).contains(&p)));
    assert!(tr.norm_drift < 1e-8, "{}", tr.norm_drift);
    assert!((tr.kappa_fit / kappa - 1.0).abs() < 0.2, "{} vs {kappa}", tr.kappa_fit);
    assert!(tr.log_rms_against(kappa) < OSCILLATION_RESIDUAL);
    assert!(!tr.oscillating);
}

#[test]
fn weak_walls_oscillate() {
    let (a, part) = setup(1000, 1, 2, 2.0);
    let q = decompose(&a, &part).unwrap().cavity_modes()[0];
    let tr = exact_population_trace(&a, &part, q, 0.8 * revival_time(&part), 800).unwrap();
    assert!(tr.oscillating, "residual {}", tr.fit_residual);
}

#[test]
fn population_returns_near_the_revival_estimate() {
    let (a, part) = setup(400, 1, 2, 3.0);
    let q = decompose(&a, &part).unwrap().cavity_modes()[0];
    let est = revival_time(&part);
    let tr = exact_population_trace(&a, &part, q, 3.0 * est, 3000).unwrap();
    assert!(tr.restricted);
    let seen = tr.observed_revival().expect("no revival seen");
    assert!(seen > 0.5 * est && seen < 2.0 * est, "{seen} vs {est}");
}

#[test]
fn revival_scales_with_bath() {
    let p1 = Partition::from_layout(1001, 498, 1, 2, 2).unwrap();
    let p2 = Partition::from_layout(2001, 998, 1, 2, 2).unwrap();
    assert_eq!(revival_time(&p1), 996.0);
    assert_eq!(revival_time(&p2), 1996.0);
}

#[test]
fn zero_strength_walls_are_rejected() {
    let b = base(300);
    let (spec, part) = walled_cavity(&b, 150, 1, 2, 2, 1e-12).unwrap();
    let a = build_coupling_matrix(&spec);
    assert!(matches!(decompose(&a, &part), Err(Error::WallsIndistinct(_))));
}
