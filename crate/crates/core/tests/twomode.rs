use num_complex::Complex64;
use phonon_forge_core::twomode::*;
use proptest::prelude::*;

fn gaussian_of(m: &ModeMoments) -> ModeMoments {
    let (x, p) = (m.mean_x(), m.mean_p());
    // Symmetrised covariance: Re<PX> - <P><X>.
    let cov = m.get(1, 1).re - p * x;
    gaussian_moments(x, p, m.var_x(), m.var_p(), cov)
}

#[test]
fn undriven_evolution_stays_gaussian() {
    let p = TwoModeParams::two_ion_reference(0.0);
    let st = init_state(30.0, 4.0, &p).unwrap();
    for t_max in [7.3, 60.0, 400.0] {
        let opts = IntegrateOptions {
            t_max: Some(t_max),
            ..IntegrateOptions::default()
        };
        let tr = integrate(&st, &p, &opts).unwrap();
        for q in ModeLabel::BOTH {
            let m = tr.final_state.mode(q);
            let g = gaussian_of(m);
            for (a, b) in m.as_array().iter().zip(g.as_array()) {
                let scale = b.norm().max(1.0);
                assert!((a - b).norm() < 1e-6 * scale, "t {t_max}: {a} vs {b}");
            }
        }
    }
}

#[test]
fn lasing_state_is_coherent_and_bounded() {
    let p = TwoModeParams::two_ion_reference(1.0);
    let a = integrate(&init_state(0.5, 0.5, &p).unwrap(), &p, &IntegrateOptions::default()).unwrap();
    let b = integrate(&init_state(300.0, 0.5, &p).unwrap(), &p, &IntegrateOptions::default()).unwrap();
    for tr in [&a, &b] {
        assert_eq!(tr.classification, LasingClass::BrLasing);
        assert!(tr.final_state.bloch_radius_sq() <= 0.25 + 1e-3);
        assert!(tr.sigma_z.iter().all(|z| (-1.0 - 1e-9..=1.0).contains(z)));
        assert!(tr.energy.iter().flatten().all(|&e| e >= 0.0));
        let g2 = tr.steady_g2[ModeLabel::Br.index()].unwrap();
        assert!((g2 - 1.0).abs() < 0.05, "{g2}");
        // Energy of a large coherent amplitude is about twice the occupation.
        let n = tr.mean_n[1].last().copied().unwrap();
        let e = tr.energy[1].last().copied().unwrap();
        assert!(n > 100.0 && (e / (2.0 * n) - 1.0).abs() < 0.05, "{e} vs {n}");
    }
    let (na, nb) = (a.steady(ModeLabel::Br), b.steady(ModeLabel::Br));
    assert!((na / nb - 1.0).abs() < 0.02);
}

#[test]
fn threshold_follows_square_root_of_kappa() {
    let p = TwoModeParams::two_ion_reference(0.0);
    let base = single_mode_consistency(&p, ModeLabel::Br).unwrap();
    let mut lossy = p;
    lossy.br.kappa *= 4.0;
    let scaled = single_mode_consistency(&lossy, ModeLabel::Br).unwrap();
    assert!((scaled.closed_form / base.closed_form - 2.0).abs() < 1e-9);
    assert!((scaled.moment_onset / base.moment_onset - 2.0).abs() < 0.1);
}

#[test]
fn closure_breakdown_is_reported() {
    let p = TwoModeParams::two_ion_reference(0.0);
    let mut st = init_state(1.0, 1.0, &p).unwrap();
    st.modes[0].set(0, 2, Complex64::new(0.5, 0.0));
    let r = integrate(&st, &p, &IntegrateOptions::default());
    assert!(matches!(r, Err(phonon_forge_core::Error::ClosureBreakdown { .. })));
}

proptest! {
    #![proptest_config(ProptestConfig {
        cases: 48,
        failure_persistence: None,
        ..ProptestConfig::default()
    })]

    #[test]
    fn low_orders_ignore_higher_moments_without_drive(
        x in -5.0f64..5.0, pm in -5.0f64..5.0, vx in 1.0f64..30.0, vp in 1.0f64..30.0,
        junk in proptest::collection::vec(-50.0f64..50.0, 9),
    ) {
        let p = TwoModeParams::two_ion_reference(0.0);
        let mut st = init_state(0.0, 0.0, &p).unwrap();
        st.modes[0] = gaussian_moments(x, pm, vx, vp, 0.3);
        let clean = moment_rhs(&st, &p);
        let mut k = 0;
        for order in 3..=MAX_ORDER {
            for n in 0..=order {
                st.modes[0].set(n, order - n, Complex64::new(junk[k % 9], junk[(k + 4) % 9]));
                k += 1;
            }
        }
        let dirty = moment_rhs(&st, &p);
        for order in 1..=2 {
            for n in 0..=order {
                let i = moment_index(n, order - n);
                prop_assert_eq!(clean.modes[0].as_array()[i], dirty.modes[0].as_array()[i]);
            }
        }
    }

    #[test]
    fn thermal_moments_have_g2_of_two(n_th in 0.05f64..40.0) {
        let w = 2.0 * n_th + 1.0;
        let s = PhononStats::from_moments(&gaussian_moments(0.0, 0.0, w, w, 0.0));
        prop_assert!((s.mean_n - n_th).abs() < 1e-9 * n_th.max(1.0));
        prop_assert!((s.g2().unwrap() - 2.0).abs() < 1e-6);
    }

    #[test]
    fn classification_is_exhaustive(nc in 0.0f64..1000.0, nb in 0.0f64..3000.0) {
        let p = TwoModeParams::two_ion_reference(1.0);
        let c = LasingClass::classify([nc, nb], &p);
        let expect = match (nc > lasing_level(13.0), nb > lasing_level(8.15)) {
            (true, true) => LasingClass::BothLasing,
            (true, false) => LasingClass::ComLasing,
            (false, true) => LasingClass::BrLasing,
            (false, false) => LasingClass::BelowThreshold,
        };
        prop_assert_eq!(c, expect);
    }
}
