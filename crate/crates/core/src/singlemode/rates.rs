use super::{CavityModeParams, DriveParams, NumberDistribution};

/// Transition rate `n -> n + 1`: thermal heating plus saturated pumping.
pub(crate) fn up_rate(n: usize, mode: &CavityModeParams, pump: f64, s: f64) -> f64 {
    let m = (n + 1) as f64;
    mode.kappa_up() * m + pump * m / (1.0 + n as f64 * s)
}

/// Transition rate `n -> n - 1`.
pub(crate) fn down_rate(n: usize, mode: &CavityModeParams) -> f64 {
    mode.kappa_down() * n as f64
}

/// `G = (gamma s / 2) sum_n P_n / (1 + n s)`.
pub fn gain(dist: &NumberDistribution, drive: &DriveParams) -> f64 {
    let s = drive.saturation();
    drive.pump()
        * dist
            .probabilities()
            .iter()
            .enumerate()
            .map(|(n, p)| p / (1.0 + n as f64 * s))
            .sum::<f64>()
}

/// Right-hand side of the rate equations on `0..=n_max`, written as
/// `dP_n/dt = J_{n-1} - J_n` with the net upward flux
/// `J_n = up(n) P_n - down(n + 1) P_{n+1}` and no flux out of `n_max`.
/// Probability is conserved exactly; use [`truncation_flux`] to see how
/// much the boundary is holding back.
pub fn rate_rhs(dist: &NumberDistribution, drive: &DriveParams, mode: &CavityModeParams) -> Vec<f64> {
    let p = dist.probabilities();
    let (s, pump) = (drive.saturation(), drive.pump());
    let n_max = p.len() - 1;
    let mut dp = vec![0.0; p.len()];
    for n in 0..n_max {
        let j = up_rate(n, mode, pump, s) * p[n] - down_rate(n + 1, mode) * p[n + 1];
        dp[n] -= j;
        dp[n + 1] += j;
    }
    dp
}

/// Flux that an untruncated ladder would carry out of `n_max`.
pub fn truncation_flux(dist: &NumberDistribution, drive: &DriveParams, mode: &CavityModeParams) -> f64 {
    let n_max = dist.n_max();
    up_rate(n_max, mode, drive.pump(), drive.saturation()) * dist.tail()
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn four_level_ladder_matches_hand_matrix() {
        // kappa = n_th = gamma = s = 1, so heating 1, cooling 2, pump 1/2.
        let drive = DriveParams::from_eta_omega((1.0f64 / 8.0).sqrt(), 1.0).unwrap();
        assert!((drive.saturation() - 1.0).abs() < 1e-15);
        let mode = CavityModeParams::new(1.0, 1.0, 1.0).unwrap();
        let m = [
            [-1.5, 2.0, 0.0, 0.0],
            [1.5, -4.5, 4.0, 0.0],
            [0.0, 2.5, -7.5, 6.0],
            [0.0, 0.0, 3.5, -6.0],
        ];
        let p = [0.1, 0.2, 0.3, 0.4];
        let dist = NumberDistribution::new(p.to_vec()).unwrap();
        let dp = rate_rhs(&dist, &drive, &mode);
        for i in 0..4 {
            let expect: f64 = (0..4).map(|j| m[i][j] * p[j]).sum();
            assert!((dp[i] - expect).abs() < 1e-14, "row {i}: {} vs {expect}", dp[i]);
        }
    }

    #[test]
    fn thermal_state_is_stationary_without_drive() {
        let mode = CavityModeParams::new(2.0, 0.01, 10.0).unwrap();
        let drive = DriveParams::from_eta_omega(0.0, 43.2).unwrap();
        let th = NumberDistribution::thermal(10.0, 600).unwrap();
        for d in rate_rhs(&th, &drive, &mode) {
            assert!(d.abs() < 1e-15);
        }
        assert_eq!(gain(&th, &drive), 0.0);
    }

    #[test]
    fn vacuum_gain_is_pump_rate() {
        let drive = DriveParams::from_eta_omega(0.3, 43.2).unwrap();
        let g = gain(&NumberDistribution::vacuum(10), &drive);
        assert!((g - 0.5 * 43.2 * drive.saturation()).abs() < 1e-15);
    }

    proptest! {
        #[test]
        fn probability_is_conserved(
            w in prop::collection::vec(0.0f64..1.0, 2..80),
            x in 0.0f64..2.0,
            kappa in 1e-3f64..1.0,
            n_th in 0.0f64..20.0,
        ) {
            prop_assume!(w.iter().sum::<f64>() > 1e-3);
            let dist = NumberDistribution::normalized(w).unwrap();
            let drive = DriveParams::from_eta_omega(x, 43.2).unwrap();
            let mode = CavityModeParams::new(2.0, kappa, n_th).unwrap();
            let total: f64 = rate_rhs(&dist, &drive, &mode).iter().sum();
            prop_assert!(total.abs() < 1e-12);
        }
    }
}
