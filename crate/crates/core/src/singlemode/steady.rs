use super::rates::{down_rate, up_rate};
use super::{from_logs, CavityModeParams, DriveParams, NumberDistribution};
use crate::error::{Error, Result};

/// Largest truncation the automatic policy will try.
pub const MAX_N_MAX: usize = 1 << 24;

/// Stationary solution of `d<n>/dt = (G(<n>) - kappa) <n> + kappa n_th + G(<n>)`
/// with the saturated gain `G(n) = (gamma s / 2) / (1 + n s)`: the non-negative
/// root of `kappa s n^2 + (kappa - a - kappa n_th s) n - (a + kappa n_th) = 0`.
pub fn mean_n_steady(drive: &DriveParams, mode: &CavityModeParams) -> f64 {
    let s = drive.saturation();
    let a = drive.pump();
    let k = mode.kappa;
    let c = a + k * mode.n_th;
    if s == 0.0 {
        return c / k;
    }
    let qa = k * s;
    let b = k - a - k * mode.n_th * s;
    let disc = (b * b + 4.0 * qa * c).sqrt();
    // Pick the cancellation-free form of the positive root.
    if b >= 0.0 {
        2.0 * c / (b + disc)
    } else {
        (disc - b) / (2.0 * qa)
    }
}

/// Truncation from the mean-field estimate:
/// `ceil(<n> + 12 sqrt(<n> + n_th + 1))`.
pub fn auto_n_max(drive: &DriveParams, mode: &CavityModeParams) -> usize {
    let est = mean_n_steady(drive, mode);
    (est + 12.0 * (est + mode.n_th + 1.0).sqrt()).ceil().max(16.0) as usize
}

/// Detailed-balance product `P_n = P_0 prod_k up(k-1) / down(k)`, evaluated
/// in log space on `0..=n_max` (exact for the truncated ladder).
pub fn steady_state_truncated(
    drive: &DriveParams,
    mode: &CavityModeParams,
    n_max: usize,
) -> Result<NumberDistribution> {
    let (s, pump) = (drive.saturation(), drive.pump());
    let mut logs = Vec::with_capacity(n_max + 1);
    let mut acc = 0.0;
    logs.push(0.0);
    for n in 1..=n_max {
        acc += up_rate(n - 1, mode, pump, s).ln() - down_rate(n, mode).ln();
        logs.push(acc);
    }
    NumberDistribution::normalized(from_logs(&logs))
}

/// Steady state with `n_max` chosen by [`auto_n_max`] and doubled until the
/// tail mass drops below the tolerance.
pub fn steady_state(drive: &DriveParams, mode: &CavityModeParams) -> Result<NumberDistribution> {
    let mut n_max = auto_n_max(drive, mode);
    loop {
        let dist = steady_state_truncated(drive, mode, n_max)?;
        if dist.truncation_ok() {
            return Ok(dist);
        }
        if n_max >= MAX_N_MAX {
            return Err(Error::Truncation {
                n_max,
                tail: dist.tail(),
            });
        }
        n_max = (2 * n_max).min(MAX_N_MAX);
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::singlemode::rates::rate_rhs;
    use crate::singlemode::stats::g2_zero;

    fn fig2(eta_omega: f64, n_th: f64) -> (DriveParams, CavityModeParams) {
        (
            DriveParams::from_eta_omega(eta_omega, 43.2).unwrap(),
            CavityModeParams::new(2.0, 6.1e-3, n_th).unwrap(),
        )
    }

    #[test]
    fn undriven_mode_is_thermal() {
        let (drive, mode) = fig2(0.0, 10.0);
        assert_eq!(mean_n_steady(&drive, &mode), 10.0);
        let d = steady_state(&drive, &mode).unwrap();
        assert!((d.mean() - 10.0).abs() < 1e-6);
        assert!((g2_zero(&d).unwrap() - 2.0).abs() < 1e-6);
        let x: f64 = 10.0 / 11.0;
        for (n, p) in d.probabilities().iter().enumerate().take(50) {
            assert!((p - (1.0 - x) * x.powi(n as i32)).abs() < 1e-9);
        }
    }

    #[test]
    fn product_formula_is_stationary() {
        let (drive, mode) = fig2(0.35, 4.0);
        let d = steady_state_truncated(&drive, &mode, 50).unwrap();
        let dp = rate_rhs(&d, &drive, &mode);
        let scale = drive.pump() * 50.0 + mode.kappa_down() * 50.0;
        assert!(dp.iter().all(|x| x.abs() < 1e-13 * scale));
    }

    #[test]
    fn lasing_mean_is_near_two_thousand() {
        let (drive, mode) = fig2(0.4, 10.0);
        let n = mean_n_steady(&drive, &mode);
        assert!((n / 2200.0 - 1.0).abs() < 0.1, "{n}");
        let d = steady_state(&drive, &mode).unwrap();
        assert!(d.truncation_ok());
        assert!((d.mean() / n - 1.0).abs() < 0.02);
    }

    #[test]
    fn mean_field_root_is_continuous_through_threshold() {
        let mode = CavityModeParams::new(2.0, 6.1e-3, 10.0).unwrap();
        let mut prev = 0.0;
        for i in 0..=400 {
            let drive = DriveParams::from_eta_omega(i as f64 * 1.5e-3, 43.2).unwrap();
            let n = mean_n_steady(&drive, &mode);
            assert!(n >= prev - 1e-9 && n.is_finite());
            prev = n;
        }
    }
}
