use serde::Serialize;

use super::rates::{down_rate, up_rate};
use super::steady::steady_state_truncated;
use super::{CavityModeParams, DriveParams, NumberDistribution, TAIL_TOLERANCE};
use crate::error::{ensure_positive, invalid, Error, Result};

/// Largest accepted step, `0.1 / (kappa (n_th + 1) + gamma s / 2)`.
pub fn stable_step(drive: &DriveParams, mode: &CavityModeParams) -> f64 {
    0.1 / (mode.kappa_down() + drive.pump())
}

#[derive(Debug, Clone, Serialize)]
pub struct DistributionTrajectory {
    pub times: Vec<f64>,
    pub mean_n: Vec<f64>,
    pub second_moment: Vec<f64>,
    /// Largest `|sum P - 1|` seen along the way.
    pub norm_error: f64,
    /// `sum n P_n` of the stationary distribution on the same ladder.
    pub steady_mean: f64,
    pub final_distribution: NumberDistribution,
}

impl DistributionTrajectory {
    /// First time `<n>` reaches `level`, linearly interpolated.
    pub fn time_to_reach(&self, level: f64) -> Option<f64> {
        let i = self.mean_n.iter().position(|&m| m >= level)?;
        if i == 0 {
            return Some(self.times[0]);
        }
        let (t0, t1) = (self.times[i - 1], self.times[i]);
        let (m0, m1) = (self.mean_n[i - 1], self.mean_n[i]);
        Some(t0 + (t1 - t0) * (level - m0) / (m1 - m0))
    }

    /// Time to reach the given fraction of the stationary mean.
    pub fn rise_time(&self, fraction: f64) -> Option<f64> {
        self.time_to_reach(fraction * self.steady_mean)
    }
}

/// Integrate the rate equations from `dist0` with implicit (backward) Euler
/// steps of size `dt`. The ladder is the one of `dist0`; the run aborts if
/// the top level accumulates more than the tail tolerance.
pub fn evolve_distribution(
    dist0: &NumberDistribution,
    drive: &DriveParams,
    mode: &CavityModeParams,
    t_max: f64,
    dt: f64,
) -> Result<DistributionTrajectory> {
    ensure_positive("t_max", t_max)?;
    ensure_positive("dt", dt)?;
    let limit = stable_step(drive, mode);
    if dt > limit {
        return Err(invalid("dt", format!("{dt} exceeds the step bound {limit:.4e}")));
    }
    let n = dist0.n_max() + 1;
    let (s, pump) = (drive.saturation(), drive.pump());
    let up: Vec<f64> = (0..n)
        .map(|k| if k + 1 < n { up_rate(k, mode, pump, s) } else { 0.0 })
        .collect();
    let down: Vec<f64> = (0..n).map(|k| down_rate(k, mode)).collect();
    // (I - dt M) P' = P with M tridiagonal:
    //   M[k][k-1] = up[k-1], M[k][k] = -(up[k] + down[k]), M[k][k+1] = down[k+1].
    let lower: Vec<f64> = (0..n).map(|k| if k > 0 { -dt * up[k - 1] } else { 0.0 }).collect();
    let diag: Vec<f64> = (0..n).map(|k| 1.0 + dt * (up[k] + down[k])).collect();
    let upper: Vec<f64> = (0..n).map(|k| if k + 1 < n { -dt * down[k + 1] } else { 0.0 }).collect();
    // Thomas elimination factors; the matrix is a column-diagonally-dominant
    // M-matrix, so no pivoting is needed.
    let mut c_star = vec![0.0; n];
    let mut denom = vec![0.0; n];
    denom[0] = diag[0];
    c_star[0] = upper[0] / denom[0];
    for k in 1..n {
        denom[k] = diag[k] - lower[k] * c_star[k - 1];
        c_star[k] = upper[k] / denom[k];
    }

    let steps = (t_max / dt).ceil() as usize;
    let mut p = dist0.probabilities().to_vec();
    let moments = |p: &[f64]| -> (f64, f64) {
        p.iter().enumerate().fold((0.0, 0.0), |(a, b), (k, x)| {
            let k = k as f64;
            (a + k * x, b + k * k * x)
        })
    };
    let (m0, s0) = moments(&p);
    let mut times = vec![0.0];
    let mut mean_n = vec![m0];
    let mut second_moment = vec![s0];
    let mut norm_error: f64 = 0.0;
    let mut rhs = vec![0.0; n];
    for step in 1..=steps {
        rhs[0] = p[0] / denom[0];
        for k in 1..n {
            rhs[k] = (p[k] - lower[k] * rhs[k - 1]) / denom[k];
        }
        p[n - 1] = rhs[n - 1];
        for k in (0..n - 1).rev() {
            p[k] = rhs[k] - c_star[k] * p[k + 1];
        }
        let t = (step as f64 * dt).min(t_max);
        if p[n - 1] > TAIL_TOLERANCE {
            return Err(Error::Truncation {
                n_max: n - 1,
                tail: p[n - 1],
            });
        }
        norm_error = norm_error.max((p.iter().sum::<f64>() - 1.0).abs());
        let (m, s2) = moments(&p);
        times.push(t);
        mean_n.push(m);
        second_moment.push(s2);
    }
    let steady_mean = steady_state_truncated(drive, mode, n - 1)?.mean();
    Ok(DistributionTrajectory {
        times,
        mean_n,
        second_moment,
        norm_error,
        steady_mean,
        final_distribution: NumberDistribution { p },
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn undriven_relaxation_follows_exponential() {
        let mode = CavityModeParams::new(2.0, 6.1e-3, 10.0).unwrap();
        let drive = DriveParams::from_eta_omega(0.0, 43.2).unwrap();
        let dt = 0.1;
        let tr = evolve_distribution(&NumberDistribution::vacuum(400), &drive, &mode, 1000.0, dt)
            .unwrap();
        for (t, m) in tr.times.iter().zip(&tr.mean_n).skip(100) {
            let exact = 10.0 * (1.0 - (-mode.kappa * t).exp());
            assert!((m / exact - 1.0).abs() < 0.01, "t={t}: {m} vs {exact}");
        }
        assert!(tr.norm_error < 1e-10);
    }

    #[test]
    fn oversized_step_is_refused() {
        let mode = CavityModeParams::new(2.0, 6.1e-3, 10.0).unwrap();
        let drive = DriveParams::from_eta_omega(0.4, 43.2).unwrap();
        let dt = 2.0 * stable_step(&drive, &mode);
        assert!(evolve_distribution(&NumberDistribution::vacuum(10), &drive, &mode, 1.0, dt).is_err());
    }

    #[test]
    fn short_ladder_breach_aborts() {
        let mode = CavityModeParams::new(2.0, 6.1e-3, 10.0).unwrap();
        let drive = DriveParams::from_eta_omega(0.4, 43.2).unwrap();
        let dt = stable_step(&drive, &mode);
        let r = evolve_distribution(&NumberDistribution::vacuum(30), &drive, &mode, 500.0, dt);
        assert!(matches!(r, Err(Error::Truncation { .. })));
    }
}
