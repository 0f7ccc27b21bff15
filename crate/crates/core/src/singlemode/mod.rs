//! Blue-sideband-pumped single phonon mode: number-state rate equations with
//! the atom adiabatically eliminated, their steady state and statistics.
//!
//! All frequencies and rates are in units of `omega0`.

mod evolve;
mod rates;
mod scan;
mod stats;
mod steady;

use serde::{Deserialize, Serialize};

use crate::error::{ensure_non_negative, ensure_positive, invalid, Result};

pub use evolve::{evolve_distribution, stable_step, DistributionTrajectory};
pub use rates::{gain, rate_rhs, truncation_flux};
pub use scan::{
    closed_form_threshold, estimate_threshold, threshold_scan, ScanRow, ThresholdEstimate,
};
pub use stats::{g2_zero, lineshape, linewidth, normalized_lineshape, SteadyStateReport};
pub use steady::{auto_n_max, mean_n_steady, steady_state, steady_state_truncated, MAX_N_MAX};

/// Tail mass `P_{n_max}` allowed before a truncation counts as inadequate.
pub const TAIL_TOLERANCE: f64 = 1e-8;

/// Sideband drive on the gain ion.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DriveParams {
    pub eta: f64,
    pub rabi: f64,
    pub delta_b: f64,
    pub gamma: f64,
}

impl DriveParams {
    pub fn new(eta: f64, rabi: f64, delta_b: f64, gamma: f64) -> Result<Self> {
        ensure_non_negative("eta", eta)?;
        ensure_non_negative("rabi", rabi)?;
        if !delta_b.is_finite() {
            return Err(invalid("delta_b", "must be finite"));
        }
        ensure_positive("gamma", gamma)?;
        Ok(Self {
            eta,
            rabi,
            delta_b,
            gamma,
        })
    }

    /// Resonant drive parametrised directly by the product `eta * Omega`.
    pub fn from_eta_omega(eta_omega: f64, gamma: f64) -> Result<Self> {
        Self::new(1.0, eta_omega, 0.0, gamma)
    }

    pub fn eta_omega(&self) -> f64 {
        self.eta * self.rabi
    }

    pub fn with_eta_omega(&self, eta_omega: f64) -> Result<Self> {
        if self.eta > 0.0 {
            Self::new(self.eta, eta_omega / self.eta, self.delta_b, self.gamma)
        } else {
            Self::new(1.0, eta_omega, self.delta_b, self.gamma)
        }
    }

    pub fn saturation(&self) -> f64 {
        saturation(self)
    }

    /// Pump rate `gamma s / 2` into the empty mode.
    pub fn pump(&self) -> f64 {
        0.5 * self.gamma * self.saturation()
    }
}

/// `s = 2 (eta Omega)^2 / (delta_b^2 + gamma^2 / 4)`.
pub fn saturation(drive: &DriveParams) -> f64 {
    let x = drive.eta_omega();
    2.0 * x * x / (drive.delta_b * drive.delta_b + 0.25 * drive.gamma * drive.gamma)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CavityModeParams {
    pub omega: f64,
    pub kappa: f64,
    pub n_th: f64,
}

impl CavityModeParams {
    pub fn new(omega: f64, kappa: f64, n_th: f64) -> Result<Self> {
        ensure_positive("omega", omega)?;
        ensure_positive("kappa", kappa)?;
        ensure_non_negative("n_th", n_th)?;
        Ok(Self { omega, kappa, n_th })
    }

    /// Heating rate `n_th kappa`.
    pub fn kappa_up(&self) -> f64 {
        self.n_th * self.kappa
    }

    /// Cooling rate `(n_th + 1) kappa`.
    pub fn kappa_down(&self) -> f64 {
        (self.n_th + 1.0) * self.kappa
    }
}

/// Phonon-number probabilities `P_0 ..= P_{n_max}`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct NumberDistribution {
    p: Vec<f64>,
}

impl NumberDistribution {
    /// Validates non-negativity and normalisation to `1e-9`.
    pub fn new(p: Vec<f64>) -> Result<Self> {
        if p.is_empty() {
            return Err(invalid("distribution", "empty"));
        }
        if let Some(x) = p.iter().find(|x| !(x.is_finite() && **x >= 0.0)) {
            return Err(invalid("distribution", format!("entry {x} is not a probability")));
        }
        let total: f64 = p.iter().sum();
        if (total - 1.0).abs() > 1e-9 {
            return Err(invalid("distribution", format!("sums to {total}")));
        }
        Ok(Self { p })
    }

    /// Rescales non-negative weights to unit sum.
    pub fn normalized(mut w: Vec<f64>) -> Result<Self> {
        let total: f64 = w.iter().sum();
        if !(total.is_finite() && total > 0.0) {
            return Err(invalid("distribution", "weights do not normalise"));
        }
        w.iter_mut().for_each(|x| *x /= total);
        Self::new(w)
    }

    pub fn vacuum(n_max: usize) -> Self {
        let mut p = vec![0.0; n_max + 1];
        p[0] = 1.0;
        Self { p }
    }

    /// Geometric distribution with mean `n_th`, renormalised on `0..=n_max`.
    pub fn thermal(n_th: f64, n_max: usize) -> Result<Self> {
        ensure_non_negative("n_th", n_th)?;
        let x = n_th / (n_th + 1.0);
        Self::normalized((0..=n_max).map(|n| x.powi(n as i32)).collect())
    }

    pub fn poisson(mean: f64, n_max: usize) -> Result<Self> {
        ensure_non_negative("mean", mean)?;
        if mean == 0.0 {
            return Ok(Self::vacuum(n_max));
        }
        let ln_mean = mean.ln();
        let mut log_fact = 0.0;
        let logs: Vec<f64> = (0..=n_max)
            .map(|n| {
                if n > 0 {
                    log_fact += (n as f64).ln();
                }
                n as f64 * ln_mean - mean - log_fact
            })
            .collect();
        Self::normalized(from_logs(&logs))
    }

    pub fn probabilities(&self) -> &[f64] {
        &self.p
    }

    pub fn n_max(&self) -> usize {
        self.p.len() - 1
    }

    pub fn mean(&self) -> f64 {
        self.p.iter().enumerate().map(|(n, p)| n as f64 * p).sum()
    }

    pub fn second_moment(&self) -> f64 {
        self.p
            .iter()
            .enumerate()
            .map(|(n, p)| (n as f64) * (n as f64) * p)
            .sum()
    }

    pub fn variance(&self) -> f64 {
        let m = self.mean();
        self.p
            .iter()
            .enumerate()
            .map(|(n, p)| (n as f64 - m) * (n as f64 - m) * p)
            .sum()
    }

    /// Variance over mean; 1 for a Poisson distribution.
    pub fn fano(&self) -> f64 {
        self.variance() / self.mean()
    }

    pub fn tail(&self) -> f64 {
        self.p[self.p.len() - 1]
    }

    pub fn truncation_ok(&self) -> bool {
        self.tail() < TAIL_TOLERANCE
    }
}

/// `exp(l - max l)` for each entry; the caller normalises.
pub(crate) fn from_logs(logs: &[f64]) -> Vec<f64> {
    let top = logs.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    logs.iter().map(|l| (l - top).exp()).collect()
}
