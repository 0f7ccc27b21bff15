use rayon::prelude::*;
use serde::Serialize;

use super::stats::SteadyStateReport;
use super::{CavityModeParams, DriveParams};
use crate::error::{invalid, Result};

/// One row of a drive-strength sweep.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ScanRow {
    pub eta_omega: f64,
    pub s: f64,
    pub mean_n: f64,
    pub g2: f64,
    pub gain_over_kappa: f64,
    pub linewidth: f64,
}

impl From<&SteadyStateReport> for ScanRow {
    fn from(r: &SteadyStateReport) -> Self {
        Self {
            eta_omega: r.eta_omega,
            s: r.saturation,
            mean_n: r.mean_n,
            g2: r.g2,
            gain_over_kappa: r.gain_over_kappa,
            linewidth: r.linewidth,
        }
    }
}

/// Steady state at each `eta * Omega`, keeping the detuning and linewidth
/// of `drive`. Rows come back in input order.
pub fn threshold_scan(
    drive: &DriveParams,
    mode: &CavityModeParams,
    eta_omegas: &[f64],
) -> Result<Vec<ScanRow>> {
    eta_omegas
        .par_iter()
        .map(|&x| {
            let d = drive.with_eta_omega(x)?;
            SteadyStateReport::compute(&d, mode).map(|r| ScanRow::from(&r))
        })
        .collect()
}

/// `eta Omega` at which the pump into the empty mode, `gamma s / 2`,
/// equals `kappa`.
pub fn closed_form_threshold(drive: &DriveParams, mode: &CavityModeParams) -> f64 {
    let d2 = drive.delta_b * drive.delta_b + 0.25 * drive.gamma * drive.gamma;
    (mode.kappa * d2 / drive.gamma).sqrt()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ThresholdEstimate {
    pub closed_form: f64,
    /// Where the unsaturated (below-threshold) gain, extrapolated as
    /// `G / kappa ~ (eta Omega)^2`, meets the loss.
    pub small_signal: f64,
    /// Where `<n>` crosses ten times the thermal level.
    pub crossover: Option<f64>,
}

/// Read the threshold off a sweep. Needs at least one row with
/// `0.05 < G/kappa < 0.5`.
pub fn estimate_threshold(
    rows: &[ScanRow],
    drive: &DriveParams,
    mode: &CavityModeParams,
) -> Result<ThresholdEstimate> {
    let mut ext: Vec<f64> = rows
        .iter()
        .filter(|r| r.gain_over_kappa > 0.05 && r.gain_over_kappa < 0.5)
        .map(|r| r.eta_omega / r.gain_over_kappa.sqrt())
        .collect();
    if ext.is_empty() {
        return Err(invalid(
            "eta_omega grid",
            "no point in the unsaturated-gain region 0.05 < G/kappa < 0.5",
        ));
    }
    ext.sort_by(f64::total_cmp);
    let small_signal = ext[ext.len() / 2];

    let level = 10.0 * mode.n_th.max(1.0);
    let crossover = rows.windows(2).find_map(|w| {
        let (a, b) = (&w[0], &w[1]);
        (a.mean_n < level && b.mean_n >= level).then(|| {
            a.eta_omega + (b.eta_omega - a.eta_omega) * (level - a.mean_n) / (b.mean_n - a.mean_n)
        })
    });
    Ok(ThresholdEstimate {
        closed_form: closed_form_threshold(drive, mode),
        small_signal,
        crossover,
    })
}
