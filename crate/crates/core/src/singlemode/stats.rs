use serde::Serialize;

use super::rates::gain;
use super::steady::{mean_n_steady, steady_state};
use super::{CavityModeParams, DriveParams, NumberDistribution};
use crate::error::{ensure_positive, Error, Result};

/// `(<n^2> - <n>) / <n>^2`.
pub fn g2_zero(dist: &NumberDistribution) -> Result<f64> {
    let m = dist.mean();
    if m <= 0.0 {
        return Err(Error::UndefinedCoherence);
    }
    Ok((dist.second_moment() - m) / (m * m))
}

/// `kappa n_th / <n> + (gamma / 2<n>) s / (1 + <n> s)`.
pub fn linewidth(drive: &DriveParams, mode: &CavityModeParams, mean_n: f64) -> Result<f64> {
    ensure_positive("mean_n", mean_n)?;
    let s = drive.saturation();
    Ok(mode.kappa * mode.n_th / mean_n + drive.gamma / (2.0 * mean_n) * s / (1.0 + mean_n * s))
}

/// Lorentzian `<n> / ((nu - omega)^2 + dnu^2 / 4)`.
pub fn lineshape(mode: &CavityModeParams, dnu: f64, mean_n: f64, nu: &[f64]) -> Vec<f64> {
    nu.iter()
        .map(|&v| mean_n / ((v - mode.omega).powi(2) + 0.25 * dnu * dnu))
        .collect()
}

/// Lineshape scaled to unit peak.
pub fn normalized_lineshape(mode: &CavityModeParams, dnu: f64, nu: &[f64]) -> Vec<f64> {
    nu.iter()
        .map(|&v| 1.0 / (1.0 + 4.0 * (v - mode.omega).powi(2) / (dnu * dnu)))
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SteadyStateReport {
    pub eta_omega: f64,
    pub saturation: f64,
    /// `sum n P_n` of the steady distribution.
    pub mean_n: f64,
    /// Root of the mean-field equation.
    pub mean_n_mean_field: f64,
    pub g2: f64,
    pub fano: f64,
    pub gain: f64,
    pub gain_over_kappa: f64,
    pub linewidth: f64,
    pub n_max: usize,
    pub tail: f64,
}

impl SteadyStateReport {
    pub fn compute(drive: &DriveParams, mode: &CavityModeParams) -> Result<Self> {
        let dist = steady_state(drive, mode)?;
        Self::from_distribution(&dist, drive, mode)
    }

    pub fn from_distribution(
        dist: &NumberDistribution,
        drive: &DriveParams,
        mode: &CavityModeParams,
    ) -> Result<Self> {
        let mean_n = dist.mean();
        let g = gain(dist, drive);
        Ok(Self {
            eta_omega: drive.eta_omega(),
            saturation: drive.saturation(),
            mean_n,
            mean_n_mean_field: mean_n_steady(drive, mode),
            g2: g2_zero(dist)?,
            fano: dist.fano(),
            gain: g,
            gain_over_kappa: g / mode.kappa,
            linewidth: linewidth(drive, mode, mean_n)?,
            n_max: dist.n_max(),
            tail: dist.tail(),
        })
    }
}
