use num_complex::Complex64;
use serde::Serialize;

use super::decompose::cavity_block;
use super::partition::Partition;
use crate::crystal::CouplingMatrix;
use crate::error::{ensure_positive, invalid, Error, Result};
use crate::linalg::symmetric_eigen;

/// Largest array the exact trace accepts.
pub const MAX_EXACT_IONS: usize = 5000;
/// Default `c` in `t_rev = c N_B`.
pub const DEFAULT_REVIVAL_CALIBRATION: f64 = 1.0;
/// Points below this population are left out of the fit.
pub const FIT_FLOOR: f64 = 1e-3;
/// Fraction of the revival time usable for fitting.
pub const PRE_REVIVAL_FRACTION: f64 = 0.8;
/// Log-residual above which the decay is called oscillatory.
pub const OSCILLATION_RESIDUAL: f64 = 0.2;

/// Estimated time for emitted waves to cross the bath and come back.
pub fn revival_time(part: &Partition) -> f64 {
    revival_time_with(part, DEFAULT_REVIVAL_CALIBRATION)
}

pub fn revival_time_with(part: &Partition, calibration: f64) -> f64 {
    calibration * part.n_bath() as f64
}

#[derive(Debug, Clone, Serialize)]
pub struct EvolutionTrace {
    pub mode: usize,
    pub omega: f64,
    pub times: Vec<f64>,
    pub population: Vec<f64>,
    pub kappa_fit: f64,
    pub fit_intercept: f64,
    pub fit_residual: f64,
    pub fit_end: f64,
    pub fit_points: usize,
    pub revival_estimate: f64,
    /// True when `t_max` ran past the pre-revival window.
    pub restricted: bool,
    pub oscillating: bool,
    /// Largest relative change of the conserved mode energy at checkpoints.
    pub norm_drift: f64,
}

impl EvolutionTrace {
    fn fit_mask(&self) -> impl Iterator<Item = (f64, f64)> + '_ {
        self.times
            .iter()
            .zip(&self.population)
            .filter(move |(t, p)| **t <= self.fit_end && **p >= FIT_FLOOR)
            .map(|(t, p)| (*t, *p))
    }

    /// RMS of `ln p(t) + kappa t` over the fit window.
    pub fn log_rms_against(&self, kappa: f64) -> f64 {
        let (mut sum, mut n) = (0.0, 0usize);
        for (t, p) in self.fit_mask() {
            let r = p.ln() + kappa * t;
            sum += r * r;
            n += 1;
        }
        if n == 0 {
            f64::INFINITY
        } else {
            (sum / n as f64).sqrt()
        }
    }

    /// First time the population climbs back to ten times its running
    /// minimum, having first dropped below 10%.
    pub fn observed_revival(&self) -> Option<f64> {
        let mut low = f64::INFINITY;
        for (&t, &p) in self.times.iter().zip(&self.population) {
            if low < 0.1 && p >= 10.0 * low {
                return Some(t);
            }
            low = low.min(p);
        }
        None
    }
}

fn least_squares(points: &[(f64, f64)]) -> (f64, f64, f64) {
    let n = points.len() as f64;
    let mt = points.iter().map(|p| p.0).sum::<f64>() / n;
    let my = points.iter().map(|p| p.1).sum::<f64>() / n;
    let sxy: f64 = points.iter().map(|p| (p.0 - mt) * (p.1 - my)).sum();
    let sxx: f64 = points.iter().map(|p| (p.0 - mt) * (p.0 - mt)).sum();
    let slope = if sxx > 0.0 { sxy / sxx } else { 0.0 };
    let intercept = my - slope * mt;
    let rss: f64 = points
        .iter()
        .map(|p| {
            let r = p.1 - intercept - slope * p.0;
            r * r
        })
        .sum();
    (slope, intercept, (rss / n).sqrt())
}

/// Put a unit excitation into cavity-part mode `mode`, evolve the whole
/// array exactly (no rotating-wave approximation) and record the population
/// `|c_q(t)|^2` on `n_samples` uniform times in `[0, t_max]`.
pub fn exact_population_trace(
    a: &CouplingMatrix,
    part: &Partition,
    mode: usize,
    t_max: f64,
    n_samples: usize,
) -> Result<EvolutionTrace> {
    ensure_positive("t_max", t_max)?;
    if n_samples < 2 {
        return Err(invalid("n_samples", "need at least two samples"));
    }
    if a.n() > MAX_EXACT_IONS {
        return Err(invalid(
            "n_ions",
            format!("{} ions exceeds the exact-trace limit of {MAX_EXACT_IONS}", a.n()),
        ));
    }
    let cav = cavity_block(a, part)?;
    if mode >= cav.omega.len() {
        return Err(invalid("mode", format!("cavity part has {} modes", cav.omega.len())));
    }
    if cav.wall_mode[mode] {
        return Err(invalid("mode", format!("mode {mode} is a wall mode")));
    }
    let omega_q = cav.omega[mode];
    let (vals, v) = symmetric_eigen(a.as_mat().as_ref())?;
    if vals[0] <= 0.0 {
        return Err(Error::Eigen(format!(
            "array has a non-positive eigenvalue {:.3e}; exact evolution needs a pinned array",
            vals[0]
        )));
    }
    let big: Vec<f64> = vals.iter().map(|l| l.sqrt()).collect();
    let n = a.n();
    let sites = part.cavity_sites();

    // z(0) = sqrt(2/omega_q) u_q on the cavity sites, p(0) = 0.
    let amp = (2.0 / omega_q).sqrt();
    // w_m = <u_q | V_m> restricted to the cavity: both the initial overlap
    // and the read-out projection.
    let w: Vec<f64> = (0..n)
        .map(|m| {
            sites
                .iter()
                .enumerate()
                .map(|(k, &s)| cav.u[(k, mode)] * v[(s, m)])
                .sum()
        })
        .collect();
    let zeta0: Vec<f64> = w.iter().map(|x| amp * x).collect();

    let times: Vec<f64> = (0..n_samples)
        .map(|i| t_max * i as f64 / (n_samples - 1) as f64)
        .collect();
    let a_pos = (0.5 * omega_q).sqrt();
    let a_mom = 1.0 / (2.0 * omega_q).sqrt();
    let population: Vec<f64> = times
        .iter()
        .map(|&t| {
            let mut c = Complex64::new(0.0, 0.0);
            for m in 0..n {
                let (s, co) = (big[m] * t).sin_cos();
                let z = zeta0[m] * co;
                let p = -zeta0[m] * big[m] * s;
                c += Complex64::new(w[m] * a_pos * z, w[m] * a_mom * p);
            }
            c.norm_sqr()
        })
        .collect();

    // Conserved sum_m (Omega_m zeta_m^2 + pi_m^2 / Omega_m) / 2, evaluated
    // after a round trip through real space.
    let energy = |t: f64| -> f64 {
        let mut z = vec![0.0; n];
        let mut p = vec![0.0; n];
        for m in 0..n {
            let (s, co) = (big[m] * t).sin_cos();
            let (zm, pm) = (zeta0[m] * co, -zeta0[m] * big[m] * s);
            for i in 0..n {
                z[i] += v[(i, m)] * zm;
                p[i] += v[(i, m)] * pm;
            }
        }
        (0..n)
            .map(|m| {
                let zm: f64 = (0..n).map(|i| v[(i, m)] * z[i]).sum();
                let pm: f64 = (0..n).map(|i| v[(i, m)] * p[i]).sum();
                0.5 * (big[m] * zm * zm + pm * pm / big[m])
            })
            .sum()
    };
    let e0: f64 = (0..n).map(|m| 0.5 * big[m] * zeta0[m] * zeta0[m]).sum();
    let norm_drift = [0.25, 0.5, 1.0]
        .iter()
        .map(|f| ((energy(f * t_max) - e0) / e0).abs())
        .fold(0.0, f64::max);

    let revival_estimate = revival_time(part);
    let pre_revival = PRE_REVIVAL_FRACTION * revival_estimate;
    let restricted = t_max > pre_revival;
    if restricted {
        log::warn!(
            "t_max = {t_max:.1} runs past the pre-revival window; fitting only t <= {pre_revival:.1}"
        );
    }
    let fit_end = t_max.min(pre_revival);
    let pts: Vec<(f64, f64)> = times
        .iter()
        .zip(&population)
        .filter(|(t, p)| **t <= fit_end && **p >= FIT_FLOOR)
        .map(|(t, p)| (*t, p.ln()))
        .collect();
    let (slope, fit_intercept, fit_residual) = if pts.len() >= 2 {
        least_squares(&pts)
    } else {
        (0.0, 0.0, f64::INFINITY)
    };

    Ok(EvolutionTrace {
        mode,
        omega: omega_q,
        times,
        population,
        kappa_fit: -slope,
        fit_intercept,
        fit_residual,
        fit_end,
        fit_points: pts.len(),
        revival_estimate,
        restricted,
        oscillating: fit_residual > OSCILLATION_RESIDUAL,
        norm_drift,
    })
}
