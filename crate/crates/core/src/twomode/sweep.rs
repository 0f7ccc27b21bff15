use rayon::prelude::*;
use serde::Serialize;

use super::dynamics::{integrate, IntegrateOptions, LasingClass};
use super::moments::init_state;
use super::{ModeLabel, TwoModeParams};
use crate::error::{invalid, Result};
use crate::singlemode::{
    closed_form_threshold, estimate_threshold, threshold_scan, CavityModeParams, DriveParams,
};

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PhaseCell {
    pub eta_omega: f64,
    pub e_com0: f64,
    pub e_br0: f64,
    pub n_com: f64,
    pub n_br: f64,
    pub class: Option<LasingClass>,
    pub freq_com: Option<f64>,
    pub freq_br: Option<f64>,
    /// Set when this cell's integration failed; the sweep carries on.
    pub error: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PhaseDiagram {
    pub eta_omegas: Vec<f64>,
    pub e_com0s: Vec<f64>,
    pub e_br0: f64,
    /// Row-major with `eta_omega` as the slow index.
    pub cells: Vec<PhaseCell>,
}

impl PhaseDiagram {
    pub fn cell(&self, i_eta: usize, i_e: usize) -> &PhaseCell {
        &self.cells[i_eta * self.e_com0s.len() + i_e]
    }
}

fn run_cell(
    params: &TwoModeParams,
    eta_omega: f64,
    e_com0: f64,
    e_br0: f64,
    opts: &IntegrateOptions,
) -> PhaseCell {
    let p = params.with_eta_omega(eta_omega);
    let result = init_state(e_com0, e_br0, &p).and_then(|st| integrate(&st, &p, opts));
    match result {
        Ok(tr) => PhaseCell {
            eta_omega,
            e_com0,
            e_br0,
            n_com: tr.steady_n[0],
            n_br: tr.steady_n[1],
            class: Some(tr.classification),
            freq_com: tr.dominant_frequency[0],
            freq_br: tr.dominant_frequency[1],
            error: None,
        },
        Err(e) => {
            log::warn!("cell eta_omega = {eta_omega}, E_COM(0) = {e_com0} failed: {e}");
            PhaseCell {
                eta_omega,
                e_com0,
                e_br0,
                n_com: f64::NAN,
                n_br: f64::NAN,
                class: None,
                freq_com: None,
                freq_br: None,
                error: Some(e.to_string()),
            }
        }
    }
}

/// One trajectory per `(eta_omega, E_COM(0))` cell at fixed `E_BR(0)`.
/// Cells run in parallel on the current rayon pool.
pub fn phase_diagram(
    params: &TwoModeParams,
    eta_omegas: &[f64],
    e_com0s: &[f64],
    e_br0: f64,
    opts: &IntegrateOptions,
) -> Result<PhaseDiagram> {
    if eta_omegas.is_empty() || e_com0s.is_empty() {
        return Err(invalid("grid", "phase-diagram grids must be non-empty"));
    }
    let ne = e_com0s.len();
    let cells = (0..eta_omegas.len() * ne)
        .into_par_iter()
        .map(|i| run_cell(params, eta_omegas[i / ne], e_com0s[i % ne], e_br0, opts))
        .collect();
    Ok(PhaseDiagram {
        eta_omegas: eta_omegas.to_vec(),
        e_com0s: e_com0s.to_vec(),
        e_br0,
        cells,
    })
}

/// Phase diagram restricted to a single `E_COM(0)`.
pub fn line_cut(
    params: &TwoModeParams,
    eta_omegas: &[f64],
    e_com0: f64,
    e_br0: f64,
    opts: &IntegrateOptions,
) -> Result<Vec<PhaseCell>> {
    Ok(phase_diagram(params, eta_omegas, &[e_com0], e_br0, opts)?.cells)
}

/// Adjacent pair of cut points where the lasing mode changes from BR to COM.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Switch {
    pub below: f64,
    pub above: f64,
    pub location: f64,
    /// `n_BR` just below divided by `n_BR` just above.
    pub br_drop: f64,
    pub com_rise: f64,
}

pub fn find_switch(cut: &[PhaseCell]) -> Option<Switch> {
    cut.windows(2).find_map(|w| {
        let (a, b) = (&w[0], &w[1]);
        (a.class == Some(LasingClass::BrLasing) && b.class == Some(LasingClass::ComLasing)).then(
            || Switch {
                below: a.eta_omega,
                above: b.eta_omega,
                location: 0.5 * (a.eta_omega + b.eta_omega),
                br_drop: a.n_br / b.n_br,
                com_rise: b.n_com / a.n_com,
            },
        )
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ConsistencyReport {
    pub mode: ModeLabel,
    /// Single-mode closed form, on the `eta_COM Omega` axis.
    pub closed_form: f64,
    /// Small-signal threshold read off a single-mode steady-state scan.
    pub single_mode_scan: f64,
    /// Zero of the small-signal energy growth rate of the moment equations.
    pub moment_onset: f64,
    /// `(eta_omega, growth rate of E_q)` samples behind `moment_onset`.
    pub growth: Vec<(f64, f64)>,
}

fn energy_growth_rate(params: &TwoModeParams, q: ModeLabel) -> Result<f64> {
    let mode = params.mode(q);
    let (e_com, e_br) = match q {
        ModeLabel::Com => (1e-4, 0.0),
        ModeLabel::Br => (0.0, 1e-4),
    };
    let st = init_state(e_com, e_br, params)?;
    let span = 2.0 / mode.kappa;
    let opts = IntegrateOptions {
        t_max: Some(span),
        sample_dt: 0.1,
        ..IntegrateOptions::default()
    };
    let tr = integrate(&st, params, &opts)?;
    let start = 5.0;
    let pts: Vec<(f64, f64)> = tr
        .times
        .iter()
        .zip(&tr.energy[q.index()])
        .filter(|(t, e)| **t >= start && **e > 0.0)
        .map(|(t, e)| (*t, e.ln()))
        .collect();
    Ok(slope(&pts))
}

fn slope(pts: &[(f64, f64)]) -> f64 {
    let n = pts.len() as f64;
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / n;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / n;
    let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let sxx: f64 = pts.iter().map(|p| (p.0 - mx).powi(2)).sum();
    sxy / sxx
}

/// Compare the lasing onset of mode `q` alone (the other mode decoupled)
/// between the moment equations and the single-mode rate equations.
pub fn single_mode_consistency(params: &TwoModeParams, q: ModeLabel) -> Result<ConsistencyReport> {
    let p = params.only(q);
    let m = p.mode(q);
    if m.eta <= 0.0 {
        return Err(invalid("eta", format!("{} mode is not coupled", q.name())));
    }
    // Results are quoted on the eta_COM Omega axis.
    let axis_eta = if params.com.eta > 0.0 { params.com.eta } else { m.eta };
    let drive = DriveParams::new(m.eta, 0.0, p.delta - m.omega, p.gamma)?;
    let cavity = CavityModeParams::new(m.omega, m.kappa, m.n_th)?;
    let x_q = closed_form_threshold(&drive, &cavity);
    let rabi_c = x_q / m.eta;

    let grid: Vec<f64> = (1..=30).map(|i| x_q * 0.05 * i as f64).collect();
    let rows = threshold_scan(&drive, &cavity, &grid)?;
    let scan = estimate_threshold(&rows, &drive, &cavity)?;

    let growth = [0.6, 0.8, 1.0, 1.2, 1.4]
        .par_iter()
        .map(|f| {
            let mut pf = p;
            pf.rabi = f * rabi_c;
            energy_growth_rate(&pf, q).map(|r| (axis_eta * pf.rabi, r))
        })
        .collect::<Result<Vec<_>>>()?;
    let fit: Vec<(f64, f64)> = growth.iter().map(|(x, r)| (x * x, *r)).collect();
    let b = slope(&fit);
    let mx = fit.iter().map(|p| p.0).sum::<f64>() / fit.len() as f64;
    let my = fit.iter().map(|p| p.1).sum::<f64>() / fit.len() as f64;
    let a = my - b * mx;
    let moment_onset = if b > 0.0 && a < 0.0 {
        (-a / b).sqrt()
    } else {
        f64::NAN
    };
    Ok(ConsistencyReport {
        mode: q,
        closed_form: axis_eta * rabi_c,
        single_mode_scan: axis_eta * scan.small_signal / m.eta,
        moment_onset,
        growth,
    })
}
