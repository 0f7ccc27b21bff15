//! The five pipelines behind the run kinds.

use std::time::Instant;

use rayon::prelude::*;
use serde_json::{json, Value as Json};

use phonon_forge_core::cavity::{
    decay_rates, default_center, exact_population_trace, revival_time, walled_cavity, ModeDecomposition,
    Partition, OSCILLATION_RESIDUAL, PRE_REVIVAL_FRACTION,
};
use phonon_forge_core::crystal::{build_coupling_matrix, CouplingMatrix, IonArraySpec};
use phonon_forge_core::singlemode::{
    auto_n_max, estimate_threshold, evolve_distribution, normalized_lineshape, stable_step, threshold_scan,
    CavityModeParams, DriveParams, NumberDistribution, SteadyStateReport,
};
use phonon_forge_core::twomode::{
    amplitude_spectrum, find_switch, init_state, integrate, phase_diagram, IntegrateOptions, LasingClass,
    ModeLabel, ModeParams, TwoModeParams,
};

use crate::cache::DecompositionCache;
use crate::config::{CavitySettings, Config, ConfigError, TwoModeSettings};
use crate::error::{CliError, Context};
use crate::output::{jnum, num, opt_num, Staging};

/// Wall-clock seconds per named stage, in execution order.
#[derive(Debug, Default)]
pub struct Timings(pub Vec<(String, f64)>);

impl Timings {
    pub fn stage<T>(&mut self, name: &str, f: impl FnOnce() -> T) -> T {
        let t0 = Instant::now();
        let out = f();
        self.0.push((name.to_string(), t0.elapsed().as_secs_f64()));
        out
    }

    pub fn to_json(&self) -> Json {
        Json::Array(
            self.0
                .iter()
                .map(|(name, s)| json!({ "stage": name, "seconds": s }))
                .collect(),
        )
    }
}

pub struct RunEnv<'a> {
    pub cfg: &'a Config,
    pub cache: &'a DecompositionCache,
    pub timings: Timings,
}

fn base_spec(cfg: &Config, n: usize) -> Result<IonArraySpec, CliError> {
    IonArraySpec::with_edge_trap(
        cfg.array.species,
        n,
        cfg.array.spacing,
        cfg.array.edge_trap.clone(),
        vec![],
    )
    .context(|| "array".into())
}

struct Built {
    a: CouplingMatrix,
    part: Partition,
    modes: ModeDecomposition,
}

fn build_cavity(
    cache: &DecompositionCache,
    base: &IonArraySpec,
    cav: &CavitySettings,
    walls: (usize, usize),
    tweezer: f64,
) -> Result<Built, CliError> {
    let n = base.n_ions();
    let center = cav.center.unwrap_or_else(|| default_center(n));
    let what = || format!("cavity (walls {}+{}, tweezer {tweezer:.6e} rad/s)", walls.0, walls.1);
    let (spec, part) = walled_cavity(base, center, cav.n_system, walls.0, walls.1, tweezer).context(what)?;
    let a = build_coupling_matrix(&spec);
    let modes = cache.get_or_compute(&spec, &part, &a).context(what)?;
    Ok(Built { a, part, modes })
}

pub fn cavity_design(env: &mut RunEnv, out: &mut Staging) -> Result<Json, CliError> {
    let cfg = env.cfg;
    let cav = cfg.need_cavity()?;
    let n = cfg.need_n_ions()?;
    let base = base_spec(cfg, n)?;
    let w0 = cfg.array.omega0;
    let cells: Vec<(usize, f64)> = cav
        .tweezers
        .iter()
        .flat_map(|&tw| cav.wall_thickness.iter().map(move |&w| (w, tw)))
        .collect();

    let cache = env.cache;
    let results = env.timings.stage("decompose", || {
        cells
            .par_iter()
            .map(|&(w, tw)| {
                let b = build_cavity(cache, &base, cav, (w, w), tw)?;
                let report = decay_rates(&b.modes, cav.window)
                    .context(|| format!("decay rates (wall thickness {w})"))?;
                Ok((w, tw, report))
            })
            .collect::<Result<Vec<_>, CliError>>()
    });
    let results = results?;

    let mut rows = Vec::new();
    let mut cell_json = Vec::new();
    for (w, tw, report) in &results {
        for (i, m) in report.modes.iter().enumerate() {
            rows.push(vec![
                w.to_string(),
                num(tw / w0),
                i.to_string(),
                num(m.omega),
                num(m.kappa),
                num(m.g2_bar),
                num(m.rho),
                num(m.window),
                m.samples.to_string(),
            ]);
        }
        cell_json.push(json!({
            "wall_thickness": w,
            "tweezer": jnum(tw / w0),
            "omega": report.modes.iter().map(|m| jnum(m.omega)).collect::<Vec<_>>(),
            "kappa": report.modes.iter().map(|m| jnum(m.kappa)).collect::<Vec<_>>(),
        }));
    }
    out.write_csv(
        "cavity_design.csv",
        &["wall_thickness", "tweezer", "mode", "omega", "kappa", "g2_bar", "rho", "window", "samples"],
        rows,
    )?;

    // Does every mode's kappa fall as the walls thicken, at each strength?
    let mut monotone = true;
    for &tw in &cav.tweezers {
        let mut series: Vec<_> = results.iter().filter(|r| r.1 == tw).collect();
        series.sort_by_key(|r| r.0);
        for pair in series.windows(2) {
            for (a, b) in pair[0].2.modes.iter().zip(&pair[1].2.modes) {
                monotone &= b.kappa <= a.kappa;
            }
        }
    }
    Ok(json!({
        "n_ions": n,
        "n_system": cav.n_system,
        "cells": cell_json,
        "kappa_monotone_in_wall_thickness": monotone,
    }))
}

pub fn decay_verify(env: &mut RunEnv, out: &mut Staging) -> Result<Json, CliError> {
    let cfg = env.cfg;
    let cav = cfg.need_cavity()?;
    let n = cfg.need_n_ions()?;
    let base = base_spec(cfg, n)?;
    let cache = env.cache;
    let built = env
        .timings
        .stage("decompose", || build_cavity(cache, &base, cav, (cav.wall_left, cav.wall_right), cav.tweezer))?;
    let report = decay_rates(&built.modes, cav.window).context(|| "decay rates".into())?;
    let inner = built.modes.cavity_modes();
    let selected: Vec<(usize, usize)> = match cav.verify.mode {
        Some(i) if i >= inner.len() => {
            return Err(ConfigError::new(
                "cavity.verify.mode",
                format!("the cavity has {} non-wall modes", inner.len()),
            )
            .into())
        }
        Some(i) => vec![(i, inner[i])],
        None => inner.iter().copied().enumerate().collect(),
    };
    let revival = revival_time(&built.part);
    let t_max = cav.verify.t_max.unwrap_or(PRE_REVIVAL_FRACTION * revival);
    let traces = env.timings.stage("exact evolution", || {
        selected
            .par_iter()
            .map(|&(i, q)| {
                exact_population_trace(&built.a, &built.part, q, t_max, cav.verify.samples)
                    .context(|| format!("exact evolution of mode {i}"))
                    .map(|tr| (i, q, tr))
            })
            .collect::<Result<Vec<_>, CliError>>()
    })?;

    let mut rows = Vec::new();
    let mut modes_json = Vec::new();
    for (i, q, tr) in &traces {
        let kappa = report.by_mode(*q).map(|m| m.kappa).unwrap_or(f64::NAN);
        for (t, p) in tr.times.iter().zip(&tr.population) {
            rows.push(vec![i.to_string(), num(*t), num(*p), num((-kappa * t).exp())]);
        }
        let log_rms = tr.log_rms_against(kappa);
        modes_json.push(json!({
            "mode": i,
            "omega": jnum(tr.omega),
            "kappa": jnum(kappa),
            "kappa_fit": jnum(tr.kappa_fit),
            "fit_residual": jnum(tr.fit_residual),
            "log_rms_residual": jnum(log_rms),
            "markovian": log_rms < OSCILLATION_RESIDUAL,
            "oscillating": tr.oscillating,
            "fit_end": jnum(tr.fit_end),
            "revival_estimate": jnum(tr.revival_estimate),
            "observed_revival": tr.observed_revival().map(jnum),
            "norm_drift": jnum(tr.norm_drift),
        }));
    }
    out.write_csv("decay_trace.csv", &["mode", "t", "population", "exp_kappa_t"], rows)?;
    Ok(json!({
        "n_ions": n,
        "t_max": jnum(t_max),
        "revival_time": jnum(revival),
        "residual_bound": OSCILLATION_RESIDUAL,
        "modes": modes_json,
    }))
}

pub fn single_mode(env: &mut RunEnv, out: &mut Staging) -> Result<Json, CliError> {
    let sm = env.cfg.need_singlemode()?;
    let mode = CavityModeParams::new(sm.omega, sm.kappa, sm.n_th).context(|| "single-mode parameters".into())?;
    let drive = DriveParams::new(1.0, 0.0, sm.delta_b, sm.gamma).context(|| "single-mode drive".into())?;

    let rows = env
        .timings
        .stage("scan", || threshold_scan(&drive, &mode, &sm.eta_omega))
        .context(|| "threshold scan".into())?;
    out.write_csv(
        "scan.csv",
        &["eta_omega", "s", "mean_n", "g2", "gain_over_kappa", "linewidth"],
        rows.iter().map(|r| {
            vec![
                num(r.eta_omega),
                num(r.s),
                num(r.mean_n),
                num(r.g2),
                num(r.gain_over_kappa),
                num(r.linewidth),
            ]
        }),
    )?;
    let threshold = match estimate_threshold(&rows, &drive, &mode) {
        Ok(t) => json!({
            "closed_form": jnum(t.closed_form),
            "small_signal": jnum(t.small_signal),
            "crossover": t.crossover.map(jnum),
        }),
        Err(e) => {
            log::warn!("threshold not estimated: {e}");
            json!({
                "closed_form": jnum(phonon_forge_core::singlemode::closed_form_threshold(&drive, &mode)),
                "small_signal": null,
                "crossover": null,
                "note": e.to_string(),
            })
        }
    };

    let reports = env.timings.stage("lineshape", || {
        sm.lineshape
            .par_iter()
            .map(|&x| {
                let d = drive.with_eta_omega(x)?;
                SteadyStateReport::compute(&d, &mode)
            })
            .collect::<Result<Vec<_>, _>>()
    });
    let reports = reports.context(|| "lineshape steady states".into())?;
    if !reports.is_empty() {
        let widest = reports.iter().map(|r| r.linewidth).fold(0.0, f64::max);
        let half = sm.lineshape_span * widest;
        let k = sm.lineshape_points;
        let nu: Vec<f64> = (0..k)
            .map(|i| sm.omega - half + 2.0 * half * i as f64 / (k - 1) as f64)
            .collect();
        let mut ls_rows = Vec::new();
        for r in &reports {
            let s = normalized_lineshape(&mode, r.linewidth, &nu);
            for (f, v) in nu.iter().zip(s) {
                ls_rows.push(vec![num(r.eta_omega), num(*f), num(v)]);
            }
        }
        out.write_csv("lineshape.csv", &["eta_omega", "nu", "S_normalized"], ls_rows)?;
    }

    let evolve = match &sm.evolve {
        None => Json::Null,
        Some(ev) => {
            let d = drive.with_eta_omega(ev.eta_omega).context(|| "evolve drive".into())?;
            let n_max = 2 * auto_n_max(&d, &mode);
            let start = NumberDistribution::thermal(mode.n_th, n_max).context(|| "thermal start".into())?;
            let t_max = ev.t_max_kappa / mode.kappa;
            let tr = env
                .timings
                .stage("evolve", || evolve_distribution(&start, &d, &mode, t_max, stable_step(&d, &mode)))
                .context(|| "rate-equation evolution".into())?;
            let stride = (tr.times.len() / ev.samples.max(1)).max(1);
            out.write_csv(
                "evolve.csv",
                &["t", "mean_n"],
                tr.times
                    .iter()
                    .zip(&tr.mean_n)
                    .step_by(stride)
                    .map(|(t, m)| vec![num(*t), num(*m)]),
            )?;
            json!({
                "eta_omega": jnum(ev.eta_omega),
                "n_max": n_max,
                "steady_mean": jnum(tr.steady_mean),
                "rise_time_90_kappa": tr.rise_time(0.9).map(|t| jnum(t * mode.kappa)),
                "rise_time_99_kappa": tr.rise_time(0.99).map(|t| jnum(t * mode.kappa)),
                "norm_error": jnum(tr.norm_error),
            })
        }
    };

    Ok(json!({
        "mode": { "omega": jnum(sm.omega), "kappa": jnum(sm.kappa), "n_th": jnum(sm.n_th) },
        "drive": { "gamma": jnum(sm.gamma), "delta_b": jnum(sm.delta_b) },
        "threshold": threshold,
        "steady_states": serde_json::to_value(&reports).expect("reports serialise"),
        "evolve": evolve,
    }))
}

fn two_mode_params(tm: &TwoModeSettings, eta_omega: f64) -> Result<TwoModeParams, CliError> {
    let (eta_c, eta_b) = TwoModeParams::scaled_eta(1.0, tm.omega_com, tm.omega_br);
    let ctx = || "two-mode parameters".to_string();
    let com = ModeParams::new(tm.omega_com, tm.kappa_com, tm.n_th_com, eta_c).context(ctx)?;
    let br = ModeParams::new(tm.omega_br, tm.kappa_br, tm.n_th_br, eta_b).context(ctx)?;
    TwoModeParams::new(com, br, eta_omega, tm.delta, tm.gamma, tm.driven_ion).context(ctx)
}

fn integrate_options(tm: &TwoModeSettings) -> IntegrateOptions {
    IntegrateOptions {
        t_max: tm.t_max,
        sample_dt: tm.sample_dt,
        rtol: tm.rtol,
        ..IntegrateOptions::default()
    }
}

pub fn two_mode(env: &mut RunEnv, out: &mut Staging) -> Result<Json, CliError> {
    let tm = env.cfg.need_twomode()?;
    let eta_omega = tm
        .eta_omega
        .ok_or_else(|| ConfigError::new("twomode.eta_omega", "missing required key"))?;
    let params = two_mode_params(tm, eta_omega)?;
    let opts = integrate_options(tm);
    let records = env.timings.stage("integrate", || {
        tm.initial
            .par_iter()
            .map(|&(ec, eb)| {
                init_state(ec, eb, &params)
                    .and_then(|st| integrate(&st, &params, &opts))
                    .context(|| format!("trajectory from E = ({ec}, {eb})"))
            })
            .collect::<Result<Vec<_>, CliError>>()
    })?;

    let mut summary = Vec::new();
    for (k, (tr, &(ec, eb))) in records.iter().zip(&tm.initial).enumerate() {
        out.write_csv(
            &format!("trajectory_{k:02}.csv"),
            &["t", "E_COM", "E_BR", "n_COM", "n_BR", "sigma_z"],
            (0..tr.times.len()).step_by(tm.record_every).map(|i| {
                vec![
                    num(tr.times[i]),
                    num(tr.energy[0][i]),
                    num(tr.energy[1][i]),
                    num(tr.mean_n[0][i]),
                    num(tr.mean_n[1][i]),
                    num(tr.sigma_z[i]),
                ]
            }),
        )?;
        let dt = tr.sample_dt();
        let mut spec_rows = Vec::new();
        let mut resolution = f64::NAN;
        for q in ModeLabel::BOTH {
            if let Ok(s) = amplitude_spectrum(tr.tail_of_x(q, opts.spectrum_fraction), dt) {
                resolution = s.resolution;
                for (f, a) in s.omega.iter().zip(&s.amplitude) {
                    spec_rows.push(vec![num(*f), num(*a), q.name().to_string()]);
                }
            }
        }
        out.write_csv(&format!("spectrum_{k:02}.csv"), &["freq", "amplitude", "mode"], spec_rows)?;
        let (fc, fb) = (tr.frequency(ModeLabel::Com), tr.frequency(ModeLabel::Br));
        let synchronized = match (fc, fb) {
            (Some(a), Some(b)) => Some((a - b).abs() <= resolution),
            _ => None,
        };
        summary.push(json!({
            "index": k,
            "initial": { "E_COM": ec, "E_BR": eb },
            "classification": tr.classification,
            "steady_n": { "COM": jnum(tr.steady_n[0]), "BR": jnum(tr.steady_n[1]) },
            "steady_g2": { "COM": tr.steady_g2[0].map(jnum), "BR": tr.steady_g2[1].map(jnum) },
            "dominant_frequency": { "COM": fc.map(jnum), "BR": fb.map(jnum) },
            "spectral_resolution": jnum(resolution),
            "synchronized": synchronized,
            "t_final": jnum(tr.final_state.t),
        }));
    }
    Ok(json!({
        "eta_omega": jnum(eta_omega),
        "trajectories": summary,
    }))
}

pub fn phase(env: &mut RunEnv, out: &mut Staging) -> Result<Json, CliError> {
    let tm = env.cfg.need_twomode()?;
    let ph = tm
        .phase
        .as_ref()
        .ok_or_else(|| ConfigError::new("twomode.phase", "missing required section"))?;
    let params = two_mode_params(tm, 0.0)?;
    let opts = integrate_options(tm);
    let diagram = env
        .timings
        .stage("sweep", || phase_diagram(&params, &ph.eta_omega, &ph.e_com0, ph.e_br0, &opts))
        .context(|| "phase diagram".into())?;

    out.write_csv(
        "phase.csv",
        &["eta_omega", "E_COM0", "n_COM_s", "n_BR_s", "class", "freq_COM", "freq_BR"],
        diagram.cells.iter().map(|c| {
            vec![
                num(c.eta_omega),
                num(c.e_com0),
                num(c.n_com),
                num(c.n_br),
                c.class.map(LasingClass::as_str).unwrap_or("failed").to_string(),
                opt_num(c.freq_com),
                opt_num(c.freq_br),
            ]
        }),
    )?;

    let failed: Vec<_> = diagram
        .cells
        .iter()
        .filter_map(|c| {
            c.error.as_ref().map(|e| json!({ "eta_omega": c.eta_omega, "E_COM0": c.e_com0, "error": e }))
        })
        .collect();
    if failed.len() == diagram.cells.len() {
        return Err(CliError::Physics {
            context: "phase diagram".into(),
            source: phonon_forge_core::Error::Integration {
                t: 0.0,
                reason: "every cell failed".into(),
            },
        });
    }
    let switches: Vec<Json> = (0..diagram.e_com0s.len())
        .map(|j| {
            let cut: Vec<_> = (0..diagram.eta_omegas.len()).map(|i| diagram.cell(i, j).clone()).collect();
            json!({ "E_COM0": diagram.e_com0s[j], "switch": find_switch(&cut) })
        })
        .collect();
    let mut counts = serde_json::Map::new();
    for c in &diagram.cells {
        let key = c.class.map(LasingClass::as_str).unwrap_or("failed");
        let slot = counts.entry(key).or_insert(json!(0));
        *slot = json!(slot.as_u64().unwrap_or(0) + 1);
    }
    Ok(json!({
        "E_BR0": ph.e_br0,
        "class_counts": counts,
        "switches": switches,
        "failed_cells": failed,
    }))
}
