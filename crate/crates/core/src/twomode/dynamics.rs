use serde::Serialize;

use super::moments::{phonon_stats, MomentState, STATE_LEN};
use super::rhs::rhs_flat;
use super::spectrum::dominant_frequency;
use super::{ModeLabel, TwoModeParams};
use crate::error::{ensure_positive, invalid, Result};
use crate::ode::{self, OdeOptions, OdeStats};

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct IntegrateOptions {
    /// Defaults to `50 / min(kappa)`.
    pub t_max: Option<f64>,
    pub sample_dt: f64,
    pub rtol: f64,
    pub atol: f64,
    /// Trailing fraction of the run averaged for the steady occupations.
    pub steady_fraction: f64,
    /// Trailing fraction of the run used for the frequency analysis.
    pub spectrum_fraction: f64,
    /// Relative tolerance on negative quadrature variances.
    pub variance_tol: f64,
    /// Allowed excursion of the atom outside the Bloch ball.
    pub bloch_tol: f64,
}

impl Default for IntegrateOptions {
    fn default() -> Self {
        Self {
            t_max: None,
            sample_dt: 0.1,
            rtol: 1e-8,
            atol: 1e-10,
            steady_fraction: 0.1,
            spectrum_fraction: 0.25,
            variance_tol: 1e-6,
            bloch_tol: 1e-3,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum LasingClass {
    BrLasing,
    ComLasing,
    BelowThreshold,
    /// Both modes above their lasing level; not expected in steady state.
    BothLasing,
}

impl LasingClass {
    pub fn as_str(self) -> &'static str {
        match self {
            LasingClass::BrLasing => "BR-lasing",
            LasingClass::ComLasing => "COM-lasing",
            LasingClass::BelowThreshold => "below-threshold",
            LasingClass::BothLasing => "both-lasing",
        }
    }

    pub fn classify(n: [f64; 2], params: &TwoModeParams) -> Self {
        let com = n[0] > lasing_level(params.com.n_th);
        let br = n[1] > lasing_level(params.br.n_th);
        match (com, br) {
            (true, true) => LasingClass::BothLasing,
            (true, false) => LasingClass::ComLasing,
            (false, true) => LasingClass::BrLasing,
            (false, false) => LasingClass::BelowThreshold,
        }
    }
}

/// Occupation above which a mode counts as lasing: ten times its thermal
/// level (with a floor of one phonon for a cold mode).
pub fn lasing_level(n_th: f64) -> f64 {
    10.0 * n_th.max(0.1)
}

#[derive(Debug, Clone, Serialize)]
pub struct TrajectoryRecord {
    pub times: Vec<f64>,
    /// Per mode, indexed by [`ModeLabel::index`].
    pub energy: [Vec<f64>; 2],
    pub mean_n: [Vec<f64>; 2],
    pub mean_x: [Vec<f64>; 2],
    pub sigma_z: Vec<f64>,
    pub steady_n: [f64; 2],
    pub steady_g2: [Option<f64>; 2],
    pub classification: LasingClass,
    pub dominant_frequency: [Option<f64>; 2],
    pub final_state: MomentState,
    #[serde(skip)]
    pub stats: OdeStats,
}

impl TrajectoryRecord {
    pub fn steady(&self, q: ModeLabel) -> f64 {
        self.steady_n[q.index()]
    }

    pub fn frequency(&self, q: ModeLabel) -> Option<f64> {
        self.dominant_frequency[q.index()]
    }

    /// Samples of `<X_q>` over the trailing `fraction` of the run.
    pub fn tail_of_x(&self, q: ModeLabel, fraction: f64) -> &[f64] {
        let x = &self.mean_x[q.index()];
        let keep = ((x.len() as f64 * fraction).round() as usize).clamp(1, x.len());
        &x[x.len() - keep..]
    }

    pub fn sample_dt(&self) -> f64 {
        if self.times.len() > 1 {
            self.times[1] - self.times[0]
        } else {
            0.0
        }
    }
}

/// Integrate the moment equations from `state0`, sampling every
/// `sample_dt`, and summarise the end of the run.
pub fn integrate(
    state0: &MomentState,
    params: &TwoModeParams,
    opts: &IntegrateOptions,
) -> Result<TrajectoryRecord> {
    let t_max = opts.t_max.unwrap_or_else(|| params.default_t_max());
    ensure_positive("t_max", t_max)?;
    ensure_positive("sample_dt", opts.sample_dt)?;
    for (name, f) in [
        ("steady_fraction", opts.steady_fraction),
        ("spectrum_fraction", opts.spectrum_fraction),
    ] {
        if !(f > 0.0 && f <= 1.0) {
            return Err(invalid(name, "must lie in (0, 1]"));
        }
    }
    let n_samples = (t_max / opts.sample_dt).round() as usize;
    if n_samples < 2 {
        return Err(invalid("sample_dt", "coarser than the whole run"));
    }
    let t0 = state0.t;
    let sample_times: Vec<f64> = (1..=n_samples)
        .map(|i| t0 + t_max * i as f64 / n_samples as f64)
        .collect();

    let mut times = Vec::with_capacity(n_samples + 1);
    let mut energy = [Vec::with_capacity(n_samples + 1), Vec::with_capacity(n_samples + 1)];
    let mut mean_n = energy.clone();
    let mut mean_x = energy.clone();
    let mut sigma_z = Vec::with_capacity(n_samples + 1);
    let mut record = |st: &MomentState| -> Result<()> {
        st.check_physical(opts.variance_tol, opts.bloch_tol)?;
        let stats = phonon_stats(st);
        times.push(st.t);
        for q in 0..2 {
            energy[q].push(st.modes[q].energy());
            mean_n[q].push(stats[q].mean_n);
            mean_x[q].push(st.modes[q].mean_x());
        }
        sigma_z.push(st.sigma_z);
        Ok(())
    };
    record(state0)?;

    let mut y = state0.to_vec();
    debug_assert_eq!(y.len(), STATE_LEN);
    let ode_opts = OdeOptions {
        rtol: opts.rtol,
        atol: opts.atol,
        ..OdeOptions::default()
    };
    let stats = ode::integrate(
        |_, y, dy| rhs_flat(params, y, dy),
        t0,
        &mut y,
        &sample_times,
        &ode_opts,
        |t, y| record(&MomentState::from_slice(t, y)),
    )?;
    let final_state = MomentState::from_slice(t0 + t_max, &y);

    let tail = ((times.len() as f64 * opts.steady_fraction).round() as usize).clamp(1, times.len());
    let avg = |v: &Vec<f64>| v[v.len() - tail..].iter().sum::<f64>() / tail as f64;
    let steady_n = [avg(&mean_n[0]), avg(&mean_n[1])];
    let fin = phonon_stats(&final_state);
    let steady_g2 = [fin[0].g2().ok(), fin[1].g2().ok()];
    let classification = LasingClass::classify(steady_n, params);

    let spec_len =
        ((times.len() as f64 * opts.spectrum_fraction).round() as usize).clamp(1, times.len());
    let dominant = |q: usize| {
        let x = &mean_x[q][mean_x[q].len() - spec_len..];
        dominant_frequency(x, opts.sample_dt).ok()
    };
    let dominant_frequency = [dominant(0), dominant(1)];

    Ok(TrajectoryRecord {
        times,
        energy,
        mean_n,
        mean_x,
        sigma_z,
        steady_n,
        steady_g2,
        classification,
        dominant_frequency,
        final_state,
        stats,
    })
}
