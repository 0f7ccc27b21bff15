//! Adaptive Dormand-Prince 5(4) integrator for small dense systems.

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OdeOptions {
    pub rtol: f64,
    pub atol: f64,
    /// First trial step; picked from the initial derivative when `None`.
    pub h_init: Option<f64>,
    pub h_max: f64,
    pub max_steps: usize,
}

impl Default for OdeOptions {
    fn default() -> Self {
        Self {
            rtol: 1e-8,
            atol: 1e-10,
            h_init: None,
            h_max: f64::INFINITY,
            max_steps: 50_000_000,
        }
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct OdeStats {
    pub accepted: usize,
    pub rejected: usize,
    pub evaluations: usize,
}

const C2: f64 = 1.0 / 5.0;
const C3: f64 = 3.0 / 10.0;
const C4: f64 = 4.0 / 5.0;
const C5: f64 = 8.0 / 9.0;
const A21: f64 = 1.0 / 5.0;
const A31: f64 = 3.0 / 40.0;
const A32: f64 = 9.0 / 40.0;
const A41: f64 = 44.0 / 45.0;
const A42: f64 = -56.0 / 15.0;
const A43: f64 = 32.0 / 9.0;
const A51: f64 = 19372.0 / 6561.0;
const A52: f64 = -25360.0 / 2187.0;
const A53: f64 = 64448.0 / 6561.0;
const A54: f64 = -212.0 / 729.0;
const A61: f64 = 9017.0 / 3168.0;
const A62: f64 = -355.0 / 33.0;
const A63: f64 = 46732.0 / 5247.0;
const A64: f64 = 49.0 / 176.0;
const A65: f64 = -5103.0 / 18656.0;
const B1: f64 = 35.0 / 384.0;
const B3: f64 = 500.0 / 1113.0;
const B4: f64 = 125.0 / 192.0;
const B5: f64 = -2187.0 / 6784.0;
const B6: f64 = 11.0 / 84.0;
// Fifth- minus fourth-order weights.
const E1: f64 = 71.0 / 57600.0;
const E3: f64 = -71.0 / 16695.0;
const E4: f64 = 71.0 / 1920.0;
const E5: f64 = -17253.0 / 339200.0;
const E6: f64 = 22.0 / 525.0;
const E7: f64 = -1.0 / 40.0;

/// Integrate `dy/dt = f(t, y)` from `t0`, stopping exactly at each of the
/// ascending `sample_times` and handing the state to `on_sample`, which may
/// abort the run by returning an error. `y` holds the final state.
pub fn integrate<F, S>(
    mut f: F,
    t0: f64,
    y: &mut [f64],
    sample_times: &[f64],
    opts: &OdeOptions,
    mut on_sample: S,
) -> Result<OdeStats>
where
    F: FnMut(f64, &[f64], &mut [f64]),
    S: FnMut(f64, &[f64]) -> Result<()>,
{
    let n = y.len();
    let mut stats = OdeStats::default();
    let mut k: [Vec<f64>; 7] = std::array::from_fn(|_| vec![0.0; n]);
    let mut tmp = vec![0.0; n];
    let mut y_new = vec![0.0; n];
    let mut t = t0;

    f(t, y, &mut k[0]);
    stats.evaluations += 1;
    let mut h = match opts.h_init {
        Some(h) => h,
        None => initial_step(y, &k[0], opts),
    }
    .min(opts.h_max);
    let mut err_prev: f64 = 1e-4;

    for &target in sample_times {
        if target < t {
            return Err(Error::Integration {
                t,
                reason: format!("sample time {target} lies behind the current time"),
            });
        }
        while t < target {
            if stats.accepted + stats.rejected >= opts.max_steps {
                return Err(Error::Integration {
                    t,
                    reason: format!("exceeded {} steps", opts.max_steps),
                });
            }
            let remaining = target - t;
            let last = h >= remaining;
            let hs = if last { remaining } else { h };

            for i in 0..n {
                tmp[i] = y[i] + hs * A21 * k[0][i];
            }
            f(t + C2 * hs, &tmp, &mut k[1]);
            for i in 0..n {
                tmp[i] = y[i] + hs * (A31 * k[0][i] + A32 * k[1][i]);
            }
            f(t + C3 * hs, &tmp, &mut k[2]);
            for i in 0..n {
                tmp[i] = y[i] + hs * (A41 * k[0][i] + A42 * k[1][i] + A43 * k[2][i]);
            }
            f(t + C4 * hs, &tmp, &mut k[3]);
            for i in 0..n {
                tmp[i] = y[i]
                    + hs * (A51 * k[0][i] + A52 * k[1][i] + A53 * k[2][i] + A54 * k[3][i]);
            }
            f(t + C5 * hs, &tmp, &mut k[4]);
            for i in 0..n {
                tmp[i] = y[i]
                    + hs * (A61 * k[0][i]
                        + A62 * k[1][i]
                        + A63 * k[2][i]
                        + A64 * k[3][i]
                        + A65 * k[4][i]);
            }
            f(t + hs, &tmp, &mut k[5]);
            for i in 0..n {
                y_new[i] = y[i]
                    + hs * (B1 * k[0][i] + B3 * k[2][i] + B4 * k[3][i] + B5 * k[4][i] + B6 * k[5][i]);
            }
            f(t + hs, &y_new, &mut k[6]);
            stats.evaluations += 6;

            let mut acc = 0.0;
            for i in 0..n {
                let e = hs
                    * (E1 * k[0][i]
                        + E3 * k[2][i]
                        + E4 * k[3][i]
                        + E5 * k[4][i]
                        + E6 * k[5][i]
                        + E7 * k[6][i]);
                let sc = opts.atol + opts.rtol * y[i].abs().max(y_new[i].abs());
                acc += (e / sc) * (e / sc);
            }
            let err = (acc / n as f64).sqrt();
            if !err.is_finite() {
                return Err(Error::Integration {
                    t,
                    reason: "non-finite state".into(),
                });
            }

            if err <= 1.0 {
                t = if last { target } else { t + hs };
                y.copy_from_slice(&y_new);
                k.swap(0, 6);
                stats.accepted += 1;
                // PI step control.
                let fac = 0.9 * err.max(1e-10).powf(-0.7 / 5.0) * err_prev.powf(0.4 / 5.0);
                let grown = hs * fac.clamp(0.2, 10.0);
                // A step clipped to land on a sample says nothing about h.
                h = if last { h.max(grown) } else { grown }.min(opts.h_max);
                err_prev = err.max(1e-4);
            } else {
                stats.rejected += 1;
                h = hs * (0.9 * err.powf(-0.2)).max(0.2);
            }
            if h < 1e-14 * t.abs().max(1.0) {
                return Err(Error::Integration {
                    t,
                    reason: format!("step size underflow (h = {h:.3e})"),
                });
            }
        }
        on_sample(t, y)?;
    }
    Ok(stats)
}

fn initial_step(y: &[f64], dy: &[f64], opts: &OdeOptions) -> f64 {
    let n = y.len() as f64;
    let (mut d0, mut d1) = (0.0, 0.0);
    for (a, b) in y.iter().zip(dy) {
        let sc = opts.atol + opts.rtol * a.abs();
        d0 += (a / sc) * (a / sc);
        d1 += (b / sc) * (b / sc);
    }
    let (d0, d1) = ((d0 / n).sqrt(), (d1 / n).sqrt());
    if d0 < 1e-5 || d1 < 1e-5 {
        1e-6
    } else {
        0.01 * d0 / d1
    }
}
