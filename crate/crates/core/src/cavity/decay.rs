use std::f64::consts::PI;

use serde::Serialize;

use super::decompose::ModeDecomposition;
use super::dos::{default_window, BathDos};
use crate::error::{Error, Result};

/// Bath levels that must fall inside the averaging window of each mode.
pub const MIN_WINDOW_SAMPLES: usize = 10;

/// Golden-rule rate of one non-wall cavity mode.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ModeDecay {
    pub mode: usize,
    pub omega: f64,
    pub kappa: f64,
    pub g2_bar: f64,
    pub rho: f64,
    pub window: f64,
    pub samples: usize,
    pub in_band: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DecayReport {
    pub modes: Vec<ModeDecay>,
}

impl DecayReport {
    pub fn kappas(&self) -> Vec<f64> {
        self.modes.iter().map(|m| m.kappa).collect()
    }

    pub fn by_mode(&self, mode: usize) -> Option<&ModeDecay> {
        self.modes.iter().find(|m| m.mode == mode)
    }
}

/// Smallest window holding `count` levels strictly within half of it.
fn window_for_count(sorted: &[f64], omega: f64, count: usize) -> f64 {
    let mut d: Vec<f64> = sorted.iter().map(|f| (f - omega).abs()).collect();
    let k = count.min(d.len()) - 1;
    d.select_nth_unstable_by(k, f64::total_cmp);
    2.0 * d[k] * (1.0 + 1e-9) + f64::EPSILON
}

/// `kappa_q = 2 pi <|g_qk|^2> rho_B(omega_q)` for every non-wall cavity mode,
/// with the average taken over `|omega_k - omega_q| < window / 2`.
///
/// With `window = None` the default `max(10 spacings, 0.02)` is used and
/// widened per mode until it holds [`MIN_WINDOW_SAMPLES`] levels. An explicit
/// window that is too sparse is an error.
pub fn decay_rates(modes: &ModeDecomposition, window: Option<f64>) -> Result<DecayReport> {
    let mut sorted = modes.omega_bath.clone();
    sorted.sort_by(f64::total_cmp);
    let (lo, hi) = (sorted[0], sorted[sorted.len() - 1]);
    let base = window.unwrap_or_else(|| default_window(&sorted));
    // Validates bath size and the spacing bound once.
    BathDos::new(&sorted, base)?;

    let mut out = Vec::new();
    for q in modes.cavity_modes() {
        let omega = modes.omega_cavity[q];
        if !(lo..=hi).contains(&omega) {
            out.push(ModeDecay {
                mode: q,
                omega,
                kappa: 0.0,
                g2_bar: 0.0,
                rho: 0.0,
                window: base,
                samples: 0,
                in_band: false,
            });
            continue;
        }
        let w = match window {
            Some(w) => w,
            None => base.max(window_for_count(&sorted, omega, MIN_WINDOW_SAMPLES)),
        };
        let half = 0.5 * w;
        let (mut sum, mut samples) = (0.0, 0usize);
        for (k, &f) in modes.omega_bath.iter().enumerate() {
            if (f - omega).abs() < half {
                let g = modes.coupling[(q, k)];
                sum += g * g;
                samples += 1;
            }
        }
        if samples < MIN_WINDOW_SAMPLES {
            return Err(Error::SparseWindow {
                omega,
                window: w,
                found: samples,
                required: MIN_WINDOW_SAMPLES,
            });
        }
        if w > base {
            log::info!("mode {q}: averaging window widened to {w:.4} to hold {samples} bath levels");
        }
        let g2_bar = sum / samples as f64;
        let rho = BathDos::new(&sorted, w)?.density(omega);
        out.push(ModeDecay {
            mode: q,
            omega,
            kappa: 2.0 * PI * g2_bar * rho,
            g2_bar,
            rho,
            window: w,
            samples,
            in_band: true,
        });
    }
    Ok(DecayReport { modes: out })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::cavity::decompose::decompose;
    use crate::cavity::partition::Partition;
    use crate::crystal::CouplingMatrix;

    fn setup(n: usize, n_s: usize, w: usize, nu_ot: f64) -> ModeDecomposition {
        let nc = n_s + 2 * w;
        let part = Partition::from_layout(n, ((n - nc) / 2) as isize, n_s, w, w).unwrap();
        let mut on_site = vec![0.0; n];
        for s in part.wall_sites() {
            on_site[s] = nu_ot * nu_ot;
        }
        decompose(&CouplingMatrix::uniform_chain(n, &on_site), &part).unwrap()
    }

    #[test]
    fn report_stores_its_own_factors() {
        let d = setup(600, 2, 1, 5.0);
        let r = decay_rates(&d, None).unwrap();
        assert_eq!(r.modes.len(), 2);
        for m in &r.modes {
            assert!(m.in_band && m.kappa > 0.0);
            assert_eq!(m.kappa, 2.0 * PI * m.g2_bar * m.rho);
            assert!(m.samples >= MIN_WINDOW_SAMPLES);
        }
    }

    #[test]
    fn explicit_sparse_window_is_an_error() {
        let d = setup(600, 1, 2, 5.0);
        let spacing = default_window(&d.omega_bath) / 10.0;
        assert!(matches!(
            decay_rates(&d, Some(2.0 * spacing)),
            Err(Error::SparseWindow { .. }) | Err(Error::WindowTooNarrow { .. })
        ));
    }

    #[test]
    fn thicker_walls_leak_less() {
        let k: Vec<f64> = (1..=3)
            .map(|w| decay_rates(&setup(800, 1, w, 4.7), None).unwrap().modes[0].kappa)
            .collect();
        assert!(k[0] > k[1] && k[1] > k[2], "{k:?}");
    }
}
