use num_complex::Complex64;
use serde::Serialize;

use super::{ModeLabel, TwoModeParams};
use crate::error::{ensure_non_negative, Error, Result};

pub const MAX_ORDER: usize = 4;
/// `(n, m)` pairs with `1 <= n + m <= 4`.
pub const MOMENTS_PER_MODE: usize = 14;
/// Real length of the flattened state: two modes of complex moments, the
/// complex `<sigma^->` and the real `<sigma_z>`.
pub const STATE_LEN: usize = 4 * MOMENTS_PER_MODE + 3;

/// Slot of `<P^n X^m>` in a mode's moment array, grouped by order.
pub const fn moment_index(n: usize, m: usize) -> usize {
    let k = n + m;
    (k - 1) * (k + 2) / 2 + n
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ModeMoments {
    m: [Complex64; MOMENTS_PER_MODE],
}

impl ModeMoments {
    pub fn zeros() -> Self {
        Self {
            m: [Complex64::new(0.0, 0.0); MOMENTS_PER_MODE],
        }
    }

    /// `<P^n X^m>`; `<1> = 1` and anything outside the tracked range is 0.
    #[inline]
    pub fn get(&self, n: isize, m: isize) -> Complex64 {
        if n < 0 || m < 0 {
            return Complex64::new(0.0, 0.0);
        }
        let (n, m) = (n as usize, m as usize);
        match n + m {
            0 => Complex64::new(1.0, 0.0),
            k if k > MAX_ORDER => Complex64::new(0.0, 0.0),
            _ => self.m[moment_index(n, m)],
        }
    }

    pub fn set(&mut self, n: usize, m: usize, value: Complex64) {
        self.m[moment_index(n, m)] = value;
    }

    pub fn as_array(&self) -> &[Complex64; MOMENTS_PER_MODE] {
        &self.m
    }

    pub fn mean_x(&self) -> f64 {
        self.get(0, 1).re
    }

    pub fn mean_p(&self) -> f64 {
        self.get(1, 0).re
    }

    /// Classical energy `(<X>^2 + <P>^2) / 2`.
    pub fn energy(&self) -> f64 {
        0.5 * (self.mean_x().powi(2) + self.mean_p().powi(2))
    }

    pub fn var_x(&self) -> f64 {
        self.get(0, 2).re - self.mean_x().powi(2)
    }

    pub fn var_p(&self) -> f64 {
        self.get(2, 0).re - self.mean_p().powi(2)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct MomentState {
    pub t: f64,
    /// Indexed by [`ModeLabel::index`].
    pub modes: [ModeMoments; 2],
    pub sigma_minus: Complex64,
    pub sigma_z: f64,
}

impl MomentState {
    pub fn mode(&self, q: ModeLabel) -> &ModeMoments {
        &self.modes[q.index()]
    }

    pub fn to_vec(&self) -> Vec<f64> {
        let mut y = Vec::with_capacity(STATE_LEN);
        for mode in &self.modes {
            for c in &mode.m {
                y.push(c.re);
                y.push(c.im);
            }
        }
        y.push(self.sigma_minus.re);
        y.push(self.sigma_minus.im);
        y.push(self.sigma_z);
        y
    }

    pub fn from_slice(t: f64, y: &[f64]) -> Self {
        assert_eq!(y.len(), STATE_LEN);
        let mut modes = [ModeMoments::zeros(); 2];
        for (q, mode) in modes.iter_mut().enumerate() {
            let base = 2 * MOMENTS_PER_MODE * q;
            for i in 0..MOMENTS_PER_MODE {
                mode.m[i] = Complex64::new(y[base + 2 * i], y[base + 2 * i + 1]);
            }
        }
        let a = 4 * MOMENTS_PER_MODE;
        Self {
            t,
            modes,
            sigma_minus: Complex64::new(y[a], y[a + 1]),
            sigma_z: y[a + 2],
        }
    }

    /// `|<sigma^->|^2 + <sigma_z>^2 / 4`, at most `1/4` for a physical spin.
    pub fn bloch_radius_sq(&self) -> f64 {
        self.sigma_minus.norm_sqr() + 0.25 * self.sigma_z * self.sigma_z
    }

    /// Closure-breakdown check: non-negative quadrature variances (to a
    /// relative `tol`) and a Bloch vector inside the ball (to `bloch_tol`).
    pub fn check_physical(&self, tol: f64, bloch_tol: f64) -> Result<()> {
        for q in ModeLabel::BOTH {
            let m = self.mode(q);
            for (name, var, second) in [
                ("X", m.var_x(), m.get(0, 2).re),
                ("P", m.var_p(), m.get(2, 0).re),
            ] {
                if !var.is_finite() || var < -tol * second.abs().max(1.0) {
                    return Err(Error::ClosureBreakdown {
                        t: self.t,
                        what: format!("{} mode: variance of {name} is {var:.3e}", q.name()),
                    });
                }
            }
        }
        let r = self.bloch_radius_sq();
        if r.is_nan() || r > 0.25 + bloch_tol {
            return Err(Error::ClosureBreakdown {
                t: self.t,
                what: format!("atomic Bloch vector left the ball (|s-|^2 + sz^2/4 = {r:.4})"),
            });
        }
        Ok(())
    }
}

/// Truncated bivariate polynomial, `c[i][j]` multiplying `u^i v^j`.
type Poly = [[Complex64; MAX_ORDER + 1]; MAX_ORDER + 1];

fn poly_mul(a: &Poly, b: &Poly) -> Poly {
    let mut out = [[Complex64::new(0.0, 0.0); MAX_ORDER + 1]; MAX_ORDER + 1];
    for i in 0..=MAX_ORDER {
        for j in 0..=MAX_ORDER - i {
            if a[i][j] == Complex64::new(0.0, 0.0) {
                continue;
            }
            for k in 0..=MAX_ORDER - i - j {
                for l in 0..=MAX_ORDER - i - j - k {
                    out[i + k][j + l] += a[i][j] * b[k][l];
                }
            }
        }
    }
    out
}

/// Ordered moments of a Gaussian state with means `(x, p)` and symmetrised
/// covariances `var_x`, `var_p`, `cov_xp`.
///
/// Uses `<exp(iuP) exp(ivX)> = exp(Q)` with
/// `Q = i(u p + v x) - (u^2 var_p + 2uv cov_xp + v^2 var_x)/2 + iuv`
/// (the last term from `[P, X] = -2i`), so that
/// `<P^n X^m> = (-i)^(n+m) n! m! [u^n v^m] exp(Q)`.
pub fn gaussian_moments(x: f64, p: f64, var_x: f64, var_p: f64, cov_xp: f64) -> ModeMoments {
    let i = Complex64::new(0.0, 1.0);
    let zero = Complex64::new(0.0, 0.0);
    let mut q: Poly = [[zero; MAX_ORDER + 1]; MAX_ORDER + 1];
    q[1][0] = i * p;
    q[0][1] = i * x;
    q[2][0] = Complex64::new(-0.5 * var_p, 0.0);
    q[0][2] = Complex64::new(-0.5 * var_x, 0.0);
    q[1][1] = Complex64::new(-cov_xp, 1.0);

    let mut series: Poly = [[zero; MAX_ORDER + 1]; MAX_ORDER + 1];
    series[0][0] = Complex64::new(1.0, 0.0);
    let mut term = series;
    for k in 1..=MAX_ORDER {
        term = poly_mul(&term, &q);
        let scale = 1.0 / k as f64;
        for row in term.iter_mut() {
            for c in row.iter_mut() {
                *c *= scale;
            }
        }
        for a in 0..=MAX_ORDER {
            for b in 0..=MAX_ORDER - a {
                series[a][b] += term[a][b];
            }
        }
    }

    let fact = [1.0, 1.0, 2.0, 6.0, 24.0];
    let mut out = ModeMoments::zeros();
    for k in 1..=MAX_ORDER {
        let phase = (-i).powu(k as u32);
        for n in 0..=k {
            let m = k - n;
            out.set(n, m, phase * fact[n] * fact[m] * series[n][m]);
        }
    }
    out
}

/// Each mode displaced along `X` to classical energy `E_q`, with thermal
/// fluctuations `2 n_th + 1` on both quadratures; atom in the ground state.
pub fn init_state(e_com: f64, e_br: f64, params: &TwoModeParams) -> Result<MomentState> {
    ensure_non_negative("E_COM(0)", e_com)?;
    ensure_non_negative("E_BR(0)", e_br)?;
    let mk = |e: f64, n_th: f64| {
        let w = 2.0 * n_th + 1.0;
        gaussian_moments((2.0 * e).sqrt(), 0.0, w, w, 0.0)
    };
    Ok(MomentState {
        t: 0.0,
        modes: [mk(e_com, params.com.n_th), mk(e_br, params.br.n_th)],
        sigma_minus: Complex64::new(0.0, 0.0),
        sigma_z: -1.0,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct PhononStats {
    pub mean_n: f64,
    pub mean_n2: f64,
}

impl PhononStats {
    pub fn from_moments(m: &ModeMoments) -> Self {
        let x2 = m.get(0, 2).re;
        let p2 = m.get(2, 0).re;
        let mean_n = 0.25 * (x2 + p2) - 0.5;
        let mean_n2 = (m.get(0, 4).re + m.get(4, 0).re + 2.0 * m.get(2, 2).re) / 16.0
            - (x2 + p2 + 2.0 * m.get(1, 1).im + 1.0) / 4.0;
        Self { mean_n, mean_n2 }
    }

    pub fn g2(&self) -> Result<f64> {
        if self.mean_n <= 1e-12 {
            return Err(Error::UndefinedCoherence);
        }
        Ok((self.mean_n2 - self.mean_n) / (self.mean_n * self.mean_n))
    }
}

/// `<n_q>` and `<n_q^2>` for both modes, indexed like [`MomentState::modes`].
pub fn phonon_stats(state: &MomentState) -> [PhononStats; 2] {
    [
        PhononStats::from_moments(&state.modes[0]),
        PhononStats::from_moments(&state.modes[1]),
    ]
}
