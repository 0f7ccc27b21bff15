use crate::error::{ensure_positive, invalid, Error, Result};

/// Smallest bath for which a density of states is attempted.
pub const MIN_BATH_MODES: usize = 100;

/// Bath density of states: each level smeared by a unit-area triangular
/// kernel of half-width `window / 2`. Kernel mass spilling past the band
/// edges is reflected back, so the density integrates to the level count
/// and vanishes outside `[min, max]`.
#[derive(Debug, Clone)]
pub struct BathDos {
    freqs: Vec<f64>,
    window: f64,
}

impl BathDos {
    pub fn new(omega_bath: &[f64], window: f64) -> Result<Self> {
        ensure_positive("window", window)?;
        if omega_bath.len() < MIN_BATH_MODES {
            return Err(invalid(
                "bath",
                format!("{} modes, need at least {MIN_BATH_MODES}", omega_bath.len()),
            ));
        }
        let mut freqs = omega_bath.to_vec();
        freqs.sort_by(f64::total_cmp);
        let spacing = mean_spacing(&freqs);
        if window < spacing {
            return Err(Error::WindowTooNarrow { window, spacing });
        }
        Ok(Self { freqs, window })
    }

    pub fn window(&self) -> f64 {
        self.window
    }

    pub fn band(&self) -> (f64, f64) {
        (self.freqs[0], self.freqs[self.freqs.len() - 1])
    }

    pub fn n_modes(&self) -> usize {
        self.freqs.len()
    }

    pub fn mean_spacing(&self) -> f64 {
        mean_spacing(&self.freqs)
    }

    fn range(&self, lo: f64, hi: f64) -> &[f64] {
        let a = self.freqs.partition_point(|&f| f <= lo);
        let b = self.freqs.partition_point(|&f| f < hi);
        &self.freqs[a..b.max(a)]
    }

    /// Number of levels with `|omega_k - omega| < half`.
    pub fn count_within(&self, omega: f64, half: f64) -> usize {
        self.range(omega - half, omega + half).len()
    }

    pub fn density(&self, omega: f64) -> f64 {
        let (lo, hi) = self.band();
        if !(lo..=hi).contains(&omega) {
            return 0.0;
        }
        let h = 0.5 * self.window;
        let kernel = |x: f64| (1.0 - x.abs() / h) / h;
        let direct: f64 = self.range(omega - h, omega + h).iter().map(|&f| kernel(omega - f)).sum();
        // Images f -> 2 lo - f and f -> 2 hi - f.
        let low: f64 = self
            .range(2.0 * lo - omega - h, 2.0 * lo - omega + h)
            .iter()
            .map(|&f| kernel(omega - (2.0 * lo - f)))
            .sum();
        let high: f64 = self
            .range(2.0 * hi - omega - h, 2.0 * hi - omega + h)
            .iter()
            .map(|&f| kernel(omega - (2.0 * hi - f)))
            .sum();
        direct + low + high
    }

    pub fn tabulate(&self, grid: &[f64]) -> Vec<f64> {
        grid.iter().map(|&w| self.density(w)).collect()
    }

    /// Trapezoid integral of the density over the band.
    pub fn integral(&self) -> f64 {
        let (lo, hi) = self.band();
        let per_window = 40.0;
        let n = (((hi - lo) / self.window) * per_window).ceil().max(2.0) as usize;
        let dx = (hi - lo) / n as f64;
        let mut sum = 0.5 * (self.density(lo) + self.density(hi));
        for i in 1..n {
            sum += self.density(lo + i as f64 * dx);
        }
        sum * dx
    }
}

fn mean_spacing(sorted: &[f64]) -> f64 {
    (sorted[sorted.len() - 1] - sorted[0]) / (sorted.len() - 1) as f64
}

pub fn bath_dos(omega_bath: &[f64], window: f64) -> Result<BathDos> {
    BathDos::new(omega_bath, window)
}

/// `max(10 level spacings, 0.02)` in units of `omega0`.
pub fn default_window(omega_bath: &[f64]) -> f64 {
    let lo = omega_bath.iter().copied().fold(f64::INFINITY, f64::min);
    let hi = omega_bath.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let spacing = (hi - lo) / (omega_bath.len().max(2) - 1) as f64;
    (10.0 * spacing).max(0.02)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn ramp(n: usize) -> Vec<f64> {
        // Non-uniform levels bunching towards the top, like a lattice band edge.
        (0..n)
            .map(|k| {
                let x = (k as f64 + 0.5) / n as f64;
                2.0 * (0.5 * std::f64::consts::PI * x).sin() + 0.3
            })
            .collect()
    }

    #[test]
    fn integrates_to_mode_count() {
        let f = ramp(1500);
        let dos = bath_dos(&f, default_window(&f)).unwrap();
        let total = dos.integral();
        assert!((total / 1500.0 - 1.0).abs() < 0.01, "{total}");
    }

    #[test]
    fn vanishes_outside_band() {
        let f = ramp(500);
        let dos = bath_dos(&f, 0.05).unwrap();
        let (lo, hi) = dos.band();
        assert_eq!(dos.density(lo - 1e-9), 0.0);
        assert_eq!(dos.density(hi + 1e-9), 0.0);
        assert!(dos.density(0.5 * (lo + hi)) > 0.0);
    }

    #[test]
    fn rejects_sub_spacing_window_and_tiny_bath() {
        let f = ramp(500);
        assert!(matches!(bath_dos(&f, 1e-4), Err(Error::WindowTooNarrow { .. })));
        assert!(bath_dos(&ramp(50), 0.1).is_err());
    }

    #[test]
    fn uniform_levels_give_flat_density() {
        let f: Vec<f64> = (0..1001).map(|k| 1.0 + k as f64 * 1e-3).collect();
        let dos = bath_dos(&f, 0.02).unwrap();
        for w in [1.2, 1.5, 1.8] {
            assert!((dos.density(w) - 1000.0).abs() < 1.0);
        }
    }
}
