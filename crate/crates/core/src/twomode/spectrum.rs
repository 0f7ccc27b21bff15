use std::f64::consts::PI;

use rustfft::num_complex::Complex;
use rustfft::FftPlanner;
use serde::Serialize;

use crate::error::{ensure_positive, invalid, Error, Result};

/// RMS below which a series is treated as flat.
const AMPLITUDE_FLOOR: f64 = 1e-9;
/// Peak-to-median power ratio required to call a line.
const PEAK_CONTRAST: f64 = 100.0;

/// One-sided amplitude spectrum of a Hann-windowed, mean-removed series.
#[derive(Debug, Clone, Serialize)]
pub struct Spectrum {
    /// Angular frequencies of the bins.
    pub omega: Vec<f64>,
    pub amplitude: Vec<f64>,
    /// Bin spacing in angular frequency.
    pub resolution: f64,
}

pub fn amplitude_spectrum(samples: &[f64], dt: f64) -> Result<Spectrum> {
    ensure_positive("dt", dt)?;
    let n = samples.len();
    if n < 16 {
        return Err(invalid("samples", "need at least 16 points"));
    }
    let mean = samples.iter().sum::<f64>() / n as f64;
    let mut buf: Vec<Complex<f64>> = samples
        .iter()
        .enumerate()
        .map(|(i, x)| {
            let w = 0.5 - 0.5 * (2.0 * PI * i as f64 / (n - 1) as f64).cos();
            Complex::new((x - mean) * w, 0.0)
        })
        .collect();
    FftPlanner::new().plan_fft_forward(n).process(&mut buf);
    let resolution = 2.0 * PI / (n as f64 * dt);
    let half = n / 2 + 1;
    let scale = 2.0 / n as f64;
    Ok(Spectrum {
        omega: (0..half).map(|k| k as f64 * resolution).collect(),
        amplitude: buf[..half].iter().map(|c| c.norm() * scale).collect(),
        resolution,
    })
}

/// Angular frequency of the strongest line in a uniformly sampled series,
/// refined by a parabola through the peak bin and its neighbours.
pub fn dominant_frequency(samples: &[f64], dt: f64) -> Result<f64> {
    let n = samples.len() as f64;
    let mean = samples.iter().sum::<f64>() / n;
    let rms = (samples.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / n).sqrt();
    if rms.is_nan() || rms <= AMPLITUDE_FLOOR {
        return Err(Error::NoOscillation);
    }
    let spec = amplitude_spectrum(samples, dt)?;
    let a = &spec.amplitude;
    let (k, peak) = a
        .iter()
        .enumerate()
        .skip(1)
        .fold((0, 0.0), |best, (i, &v)| if v > best.1 { (i, v) } else { best });
    let mut power: Vec<f64> = a.iter().map(|v| v * v).collect();
    power.sort_by(f64::total_cmp);
    let median = power[power.len() / 2];
    if k == 0 || peak * peak < PEAK_CONTRAST * median {
        return Err(Error::NoOscillation);
    }
    let offset = if k + 1 < a.len() {
        let (l, c, r) = (a[k - 1], a[k], a[k + 1]);
        let den = l - 2.0 * c + r;
        if den != 0.0 {
            (0.5 * (l - r) / den).clamp(-0.5, 0.5)
        } else {
            0.0
        }
    } else {
        0.0
    };
    Ok((k as f64 + offset) * spec.resolution)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn finds_a_pure_tone() {
        let dt = 0.1;
        let x: Vec<f64> = (0..8192).map(|i| (2.5 * i as f64 * dt + 0.3).cos()).collect();
        let f = dominant_frequency(&x, dt).unwrap();
        let bin = 2.0 * PI / (8192.0 * dt);
        assert!((f - 2.5).abs() < bin, "{f}");
    }

    #[test]
    fn picks_the_stronger_of_two_tones() {
        let dt = 0.1;
        let x: Vec<f64> = (0..8192)
            .map(|i| {
                let t = i as f64 * dt;
                0.2 * (1.6 * t).cos() + (2.45 * t).sin()
            })
            .collect();
        assert!((dominant_frequency(&x, dt).unwrap() - 2.45).abs() < 0.01);
    }

    #[test]
    fn flat_and_noise_like_series_have_no_line() {
        assert!(matches!(
            dominant_frequency(&[1.0; 512], 0.1),
            Err(Error::NoOscillation)
        ));
        // Deterministic broadband sequence.
        let mut s: u64 = 12345;
        let noise: Vec<f64> = (0..4096)
            .map(|_| {
                s = s.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
                (s >> 11) as f64 / (1u64 << 53) as f64 - 0.5
            })
            .collect();
        assert!(dominant_frequency(&noise, 0.1).is_err());
    }
}
