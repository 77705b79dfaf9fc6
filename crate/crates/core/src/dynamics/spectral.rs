//! Frequency extraction from sampled trajectories.

use rustfft::{num_complex::Complex, FftPlanner};

use crate::error::{KzmError, Result};

/// Dominant angular frequency of a uniformly sampled real signal, rad per
/// unit of `dt`. Hann-windowed FFT with parabolic peak interpolation;
/// frequencies at or above `max_omega` (when finite) are ignored, which lets
/// callers mask an RF drive line.
pub fn dominant_frequency(samples: &[f64], dt: f64, max_omega: f64) -> Result<f64> {
    let n = samples.len();
    if n < 16 {
        return Err(KzmError::InsufficientData(format!(
            "spectral estimate needs >= 16 samples, got {n}"
        )));
    }
    let mean = samples.iter().sum::<f64>() / n as f64;
    let mut buf: Vec<Complex<f64>> = samples
        .iter()
        .enumerate()
        .map(|(i, &x)| {
            let w = 0.5
                * (1.0 - (2.0 * std::f64::consts::PI * i as f64 / (n as f64 - 1.0)).cos());
            Complex::new((x - mean) * w, 0.0)
        })
        .collect();
    FftPlanner::new().plan_fft_forward(n).process(&mut buf);
    let d_omega = 2.0 * std::f64::consts::PI / (n as f64 * dt);
    let half = n / 2;
    let mut peak = 1;
    let mut peak_mag = 0.0;
    for (k, c) in buf.iter().enumerate().take(half).skip(1) {
        let omega = k as f64 * d_omega;
        if omega >= max_omega {
            break;
        }
        let m = c.norm_sqr();
        if m > peak_mag {
            peak_mag = m;
            peak = k;
        }
    }
    if peak_mag == 0.0 {
        return Err(KzmError::InsufficientData(
            "signal has no spectral content below the cutoff".into(),
        ));
    }
    // parabolic interpolation on log magnitude
    let mag = |k: usize| buf[k].norm().max(1e-300).ln();
    let delta = if peak > 1 && peak + 1 < half {
        let (a, b, c) = (mag(peak - 1), mag(peak), mag(peak + 1));
        let denom = a - 2.0 * b + c;
        if denom.abs() > 1e-300 {
            (0.5 * (a - c) / denom).clamp(-0.5, 0.5)
        } else {
            0.0
        }
    } else {
        0.0
    };
    Ok((peak as f64 + delta) * d_omega)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn recovers_pure_tone() {
        let omega = 0.7321;
        let dt = 0.1;
        let samples: Vec<f64> = (0..8192).map(|i| (omega * dt * i as f64).sin()).collect();
        let est = dominant_frequency(&samples, dt, f64::INFINITY).unwrap();
        assert_relative_eq!(est, omega, max_relative = 1e-3);
    }

    #[test]
    fn cutoff_masks_strong_line() {
        let dt = 0.05;
        let samples: Vec<f64> = (0..8192)
            .map(|i| {
                let t = dt * i as f64;
                0.1 * (0.4 * t).sin() + (20.0 * t).sin()
            })
            .collect();
        let est = dominant_frequency(&samples, dt, 5.0).unwrap();
        assert_relative_eq!(est, 0.4, max_relative = 1e-2);
    }
}
