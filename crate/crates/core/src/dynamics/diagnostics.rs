//! Per-trajectory diagnostics: local transition onsets and front speed.

use serde::{Deserialize, Serialize};

use crate::error::{KzmError, Result};

use super::quench::SimState;

/// Onset criterion: the weak-axis envelope must exceed `rms_multiple` times
/// the pre-ramp thermal RMS and stay above it for `sustain_periods`
/// consecutive radial periods.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct OnsetThresholds {
    pub rms_multiple: f64,
    pub sustain_periods: usize,
}

impl Default for OnsetThresholds {
    fn default() -> Self {
        Self {
            rms_multiple: 5.0,
            sustain_periods: 5,
        }
    }
}

/// Per-ion onset time of the local structural transition, or `None` when
/// the ion never sustains a super-threshold weak-axis excursion.
///
/// `thermal_rms` is the per-ion pre-ramp thermal RMS weak-axis displacement
/// in metres; `omega_weak` (rad/s) sets the radial period used for the
/// envelope.
pub fn local_onset_times(
    snapshots: &[SimState],
    thermal_rms: &[f64],
    thresholds: &OnsetThresholds,
    omega_weak: f64,
) -> Result<Vec<Option<f64>>> {
    if snapshots.is_empty() {
        return Err(KzmError::State(
            "onset detection requires recorded snapshots".into(),
        ));
    }
    let n = snapshots[0].n_ions();
    if thermal_rms.len() != n {
        return Err(KzmError::ShapeMismatch(format!(
            "thermal_rms has {} entries for {} ions",
            thermal_rms.len(),
            n
        )));
    }
    let period = 2.0 * std::f64::consts::PI / omega_weak;
    let t_start = snapshots[0].time;
    let n_bins = ((snapshots.last().unwrap().time - t_start) / period).ceil() as usize + 1;
    let mut onsets = vec![None; n];
    for ion in 0..n {
        let threshold = thresholds.rms_multiple * thermal_rms[ion];
        // per-period envelope: max |x| in each radial-period bin, plus the
        // first crossing time inside each bin
        let mut bin_max = vec![0.0_f64; n_bins];
        let mut bin_first_cross = vec![None; n_bins];
        for s in snapshots {
            let bin = ((s.time - t_start) / period) as usize;
            let x = s.positions[ion][0].abs();
            if x > bin_max[bin] {
                bin_max[bin] = x;
            }
            if x >= threshold && bin_first_cross[bin].is_none() {
                bin_first_cross[bin] = Some(s.time);
            }
        }
        let k = thresholds.sustain_periods.max(1);
        'bins: for b in 0..n_bins.saturating_sub(k - 1) {
            for w in 0..k {
                if bin_max[b + w] < threshold {
                    continue 'bins;
                }
            }
            onsets[ion] = bin_first_cross[b];
            break;
        }
    }
    Ok(onsets)
}

/// Phase-front propagation speed: least-squares slope of |z_i| against the
/// onset time, m/s, over ions with a defined onset.
pub fn front_speed(onset_times: &[Option<f64>], axial_positions: &[f64]) -> Result<f64> {
    if onset_times.len() != axial_positions.len() {
        return Err(KzmError::ShapeMismatch(format!(
            "{} onset times for {} positions",
            onset_times.len(),
            axial_positions.len()
        )));
    }
    let pts: Vec<(f64, f64)> = onset_times
        .iter()
        .zip(axial_positions)
        .filter_map(|(t, z)| t.map(|tt| (tt, z.abs())))
        .collect();
    if pts.len() < 3 {
        return Err(KzmError::InsufficientData(format!(
            "front speed needs >= 3 onsets, got {}",
            pts.len()
        )));
    }
    let n = pts.len() as f64;
    let mean_t = pts.iter().map(|p| p.0).sum::<f64>() / n;
    let mean_z = pts.iter().map(|p| p.1).sum::<f64>() / n;
    let stt: f64 = pts.iter().map(|p| (p.0 - mean_t).powi(2)).sum();
    let stz: f64 = pts.iter().map(|p| (p.0 - mean_t) * (p.1 - mean_z)).sum();
    let t_scale = pts.iter().map(|p| p.0.abs()).fold(0.0, f64::max).max(1e-30);
    if stt < 1e-24 * t_scale * t_scale {
        return Err(KzmError::DegenerateFit(
            "all onsets simultaneous: front speed unbounded".into(),
        ));
    }
    Ok(stz / stt)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn exact_linear_onsets_recover_speed() {
        let c = 123.456;
        let z: Vec<f64> = (0..8).map(|i| (i as f64 - 3.5) * 2e-6).collect();
        let onsets: Vec<Option<f64>> = z.iter().map(|zz| Some(zz.abs() / c)).collect();
        let v = front_speed(&onsets, &z).unwrap();
        assert_relative_eq!(v, c, max_relative = 1e-9);
    }

    #[test]
    fn too_few_onsets() {
        let z = vec![-1e-6, 0.0, 1e-6];
        let onsets = vec![Some(1e-6), None, Some(2e-6)];
        assert!(matches!(
            front_speed(&onsets, &z),
            Err(KzmError::InsufficientData(_))
        ));
    }

    #[test]
    fn simultaneous_onsets_degenerate() {
        let z = vec![-1e-6, 0.0, 1e-6, 2e-6];
        let onsets = vec![Some(5e-6); 4];
        assert!(matches!(
            front_speed(&onsets, &z),
            Err(KzmError::DegenerateFit(_))
        ));
    }
}
