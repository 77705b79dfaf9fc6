//! Monte-Carlo sweeps over quench timescales and the power-law fit of the
//! defect-density scaling.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::analysis::{
    classify_configuration, defect_density, ClassifierThresholds, CrystalClass,
};
use crate::dynamics::{run_quench, CoolingModel, IntegratorConfig, QuenchSetup};
use crate::error::{KzmError, Result};
use crate::model::{
    axial_frequency_from_voltage, gamma_at_critical_point, IonSpecies, RampProtocol,
    TrapParameters,
};
use crate::statics::{critical_axial_frequency, zigzag_reference_amplitudes};

/// Full description of one sweep.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepPlan {
    /// Quench timescales, s. Must be distinct and positive.
    pub tau_values: Vec<f64>,
    pub trajectories_per_point: usize,
    pub master_seed: u64,
    pub n_ions: usize,
    pub species: IonSpecies,
    pub trap: TrapParameters,
    /// Template for per-tau protocols; `tau`, `t0` and `total_duration`
    /// are rederived per point (t0 = 10 tau, ramp length 20 tau).
    pub ramp_template: RampProtocol,
    pub cooling: CoolingModel,
    pub integrator: IntegratorConfig,
    pub thresholds: ClassifierThresholds,
    /// Default {1.03}.
    pub anisotropy_values: Vec<f64>,
}

impl SweepPlan {
    /// Experiment-defaults plan: 8 tau values spanning 0.5-4.0 us, 200
    /// trajectories per point, anisotropy 1.03. The grid concentrates
    /// points in the scaling window (d roughly 0.05-0.8): a uniform log
    /// grid wastes half its points on the saturation shoulder and the
    /// zero-defect floor.
    pub fn experiment_default(master_seed: u64) -> Self {
        let tau_values = [0.5, 0.7, 0.9, 1.1, 1.3, 1.6, 2.0, 4.0]
            .iter()
            .map(|t| t * 1e-6)
            .collect();
        Self {
            tau_values,
            trajectories_per_point: 200,
            master_seed,
            n_ions: 16,
            species: IonSpecies::ca40(),
            trap: TrapParameters::experiment_default(),
            ramp_template: RampProtocol::experiment_default(1e-6),
            cooling: CoolingModel::doppler_default(),
            integrator: IntegratorConfig::pseudopotential_default(),
            thresholds: ClassifierThresholds::default(),
            anisotropy_values: vec![1.03],
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.tau_values.is_empty() {
            return Err(KzmError::Config("sweep needs at least one tau".into()));
        }
        for (i, &t) in self.tau_values.iter().enumerate() {
            if !(t > 0.0) {
                return Err(KzmError::Config(format!("tau[{i}] must be positive")));
            }
            if self.tau_values[..i].iter().any(|&o| o == t) {
                return Err(KzmError::Config(format!("duplicate tau value {t:.3e}")));
            }
        }
        if self.trajectories_per_point == 0 {
            return Err(KzmError::Config(
                "trajectories_per_point must be >= 1".into(),
            ));
        }
        if self.anisotropy_values.is_empty() {
            return Err(KzmError::Config(
                "sweep needs at least one anisotropy".into(),
            ));
        }
        Ok(())
    }

    fn protocol_for(&self, tau: f64) -> RampProtocol {
        RampProtocol {
            v_start: self.ramp_template.v_start,
            v_end: self.ramp_template.v_end,
            t0: 10.0 * tau,
            tau,
            settle_time: self.ramp_template.settle_time,
            total_duration: 20.0 * tau + self.ramp_template.settle_time,
        }
    }
}

/// Aggregated defect statistics for one quench rate.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepPoint {
    pub anisotropy: f64,
    pub tau: f64,
    /// Quench rate at the critical point, rad/s^2.
    pub gamma: f64,
    pub n1: usize,
    pub n2: usize,
    pub n_ambiguous: usize,
    pub n_failed: usize,
    pub n_total: usize,
    /// Defect density over classified, non-ambiguous trajectories.
    pub d: f64,
    /// Standard error of the mean per-trajectory kink count.
    pub d_stderr: f64,
    pub swap_fraction: f64,
}

/// Weighted log-log power-law fit d = A * gamma^beta.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PowerLawFit {
    pub beta: f64,
    pub beta_stderr: f64,
    pub log_amplitude: f64,
    pub window_lo: f64,
    pub window_hi: f64,
    pub points_used: usize,
}

/// Deterministic per-trajectory seed: a pure function of
/// (master_seed, point index, trajectory index).
pub fn derive_seed(master_seed: u64, point_index: usize, trajectory_index: usize) -> u64 {
    fn splitmix64(mut x: u64) -> u64 {
        x = x.wrapping_add(0x9E37_79B9_7F4A_7C15);
        let mut z = x;
        z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
        z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
        z ^ (z >> 31)
    }
    let a = splitmix64(master_seed ^ 0xD6E8_FEB8_6659_FD93);
    let b = splitmix64(a ^ (point_index as u64).wrapping_mul(0xA076_1D64_78BD_642F));
    splitmix64(b ^ (trajectory_index as u64).wrapping_mul(0xE703_7ED1_A0B4_28DB))
}

#[derive(Debug, Clone, Copy)]
enum TrajectoryOutcome {
    Kinks { count: usize, swapped: bool },
    Ambiguous { swapped: bool },
    Failed,
}

/// Run the sweep for one anisotropy; points are returned in tau order.
fn run_sweep_one_anisotropy(plan: &SweepPlan, anisotropy: f64) -> Result<Vec<SweepPoint>> {
    let mut trap = plan.trap;
    trap.anisotropy = anisotropy;
    let cp = critical_axial_frequency(plan.n_ions, trap.omega_weak, trap.anisotropy)?;
    let omega_final =
        axial_frequency_from_voltage(&trap, plan.ramp_template.v_end)?;
    let reference_amps =
        zigzag_reference_amplitudes(plan.n_ions, plan.species, &trap, omega_final)?;

    let mut points = Vec::with_capacity(plan.tau_values.len());
    for (point_idx, &tau) in plan.tau_values.iter().enumerate() {
        let ramp = plan.protocol_for(tau);
        let gamma = gamma_at_critical_point(&trap, &ramp, cp.omega_crit)?;
        let setup = QuenchSetup {
            n_ions: plan.n_ions,
            species: plan.species,
            trap,
            ramp,
            cooling: plan.cooling,
            integrator: plan.integrator,
        };
        // Trajectories are independent; order of completion does not matter
        // because outcomes are collected by trajectory index.
        let outcomes: Vec<TrajectoryOutcome> = (0..plan.trajectories_per_point)
            .into_par_iter()
            .map(|traj_idx| {
                let seed = derive_seed(plan.master_seed, point_idx, traj_idx);
                match run_quench(&setup, seed) {
                    Ok(traj) => {
                        match classify_configuration(
                            &traj.final_state,
                            &reference_amps,
                            &plan.thresholds,
                        ) {
                            Ok(cfg) if cfg.class == CrystalClass::Ambiguous => {
                                TrajectoryOutcome::Ambiguous {
                                    swapped: traj.swapped,
                                }
                            }
                            Ok(cfg) => TrajectoryOutcome::Kinks {
                                count: cfg.kink_count,
                                swapped: traj.swapped,
                            },
                            Err(_) => TrajectoryOutcome::Ambiguous {
                                swapped: traj.swapped,
                            },
                        }
                    }
                    Err(_) => TrajectoryOutcome::Failed,
                }
            })
            .collect();

        let mut n1 = 0;
        let mut n2 = 0;
        let mut n_ambiguous = 0;
        let mut n_failed = 0;
        let mut n_swapped = 0;
        let mut kink_counts: Vec<f64> = Vec::new();
        for o in &outcomes {
            match o {
                TrajectoryOutcome::Kinks { count, swapped } => {
                    match count {
                        1 => n1 += 1,
                        2 => n2 += 1,
                        _ => {}
                    }
                    kink_counts.push(*count as f64);
                    if *swapped {
                        n_swapped += 1;
                    }
                }
                TrajectoryOutcome::Ambiguous { swapped } => {
                    n_ambiguous += 1;
                    if *swapped {
                        n_swapped += 1;
                    }
                }
                TrajectoryOutcome::Failed => n_failed += 1,
            }
        }
        let n_total = outcomes.len();
        if n_failed * 10 > n_total {
            return Err(KzmError::Sweep(format!(
                "{n_failed}/{n_total} trajectories failed at tau = {tau:.3e} s"
            )));
        }
        let n_classified = kink_counts.len();
        let d = defect_density(n1, n2, n_classified.max(1))?;
        let d_stderr = if n_classified > 1 {
            let mean = kink_counts.iter().sum::<f64>() / n_classified as f64;
            let var = kink_counts
                .iter()
                .map(|k| (k - mean) * (k - mean))
                .sum::<f64>()
                / (n_classified as f64 - 1.0);
            (var / n_classified as f64).sqrt()
        } else {
            0.0
        };
        points.push(SweepPoint {
            anisotropy,
            tau,
            gamma,
            n1,
            n2,
            n_ambiguous,
            n_failed,
            n_total,
            d,
            d_stderr,
            swap_fraction: n_swapped as f64 / n_total.max(1) as f64,
        });
    }
    Ok(points)
}

/// Run the full sweep over every (anisotropy, tau) combination.
///
/// Results are bit-deterministic for a fixed plan regardless of worker
/// count: per-trajectory seeds depend only on indices, and aggregation is
/// by trajectory order.
pub fn run_sweep(plan: &SweepPlan) -> Result<Vec<SweepPoint>> {
    plan.validate()?;
    let mut out = Vec::new();
    for &aniso in &plan.anisotropy_values {
        out.extend(run_sweep_one_anisotropy(plan, aniso)?);
    }
    Ok(out)
}

/// Default fit window: the gamma range spanned by points with
/// 0.05 <= d <= 0.8, which excludes both the saturation regime and the
/// zero-count floor.
pub fn default_fit_window(points: &[SweepPoint]) -> Option<(f64, f64)> {
    let gammas: Vec<f64> = points
        .iter()
        .filter(|p| p.d >= 0.05 && p.d <= 0.8)
        .map(|p| p.gamma)
        .collect();
    if gammas.is_empty() {
        return None;
    }
    let lo = gammas.iter().cloned().fold(f64::INFINITY, f64::min);
    let hi = gammas.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    Some((lo, hi))
}

/// Weighted least squares of log d on log gamma over points inside the
/// window with d > 0. Weights are 1/(d_stderr/d)^2; `weighted = false`
/// switches to an ordinary fit.
pub fn fit_power_law(
    points: &[SweepPoint],
    window: Option<(f64, f64)>,
    weighted: bool,
) -> Result<PowerLawFit> {
    let (lo, hi) = match window {
        Some(w) => w,
        None => default_fit_window(points).ok_or_else(|| {
            KzmError::InsufficientData("no points with 0.05 <= d <= 0.8 for default window".into())
        })?,
    };
    if !(lo > 0.0 && hi >= lo) {
        return Err(KzmError::Range(format!(
            "invalid fit window ({lo:.3e}, {hi:.3e})"
        )));
    }
    let usable: Vec<&SweepPoint> = points
        .iter()
        .filter(|p| p.d > 0.0 && p.gamma >= lo && p.gamma <= hi)
        .collect();
    if usable.len() < 3 {
        return Err(KzmError::InsufficientData(format!(
            "power-law fit needs >= 3 usable points, got {}",
            usable.len()
        )));
    }
    let mut sw = 0.0;
    let mut sx = 0.0;
    let mut sy = 0.0;
    let data: Vec<(f64, f64, f64)> = usable
        .iter()
        .map(|p| {
            let w = if weighted && p.d_stderr > 0.0 {
                let rel = p.d_stderr / p.d;
                1.0 / (rel * rel)
            } else {
                1.0
            };
            (p.gamma.ln(), p.d.ln(), w)
        })
        .collect();
    for &(x, y, w) in &data {
        sw += w;
        sx += w * x;
        sy += w * y;
    }
    let xbar = sx / sw;
    let mut stt = 0.0;
    let mut sty = 0.0;
    for &(x, y, w) in &data {
        let t = x - xbar;
        stt += w * t * t;
        sty += w * t * y;
    }
    if stt <= 0.0 {
        return Err(KzmError::DegenerateFit(
            "all fit points share one gamma".into(),
        ));
    }
    let beta = sty / stt;
    let intercept = (sy - sx * beta) / sw;
    // residual-scaled slope uncertainty
    let dof = (data.len() as f64 - 2.0).max(1.0);
    let chi2: f64 = data
        .iter()
        .map(|&(x, y, w)| w * (y - intercept - beta * x).powi(2))
        .sum();
    let beta_stderr = (chi2 / dof / stt).sqrt();
    Ok(PowerLawFit {
        beta,
        beta_stderr,
        log_amplitude: intercept,
        window_lo: lo,
        window_hi: hi,
        points_used: data.len(),
    })
}

/// Paired sweep at two anisotropies with matched tau lists and seeds.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AnisotropyComparison {
    pub points_a: Vec<SweepPoint>,
    pub points_b: Vec<SweepPoint>,
    /// Per-gamma ratio d_b/d_a with propagated standard error, at each
    /// matched tau where both densities are positive.
    pub density_ratios: Vec<(f64, f64, f64)>,
    pub fit_a: PowerLawFit,
    pub fit_b: PowerLawFit,
}

/// Run matched-seed sweeps at exactly two anisotropies and compare.
pub fn anisotropy_comparison(plan: &SweepPlan) -> Result<AnisotropyComparison> {
    plan.validate()?;
    if plan.anisotropy_values.len() != 2 {
        return Err(KzmError::Config(
            "anisotropy comparison requires exactly two anisotropy values".into(),
        ));
    }
    let points_a = run_sweep_one_anisotropy(plan, plan.anisotropy_values[0])?;
    let points_b = run_sweep_one_anisotropy(plan, plan.anisotropy_values[1])?;
    let mut density_ratios = Vec::new();
    for (a, b) in points_a.iter().zip(&points_b) {
        if a.tau != b.tau {
            return Err(KzmError::Sweep("mismatched tau lists".into()));
        }
        if a.d > 0.0 && b.d > 0.0 {
            let ratio = b.d / a.d;
            let rel = ((a.d_stderr / a.d).powi(2) + (b.d_stderr / b.d).powi(2)).sqrt();
            density_ratios.push((a.gamma, ratio, ratio * rel));
        }
    }
    // Both exponents are measured over the same gamma range (the first
    // anisotropy's default window) so the comparison is like-for-like;
    // saturation sets in at a lower density for stiffer transverse
    // confinement, which would otherwise contaminate the second fit's
    // own density-selected window.
    let fit_a = fit_power_law(&points_a, None, true)?;
    let fit_b = fit_power_law(&points_b, Some((fit_a.window_lo, fit_a.window_hi)), true)?;
    Ok(AnisotropyComparison {
        points_a,
        points_b,
        density_ratios,
        fit_a,
        fit_b,
    })
}
