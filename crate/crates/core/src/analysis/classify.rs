//! Geometric sign-sequence classifier.

use serde::{Deserialize, Serialize};

use crate::dynamics::SimState;
use crate::error::{KzmError, Result};

/// Structural outcome of a quench.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum CrystalClass {
    Linear,
    ZigZag,
    ZagZig,
    SingleKink,
    DoubleKink,
    Ambiguous,
}

impl CrystalClass {
    pub fn as_str(&self) -> &'static str {
        match self {
            CrystalClass::Linear => "linear",
            CrystalClass::ZigZag => "zigzag",
            CrystalClass::ZagZig => "zagzig",
            CrystalClass::SingleKink => "single_kink",
            CrystalClass::DoubleKink => "double_kink",
            CrystalClass::Ambiguous => "ambiguous",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CrystalConfiguration {
    pub class: CrystalClass,
    /// Number of alternation breaks; 0 for Linear/ZigZag/ZagZig/Ambiguous.
    pub kink_count: usize,
    /// Gap indices (left ion index in axial order) of the alternation breaks.
    pub kink_sites: Vec<usize>,
}

/// Geometric analogue of the image recognition thresholds.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ClassifierThresholds {
    /// An ion counts as displaced when its transverse excursion exceeds this
    /// fraction of its zigzag reference amplitude.
    pub displaced_fraction: f64,
    /// Signs within this fraction of the reference amplitude are
    /// indeterminate.
    pub ambiguity_margin: f64,
    /// Ions with reference amplitude below this fraction of the maximum are
    /// excluded from classification.
    pub edge_exclusion: f64,
}

impl Default for ClassifierThresholds {
    fn default() -> Self {
        Self {
            displaced_fraction: 0.3,
            ambiguity_margin: 0.1,
            edge_exclusion: 0.3,
        }
    }
}

impl ClassifierThresholds {
    pub fn validate(&self) -> Result<()> {
        if !(0.0 < self.ambiguity_margin
            && self.ambiguity_margin < self.displaced_fraction
            && self.displaced_fraction < 1.0)
        {
            return Err(KzmError::Config(
                "thresholds must satisfy 0 < ambiguity_margin < displaced_fraction < 1".into(),
            ));
        }
        Ok(())
    }
}

/// Staggered-order extraction over retained (non-edge) ions.
#[derive(Debug, Clone, PartialEq)]
pub struct StaggeredOrder {
    /// Axial-order indices of the retained ions.
    pub retained: Vec<usize>,
    /// Weak-axis sign per retained ion; `None` when indeterminate.
    pub signs: Vec<Option<i8>>,
    /// Per retained ion: transverse excursion exceeds the displaced test.
    pub displaced: Vec<bool>,
}

fn axial_order(state: &SimState) -> Vec<usize> {
    let mut idx: Vec<usize> = (0..state.n_ions()).collect();
    idx.sort_by(|&a, &b| {
        state.positions[a][2]
            .partial_cmp(&state.positions[b][2])
            .unwrap()
    });
    idx
}

/// Per-ion weak-axis sign sequence over retained ions, ordered axially.
///
/// `reference_amplitudes` are the zigzag equilibrium amplitudes (metres) in
/// axial order.
pub fn staggered_order(
    state: &SimState,
    reference_amplitudes: &[f64],
    thresholds: &ClassifierThresholds,
) -> Result<StaggeredOrder> {
    thresholds.validate()?;
    if reference_amplitudes.len() != state.n_ions() {
        return Err(KzmError::ShapeMismatch(format!(
            "{} reference amplitudes for {} ions",
            reference_amplitudes.len(),
            state.n_ions()
        )));
    }
    let order = axial_order(state);
    let max_amp = reference_amplitudes
        .iter()
        .cloned()
        .fold(0.0_f64, f64::max);
    let mut retained = Vec::new();
    let mut signs = Vec::new();
    let mut displaced = Vec::new();
    for (rank, &ion) in order.iter().enumerate() {
        let amp = reference_amplitudes[rank];
        if amp < thresholds.edge_exclusion * max_amp {
            continue;
        }
        let x = state.positions[ion][0];
        let y = state.positions[ion][1];
        retained.push(rank);
        signs.push(if x.abs() < thresholds.ambiguity_margin * amp {
            None
        } else if x > 0.0 {
            Some(1)
        } else {
            Some(-1)
        });
        displaced.push((x * x + y * y).sqrt() >= thresholds.displaced_fraction * amp);
    }
    Ok(StaggeredOrder {
        retained,
        signs,
        displaced,
    })
}

/// Count alternation breaks in a fully determinate sign sequence: the
/// gap indices where adjacent signs coincide.
pub fn kink_sites_of_signs(signs: &[i8]) -> Vec<usize> {
    signs
        .windows(2)
        .enumerate()
        .filter(|(_, w)| w[0] == w[1])
        .map(|(i, _)| i)
        .collect()
}

/// Classify a final state into one of the six structural classes.
pub fn classify_configuration(
    state: &SimState,
    reference_amplitudes: &[f64],
    thresholds: &ClassifierThresholds,
) -> Result<CrystalConfiguration> {
    let so = staggered_order(state, reference_amplitudes, thresholds)?;
    if so.retained.is_empty() {
        return Ok(CrystalConfiguration {
            class: CrystalClass::Ambiguous,
            kink_count: 0,
            kink_sites: Vec::new(),
        });
    }
    let n_displaced = so.displaced.iter().filter(|d| **d).count();
    if 2 * n_displaced < so.retained.len() {
        return Ok(CrystalConfiguration {
            class: CrystalClass::Linear,
            kink_count: 0,
            kink_sites: Vec::new(),
        });
    }
    let ambiguous = CrystalConfiguration {
        class: CrystalClass::Ambiguous,
        kink_count: 0,
        kink_sites: Vec::new(),
    };
    let mut det = Vec::with_capacity(so.signs.len());
    for s in &so.signs {
        match s {
            Some(v) => det.push(*v),
            None => return Ok(ambiguous),
        }
    }
    let local_sites = kink_sites_of_signs(&det);
    // report the gap by the left ion's position in the axial order
    let kink_sites: Vec<usize> = local_sites.iter().map(|&g| so.retained[g]).collect();
    let (class, kink_count) = match local_sites.len() {
        0 => (
            if det[0] > 0 {
                CrystalClass::ZigZag
            } else {
                CrystalClass::ZagZig
            },
            0,
        ),
        1 => (CrystalClass::SingleKink, 1),
        2 => (CrystalClass::DoubleKink, 2),
        _ => return Ok(ambiguous),
    };
    Ok(CrystalConfiguration {
        class,
        kink_count,
        kink_sites,
    })
}

/// Defect density d = (n1 + 2 n2) / N over classified (non-rejected) images.
pub fn defect_density(n1: usize, n2: usize, n_total: usize) -> Result<f64> {
    if n_total == 0 {
        return Err(KzmError::EmptyBatch);
    }
    if n1 + n2 > n_total {
        return Err(KzmError::Domain(format!(
            "kink counts {n1}+{n2} exceed batch size {n_total}"
        )));
    }
    Ok((n1 as f64 + 2.0 * n2 as f64) / n_total as f64)
}
