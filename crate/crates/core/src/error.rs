use thiserror::Error;

/// Errors produced by the simulation library.
#[derive(Debug, Error)]
pub enum KzmError {
    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("domain error: {0}")]
    Domain(String),

    #[error("value out of range: {0}")]
    Range(String),

    #[error("RF stability violated: Mathieu q = {q:.4} >= 0.4")]
    Stability { q: f64 },

    #[error("minimizer did not converge after {iterations} iterations (gradient norm {gradient_norm:.3e})")]
    Convergence {
        iterations: usize,
        gradient_norm: f64,
        /// Best iterate found, flattened N x 3 positions in scaled units.
        best_positions: Vec<[f64; 3]>,
    },

    #[error("ions {i} and {j} closer than singularity guard ({distance:.3e} scaled)")]
    Singularity { i: usize, j: usize, distance: f64 },

    #[error("numerical blowup: non-finite state for ion {ion} at t = {time:.6e} s")]
    NumericalBlowup { ion: usize, time: f64 },

    #[error("invalid state: {0}")]
    State(String),

    #[error("insufficient data: {0}")]
    InsufficientData(String),

    #[error("degenerate fit: {0}")]
    DegenerateFit(String),

    #[error("empty batch: defect density undefined for zero classified images")]
    EmptyBatch,

    #[error("shape mismatch: {0}")]
    ShapeMismatch(String),

    #[error("sweep failed: {0}")]
    Sweep(String),

    #[error("internal error: {0}")]
    Internal(String),
}

pub type Result<T> = std::result::Result<T, KzmError>;
