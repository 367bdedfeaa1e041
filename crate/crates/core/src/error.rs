use crate::height::HeightField;

/// Errors raised by the wave solver and its reconstruction routines.
#[derive(Debug, thiserror::Error)]
pub enum WaveError {
    #[error("{what} = {value} lies outside the admissible interval [{lo}, {hi}]")]
    OutOfRange {
        what: &'static str,
        value: f64,
        lo: f64,
        hi: f64,
    },

    #[error("precondition violated: {0}")]
    Precondition(String),

    #[error("no real surface slope: head Q = {head} is below the laminar minimum {min_head}")]
    NoRealSlope { head: f64, min_head: f64 },

    #[error("h_p = {hp:.3e} <= {eps:.3e} at (q index {i}, p index {j}): flow too close to stagnation")]
    StagnationProximity { i: usize, j: usize, hp: f64, eps: f64 },

    #[error("laminar profile is not monotone at p = {p}: h_p = {hp}")]
    NonMonotone { p: f64, hp: f64 },

    #[error("no bifurcation found while scanning bed slope w0 in [{lo}, {hi}]")]
    NoBifurcation { lo: f64, hi: f64 },

    #[error("Newton diverged at iteration {iteration}: residual {residual:.3e} did not decrease after {halvings} step halvings")]
    Divergence {
        iteration: usize,
        residual: f64,
        halvings: usize,
    },

    #[error("Newton stalled: step norm {step:.3e} but residual {residual:.3e} above tolerance {tol:.1e}")]
    ConvergenceStall { step: f64, residual: f64, tol: f64 },

    #[error("Newton did not converge in {iterations} iterations (residual {residual:.3e})")]
    MaxIterations { iterations: usize, residual: f64 },

    #[error("converged field violates invariants: {}", .violations.join("; "))]
    InvariantViolation {
        violations: Vec<String>,
        field: Box<HeightField>,
    },

    #[error("linear system is singular at pivot {0}")]
    Singular(usize),

    #[error("streamline at p = {p} has |y_xx| below the curvature band everywhere")]
    DegenerateCurve { p: f64 },

    #[error("fluid region too thin: {0}")]
    FluidTooThin(String),

    #[error("schema error: {0}")]
    Schema(String),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T, E = WaveError> = std::result::Result<T, E>;
