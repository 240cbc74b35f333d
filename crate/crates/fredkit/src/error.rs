//! Crate-wide error type.
//!
//! Numerical certification failures are ordinary values here, not panics:
//! every refusal carries enough context (locations, margins, thresholds)
//! for the caller to decide whether to retune tolerances or to perturb.

use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    /// The relative singular-value cut fell inside a cluster, so the
    /// numerical rank (and hence kernel/cokernel dimensions) is not trustworthy.
    #[error("ambiguous numerical rank: gap ratio {gap:.3e} at the cut is below the guard {guard:.3e}")]
    AmbiguousRank { gap: f64, guard: f64 },

    /// Dimension mismatch between operators, frames or vectors.
    #[error("shape mismatch: {0}")]
    ShapeError(String),

    /// No stabilization of the requested size certifies surjectivity along the path.
    #[error("stabilization failed: {0}")]
    StabilizationFailed(String),

    /// The Schur-complement chart is not valid at the requested operator.
    #[error("operator outside chart domain: {0}")]
    OutsideChart(String),

    /// An operator family fails to be surjective on the domain boundary.
    #[error("family not surjective on the boundary: min sigma {found:.3e} <= required {required:.3e} near ({x:.6}, {y:.6})")]
    BoundaryNotSurjective { found: f64, required: f64, x: f64, y: f64 },

    /// A zero of the family has corank at least two; the family meets a
    /// deeper stratum and the mod-2 count over the corank-one stratum is
    /// undefined without a perturbation, which is left to the caller.
    #[error("corank {corank} >= 2 at ({x:.6}, {y:.6}); family meets a deeper stratum")]
    CorankTooHigh { corank: usize, x: f64, y: f64 },

    /// Subdivision could not separate candidate zeros into isolated points.
    #[error("could not isolate zeros: {0}")]
    NonIsolatedZeros(String),

    /// The traced value is not regular along the preimage curve.
    #[error("value not regular along the trace: {0}")]
    NotRegular(String),

    /// A preimage trace left the search box.
    #[error("trace escaped the search box near {0:?}")]
    EscapedBox(Vec<f64>),

    /// An iterative solve stalled above its residual tolerance.
    #[error("{what} did not converge: residual {residual:.3e}")]
    NoConvergence { what: String, residual: f64 },

    /// Zero is not a regular value of the homotopy being audited.
    #[error("not a regular value of the homotopy: {0}")]
    NotRegularValue(String),

    /// Orientation transport lost the kernel bundle (step too coarse or
    /// the stabilized kernel degenerated).
    #[error("frame transport collapsed: {0}")]
    FrameCollapse(String),

    /// A rewrite move was applied to a class that does not admit it.
    #[error("illegal move: {0}")]
    IllegalMove(String),

    /// Two class descriptors carry the same label but different spin flags.
    #[error("inconsistent spin flags for label {0:?}")]
    InconsistentSpin(String),

    /// Malformed user input (schema violations, bad shapes, non-finite data).
    #[error("invalid input: {0}")]
    InvalidInput(String),
}

pub type Result<T> = std::result::Result<T, Error>;
