use thiserror::Error;

/// Errors for the geometry side of the crate (models through verification).
#[derive(Debug, Clone, Error)]
pub enum Error {
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimMismatch { expected: usize, got: usize },

    #[error("point outside chart")]
    OutsideChart,

    #[error("zero tangent vector")]
    ZeroVector,

    #[error("tangent vector outside validity cone")]
    OutsideCone,

    #[error("derivative order {order} (with {x_order} x-slots) exceeds the supported bound")]
    OrderExceeded { order: usize, x_order: usize },

    #[error("metric signature violation (expected one negative eigenvalue)")]
    SignatureViolation,

    #[error("singular metric: condition estimate {cond:.3e}")]
    SingularMetric { cond: f64 },

    #[error("trajectory left the chart at t={t}")]
    LeftChart { t: f64 },

    #[error("trajectory left the validity cone at t={t}")]
    LeftCone { t: f64 },

    #[error("integrator step underflow at t={t}")]
    StepUnderflow { t: f64 },

    #[error("boundary-value solver stalled after {iters} iterations (residual {residual:.3e})")]
    BvpNoConvergence { iters: usize, residual: f64 },

    #[error("zero reference vector")]
    ZeroReference,

    #[error("knot grid too coarse ({knots} knots) for field differentiation")]
    GridTooCoarse { knots: usize },

    #[error("degenerate flag: flagpole and transverse vector do not span a plane")]
    DegenerateFlag,

    #[error("vector is not timelike")]
    NotTimelike,

    #[error("vector is not causal")]
    NotCausal,

    #[error("endpoint condition violated: {0}")]
    EndpointCondition(String),

    #[error("sampling exhausted after {draws} draws ({found} found)")]
    SamplingExhausted { draws: usize, found: usize },

    #[error("bad config: {0}")]
    BadConfig(String),
}

pub type Result<T> = std::result::Result<T, Error>;
