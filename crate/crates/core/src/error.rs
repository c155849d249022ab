use thiserror::Error;

/// Errors raised by the library.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("binary collision: separation {separation:e} below threshold {threshold:e}")]
    BinaryCollision { separation: f64, threshold: f64 },

    #[error("total collision: moment of inertia {inertia:e}")]
    TotalCollision { inertia: f64 },

    #[error("critical point of the measure: |grad mu| = {grad_norm:e}")]
    CriticalPoint { grad_norm: f64 },

    #[error("unphysical bipolar point ({r1}, {r2}): triangle radicand {radicand:e} < 0")]
    Unphysical { r1: f64, r2: f64, radicand: f64 },

    #[error("collinear singularity of the bipolar chart: radicand {radicand:e}")]
    CollinearSingularity { radicand: f64 },

    #[error("degenerate discriminant in the two-root solve")]
    DegenerateDiscriminant,

    #[error("polynomial root finding failed: {0}")]
    RootFindingFailure(String),

    #[error("series Newton iteration did not converge: {0}")]
    NewtonDivergence(String),

    #[error("precision exhausted: {0}")]
    PrecisionExhausted(String),

    #[error("series sqrt needs an even leading exponent, got {0}")]
    SqrtBranch(i32),

    #[error("division by the zero series")]
    DivideByZeroSeries,

    #[error("need at least {needed} samples, got {got}")]
    InsufficientSamples { needed: usize, got: usize },

    #[error("step size underflow at t = {t}")]
    StepSizeUnderflow { t: f64 },

    #[error("solver stalled: {0}")]
    SolverStall(String),

    #[error("contour not closed within {nodes} nodes")]
    OpenContourBudget { nodes: usize },

    #[error("invalid input: {0}")]
    InvalidInput(String),
}

pub type Result<T> = std::result::Result<T, Error>;
