//! Crate-wide error type.

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("n_points must be even >= 8, got {0}")]
    BadGridSize(usize),
    #[error("grid length must be positive and finite, got {0}")]
    BadGridLength(f64),
    #[error("components must be >= 1")]
    BadComponentCount,
    #[error("value array has length {got}, grid expects {expected}")]
    BadValueLength { got: usize, expected: usize },
    #[error("field contains a non-finite value at flat index {0}")]
    NonFiniteValue(usize),
    #[error("grid mismatch: {0}")]
    GridMismatch(&'static str),

    #[error("beta must lie in (0, 1], got {0}")]
    BadBeta(f64),
    #[error("sigma must be >= 0 and finite, got {0}")]
    BadSigma(f64),
    #[error("duration must be >= 0 and finite, got {0}")]
    BadDuration(f64),
    #[error("degenerate duration: sigma*t = 0 has a point-mass kernel")]
    DegenerateDuration,
    #[error("no closed form for beta = {0}; only 1/2 and 1 are supported")]
    UnsupportedClosedForm(f64),
    #[error(
        "kernel synthesis undershoot {min:.3e} below tolerance; grid cannot resolve this kernel"
    )]
    KernelUndershoot { min: f64 },
    #[error("tail fit window must satisfy 0 < lo < hi < length/2, got [{lo}, {hi}]")]
    BadTailWindow { lo: f64, hi: f64 },
    #[error("tail fit window holds {0} samples, need at least 8")]
    TailWindowTooSmall(usize),

    #[error("reaction spec invalid: {0}")]
    BadReaction(String),
    #[error("reaction expects {expected} components, got {got}")]
    ComponentMismatch { expected: usize, got: usize },
    #[error("ode options invalid: {0}")]
    BadOdeOptions(&'static str),
    #[error("flow requires t >= t0, got t = {t}, t0 = {t0}")]
    BackwardFlow { t: f64, t0: f64 },
    #[error("flow blew up at t ~ {0}; cannot complete the requested comparison")]
    BlowUpInComparison(f64),

    #[error("step size must be positive and finite, got {0}")]
    BadStepSize(f64),
    #[error("horizon must be positive and finite, got {0}")]
    BadHorizon(f64),
    #[error("t_end/h = {ratio} is not within 1% of an integer")]
    IncommensurateStep { ratio: f64 },
    #[error("order estimation needs at least 3 step sizes, got {0}")]
    TooFewStepSizes(usize),
    #[error("order estimation hit blow-up at h = {h} (t ~ {t})")]
    BlowUpInOrderSweep { h: f64, t: f64 },
    #[error("reference solution blew up at t ~ {0}")]
    BlowUpInReference(f64),

    #[error("lattice spec invalid: {0}")]
    BadLattice(String),
    #[error(
        "skip_cells = {skip} leaves nothing to average over {cells} cells (need 2*skip < cells)"
    )]
    NothingToAverage { skip: usize, cells: usize },
    #[error("outer_fraction must lie in (0, 0.25] and cover >= 1 point, got {0}")]
    BadOuterFraction(f64),
    #[error("state mismatch: {0}")]
    StateMismatch(&'static str),

    #[error("{0}")]
    Config(String),
    #[error("snapshot format error: {0}")]
    SnapshotFormat(String),
    #[error("io error on {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
}

impl Error {
    /// Configuration errors exit with status 2; everything else is a runtime
    /// numeric/IO failure and exits with status 3.
    pub fn is_config(&self) -> bool {
        matches!(self, Error::Config(_))
    }

    pub(crate) fn io(path: &std::path::Path, source: std::io::Error) -> Self {
        Error::Io {
            path: path.display().to_string(),
            source,
        }
    }
}
