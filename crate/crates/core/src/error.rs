use thiserror::Error;

/// Errors produced by the calibration, pricing and equilibrium routines.
#[derive(Debug, Error)]
pub enum Error {
    /// Utility parameters violate their family's invariants.
    #[error("invalid utility parameters: {0}")]
    InvalidParams(String),

    /// Market constants violate their invariants.
    #[error("invalid market parameters: {0}")]
    InvalidMarket(String),

    /// A data size lies below the feasible domain of the utility family.
    #[error("data size n = {n} is below the feasible minimum {n_min}")]
    Infeasible { n: f64, n_min: f64 },

    /// A provider decision violates `0 <= p_s <= phi(n) W'`.
    #[error("invalid provider decision: {0}")]
    InvalidDecision(String),

    #[error("degenerate input: {0}")]
    DegenerateInput(String),

    /// Malformed experiment-point file.
    #[error("line {line}: {message}")]
    Parse { line: u64, message: String },

    #[error("invalid search interval [{lo}, {hi}]")]
    InvalidBracket { lo: f64, hi: f64 },

    #[error("invalid grid: {0}")]
    InvalidGrid(String),

    /// The exponential closed form has no real roots for these inputs.
    #[error("closed form has a negative discriminant ({discriminant:e}); no interior optimum")]
    NegativeDiscriminant { discriminant: f64 },

    #[error("closed form produced no feasible candidate")]
    NoFeasibleCandidate,

    /// Closed forms are derived for unit maximum nominal willingness-to-pay only.
    #[error("closed forms require max nominal WTP = 1, got {0}")]
    UnitWtpRequired(f64),

    #[error("closed form for the {0} family is not available")]
    WrongFamily(&'static str),

    /// Free data makes the fixed-fee data demand unbounded.
    #[error("data price is zero; demand at a fixed fee is unbounded")]
    UnboundedDemand,

    #[error("no trade: demand stays at the domain minimum over the whole price interval")]
    NoTrade,

    #[error("demand point was computed at p_b = {point} but leader profit requested at p_b = {requested}")]
    PriceMismatch { requested: f64, point: f64 },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
