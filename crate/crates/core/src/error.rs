use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    /// An argument fell outside the mathematical domain of the operation.
    #[error("domain error: {0}")]
    Domain(String),

    #[error("visibility undefined: both counts are zero")]
    UndefinedVisibility,

    #[error("error rate undefined: code-mode gain is zero")]
    ErrorRateUndefined,

    #[error("Fock-yield oracle unstable: reconstruction residual {residual:.3e} exceeds {tolerance:.1e}")]
    OracleUnstable { residual: f64, tolerance: f64 },

    #[error("incomplete decoy data, missing pairs: {}", .0.join(", "))]
    IncompleteData(Vec<String>),

    /// The decoy constraints admit no yield vector. `min_relative_slack` is the
    /// smallest uniform relative widening of every data constraint that
    /// restores feasibility, when it could be computed.
    #[error("infeasible linear program (worst constraint {constraint}){}",
        .min_relative_slack.map(|s| format!(", minimal relative slack {s:.3e}")).unwrap_or_default())]
    Infeasible {
        constraint: String,
        min_relative_slack: Option<f64>,
    },

    #[error("unbounded: {0}")]
    Unbounded(String),

    #[error("configuration error: {0}")]
    Configuration(String),

    #[error("numerical failure: {0}")]
    Numerical(String),
}

impl Error {
    pub(crate) fn domain(msg: impl Into<String>) -> Self {
        Error::Domain(msg.into())
    }
}
