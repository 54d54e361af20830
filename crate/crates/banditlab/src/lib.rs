//! A laboratory for the `UCB1` multi-armed bandit policy.
//!
//! The crate has two halves that check each other:
//!
//! * a stochastic half — [`bandit`] simulates `UCB1` trajectories on Gaussian
//!   bandit instances, [`montecarlo`] replicates them reproducibly in parallel,
//!   and [`inference`] / [`linear`] build confidence intervals and CLT
//!   statistics from the adaptively collected data;
//! * a deterministic half — [`oracle`] solves the noiseless fixed-point
//!   equation that predicts how many times `UCB1` pulls each arm, and from it
//!   the theoretical regret, growth curves, and error budgets.
//!
//! Monte-Carlo estimates from the first half are compared against the exact
//! quantities from the second; the `acceptance` integration test runs the full
//! comparison suite.

pub mod bandit;
pub mod inference;
pub mod linear;
pub mod montecarlo;
pub mod normal;
pub mod oracle;
pub mod rng;

pub use bandit::{BanditInstance, EventReport, TieBreak, Trajectory, UcbConfig};
pub use montecarlo::{McConfig, McSummary};
pub use oracle::{ErrorBudget, OracleSolution};

/// Errors reported by the library.
#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum Error {
    /// A bandit instance violated a structural invariant.
    #[error("invalid bandit instance: {0}")]
    InvalidInstance(String),
    /// A run configuration violated a precondition.
    #[error("invalid configuration: {0}")]
    InvalidConfig(String),
    /// An argument left the mathematical domain of an operation.
    #[error("domain error: {0}")]
    Domain(String),
    /// Instance and trajectory dimensions disagree.
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),
    /// A covariance matrix was numerically singular where an inverse (or an
    /// inverse square root) was required.
    #[error("singular covariance: lambda_min = {lambda_min:.6e} (lambda_max = {lambda_max:.6e}); use lambda > 0")]
    SingularCovariance { lambda_min: f64, lambda_max: f64 },
}

/// Crate-wide result alias.
pub type Result<T> = std::result::Result<T, Error>;
