use thiserror::Error;

pub type Result<T> = std::result::Result<T, RdpError>;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum RdpError {
    /// An argument lies outside the domain of the operation.
    #[error("domain error: {0}")]
    Domain(String),
    /// A root finder did not reach its tolerance.
    #[error("convergence failure in {stage} after {iterations} iterations")]
    Convergence { stage: &'static str, iterations: usize },
    /// The budget pair does not belong to the region the solver was asked to handle.
    #[error("infeasible: {0}")]
    Infeasible(String),
    /// Brute-force verifiers only scale to a handful of components.
    #[error("size limit: {n} components exceeds the maximum of {max}")]
    Size { n: usize, max: usize },
    #[error("parse error: {0}")]
    Parse(String),
    #[error("validation error: {0}")]
    Validation(String),
}

impl RdpError {
    pub(crate) fn domain(msg: impl Into<String>) -> Self {
        RdpError::Domain(msg.into())
    }
}
