use alloc::string::String;

/// Errors raised by mesh construction, assembly and the solvers.
#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum Error {
    #[error("invalid mesh: {0}")]
    InvalidMesh(String),
    #[error("invalid kernel: {0}")]
    InvalidKernel(String),
    #[error("invalid configuration: {0}")]
    InvalidConfig(String),
    #[error("matrix is singular (block {block}, pivot {pivot})")]
    SingularMatrix { block: usize, pivot: usize },
    #[error("iteration diverged at step {iteration} (residual {residual:e})")]
    Diverged { iteration: usize, residual: f64 },
    #[error("Krylov breakdown at step {iteration} with residual {residual:e}")]
    Breakdown { iteration: usize, residual: f64 },
    #[error("dimension mismatch: {0}")]
    Dimension(String),
    #[error("problem too large for the dense path: {size} > {limit}")]
    TooLarge { size: usize, limit: usize },
}

pub type Result<T> = core::result::Result<T, Error>;
