use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("invalid mixture: {0}")]
    Mixture(String),
    #[error("invalid RSB parameters: {0}")]
    Rsb(String),
    #[error("argument out of range: {0}")]
    Domain(String),
    #[error("size budget exceeded: {0}")]
    Budget(String),
    #[error("unsupported request: {0}")]
    Unsupported(String),
    #[error("quadrature failure: {0}")]
    Quadrature(String),
}

pub type Result<T> = std::result::Result<T, Error>;
