use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum QhgError {
    #[error("domain error: {0}")]
    Domain(String),

    #[error("singular input: {0}")]
    Singular(String),

    #[error("invalid mesh: {0}")]
    InvalidMesh(String),

    #[error("invalid path: {0}")]
    InvalidPath(String),

    #[error("tetrahedron {tet} is not idealizable: {reason}")]
    NotIdealizable { tet: usize, reason: String },

    #[error("missing decoration: {0}")]
    Undecorated(String),

    #[error("integer system infeasible: {0}")]
    Infeasible(String),

    #[error("iteration did not converge: {0}")]
    NoConvergence(String),

    #[error("parse error: {0}")]
    Parse(String),
}

pub type Result<T> = std::result::Result<T, QhgError>;
