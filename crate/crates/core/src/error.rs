use alloc::string::String;

/// Errors reported by the library.
#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum Error {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("dimension mismatch in {context}: expected {expected}, found {found}")]
    Dimension {
        context: &'static str,
        expected: usize,
        found: usize,
    },

    #[error("training failed: {0}")]
    Training(String),

    #[error(
        "innovation matrix in {context} is not positive definite; increase the epsilon of the offending constraint class"
    )]
    Conditioning { context: &'static str },

    #[error("downdate lost definiteness: {0}")]
    Downdate(String),

    #[error("scaling singularity: demonstrated displacement of dof {dof} is zero")]
    ScalingSingularity { dof: usize },

    #[error("obstacle {index} penetrated (surface value {psi:.3e})")]
    Penetration { index: usize, psi: f64 },

    #[error("non-finite value produced in {0}")]
    NonFinite(&'static str),

    #[error("batch oracle: {0}")]
    Oracle(String),
}

pub type Result<T> = core::result::Result<T, Error>;

pub(crate) fn invalid(msg: impl Into<String>) -> Error {
    Error::InvalidArgument(msg.into())
}

pub(crate) fn check_dim(context: &'static str, expected: usize, found: usize) -> Result<()> {
    if expected == found {
        Ok(())
    } else {
        Err(Error::Dimension {
            context,
            expected,
            found,
        })
    }
}
