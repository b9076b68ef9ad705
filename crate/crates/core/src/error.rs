use std::io;

use thiserror::Error;

use crate::ply::PlyError;
use crate::stream::codec::DecodeError;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    /// A caller-supplied parameter violates an operation's precondition.
    #[error("invalid parameter: {0}")]
    Param(String),

    #[error("insufficient samples: need at least {required}, got {got}")]
    InsufficientSamples { required: usize, got: usize },

    /// Too few static/dynamic overlap pairs to estimate color statistics.
    #[error("insufficient overlap: {pairs} pairs found, {required} required")]
    InsufficientOverlap { pairs: usize, required: usize },

    /// Input data is well-typed but internally inconsistent.
    #[error("data error: {0}")]
    Data(String),

    #[error(transparent)]
    Ply(#[from] PlyError),

    #[error(transparent)]
    Decode(#[from] DecodeError),

    #[error("scene file: {0}")]
    Scene(String),

    #[error(transparent)]
    Io(#[from] io::Error),
}

impl Error {
    pub(crate) fn param(msg: impl Into<String>) -> Self {
        Error::Param(msg.into())
    }
}
