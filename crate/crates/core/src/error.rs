use std::io;
use std::path::PathBuf;

use thiserror::Error;

use crate::video::Structure;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("temporal level {level} is not valid for {structure:?} (gop {gop_size})")]
    InvalidLevel { structure: Structure, level: u8, gop_size: u32 },

    #[error("empty trace")]
    EmptyTrace,

    #[error("trace line {line}: {message}")]
    TraceParse { line: u64, message: String },

    #[error("trace frame {frame}: {message}")]
    TraceInvariant { frame: u32, message: String },

    #[error("frame {frame} references unknown frame {reference}")]
    DanglingReference { frame: u32, reference: u32 },

    #[error("no packets recorded for frame {frame}")]
    MissingFrame { frame: u32 },

    #[error("gop size {0} is not a power of two")]
    NonPowerOfTwoGop(u32),

    #[error("loss trace exhausted after {0} entries")]
    TraceExhausted(usize),

    #[error("unknown parameter path `{0}`")]
    InvalidPath(String),

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: io::Error,
    },

    #[error("serialization: {0}")]
    Serialization(String),
}

impl Error {
    pub(crate) fn config(msg: impl Into<String>) -> Self {
        Error::Config(msg.into())
    }

    pub(crate) fn io(path: impl Into<PathBuf>, source: io::Error) -> Self {
        Error::Io { path: path.into(), source }
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
