use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid map: {0}")]
    InvalidMap(String),
    #[error("parse error at line {line}: {msg}")]
    Parse { line: usize, msg: String },
    #[error("invalid config: {0}")]
    InvalidConfig(String),
    #[error("map generation failed after {attempts} attempts")]
    GenerationFailed { attempts: usize },
    #[error("illegal move from {from} to {to}")]
    IllegalMove { from: crate::Position, to: crate::Position },
    #[error("occupancy grid has no probability mass left")]
    Exhausted,
    #[error("door at {0} is unreachable from the start")]
    UnreachableDoor(crate::Position),
    #[error("instance has {clusters} clusters, exact solver supports at most {max}")]
    TooLarge { clusters: usize, max: usize },
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Csv(#[from] csv::Error),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
