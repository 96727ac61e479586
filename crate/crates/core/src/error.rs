use thiserror::Error;

/// Errors produced across the sensing, tracking and beamforming chain.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error("SSB beam budget exceeded: {requested} beams requested, at most {max} allowed")]
    BeamBudget { requested: usize, max: usize },

    #[error("target outside the array field of view: {0}")]
    OutOfFieldOfView(String),

    #[error("singular geometry: {0}")]
    Singular(String),

    #[error("problem is infeasible: {0}")]
    Infeasible(String),

    #[error("solver did not converge within {iterations} iterations")]
    MaxIters { iterations: usize },

    #[error("no randomized candidate satisfied the SINR constraints")]
    NoFeasibleDraw,

    #[error("dimension mismatch: {0}")]
    Dimension(String),

    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),

    #[error("csv error: {0}")]
    Csv(#[from] csv::Error),

    #[error("config parse error: {0}")]
    Parse(String),
}

pub type Result<T> = std::result::Result<T, Error>;
