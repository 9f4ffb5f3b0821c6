use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("invalid grid: {0}")]
    InvalidGrid(String),

    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("lag {lag} outside tabulated range [0, {max}]")]
    OutOfRange { lag: f64, max: f64 },

    #[error("discretized system is singular (condition estimate {condition:.3e})")]
    SolverFailure { condition: f64 },

    #[error("degenerate horizon: {0}")]
    DegenerateHorizon(String),

    #[error("degenerate kernel: {0}")]
    DegenerateKernel(String),

    #[error("state is not normalizable: {0}")]
    NonNormalizable(String),

    #[error("no finite asymptote: Re(alpha_inf) = {0:e}")]
    NoFiniteAsymptote(f64),

    #[error("oracle failure: {reason} (condition estimate {condition:.3e})")]
    OracleFailure { reason: String, condition: f64 },

    #[error("trajectory seed {seed} failed at T = {time:e}: {source}")]
    Trajectory {
        seed: u64,
        time: f64,
        #[source]
        source: Box<Error>,
    },

    #[error("{} trajectories failed (seeds {seeds:?})", seeds.len())]
    EnsembleFailure { seeds: Vec<u64>, first: Box<Error> },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}
