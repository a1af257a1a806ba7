use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("unknown population `{0}`")]
    UnknownPopulation(String),

    #[error("projection `{projection}`: in-degree {k} exceeds the {available} available sources")]
    InfeasibleInDegree {
        projection: String,
        k: usize,
        available: usize,
    },

    #[error("`{0}` has not been sampled")]
    NotSampled(String),

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("threshold rate undefined: {0}")]
    UndefinedThreshold(String),

    #[error("missing data file {path}: {source}")]
    MissingData {
        path: PathBuf,
        source: std::io::Error,
    },

    #[error("degenerate scale: population `{0}` would have no neurons")]
    DegenerateScale(String),

    #[error("zero driving force for `{0}` at the assumed mean potential")]
    SingularDrivingForce(String),

    #[error("unsupported: {0}")]
    Unsupported(String),

    #[error("samples per target ({samples}) exceed pool size ({pool})")]
    PoolTooSmall { samples: u32, pool: u32 },

    #[error("no valid parameter draw for population `{0}` after 100 attempts")]
    VariationExhausted(String),

    #[error("zero capacity: {0}")]
    ZeroCapacity(String),

    #[error("fan-in {fan_in} exceeds the combined-neuron limit of {limit}")]
    InfeasibleFanIn { fan_in: usize, limit: usize },

    #[error("placement overflow: {0}")]
    PlacementOverflow(String),

    #[error("mapping result does not belong to this network/topology")]
    MappingMismatch,

    #[error("delay {delay} ms in `{origin}` is shorter than the time step {dt} ms")]
    DelayBelowStep { origin: String, delay: f64, dt: f64 },

    #[error("non-finite state in neuron {neuron} at t = {time} ms")]
    NonFiniteState { neuron: u32, time: f64 },

    #[error("rate {rate} Hz gives a per-step probability {prob} > 1")]
    RateTooHigh { rate: f64, prob: f64 },

    #[error("invalid analysis window: {0}")]
    InvalidWindow(String),

    #[error("histogram needs at least one bin")]
    ZeroBins,

    #[error("synchrony needs at least two recorded neurons")]
    TooFewNeurons,

    #[error("wall time must be positive")]
    ZeroWallTime,

    #[error("malformed file: {0}")]
    Format(String),

    #[error("stage `{stage}` failed: {source}")]
    Stage {
        stage: &'static str,
        source: Box<Error>,
    },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    /// Process exit code used by the command line front end.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Stage { source, .. } => source.exit_code(),
            Error::InfeasibleFanIn { .. }
            | Error::PlacementOverflow(_)
            | Error::MappingMismatch
            | Error::ZeroCapacity(_) => 3,
            Error::NonFiniteState { .. } | Error::DelayBelowStep { .. } | Error::RateTooHigh { .. } => 4,
            Error::Io(_) | Error::Json(_) | Error::MissingData { .. } => 1,
            _ => 2,
        }
    }

    pub(crate) fn in_stage(self, stage: &'static str) -> Error {
        Error::Stage {
            stage,
            source: Box::new(self),
        }
    }
}
