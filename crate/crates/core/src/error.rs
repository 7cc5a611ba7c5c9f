use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("non-finite value in {0}")]
    NonFinite(&'static str),

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("sensor {sensor}: coefficient pair k=±{k} violates conjugate symmetry (residual {residual:e})")]
    ConjugateSymmetry { sensor: String, k: usize, residual: f64 },

    #[error("rank-deficient least-squares system: {params} parameters, {samples} samples, effective rank {rank}")]
    RankDeficient { params: usize, samples: usize, rank: usize },

    #[error("malformed observation for sensor {sensor}: {reason}")]
    MalformedObservation { sensor: usize, reason: String },

    #[error("no detections: the detected-only cost carries no information")]
    NoInformation,

    #[error("truncation normalizer underflows (interval {lo}..{hi} is beyond the representable tail)")]
    NormalizerUnderflow { lo: f64, hi: f64 },

    #[error("{path}:{line}: {msg}")]
    Parse { path: String, line: usize, msg: String },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
