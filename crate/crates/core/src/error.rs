use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("unsupported grid size {0}: need an even number of points, at least 8")]
    UnsupportedGridSize(usize),

    #[error("length mismatch: expected {expected} samples, found {found}")]
    LengthMismatch { expected: usize, found: usize },

    #[error("degenerate field: norm is zero or not finite")]
    DegenerateField,

    #[error("invalid parameter: {0}")]
    InvalidParams(String),

    #[error("meter readout requested on a state with no apparatus particles")]
    NoApparatus,

    #[error("particle index {0} out of range")]
    NoSuchParticle(usize),

    #[error("numerical blow-up at step {step} (t = {time})")]
    NumericalBlowup { step: u64, time: f64 },

    #[error("unknown propagator `{0}`")]
    UnknownPropagator(String),

    #[error("need at least {needed} rows, got {found}")]
    TooFewRows { needed: usize, found: usize },
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
