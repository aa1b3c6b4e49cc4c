use thiserror::Error;

/// Errors raised by the toolkit. Violations of scheme feasibility are not
/// errors; they are returned as data by [`crate::mapping::validate`].
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
    #[error("grid too coarse: resolution {resolution_hz} Hz exceeds tooth width / 10 = {limit_hz} Hz")]
    GridTooCoarse { resolution_hz: f64, limit_hz: f64 },
    #[error("grid time window {window_s} s shorter than four echo delays ({required_s} s)")]
    TimeWindowTooShort { window_s: f64, required_s: f64 },
    #[error("sample count {0} is not a power of two")]
    NotPowerOfTwo(usize),
    #[error("profiles are defined on different grids")]
    GridMismatch,
    #[error("pulse spectrum clipped by grid: relative amplitude {edge_amplitude:e} at band edge")]
    PulseClipped { edge_amplitude: f64 },
    #[error("window [{start_s}, {end_s}) s is outside the trace [{trace_start_s}, {trace_end_s}) s")]
    WindowOutsideTrace {
        start_s: f64,
        end_s: f64,
        trace_start_s: f64,
        trace_end_s: f64,
    },
    #[error("trace energy {0} exceeds the normalized input energy")]
    UnnormalizedTrace(f64),
    #[error("frequency mode {k} out of range 1..={n_freq}")]
    ModeOutOfRange { k: usize, n_freq: usize },
    #[error("infeasible scheme: {0}")]
    InfeasibleScheme(String),
    #[error("need at least {need} frequency modes, have {have}")]
    TooFewModes { need: usize, have: usize },
    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },
    #[error("io: {0}")]
    Io(String),
}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}

pub type Result<T> = std::result::Result<T, Error>;
