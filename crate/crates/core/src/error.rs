use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Error, Debug, Clone)]
pub enum Error {
    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("no effective neighbors at u = {u} (kernel mass {mass:.3e})")]
    NoEffectiveNeighbors { u: f64, mass: f64 },

    #[error("calibration failed: {0}")]
    CalibrationFailed(String),

    #[error("degenerate curvature in local fit (|F_n| = {0:.3e})")]
    DegenerateCurvature(f64),

    #[error("degenerate EIF system: {0}")]
    DegenerateEifSystem(String),

    #[error("degenerate information matrix: {0}")]
    DegenerateInformation(String),

    #[error("initial fit failed: {0}")]
    InitialFitFailed(String),

    #[error("cross-validation failed: {0}")]
    CvFailed(String),

    #[error("near-boundary parametrization: |beta_q| = {0:.3e}")]
    NearBoundaryParametrization(f64),

    #[error("config error: {0}")]
    Config(String),

    #[error("parse error at line {line}: {msg}")]
    Parse { line: usize, msg: String },

    #[error("io error: {0}")]
    Io(String),

    #[error("simulation aborted: {0}")]
    SimAborted(String),
}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}

impl From<csv::Error> for Error {
    fn from(e: csv::Error) -> Self {
        Error::Io(e.to_string())
    }
}
