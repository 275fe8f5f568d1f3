use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("invalid grid extent: x_min={x_min}, x_max={x_max}, n_points={n_points}")]
    InvalidExtent { x_min: f64, x_max: f64, n_points: usize },
    #[error("invalid parameter `{name}`: {reason}")]
    InvalidParameter { name: &'static str, reason: String },
    #[error("wave packet does not fit on the grid: {0}")]
    SupportViolation(String),
    #[error("probe at x={x} is outside the grid interior [{lo}, {hi}]")]
    ProbeOutOfRange { x: f64, lo: f64, hi: f64 },
    #[error("state has zero norm")]
    ZeroNorm,
    #[error("grid resolution too coarse: {0}")]
    Resolution(String),
    #[error("tridiagonal solve hit a zero pivot at row {0}")]
    SingularSolve(usize),
    #[error("more than one detector is active")]
    MultipleActiveDetectors,
    #[error("detector is effectively blind: absorbed norm {absorbed:e} below threshold")]
    ZeroAbsorption { absorbed: f64 },
    #[error("packet has no overlap with the detector window (overlap {overlap:e})")]
    ZeroOverlap { overlap: f64 },
    #[error("transmission {transmitted:e} below threshold")]
    ZeroTransmission { transmitted: f64 },
    #[error("backflow fraction {fraction:e} exceeds the allowed {limit:e}")]
    Backflow { fraction: f64, limit: f64 },
    #[error("norm record missing from detection series")]
    MissingNorm,
    #[error("no flux probe recorded at x={0}")]
    MissingProbe(f64),
    #[error("empty ensemble")]
    EmptyEnsemble,
    #[error("all-reflected: no branch reaches the arrival detector")]
    AllReflected,
    #[error("tau grid misses {missing:e} of the arrival probability")]
    TauGridCoverage { missing: f64 },
    #[error("nonpositive flux normalisation {0:e}")]
    NonpositiveDenominator(f64),
    #[error("time series is malformed: {0}")]
    Series(String),
    #[error("I/O error: {0}")]
    Io(String),
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

impl From<serde_json::Error> for Error {
    fn from(e: serde_json::Error) -> Self {
        Error::Io(e.to_string())
    }
}

impl Error {
    /// Short machine-readable code used in the `status` column of sweep output.
    pub fn code(&self) -> &'static str {
        match self {
            Error::InvalidExtent { .. } | Error::InvalidParameter { .. } => "invalid-config",
            Error::SupportViolation(_) => "support-violation",
            Error::ProbeOutOfRange { .. } => "probe-out-of-range",
            Error::ZeroNorm => "zero-norm",
            Error::Resolution(_) => "resolution",
            Error::SingularSolve(_) => "singular-solve",
            Error::MultipleActiveDetectors => "multiple-active-detectors",
            Error::ZeroAbsorption { .. } => "zero-absorption",
            Error::ZeroOverlap { .. } => "zero-overlap",
            Error::ZeroTransmission { .. } => "zero-transmission",
            Error::Backflow { .. } => "backflow",
            Error::MissingNorm => "missing-norm",
            Error::MissingProbe(_) => "missing-probe",
            Error::EmptyEnsemble => "empty-ensemble",
            Error::AllReflected => "all-reflected",
            Error::TauGridCoverage { .. } => "tau-grid-coverage",
            Error::NonpositiveDenominator(_) => "nonpositive-denominator",
            Error::Series(_) => "series",
            Error::Io(_) => "io",
        }
    }
}
