use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("invalid potential: {0}")]
    InvalidPotential(String),
    #[error("invalid initial state: {0}")]
    InvalidState(String),
    #[error("floating-point overflow evaluating w({re}{im:+}i)")]
    Overflow { re: f64, im: f64 },
    #[error("outside the domain of validity: {0}")]
    Domain(String),
    #[error("matching function is undefined at k = 0")]
    ZeroWavenumber,
    #[error("zero of the matching function at k = {re}{im:+}i lies on a coordinate axis")]
    AxisZero { re: f64, im: f64 },
    #[error("winding audit failed: {0}")]
    WindingMismatch(String),
    #[error("completeness normalization is singular for pole n = {n}")]
    NormalizationSingular { n: i64 },
    #[error("quadrature did not reach tolerance {tol:e} (last change {achieved:e})")]
    ToleranceNotMet { tol: f64, achieved: f64 },
    #[error("truncated series unstable at t = {t}: {reason}")]
    TruncationUnstable { t: f64, reason: String },
    #[error("time window [{lo}, {hi}] contains no grid points")]
    EmptyWindow { lo: f64, hi: f64 },
    #[error("non-positive probability {p:e} at t = {t}")]
    NonPositiveProbability { t: f64, p: f64 },
    #[error("t^-1 coefficient paths disagree: double sum {double_sum:e} vs integral {integral:e}")]
    EquivalenceViolation { double_sum: f64, integral: f64 },
    #[error("unstable propagation: {0}")]
    UnstableParameters(String),
    #[error("contamination horizon t = {horizon} precedes the analysis window end {window_end}")]
    HorizonTooShort { horizon: f64, window_end: f64 },
    #[error("invalid grid: {0}")]
    InvalidGrid(String),
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
    #[error("configuration error: {0}")]
    Config(String),
    #[error("i/o error: {0}")]
    Io(String),
}

impl Error {
    /// Stable machine-readable name of the variant.
    pub fn kind(&self) -> &'static str {
        match self {
            Error::InvalidPotential(_) => "InvalidPotential",
            Error::InvalidState(_) => "InvalidState",
            Error::Overflow { .. } => "Overflow",
            Error::Domain(_) => "DomainError",
            Error::ZeroWavenumber => "ZeroWavenumber",
            Error::AxisZero { .. } => "AxisZero",
            Error::WindingMismatch(_) => "WindingMismatch",
            Error::NormalizationSingular { .. } => "NormalizationSingular",
            Error::ToleranceNotMet { .. } => "ToleranceNotMet",
            Error::TruncationUnstable { .. } => "TruncationUnstable",
            Error::EmptyWindow { .. } => "EmptyWindow",
            Error::NonPositiveProbability { .. } => "NonPositiveProbability",
            Error::EquivalenceViolation { .. } => "EquivalenceViolation",
            Error::UnstableParameters(_) => "UnstableParameters",
            Error::HorizonTooShort { .. } => "HorizonTooShort",
            Error::InvalidGrid(_) => "InvalidGrid",
            Error::InvalidArgument(_) => "InvalidArgument",
            Error::Config(_) => "ConfigError",
            Error::Io(_) => "IoError",
        }
    }

    /// Configuration problems are reported separately from numerical ones.
    pub fn is_config_error(&self) -> bool {
        matches!(
            self,
            Error::Config(_)
                | Error::InvalidPotential(_)
                | Error::InvalidState(_)
                | Error::InvalidGrid(_)
                | Error::InvalidArgument(_)
        )
    }
}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}
