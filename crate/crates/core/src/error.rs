use thiserror::Error;

/// Errors raised by the estimation, bounds and harness layers.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("coherence undefined for single column")]
    SingleColumn,
    #[error("design column {0} is identically zero")]
    ZeroColumn(usize),
    #[error("design matrix must have at least one row and one column")]
    EmptyDesign,
    #[error("dimension mismatch: {0}")]
    Dimension(String),
    #[error("parameter out of range: {0}")]
    OutOfRange(String),
    #[error("support exceeds capacity: |spt(u)| = {support} > n(nu) = {capacity}")]
    SupportExceedsCapacity { support: usize, capacity: f64 },
    #[error("non-binary entry at ({row}, {col})")]
    NonBinary { row: usize, col: usize },
    #[error("empty point set")]
    EmptyPointSet,
    #[error("flat family on I: curvature infimum {0} is not positive")]
    FlatFamily(f64),
    #[error("natural parameter outside the family interval at row {row}")]
    NaturalParameter { row: usize },
    #[error("degenerate interval: {0}")]
    DegenerateInterval(String),
    #[error("non-identifiable link on I: d(f, I) = {0}")]
    NonIdentifiable(f64),
    #[error("function is singular at {0}")]
    Singular(f64),
    #[error("contour touches a pole: radius {radius} >= {limit}")]
    ContourTouchesPole { radius: f64, limit: f64 },
    #[error("unbounded coefficient envelope: {0}")]
    UnboundedEnvelope(String),
    #[error("theta too close to 1: series terms not decaying by k = {0}")]
    SeriesNotDecaying(usize),
    #[error("domain exceeds analytic radius: d = {d} >= r = {r}")]
    DomainExceedsRadius { d: f64, r: f64 },
    #[error("non-compact domain: {0}")]
    NonCompact(String),
    #[error("covering grid construction failed: {0}")]
    Grid(String),
    #[error("enumeration budget exceeded: {count} > {budget}")]
    EnumerationBudget { count: f64, budget: f64 },
    #[error("empty domain: no support admits a feasible point")]
    EmptyDomain,
    #[error("infeasible parameter after {0} rescale attempts")]
    InfeasibleTruth(usize),
    #[error("spectral radius {0} exceeds 1")]
    SpectralRadius(f64),
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error("i/o error: {0}")]
    Io(String),
    #[error("parse error: {0}")]
    Parse(String),
}

impl Error {
    /// True for errors caused by malformed inputs rather than failed computation.
    pub fn is_validation(&self) -> bool {
        matches!(self, Error::Config(_) | Error::Io(_) | Error::Parse(_) | Error::Dimension(_) | Error::EmptyDesign)
    }
}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}

impl From<csv::Error> for Error {
    fn from(e: csv::Error) -> Self {
        Error::Parse(e.to_string())
    }
}

impl From<serde_json::Error> for Error {
    fn from(e: serde_json::Error) -> Self {
        Error::Parse(e.to_string())
    }
}

pub type Result<T> = std::result::Result<T, Error>;
