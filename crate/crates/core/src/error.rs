use thiserror::Error;

/// Every failure the library can report.
///
/// Display strings are single-line so the CLI can forward them verbatim as a
/// machine-parsable error record.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum PensError {
    #[error("invalid grid: {0}")]
    InvalidGrid(String),
    #[error("grid mismatch: {0}")]
    GridMismatch(String),
    #[error("component mismatch: expected {expected}, found {found}")]
    ComponentMismatch { expected: usize, found: usize },
    #[error("non-finite value at index {index}")]
    NonFinite { index: usize },
    #[error("conjugate symmetry violation: relative defect {defect:e} exceeds 1e-10")]
    SymmetryViolation { defect: f64 },
    #[error("zero-frequency singularity: symbol is singular at xi=0 but the mean mode is nonzero")]
    ZeroFrequencySingularity,
    #[error("non-finite multiplier value at mode {index}")]
    NonFiniteSymbol { index: usize },
    #[error("vacuum/negativity: min rho = {min:e} at t = {t}")]
    Vacuum { min: f64, t: f64 },
    #[error("cfl violation: dt = {dt} exceeds limit {limit}")]
    CflViolation { dt: f64, limit: f64 },
    #[error("invalid time step: {0}")]
    InvalidTimeStep(String),
    #[error("numerical blow-up: non-finite state at t = {t}")]
    NumericalBlowUp { t: f64 },
    #[error("unknown preset '{0}'")]
    UnknownPreset(String),
    #[error("unknown profile '{0}'")]
    UnknownProfile(String),
    #[error("invalid config: {0}")]
    InvalidConfig(String),
    #[error("config line {line}: {message}")]
    ConfigLine { line: usize, message: String },
    #[error("missing channel '{0}'")]
    MissingChannel(String),
    #[error("invalid time series: {0}")]
    InvalidSeries(String),
    #[error("regularity mismatch: {0}")]
    RegularityMismatch(String),
    #[error("mean mismatch: rho difference has relative mean {relative:e} (must be below 1e-10)")]
    MeanMismatch { relative: f64 },
    #[error("time {t} outside sampled range [{start}, {end}]")]
    OutsideSampledRange { t: f64, start: f64, end: f64 },
    #[error("outside contraction regime: iterate distance increased twice in a row at iterate {iterate}")]
    OutsideContractionRegime { iterate: usize },
    #[error("picard iteration did not converge within {max_iter} iterates (last distance {distance:e})")]
    NotConverged { max_iter: usize, distance: f64 },
    #[error("divergent integral: {0}")]
    DivergentIntegral(String),
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
    #[error("order out of range: {0}")]
    OrderOutOfRange(String),
    #[error("nonpositive value {value:e} at t = {t} inside fit window")]
    NonPositiveValue { value: f64, t: f64 },
    #[error("too few points: {found} samples in window (need at least {needed})")]
    TooFewPoints { found: usize, needed: usize },
    #[error("window collapse: {0}")]
    WindowCollapse(String),
    #[error("snapshot: bad magic {found:?}, expected \"PENS\"")]
    BadMagic { found: [u8; 4] },
    #[error("snapshot: unsupported version {0}")]
    UnsupportedVersion(u8),
    #[error("snapshot: truncated payload ({found} bytes, expected {expected})")]
    Truncated { found: usize, expected: usize },
    #[error("snapshot: dimension mismatch: {0}")]
    DimensionMismatch(String),
    #[error("csv line {line}: {message}")]
    Csv { line: usize, message: String },
    #[error("io: {0}")]
    Io(String),
}

impl From<std::io::Error> for PensError {
    fn from(e: std::io::Error) -> Self {
        PensError::Io(e.to_string().replace('\n', " "))
    }
}

pub type Result<T> = std::result::Result<T, PensError>;
