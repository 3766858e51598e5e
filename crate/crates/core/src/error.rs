use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("radius {r:e} below floor {floor:e}")]
    DegenerateRadius { r: f64, floor: f64 },
    #[error("point outside region: {0}")]
    RegionViolation(String),
    #[error("stencil leaves the sampled domain at {0}")]
    StencilOutOfDomain(String),
    #[error("grid mismatch: {0}")]
    GridMismatch(String),
    #[error("time derivative not available: {0}")]
    MissingTimeLevel(String),
    #[error("solver did not converge: relative residual {residual:e} after {iterations} iterations")]
    SolverNonConvergence { residual: f64, iterations: usize },
    #[error("weight exponent out of range: {0}")]
    WeightOutOfRange(String),
    #[error("parameter out of domain: {0}")]
    DomainError(String),
    #[error("evaluation on singular set: {0}")]
    SingularSet(String),
    #[error("time window [{t0}, {t1}] not covered by snapshots [{s0}, {s1}]")]
    WindowNotCovered { t0: f64, t1: f64, s0: f64, s1: f64 },
    #[error("CFL violation: dt/h = {ratio} exceeds {limit}")]
    CflViolation { ratio: f64, limit: f64 },
    #[error("non-finite value at t = {t}")]
    NanDetected { t: f64 },
    #[error("unknown initial-data recipe '{0}'")]
    RecipeUnknown(String),
    #[error("fit weights span less than one decade ({span:.3}x)")]
    InsufficientDecade { span: f64 },
    #[error("fit needs at least {needed} samples, got {got}")]
    TooFewSamples { needed: usize, got: usize },
    #[error("non-positive sample in decay series at index {0}")]
    NonPositiveSamples(usize),
    #[error("no charge in data (|q| = {0:e})")]
    NoChargedData(f64),
    #[error("exponents outside hypothesis: {0}")]
    ExponentOutOfRange(String),
    #[error("degenerate inequality case: {0}")]
    OutOfHypothesis(String),
    #[error("vector field is not conformal Killing with constant factor: {0}")]
    FieldNotConformalKilling(String),
    #[error("vector field not in the Lorentz algebra: {0}")]
    NotInAlgebra(String),
    #[error("config error at line {line}: {msg}")]
    ConfigParse { line: usize, msg: String },
    #[error("invalid config: {0}")]
    ConfigInvalid(String),
    #[error("snapshot parse error: {0}")]
    SnapshotParse(String),
    #[error("io: {0}")]
    Io(String),
}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}
