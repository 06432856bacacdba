use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("index {index} out of range for dimension {n}")]
    IndexOutOfRange { index: usize, n: usize },

    #[error("domain violation in `{node}` at value {value}")]
    Domain { node: String, value: f64 },

    #[error("dimension mismatch: expected {expected}, got {got}")]
    Dimension { expected: usize, got: usize },

    #[error("jet order {requested} exceeds the supported maximum {max}")]
    JetOrder { requested: usize, max: usize },

    #[error("weight order |alpha| = {requested} exceeds the cap {max}")]
    OrderCap { requested: usize, max: usize },

    #[error("kernel singularity at the origin (d = {d})")]
    Singular { d: usize },

    #[error("degenerate Malliavin covariance: det = {det:e}")]
    Degenerate { det: f64 },

    #[error("all {total} samples were rejected as degenerate")]
    AllRejected { total: usize },

    #[error("no samples: {0}")]
    NoSamples(&'static str),

    #[error("exponent p = {p} must exceed the dimension d = {d}")]
    Exponent { p: f64, d: usize },

    #[error("parameter `{name}` out of range: {reason}")]
    Range { name: &'static str, reason: String },

    #[error("point is outside the support: denominator {estimate:e} is below {floor:e}")]
    OutsideSupport { estimate: f64, floor: f64 },

    #[error("point {x:?} lies outside the 2*eps-interior of the domain")]
    Locality { x: Vec<f64> },

    #[error("unknown scenario `{0}`")]
    UnknownScenario(String),

    #[error("invalid scenario: {0}")]
    InvalidScenario(String),

    #[error("point {x:?} is outside the positivity set of the field")]
    OutsideField { x: Vec<f64> },

    #[error("config error at `{path}`: {reason}")]
    Config { path: String, reason: String },

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl Error {
    /// True for failures caused by the numerical model rather than by input.
    pub fn is_numerical(&self) -> bool {
        matches!(
            self,
            Error::Degenerate { .. }
                | Error::AllRejected { .. }
                | Error::OutsideSupport { .. }
                | Error::Domain { .. }
                | Error::Singular { .. }
        )
    }
}
