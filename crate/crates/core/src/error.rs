use thiserror::Error;

/// Every failure the library can report.
///
/// `kind()` gives a stable machine-readable tag used by the CLI.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("invalid incidence system: {0}")]
    InvalidSystem(String),

    #[error("inadmissible word {word:?}: {reason}")]
    InvalidWord { word: Vec<usize>, reason: String },

    #[error("invalid function: {0}")]
    InvalidFunction(String),

    #[error("invalid measure: {0}")]
    InvalidMeasure(String),

    #[error("depth {requested} is below the minimum {minimum} for this operation")]
    DepthTooSmall { requested: usize, minimum: usize },

    #[error("matrix entry ({row}, {col}) is negative")]
    NegativeEntry { row: usize, col: usize },

    #[error("matrix is not irreducible")]
    NotIrreducible,

    #[error("power iteration did not converge after {iterations} iterations (last change {last_change:e})")]
    NoConvergence { iterations: usize, last_change: f64 },

    #[error("cylinder {cylinder} has zero mass")]
    ZeroMass { cylinder: String },

    #[error(
        "measure is only known at depth {available}; depth {requested} needs a conformal extension"
    )]
    MeasureDepth { requested: usize, available: usize },

    #[error("{what} needs {requested} cylinders, above the capacity cap {cap}")]
    Capacity {
        what: String,
        requested: usize,
        cap: usize,
    },

    #[error("bisection bracket [{lo}, {hi}] does not contain a root (values {f_lo:e}, {f_hi:e})")]
    BracketFailure {
        lo: f64,
        hi: f64,
        f_lo: f64,
        f_hi: f64,
    },

    #[error("q = {q} is outside the admissible interval [{q_min}, {q_max}]")]
    OutOfSpectrumRange { q: f64, q_min: f64, q_max: f64 },

    #[error("truncation tail {tail:e} exceeds the bound {bound:e} (complement spectral radius {spectral_radius})")]
    Truncation {
        tail: f64,
        bound: f64,
        spectral_radius: f64,
    },

    #[error("return-time normalizer diverges (complement spectral radius {spectral_radius})")]
    NormalizerDiverges { spectral_radius: f64 },

    #[error("coboundary hypothesis fails on block {block}: defect {defect:e}")]
    Hypothesis { block: String, defect: f64 },

    #[error("cylinder {cylinder} is too shallow: {reason}")]
    ShallowCylinder { cylinder: String, reason: String },

    #[error("chi evaluation routes disagree on cylinder {cylinder}: {gap:e}")]
    RouteMismatch { cylinder: String, gap: f64 },

    #[error("geometry: {0}")]
    Geometry(String),

    #[error("regression needs at least 3 scales, got {0}")]
    DegenerateRegression(usize),

    #[error("config: {0}")]
    Config(String),

    #[error("io: {0}")]
    Io(String),
}

impl Error {
    pub fn kind(&self) -> &'static str {
        match self {
            Error::InvalidSystem(_) => "invalid_system",
            Error::InvalidWord { .. } => "invalid_word",
            Error::InvalidFunction(_) => "invalid_function",
            Error::InvalidMeasure(_) => "invalid_measure",
            Error::DepthTooSmall { .. } => "depth_too_small",
            Error::NegativeEntry { .. } => "negative_entry",
            Error::NotIrreducible => "not_irreducible",
            Error::NoConvergence { .. } => "no_convergence",
            Error::ZeroMass { .. } => "zero_mass",
            Error::MeasureDepth { .. } => "measure_depth",
            Error::Capacity { .. } => "capacity",
            Error::BracketFailure { .. } => "bracket_failure",
            Error::OutOfSpectrumRange { .. } => "out_of_spectrum_range",
            Error::Truncation { .. } => "truncation",
            Error::NormalizerDiverges { .. } => "normalizer_diverges",
            Error::Hypothesis { .. } => "hypothesis",
            Error::ShallowCylinder { .. } => "shallow_cylinder",
            Error::RouteMismatch { .. } => "route_mismatch",
            Error::Geometry(_) => "geometry",
            Error::DegenerateRegression(_) => "degenerate_regression",
            Error::Config(_) => "config",
            Error::Io(_) => "io",
        }
    }

    /// Configuration and input-validation failures, as opposed to numerical ones.
    pub fn is_config(&self) -> bool {
        matches!(
            self,
            Error::InvalidSystem(_)
                | Error::InvalidWord { .. }
                | Error::InvalidFunction(_)
                | Error::InvalidMeasure(_)
                | Error::Config(_)
                | Error::Io(_)
        )
    }
}

pub type Result<T> = std::result::Result<T, Error>;
