use thiserror::Error;

/// Machine-readable failure categories surfaced by the CLI run log.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ErrorCode {
    InvalidInput,
    DegenerateShape,
    Unresolvable,
    OutsideDomain,
    Singular,
    FluxNonzero,
    NotConverged,
    NoZeroCrossing,
    ToleranceNotMet,
    Inadmissible,
    BracketSign,
    SingularSystem,
    PlateauRange,
    CoreIntersectsBoundary,
    ShapeMismatch,
    VortexCollapsed,
    CoreTouchesMask,
    CoreSplit,
    NoCores,
    InconsistentReports,
    Io,
}

impl ErrorCode {
    pub fn as_str(self) -> &'static str {
        match self {
            ErrorCode::InvalidInput => "INVALID_INPUT",
            ErrorCode::DegenerateShape => "DEGENERATE_SHAPE",
            ErrorCode::Unresolvable => "UNRESOLVABLE_GEOMETRY",
            ErrorCode::OutsideDomain => "OUTSIDE_DOMAIN",
            ErrorCode::Singular => "SINGULAR_POINT",
            ErrorCode::FluxNonzero => "FLUX_NONZERO",
            ErrorCode::NotConverged => "NOT_CONVERGED",
            ErrorCode::NoZeroCrossing => "NO_ZERO_CROSSING",
            ErrorCode::ToleranceNotMet => "TOLERANCE_NOT_MET",
            ErrorCode::Inadmissible => "INADMISSIBLE",
            ErrorCode::BracketSign => "BRACKET_SIGN",
            ErrorCode::SingularSystem => "SINGULAR_SYSTEM",
            ErrorCode::PlateauRange => "PLATEAU_RANGE",
            ErrorCode::CoreIntersectsBoundary => "CORE_INTERSECTS_BOUNDARY",
            ErrorCode::ShapeMismatch => "SHAPE_MISMATCH",
            ErrorCode::VortexCollapsed => "VORTEX_COLLAPSED",
            ErrorCode::CoreTouchesMask => "CORE_TOUCHES_MASK",
            ErrorCode::CoreSplit => "CORE_SPLIT",
            ErrorCode::NoCores => "NO_CORES",
            ErrorCode::InconsistentReports => "INCONSISTENT_REPORTS",
            ErrorCode::Io => "IO",
        }
    }
}

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid input: {0}")]
    InvalidInput(String),
    #[error("degenerate shape: {0}")]
    DegenerateShape(String),
    #[error("geometry not resolvable at this grid resolution: {0}")]
    Unresolvable(String),
    #[error("point ({x}, {y}) lies outside the domain")]
    OutsideDomain { x: f64, y: f64 },
    #[error("singular evaluation: {0}")]
    Singular(String),
    #[error("net boundary flux {net:e} exceeds tolerance {tol:e}")]
    FluxNonzero { net: f64, tol: f64 },
    #[error("{what} did not converge after {iterations} iterations (residual {residual:e})")]
    NotConverged {
        what: String,
        iterations: usize,
        residual: f64,
    },
    #[error("profile has no zero crossing before r = {r_max}")]
    NoZeroCrossing { r_max: f64 },
    #[error("tolerance not met: {0}")]
    ToleranceNotMet(String),
    #[error("configuration not admissible: {0}")]
    Inadmissible(String),
    #[error("core radius bracket endpoints have equal signs for vortex {vortex} ({detail})")]
    BracketSign { vortex: usize, detail: String },
    #[error("plateau linear system is singular")]
    SingularSystem,
    #[error("plateau level a[{vortex}] = {value} outside [{lo}, {hi}]")]
    PlateauRange {
        vortex: usize,
        value: f64,
        lo: f64,
        hi: f64,
    },
    #[error("core of vortex {vortex} (radius {radius}) intersects {what}")]
    CoreIntersectsBoundary {
        vortex: usize,
        radius: f64,
        what: &'static str,
    },
    #[error("shape mismatch: {0}")]
    ShapeMismatch(String),
    #[error("vortex collapsed onto the trivial branch (max w = {max_w:e})")]
    VortexCollapsed { max_w: f64 },
    #[error("core of vortex {vortex} touches the boundary of its subdomain")]
    CoreTouchesMask { vortex: usize },
    #[error("core of vortex {vortex} split into {components} components")]
    CoreSplit { vortex: usize, components: usize },
    #[error("no vortex core detected in subdomain {vortex}")]
    NoCores { vortex: usize },
    #[error("inconsistent reports: {0}")]
    InconsistentReports(String),
    #[error("at eps = {eps}: {source}")]
    AtEps {
        eps: f64,
        #[source]
        source: Box<Error>,
    },
    #[error("i/o: {0}")]
    Io(#[from] std::io::Error),
}

impl Error {
    pub fn code(&self) -> ErrorCode {
        match self {
            Error::InvalidInput(_) => ErrorCode::InvalidInput,
            Error::DegenerateShape(_) => ErrorCode::DegenerateShape,
            Error::Unresolvable(_) => ErrorCode::Unresolvable,
            Error::OutsideDomain { .. } => ErrorCode::OutsideDomain,
            Error::Singular(_) => ErrorCode::Singular,
            Error::FluxNonzero { .. } => ErrorCode::FluxNonzero,
            Error::NotConverged { .. } => ErrorCode::NotConverged,
            Error::NoZeroCrossing { .. } => ErrorCode::NoZeroCrossing,
            Error::ToleranceNotMet(_) => ErrorCode::ToleranceNotMet,
            Error::Inadmissible(_) => ErrorCode::Inadmissible,
            Error::BracketSign { .. } => ErrorCode::BracketSign,
            Error::SingularSystem => ErrorCode::SingularSystem,
            Error::PlateauRange { .. } => ErrorCode::PlateauRange,
            Error::CoreIntersectsBoundary { .. } => ErrorCode::CoreIntersectsBoundary,
            Error::ShapeMismatch(_) => ErrorCode::ShapeMismatch,
            Error::VortexCollapsed { .. } => ErrorCode::VortexCollapsed,
            Error::CoreTouchesMask { .. } => ErrorCode::CoreTouchesMask,
            Error::CoreSplit { .. } => ErrorCode::CoreSplit,
            Error::NoCores { .. } => ErrorCode::NoCores,
            Error::InconsistentReports(_) => ErrorCode::InconsistentReports,
            Error::AtEps { source, .. } => source.code(),
            Error::Io(_) => ErrorCode::Io,
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
