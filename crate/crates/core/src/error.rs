use thiserror::Error;

/// Errors raised by the lab's operations.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum OtError {
    #[error("no convergence in {what} after {iterations} iterations (residual {residual:e})")]
    NoConvergence { what: &'static str, iterations: usize, residual: f64 },
    #[error("point leaves the declared chart of the {cost} cost")]
    OutOfChart { cost: &'static str },
    #[error("cost {cost} is degenerate at this pair (|det D̄Dc| = {det:e})")]
    DegeneratePair { cost: &'static str, det: f64 },
    #[error("empty set")]
    EmptySet,
    #[error("resolution too coarse: candidate hole with {pixels} pixel(s)")]
    ResolutionTooCoarse { pixels: usize },
    #[error("source support is not connected ({components} components)")]
    DisconnectedSupport { components: usize },
    #[error("point is singular ({active} active supports)")]
    SingularPoint { active: usize },
    #[error("point is not singular")]
    NotSingular,
    #[error("no differentiability points in the punctured neighborhood")]
    NoPuncturedNeighborhood,
    #[error("section is empty")]
    EmptySection,
    #[error("section touches the boundary of the source support")]
    BoundaryTouching,
    #[error("degenerate section: longest orthogonal segment {ell:e} below two pixels")]
    DegenerateSection { ell: f64 },
    #[error("witness rejected: {0}")]
    InvalidWitness(String),
    #[error("layer {0} has no data in this report")]
    MissingLayer(String),
    #[error("config line {line}: {msg}")]
    Config { line: usize, msg: String },
    #[error("invalid input: {0}")]
    Invalid(String),
}

pub type Result<T, E = OtError> = std::result::Result<T, E>;
