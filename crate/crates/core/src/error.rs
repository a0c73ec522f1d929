use thiserror::Error;

/// Parse failures for scalar expressions. Offsets are byte offsets into the source.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum ParseError {
    #[error("syntax error at offset {offset}: {message}")]
    Syntax { offset: usize, message: String },
    #[error("unknown variable `{name}` at offset {offset}")]
    UnknownVariable { name: String, offset: usize },
}

impl ParseError {
    pub fn offset(&self) -> usize {
        match self {
            ParseError::Syntax { offset, .. } | ParseError::UnknownVariable { offset, .. } => *offset,
        }
    }
}

/// Numeric evaluation failures.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum EvalError {
    #[error("domain error in `{op}` at subexpression {subexpr}")]
    Domain { op: &'static str, subexpr: String },
    #[error("point does not match the chart or has non-finite entries")]
    BadPoint,
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum GeometryError {
    #[error("dimensions m={m}, n={n} outside the supported range 1..=4")]
    Dimension { m: usize, n: usize },
    #[error("point shape does not match chart (m={m}, n={n})")]
    PointShape { m: usize, n: usize },
    #[error("point has non-finite coordinates")]
    NonFinitePoint,
    #[error("{what} is not a square matrix of size {expected}")]
    Shape { what: String, expected: usize },
    #[error("{what} is not symmetric")]
    NotSymmetric { what: String },
    #[error("degenerate {what}: |det| = {det:e} below 1e-12 at {point}")]
    Degenerate { what: String, det: f64, point: String },
    #[error("{what} depends on variables it must not depend on ({detail})")]
    Dependency { what: String, detail: String },
    #[error("a raw Hamiltonian body requires m = 1 (got m = {m}); use the electrodynamic form")]
    RawRequiresSingleTime { m: usize },
    #[error("Hamiltonian is not quadratic in the momenta: third derivative {value:e} at {point}")]
    NonQuadratic { value: f64, point: String },
    #[error("Kronecker regularity indeterminate: h_11 vanishes at every sample point")]
    RegularityIndeterminate,
    #[error("operation requires {requirement}")]
    Unsupported { requirement: String },
    #[error("invalid parameter {name}: {detail}")]
    InvalidParameter { name: String, detail: String },
    #[error("affine chart map is degenerate: |det| = {det:e}")]
    DegenerateMap { det: f64 },
    #[error(transparent)]
    Eval(#[from] EvalError),
}
