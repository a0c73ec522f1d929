pub mod cartan;
pub mod chart;
pub mod christoffel;
pub mod cli;
pub mod config;
pub mod error;
pub mod expr;
pub mod hamilton;
pub mod metric;
pub mod report;
pub mod sampling;
pub mod tensor;
pub mod torsion_curvature;
pub mod verify;

pub use chart::{Chart, Point, Var};
pub use error::{EvalError, GeometryError, ParseError};
pub use expr::{parse_scalar, Expr, ExprKind, Tape};
pub use hamilton::{HamiltonSpace, NonlinearConnection};
