//! Numerical laboratory for the regularity of optimal transport maps in the
//! plane: semi-discrete solvers for MTW-class costs, subdifferential and
//! singular-set reconstruction, and checks of the geometric estimates behind
//! the isolated-singularity dichotomy.

pub mod costs;
pub mod error;
pub mod estimates;
pub mod geometry;
pub mod linalg;
pub mod scenario;
pub mod scalar;
pub mod singular;
pub mod transport;

pub use costs::CostFunction;
pub use error::{OtError, Result};
pub use scalar::Real;

pub type Point = linalg::Point2<f64>;
pub type CoVec = linalg::CoVec2<f64>;
pub type Mat = linalg::Mat2<f64>;
pub type Region = geometry::Region<f64>;
