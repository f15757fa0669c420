//! Difference-of-convex subdifferential calculus and optimality certificates
//! for polyhedral and quadratic data.

pub mod applications;
pub mod calculus;
pub mod cli;
pub mod certificates;
pub mod conic;
pub mod convex;
pub mod error;
pub mod geometry;
pub mod linalg;
pub mod opt;
pub mod oracle;
pub mod solver;

pub use calculus::{EtaSchedule, VectorMap};
pub use certificates::{Certificate, CheckOptions, Constraint, Problem, Verdict};
pub use convex::{ConvexFunc, DCPair, Piece};
pub use error::{Error, Result};
pub use geometry::{HRep, PolyCone, Polytope};
