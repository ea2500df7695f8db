//! Set-valued state estimation for nonlinear discrete-time systems using
//! hybrid zonotopes.
//!
//! * [`hybzono`]: the set representation, its closed operations and the
//!   conversion from unions of V-rep polytopes.
//! * [`solver`]: mixed-integer emptiness, containment, support and leaf
//!   queries.
//! * [`approx`]: over-approximating input-output sets of nonlinear maps from
//!   piecewise-linear interpolants and ReLU networks.
//! * [`svse`]: input-output set identities and the estimator recursion.

pub mod approx;
pub mod error;
pub mod geometry;
pub mod hybzono;
pub mod scenario;
pub mod solver;
pub mod svse;

pub use error::{Error, Result};
pub use hybzono::{sos_to_hybzono, Complexity, FactorAssignment, HybridZonotope, VPolyUnion};
pub use solver::{LeafSet, Member, MiSolver, SolverOptions};
