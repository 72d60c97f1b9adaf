//! Trajectory optimization for fixed-wing aerial vehicles.
//!
//! The non-linear planning problem (bank-to-turn kinematics, speed and
//! flight-path bounds, ellipsoidal obstacles) is multi-convex once the
//! kinematic and collision constraints become quadratic penalties. The
//! [`solver`] exploits that by alternating over blocks that are each an
//! equality-constrained QP or a pointwise closed form, with Bregman-style
//! multipliers driving the penalty residuals to zero.
//!
//! ```no_run
//! use fwtraj::model::{BoundaryState, ProblemSpec};
//! use fwtraj::solver::{solve, SolverConfig};
//!
//! let spec = ProblemSpec::new(BoundaryState::flying([0.0, 0.0, 30.0], 14.0, 0.0), [250.0, 40.0, 30.0]);
//! let sol = solve(&spec, &SolverConfig::default()).unwrap();
//! println!("{:?} after {} iterations", sol.status, sol.iterations);
//! ```

pub mod basis;
pub mod error;
pub mod model;
pub mod postprocess;
pub mod qp;
pub mod report;
pub mod scenario;
pub mod solver;

pub use error::{Error, Result};
