//! Guaranteed estimation of linear functionals of solutions to linear
//! boundary value problems.
//!
//! The crate computes minimax (guaranteed) estimates of quantities such as
//! `(a, phi(s))` when the right-hand sides and boundary data of a linear
//! system are only known to lie in an ellipsoid and the observations carry
//! noise of bounded energy. Estimates are linear in the observations, and the
//! worst-case error is returned together with every estimate.
//!
//! Numeric code is generic over [`Real`] (`f32` or `f64`); the aliases at the
//! crate root fix the scalar to `f64`.

pub mod boundary;
pub mod bvp;
pub mod constrained;
pub mod continuous;
pub mod error;
pub mod func;
pub mod grid;
pub mod linalg;
pub mod ordern;
pub mod point;
pub mod riccati;
pub mod scalar;
pub mod trajectory;

pub use error::{Error, Result};
pub use scalar::Real;

/// `f64` grid.
pub type Grid = grid::Grid<f64>;
/// `f64` piecewise trajectory.
pub type PiecewiseTrajectory = trajectory::PiecewiseTrajectory<f64>;
/// `f64` multipoint problem.
pub type MultipointProblem = bvp::MultipointProblem<f64>;
