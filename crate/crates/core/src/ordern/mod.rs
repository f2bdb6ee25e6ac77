//! Scalar boundary value problems of order `n` with general two-point forms:
//! adjoint structure, kernels, solvability, and minimax estimation of
//! functionals of solutions and of right-hand sides.

pub mod estimator;
pub mod observation;
pub mod operator;
pub mod structure;

pub use estimator::*;
pub use observation::*;
pub use operator::{Coefficient, OrderNSpec};
pub use structure::*;
