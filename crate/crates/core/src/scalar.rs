//! Scalar abstraction shared by every numeric routine in the crate.
//!
//! All algorithms are written once against [`Real`] and instantiated for
//! `f32` and `f64`. The crate root re-exports `f64` aliases for the common
//! types so that most callers never spell the parameter out.

use nalgebra::RealField;
use num_traits::{FromPrimitive, ToPrimitive};

/// Real scalar usable by the solvers.
pub trait Real: RealField + Copy + FromPrimitive + ToPrimitive + Send + Sync + 'static {
    /// Converts an `f64` literal into the scalar type.
    fn lit(x: f64) -> Self {
        Self::from_f64(x).expect("literal must be representable")
    }

    /// Converts a count into the scalar type.
    fn from_count(k: usize) -> Self {
        Self::from_usize(k).expect("count must be representable")
    }

    /// Lossy conversion used for diagnostics and error payloads.
    fn as_f64(self) -> f64 {
        self.to_f64().unwrap_or(f64::NAN)
    }

    /// Relative singular-value threshold below which a direction counts as zero.
    ///
    /// The nominal value is `1e-10`; for short floats it is raised to a small
    /// multiple of machine epsilon so that rank decisions stay meaningful.
    fn rank_tol() -> Self {
        let eps = Self::default_epsilon();
        let floor = Self::lit(1e-10);
        let scaled = eps * Self::lit(256.0);
        if scaled > floor {
            scaled
        } else {
            floor
        }
    }
}

impl Real for f32 {}
impl Real for f64 {}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn literals_round_trip() {
        assert_eq!(<f64 as Real>::lit(0.25), 0.25);
        assert_eq!(<f32 as Real>::lit(0.5), 0.5f32);
        assert_eq!(<f64 as Real>::from_count(7), 7.0);
    }

    #[test]
    fn rank_tolerance_depends_on_precision() {
        assert_eq!(<f64 as Real>::rank_tol(), 1e-10);
        assert!(<f32 as Real>::rank_tol() > 1e-6);
    }
}
