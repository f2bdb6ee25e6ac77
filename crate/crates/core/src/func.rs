//! Time-dependent coefficient types.
//!
//! Coefficients are shared closures so that problem descriptions can be
//! cloned cheaply and handed to worker threads.

use std::sync::Arc;

use nalgebra::{DMatrix, DVector};

use crate::scalar::Real;

/// Matrix-valued function of time.
pub type MatFn<T = f64> = Arc<dyn Fn(T) -> DMatrix<T> + Send + Sync>;
/// Vector-valued function of time.
pub type VecFn<T = f64> = Arc<dyn Fn(T) -> DVector<T> + Send + Sync>;
/// Scalar function of time.
pub type ScalarFn<T = f64> = Arc<dyn Fn(T) -> T + Send + Sync>;

pub fn mat_fn<T: Real>(f: impl Fn(T) -> DMatrix<T> + Send + Sync + 'static) -> MatFn<T> {
    Arc::new(f)
}

pub fn vec_fn<T: Real>(f: impl Fn(T) -> DVector<T> + Send + Sync + 'static) -> VecFn<T> {
    Arc::new(f)
}

pub fn scalar_fn<T: Real>(f: impl Fn(T) -> T + Send + Sync + 'static) -> ScalarFn<T> {
    Arc::new(f)
}

pub fn const_mat<T: Real>(m: DMatrix<T>) -> MatFn<T> {
    Arc::new(move |_| m.clone())
}

pub fn const_vec<T: Real>(v: DVector<T>) -> VecFn<T> {
    Arc::new(move |_| v.clone())
}

pub fn const_scalar<T: Real>(c: T) -> ScalarFn<T> {
    Arc::new(move |_| c)
}

pub fn zero_vec<T: Real>(n: usize) -> VecFn<T> {
    const_vec(DVector::zeros(n))
}

pub fn zero_mat<T: Real>(r: usize, c: usize) -> MatFn<T> {
    const_mat(DMatrix::zeros(r, c))
}

/// Polynomial with coefficients stored in ascending powers.
#[derive(Debug, Clone, PartialEq)]
pub struct Poly<T: Real = f64> {
    coeffs: Vec<T>,
}

impl<T: Real> Poly<T> {
    pub fn new(coeffs: Vec<T>) -> Self {
        Self { coeffs }
    }

    pub fn constant(c: T) -> Self {
        Self { coeffs: vec![c] }
    }

    pub fn coeffs(&self) -> &[T] {
        &self.coeffs
    }

    pub fn eval(&self, t: T) -> T {
        self.coeffs
            .iter()
            .rev()
            .fold(T::zero(), |acc, &c| acc * t + c)
    }

    pub fn derivative(&self) -> Self {
        let coeffs = self
            .coeffs
            .iter()
            .enumerate()
            .skip(1)
            .map(|(k, &c)| c * T::from_count(k))
            .collect();
        Self { coeffs }
    }

    /// Value of the `k`-th derivative at `t`.
    pub fn eval_derivative(&self, k: usize, t: T) -> T {
        let mut p = self.clone();
        for _ in 0..k {
            p = p.derivative();
        }
        p.eval(t)
    }
}

/// Matrix polynomial `sum_k M_k t^k`.
pub fn poly_mat<T: Real>(terms: Vec<DMatrix<T>>) -> MatFn<T> {
    Arc::new(move |t: T| {
        let mut acc = terms[terms.len() - 1].clone();
        for m in terms.iter().rev().skip(1) {
            acc = acc * t + m;
        }
        acc
    })
}

/// Piecewise-linear interpolation of matrix samples at increasing times.
///
/// Outside the sampled range the end values are held constant.
pub fn interp_mat<T: Real>(times: Vec<T>, values: Vec<DMatrix<T>>) -> MatFn<T> {
    assert_eq!(times.len(), values.len());
    assert!(!times.is_empty());
    Arc::new(move |t: T| {
        let n = times.len();
        if t <= times[0] {
            return values[0].clone();
        }
        if t >= times[n - 1] {
            return values[n - 1].clone();
        }
        let k = times.partition_point(|&x| x <= t).max(1) - 1;
        let w = (t - times[k]) / (times[k + 1] - times[k]);
        &values[k] * (T::one() - w) + &values[k + 1] * w
    })
}

/// Views a one-column matrix function as a vector function.
pub fn column_of<T: Real>(m: MatFn<T>) -> VecFn<T> {
    Arc::new(move |t| m(t).column(0).into_owned())
}
