//! Scalar differential operators of order `n` and their formal adjoints.

use std::sync::Arc;

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::func::{MatFn, Poly, ScalarFn};
use crate::linalg::rank;
use crate::scalar::Real;

/// Coefficient of the operator, either an exact polynomial or a sampled
/// function differentiated numerically.
#[derive(Clone)]
pub enum Coefficient<T: Real = f64> {
    Poly(Poly<T>),
    Func(ScalarFn<T>),
}

impl<T: Real> std::fmt::Debug for Coefficient<T> {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Coefficient::Poly(p) => f.debug_tuple("Poly").field(p).finish(),
            Coefficient::Func(_) => f.write_str("Func(..)"),
        }
    }
}

/// Step used for finite-difference derivatives of sampled coefficients.
const FD_STEP: f64 = 1e-2;

fn binomial(n: usize, k: usize) -> f64 {
    (0..k).fold(1.0, |acc, i| acc * (n - i) as f64 / (i + 1) as f64)
}

fn central_difference<T: Real>(f: &ScalarFn<T>, k: usize, t: T, h: T) -> T {
    // k-th central difference divided by h^k.
    let half = T::lit(k as f64 / 2.0);
    let mut acc = T::zero();
    for i in 0..=k {
        let sign = if i % 2 == 0 { T::one() } else { -T::one() };
        acc += sign * T::lit(binomial(k, i)) * f(t + (half - T::from_count(i)) * h);
    }
    acc / h.powi(k as i32)
}

impl<T: Real> Coefficient<T> {
    pub fn constant(c: T) -> Self {
        Coefficient::Poly(Poly::constant(c))
    }

    pub fn eval(&self, t: T) -> T {
        match self {
            Coefficient::Poly(p) => p.eval(t),
            Coefficient::Func(f) => f(t),
        }
    }

    /// `k`-th derivative at `t`.
    ///
    /// Sampled coefficients use a Richardson-extrapolated central difference;
    /// when the estimates at step `h` and `h/2` disagree by more than `1e-4`
    /// relative the coefficient is reported as too rough.
    pub fn derivative(&self, k: usize, t: T) -> Result<T> {
        match self {
            Coefficient::Poly(p) => Ok(p.eval_derivative(k, t)),
            Coefficient::Func(f) if k == 0 => Ok(f(t)),
            Coefficient::Func(f) => {
                let h = T::lit(FD_STEP);
                let coarse = central_difference(f, k, t, h);
                let fine = central_difference(f, k, t, h / T::lit(2.0));
                let value = (fine * T::lit(4.0) - coarse) / T::lit(3.0);
                if (fine - coarse).abs() > T::lit(1e-4) * (T::one() + value.abs()) {
                    return Err(Error::CoefficientRoughness(format!(
                        "derivative {k} at t = {:.6} changes from {:.6e} to {:.6e} under step halving",
                        t.as_f64(),
                        coarse.as_f64(),
                        fine.as_f64()
                    )));
                }
                Ok(value)
            }
        }
    }
}

/// Operator `L phi = p_0 phi^(n) + p_1 phi^(n-1) + ... + p_n phi` on `[a, b]`
/// together with `m` boundary forms.
///
/// Form rows have `2n` columns acting on
/// `(phi(a), ..., phi^(n-1)(a), phi(b), ..., phi^(n-1)(b))`.
#[derive(Debug, Clone)]
pub struct OrderNSpec<T: Real = f64> {
    pub n: usize,
    pub a: T,
    pub b: T,
    pub coeffs: Vec<Coefficient<T>>,
    pub forms: DMatrix<T>,
}

/// Samples used to check that the leading coefficient stays away from zero.
const LEADING_SAMPLES: usize = 64;

impl<T: Real> OrderNSpec<T> {
    pub fn new(a: T, b: T, coeffs: Vec<Coefficient<T>>, forms: DMatrix<T>) -> Result<Self> {
        if coeffs.len() < 2 {
            return Err(Error::InvalidInput(
                "an operator of order n needs n + 1 coefficients".into(),
            ));
        }
        let n = coeffs.len() - 1;
        if !(b > a) {
            return Err(Error::InvalidInput(
                "the interval must satisfy a < b".into(),
            ));
        }
        if forms.ncols() != 2 * n {
            return Err(Error::ArityMismatch {
                expected: 2 * n,
                got: forms.ncols(),
            });
        }
        let m = forms.nrows();
        if m == 0 || m > 2 * n || rank(&forms, T::lit(1e-10)) != m {
            return Err(Error::RankDeficient(format!(
                "the {m} boundary forms must be linearly independent"
            )));
        }
        let lead = &coeffs[0];
        let mut scale = T::zero();
        let mut smallest = T::max_value().unwrap_or_else(|| T::lit(f64::MAX));
        for i in 0..=LEADING_SAMPLES {
            let v = lead
                .eval(a + (b - a) * T::from_count(i) / T::from_count(LEADING_SAMPLES))
                .abs();
            scale = scale.max(v);
            smallest = smallest.min(v);
        }
        if !(smallest > T::lit(1e-12) * scale.max(T::one())) {
            return Err(Error::InvalidInput(
                "the leading coefficient vanishes on the interval".into(),
            ));
        }
        Ok(Self {
            n,
            a,
            b,
            coeffs,
            forms,
        })
    }

    /// Number of boundary forms.
    pub fn m(&self) -> usize {
        self.forms.nrows()
    }

    /// `L phi` from the jets `(phi, phi', ..., phi^(n))` at `t`.
    pub fn apply(&self, t: T, jets: &[T]) -> T {
        (0..=self.n)
            .map(|k| self.coeffs[k].eval(t) * jets[self.n - k])
            .fold(T::zero(), |a, b| a + b)
    }

    /// Companion matrix of `L phi = 0` in the state `(phi, ..., phi^(n-1))`.
    pub fn companion(&self, t: T) -> DMatrix<T> {
        let n = self.n;
        let mut m = DMatrix::zeros(n, n);
        for i in 0..n - 1 {
            m[(i, i + 1)] = T::one();
        }
        let p0 = self.coeffs[0].eval(t);
        for j in 0..n {
            m[(n - 1, j)] = -self.coeffs[n - j].eval(t) / p0;
        }
        m
    }

    pub fn companion_fn(&self) -> MatFn<T> {
        let me = self.clone();
        Arc::new(move |t| me.companion(t))
    }

    pub fn leading(&self, t: T) -> T {
        self.coeffs[0].eval(t)
    }

    /// Values of the forms on the jet vector `(Y(a), Y(b))`.
    pub fn forms_at(&self, ya: &DVector<T>, yb: &DVector<T>) -> DVector<T> {
        let n = self.n;
        &self.forms.columns(0, n) * ya + &self.forms.columns(n, n) * yb
    }

    /// `L^+ psi` from the jets `(psi, ..., psi^(n))`, differentiating the
    /// coefficients as needed.
    pub fn formal_adjoint(&self, t: T, jets: &[T]) -> Result<T> {
        let n = self.n;
        let mut acc = T::zero();
        for k in 0..=n {
            let j = n - k;
            let sign = if j % 2 == 0 { T::one() } else { -T::one() };
            let mut d = T::zero();
            for i in 0..=j {
                d += T::lit(binomial(j, i)) * self.coeffs[k].derivative(i, t)? * jets[j - i];
            }
            acc += sign * d;
        }
        Ok(acc)
    }

    /// Adjoint state `W` carried by the solvers for a function `psi` with the
    /// given jets `(psi, ..., psi^(n-1))`.
    ///
    /// `W` satisfies `W' = -M^T W - e_1 L^+ psi` with `M` the companion matrix,
    /// its last entry is `p_0 psi` and
    /// `W_{n-1-j} = sum_i (-1)^i (p_{j-i} psi)^(i)` (zero-based indices).
    pub fn quasi_derivatives(&self, t: T, jets: &[T]) -> Result<DVector<T>> {
        let n = self.n;
        let mut w = DVector::zeros(n);
        for j in 0..n {
            let mut acc = T::zero();
            for i in 0..=j {
                let sign = if i % 2 == 0 { T::one() } else { -T::one() };
                let mut d = T::zero();
                for l in 0..=i {
                    d +=
                        T::lit(binomial(i, l)) * self.coeffs[j - i].derivative(l, t)? * jets[i - l];
                }
                acc += sign * d;
            }
            w[n - 1 - j] = acc;
        }
        Ok(w)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::func::scalar_fn;

    fn second_order(p: [Poly<f64>; 3], forms: DMatrix<f64>) -> OrderNSpec {
        OrderNSpec::new(
            0.0,
            1.0,
            p.into_iter().map(Coefficient::Poly).collect(),
            forms,
        )
        .unwrap()
    }

    #[test]
    fn rejects_dependent_forms_and_vanishing_lead() {
        let c = || vec![Coefficient::constant(1.0), Coefficient::constant(0.0)];
        let forms = DMatrix::from_row_slice(2, 2, &[1.0, 1.0, 2.0, 2.0]);
        assert!(matches!(
            OrderNSpec::new(0.0, 1.0, c(), forms),
            Err(Error::RankDeficient(_))
        ));
        let lead = vec![
            Coefficient::Poly(Poly::new(vec![-0.5, 1.0])),
            Coefficient::constant(0.0),
        ];
        assert!(
            OrderNSpec::new(0.0, 1.0, lead, DMatrix::from_row_slice(1, 2, &[1.0, 0.0])).is_err()
        );
    }

    #[test]
    fn first_derivative_is_skew() {
        let s = OrderNSpec::new(
            0.0,
            1.0,
            vec![Coefficient::constant(1.0), Coefficient::constant(0.0)],
            DMatrix::from_row_slice(1, 2, &[1.0, 0.0]),
        )
        .unwrap();
        // L = d/dt, so L^+ psi = -psi'.
        assert_eq!(s.formal_adjoint(0.3, &[2.0, 5.0]).unwrap(), -5.0);
    }

    #[test]
    fn constant_second_derivative_is_self_adjoint() {
        let s = second_order(
            [
                Poly::constant(1.0),
                Poly::constant(0.0),
                Poly::constant(0.0),
            ],
            DMatrix::from_row_slice(2, 4, &[1.0, 0.0, 0.0, 0.0, 0.0, 0.0, 1.0, 0.0]),
        );
        let jets = [0.7, -1.1, 3.5];
        assert_eq!(s.formal_adjoint(0.2, &jets).unwrap(), s.apply(0.2, &jets));
    }

    #[test]
    fn quasi_derivatives_of_variable_coefficients() {
        // p0 = 1 + t, p1 = t^2: W = (p1 psi - (p0 psi)', p0 psi).
        let s = second_order(
            [
                Poly::new(vec![1.0, 1.0]),
                Poly::new(vec![0.0, 0.0, 1.0]),
                Poly::constant(2.0),
            ],
            DMatrix::from_row_slice(2, 4, &[1.0, 0.0, 0.0, 0.0, 0.0, 0.0, 1.0, 0.0]),
        );
        let (t, psi, dpsi) = (0.5, 2.0, -3.0);
        let w = s.quasi_derivatives(t, &[psi, dpsi]).unwrap();
        assert!((w[1] - 1.5 * psi).abs() < 1e-14);
        assert!((w[0] - (0.25 * psi - (psi + 1.5 * dpsi))).abs() < 1e-14);
    }

    #[test]
    fn sampled_coefficients_differentiate_and_flag_roughness() {
        let smooth = Coefficient::Func(scalar_fn(|t: f64| t.sin()));
        assert!((smooth.derivative(2, 0.4).unwrap() + 0.4f64.sin()).abs() < 1e-6);
        let rough = Coefficient::Func(scalar_fn(|t: f64| (t - 0.4).max(0.0).sqrt()));
        assert!(matches!(
            rough.derivative(1, 0.4),
            Err(Error::CoefficientRoughness(_))
        ));
    }
}
