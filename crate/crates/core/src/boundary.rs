//! Boundary-matrix algebra for first-order systems.
//!
//! The primal problem is `phi' + A(t) phi = f` on `(0, T)` with `m` conditions
//! `B0 phi(0) = f0` and `n - m` conditions `B1 phi(T) = f1`. Splitting each
//! boundary matrix into a nonsingular square block and the remaining columns
//! yields three companion matrices per endpoint (`hat`, `bar`, `tilde`) that
//! decompose the Euclidean pairing:
//!
//! `(w, v) = (B0_bar w, B0 v) + (B0_hat w, B0_tilde v)`
//!
//! and likewise at `T`. The `hat` matrices give the boundary conditions of the
//! adjoint problem `-psi' + A^T psi = g`.

use nalgebra::{DMatrix, DVector};

use crate::bvp::fundamental_matrix;
use crate::error::{Error, Result};
use crate::func::{MatFn, VecFn};
use crate::linalg::{invert, rank, select_basis_columns};
use crate::scalar::Real;
use crate::trajectory::PiecewiseTrajectory;

/// Linear first-order boundary value problem with separated conditions.
#[derive(Clone)]
pub struct BvpSpec<T: Real = f64> {
    pub n: usize,
    pub m: usize,
    pub horizon: T,
    pub a: MatFn<T>,
    pub b0: DMatrix<T>,
    pub b1: DMatrix<T>,
    pub f: VecFn<T>,
    pub f0: DVector<T>,
    pub f1: DVector<T>,
}

impl<T: Real> BvpSpec<T> {
    #[allow(clippy::too_many_arguments)]
    pub fn new(
        horizon: T,
        a: MatFn<T>,
        b0: DMatrix<T>,
        b1: DMatrix<T>,
        f: VecFn<T>,
        f0: DVector<T>,
        f1: DVector<T>,
    ) -> Result<Self> {
        let n = b0.ncols();
        let m = b0.nrows();
        if !(horizon > T::zero()) {
            return Err(Error::InvalidInput("horizon must be positive".into()));
        }
        if m == 0 || m >= n {
            return Err(Error::InvalidInput(format!(
                "need 1 <= m <= n-1, got m={m}, n={n}"
            )));
        }
        if b1.ncols() != n || b1.nrows() != n - m {
            return Err(Error::InvalidInput(format!(
                "right boundary matrix must be {}x{n}",
                n - m
            )));
        }
        if f0.len() != m || f1.len() != n - m {
            return Err(Error::InvalidInput(
                "boundary data lengths do not match".into(),
            ));
        }
        let a0 = a(T::zero());
        if a0.shape() != (n, n) {
            return Err(Error::InvalidInput(format!("A(t) must be {n}x{n}")));
        }
        if f(T::zero()).len() != n {
            return Err(Error::InvalidInput(format!("f(t) must have length {n}")));
        }
        let tol = T::rank_tol();
        if rank(&b0, tol) < m || rank(&b1, tol) < n - m {
            return Err(Error::RankDeficient(
                "boundary matrices must have full row rank".into(),
            ));
        }
        Ok(Self {
            n,
            m,
            horizon,
            a,
            b0,
            b1,
            f,
            f0,
            f1,
        })
    }

    /// Problem with zero right-hand side and zero boundary data.
    pub fn homogeneous(horizon: T, a: MatFn<T>, b0: DMatrix<T>, b1: DMatrix<T>) -> Result<Self> {
        let n = b0.ncols();
        let (m, r) = (b0.nrows(), b1.nrows());
        Self::new(
            horizon,
            a,
            b0,
            b1,
            crate::func::zero_vec(n),
            DVector::zeros(m),
            DVector::zeros(r),
        )
    }

    /// Drift of `phi' = -A phi + f`.
    pub fn primal_drift(&self) -> MatFn<T> {
        let a = self.a.clone();
        std::sync::Arc::new(move |t| -a(t))
    }

    /// Drift of the adjoint state `z' = A^T z`.
    pub fn adjoint_drift(&self) -> MatFn<T> {
        let a = self.a.clone();
        std::sync::Arc::new(move |t| a(t).transpose())
    }
}

/// Companion matrices of the boundary conditions.
#[derive(Debug, Clone, PartialEq)]
pub struct BoundaryAlgebra<T: Real = f64> {
    pub left_columns: Vec<usize>,
    pub right_columns: Vec<usize>,
    pub b0_hat: DMatrix<T>,
    pub b0_bar: DMatrix<T>,
    pub b0_tilde: DMatrix<T>,
    pub b1_hat: DMatrix<T>,
    pub b1_bar: DMatrix<T>,
    pub b1_tilde: DMatrix<T>,
}

/// Columns of a nonsingular square submatrix of a full-row-rank matrix.
pub fn select_basis_submatrix<T: Real>(b: &DMatrix<T>) -> Result<Vec<usize>> {
    select_basis_columns(b)
}

/// `(hat, bar, tilde)` for one endpoint.
fn endpoint_triplet<T: Real>(
    b: &DMatrix<T>,
    cols: &[usize],
) -> Result<(DMatrix<T>, DMatrix<T>, DMatrix<T>)> {
    let (k, n) = b.shape();
    let rest: Vec<usize> = (0..n).filter(|j| !cols.contains(j)).collect();
    let b_sel = b.select_columns(cols);
    let b_rest = b.select_columns(&rest);
    let inv_t = invert(&b_sel)?.transpose();
    let coupling = -(b_rest.transpose() * &inv_t);
    let mut hat = DMatrix::zeros(n - k, n);
    let mut bar = DMatrix::zeros(k, n);
    let mut tilde = DMatrix::zeros(n - k, n);
    for (c, &j) in cols.iter().enumerate() {
        hat.column_mut(j).copy_from(&coupling.column(c));
        bar.column_mut(j).copy_from(&inv_t.column(c));
    }
    for (c, &j) in rest.iter().enumerate() {
        hat[(c, j)] = T::one();
        tilde[(c, j)] = T::one();
    }
    Ok((hat, bar, tilde))
}

pub fn build_boundary_algebra<T: Real>(
    b0: &DMatrix<T>,
    b1: &DMatrix<T>,
) -> Result<BoundaryAlgebra<T>> {
    let left_columns = select_basis_submatrix(b0)?;
    let right_columns = select_basis_submatrix(b1)?;
    build_boundary_algebra_with(b0, b1, left_columns, right_columns)
}

/// Builds the algebra from caller-chosen column sets.
pub fn build_boundary_algebra_with<T: Real>(
    b0: &DMatrix<T>,
    b1: &DMatrix<T>,
    left_columns: Vec<usize>,
    right_columns: Vec<usize>,
) -> Result<BoundaryAlgebra<T>> {
    if left_columns.len() != b0.nrows() || right_columns.len() != b1.nrows() {
        return Err(Error::InvalidInput(
            "column sets must match the row counts".into(),
        ));
    }
    let (b0_hat, b0_bar, b0_tilde) = endpoint_triplet(b0, &left_columns)
        .map_err(|_| Error::RankDeficient("chosen left submatrix is singular".into()))?;
    let (b1_hat, b1_bar, b1_tilde) = endpoint_triplet(b1, &right_columns)
        .map_err(|_| Error::RankDeficient("chosen right submatrix is singular".into()))?;
    Ok(BoundaryAlgebra {
        left_columns,
        right_columns,
        b0_hat,
        b0_bar,
        b0_tilde,
        b1_hat,
        b1_bar,
        b1_tilde,
    })
}

impl<T: Real> BoundaryAlgebra<T> {
    /// Largest violation of the pairing decomposition at either endpoint.
    pub fn pairing_residual(
        &self,
        b0: &DMatrix<T>,
        b1: &DMatrix<T>,
        v: &DVector<T>,
        w: &DVector<T>,
    ) -> T {
        let direct = w.dot(v);
        let left =
            (&self.b0_bar * w).dot(&(b0 * v)) + (&self.b0_hat * w).dot(&(&self.b0_tilde * v));
        let right =
            (&self.b1_bar * w).dot(&(b1 * v)) + (&self.b1_hat * w).dot(&(&self.b1_tilde * v));
        (direct - left).abs().max((direct - right).abs())
    }
}

/// Adjoint problem `-psi' + A^T psi = g` with `hat` boundary conditions.
#[derive(Clone)]
pub struct AdjointBvpSpec<T: Real = f64> {
    pub n: usize,
    pub m: usize,
    pub horizon: T,
    /// `A^T(t)`; the adjoint state obeys `psi' = A^T psi - g`.
    pub a_transpose: MatFn<T>,
    /// `n - m` rows at `t = 0`.
    pub b0_hat: DMatrix<T>,
    /// `m` rows at `t = T`.
    pub b1_hat: DMatrix<T>,
}

pub fn adjoint_bvp<T: Real>(spec: &BvpSpec<T>, alg: &BoundaryAlgebra<T>) -> AdjointBvpSpec<T> {
    AdjointBvpSpec {
        n: spec.n,
        m: spec.m,
        horizon: spec.horizon,
        a_transpose: spec.adjoint_drift(),
        b0_hat: alg.b0_hat.clone(),
        b1_hat: alg.b1_hat.clone(),
    }
}

/// Default number of RK4 steps used to build fundamental systems.
pub const FUNDAMENTAL_STEPS: usize = 512;

fn square_condition_matrix<T: Real>(
    drift: &MatFn<T>,
    horizon: T,
    r0: &DMatrix<T>,
    r1: &DMatrix<T>,
    steps: usize,
) -> Result<DMatrix<T>> {
    let phi = fundamental_matrix(drift, T::zero(), horizon, steps)?;
    let n = r0.ncols();
    let mut m = DMatrix::zeros(n, n);
    m.rows_mut(0, r0.nrows()).copy_from(r0);
    m.rows_mut(r0.nrows(), r1.nrows()).copy_from(&(r1 * phi));
    Ok(m)
}

/// Whether the homogeneous primal problem has only the trivial solution.
pub fn check_unique_solvability<T: Real>(spec: &BvpSpec<T>, steps: usize) -> Result<bool> {
    let m = square_condition_matrix(
        &spec.primal_drift(),
        spec.horizon,
        &spec.b0,
        &spec.b1,
        steps,
    )?;
    Ok(rank(&m, T::rank_tol()) == spec.n)
}

impl<T: Real> AdjointBvpSpec<T> {
    /// Whether the homogeneous adjoint problem has only the trivial solution.
    pub fn check_unique_solvability(&self, steps: usize) -> Result<bool> {
        let m = square_condition_matrix(
            &self.a_transpose,
            self.horizon,
            &self.b0_hat,
            &self.b1_hat,
            steps,
        )?;
        Ok(rank(&m, T::rank_tol()) == self.n)
    }
}

/// Quadrature residual of the Green formula for the primal operator.
///
/// `phi` and `psi` carry values in their first `n` components and
/// derivatives in the next `n`. The returned number is the absolute
/// difference between `int (L phi, psi)` and the boundary form plus
/// `int (phi, L* psi)`, where the boundary form is expanded through the
/// companion matrices.
pub fn green_residual<T: Real>(
    spec: &BvpSpec<T>,
    alg: &BoundaryAlgebra<T>,
    phi: &PiecewiseTrajectory<T>,
    psi: &PiecewiseTrajectory<T>,
) -> Result<T> {
    let n = spec.n;
    if phi.grid() != psi.grid() {
        return Err(Error::GridMismatch(
            "both functions must share a grid".into(),
        ));
    }
    if phi.dim() != 2 * n || psi.dim() != 2 * n {
        return Err(Error::ArityMismatch {
            expected: 2 * n,
            got: phi.dim().min(psi.dim()),
        });
    }
    let g = phi.grid();
    let mut lhs = T::zero();
    let mut vol = T::zero();
    for k in 0..g.intervals() {
        for (j, (w, &t)) in g.weights(k).iter().zip(g.nodes(k)).enumerate() {
            let a = (spec.a)(t);
            let x = phi.node(k, j);
            let y = psi.node(k, j);
            let (xv, xd) = (x.rows(0, n), x.rows(n, n));
            let (yv, yd) = (y.rows(0, n), y.rows(n, n));
            let l_phi = xd + &a * xv;
            let l_star_psi = -yd + a.transpose() * yv;
            lhs += *w * l_phi.dot(&yv);
            vol += *w * xv.dot(&l_star_psi);
        }
    }
    let p0 = phi.start().rows(0, n).into_owned();
    let p1 = phi.end().rows(0, n).into_owned();
    let q0 = psi.start().rows(0, n).into_owned();
    let q1 = psi.end().rows(0, n).into_owned();
    let right = (&alg.b1_bar * &q1).dot(&(&spec.b1 * &p1))
        + (&alg.b1_hat * &q1).dot(&(&alg.b1_tilde * &p1));
    let left = (&alg.b0_bar * &q0).dot(&(&spec.b0 * &p0))
        + (&alg.b0_hat * &q0).dot(&(&alg.b0_tilde * &p0));
    Ok((lhs - (right - left + vol)).abs())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::func::const_mat;

    fn m(r: usize, c: usize, v: &[f64]) -> DMatrix<f64> {
        DMatrix::from_row_slice(r, c, v)
    }

    #[test]
    fn two_dimensional_example() {
        let alg = build_boundary_algebra(&m(1, 2, &[1.0, 0.0]), &m(1, 2, &[0.0, 1.0])).unwrap();
        assert_eq!(alg.b0_hat, m(1, 2, &[0.0, 1.0]));
        assert_eq!(alg.b0_bar, m(1, 2, &[1.0, 0.0]));
        assert_eq!(alg.b0_tilde, m(1, 2, &[0.0, 1.0]));
        assert_eq!(alg.b1_hat, m(1, 2, &[1.0, 0.0]));
        assert_eq!(alg.b1_bar, m(1, 2, &[0.0, 1.0]));
        assert_eq!(alg.b1_tilde, m(1, 2, &[1.0, 0.0]));
    }

    #[test]
    fn identity_block_example() {
        let b0 = m(2, 4, &[1.0, 0.0, 0.0, 0.0, 0.0, 1.0, 0.0, 0.0]);
        let b1 = m(2, 4, &[0.0, 0.0, 1.0, 0.0, 0.0, 0.0, 0.0, 1.0]);
        let alg = build_boundary_algebra(&b0, &b1).unwrap();
        assert_eq!(alg.b0_bar, b0);
        assert_eq!(alg.b0_hat, b1);
        assert_eq!(alg.b0_tilde, b1);
    }

    #[test]
    fn pairing_identity_on_dense_matrices() {
        let b0 = m(2, 5, &[1.0, 2.0, -1.0, 0.5, 3.0, 0.0, 1.0, 4.0, -2.0, 1.0]);
        let b1 = m(
            3,
            5,
            &[
                2.0, 0.0, 1.0, 1.0, -1.0, 1.0, 1.0, 0.0, 3.0, 0.0, 0.0, -1.0, 2.0, 1.0, 1.0,
            ],
        );
        let alg = build_boundary_algebra(&b0, &b1).unwrap();
        let v = DVector::from_vec(vec![0.3, -1.0, 2.0, 0.7, 1.1]);
        let w = DVector::from_vec(vec![1.5, 0.2, -0.4, 2.0, -0.9]);
        assert!(alg.pairing_residual(&b0, &b1, &v, &w) < 1e-12);
    }

    #[test]
    fn solvability_flags() {
        let zero = const_mat(DMatrix::<f64>::zeros(2, 2));
        let ok = BvpSpec::homogeneous(
            1.0,
            zero.clone(),
            m(1, 2, &[1.0, 0.0]),
            m(1, 2, &[0.0, 1.0]),
        )
        .unwrap();
        assert!(check_unique_solvability(&ok, 64).unwrap());
        let bad =
            BvpSpec::homogeneous(1.0, zero, m(1, 2, &[1.0, 0.0]), m(1, 2, &[1.0, 0.0])).unwrap();
        assert!(!check_unique_solvability(&bad, 64).unwrap());
    }

    #[test]
    fn adjoint_conditions_of_the_simple_example() {
        let zero = const_mat(DMatrix::<f64>::zeros(2, 2));
        let spec =
            BvpSpec::homogeneous(1.0, zero, m(1, 2, &[1.0, 0.0]), m(1, 2, &[0.0, 1.0])).unwrap();
        let alg = build_boundary_algebra(&spec.b0, &spec.b1).unwrap();
        let adj = adjoint_bvp(&spec, &alg);
        assert_eq!(adj.b0_hat, m(1, 2, &[0.0, 1.0]));
        assert_eq!(adj.b1_hat, m(1, 2, &[1.0, 0.0]));
        assert!(adj.check_unique_solvability(64).unwrap());
    }

    #[test]
    fn rejects_rank_deficient_conditions() {
        let zero = const_mat(DMatrix::<f64>::zeros(3, 3));
        let r = BvpSpec::homogeneous(
            1.0,
            zero,
            m(2, 3, &[1.0, 0.0, 0.0, 2.0, 0.0, 0.0]),
            m(1, 3, &[0.0, 0.0, 1.0]),
        );
        assert!(matches!(r, Err(Error::RankDeficient(_))));
    }
}
