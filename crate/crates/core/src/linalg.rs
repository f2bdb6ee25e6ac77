//! Dense linear algebra helpers built on nalgebra's decompositions.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::scalar::Real;

fn max_singular<T: Real>(s: &DVector<T>) -> T {
    s.iter().fold(T::zero(), |m, &x| if x > m { x } else { m })
}

/// Numerical rank with singular values measured relative to the largest one.
pub fn rank<T: Real>(a: &DMatrix<T>, rel_tol: T) -> usize {
    if a.nrows() == 0 || a.ncols() == 0 {
        return 0;
    }
    let s = a.clone().svd(false, false).singular_values;
    let smax = max_singular(&s);
    if smax == T::zero() {
        return 0;
    }
    s.iter().filter(|&&x| x > rel_tol * smax).count()
}

/// Ratio of extreme singular values, infinite for singular matrices.
pub fn condition_number<T: Real>(a: &DMatrix<T>) -> T {
    let s = a.clone().svd(false, false).singular_values;
    let smax = max_singular(&s);
    let smin = s.iter().fold(smax, |m, &x| if x < m { x } else { m });
    if smin == T::zero() {
        T::max_value().unwrap_or_else(|| T::lit(f64::MAX))
    } else {
        smax / smin
    }
}

/// Orthonormal basis (as columns) of the right null space of `a`.
pub fn null_space<T: Real>(a: &DMatrix<T>, rel_tol: T) -> DMatrix<T> {
    let (r, c) = a.shape();
    if c == 0 {
        return DMatrix::zeros(0, 0);
    }
    if r == 0 {
        return DMatrix::identity(c, c);
    }
    // Zero padding makes the thin decomposition return a full set of right
    // singular vectors.
    let mut padded = DMatrix::zeros(r.max(c), c);
    padded.rows_mut(0, r).copy_from(a);
    let svd = padded.svd(false, true);
    let v_t = svd.v_t.expect("right singular vectors requested");
    let smax = max_singular(&svd.singular_values);
    let cut = rel_tol * smax;
    let keep: Vec<usize> = (0..c)
        .filter(|&i| smax == T::zero() || svd.singular_values[i] <= cut)
        .collect();
    let mut out = DMatrix::zeros(c, keep.len());
    for (j, &i) in keep.iter().enumerate() {
        out.column_mut(j).copy_from(&v_t.row(i).transpose());
    }
    out
}

/// Orthonormal basis of the left null space of `a`.
pub fn left_null_space<T: Real>(a: &DMatrix<T>, rel_tol: T) -> DMatrix<T> {
    null_space(&a.transpose(), rel_tol)
}

/// Greedy column pivoting: picks `rows(b)` columns spanning a well-conditioned
/// square submatrix.
///
/// At every step the column with the largest component orthogonal to the
/// ones already chosen wins, and exact ties go to the smaller index. The
/// returned indices are sorted ascending.
pub fn select_basis_columns<T: Real>(b: &DMatrix<T>) -> Result<Vec<usize>> {
    let (m, n) = b.shape();
    if m > n {
        return Err(Error::RankDeficient(format!(
            "{m} rows cannot have a nonsingular {m}x{m} column submatrix among {n} columns"
        )));
    }
    let scale = b.norm();
    if m > 0 && scale == T::zero() {
        return Err(Error::RankDeficient("zero matrix".into()));
    }
    let mut residual: Vec<DVector<T>> = (0..n).map(|j| b.column(j).into_owned()).collect();
    let mut chosen = Vec::with_capacity(m);
    for _ in 0..m {
        let mut best: Option<(usize, T)> = None;
        for (j, r) in residual.iter().enumerate() {
            if chosen.contains(&j) {
                continue;
            }
            let nrm = r.norm();
            if best.map_or(true, |(_, v)| nrm > v) {
                best = Some((j, nrm));
            }
        }
        let (j, nrm) = best.expect("enough columns");
        if nrm <= T::rank_tol() * scale {
            return Err(Error::RankDeficient(format!(
                "boundary matrix has rank {} < {m}",
                chosen.len()
            )));
        }
        let q = &residual[j] / nrm;
        for (k, r) in residual.iter_mut().enumerate() {
            if k != j && !chosen.contains(&k) {
                let c = q.dot(r);
                r.axpy(-c, &q, T::one());
            }
        }
        chosen.push(j);
    }
    chosen.sort_unstable();
    Ok(chosen)
}

/// Inverse of a square matrix, failing on numerical singularity.
pub fn invert<T: Real>(a: &DMatrix<T>) -> Result<DMatrix<T>> {
    if !a.is_square() {
        return Err(Error::InvalidInput(
            "cannot invert a non-square matrix".into(),
        ));
    }
    if a.nrows() == 0 {
        return Ok(a.clone());
    }
    if rank(a, T::default_epsilon() * T::lit(64.0)) < a.nrows() {
        return Err(Error::SingularSystem(
            "matrix is numerically singular".into(),
        ));
    }
    a.clone()
        .lu()
        .try_inverse()
        .ok_or_else(|| Error::SingularSystem("LU breakdown".into()))
}

/// Inverse of a symmetric positive definite matrix.
pub fn spd_inverse<T: Real>(a: &DMatrix<T>) -> Result<DMatrix<T>> {
    let sym = (a + a.transpose()) * T::lit(0.5);
    let chol = sym
        .cholesky()
        .ok_or_else(|| Error::InvalidInput("weight matrix is not positive definite".into()))?;
    Ok(chol.inverse())
}

/// Whether a symmetric matrix is positive semidefinite up to round-off.
pub fn is_psd<T: Real>(a: &DMatrix<T>) -> bool {
    if a.nrows() == 0 {
        return true;
    }
    let sym = (a + a.transpose()) * T::lit(0.5);
    let eig = sym.symmetric_eigen().eigenvalues;
    let scale = eig
        .iter()
        .fold(T::zero(), |m, &x| if x.abs() > m { x.abs() } else { m });
    eig.iter()
        .all(|&x| x >= -T::lit(1e-12).max(T::default_epsilon() * T::lit(64.0)) * scale)
}

/// Report attached to the solution of an assembled linear system.
#[derive(Debug, Clone, PartialEq)]
pub struct SolveReport<T: Real = f64> {
    /// Condition number of the row-equilibrated matrix.
    pub condition: T,
    /// Euclidean norm of the residual of the row-equilibrated system.
    pub residual: T,
    pub rows: usize,
    pub cols: usize,
}

/// Solves `a x = b` for square or overdetermined consistent systems.
///
/// Rows are scaled to unit max-norm first so that conditions of very
/// different magnitude do not distort the rank decision. Systems with a
/// numerically rank-deficient column space are rejected.
pub fn solve_system<T: Real>(
    a: &DMatrix<T>,
    b: &DVector<T>,
) -> Result<(DVector<T>, SolveReport<T>)> {
    let (r, c) = a.shape();
    if r != b.len() {
        return Err(Error::InvalidInput(format!(
            "{r} rows but right-hand side of length {}",
            b.len()
        )));
    }
    if r < c {
        return Err(Error::SingularSystem(format!(
            "underdetermined system: {r} rows, {c} unknowns"
        )));
    }
    let mut a_s = a.clone();
    let mut b_s = b.clone();
    for i in 0..r {
        let m = a_s.row(i).amax();
        if m > T::zero() {
            let inv = T::one() / m;
            a_s.row_mut(i).scale_mut(inv);
            b_s[i] *= inv;
        }
    }
    let svd = a_s.clone().svd(true, true);
    let s = &svd.singular_values;
    let smax = max_singular(s);
    let smin = s.iter().fold(smax, |m, &x| if x < m { x } else { m });
    let floor = T::default_epsilon() * T::from_count(c.max(16)) * T::lit(4.0);
    if smax == T::zero() || smin <= floor * smax {
        return Err(Error::SingularSystem(format!(
            "{r}x{c} system, smallest relative singular value {:e}",
            if smax == T::zero() {
                0.0
            } else {
                (smin / smax).as_f64()
            }
        )));
    }
    let x = svd
        .solve(&b_s, T::zero())
        .map_err(|e| Error::SingularSystem(e.to_string()))?;
    let residual = (&a_s * &x - &b_s).norm();
    Ok((
        x,
        SolveReport {
            condition: smax / smin,
            residual,
            rows: r,
            cols: c,
        },
    ))
}

/// Assembles a 2x2 block matrix.
pub fn block2<T: Real>(
    a11: &DMatrix<T>,
    a12: &DMatrix<T>,
    a21: &DMatrix<T>,
    a22: &DMatrix<T>,
) -> DMatrix<T> {
    let (r1, c1) = a11.shape();
    let (r2, c2) = a22.shape();
    let mut m = DMatrix::zeros(r1 + r2, c1 + c2);
    m.view_mut((0, 0), (r1, c1)).copy_from(a11);
    m.view_mut((0, c1), (r1, c2)).copy_from(a12);
    m.view_mut((r1, 0), (r2, c1)).copy_from(a21);
    m.view_mut((r1, c1), (r2, c2)).copy_from(a22);
    m
}

/// Side-by-side concatenation `[a b]`.
pub fn hcat<T: Real>(a: &DMatrix<T>, b: &DMatrix<T>) -> DMatrix<T> {
    let mut m = DMatrix::zeros(a.nrows(), a.ncols() + b.ncols());
    m.columns_mut(0, a.ncols()).copy_from(a);
    m.columns_mut(a.ncols(), b.ncols()).copy_from(b);
    m
}

/// Vertical concatenation `[a; b]`.
pub fn vcat<T: Real>(a: &DMatrix<T>, b: &DMatrix<T>) -> DMatrix<T> {
    let mut m = DMatrix::zeros(a.nrows() + b.nrows(), a.ncols());
    m.rows_mut(0, a.nrows()).copy_from(a);
    m.rows_mut(a.nrows(), b.nrows()).copy_from(b);
    m
}

/// Concatenation of two vectors.
pub fn vjoin<T: Real>(a: &DVector<T>, b: &DVector<T>) -> DVector<T> {
    let mut v = DVector::zeros(a.len() + b.len());
    v.rows_mut(0, a.len()).copy_from(a);
    v.rows_mut(a.len(), b.len()).copy_from(b);
    v
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn null_space_of_wide_matrix() {
        let a = DMatrix::from_row_slice(1, 3, &[1.0, 1.0, 0.0]);
        let ns = null_space(&a, 1e-10);
        assert_eq!(ns.ncols(), 2);
        assert!((&a * &ns).norm() < 1e-14);
        assert!((ns.transpose() * &ns - DMatrix::identity(2, 2)).norm() < 1e-12);
    }

    #[test]
    fn null_space_of_full_rank_square_is_empty() {
        let a = DMatrix::from_row_slice(2, 2, &[2.0, 1.0, 1.0, 3.0]);
        assert_eq!(null_space(&a, 1e-10).ncols(), 0);
    }

    #[test]
    fn pivoting_prefers_larger_independent_columns() {
        let b = DMatrix::from_row_slice(2, 4, &[1e-3, 1.0, 0.0, 1.0, 0.0, 1.0, 2.0, 1.0]);
        assert_eq!(select_basis_columns(&b).unwrap(), vec![1, 2]);
    }

    #[test]
    fn pivoting_ties_go_to_smallest_index() {
        let b = DMatrix::<f64>::identity(2, 4);
        let mut c = b.clone();
        c[(0, 2)] = 1.0;
        c[(1, 3)] = 1.0;
        assert_eq!(select_basis_columns(&c).unwrap(), vec![0, 1]);
    }

    #[test]
    fn pivoting_detects_rank_deficiency() {
        let b = DMatrix::from_row_slice(2, 3, &[1.0, 2.0, 3.0, 2.0, 4.0, 6.0]);
        assert!(matches!(
            select_basis_columns(&b),
            Err(Error::RankDeficient(_))
        ));
    }

    #[test]
    fn overdetermined_consistent_system() {
        let a = DMatrix::<f64>::from_row_slice(3, 2, &[1.0, 0.0, 0.0, 1.0, 1.0, 1.0]);
        let b = DVector::from_vec(vec![1.0, 2.0, 3.0]);
        let (x, rep) = solve_system(&a, &b).unwrap();
        assert!((x[0] - 1.0).abs() < 1e-13 && (x[1] - 2.0).abs() < 1e-13);
        assert!(rep.residual < 1e-13);
    }

    #[test]
    fn singular_square_system_is_rejected() {
        let a = DMatrix::from_row_slice(2, 2, &[1.0, 2.0, 2.0, 4.0]);
        let b = DVector::from_vec(vec![1.0, 2.0]);
        assert!(matches!(
            solve_system(&a, &b),
            Err(Error::SingularSystem(_))
        ));
    }

    #[test]
    fn spd_checks() {
        let a = DMatrix::from_row_slice(2, 2, &[2.0, 1.0, 1.0, 2.0]);
        let inv = spd_inverse(&a).unwrap();
        assert!((&a * inv - DMatrix::identity(2, 2)).norm() < 1e-14);
        assert!(is_psd(&DMatrix::from_row_slice(
            2,
            2,
            &[1.0, 1.0, 1.0, 1.0]
        )));
        assert!(!is_psd(&DMatrix::from_row_slice(
            2,
            2,
            &[1.0, 2.0, 2.0, 1.0]
        )));
        assert!(spd_inverse(&DMatrix::from_row_slice(2, 2, &[1.0, 2.0, 2.0, 1.0])).is_err());
    }
}
