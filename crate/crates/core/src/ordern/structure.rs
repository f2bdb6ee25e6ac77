//! Boundary-form completion, adjoint forms, kernels of the boundary operators
//! and the solvability test.
//!
//! The adjoint problem is carried in the quasi-derivative state `W` of
//! [`OrderNSpec::quasi_derivatives`]. Along solutions of
//! `Y' = M Y + e_n f / p_0` and `W' = -M^T W - e_1 g` one has
//! `d/dt (W . Y) = f psi - g phi`, so the boundary concomitant in the
//! end values `(Y(a), Y(b))`, `(W(a), W(b))` is the constant matrix
//! `diag(-I, I)`. All adjoint forms below act on `(W(a), W(b))`.

use nalgebra::{DMatrix, DVector};

use crate::bvp::rk4_step;
use crate::error::{Error, Result};
use crate::func::{MatFn, ScalarFn};
use crate::grid::Grid;
use crate::linalg::{invert, null_space, rank, vcat};
use crate::scalar::Real;
use crate::trajectory::PiecewiseTrajectory;

use super::operator::OrderNSpec;

/// Relative singular-value threshold for every rank decision in this module.
pub const RANK_TOL: f64 = 1e-10;

/// Completion of the boundary forms and the adjoint forms it induces.
#[derive(Debug, Clone)]
pub struct AdjointStructure<T: Real = f64> {
    /// Rows `S_1..S_{2n-m}` completing the forms to a basis of the jet space.
    pub completion: DMatrix<T>,
    /// Rows `B^+_1..B^+_{2n-m}` acting on `(W(a), W(b))`.
    pub adjoint_forms: DMatrix<T>,
    /// Rows `S^+_1..S^+_m` acting on `(W(a), W(b))`.
    pub conjugate_forms: DMatrix<T>,
    /// Boundary concomitant: `[W . Y]_a^b = J_Y^T P_c J_W`.
    pub concomitant: DMatrix<T>,
}

impl<T: Real> AdjointStructure<T> {
    pub fn adjoint_at(&self, wa: &DVector<T>, wb: &DVector<T>) -> DVector<T> {
        apply_rows(&self.adjoint_forms, wa, wb)
    }

    pub fn conjugate_at(&self, wa: &DVector<T>, wb: &DVector<T>) -> DVector<T> {
        apply_rows(&self.conjugate_forms, wa, wb)
    }

    pub fn completion_at(&self, ya: &DVector<T>, yb: &DVector<T>) -> DVector<T> {
        apply_rows(&self.completion, ya, yb)
    }
}

fn apply_rows<T: Real>(rows: &DMatrix<T>, xa: &DVector<T>, xb: &DVector<T>) -> DVector<T> {
    let n = xa.len();
    rows.columns(0, n) * xa + rows.columns(n, n) * xb
}

/// Completes the forms with an orthonormal basis of their orthogonal
/// complement and derives the adjoint forms.
pub fn complete_and_derive_adjoint_forms<T: Real>(
    spec: &OrderNSpec<T>,
) -> Result<AdjointStructure<T>> {
    let s = null_space(&spec.forms, T::lit(RANK_TOL)).transpose();
    adjoint_forms_with_completion(spec, s)
}

/// Same as [`complete_and_derive_adjoint_forms`] with caller-chosen
/// completion rows.
pub fn adjoint_forms_with_completion<T: Real>(
    spec: &OrderNSpec<T>,
    completion: DMatrix<T>,
) -> Result<AdjointStructure<T>> {
    let n = spec.n;
    let m = spec.m();
    if completion.nrows() != 2 * n - m || completion.ncols() != 2 * n {
        return Err(Error::ArityMismatch {
            expected: 2 * n - m,
            got: completion.nrows(),
        });
    }
    let omega = vcat(&spec.forms, &completion);
    if rank(&omega, T::lit(RANK_TOL)) < 2 * n {
        return Err(Error::SingularCompletion);
    }
    let mut pc = DMatrix::zeros(2 * n, 2 * n);
    for i in 0..n {
        pc[(i, i)] = -T::one();
        pc[(n + i, n + i)] = T::one();
    }
    // J_Y^T P_c J_W = (Omega J_Y)^T D J_W with D = Omega^{-T} P_c, and the
    // Green identity asks for  S(phi) . B^+(psi) - B(phi) . S^+(psi).
    let d = invert(&omega.transpose()).map_err(|_| Error::SingularCompletion)? * &pc;
    let conjugate_forms = -d.rows(0, m).into_owned();
    let adjoint_forms = d.rows(m, 2 * n - m).into_owned();
    Ok(AdjointStructure {
        completion,
        adjoint_forms,
        conjugate_forms,
        concomitant: pc,
    })
}

/// Bases of the kernels of the boundary operator and of its adjoint.
#[derive(Debug, Clone)]
pub struct NullSpaces<T: Real = f64> {
    /// Rank of the forms evaluated on a fundamental system.
    pub rank: usize,
    /// Companion states `(phi_i, ..., phi_i^(n-1))`, orthonormal in `L^2`.
    pub primal: Vec<PiecewiseTrajectory<T>>,
    /// Quasi-derivative states `W_i`; `psi_i = W_{i,n} / p_0` is orthonormal
    /// in `L^2`.
    pub adjoint: Vec<PiecewiseTrajectory<T>>,
    /// Largest boundary-form residual over both bases.
    pub form_residual: T,
}

impl<T: Real> NullSpaces<T> {
    /// `phi_i(t)` at grid node `(k, j)`.
    pub fn phi(&self, i: usize, k: usize, j: usize) -> T {
        self.primal[i].node(k, j)[0]
    }

    /// `psi_i(t)` at grid node `(k, j)`.
    pub fn psi(&self, spec: &OrderNSpec<T>, i: usize, k: usize, j: usize) -> T {
        let w = self.adjoint[i].node(k, j);
        let t = self.adjoint[i].grid().nodes(k)[j];
        w[spec.n - 1] / spec.leading(t)
    }
}

/// Fundamental matrix of `x' = F(t) x` at every node of a grid, continuous
/// across breakpoints.
pub fn fundamental_on_grid<T: Real>(
    drift: &MatFn<T>,
    grid: &Grid<T>,
    dim: usize,
) -> Vec<Vec<DMatrix<T>>> {
    let f = |t: T, x: &DMatrix<T>| drift(t) * x;
    let mut x = DMatrix::identity(dim, dim);
    let mut out = Vec::with_capacity(grid.intervals());
    for k in 0..grid.intervals() {
        let nodes = grid.nodes(k);
        let mut piece = Vec::with_capacity(nodes.len());
        piece.push(x.clone());
        for w in nodes.windows(2) {
            x = rk4_step(&f, w[0], w[1] - w[0], &x);
            piece.push(x.clone());
        }
        out.push(piece);
    }
    out
}

fn trajectory_of<T: Real>(
    grid: &Grid<T>,
    fund: &[Vec<DMatrix<T>>],
    c: &DVector<T>,
) -> Result<PiecewiseTrajectory<T>> {
    let values = fund
        .iter()
        .map(|p| p.iter().map(|x| x * c).collect())
        .collect();
    PiecewiseTrajectory::new(grid.clone(), values)
}

/// Gram-Schmidt in the `L^2` product of a scalar read-out of each state.
fn orthonormalize<T: Real>(
    grid: &Grid<T>,
    mut basis: Vec<PiecewiseTrajectory<T>>,
    read: impl Fn(T, &DVector<T>) -> T,
) -> Vec<PiecewiseTrajectory<T>> {
    let inner = |x: &PiecewiseTrajectory<T>, y: &PiecewiseTrajectory<T>| {
        grid.integrate(|k, j, t| read(t, x.node(k, j)) * read(t, y.node(k, j)))
    };
    for i in 0..basis.len() {
        for j in 0..i {
            let c = inner(&basis[i], &basis[j]);
            let bj = basis[j].clone();
            basis[i] = PiecewiseTrajectory::new(
                grid.clone(),
                (0..grid.intervals())
                    .map(|k| {
                        (0..grid.nodes(k).len())
                            .map(|l| basis[i].node(k, l) - bj.node(k, l) * c)
                            .collect()
                    })
                    .collect(),
            )
            .expect("same grid");
        }
        let nrm = inner(&basis[i], &basis[i]).sqrt();
        basis[i] = basis[i].map(|_, x| x / nrm);
    }
    basis
}

/// Kernels of the boundary operator and of its adjoint on the given grid.
pub fn null_space_bases<T: Real>(
    spec: &OrderNSpec<T>,
    structure: &AdjointStructure<T>,
    grid: &Grid<T>,
) -> Result<NullSpaces<T>> {
    let n = spec.n;
    if grid.start() != spec.a || grid.end() != spec.b {
        return Err(Error::GridMismatch(
            "the grid must span the operator interval".into(),
        ));
    }
    let tol = T::lit(RANK_TOL);
    let m_fn = spec.companion_fn();
    let fund = fundamental_on_grid(&m_fn, grid, n);
    let last = fund
        .last()
        .and_then(|p| p.last())
        .expect("non-empty grid")
        .clone();
    let eye = DMatrix::identity(n, n);
    let on_fund = &spec.forms.columns(0, n) * &eye + &spec.forms.columns(n, n) * &last;
    let r = rank(&on_fund, tol);
    let cs = null_space(&on_fund, tol);
    let primal = (0..cs.ncols())
        .map(|i| trajectory_of(grid, &fund, &cs.column(i).into_owned()))
        .collect::<Result<Vec<_>>>()?;
    let primal = orthonormalize(grid, primal, |_, x| x[0]);

    let adj_fn: MatFn<T> = {
        let m_fn = m_fn.clone();
        std::sync::Arc::new(move |t| -m_fn(t).transpose())
    };
    let afund = fundamental_on_grid(&adj_fn, grid, n);
    let alast = afund
        .last()
        .and_then(|p| p.last())
        .expect("non-empty grid")
        .clone();
    let adj_on_fund = &structure.adjoint_forms.columns(0, n) * &eye
        + &structure.adjoint_forms.columns(n, n) * &alast;
    let ds = null_space(&adj_on_fund, tol);
    let adjoint = (0..ds.ncols())
        .map(|i| trajectory_of(grid, &afund, &ds.column(i).into_owned()))
        .collect::<Result<Vec<_>>>()?;
    let lead = spec.clone();
    let adjoint = orthonormalize(grid, adjoint, move |t, w| w[n - 1] / lead.leading(t));

    let mut form_residual = T::zero();
    for y in &primal {
        form_residual = form_residual.max(spec.forms_at(y.start(), y.end()).amax());
    }
    for w in &adjoint {
        form_residual = form_residual.max(structure.adjoint_at(w.start(), w.end()).amax());
    }
    if adjoint.len() + r != spec.m() {
        return Err(Error::RankDeficient(format!(
            "adjoint kernel has dimension {} but the form rank {r} predicts {}",
            adjoint.len(),
            spec.m() - r
        )));
    }
    Ok(NullSpaces {
        rank: r,
        primal,
        adjoint,
        form_residual,
    })
}

/// Values `int f psi_i + sum_j alpha_j S^+_j(psi_i)` for every adjoint
/// kernel element; all vanish exactly when the problem is solvable.
pub fn solvability_residual<T: Real>(
    spec: &OrderNSpec<T>,
    structure: &AdjointStructure<T>,
    nulls: &NullSpaces<T>,
    f: &ScalarFn<T>,
    alpha: &DVector<T>,
) -> Result<DVector<T>> {
    if alpha.len() != spec.m() {
        return Err(Error::ArityMismatch {
            expected: spec.m(),
            got: alpha.len(),
        });
    }
    let k = nulls.adjoint.len();
    let mut out = DVector::zeros(k);
    for i in 0..k {
        let w = &nulls.adjoint[i];
        let grid = w.grid();
        let integral = grid.integrate(|kk, j, t| f(t) * nulls.psi(spec, i, kk, j));
        out[i] = integral + alpha.dot(&structure.conjugate_at(w.start(), w.end()));
    }
    Ok(out)
}

/// Residual of the Green formula for `phi` solving `L phi = f` from the
/// companion state `y0` at `a`, and `psi` solving `L^+ psi = g` from the
/// quasi-derivative state `w0` at `a`, relative to the size of its terms.
pub fn green_residual<T: Real>(
    spec: &OrderNSpec<T>,
    structure: &AdjointStructure<T>,
    f: &ScalarFn<T>,
    y0: &DVector<T>,
    g: &ScalarFn<T>,
    w0: &DVector<T>,
    nodes: usize,
) -> Result<T> {
    let n = spec.n;
    let grid = Grid::new(vec![spec.a, spec.b], nodes)?;
    let m_fn = spec.companion_fn();
    let lead = spec.clone();
    let rhs = |t: T, x: &DMatrix<T>| {
        let m = m_fn(t);
        let mut d = DMatrix::zeros(2 * n, 1);
        let y = x.view((0, 0), (n, 1));
        let w = x.view((n, 0), (n, 1));
        d.view_mut((0, 0), (n, 1)).copy_from(&(&m * y));
        d.view_mut((n, 0), (n, 1)).copy_from(&(-m.transpose() * w));
        d[(n - 1, 0)] += f(t) / lead.leading(t);
        d[(n, 0)] -= g(t);
        d
    };
    let mut x = DMatrix::zeros(2 * n, 1);
    x.view_mut((0, 0), (n, 1)).copy_from(y0);
    x.view_mut((n, 0), (n, 1)).copy_from(w0);
    let nodes_v = grid.nodes(0);
    let mut states = vec![x.clone()];
    for w in nodes_v.windows(2) {
        x = rk4_step(&rhs, w[0], w[1] - w[0], &x);
        states.push(x.clone());
    }
    let weights = grid.weights(0);
    let (mut lhs_int, mut rhs_int, mut scale) = (T::zero(), T::zero(), T::zero());
    for (j, s) in states.iter().enumerate() {
        let t = nodes_v[j];
        let psi = s[(2 * n - 1, 0)] / spec.leading(t);
        let a = f(t) * psi * weights[j];
        let b = s[(0, 0)] * g(t) * weights[j];
        lhs_int += a;
        rhs_int += b;
        scale += a.abs() + b.abs();
    }
    let col = |s: &DMatrix<T>, r: usize| s.view((r, 0), (n, 1)).column(0).into_owned();
    let (ya, yb) = (col(&states[0], 0), col(&states[states.len() - 1], 0));
    let (wa, wb) = (col(&states[0], n), col(&states[states.len() - 1], n));
    let bphi = spec.forms_at(&ya, &yb);
    let sphi = structure.completion_at(&ya, &yb);
    let splus = structure.conjugate_at(&wa, &wb);
    let bplus = structure.adjoint_at(&wa, &wb);
    let left = lhs_int + bphi.dot(&splus);
    let right = sphi.dot(&bplus) + rhs_int;
    let scale = scale + bphi.dot(&splus).abs() + sphi.dot(&bplus).abs();
    Ok((left - right).abs() / scale.max(T::one()))
}
