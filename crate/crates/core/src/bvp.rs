//! Linear multipoint boundary value problems solved by multiple shooting.
//!
//! A problem lives on a [`Grid`]. On interval `k` the state obeys
//! `x' = M_k(t) x + g_k(t) + sum_q G_{k,q}(t) theta_q`, where the `theta_q`
//! are finitely many unknown scalars. Consecutive intervals are tied by
//! interface maps `x_{k+1}(start) = J x_k(end) + d`, and any number of extra
//! linear conditions may combine one-sided values at interval ends, Simpson
//! integrals of weighted states and the parameters. Every interval is
//! integrated with classical fourth-order Runge-Kutta on the grid nodes and the
//! resulting linear system is solved densely.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::func::{MatFn, VecFn};
use crate::grid::Grid;
use crate::linalg::{solve_system, SolveReport};
use crate::scalar::Real;
use crate::trajectory::PiecewiseTrajectory;

/// Condition number above which a solve reports a warning.
pub const CONDITION_WARNING: f64 = 1e12;

/// End of a grid interval.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Endpoint {
    Start,
    End,
}

/// Dynamics on one interval.
#[derive(Clone)]
pub struct Segment<T: Real = f64> {
    pub drift: MatFn<T>,
    pub forcing: Option<VecFn<T>>,
    /// Forcing columns multiplying the unknown parameters.
    pub params: Vec<(usize, VecFn<T>)>,
}

/// Block of `r` scalar linear conditions.
#[derive(Clone)]
pub struct ConditionBlock<T: Real = f64> {
    pub points: Vec<(usize, Endpoint, DMatrix<T>)>,
    pub integrals: Vec<(usize, MatFn<T>)>,
    pub params: Vec<(usize, DVector<T>)>,
    pub rhs: DVector<T>,
}

impl<T: Real> ConditionBlock<T> {
    pub fn new(rhs: DVector<T>) -> Self {
        Self {
            points: Vec::new(),
            integrals: Vec::new(),
            params: Vec::new(),
            rhs,
        }
    }

    pub fn point(mut self, interval: usize, end: Endpoint, rows: DMatrix<T>) -> Self {
        self.points.push((interval, end, rows));
        self
    }

    pub fn integral(mut self, interval: usize, weight: MatFn<T>) -> Self {
        self.integrals.push((interval, weight));
        self
    }

    pub fn param(mut self, q: usize, column: DVector<T>) -> Self {
        self.params.push((q, column));
        self
    }

    pub fn rows(&self) -> usize {
        self.rhs.len()
    }
}

/// Assembled multipoint problem.
#[derive(Clone)]
pub struct MultipointProblem<T: Real = f64> {
    grid: Grid<T>,
    dim: usize,
    n_params: usize,
    segments: Vec<Segment<T>>,
    interfaces: Vec<(Option<DMatrix<T>>, DVector<T>)>,
    conditions: Vec<ConditionBlock<T>>,
}

/// Solution of a [`MultipointProblem`].
#[derive(Debug, Clone)]
pub struct MultipointSolution<T: Real = f64> {
    pub trajectory: PiecewiseTrajectory<T>,
    pub params: DVector<T>,
    pub report: SolveReport<T>,
    pub warnings: Vec<String>,
}

impl<T: Real> MultipointProblem<T> {
    /// Problem with the same drift on every interval, continuous interfaces
    /// and no conditions yet.
    pub fn new(grid: Grid<T>, dim: usize, n_params: usize, drift: MatFn<T>) -> Self {
        let k = grid.intervals();
        Self {
            segments: vec![
                Segment {
                    drift,
                    forcing: None,
                    params: Vec::new(),
                };
                k
            ],
            interfaces: vec![(None, DVector::zeros(dim)); k - 1],
            conditions: Vec::new(),
            grid,
            dim,
            n_params,
        }
    }

    pub fn grid(&self) -> &Grid<T> {
        &self.grid
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn set_drift(&mut self, k: usize, drift: MatFn<T>) {
        self.segments[k].drift = drift;
    }

    pub fn set_forcing(&mut self, k: usize, forcing: VecFn<T>) {
        self.segments[k].forcing = Some(forcing);
    }

    pub fn set_forcing_all(&mut self, forcing: VecFn<T>) {
        for s in &mut self.segments {
            s.forcing = Some(forcing.clone());
        }
    }

    pub fn add_param_forcing(&mut self, k: usize, q: usize, column: VecFn<T>) {
        self.segments[k].params.push((q, column));
    }

    /// Jump `x(b+) = x(b-) + d` at interior breakpoint index `b`.
    pub fn set_jump(&mut self, b: usize, d: DVector<T>) {
        self.interfaces[b - 1] = (None, d);
    }

    /// General interface `x(b+) = J x(b-) + d`.
    pub fn set_interface(&mut self, b: usize, j: DMatrix<T>, d: DVector<T>) {
        self.interfaces[b - 1] = (Some(j), d);
    }

    /// Rows `R x(start) = rhs` at the left end of the grid.
    pub fn left_rows(&mut self, r: DMatrix<T>, rhs: DVector<T>) {
        self.conditions
            .push(ConditionBlock::new(rhs).point(0, Endpoint::Start, r));
    }

    /// Rows `R x(end) = rhs` at the right end of the grid.
    pub fn right_rows(&mut self, r: DMatrix<T>, rhs: DVector<T>) {
        let last = self.grid.intervals() - 1;
        self.conditions
            .push(ConditionBlock::new(rhs).point(last, Endpoint::End, r));
    }

    pub fn add_condition(&mut self, c: ConditionBlock<T>) {
        self.conditions.push(c);
    }

    fn validate(&self) -> Result<()> {
        let k = self.grid.intervals();
        for c in &self.conditions {
            let r = c.rows();
            for (i, _, m) in &c.points {
                if *i >= k || m.nrows() != r || m.ncols() != self.dim {
                    return Err(Error::InvalidInput("malformed point condition".into()));
                }
            }
            for (i, _) in &c.integrals {
                if *i >= k {
                    return Err(Error::InvalidInput(
                        "integral over a missing interval".into(),
                    ));
                }
            }
            for (q, col) in &c.params {
                if *q >= self.n_params || col.len() != r {
                    return Err(Error::InvalidInput("malformed parameter condition".into()));
                }
            }
        }
        for s in &self.segments {
            if s.params.iter().any(|(q, _)| *q >= self.n_params) {
                return Err(Error::InvalidInput(
                    "forcing refers to a missing parameter".into(),
                ));
            }
        }
        Ok(())
    }

    /// Integrates interval `k` for the identity, the particular solution and
    /// every parameter column at once.
    fn shoot(&self, k: usize) -> Result<Vec<DMatrix<T>>> {
        let d = self.dim;
        let cols = d + 1 + self.n_params;
        let seg = &self.segments[k];
        let rhs = |t: T, x: &DMatrix<T>| -> DMatrix<T> {
            let m = (seg.drift)(t);
            let mut out = m * x;
            if let Some(g) = &seg.forcing {
                let gv = g(t);
                let mut c = out.column_mut(d);
                c += gv;
            }
            for (q, col) in &seg.params {
                let gv = col(t);
                let mut c = out.column_mut(d + 1 + q);
                c += gv;
            }
            out
        };
        let mut x = DMatrix::zeros(d, cols);
        x.view_mut((0, 0), (d, d)).fill_with_identity();
        let nodes = self.grid.nodes(k);
        let mut out = Vec::with_capacity(nodes.len());
        out.push(x.clone());
        for w in nodes.windows(2) {
            x = rk4_step(&rhs, w[0], w[1] - w[0], &x);
            if x.iter().any(|v| !v.is_finite()) {
                return Err(Error::IntegrationFailure(format!(
                    "non-finite state near t = {}",
                    w[1].as_f64()
                )));
            }
            out.push(x.clone());
        }
        Ok(out)
    }

    /// Assembles and solves the shooting system.
    pub fn solve(&self) -> Result<MultipointSolution<T>> {
        self.validate()?;
        let d = self.dim;
        let kk = self.grid.intervals();
        let np = self.n_params;
        let ncols = kk * d + np;
        let props = (0..kk).map(|k| self.shoot(k)).collect::<Result<Vec<_>>>()?;
        let nrows = (kk - 1) * d + self.conditions.iter().map(|c| c.rows()).sum::<usize>();
        if nrows < ncols {
            return Err(Error::SingularSystem(format!(
                "{nrows} conditions for {ncols} unknowns"
            )));
        }
        let mut a = DMatrix::zeros(nrows, ncols);
        let mut b = DVector::zeros(nrows);
        let pcol = kk * d;

        // Adds `coef * X` where X is the affine state map at node (k, j).
        let add_state = |a: &mut DMatrix<T>,
                         b: &mut DVector<T>,
                         row: usize,
                         coef: &DMatrix<T>,
                         k: usize,
                         j: usize| {
            let x = &props[k][j];
            let r = coef.nrows();
            let mut blk = a.view_mut((row, k * d), (r, d));
            blk += coef * x.columns(0, d);
            let mut rb = b.rows_mut(row, r);
            rb -= coef * x.column(d);
            if np > 0 {
                let mut pb = a.view_mut((row, pcol), (r, np));
                pb += coef * x.columns(d + 1, np);
            }
        };

        let mut row = 0;
        for (i, (jmap, jump)) in self.interfaces.iter().enumerate() {
            let last = props[i].len() - 1;
            let jm = jmap.clone().unwrap_or_else(|| DMatrix::identity(d, d));
            a.view_mut((row, (i + 1) * d), (d, d)).fill_with_identity();
            add_state(&mut a, &mut b, row, &(-&jm), i, last);
            let mut rb = b.rows_mut(row, d);
            rb += jump;
            row += d;
        }
        for c in &self.conditions {
            let r = c.rows();
            b.rows_mut(row, r).copy_from(&c.rhs);
            for (k, end, m) in &c.points {
                let j = match end {
                    Endpoint::Start => 0,
                    Endpoint::End => props[*k].len() - 1,
                };
                add_state(&mut a, &mut b, row, m, *k, j);
            }
            for (k, wf) in &c.integrals {
                let nodes = self.grid.nodes(*k);
                for (j, w) in self.grid.weights(*k).into_iter().enumerate() {
                    let coef = wf(nodes[j]) * w;
                    add_state(&mut a, &mut b, row, &coef, *k, j);
                }
            }
            for (q, col) in &c.params {
                let mut cc = a.view_mut((row, pcol + q), (r, 1));
                cc += col;
            }
            row += r;
        }
        if a.iter().chain(b.iter()).any(|v| !v.is_finite()) {
            return Err(Error::IntegrationFailure(
                "non-finite entries in the shooting system".into(),
            ));
        }
        let (sol, report) = solve_system(&a, &b)?;
        let mut warnings = Vec::new();
        if report.condition.as_f64() > CONDITION_WARNING {
            warnings.push(format!(
                "shooting matrix condition number {:.3e} exceeds {:.0e}",
                report.condition.as_f64(),
                CONDITION_WARNING
            ));
        }
        let theta = sol.rows(pcol, np).into_owned();
        let values = (0..kk)
            .map(|k| {
                let x0 = sol.rows(k * d, d);
                props[k]
                    .iter()
                    .map(|x| {
                        let mut v = x.columns(0, d) * x0 + x.column(d);
                        if np > 0 {
                            v += x.columns(d + 1, np) * &theta;
                        }
                        v
                    })
                    .collect()
            })
            .collect();
        Ok(MultipointSolution {
            trajectory: PiecewiseTrajectory::new(self.grid.clone(), values)?,
            params: theta,
            report,
            warnings,
        })
    }
}

/// One classical Runge-Kutta step for a matrix-valued ODE.
pub fn rk4_step<T: Real>(
    f: &impl Fn(T, &DMatrix<T>) -> DMatrix<T>,
    t: T,
    h: T,
    x: &DMatrix<T>,
) -> DMatrix<T> {
    let half = T::lit(0.5);
    let k1 = f(t, x);
    let k2 = f(t + h * half, &(x + &k1 * (h * half)));
    let k3 = f(t + h * half, &(x + &k2 * (h * half)));
    let k4 = f(t + h, &(x + &k3 * h));
    x + (k1 + (k2 + k3) * T::lit(2.0) + k4) * (h / T::lit(6.0))
}

/// Transition matrix of `x' = M(t) x` from `t0` to `t1` in `steps` RK4 steps.
/// `t1 < t0` integrates backwards.
pub fn fundamental_matrix<T: Real>(
    drift: &MatFn<T>,
    t0: T,
    t1: T,
    steps: usize,
) -> Result<DMatrix<T>> {
    let n = drift(t0).nrows();
    let steps = steps.max(1);
    let h = (t1 - t0) / T::from_count(steps);
    let f = |t: T, x: &DMatrix<T>| drift(t) * x;
    let mut x = DMatrix::identity(n, n);
    for i in 0..steps {
        x = rk4_step(&f, t0 + h * T::from_count(i), h, &x);
    }
    if x.iter().any(|v| !v.is_finite()) {
        return Err(Error::IntegrationFailure(
            "fundamental matrix overflowed".into(),
        ));
    }
    Ok(x)
}

/// Integrates `x' = M(t) x + g(t)` through the given monotone list of times.
pub fn integrate_linear<T: Real>(
    drift: &MatFn<T>,
    forcing: Option<&VecFn<T>>,
    x0: DVector<T>,
    times: &[T],
) -> Result<Vec<DVector<T>>> {
    let f = |t: T, x: &DMatrix<T>| {
        let mut out = drift(t) * x;
        if let Some(g) = forcing {
            let mut c = out.column_mut(0);
            c += g(t);
        }
        out
    };
    let mut x = DMatrix::from_column_slice(x0.len(), 1, x0.as_slice());
    let mut out = Vec::with_capacity(times.len());
    out.push(x0);
    for w in times.windows(2) {
        x = rk4_step(&f, w[0], w[1] - w[0], &x);
        if x.iter().any(|v| !v.is_finite()) {
            return Err(Error::IntegrationFailure(format!(
                "non-finite state near t = {}",
                w[1].as_f64()
            )));
        }
        out.push(x.column(0).into_owned());
    }
    Ok(out)
}

/// Transition matrices `Psi(t_end, tau)` of `x' = M(t) x` from every grid node
/// to the right end of the grid, computed by integrating backwards.
pub fn backward_propagator<T: Real>(drift: &MatFn<T>, grid: &Grid<T>) -> Vec<Vec<DMatrix<T>>> {
    let n = drift(grid.end()).nrows();
    let drift = drift.clone();
    let f = move |t: T, x: &DMatrix<T>| -(x * drift(t));
    let mut out: Vec<Vec<DMatrix<T>>> = vec![Vec::new(); grid.intervals()];
    let mut x = DMatrix::identity(n, n);
    for k in (0..grid.intervals()).rev() {
        let nodes = grid.nodes(k);
        let mut piece = vec![DMatrix::zeros(n, n); nodes.len()];
        piece[nodes.len() - 1] = x.clone();
        for j in (0..nodes.len() - 1).rev() {
            x = rk4_step(&f, nodes[j + 1], nodes[j] - nodes[j + 1], &x);
            piece[j] = x.clone();
        }
        out[k] = piece;
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::func::{const_mat, vec_fn};

    #[test]
    fn backward_propagator_matches_forward_transition() {
        let m = const_mat(DMatrix::from_row_slice(2, 2, &[0.1, 1.0, -2.0, 0.3]));
        let g = Grid::<f64>::new(vec![0.0, 0.4, 1.0], 33).unwrap();
        let back = backward_propagator(&m, &g);
        let fwd = fundamental_matrix(&m, 0.4, 1.0, 64).unwrap();
        assert!((&back[1][0] - fwd).norm() < 1e-6);
        assert!((&back[1][32] - DMatrix::identity(2, 2)).norm() == 0.0);
    }

    #[test]
    fn harmonic_oscillator_transition() {
        let m = const_mat(DMatrix::from_row_slice(2, 2, &[0.0, 1.0, -1.0, 0.0]));
        let phi = fundamental_matrix(&m, 0.0, 1.0, 200).unwrap();
        let exact =
            DMatrix::from_row_slice(2, 2, &[1f64.cos(), 1f64.sin(), -1f64.sin(), 1f64.cos()]);
        assert!((phi - exact).norm() < 1e-10);
    }

    #[test]
    fn scalar_two_point_problem() {
        // x1' = x2, x2' = -1, x1(0) = 0, x1(1) = 0  =>  x1 = t(1-t)/2.
        let g = Grid::<f64>::new(vec![0.0, 1.0], 33).unwrap();
        let mut p = MultipointProblem::new(
            g,
            2,
            0,
            const_mat(DMatrix::from_row_slice(2, 2, &[0.0, 1.0, 0.0, 0.0])),
        );
        p.set_forcing_all(vec_fn(|_| DVector::from_vec(vec![0.0, -1.0])));
        p.left_rows(
            DMatrix::from_row_slice(1, 2, &[1.0, 0.0]),
            DVector::zeros(1),
        );
        p.right_rows(
            DMatrix::from_row_slice(1, 2, &[1.0, 0.0]),
            DVector::zeros(1),
        );
        let s = p.solve().unwrap();
        let mid = s.trajectory.node(0, 16);
        assert!((mid[0] - 0.125).abs() < 1e-12);
    }

    #[test]
    fn jumps_and_integral_conditions() {
        // x' = theta on (0,1) with a unit jump at 1/2, x(0) = 0 and
        // int_0^1 x = 1 fixes theta.
        let g = Grid::<f64>::new(vec![0.0, 0.5, 1.0], 9).unwrap();
        let mut p = MultipointProblem::new(g, 1, 1, const_mat(DMatrix::zeros(1, 1)));
        for k in 0..2 {
            p.add_param_forcing(k, 0, vec_fn(|_| DVector::from_element(1, 1.0)));
        }
        p.set_jump(1, DVector::from_element(1, 1.0));
        p.left_rows(DMatrix::identity(1, 1), DVector::zeros(1));
        let mut c = ConditionBlock::new(DVector::from_element(1, 1.0));
        for k in 0..2 {
            c = c.integral(k, const_mat(DMatrix::identity(1, 1)));
        }
        p.add_condition(c);
        let s = p.solve().unwrap();
        // int (theta t) + 1/2 = 1  => theta = 1.
        assert!((s.params[0] - 1.0).abs() < 1e-12);
        assert!((s.trajectory.right_limit(1)[0] - 1.5).abs() < 1e-12);
    }

    #[test]
    fn underdetermined_problem_is_singular() {
        let g = Grid::new(vec![0.0, 1.0], 5).unwrap();
        let mut p = MultipointProblem::new(g, 2, 0, const_mat(DMatrix::zeros(2, 2)));
        p.left_rows(
            DMatrix::from_row_slice(1, 2, &[1.0, 0.0]),
            DVector::zeros(1),
        );
        assert!(matches!(p.solve(), Err(Error::SingularSystem(_))));
    }
}
