//! Brute-force finite-dimensional minimax oracle.
//!
//! The oracle never touches the coupled boundary value problems solved by the
//! core crate. It discretizes the primal model `X' = A X + B f` with the
//! trapezoidal rule on a piecewise-uniform grid, writes the estimation error
//! of a linear estimator with node weights `u` as an explicit affine function
//! of the data `(f_0, ..., f_N, alpha)`, and minimizes the worst case over
//! the discrete ellipsoid plus the noise term with a dense symmetric solve.
//! Each column of the map `u -> gradient` is one backward sweep of the
//! discrete adjoint, so the columns are independent and run in parallel.
//!
//! The input `f` is sampled separately at the two ends of every step, each
//! sample carrying half the step in the ellipsoid. Worst-case inputs jump
//! wherever the adjoint jumps (at the estimation point and at point
//! observations), and this sampling resolves such jumps without losing the
//! second order of the scheme.
//!
//! Non-unique primal solutions are handled exactly like in the continuous
//! theory: the free coordinates of the solution set must not affect the
//! error (equality rows on `u`), and the data are restricted to the subspace
//! on which the discrete problem is solvable (a projection of the ellipsoid).

use minimax_core::func::{MatFn, VecFn};
use minimax_core::linalg::{left_null_space, null_space};
use minimax_core::ordern::Kernel;
use nalgebra::{DMatrix, DVector};
use rayon::prelude::*;

use crate::error::{HResult, HarnessError};

/// Largest number of estimator unknowns the oracle accepts.
pub const UNKNOWN_CAP: usize = 4096;

const RANK_TOL: f64 = 1e-10;

/// Prior on the boundary data `alpha` in `left X_0 + right X_N = alpha`.
#[derive(Clone)]
pub enum AlphaPrior {
    /// Ellipsoid term with the given inverse weight (zero means known).
    Weighted(DMatrix<f64>),
    /// Completely unknown boundary data.
    Free,
}

/// How the state is observed.
#[derive(Clone)]
pub enum OracleObservation {
    /// `y(t) = H(t) X(t)` on `[lo, hi]`; the noise term is `int u^T N u`
    /// with `N = noise_inv(t)`.
    Window {
        h: MatFn,
        noise_inv: MatFn,
        lo: f64,
        hi: f64,
    },
    /// `y_i = H X(t_i)`; the noise term is `sum u_i^T N_i u_i`.
    Points {
        times: Vec<f64>,
        h: DMatrix<f64>,
        noise_inv: Vec<DMatrix<f64>>,
    },
    /// `y_{k,i} = int K_i(xi_k, t) (row X(t)) dt`, paired with weights
    /// `w_k`; the noise term is `sum w_k u_k^T N_k u_k`.
    Kernel {
        nodes: Vec<f64>,
        weights: Vec<f64>,
        kernels: Vec<Kernel>,
        noise_inv: Vec<DMatrix<f64>>,
        row: DMatrix<f64>,
    },
}

/// Linear functional to estimate; every present part is added.
#[derive(Clone, Default)]
pub struct OracleTarget {
    /// `(a, X(s))`.
    pub point: Option<(f64, DVector<f64>)>,
    /// `int (l(t), X(t)) dt`.
    pub state_density: Option<VecFn>,
    /// `int (l(t), f(t)) dt`.
    pub input_density: Option<VecFn>,
    /// `(l, alpha)`.
    pub alpha: Option<DVector<f64>>,
}

/// Discrete minimax problem description.
#[derive(Clone)]
pub struct OracleProblem {
    pub t0: f64,
    pub t1: f64,
    pub drift: MatFn,
    pub input: MatFn,
    pub left: DMatrix<f64>,
    pub right: DMatrix<f64>,
    pub alpha: AlphaPrior,
    /// Inverse weight of `f(t)` in the ellipsoid `int (f, W f) dt`.
    pub f_inv: MatFn,
    pub obs: OracleObservation,
    pub target: OracleTarget,
}

#[derive(Debug, Clone)]
pub struct OracleResult {
    pub sigma: f64,
    pub sigma_sq: f64,
    /// Optimal weights with the time (or kernel node) they belong to.
    pub u: Vec<(f64, DVector<f64>)>,
    /// Ratio of extreme eigenvalues of the reduced quadratic form.
    pub condition: f64,
    /// Smallest eigenvalue of the quadratic form relative to its largest.
    pub min_eigenvalue: f64,
    pub unknowns: usize,
    pub steps: usize,
    pub constraint_residual: f64,
}

/// One estimator slot: `omega * (u, sum_k C_k X_k)` with noise `u^T D u`.
struct Slot {
    time: f64,
    taps: Vec<(usize, DMatrix<f64>)>,
    omega: f64,
    d: DMatrix<f64>,
}

struct Discretization {
    t: Vec<f64>,
    dim: usize,
    inputs: usize,
    m: usize,
    /// `T_k^T`.
    step_t: Vec<DMatrix<f64>>,
    /// `B_k^T (h_k / 2) E_k^T`, pairing `lambda_{k+1}` with the input at
    /// the left end of step `k`.
    fwd: Vec<DMatrix<f64>>,
    /// `B_{k+1}^T (h_k / 2) E_k^T`, same for the right end.
    bwd: Vec<DMatrix<f64>>,
    right: DMatrix<f64>,
    pinv: DMatrix<f64>,
    free: DMatrix<f64>,
    unsolvable: DMatrix<f64>,
}

/// Piecewise-uniform grid through the required points with about `steps`
/// steps in total.
pub fn oracle_grid(t0: f64, t1: f64, required: &[f64], steps: usize) -> HResult<Vec<f64>> {
    if !(t1 > t0) {
        return Err(HarnessError::config("oracle", "empty interval"));
    }
    let mut pts: Vec<f64> = required
        .iter()
        .copied()
        .filter(|&x| x > t0 && x < t1)
        .collect();
    pts.push(t0);
    pts.push(t1);
    pts.sort_by(f64::total_cmp);
    pts.dedup_by(|a, b| (*a - *b).abs() <= 1e-12 * (t1 - t0));
    let mut t = vec![t0];
    for w in pts.windows(2) {
        let k = ((steps as f64) * (w[1] - w[0]) / (t1 - t0))
            .round()
            .max(1.0) as usize;
        for j in 1..=k {
            t.push(if j == k {
                w[1]
            } else {
                w[0] + (w[1] - w[0]) * j as f64 / k as f64
            });
        }
    }
    Ok(t)
}

fn node_of(t: &[f64], x: f64) -> HResult<usize> {
    let span = t[t.len() - 1] - t[0];
    t.iter()
        .position(|&y| (y - x).abs() <= 1e-12 * span)
        .ok_or_else(|| HarnessError::config("oracle", format!("time {x} is not a grid node")))
}

fn inverse(a: &DMatrix<f64>) -> HResult<DMatrix<f64>> {
    a.clone()
        .try_inverse()
        .ok_or_else(|| minimax_core::Error::SingularSystem("trapezoid step matrix".into()).into())
}

fn pseudo_inverse(a: &DMatrix<f64>) -> DMatrix<f64> {
    if a.nrows() == 0 || a.ncols() == 0 {
        return DMatrix::zeros(a.ncols(), a.nrows());
    }
    let svd = a.clone().svd(true, true);
    let smax = svd.singular_values.max();
    svd.pseudo_inverse(RANK_TOL * smax.max(f64::MIN_POSITIVE))
        .expect("both singular vector sets were computed")
}

impl Discretization {
    fn new(pb: &OracleProblem, t: Vec<f64>) -> HResult<Self> {
        let a0 = (pb.drift)(pb.t0);
        let dim = a0.nrows();
        let inputs = (pb.input)(pb.t0).ncols();
        let m = pb.left.nrows();
        if pb.left.ncols() != dim || pb.right.shape() != (m, dim) {
            return Err(HarnessError::config(
                "oracle",
                "boundary forms do not match the state dimension",
            ));
        }
        let id = DMatrix::<f64>::identity(dim, dim);
        let drift: Vec<DMatrix<f64>> = t.iter().map(|&x| (pb.drift)(x)).collect();
        let input: Vec<DMatrix<f64>> = t.iter().map(|&x| (pb.input)(x)).collect();
        let n = t.len() - 1;
        let mut step_t = Vec::with_capacity(n);
        let mut fwd = Vec::with_capacity(n);
        let mut bwd = Vec::with_capacity(n);
        let mut phi = id.clone();
        for k in 0..n {
            let h = t[k + 1] - t[k];
            let e = inverse(&(&id - &drift[k + 1] * (h / 2.0)))?;
            let step = &e * (&id + &drift[k] * (h / 2.0));
            phi = &step * phi;
            let et = e.transpose() * (h / 2.0);
            fwd.push(input[k].transpose() * &et);
            bwd.push(input[k + 1].transpose() * &et);
            step_t.push(step.transpose());
        }
        let mb = &pb.left + &pb.right * phi;
        Ok(Self {
            dim,
            inputs,
            m,
            step_t,
            fwd,
            bwd,
            right: pb.right.clone(),
            pinv: pseudo_inverse(&mb),
            free: null_space(&mb, RANK_TOL),
            unsolvable: left_null_space(&mb, RANK_TOL),
            t,
        })
    }

    fn nodes(&self) -> usize {
        self.t.len()
    }

    /// Input samples: two per step.
    fn input_slots(&self) -> usize {
        2 * (self.nodes() - 1)
    }

    fn data_len(&self) -> usize {
        self.input_slots() * self.inputs + self.m
    }

    /// Time and ellipsoid weight of every input sample.
    fn input_samples(&self) -> Vec<(f64, f64)> {
        let t = &self.t;
        (0..t.len() - 1)
            .flat_map(|k| {
                let h = (t[k + 1] - t[k]) / 2.0;
                [(t[k], h), (t[k + 1], h)]
            })
            .collect()
    }

    /// Backward sweep for `sum_k (c_k, P_k)` where `P` is the zero-start
    /// particular state. Returns `lambda_0` and the gradient in `f`.
    fn sweep(&self, c: &[DVector<f64>]) -> (DVector<f64>, DVector<f64>) {
        let n = self.nodes() - 1;
        let r = self.inputs;
        let mut grad = DVector::zeros(self.input_slots() * r);
        let mut lam = c[n].clone();
        for k in (0..n).rev() {
            grad.rows_mut(2 * k * r, r)
                .copy_from(&(&self.fwd[k] * &lam));
            grad.rows_mut((2 * k + 1) * r, r)
                .copy_from(&(&self.bwd[k] * &lam));
            lam = &c[k] + &self.step_t[k] * lam;
        }
        (lam, grad)
    }

    /// Gradient of `sum_k (c_k, X_k)` with respect to the data, and with
    /// respect to the free coordinates of the solution set.
    fn gradient(&self, mut c: Vec<DVector<f64>>) -> (DVector<f64>, DVector<f64>) {
        let n = self.nodes() - 1;
        let (delta, _) = self.sweep(&c);
        let e = self.pinv.transpose() * &delta;
        c[n] -= self.right.transpose() * &e;
        let (_, grad_f) = self.sweep(&c);
        let mut out = DVector::zeros(self.data_len());
        out.rows_mut(0, grad_f.len()).copy_from(&grad_f);
        out.rows_mut(grad_f.len(), self.m).copy_from(&e);
        (out, self.free.transpose() * delta)
    }

    /// Rows expressing solvability of the discrete problem in the data.
    fn solvability_rows(&self) -> DMatrix<f64> {
        let n = self.nodes() - 1;
        let k = self.unsolvable.ncols();
        let mut gamma = DMatrix::zeros(k, self.data_len());
        for i in 0..k {
            let v = self.unsolvable.column(i).into_owned();
            let mut c = vec![DVector::zeros(self.dim); n + 1];
            c[n] = -(self.right.transpose() * &v);
            let (_, grad_f) = self.sweep(&c);
            gamma
                .row_mut(i)
                .columns_mut(0, grad_f.len())
                .copy_from(&grad_f.transpose());
            gamma
                .row_mut(i)
                .columns_mut(grad_f.len(), self.m)
                .copy_from(&v.transpose());
        }
        gamma
    }

    fn trapezoid(&self) -> Vec<f64> {
        let t = &self.t;
        let n = t.len() - 1;
        (0..=n)
            .map(|k| {
                let l = if k > 0 { t[k] - t[k - 1] } else { 0.0 };
                let r = if k < n { t[k + 1] - t[k] } else { 0.0 };
                (l + r) / 2.0
            })
            .collect()
    }
}

fn slots(pb: &OracleProblem, disc: &Discretization) -> HResult<Vec<Slot>> {
    let t = &disc.t;
    match &pb.obs {
        OracleObservation::Window {
            h,
            noise_inv,
            lo,
            hi,
        } => {
            let (a, b) = (node_of(t, *lo)?, node_of(t, *hi)?);
            Ok((a..=b)
                .map(|k| {
                    let l = if k > a { t[k] - t[k - 1] } else { 0.0 };
                    let r = if k < b { t[k + 1] - t[k] } else { 0.0 };
                    let w = (l + r) / 2.0;
                    Slot {
                        time: t[k],
                        taps: vec![(k, h(t[k]))],
                        omega: w,
                        d: noise_inv(t[k]) * w,
                    }
                })
                .collect())
        }
        OracleObservation::Points {
            times,
            h,
            noise_inv,
        } => times
            .iter()
            .zip(noise_inv)
            .map(|(&ti, d)| {
                Ok(Slot {
                    time: ti,
                    taps: vec![(node_of(t, ti)?, h.clone())],
                    omega: 1.0,
                    d: d.clone(),
                })
            })
            .collect(),
        OracleObservation::Kernel {
            nodes,
            weights,
            kernels,
            noise_inv,
            row,
        } => {
            let w = disc.trapezoid();
            Ok(nodes
                .iter()
                .enumerate()
                .map(|(kk, &xi)| Slot {
                    time: xi,
                    taps: (0..t.len())
                        .map(|k| {
                            let mut c = DMatrix::zeros(kernels.len(), disc.dim);
                            for (i, ker) in kernels.iter().enumerate() {
                                c.row_mut(i).copy_from(&(row * (w[k] * ker(xi, t[k]))));
                            }
                            (k, c)
                        })
                        .collect(),
                    omega: weights[kk],
                    d: &noise_inv[kk] * weights[kk],
                })
                .collect())
        }
    }
}

fn required_points(pb: &OracleProblem) -> Vec<f64> {
    let mut req = Vec::new();
    if let Some((s, _)) = &pb.target.point {
        req.push(*s);
    }
    match &pb.obs {
        OracleObservation::Window { lo, hi, .. } => req.extend([*lo, *hi]),
        OracleObservation::Points { times, .. } => req.extend(times.iter().copied()),
        OracleObservation::Kernel { .. } => {}
    }
    req
}

/// Applies the projected inverse weight `P` to the columns of `x`.
struct Projector {
    winv_blocks: Vec<DMatrix<f64>>,
    alpha_inv: DMatrix<f64>,
    inputs: usize,
    /// `Gamma W^{-1}` and `(Gamma W^{-1} Gamma^T)^+`.
    a: DMatrix<f64>,
    s_pinv: DMatrix<f64>,
}

impl Projector {
    fn winv(&self, x: &DMatrix<f64>) -> DMatrix<f64> {
        let r = self.inputs;
        let mut out = DMatrix::zeros(x.nrows(), x.ncols());
        for (k, b) in self.winv_blocks.iter().enumerate() {
            out.rows_mut(k * r, r).copy_from(&(b * x.rows(k * r, r)));
        }
        let off = self.winv_blocks.len() * r;
        let m = self.alpha_inv.nrows();
        out.rows_mut(off, m)
            .copy_from(&(&self.alpha_inv * x.rows(off, m)));
        out
    }

    fn apply(&self, x: &DMatrix<f64>) -> DMatrix<f64> {
        let mut y = self.winv(x);
        if self.a.nrows() > 0 {
            y -= self.a.transpose() * (&self.s_pinv * (&self.a * x));
        }
        y
    }
}

/// Solves the discrete minimax problem with about `steps` grid steps.
pub fn oracle_minimax(pb: &OracleProblem, steps: usize) -> HResult<OracleResult> {
    let t = oracle_grid(pb.t0, pb.t1, &required_points(pb), steps)?;
    let disc = Discretization::new(pb, t)?;
    let slots = slots(pb, &disc)?;
    let widths: Vec<usize> = slots.iter().map(|s| s.d.nrows()).collect();
    let unknowns: usize = widths.iter().sum();
    if unknowns > UNKNOWN_CAP {
        return Err(HarnessError::TooLarge {
            unknowns,
            cap: UNKNOWN_CAP,
        });
    }
    let free_alpha = matches!(pb.alpha, AlphaPrior::Free);
    let gamma = disc.solvability_rows();
    if free_alpha && gamma.nrows() > 0 {
        return Err(HarnessError::Unsupported(
            "unknown boundary data together with an unsolvable discrete problem".into(),
        ));
    }
    let nn = disc.nodes();
    let dim = disc.dim;

    // Columns of J: gradients of omega (e_i, C X) for every unknown.
    let mut cols: Vec<(usize, usize)> = Vec::with_capacity(unknowns);
    for (si, w) in widths.iter().enumerate() {
        cols.extend((0..*w).map(|i| (si, i)));
    }
    let grads: Vec<(DVector<f64>, DVector<f64>)> = cols
        .par_iter()
        .map(|&(si, i)| {
            let slot = &slots[si];
            let mut c = vec![DVector::zeros(dim); nn];
            for (k, ck) in &slot.taps {
                c[*k] += ck.row(i).transpose() * slot.omega;
            }
            disc.gradient(c)
        })
        .collect();
    let nd = disc.data_len();
    let nv = disc.free.ncols();
    let mut j = DMatrix::zeros(nd, unknowns);
    let mut jc = DMatrix::zeros(nv, unknowns);
    for (col, (g, gc)) in grads.into_iter().enumerate() {
        j.set_column(col, &g);
        jc.set_column(col, &gc);
    }

    // Target gradient.
    let w = disc.trapezoid();
    let mut c = vec![DVector::zeros(dim); nn];
    if let Some((s, a)) = &pb.target.point {
        c[node_of(&disc.t, *s)?] += a;
    }
    if let Some(l) = &pb.target.state_density {
        for k in 0..nn {
            c[k] += l(disc.t[k]) * w[k];
        }
    }
    let (mut b, bc) = disc.gradient(c);
    let r = disc.inputs;
    let samples = disc.input_samples();
    let fo = samples.len() * r;
    if let Some(l) = &pb.target.input_density {
        for (i, &(ti, wi)) in samples.iter().enumerate() {
            b.rows_mut(i * r, r).axpy(wi, &l(ti), 1.0);
        }
    }
    if let Some(l) = &pb.target.alpha {
        if l.len() != disc.m {
            return Err(HarnessError::config(
                "oracle.target",
                "boundary functional has the wrong length",
            ));
        }
        b.rows_mut(fo, disc.m).axpy(1.0, l, 1.0);
    }

    let alpha_inv = match &pb.alpha {
        AlphaPrior::Weighted(q) => q.clone(),
        AlphaPrior::Free => DMatrix::zeros(disc.m, disc.m),
    };
    if alpha_inv.shape() != (disc.m, disc.m) {
        return Err(HarnessError::config(
            "oracle",
            "boundary weight has the wrong size",
        ));
    }
    let mut proj = Projector {
        winv_blocks: samples
            .iter()
            .map(|&(ti, wi)| (pb.f_inv)(ti) / wi)
            .collect(),
        alpha_inv,
        inputs: r,
        a: DMatrix::zeros(0, nd),
        s_pinv: DMatrix::zeros(0, 0),
    };
    if gamma.nrows() > 0 {
        let a = proj.winv(&gamma.transpose()).transpose();
        proj.s_pinv = pseudo_inverse(&(&a * gamma.transpose()));
        proj.a = a;
    }

    let pj = proj.apply(&j);
    let bm = DMatrix::from_column_slice(nd, 1, b.as_slice());
    let pb_vec = proj.apply(&bm).column(0).into_owned();
    let mut h = j.transpose() * &pj;
    let mut off = 0;
    for s in &slots {
        let l = s.d.nrows();
        let mut blk = h.view_mut((off, off), (l, l));
        blk += &s.d;
        off += l;
    }
    h = (&h + h.transpose()) * 0.5;
    let rhs = j.transpose() * &pb_vec;

    let mut k_rows = jc;
    let mut k_rhs = bc;
    if free_alpha {
        let ja = j.rows(fo, disc.m).into_owned();
        let ba = b.rows(fo, disc.m).into_owned();
        k_rows = minimax_core::linalg::vcat(&k_rows, &ja);
        k_rhs = minimax_core::linalg::vjoin(&k_rhs, &ba);
    }

    let eig = h.clone().symmetric_eigen().eigenvalues;
    let (emin, emax) = (eig.min(), eig.max());
    let scale = emax.abs().max(f64::MIN_POSITIVE);
    if emin < -1e-10 * scale {
        return Err(minimax_core::Error::NegativeVariance(emin).into());
    }
    let chol = h.clone().cholesky().ok_or_else(|| {
        HarnessError::Core(minimax_core::Error::SingularSystem(
            "oracle quadratic form".into(),
        ))
    })?;
    let mut u = chol.solve(&rhs);
    let mut constraint_residual = 0.0;
    if k_rows.nrows() > 0 {
        let z = chol.solve(&k_rows.transpose());
        let s = &k_rows * &z;
        let mu = pseudo_inverse(&s) * (&k_rows * &u - &k_rhs);
        u -= &z * mu;
        let res = &k_rows * &u - &k_rhs;
        constraint_residual = res.amax();
        let ref_scale = k_rhs.amax().max((&k_rows * &u).amax()).max(1e-300);
        if constraint_residual > 1e-8 * ref_scale.max(1.0) {
            return Err(minimax_core::Error::InfeasibleU.into());
        }
    }
    let g = &b - &j * &u;
    let pg = proj
        .apply(&DMatrix::from_column_slice(nd, 1, g.as_slice()))
        .column(0)
        .into_owned();
    let mut noise = 0.0;
    let mut out_u = Vec::with_capacity(slots.len());
    let mut off = 0;
    for s in &slots {
        let l = s.d.nrows();
        let us = u.rows(off, l).into_owned();
        noise += us.dot(&(&s.d * &us));
        out_u.push((s.time, us));
        off += l;
    }
    let sigma_sq = (g.dot(&pg) + noise).max(0.0);
    Ok(OracleResult {
        sigma: sigma_sq.sqrt(),
        sigma_sq,
        u: out_u,
        condition: if emin > 0.0 {
            emax / emin
        } else {
            f64::INFINITY
        },
        min_eigenvalue: emin / scale,
        unknowns,
        steps: disc.nodes() - 1,
        constraint_residual,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use minimax_core::func::{const_mat, vec_fn};

    fn scalar_problem(a: f64) -> OracleProblem {
        // phi' = f on (0, 1), phi(0) = alpha, observed on [0, 1].
        OracleProblem {
            t0: 0.0,
            t1: 1.0,
            drift: const_mat(DMatrix::zeros(1, 1)),
            input: const_mat(DMatrix::identity(1, 1)),
            left: DMatrix::identity(1, 1),
            right: DMatrix::zeros(1, 1),
            alpha: AlphaPrior::Weighted(DMatrix::identity(1, 1)),
            f_inv: const_mat(DMatrix::identity(1, 1)),
            obs: OracleObservation::Points {
                times: vec![0.5],
                h: DMatrix::identity(1, 1),
                noise_inv: vec![DMatrix::identity(1, 1)],
            },
            target: OracleTarget {
                point: Some((1.0, DVector::from_element(1, a))),
                ..Default::default()
            },
        }
    }

    #[test]
    fn zero_functional_has_zero_error() {
        let r = oracle_minimax(&scalar_problem(0.0), 64).unwrap();
        assert_eq!(r.sigma, 0.0);
        assert!(r.u.iter().all(|(_, u)| u.amax() == 0.0));
    }

    #[test]
    fn single_point_against_closed_form() {
        // phi(1) = alpha + int_0^1 f. With y = phi(1/2) + xi and weight u the
        // error is (1 - u) alpha + (1 - u) int_0^.5 f + int_.5^1 f - u xi, so
        // sigma^2(u) = (1 - u)^2 (1 + 1/2) + 1/2 + u^2, minimized at u = 3/5.
        let r = oracle_minimax(&scalar_problem(1.0), 64).unwrap();
        let u = 0.6;
        let expected = (1.0f64 - u).powi(2) * 1.5 + 0.5 + u * u;
        assert!(
            (r.sigma_sq - expected).abs() < 1e-12,
            "{} vs {expected}",
            r.sigma_sq
        );
        assert!((r.u[0].1[0] - u).abs() < 1e-12);
    }

    #[test]
    fn grid_contains_required_points() {
        let t = oracle_grid(0.0, 1.0, &[0.25, 0.75, 0.5, 0.5], 100).unwrap();
        for p in [0.25, 0.5, 0.75] {
            assert!(node_of(&t, p).is_ok());
        }
        assert_eq!(t.len(), 101);
    }

    #[test]
    fn free_boundary_data_forces_unbiasedness() {
        // With alpha unknown the weight must reproduce it exactly: u = 1.
        let mut pb = scalar_problem(1.0);
        pb.alpha = AlphaPrior::Free;
        let r = oracle_minimax(&pb, 64).unwrap();
        assert!((r.u[0].1[0] - 1.0).abs() < 1e-10);
        assert!((r.sigma_sq - 1.5).abs() < 1e-10);
    }

    #[test]
    fn unobservable_free_data_is_infeasible() {
        let mut pb = scalar_problem(1.0);
        pb.alpha = AlphaPrior::Free;
        pb.obs = OracleObservation::Window {
            h: const_mat(DMatrix::zeros(1, 1)),
            noise_inv: const_mat(DMatrix::identity(1, 1)),
            lo: 0.2,
            hi: 0.4,
        };
        let err = oracle_minimax(&pb, 32).unwrap_err();
        assert_eq!(err.exit_code(), 2);
    }

    #[test]
    fn input_functional_is_estimated() {
        // Estimating int f itself from a point observation of phi(1/2).
        let mut pb = scalar_problem(0.0);
        pb.target = OracleTarget {
            input_density: Some(vec_fn(|_t: f64| DVector::from_element(1, 1.0))),
            ..Default::default()
        };
        let r = oracle_minimax(&pb, 64).unwrap();
        // error = -u alpha + (1 - u) int_0^.5 f + int_.5^1 f - u xi:
        // u^2 + (1 - u)^2 / 2 + 1/2 + u^2, minimized at u = 1/5.
        let u = 0.2;
        let expected = 2.0 * u * u + (1.0f64 - u).powi(2) / 2.0 + 0.5;
        assert!((r.sigma_sq - expected).abs() < 1e-12);
    }

    #[test]
    fn cap_is_enforced() {
        let mut pb = scalar_problem(1.0);
        pb.obs = OracleObservation::Window {
            h: const_mat(DMatrix::identity(1, 1)),
            noise_inv: const_mat(DMatrix::identity(1, 1)),
            lo: 0.0,
            hi: 1.0,
        };
        assert!(matches!(
            oracle_minimax(&pb, 5000),
            Err(HarnessError::TooLarge { .. })
        ));
    }
}
