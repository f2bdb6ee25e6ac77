//! Observation operators mapping `L^2(a, b)` into the observation space.
//!
//! Two realizations are provided. A window observation multiplies the
//! solution by `h(t)` on `[lo, hi]` and lives in `L^2(lo, hi)^k`. A kernel
//! observation integrates the solution against kernels `K_i(xi_k, t)` at a
//! finite set of nodes `xi_k` with quadrature weights `w_k`, so its space is
//! `R^{N K}` with the weighted product `sum_k w_k (u_k, v_k)`. Vectors of that
//! space are stored node-major: entry `k N + i`.

use std::sync::Arc;

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::func::{MatFn, ScalarFn, VecFn};
use crate::grid::Grid;
use crate::linalg::{rank, spd_inverse};
use crate::scalar::Real;

/// Kernel `K(xi, t)` of an integral observation.
pub type Kernel<T = f64> = Arc<dyn Fn(T, T) -> T + Send + Sync>;

#[derive(Clone)]
pub struct WindowObservation<T: Real = f64> {
    pub h: VecFn<T>,
    pub lo: T,
    pub hi: T,
    /// Noise weight `Q_0(t)`, `k x k` and positive definite.
    pub q0: MatFn<T>,
}

#[derive(Clone)]
pub struct KernelObservation<T: Real = f64> {
    pub kernels: Vec<Kernel<T>>,
    pub nodes: Vec<T>,
    pub weights: Vec<T>,
    /// Noise weight at every node, `N x N` and positive definite.
    pub q0: Vec<DMatrix<T>>,
}

/// Observation operator `C` with its noise weight.
#[derive(Clone)]
pub enum ObsOperator<T: Real = f64> {
    Window(WindowObservation<T>),
    Kernel(KernelObservation<T>),
}

/// Element of the observation space: observed data or estimator weights.
#[derive(Clone)]
pub enum ObsData<T: Real = f64> {
    Function(VecFn<T>),
    Samples(DVector<T>),
}

impl<T: Real> KernelObservation<T> {
    /// Kernel observation at `count` uniform nodes of `[a, b]` with
    /// trapezoid weights.
    pub fn uniform(
        kernels: Vec<Kernel<T>>,
        a: T,
        b: T,
        count: usize,
        q0: DMatrix<T>,
    ) -> Result<Self> {
        if count < 2 {
            return Err(Error::InvalidInput(
                "a kernel observation needs two or more nodes".into(),
            ));
        }
        let h = (b - a) / T::from_count(count - 1);
        let nodes = (0..count).map(|i| a + h * T::from_count(i)).collect();
        let weights = (0..count)
            .map(|i| {
                if i == 0 || i == count - 1 {
                    h / T::lit(2.0)
                } else {
                    h
                }
            })
            .collect();
        Ok(Self {
            kernels,
            nodes,
            weights,
            q0: vec![q0; count],
        })
    }

    pub fn channels(&self) -> usize {
        self.kernels.len()
    }

    pub fn len(&self) -> usize {
        self.nodes.len() * self.kernels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// `sum_k w_k sum_ij K_i(xi_k, t) Q0_k[i, j] K_j(xi_k, s)`, the kernel of
    /// `C^* J Q_0 C`.
    pub fn composite_kernel(&self, t: T, s: T) -> T {
        let nc = self.channels();
        let mut acc = T::zero();
        for (k, &xi) in self.nodes.iter().enumerate() {
            let kt = DVector::from_iterator(nc, self.kernels.iter().map(|kk| kk(xi, t)));
            let ks = DVector::from_iterator(nc, self.kernels.iter().map(|kk| kk(xi, s)));
            acc += self.weights[k] * kt.dot(&(&self.q0[k] * ks));
        }
        acc
    }
}

impl<T: Real> ObsOperator<T> {
    /// Dimension of the data at one instant (window) or of the whole sample
    /// vector (kernel).
    pub fn width(&self) -> usize {
        match self {
            ObsOperator::Window(w) => (w.h)(w.lo).len(),
            ObsOperator::Kernel(k) => k.len(),
        }
    }

    pub fn validate(&self, a: T, b: T) -> Result<()> {
        match self {
            ObsOperator::Window(w) => {
                if !(w.lo >= a && w.hi <= b && w.hi > w.lo) {
                    return Err(Error::InvalidInput(
                        "the observation window must lie inside [a, b]".into(),
                    ));
                }
                let q = (w.q0)(w.lo);
                if q.nrows() != self.width() || q.ncols() != self.width() {
                    return Err(Error::ArityMismatch {
                        expected: self.width(),
                        got: q.nrows(),
                    });
                }
                spd_inverse(&q).map(|_| ())
            }
            ObsOperator::Kernel(k) => {
                if k.kernels.is_empty()
                    || k.nodes.len() != k.weights.len()
                    || k.q0.len() != k.nodes.len()
                {
                    return Err(Error::InvalidInput(
                        "kernel nodes, weights and noise weights must align".into(),
                    ));
                }
                for q in &k.q0 {
                    if q.nrows() != k.channels() {
                        return Err(Error::ArityMismatch {
                            expected: k.channels(),
                            got: q.nrows(),
                        });
                    }
                    spd_inverse(q)?;
                }
                Ok(())
            }
        }
    }

    /// Breakpoints the solver grid must contain.
    pub fn breakpoints(&self) -> Vec<T> {
        match self {
            ObsOperator::Window(w) => vec![w.lo, w.hi],
            ObsOperator::Kernel(_) => Vec::new(),
        }
    }

    /// `C v` for a function `v`; window data are evaluated lazily.
    pub fn apply(&self, v: ScalarFn<T>, grid: &Grid<T>) -> ObsData<T> {
        match self {
            ObsOperator::Window(w) => {
                let (h, lo, hi) = (w.h.clone(), w.lo, w.hi);
                ObsData::Function(Arc::new(move |t| {
                    if t >= lo && t <= hi {
                        h(t) * v(t)
                    } else {
                        h(t) * T::zero()
                    }
                }))
            }
            ObsOperator::Kernel(k) => {
                let nc = k.channels();
                let mut out = DVector::zeros(k.len());
                for (kk, &xi) in k.nodes.iter().enumerate() {
                    for (i, ker) in k.kernels.iter().enumerate() {
                        out[kk * nc + i] = grid.integrate(|_, _, t| ker(xi, t) * v(t));
                    }
                }
                ObsData::Samples(out)
            }
        }
    }

    /// `(C^* J w)(t)`.
    pub fn adjoint_apply(&self, w: &ObsData<T>) -> Result<ScalarFn<T>> {
        match (self, w) {
            (ObsOperator::Window(o), ObsData::Function(f)) => {
                let (h, lo, hi, f) = (o.h.clone(), o.lo, o.hi, f.clone());
                Ok(Arc::new(move |t| {
                    if t >= lo && t <= hi {
                        h(t).dot(&f(t))
                    } else {
                        T::zero()
                    }
                }))
            }
            (ObsOperator::Kernel(k), ObsData::Samples(v)) => {
                if v.len() != k.len() {
                    return Err(Error::ArityMismatch {
                        expected: k.len(),
                        got: v.len(),
                    });
                }
                let (k, v) = (k.clone(), v.clone());
                let nc = k.channels();
                Ok(Arc::new(move |t| {
                    let mut acc = T::zero();
                    for (kk, &xi) in k.nodes.iter().enumerate() {
                        for (i, ker) in k.kernels.iter().enumerate() {
                            acc += k.weights[kk] * ker(xi, t) * v[kk * nc + i];
                        }
                    }
                    acc
                }))
            }
            _ => Err(Error::InvalidInput(
                "observation data do not match the operator kind".into(),
            )),
        }
    }

    /// `Q_0 w`.
    pub fn weight(&self, w: &ObsData<T>) -> Result<ObsData<T>> {
        match (self, w) {
            (ObsOperator::Window(o), ObsData::Function(f)) => {
                let (q, f) = (o.q0.clone(), f.clone());
                Ok(ObsData::Function(Arc::new(move |t| q(t) * f(t))))
            }
            (ObsOperator::Kernel(k), ObsData::Samples(v)) => {
                let nc = k.channels();
                let mut out = v.clone();
                for (kk, q) in k.q0.iter().enumerate() {
                    out.rows_mut(kk * nc, nc)
                        .copy_from(&(q * v.rows(kk * nc, nc)));
                }
                Ok(ObsData::Samples(out))
            }
            _ => Err(Error::InvalidInput(
                "observation data do not match the operator kind".into(),
            )),
        }
    }

    /// Inner product of the observation space; window products use Simpson
    /// on the window intervals of `grid`.
    pub fn inner(&self, u: &ObsData<T>, v: &ObsData<T>, grid: &Grid<T>) -> Result<T> {
        match (self, u, v) {
            (ObsOperator::Window(o), ObsData::Function(f), ObsData::Function(g)) => {
                Ok(window_integral(grid, o.lo, o.hi, |t| f(t).dot(&g(t))))
            }
            (ObsOperator::Kernel(k), ObsData::Samples(x), ObsData::Samples(y)) => {
                let nc = k.channels();
                Ok((0..k.nodes.len())
                    .map(|kk| k.weights[kk] * x.rows(kk * nc, nc).dot(&y.rows(kk * nc, nc)))
                    .fold(T::zero(), |a, b| a + b))
            }
            _ => Err(Error::InvalidInput(
                "observation data do not match the operator kind".into(),
            )),
        }
    }

    /// `(Q_0^{-1} u, u)`.
    pub fn noise_energy(&self, u: &ObsData<T>, grid: &Grid<T>) -> Result<T> {
        match (self, u) {
            (ObsOperator::Window(o), ObsData::Function(f)) => {
                let q = o.q0.clone();
                let mut fail = None;
                let e = window_integral(grid, o.lo, o.hi, |t| {
                    let ft = f(t);
                    match spd_inverse(&q(t)) {
                        Ok(qi) => ft.dot(&(qi * &ft)),
                        Err(e) => {
                            fail = Some(e);
                            T::zero()
                        }
                    }
                });
                fail.map_or(Ok(e), Err)
            }
            (ObsOperator::Kernel(k), ObsData::Samples(x)) => {
                let nc = k.channels();
                let mut acc = T::zero();
                for (kk, q) in k.q0.iter().enumerate() {
                    let xi = x.rows(kk * nc, nc);
                    acc += k.weights[kk] * xi.dot(&(spd_inverse(q)? * xi));
                }
                Ok(acc)
            }
            _ => Err(Error::InvalidInput(
                "observation data do not match the operator kind".into(),
            )),
        }
    }

    /// Checks that `C` is injective on the span of the given functions by
    /// the rank of their Gram matrix in the observation space.
    pub fn check_injective(&self, basis: &[ScalarFn<T>], grid: &Grid<T>) -> Result<()> {
        if basis.is_empty() {
            return Ok(());
        }
        if let ObsOperator::Kernel(k) = self {
            if k.len() <= basis.len() {
                return Err(Error::InjectivityFailure);
            }
        }
        let images: Vec<ObsData<T>> = basis.iter().map(|f| self.apply(f.clone(), grid)).collect();
        let d = basis.len();
        let mut gram = DMatrix::zeros(d, d);
        for i in 0..d {
            for j in 0..d {
                gram[(i, j)] = self.inner(&images[i], &images[j], grid)?;
            }
        }
        let scale = basis
            .iter()
            .map(|f| grid.integrate(|_, _, t| f(t) * f(t)))
            .fold(T::zero(), |m, x| m.max(x));
        if gram.amax() <= T::lit(1e-12) * scale || rank(&gram, T::lit(1e-10)) < d {
            return Err(Error::InjectivityFailure);
        }
        Ok(())
    }
}

/// Simpson integral over the grid intervals inside `[lo, hi]`.
pub(crate) fn window_integral<T: Real>(
    grid: &Grid<T>,
    lo: T,
    hi: T,
    mut f: impl FnMut(T) -> T,
) -> T {
    let mut acc = T::zero();
    for k in 0..grid.intervals() {
        let nodes = grid.nodes(k);
        if nodes[0] >= lo && nodes[nodes.len() - 1] <= hi {
            for (j, w) in grid.weights(k).into_iter().enumerate() {
                acc += w * f(nodes[j]);
            }
        }
    }
    acc
}
