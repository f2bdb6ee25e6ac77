//! Scenario files.
//!
//! A scenario is a TOML document. Matrix, vector and scalar functions of time
//! are written either as a constant, as polynomial coefficients in `t`
//! (`{ poly = [c0, c1, ...] }`, each coefficient of the constant's shape), or
//! as a sample table with piecewise-linear interpolation
//! (`{ times = [...], values = [...] }`).

use std::sync::Arc;

use minimax_core::func::{MatFn, ScalarFn, VecFn};
use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{HResult, HarnessError};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Mode {
    Continuous,
    Constrained,
    Elimination,
    Point,
    OrdernFunctional,
    OrdernRhs,
}

impl Mode {
    pub fn name(self) -> &'static str {
        match self {
            Mode::Continuous => "continuous",
            Mode::Constrained => "constrained",
            Mode::Elimination => "elimination",
            Mode::Point => "point",
            Mode::OrdernFunctional => "ordern-functional",
            Mode::OrdernRhs => "ordern-rhs",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum MatrixSpec {
    Constant(Vec<Vec<f64>>),
    Poly {
        poly: Vec<Vec<Vec<f64>>>,
    },
    Samples {
        times: Vec<f64>,
        values: Vec<Vec<Vec<f64>>>,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum VectorSpec {
    Constant(Vec<f64>),
    Poly {
        poly: Vec<Vec<f64>>,
    },
    Samples {
        times: Vec<f64>,
        values: Vec<Vec<f64>>,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum ScalarSpec {
    Constant(f64),
    Poly { poly: Vec<f64> },
    Samples { times: Vec<f64>, values: Vec<f64> },
}

/// Dense matrix from nested rows, checking that it is rectangular.
pub fn matrix(field: &str, rows: &[Vec<f64>]) -> HResult<DMatrix<f64>> {
    if rows.is_empty() || rows[0].is_empty() {
        return Err(HarnessError::config(field, "matrix must be non-empty"));
    }
    let c = rows[0].len();
    if let Some(i) = rows.iter().position(|r| r.len() != c) {
        return Err(HarnessError::config(
            field,
            format!("row {i} has {} entries, expected {c}", rows[i].len()),
        ));
    }
    Ok(DMatrix::from_fn(rows.len(), c, |i, j| rows[i][j]))
}

fn check_times(field: &str, times: &[f64], count: usize) -> HResult<()> {
    if times.len() != count || times.is_empty() {
        return Err(HarnessError::config(
            field,
            "times and values must have the same positive length",
        ));
    }
    if times.windows(2).any(|w| !(w[1] > w[0])) {
        return Err(HarnessError::config(
            field,
            "sample times must be strictly increasing",
        ));
    }
    Ok(())
}

/// Index and fraction of `t` in a sorted table, clamped at both ends.
fn bracket(times: &[f64], t: f64) -> (usize, f64) {
    if times.len() == 1 || t <= times[0] {
        return (0, 0.0);
    }
    let last = times.len() - 1;
    if t >= times[last] {
        return (last - 1, 1.0);
    }
    let i = times.partition_point(|&x| x <= t) - 1;
    (i, (t - times[i]) / (times[i + 1] - times[i]))
}

impl MatrixSpec {
    pub fn build(&self, field: &str) -> HResult<MatFn> {
        match self {
            MatrixSpec::Constant(rows) => {
                let m = matrix(field, rows)?;
                Ok(Arc::new(move |_| m.clone()))
            }
            MatrixSpec::Poly { poly } => {
                let terms = poly
                    .iter()
                    .enumerate()
                    .map(|(k, rows)| matrix(&format!("{field}.poly[{k}]"), rows))
                    .collect::<HResult<Vec<_>>>()?;
                if terms.is_empty() || terms.iter().any(|m| m.shape() != terms[0].shape()) {
                    return Err(HarnessError::config(
                        field,
                        "polynomial coefficients must share one shape",
                    ));
                }
                Ok(minimax_core::func::poly_mat(terms))
            }
            MatrixSpec::Samples { times, values } => {
                check_times(field, times, values.len())?;
                let vals = values
                    .iter()
                    .enumerate()
                    .map(|(k, rows)| matrix(&format!("{field}.values[{k}]"), rows))
                    .collect::<HResult<Vec<_>>>()?;
                if vals.iter().any(|m| m.shape() != vals[0].shape()) {
                    return Err(HarnessError::config(field, "samples must share one shape"));
                }
                Ok(minimax_core::func::interp_mat(times.clone(), vals))
            }
        }
    }

    /// Shape of the evaluated matrix.
    pub fn shape(&self, field: &str) -> HResult<(usize, usize)> {
        Ok(self.build(field)?(0.0).shape())
    }
}

impl VectorSpec {
    pub fn build(&self, field: &str) -> HResult<VecFn> {
        match self {
            VectorSpec::Constant(v) => {
                if v.is_empty() {
                    return Err(HarnessError::config(field, "vector must be non-empty"));
                }
                let v = DVector::from_vec(v.clone());
                Ok(Arc::new(move |_| v.clone()))
            }
            VectorSpec::Poly { poly } => {
                if poly.is_empty()
                    || poly
                        .iter()
                        .any(|c| c.len() != poly[0].len() || c.is_empty())
                {
                    return Err(HarnessError::config(
                        field,
                        "polynomial coefficients must share one length",
                    ));
                }
                let terms: Vec<DVector<f64>> =
                    poly.iter().map(|c| DVector::from_vec(c.clone())).collect();
                Ok(Arc::new(move |t| {
                    let mut acc = terms[terms.len() - 1].clone();
                    for c in terms.iter().rev().skip(1) {
                        acc = acc * t + c;
                    }
                    acc
                }))
            }
            VectorSpec::Samples { times, values } => {
                check_times(field, times, values.len())?;
                if values
                    .iter()
                    .any(|v| v.len() != values[0].len() || v.is_empty())
                {
                    return Err(HarnessError::config(field, "samples must share one length"));
                }
                let (times, values) = (times.clone(), values.clone());
                Ok(Arc::new(move |t| {
                    let (i, w) = bracket(&times, t);
                    let j = (i + 1).min(times.len() - 1);
                    DVector::from_fn(values[0].len(), |r, _| {
                        values[i][r] * (1.0 - w) + values[j][r] * w
                    })
                }))
            }
        }
    }

    pub fn len(&self, field: &str) -> HResult<usize> {
        Ok(self.build(field)?(0.0).len())
    }
}

impl ScalarSpec {
    pub fn build(&self, field: &str) -> HResult<ScalarFn> {
        match self {
            ScalarSpec::Constant(c) => {
                let c = *c;
                Ok(Arc::new(move |_| c))
            }
            ScalarSpec::Poly { poly } => {
                if poly.is_empty() {
                    return Err(HarnessError::config(
                        field,
                        "polynomial needs at least one coefficient",
                    ));
                }
                let p = minimax_core::func::Poly::new(poly.clone());
                Ok(Arc::new(move |t| p.eval(t)))
            }
            ScalarSpec::Samples { times, values } => {
                check_times(field, times, values.len())?;
                let (times, values) = (times.clone(), values.clone());
                Ok(Arc::new(move |t| {
                    let (i, w) = bracket(&times, t);
                    let j = (i + 1).min(times.len() - 1);
                    values[i] * (1.0 - w) + values[j] * w
                }))
            }
        }
    }

    /// Polynomial coefficients when the function is a polynomial or constant.
    pub fn as_poly(&self) -> Option<Vec<f64>> {
        match self {
            ScalarSpec::Constant(c) => Some(vec![*c]),
            ScalarSpec::Poly { poly } => Some(poly.clone()),
            ScalarSpec::Samples { .. } => None,
        }
    }
}

/// First-order system `phi' + A phi = f`, `B0 phi(0) = f0`, `B1 phi(T) = f1`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SystemConfig {
    pub horizon: f64,
    pub a: MatrixSpec,
    pub b0: Vec<Vec<f64>>,
    pub b1: Vec<Vec<f64>>,
}

/// Ellipsoid of admissible data, given through inverse weights. A zero
/// inverse weight marks a datum that is known exactly.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct UncertaintyConfig {
    pub q0_inv: Vec<Vec<f64>>,
    pub q1_inv: Vec<Vec<f64>>,
    pub q2_inv: MatrixSpec,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub f_nom: Option<VectorSpec>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub f0_nom: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub f1_nom: Option<Vec<f64>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum ObservationConfig {
    /// `y = H phi + xi` on `(alpha, beta)` with noise weight `Q(t)`.
    Window {
        h: MatrixSpec,
        q: MatrixSpec,
        alpha: f64,
        beta: f64,
    },
    /// `y_i = phi(t_i) + xi_i` with noise weights `Q_i`.
    Points {
        times: Vec<f64>,
        weights: Vec<Vec<Vec<f64>>>,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TargetConfig {
    pub a: Vec<f64>,
    pub s: f64,
}

/// Second-order system `phi'' = A phi + B f` on `(0, 1)` with
/// `phi'(0) = 0`, `phi(1) = 0` and `int (Q f, f) <= 1`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EliminationConfig {
    pub a: MatrixSpec,
    pub b: MatrixSpec,
    pub q: Vec<Vec<f64>>,
    pub c11: MatrixSpec,
    pub c12: MatrixSpec,
    pub c21: MatrixSpec,
    pub c22: MatrixSpec,
    /// Noise level; the noise energy bound is `int q1^2 |xi|^2 <= 1`.
    pub q1: ScalarSpec,
    pub a1: Vec<f64>,
    pub a2: Vec<f64>,
    pub s: f64,
    /// Restrict weights to those whose adjoint state vanishes at both ends.
    #[serde(default)]
    pub u_optimal: bool,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub variant: Option<VariantConfig>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum VariantConfig {
    Squared,
    Linear,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum OrderNObservationConfig {
    /// `y = h(t) phi(t) + xi` on `[lo, hi]`, noise weight `Q0(t)`.
    Window {
        h: VectorSpec,
        lo: f64,
        hi: f64,
        q0: MatrixSpec,
    },
    /// Gaussian smoothing kernels of the given width centred at `count`
    /// equally spaced nodes; scalar noise weight `q0`.
    Gaussian { width: f64, count: usize, q0: f64 },
}

/// Scalar operator `p0 phi^(n) + ... + pn phi` on `[a, b]` with `m` forms.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OrderNConfig {
    pub a: f64,
    pub b: f64,
    pub coeffs: Vec<ScalarSpec>,
    pub forms: Vec<Vec<f64>>,
    /// Weight `Q(t) > 0` of the right-hand side.
    pub q: ScalarSpec,
    pub q1: Vec<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub f0: Option<ScalarSpec>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub alpha0: Option<Vec<f64>>,
    pub observation: OrderNObservationConfig,
    pub l0: ScalarSpec,
    /// Boundary part of a right-hand-side functional.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub lvec: Option<Vec<f64>>,
}

fn default_nodes() -> usize {
    129
}

fn default_tol() -> f64 {
    1e-6
}

fn default_samples() -> usize {
    10_000
}

fn default_oracle_nodes() -> usize {
    256
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProblemConfig {
    pub mode: Mode,
    #[serde(default)]
    pub seed: u64,
    /// Solver nodes per grid interval.
    #[serde(default = "default_nodes")]
    pub nodes: usize,
    /// Total nodes of the oracle grid.
    #[serde(default = "default_oracle_nodes")]
    pub oracle_nodes: usize,
    #[serde(default = "default_tol")]
    pub tol: f64,
    #[serde(default = "default_samples")]
    pub samples: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub system: Option<SystemConfig>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub uncertainty: Option<UncertaintyConfig>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub observation: Option<ObservationConfig>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub target: Option<TargetConfig>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub elimination: Option<EliminationConfig>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub ordern: Option<OrderNConfig>,
}

impl ProblemConfig {
    pub fn from_toml(text: &str) -> HResult<Self> {
        let cfg: ProblemConfig =
            toml::from_str(text).map_err(|e| HarnessError::Parse(e.to_string()))?;
        cfg.check_sections()?;
        Ok(cfg)
    }

    pub fn load(path: &std::path::Path) -> HResult<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| HarnessError::Parse(format!("{}: {e}", path.display())))?;
        Self::from_toml(&text)
    }

    pub fn to_toml(&self) -> HResult<String> {
        toml::to_string(self).map_err(|e| HarnessError::Parse(e.to_string()))
    }

    fn check_sections(&self) -> HResult<()> {
        let need = |present: bool, name: &str| {
            if present {
                Ok(())
            } else {
                Err(HarnessError::config(
                    name,
                    format!("section is required in {} mode", self.mode.name()),
                ))
            }
        };
        match self.mode {
            Mode::Continuous | Mode::Constrained | Mode::Point => {
                need(self.system.is_some(), "system")?;
                need(self.observation.is_some(), "observation")?;
                need(self.target.is_some(), "target")?;
                need(self.uncertainty.is_some(), "uncertainty")?;
            }
            Mode::Elimination => need(self.elimination.is_some(), "elimination")?,
            Mode::OrdernFunctional | Mode::OrdernRhs => need(self.ordern.is_some(), "ordern")?,
        }
        if self.nodes < 3 {
            return Err(HarnessError::config(
                "nodes",
                "at least three nodes per interval are required",
            ));
        }
        Ok(())
    }
}
