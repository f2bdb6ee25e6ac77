//! Grid functions with two-sided values at breakpoints.

use std::io::Write;

use nalgebra::DVector;

use crate::error::{Error, Result};
use crate::grid::Grid;
use crate::scalar::Real;

/// Which one-sided limit to take at a breakpoint.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Side {
    Left,
    Right,
}

/// Vector-valued function sampled at every node of a [`Grid`].
#[derive(Debug, Clone, PartialEq)]
pub struct PiecewiseTrajectory<T: Real = f64> {
    grid: Grid<T>,
    values: Vec<Vec<DVector<T>>>,
}

impl<T: Real> PiecewiseTrajectory<T> {
    pub fn new(grid: Grid<T>, values: Vec<Vec<DVector<T>>>) -> Result<Self> {
        if values.len() != grid.intervals()
            || values.iter().any(|p| p.len() != grid.nodes_per_interval())
        {
            return Err(Error::GridMismatch(
                "sample layout does not match the grid".into(),
            ));
        }
        let d = values[0][0].len();
        if values.iter().flatten().any(|v| v.len() != d) {
            return Err(Error::GridMismatch(
                "samples have inconsistent dimension".into(),
            ));
        }
        Ok(Self { grid, values })
    }

    /// Samples `f(t)` at every node, taking right limits at the start of each
    /// interval and left limits at its end.
    pub fn sample(grid: &Grid<T>, mut f: impl FnMut(usize, T) -> DVector<T>) -> Self {
        let values = (0..grid.intervals())
            .map(|k| grid.nodes(k).iter().map(|&t| f(k, t)).collect())
            .collect();
        Self {
            grid: grid.clone(),
            values,
        }
    }

    pub fn grid(&self) -> &Grid<T> {
        &self.grid
    }

    pub fn dim(&self) -> usize {
        self.values[0][0].len()
    }

    pub fn piece(&self, k: usize) -> &[DVector<T>] {
        &self.values[k]
    }

    pub fn node(&self, k: usize, j: usize) -> &DVector<T> {
        &self.values[k][j]
    }

    pub fn start(&self) -> &DVector<T> {
        &self.values[0][0]
    }

    pub fn end(&self) -> &DVector<T> {
        self.values
            .last()
            .and_then(|p| p.last())
            .expect("non-empty trajectory")
    }

    /// Limit from the left at breakpoint `b` (must not be the first one).
    pub fn left_limit(&self, b: usize) -> &DVector<T> {
        self.values[b - 1].last().expect("non-empty piece")
    }

    /// Limit from the right at breakpoint `b` (must not be the last one).
    pub fn right_limit(&self, b: usize) -> &DVector<T> {
        &self.values[b][0]
    }

    /// Value at an arbitrary time.
    ///
    /// At a breakpoint the requested one-sided limit is returned (falling
    /// back to the only available side at the ends). Elsewhere the value is
    /// interpolated by a cubic through the four nearest nodes of the piece.
    pub fn at(&self, t: T, side: Side) -> Result<DVector<T>> {
        let last = self.grid.breakpoints().len() - 1;
        if let Some(b) = self.grid.breakpoint_index(t) {
            return Ok(match (b, side) {
                (0, _) => self.start().clone(),
                (b, _) if b == last => self.end().clone(),
                (b, Side::Left) => self.left_limit(b).clone(),
                (b, Side::Right) => self.right_limit(b).clone(),
            });
        }
        let k = self.grid.locate(t)?;
        let nodes = self.grid.nodes(k);
        let n = nodes.len();
        let h = (nodes[n - 1] - nodes[0]) / T::from_count(n - 1);
        let pos = ((t - nodes[0]) / h)
            .floor()
            .to_usize()
            .unwrap_or(0)
            .min(n - 2);
        let lo = pos.saturating_sub(1).min(n - 4);
        let mut out = DVector::zeros(self.dim());
        for i in lo..lo + 4 {
            let mut w = T::one();
            for m in lo..lo + 4 {
                if m != i {
                    w *= (t - nodes[m]) / (nodes[i] - nodes[m]);
                }
            }
            out.axpy(w, &self.values[k][i], T::one());
        }
        Ok(out)
    }

    /// Sub-trajectory made of consecutive components.
    pub fn components(&self, start: usize, len: usize) -> Self {
        self.map(|_, x| x.rows(start, len).into_owned())
    }

    pub fn map(&self, mut f: impl FnMut(T, &DVector<T>) -> DVector<T>) -> Self {
        let values = self
            .values
            .iter()
            .enumerate()
            .map(|(k, p)| {
                p.iter()
                    .zip(self.grid.nodes(k))
                    .map(|(x, &t)| f(t, x))
                    .collect()
            })
            .collect();
        Self {
            grid: self.grid.clone(),
            values,
        }
    }

    /// Simpson integral of a scalar functional of the samples.
    pub fn integrate(&self, mut f: impl FnMut(T, &DVector<T>) -> T) -> T {
        self.grid.integrate(|k, j, t| f(t, &self.values[k][j]))
    }

    /// Largest componentwise difference to another trajectory on the same grid.
    pub fn max_abs_diff(&self, other: &Self) -> Result<T> {
        if self.grid != other.grid || self.dim() != other.dim() {
            return Err(Error::GridMismatch(
                "trajectories live on different grids".into(),
            ));
        }
        let mut m = T::zero();
        for (p, q) in self.values.iter().zip(&other.values) {
            for (x, y) in p.iter().zip(q) {
                m = m.max((x - y).amax());
            }
        }
        Ok(m)
    }

    /// Largest absolute component.
    pub fn sup_norm(&self) -> T {
        self.values
            .iter()
            .flatten()
            .fold(T::zero(), |m, x| m.max(x.amax()))
    }

    /// Writes `t,side,<labels...>` rows; `side` is `R` at the first node of a
    /// piece, `L` at the last and empty elsewhere.
    pub fn write_csv<W: Write>(&self, out: W, labels: &[String]) -> Result<()> {
        if labels.len() != self.dim() {
            return Err(Error::ArityMismatch {
                expected: self.dim(),
                got: labels.len(),
            });
        }
        let io = |e: csv::Error| Error::InvalidInput(format!("csv output failed: {e}"));
        let mut w = csv::Writer::from_writer(out);
        let mut header = vec!["t".to_string(), "side".to_string()];
        header.extend(labels.iter().cloned());
        w.write_record(&header).map_err(io)?;
        for (k, p) in self.values.iter().enumerate() {
            let last = p.len() - 1;
            for (j, x) in p.iter().enumerate() {
                let side = if j == 0 {
                    "R"
                } else if j == last {
                    "L"
                } else {
                    ""
                };
                let mut rec = vec![
                    format!("{:.17e}", self.grid.nodes(k)[j].as_f64()),
                    side.to_string(),
                ];
                rec.extend(x.iter().map(|v| format!("{:.17e}", v.as_f64())));
                w.write_record(&rec).map_err(io)?;
            }
        }
        w.flush()
            .map_err(|e| Error::InvalidInput(format!("csv output failed: {e}")))?;
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn traj() -> PiecewiseTrajectory {
        let g = Grid::new(vec![0.0, 1.0, 2.0], 9).unwrap();
        PiecewiseTrajectory::sample(&g, |k, t| DVector::from_vec(vec![t * t, k as f64]))
    }

    #[test]
    fn one_sided_limits() {
        let tr = traj();
        assert_eq!(tr.left_limit(1)[1], 0.0);
        assert_eq!(tr.right_limit(1)[1], 1.0);
        assert_eq!(tr.at(1.0, Side::Left).unwrap()[1], 0.0);
        assert_eq!(tr.at(1.0, Side::Right).unwrap()[1], 1.0);
    }

    #[test]
    fn cubic_interpolation_reproduces_quadratics() {
        let tr = traj();
        let v = tr.at(1.37, Side::Left).unwrap();
        assert!((v[0] - 1.37f64.powi(2)).abs() < 1e-13);
    }

    #[test]
    fn csv_output_is_stable() {
        let tr = traj();
        let mut a = Vec::new();
        let mut b = Vec::new();
        tr.write_csv(&mut a, &["x".into(), "k".into()]).unwrap();
        tr.write_csv(&mut b, &["x".into(), "k".into()]).unwrap();
        assert_eq!(a, b);
        let text = String::from_utf8(a).unwrap();
        assert!(text.starts_with("t,side,x,k"));
        assert_eq!(text.lines().count(), 19);
    }

    #[test]
    fn mismatched_layout_is_rejected() {
        let g = Grid::new(vec![0.0, 1.0], 3).unwrap();
        assert!(PiecewiseTrajectory::new(g, vec![vec![DVector::zeros(1); 5]]).is_err());
    }
}
