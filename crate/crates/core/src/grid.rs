//! Piecewise-uniform time grids and Simpson quadrature.

use crate::error::{Error, Result};
use crate::scalar::Real;

/// Default number of nodes per grid interval.
pub const DEFAULT_NODES: usize = 129;

/// Grid made of consecutive intervals, each carrying the same odd number of
/// uniformly spaced nodes. Interval end points are shared by neighbours but
/// stored twice, so quantities may take different values on either side.
#[derive(Debug, Clone, PartialEq)]
pub struct Grid<T: Real = f64> {
    breaks: Vec<T>,
    nodes: Vec<Vec<T>>,
}

impl<T: Real> Grid<T> {
    pub fn new(breaks: Vec<T>, nodes_per_interval: usize) -> Result<Self> {
        if breaks.len() < 2 {
            return Err(Error::InvalidInput(
                "a grid needs at least two breakpoints".into(),
            ));
        }
        if nodes_per_interval < 3 || nodes_per_interval % 2 == 0 {
            return Err(Error::InvalidInput(format!(
                "nodes per interval must be odd and at least 3, got {nodes_per_interval}"
            )));
        }
        if breaks.windows(2).any(|w| !(w[1] > w[0])) {
            return Err(Error::InvalidInput(
                "breakpoints must be strictly increasing".into(),
            ));
        }
        let last = nodes_per_interval - 1;
        let nodes = breaks
            .windows(2)
            .map(|w| {
                let h = (w[1] - w[0]) / T::from_count(last);
                (0..nodes_per_interval)
                    .map(|j| {
                        if j == last {
                            w[1]
                        } else {
                            w[0] + h * T::from_count(j)
                        }
                    })
                    .collect()
            })
            .collect();
        Ok(Self { breaks, nodes })
    }

    /// Grid on `[t0, t1]` whose breakpoints include the given interior points.
    ///
    /// Points equal to an end point or to each other are merged; points outside
    /// the closed interval are rejected.
    pub fn with_points(t0: T, t1: T, interior: &[T], nodes_per_interval: usize) -> Result<Self> {
        Self::new(merge_breakpoints(t0, t1, interior)?, nodes_per_interval)
    }

    pub fn breakpoints(&self) -> &[T] {
        &self.breaks
    }

    pub fn intervals(&self) -> usize {
        self.nodes.len()
    }

    pub fn nodes(&self, k: usize) -> &[T] {
        &self.nodes[k]
    }

    pub fn nodes_per_interval(&self) -> usize {
        self.nodes[0].len()
    }

    pub fn start(&self) -> T {
        self.breaks[0]
    }

    pub fn end(&self) -> T {
        self.breaks[self.breaks.len() - 1]
    }

    fn snap_tol(&self) -> T {
        (self.end() - self.start()) * T::lit(1e-12)
    }

    /// Index of the breakpoint equal to `t` up to a relative `1e-12`.
    pub fn breakpoint_index(&self, t: T) -> Option<usize> {
        let tol = self.snap_tol();
        self.breaks.iter().position(|&b| (b - t).abs() <= tol)
    }

    /// Like [`Grid::breakpoint_index`] but failing with a grid error.
    pub fn require_breakpoint(&self, t: T) -> Result<usize> {
        self.breakpoint_index(t)
            .ok_or_else(|| Error::GridMismatch(format!("{} is not a breakpoint", t.as_f64())))
    }

    /// Interval containing `t`; the right end belongs to the last interval.
    pub fn locate(&self, t: T) -> Result<usize> {
        let tol = self.snap_tol();
        if t < self.start() - tol || t > self.end() + tol {
            return Err(Error::GridMismatch(format!(
                "{} lies outside the grid",
                t.as_f64()
            )));
        }
        let k = self.breaks.partition_point(|&b| b <= t);
        Ok(k.clamp(1, self.intervals()) - 1)
    }

    /// Simpson weights for the nodes of interval `k`.
    pub fn weights(&self, k: usize) -> Vec<T> {
        simpson_weights(&self.nodes[k])
    }

    /// Simpson rule applied to `f(k, j, t)` over all intervals.
    pub fn integrate(&self, mut f: impl FnMut(usize, usize, T) -> T) -> T {
        let mut acc = T::zero();
        for k in 0..self.intervals() {
            for (j, (w, &t)) in self.weights(k).iter().zip(&self.nodes[k]).enumerate() {
                acc += *w * f(k, j, t);
            }
        }
        acc
    }

    /// Simpson rule over the intervals `ks` only.
    pub fn integrate_over(
        &self,
        ks: std::ops::Range<usize>,
        mut f: impl FnMut(usize, usize, T) -> T,
    ) -> T {
        let mut acc = T::zero();
        for k in ks {
            for (j, (w, &t)) in self.weights(k).iter().zip(&self.nodes[k]).enumerate() {
                acc += *w * f(k, j, t);
            }
        }
        acc
    }

    /// Same breakpoints with a different node count.
    pub fn refined(&self, nodes_per_interval: usize) -> Result<Self> {
        Self::new(self.breaks.clone(), nodes_per_interval)
    }
}

/// Sorted, de-duplicated breakpoint list for `[t0, t1]` with interior points.
pub fn merge_breakpoints<T: Real>(t0: T, t1: T, interior: &[T]) -> Result<Vec<T>> {
    if !(t1 > t0) {
        return Err(Error::InvalidInput("empty time interval".into()));
    }
    let tol = (t1 - t0) * T::lit(1e-12);
    let mut pts = vec![t0, t1];
    for &p in interior {
        if p < t0 - tol || p > t1 + tol {
            return Err(Error::InvalidInput(format!(
                "point {} outside [{}, {}]",
                p.as_f64(),
                t0.as_f64(),
                t1.as_f64()
            )));
        }
        if pts.iter().all(|&q| (q - p).abs() > tol) {
            pts.push(p);
        }
    }
    pts.sort_by(|a, b| a.partial_cmp(b).expect("finite breakpoints"));
    Ok(pts)
}

/// Composite Simpson weights for an odd number of uniformly spaced nodes.
pub fn simpson_weights<T: Real>(nodes: &[T]) -> Vec<T> {
    let n = nodes.len();
    assert!(n >= 3 && n % 2 == 1, "Simpson rule needs an odd node count");
    let h = (nodes[n - 1] - nodes[0]) / T::from_count(n - 1);
    let third = h / T::lit(3.0);
    (0..n)
        .map(|j| {
            if j == 0 || j == n - 1 {
                third
            } else if j % 2 == 1 {
                third * T::lit(4.0)
            } else {
                third * T::lit(2.0)
            }
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn simpson_integrates_sine() {
        let g = Grid::<f64>::new(vec![0.0, std::f64::consts::PI], 129).unwrap();
        let v = g.integrate(|_, _, t| t.sin());
        assert!((v - 2.0).abs() < 1e-8);
    }

    #[test]
    fn simpson_is_exact_for_cubics() {
        let g = Grid::<f64>::new(vec![0.0, 0.3, 1.0], 3).unwrap();
        let v = g.integrate(|_, _, t| t * t * t - t);
        assert!((v - (0.25 - 0.5)).abs() < 1e-15);
    }

    #[test]
    fn breakpoints_are_merged_and_sorted() {
        let b = merge_breakpoints(0.0, 1.0, &[0.5, 0.0, 0.25, 0.5]).unwrap();
        assert_eq!(b, vec![0.0, 0.25, 0.5, 1.0]);
        assert!(merge_breakpoints(0.0, 1.0, &[1.5]).is_err());
    }

    #[test]
    fn location_and_lookup() {
        let g = Grid::new(vec![0.0, 0.5, 2.0], 5).unwrap();
        assert_eq!(g.locate(0.2).unwrap(), 0);
        assert_eq!(g.locate(0.5).unwrap(), 1);
        assert_eq!(g.locate(2.0).unwrap(), 1);
        assert_eq!(g.breakpoint_index(0.5), Some(1));
        assert!(g.locate(3.0).is_err());
        assert_eq!(g.nodes(1)[4], 2.0);
    }

    #[test]
    fn even_node_counts_are_rejected() {
        assert!(Grid::new(vec![0.0, 1.0], 64).is_err());
    }
}
