//! Brute-force ground truth: grid minimization, the ε-subgradient inequality
//! on samples, and finite differences. Nothing here calls the analytic
//! calculus.

use rayon::prelude::*;
use serde::Serialize;

use crate::certificates::Problem;
use crate::error::{check_dim, Error, Result};
use crate::geometry::Polytope;
use crate::linalg;

/// Largest number of grid points.
pub const MAX_GRID: u128 = 10_000_000;

#[derive(Clone, Debug)]
pub struct GridSpec {
    pub lo: Vec<f64>,
    pub hi: Vec<f64>,
    pub points_per_dim: usize,
}

impl GridSpec {
    pub fn new(lo: Vec<f64>, hi: Vec<f64>, points_per_dim: usize) -> Result<Self> {
        check_dim(lo.len(), hi.len())?;
        if points_per_dim < 2 {
            return Err(Error::InvalidInput("points_per_dim must be at least 2".into()));
        }
        if lo.iter().zip(&hi).any(|(a, b)| !(a <= b)) {
            return Err(Error::InvalidInput("grid box has lo > hi".into()));
        }
        let total = (points_per_dim as u128).checked_pow(lo.len() as u32).unwrap_or(u128::MAX);
        if total > MAX_GRID {
            return Err(Error::TooLarge(total));
        }
        Ok(GridSpec { lo, hi, points_per_dim })
    }

    /// Axis-aligned bounding box of a polytope.
    pub fn from_polytope(p: &Polytope, points_per_dim: usize) -> Result<Self> {
        let n = p.dim();
        let mut lo = Vec::new();
        let mut hi = Vec::new();
        for i in 0..n {
            let e = linalg::unit(n, i);
            hi.push(p.support(&e)?);
            lo.push(-p.support(&linalg::scale(&e, -1.0))?);
        }
        GridSpec::new(lo, hi, points_per_dim)
    }

    pub fn len(&self) -> usize {
        self.points_per_dim.pow(self.lo.len() as u32)
    }

    pub fn is_empty(&self) -> bool {
        self.lo.is_empty()
    }

    pub fn point(&self, mut idx: usize) -> Vec<f64> {
        let k = self.points_per_dim;
        let mut x = Vec::with_capacity(self.lo.len());
        for i in 0..self.lo.len() {
            let j = idx % k;
            idx /= k;
            x.push(self.lo[i] + (self.hi[i] - self.lo[i]) * j as f64 / (k - 1) as f64);
        }
        x
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct BruteMin {
    pub x_min: Vec<f64>,
    pub value: f64,
    pub feasible_count: usize,
}

/// Exhaustive minimization of any objective over the feasible grid points.
pub fn brute_min_with(
    g: &GridSpec,
    objective: &(dyn Fn(&[f64]) -> f64 + Sync),
    feasible: &(dyn Fn(&[f64]) -> bool + Sync),
) -> Result<BruteMin> {
    let best = (0..g.len())
        .into_par_iter()
        .filter_map(|i| {
            let x = g.point(i);
            if !feasible(&x) {
                return None;
            }
            let v = objective(&x);
            v.is_finite().then_some((v, i))
        })
        .map(|(v, i)| (v, i, 1usize))
        .reduce_with(|a, b| {
            let count = a.2 + b.2;
            if b.0 < a.0 || (b.0 == a.0 && b.1 < a.1) {
                (b.0, b.1, count)
            } else {
                (a.0, a.1, count)
            }
        });
    match best {
        Some((value, i, feasible_count)) => Ok(BruteMin { x_min: g.point(i), value, feasible_count }),
        None => Err(Error::NoFeasiblePoint),
    }
}

/// Grid minimum of the problem objective among points with constraint
/// residual at most `tol`.
pub fn brute_min(p: &Problem, g: &GridSpec, tol: f64) -> Result<BruteMin> {
    check_dim(p.dim(), g.lo.len())?;
    brute_min_with(g, &|x| p.objective_value(x), &|x| p.is_feasible(x, tol))
}

/// Points of the grid with value within `gap` of the minimum.
pub fn brute_argmin_set(
    g: &GridSpec,
    objective: &(dyn Fn(&[f64]) -> f64 + Sync),
    feasible: &(dyn Fn(&[f64]) -> bool + Sync),
    gap: f64,
) -> Result<Vec<usize>> {
    let best = brute_min_with(g, objective, feasible)?.value;
    Ok((0..g.len())
        .into_par_iter()
        .filter(|&i| {
            let x = g.point(i);
            feasible(&x) && objective(&x) <= best + gap
        })
        .collect())
}

/// Sample-based test of `<s, y - x> <= f(y) - f(x) + ε`; `false` means
/// refuted at some sample.
pub fn subdiff_definition_check(f: &dyn Fn(&[f64]) -> f64, x: &[f64], s: &[f64], eps: f64, samples: &[Vec<f64>], tol: f64) -> bool {
    let fx = f(x);
    samples.iter().all(|y| {
        let fy = f(y);
        if !fy.is_finite() {
            return true;
        }
        let lhs: f64 = s.iter().zip(y.iter().zip(x)).map(|(si, (yi, xi))| si * (yi - xi)).sum();
        lhs <= fy - fx + eps + tol
    })
}

/// Samples for [`subdiff_definition_check`]: a uniform grid on `[x - r, x + r]`
/// plus points close to `x`.
pub fn definition_samples(x: &[f64], r: f64, per_axis: usize) -> Vec<Vec<f64>> {
    let lo: Vec<f64> = x.iter().map(|v| v - r).collect();
    let hi: Vec<f64> = x.iter().map(|v| v + r).collect();
    let mut out = GridSpec { lo, hi, points_per_dim: per_axis.max(2) };
    let mut pts: Vec<Vec<f64>> = (0..out.len()).map(|i| out.point(i)).collect();
    for scale in [1e-2, 1e-4] {
        out.lo = x.iter().map(|v| v - scale).collect();
        out.hi = x.iter().map(|v| v + scale).collect();
        out.points_per_dim = 5;
        pts.extend((0..out.len()).map(|i| out.point(i)));
    }
    pts
}

/// Central differences; fails when a step leaves the domain.
pub fn fd_gradient(f: &dyn Fn(&[f64]) -> f64, x: &[f64], step: f64) -> Result<Vec<f64>> {
    let mut g = Vec::with_capacity(x.len());
    let mut y = x.to_vec();
    for i in 0..x.len() {
        y[i] = x[i] + step;
        let fp = f(&y);
        y[i] = x[i] - step;
        let fm = f(&y);
        y[i] = x[i];
        if !fp.is_finite() || !fm.is_finite() {
            return Err(Error::DomainBoundary);
        }
        g.push((fp - fm) / (2.0 * step));
    }
    Ok(g)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::calculus::VectorMap;
    use crate::certificates::Constraint;
    use crate::convex::{ConvexFunc, DCPair};

    fn set_problem(lo: f64, hi: f64) -> Problem {
        let map = VectorMap::affine(vec![vec![1.0]], vec![0.0]).unwrap();
        let obj = DCPair::new(ConvexFunc::abs(), ConvexFunc::zero(1)).unwrap();
        Problem::new(obj, Constraint::Set { phi: map, c: Polytope::interval(lo, hi), z0: vec![0.5 * (lo + hi)] }, None).unwrap()
    }

    #[test]
    fn brute_examples() {
        let r = brute_min(&set_problem(1.0, 3.0), &GridSpec::new(vec![0.0], vec![4.0], 1001).unwrap(), 1e-9).unwrap();
        assert!((r.x_min[0] - 1.0).abs() < 1e-12 && (r.value - 1.0).abs() < 1e-12);
        let sq = |x: &[f64]| x[0] * x[0];
        let r = brute_min_with(&GridSpec::new(vec![-1.0], vec![1.0], 101).unwrap(), &sq, &|_| true).unwrap();
        assert!(r.x_min[0].abs() < 1e-12 && r.value == 0.0);
        let e = brute_min(&set_problem(5.0, 6.0), &GridSpec::new(vec![0.0], vec![1.0], 11).unwrap(), 1e-9);
        assert_eq!(e.unwrap_err(), Error::NoFeasiblePoint);
        assert!(matches!(GridSpec::new(vec![0.0; 8], vec![1.0; 8], 100), Err(Error::TooLarge(_))));
    }

    #[test]
    fn definition_examples() {
        let abs = |x: &[f64]| x[0].abs();
        let s = definition_samples(&[0.0], 2.0, 41);
        assert!(subdiff_definition_check(&abs, &[0.0], &[0.5], 0.0, &s, 1e-12));
        assert!(!subdiff_definition_check(&abs, &[0.0], &[1.5], 0.0, &s, 1e-12));
        let dc = |x: &[f64]| x[0] * x[0] - x[0].abs();
        assert!(!subdiff_definition_check(&dc, &[0.0], &[0.0], 0.0, &s, 1e-12));
    }

    #[test]
    fn fd_examples() {
        let g = fd_gradient(&|x: &[f64]| x[0] * x[0], &[1.0], 1e-5).unwrap();
        assert!((g[0] - 2.0).abs() < 1e-9);
        let g = fd_gradient(&|x: &[f64]| x[0].abs(), &[1.0], 1e-5).unwrap();
        assert!((g[0] - 1.0).abs() < 1e-9);
        let ind = |x: &[f64]| if x[0] >= 0.0 { x[0] } else { f64::INFINITY };
        assert_eq!(fd_gradient(&ind, &[0.0], 1e-5).unwrap_err(), Error::DomainBoundary);
    }
}
