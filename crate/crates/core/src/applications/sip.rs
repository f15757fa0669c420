//! Semi-infinite constraints `φ_t(x) <= 0` over a finite index grid.

use std::collections::BTreeMap;

use serde::Serialize;

use super::{add_q, dc_gradient, regular_slope, residual};
use crate::calculus::sample_box;
use crate::convex::{min_value, DCPair};
use crate::error::{check_dim, Error, Result};
use crate::geometry::Polytope;
use crate::linalg;
use crate::opt::{Cmp, Expr, Program};

/// Default tolerance defining the numerical active set.
pub const ACTIVE_TOL: f64 = 1e-6;

#[derive(Clone, Debug)]
pub struct SipProblem {
    pub objective: DCPair,
    pub index_points: Vec<f64>,
    pub constraint_funcs: Vec<DCPair>,
    /// Search region, used for the Lipschitz estimate.
    pub region: Option<Polytope>,
}

impl SipProblem {
    pub fn new(objective: DCPair, index_points: Vec<f64>, constraint_funcs: Vec<DCPair>, region: Option<Polytope>) -> Result<Self> {
        if index_points.is_empty() {
            return Err(Error::InvalidInput("index_points must be nonempty".into()));
        }
        check_dim(index_points.len(), constraint_funcs.len())?;
        for f in &constraint_funcs {
            check_dim(objective.dim(), f.dim())?;
            if f.h != objective.h {
                return Err(Error::InvalidInput("every φ_t must share the objective control h".into()));
            }
        }
        Ok(SipProblem { objective, index_points, constraint_funcs, region })
    }

    pub fn max_violation(&self, x: &[f64]) -> f64 {
        self.constraint_funcs.iter().map(|f| f.eval(x)).fold(f64::NEG_INFINITY, f64::max)
    }
}

/// Finitely supported measure on the index grid.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct DiscreteMeasure {
    /// `(position in index_points, weight)`.
    pub weights: Vec<(usize, f64)>,
}

impl DiscreteMeasure {
    pub fn total(&self) -> f64 {
        self.weights.iter().map(|(_, w)| w).sum()
    }

    /// Weights keyed by index value.
    pub fn by_value(&self, points: &[f64]) -> Vec<(f64, f64)> {
        self.weights.iter().map(|(i, w)| (points[*i], *w)).collect()
    }
}

#[derive(Clone, Debug, Serialize)]
#[serde(tag = "kind")]
pub enum SipOutcome {
    Multiplier { measure: DiscreteMeasure, residual: f64, lipschitz_estimate: f64, active: Vec<usize> },
    NoMultiplier { residual: f64, active: Vec<usize> },
    Abstain { reason: String },
}

/// Multiplier `μ >= 0` on the active indices with `-Σ μ_t ∇φ_t(x̄) ∈ ∂̂φ(x̄)`.
pub fn sip_check_local(s: &SipProblem, x: &[f64], active_tol: f64, tol: f64) -> Result<SipOutcome> {
    check_dim(s.objective.dim(), x.len())?;
    let vals: Vec<f64> = s.constraint_funcs.iter().map(|f| f.eval(x)).collect();
    let worst = vals.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if worst > tol.max(active_tol) {
        return Err(Error::InfeasiblePoint(worst));
    }
    let active: Vec<usize> = (0..vals.len()).filter(|&i| vals[i].abs() <= active_tol).collect();
    let grads = active.iter().map(|&i| dc_gradient(&s.constraint_funcs[i], x)).collect::<Result<Vec<_>>>()?;
    let n = x.len();
    let lin = |p: &mut Program, w: &[crate::opt::Var]| -> Vec<Expr> {
        (0..n)
            .map(|k| {
                let mut e = Expr::new();
                for (v, g) in w.iter().zip(&grads) {
                    e.add_term(*v, g[k]);
                }
                let _ = &p;
                e
            })
            .collect()
    };
    if !active.is_empty() {
        let mut p = Program::new();
        let nu = p.vars(active.len(), 0.0, f64::INFINITY);
        let mut sum = Expr::new();
        for v in &nu {
            sum.add_term(*v, 1.0);
        }
        p.constrain_rhs(sum, Cmp::Eq, 1.0);
        let slope = lin(&mut p, &nu);
        let r = residual(&mut p, &slope);
        p.minimize(Expr::var(r));
        let (v, sol) = min_value(&p)?;
        if v.is_finite() && sol[r.0] <= tol {
            return Ok(SipOutcome::Abstain { reason: "QcViolated: a normalized measure on the active set cancels the gradients".into() });
        }
    }
    let solve = |cap: Option<f64>| -> Result<Option<(f64, Vec<f64>)>> {
        let mut p = Program::new();
        let mu = p.vars(active.len(), 0.0, f64::INFINITY);
        let mut slope = regular_slope(&mut p, &s.objective, x)?;
        let extra = lin(&mut p, &mu);
        for (a, b) in slope.iter_mut().zip(&extra) {
            a.add_scaled(b, 1.0);
        }
        add_q(&mut p, None, x, &mut slope)?;
        let r = residual(&mut p, &slope);
        match cap {
            None => p.minimize(Expr::var(r)),
            Some(c) => {
                p.constrain_rhs(Expr::var(r), Cmp::Le, c);
                let mut sum = Expr::new();
                for v in &mu {
                    sum.add_term(*v, 1.0);
                }
                p.minimize(sum);
            }
        }
        let (v, sol) = min_value(&p)?;
        if !v.is_finite() {
            return Ok(None);
        }
        Ok(Some((sol[r.0], mu.iter().map(|v| sol[v.0]).collect())))
    };
    let Some((r, mut w)) = solve(None)? else {
        return Ok(SipOutcome::NoMultiplier { residual: f64::INFINITY, active });
    };
    if r > tol {
        return Ok(SipOutcome::NoMultiplier { residual: r, active });
    }
    if let Some((_, w2)) = solve(Some(r * (1.0 + 1e-9)))? {
        w = w2;
    }
    let weights = active.iter().zip(&w).filter(|(_, v)| **v > 1e-14).map(|(i, v)| (*i, *v)).collect();
    Ok(SipOutcome::Multiplier {
        measure: DiscreteMeasure { weights },
        residual: r,
        lipschitz_estimate: lipschitz_estimate(s, x, 1e-2, 200),
        active,
    })
}

/// Sampled `max_t |∇φ_t|` over the ball of radius `radius` around `x`
/// (forward differences where gradients do not exist).
pub fn lipschitz_estimate(s: &SipProblem, x: &[f64], radius: f64, samples: usize) -> f64 {
    let lo: Vec<f64> = x.iter().map(|v| v - radius).collect();
    let hi: Vec<f64> = x.iter().map(|v| v + radius).collect();
    let mut best: f64 = 0.0;
    for y in sample_box(&lo, &hi, samples, 11) {
        for f in &s.constraint_funcs {
            let g = match dc_gradient(f, &y) {
                Ok(g) => linalg::norm2(&g),
                Err(_) => crate::oracle::fd_gradient(&|z: &[f64]| f.eval(z), &y, 1e-7).map_or(0.0, |g| linalg::norm2(&g)),
            };
            best = best.max(g);
        }
    }
    best
}

/// Multiplier change between two discretizations: the largest weight
/// difference after matching index values (unmatched values count fully).
#[derive(Clone, Debug, Serialize)]
pub struct Stability {
    pub coarse: Vec<(f64, f64)>,
    pub fine: Vec<(f64, f64)>,
    pub max_change: f64,
}

pub fn multiplier_stability(coarse: &SipProblem, fine: &SipProblem, x: &[f64], active_tol: f64, tol: f64) -> Result<Stability> {
    let get = |s: &SipProblem| -> Result<Vec<(f64, f64)>> {
        match sip_check_local(s, x, active_tol, tol)? {
            SipOutcome::Multiplier { measure, .. } => Ok(measure.by_value(&s.index_points)),
            SipOutcome::NoMultiplier { .. } => Err(Error::ValidationFailed("no multiplier at this discretization".into())),
            SipOutcome::Abstain { reason } => Err(Error::QcViolated(reason)),
        }
    };
    let (a, b) = (get(coarse)?, get(fine)?);
    let key = |t: f64| (t * 1e9).round() as i64;
    let mut diff: BTreeMap<i64, f64> = BTreeMap::new();
    for (t, w) in &a {
        *diff.entry(key(*t)).or_default() += w;
    }
    for (t, w) in &b {
        *diff.entry(key(*t)).or_default() -= w;
    }
    let max_change = diff.values().fold(0.0f64, |m, v| m.max(v.abs()));
    Ok(Stability { coarse: a, fine: b, max_change })
}
