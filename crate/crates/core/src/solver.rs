//! A DCA-type local solver on the improvement-function reformulation.
//!
//! A feasible iterate takes a convex-concave step: `-h` is linearized in the
//! objective and in every constraint branch, which keeps the next iterate
//! feasible. An infeasible iterate minimizes the convex majorant of
//! `max{φ - α, f}` with `α` the best feasible value seen (or only of `f`
//! before any feasible point).

use rayon::prelude::*;
use serde::Serialize;

use crate::calculus::{pad_to, subdiff_vertices};
use crate::certificates::Problem;
use crate::convex::{Catalog, Coeffs};
use crate::error::{check_dim, Error, Result};
use crate::geometry::HRep;
use crate::linalg::{self, dot};
use crate::opt::{Cmp, Expr, Outcome, Program, Var};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub enum SolveStatus {
    Converged,
    MaxIter,
    Stalled,
}

#[derive(Clone, Debug, Serialize)]
pub struct Iterate {
    pub x: Vec<f64>,
    pub merit: f64,
    pub objective: f64,
    pub feasible: bool,
}

#[derive(Clone, Debug, Serialize)]
pub struct SolveTrace {
    pub iterates: Vec<Iterate>,
    pub status: SolveStatus,
    pub final_point: Vec<f64>,
}

impl SolveTrace {
    /// CSV rows `iter,merit,objective,x...` with a header.
    pub fn to_csv(&self) -> String {
        let n = self.final_point.len();
        let mut out = String::from("iter,merit,objective");
        for i in 0..n {
            out.push_str(&format!(",x{i}"));
        }
        out.push('\n');
        for (k, it) in self.iterates.iter().enumerate() {
            // `+ 0.0` folds -0 into 0
            out.push_str(&format!("{k},{},{}", it.merit + 0.0, it.objective + 0.0));
            for v in &it.x {
                out.push_str(&format!(",{}", v + 0.0));
            }
            out.push('\n');
        }
        out
    }
}

/// Adds `E >= c(x)` for convex catalog coefficients and returns `E`.
pub(crate) fn add_epigraph(p: &mut Program, cat: &Catalog, c: &Coeffs, x: &[Var]) -> Result<Expr> {
    add_epigraph_parts(p, cat, c, x, true)
}

/// As [`add_epigraph`]; with `with_quad = false` the quadratic part is left
/// to the caller.
fn add_epigraph_parts(p: &mut Program, cat: &Catalog, c: &Coeffs, x: &[Var], with_quad: bool) -> Result<Expr> {
    let mut e = Expr::constant(c.cst);
    for (v, a) in x.iter().zip(&c.lin) {
        e.add_term(*v, *a);
    }
    for (k, t) in c.max.iter().enumerate() {
        if *t == 0.0 {
            continue;
        }
        if *t < 0.0 {
            return Err(Error::NotRepresentable("negative max-affine coefficient".into()));
        }
        let m = p.free();
        for piece in &cat.maxes[k] {
            let mut row = Expr::constant(piece.b);
            for (v, a) in x.iter().zip(&piece.a) {
                row.add_term(*v, *a);
            }
            row.add_term(m, -1.0);
            p.constrain(row, Cmp::Le);
        }
        e.add_term(m, *t);
    }
    let q = cat.quad_matrix(c);
    if with_quad && q.iter().flatten().any(|v| *v != 0.0) {
        let split = linalg::psd_split(&q, 1e-12);
        if !split.range.is_empty() {
            if split.range.iter().any(|(l, _)| *l < 0.0) {
                return Err(Error::NotRepresentable("quadratic part is not PSD".into()));
            }
            let t = p.nonneg();
            let w = split
                .range
                .iter()
                .map(|(l, u)| {
                    let mut r = Expr::new();
                    for (v, ui) in x.iter().zip(u) {
                        r.add_term(*v, ui * l.sqrt());
                    }
                    r
                })
                .collect();
            p.rotated_soc(Expr::var(t), Expr::constant(1.0), w);
            e.add_term(t, 1.0);
        }
    }
    for (k, d) in c.dom.iter().enumerate() {
        if *d {
            cat.domains[k].constrain(p, x);
        }
    }
    Ok(e)
}

struct Model {
    cat: Catalog,
    cu: Coeffs,
    ch: Coeffs,
    branches: Vec<(Coeffs, f64)>,
    q: Option<HRep>,
}

fn model(p: &Problem) -> Result<Model> {
    let n = p.dim();
    let mut cat = Catalog::new(n);
    let cu = cat.add(&p.objective.u)?;
    let ch = cat.add(&p.objective.h)?;
    let mut raw = Vec::new();
    if let Some(sc) = p.scalarized()? {
        let mc = sc.phi.register(&mut cat)?;
        for v in &sc.verts {
            raw.push((mc.scalarization(v, 1.0), dot(v, &sc.shift) + sc.c0));
        }
    }
    let branches = raw
        .into_iter()
        .map(|(c, o)| {
            let c = pad_to(&cat, c);
            cat.check_convex(&c, 1e-9)?;
            Ok((c, o))
        })
        .collect::<Result<Vec<_>>>()?;
    let q = match &p.q {
        Some(q) => Some(q.hrep()?.clone()),
        None => None,
    };
    Ok(Model { cu: pad_to(&cat, cu), ch: pad_to(&cat, ch), cat, branches, q })
}

fn merit(p: &Problem, x: &[f64], alpha: Option<f64>, tol: f64) -> (f64, f64, bool) {
    let obj = p.objective_value(x);
    let viol = p.violation(x);
    let feasible = viol <= tol;
    let f = constraint_value(p, x);
    let m = match alpha {
        Some(a) => (obj - a).max(f),
        None => f,
    };
    (m, obj, feasible)
}

/// `f(x) = max_k <v_k, Φ(x) - shift> - c0` (or the `Q` residual alone).
fn constraint_value(p: &Problem, x: &[f64]) -> f64 {
    let q = p.q.as_ref().and_then(|q| q.hrep().ok()).map_or(0.0, |h| h.violation(x).max(0.0));
    let f = match p.scalarized() {
        Ok(Some(sc)) => match sc.phi.eval_finite(x) {
            Ok(v) => sc.verts.iter().map(|l| -sc.activity(l, &v)).fold(f64::NEG_INFINITY, f64::max),
            Err(_) => f64::INFINITY,
        },
        _ => -1.0,
    };
    if q > 0.0 {
        f.max(q)
    } else {
        f
    }
}

/// One convex subproblem at `xk` with subgradient `g` of `h`.
fn step(m: &Model, xk: &[f64], g: &[f64], alpha: Option<f64>, feasible: bool) -> Result<Vec<f64>> {
    let n = xk.len();
    let mut p = Program::new();
    let x: Vec<Var> = (0..n).map(|_| p.free()).collect();
    if let Some(q) = &m.q {
        q.constrain(&mut p, &x);
    }
    let hk = m.cat.eval(&m.ch, xk);
    // h_lin(x) = h(xk) + <g, x - xk>
    let mut hlin = Expr::constant(hk - dot(g, xk));
    for (v, gi) in x.iter().zip(g) {
        hlin.add_term(*v, *gi);
    }
    let mut branch_exprs = Vec::new();
    for (c, off) in &m.branches {
        let mut e = add_epigraph(&mut p, &m.cat, c, &x)?;
        e.add_const(-off);
        e.add_scaled(&hlin, -1.0);
        branch_exprs.push(e);
    }
    if feasible {
        let mut obj = add_epigraph_parts(&mut p, &m.cat, &m.cu, &x, false)?;
        obj.add_scaled(&hlin, -1.0);
        p.add_quadratic_objective(&x, &m.cat.quad_matrix(&m.cu));
        for e in branch_exprs {
            p.constrain(e, Cmp::Le);
        }
        p.minimize(obj);
    } else {
        let t = p.free();
        for mut e in branch_exprs {
            e.add_term(t, -1.0);
            p.constrain(e, Cmp::Le);
        }
        if let Some(a) = alpha {
            let mut e = add_epigraph(&mut p, &m.cat, &m.cu, &x)?;
            e.add_scaled(&hlin, -1.0);
            e.add_const(-a);
            e.add_term(t, -1.0);
            p.constrain(e, Cmp::Le);
        }
        p.minimize(Expr::var(t));
    }
    match p.solve() {
        Outcome::Optimal { x: sol, .. } => Ok(x.iter().map(|v| sol[v.0]).collect()),
        Outcome::Unbounded => Err(Error::SubproblemFailure("unbounded subproblem; bound the search region with Q".into())),
        Outcome::Infeasible => Err(Error::SubproblemFailure("infeasible subproblem".into())),
        Outcome::Failed(s) => Err(Error::SubproblemFailure(s)),
    }
}

/// Lexicographically smallest vertex of `∂h(x)`.
fn pick_subgradient(m: &Model, x: &[f64]) -> Result<Vec<f64>> {
    let mut v = subdiff_vertices(&m.cat, &m.ch, x)?;
    v.sort_by(|a, b| linalg::lex_cmp(a, b));
    v.into_iter().next().ok_or(Error::EmptySet)
}

/// Runs the DCA iteration from `x0`.
pub fn solve_dca(p: &Problem, x0: &[f64], max_iter: usize, tol: f64) -> Result<SolveTrace> {
    check_dim(p.dim(), x0.len())?;
    if !p.control().eval(x0).is_finite() {
        return Err(Error::InfiniteValue);
    }
    let m = model(p)?;
    let ftol = 1e-7;
    let mut x = x0.to_vec();
    let mut alpha: Option<f64> = None;
    let (_, obj0, feas0) = merit(p, &x, None, ftol);
    if feas0 {
        alpha = Some(obj0);
    }
    let (m0, _, _) = merit(p, &x, alpha, ftol);
    let mut iterates = vec![Iterate { x: x.clone(), merit: m0, objective: obj0, feasible: feas0 }];
    let mut status = SolveStatus::MaxIter;
    for _ in 0..max_iter {
        let last = iterates.last().expect("nonempty").clone();
        let g = pick_subgradient(&m, &x)?;
        let mut next = step(&m, &x, &g, alpha, last.feasible)?;
        let (_, mut obj, mut feas) = merit(p, &next, alpha, ftol);
        // guard against solver round-off breaking monotonicity
        if last.feasible && (!feas || obj > last.objective) {
            next = x.clone();
            obj = last.objective;
            feas = true;
        }
        if feas {
            alpha = Some(alpha.map_or(obj, |a: f64| a.min(obj)));
        }
        let (mut mv, _, _) = merit(p, &next, alpha, ftol);
        if !feas && mv > last.merit {
            next = x.clone();
            mv = last.merit;
        }
        let moved = linalg::norm_inf(&linalg::sub(&next, &x));
        let decrease = if feas && last.feasible { last.objective - obj } else { last.merit - mv };
        x = next;
        iterates.push(Iterate { x: x.clone(), merit: mv, objective: obj, feasible: feas });
        if decrease < tol && (feas || moved < tol) {
            status = if feas { SolveStatus::Converged } else { SolveStatus::Stalled };
            break;
        }
    }
    Ok(SolveTrace { final_point: x, iterates, status })
}

/// Independent runs from several starting points.
pub fn solve_dca_multi(p: &Problem, starts: &[Vec<f64>], max_iter: usize, tol: f64) -> Vec<Result<SolveTrace>> {
    starts.par_iter().map(|x0| solve_dca(p, x0, max_iter, tol)).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::calculus::VectorMap;
    use crate::certificates::Constraint;
    use crate::convex::{ConvexFunc, DCPair};
    use crate::geometry::Polytope;

    fn monotone(t: &SolveTrace) -> bool {
        t.iterates.windows(2).all(|w| w[1].merit <= w[0].merit + 1e-10)
    }

    #[test]
    fn dca_examples() {
        let map = VectorMap::affine(vec![vec![1.0]], vec![0.0]).unwrap();
        let obj = DCPair::new(ConvexFunc::abs(), ConvexFunc::zero(1)).unwrap();
        let p = Problem::new(obj, Constraint::Set { phi: map, c: Polytope::interval(1.0, 3.0), z0: vec![2.0] }, None).unwrap();
        let t = solve_dca(&p, &[3.0], 50, 1e-10).unwrap();
        assert_eq!(t.status, SolveStatus::Converged);
        assert!((t.final_point[0] - 1.0).abs() < 1e-7);
        assert!(t.iterates.len() <= 3 && monotone(&t));

        let obj = DCPair::new(ConvexFunc::square(1.0), ConvexFunc::max_affine(vec![
            crate::convex::Piece::new(vec![2.0], 0.0),
            crate::convex::Piece::new(vec![-2.0], 0.0),
        ]).unwrap())
        .unwrap();
        let p = Problem::new(obj, Constraint::None, Some(Polytope::interval(-3.0, 3.0))).unwrap();
        let t = solve_dca(&p, &[0.1], 50, 1e-10).unwrap();
        assert!((t.final_point[0] - 1.0).abs() < 1e-6, "{t:?}");
        assert!(monotone(&t));
    }

    #[test]
    fn infeasible_start() {
        let map = VectorMap::affine(vec![vec![1.0]], vec![0.0]).unwrap();
        let obj = DCPair::new(ConvexFunc::abs(), ConvexFunc::zero(1)).unwrap();
        let p = Problem::new(obj, Constraint::Set { phi: map, c: Polytope::interval(1.0, 3.0), z0: vec![2.0] }, None).unwrap();
        let t = solve_dca(&p, &[-4.0], 50, 1e-10).unwrap();
        assert!(monotone(&t));
        assert!((t.final_point[0] - 1.0).abs() < 1e-6, "{t:?}");
    }
}
