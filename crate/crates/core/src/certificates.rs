//! Global and local optimality certificates for
//! `min φ(x) = u(x) - h(x)` subject to `Φ(x) ∈ C` (or `Φ(x) ∈ -K`) and `x ∈ Q`.
//!
//! Both constraint kinds reduce to a polytope `D` of scalarizations with an
//! activity term `c0 - <λ, Φ(x) - shift>`: the dual slope set with `c0 = 1`,
//! `shift = z0` for sets, and a compact base with `c0 = 0` for cones.

use rayon::prelude::*;
use serde::Serialize;

use crate::applications::sdp::MatrixMap;
use crate::calculus::{
    control_breakpoints, pad_to, resolve_schedule, subdiff_vertices, test_points, EtaSchedule, MapCoeffs, VectorMap,
};
use crate::conic::ConeBase;
use crate::convex::{
    add_eps_normal, add_gap_block, add_normal_cone, add_subdiff_block, coeffs_gap, const_exprs, equate, min_value,
    Block, Catalog, Coeffs, ConvexFunc, DCPair,
};
use crate::error::{check_dim, Error, Result};
use crate::geometry::{dual_slope, eps_normal_set_contains, HRep, Polytope};
use crate::linalg::{self, dot};
use crate::opt::{Cmp, Expr, Program, Var};

/// Constraint part of a problem.
#[derive(Clone, Debug, PartialEq)]
pub enum Constraint {
    None,
    Set { phi: VectorMap, c: Polytope, z0: Vec<f64> },
    Cone { phi: VectorMap, base: ConeBase },
    Sdp(MatrixMap),
}

#[derive(Clone, Debug, PartialEq)]
pub struct Problem {
    pub objective: DCPair,
    pub constraint: Constraint,
    pub q: Option<Polytope>,
}

/// Scalarization data shared by the set and cone cases.
#[derive(Clone, Debug)]
pub(crate) struct Scalarized {
    pub phi: VectorMap,
    pub verts: Vec<Vec<f64>>,
    pub c0: f64,
    pub shift: Vec<f64>,
}

impl Scalarized {
    pub fn activity(&self, v: &[f64], phix: &[f64]) -> f64 {
        self.c0 - dot(v, &linalg::sub(phix, &self.shift))
    }
}

impl Problem {
    pub fn new(objective: DCPair, constraint: Constraint, q: Option<Polytope>) -> Result<Self> {
        let n = objective.dim();
        match &constraint {
            Constraint::None => {}
            Constraint::Set { phi, c, z0 } => {
                check_dim(n, phi.dim)?;
                check_dim(phi.out_dim(), c.dim())?;
                check_dim(phi.out_dim(), z0.len())?;
                if phi.control != objective.h {
                    return Err(Error::InvalidInput("objective and constraint must share the control h".into()));
                }
                dual_slope(c, z0)?;
            }
            Constraint::Cone { phi, base } => {
                check_dim(n, phi.dim)?;
                check_dim(phi.out_dim(), base.b.dim())?;
                if phi.control != objective.h {
                    return Err(Error::InvalidInput("objective and constraint must share the control h".into()));
                }
            }
            Constraint::Sdp(m) => {
                check_dim(n, m.dim)?;
                if m.control != objective.h {
                    return Err(Error::InvalidInput("objective and constraint must share the control h".into()));
                }
            }
        }
        if let Some(q) = &q {
            check_dim(n, q.dim())?;
        }
        Ok(Problem { objective, constraint, q })
    }

    pub fn dim(&self) -> usize {
        self.objective.dim()
    }

    pub fn control(&self) -> &ConvexFunc {
        &self.objective.h
    }

    pub fn objective_value(&self, x: &[f64]) -> f64 {
        self.objective.eval(x)
    }

    pub(crate) fn scalarized(&self) -> Result<Option<Scalarized>> {
        match &self.constraint {
            Constraint::None => Ok(None),
            Constraint::Set { phi, c, z0 } => {
                let d = dual_slope(c, z0)?;
                Ok(Some(Scalarized { phi: phi.clone(), verts: d.extreme_points()?, c0: 1.0, shift: z0.clone() }))
            }
            Constraint::Cone { phi, base } => Ok(Some(Scalarized {
                phi: phi.clone(),
                verts: base.b.extreme_points()?,
                c0: 0.0,
                shift: vec![0.0; phi.out_dim()],
            })),
            Constraint::Sdp(_) => Err(Error::Unsupported("semidefinite constraints are handled by sdp_check_local".into())),
        }
    }

    /// Constraint residual: violation of `C`, of the cone, of `λ1 <= 0` and of
    /// `Q`, whichever apply (`+inf` outside `dom Φ`).
    pub fn violation(&self, x: &[f64]) -> f64 {
        let q = self.q.as_ref().map_or(0.0, |q| q.hrep().map_or(f64::INFINITY, |h| h.violation(x).max(0.0)));
        let c = match &self.constraint {
            Constraint::None => 0.0,
            Constraint::Set { phi, c, .. } => {
                let v = phi.eval(x);
                if v.iter().any(|t| !t.is_finite()) {
                    f64::INFINITY
                } else {
                    c.hrep().map_or(f64::INFINITY, |h| h.violation(&v).max(0.0))
                }
            }
            Constraint::Cone { phi, base } => {
                let v = phi.eval(x);
                if v.iter().any(|t| !t.is_finite()) {
                    f64::INFINITY
                } else {
                    base.b.support(&v).map_or(f64::INFINITY, |s| s.max(0.0))
                }
            }
            Constraint::Sdp(m) => m.max_eigenvalue(x).map_or(f64::INFINITY, |l| l.max(0.0)),
        };
        q.max(c)
    }

    pub fn is_feasible(&self, x: &[f64], tol: f64) -> bool {
        self.violation(x) <= tol
    }

    fn require_feasible(&self, x: &[f64], tol: f64) -> Result<()> {
        check_dim(self.dim(), x.len())?;
        if !self.objective_value(x).is_finite() {
            return Err(Error::InfiniteValue);
        }
        let v = self.violation(x);
        if v > tol {
            return Err(Error::InfeasiblePoint(v));
        }
        Ok(())
    }
}

/// `max{ψ1, ψ2} - h` with `ψ1 = u - α` and `ψ2 = f + h`, where
/// `f(x) = max_k <v_k, Φ(x) - shift> - c0`.
#[derive(Clone, Debug)]
pub struct Improvement {
    pub alpha: f64,
    pub psi1: ConvexFunc,
    /// `ψ2 = max_k (branch_k - offset_k)` with convex branches `<v_k, Φ> + h`.
    pub branches: Vec<(ConvexFunc, f64)>,
    pub h: ConvexFunc,
}

impl Improvement {
    /// `f(x)`; `f <= 0` iff the constraint holds.
    pub fn f(&self, x: &[f64]) -> f64 {
        let hx = self.h.eval(x);
        self.psi2(x) - hx
    }

    pub fn psi2(&self, x: &[f64]) -> f64 {
        if self.branches.is_empty() {
            return self.h.eval(x) - 1.0;
        }
        self.branches.iter().map(|(b, o)| b.eval(x) - o).fold(f64::NEG_INFINITY, f64::max)
    }

    pub fn psi1(&self, x: &[f64]) -> f64 {
        self.psi1.eval(x)
    }

    /// `max{ψ1, ψ2}(x) - h(x)`.
    pub fn eval(&self, x: &[f64]) -> f64 {
        let hx = self.h.eval(x);
        self.psi1(x).max(self.psi2(x)) - hx
    }
}

/// Builds the improvement reformulation at level `α`.
pub fn improvement_objective(p: &Problem, alpha: f64) -> Result<Improvement> {
    if !alpha.is_finite() {
        return Err(Error::InfiniteValue);
    }
    let n = p.dim();
    let psi1 = ConvexFunc::sum(vec![p.objective.u.clone(), ConvexFunc::affine(vec![0.0; n], -alpha)])?;
    let mut branches = Vec::new();
    if let Some(sc) = p.scalarized()? {
        let mut cat = Catalog::new(n);
        let mc = sc.phi.register(&mut cat)?;
        for v in &sc.verts {
            let c = pad_to(&cat, mc.scalarization(v, 1.0));
            let f = crate::calculus::coeffs_to_func(&cat, &c)?;
            branches.push((f, dot(v, &sc.shift) + sc.c0));
        }
    }
    Ok(Improvement { alpha, psi1, branches, h: p.objective.h.clone() })
}

/// Improvement objective at `α = φ(x̄)`.
pub fn improvement_at(p: &Problem, x: &[f64]) -> Result<Improvement> {
    improvement_objective(p, p.objective_value(x))
}

/// Tuning knobs of the certificate checks.
#[derive(Clone, Debug)]
pub struct CheckOptions {
    pub schedule: EtaSchedule,
    pub tol: f64,
    /// Lower bound on `α1` used for the converse report.
    pub eps0: f64,
    /// Random boundary points of `∂_η h(x̄)` tested besides its vertices.
    pub boundary_samples: usize,
    /// `α` grid size used when the joint program is not available.
    pub alpha_points: usize,
    pub seed: u64,
    /// Grid points per axis for the `η̄` estimate; 0 disables it.
    pub eta_bar_grid: usize,
}

impl Default for CheckOptions {
    fn default() -> Self {
        CheckOptions {
            schedule: EtaSchedule::default(),
            tol: 1e-7,
            eps0: 1e-3,
            boundary_samples: 50,
            alpha_points: 11,
            seed: 0,
            eta_bar_grid: 0,
        }
    }
}

/// One witness of the global inclusion at `(η, x*)`.
#[derive(Clone, Debug, Serialize)]
pub struct Witness {
    pub eta: f64,
    pub x_star: Vec<f64>,
    pub alpha: [f64; 2],
    pub eta1: f64,
    pub eta2: f64,
    pub eta3: f64,
    pub lambda: Vec<f64>,
    /// Split `x* = s1 + s2 + s3` over the three terms.
    pub s1: Vec<f64>,
    pub s2: Vec<f64>,
    pub s3: Vec<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
#[serde(tag = "kind")]
pub enum Verdict {
    Holds,
    Fails { eta: f64, x_star: Vec<f64> },
    NotFoundAtResolution { eta: f64, x_star: Vec<f64> },
}

#[derive(Clone, Debug, Serialize)]
pub struct CertMeta {
    pub schedule: Vec<f64>,
    pub tested_points: usize,
    pub tol: f64,
    pub eps0: f64,
    /// Every witness has `α1 > 0`.
    pub all_alpha1_positive: bool,
    /// Every tested point admits a witness with `α1 >= ε0`.
    pub alpha1_at_least_eps0: bool,
    /// Whether the tested points are exhaustive for each `∂_η h(x̄)`.
    pub exhaustive: bool,
    /// `joint` (exact program over α and λ) or `grid`.
    pub method: String,
    pub eta_bar_estimate: Option<f64>,
    pub assumptions: Vec<String>,
    pub warnings: Vec<String>,
}

#[derive(Clone, Debug, Serialize)]
pub struct Certificate {
    pub verdict: Verdict,
    pub witnesses: Vec<Witness>,
    pub meta: CertMeta,
}

impl Certificate {
    pub fn holds(&self) -> bool {
        self.verdict == Verdict::Holds
    }
}

struct GlobalCtx {
    cat: Catalog,
    mc: Option<MapCoeffs>,
    cu: Coeffs,
    ch: Coeffs,
    fv: Vec<Coeffs>,
    act: Vec<f64>,
    verts: Vec<Vec<f64>>,
    q: Option<HRep>,
    x: Vec<f64>,
    tol: f64,
}

fn require_finite_valued(p: &Problem) -> Result<()> {
    let mut ok = p.objective.u.is_finite_valued() && p.objective.h.is_finite_valued();
    if let Constraint::Set { phi, .. } | Constraint::Cone { phi, .. } = &p.constraint {
        ok &= phi.components.iter().all(|c| c.is_finite_valued());
    }
    if ok {
        Ok(())
    } else {
        Err(Error::Unsupported("global checks need finite-valued u, Φ and h; move domain constraints into Q".into()))
    }
}

/// Checks that `<v, Φ> + h` is convex at every vertex `v` of the
/// scalarization polytope.
fn scalarizations(cat: &Catalog, mc: &MapCoeffs, verts: &[Vec<f64>]) -> Result<Vec<Coeffs>> {
    verts
        .iter()
        .map(|v| {
            let c = pad_to(cat, mc.scalarization(v, 1.0));
            cat.check_convex(&c, 1e-9)
                .map_err(|e| Error::ValidationFailed(format!("<λ,Φ>+h is not convex at λ = {v:?}: {e}")))?;
            Ok(c)
        })
        .collect()
}

fn build_ctx(p: &Problem, x: &[f64], tol: f64) -> Result<GlobalCtx> {
    let n = p.dim();
    let mut cat = Catalog::new(n);
    let cu = cat.add(&p.objective.u)?;
    let ch = cat.add(&p.objective.h)?;
    let sc = p.scalarized()?;
    let (mc, verts, act) = match &sc {
        Some(sc) => {
            let mc = sc.phi.register(&mut cat)?;
            let phix = sc.phi.eval_finite(x)?;
            let act = sc.verts.iter().map(|v| sc.activity(v, &phix).max(0.0)).collect();
            (Some(mc), sc.verts.clone(), act)
        }
        None => (None, Vec::new(), Vec::new()),
    };
    let fv = match &mc {
        Some(mc) => scalarizations(&cat, mc, &verts)?,
        None => Vec::new(),
    };
    let q = match &p.q {
        Some(q) => Some(q.hrep()?.clone()),
        None => None,
    };
    Ok(GlobalCtx { cu: pad_to(&cat, cu), ch: pad_to(&cat, ch), cat, mc, fv, act, verts, q, x: x.to_vec(), tol })
}

/// Weights on `α1` and the vertices of `D`, either free or fixed.
enum Mode<'a> {
    Joint { alpha1_min: f64 },
    Fixed { alpha1: f64, weights: &'a [f64] },
}

fn solve_point(ctx: &GlobalCtx, xs: &[f64], eta: f64, mode: Mode) -> Result<Option<Witness>> {
    let mut p = Program::new();
    let k = ctx.verts.len();
    let (a1, a2, th): (Expr, Expr, Vec<Expr>) = match mode {
        Mode::Joint { alpha1_min } => {
            let a1 = p.var(alpha1_min, 1.0);
            let a2 = p.var(0.0, 1.0);
            let mut s = Expr::var(a1);
            s.add_term(a2, 1.0);
            p.constrain_rhs(s, Cmp::Eq, 1.0);
            let th: Vec<Var> = p.vars(k, 0.0, f64::INFINITY);
            let mut s = Expr::new();
            for t in &th {
                s.add_term(*t, 1.0);
            }
            s.add_term(a2, -1.0);
            p.constrain(s, Cmp::Eq);
            (Expr::var(a1), Expr::var(a2), th.into_iter().map(Expr::var).collect())
        }
        Mode::Fixed { alpha1, weights } => {
            let a2 = 1.0 - alpha1;
            let th = if k == 0 { Vec::new() } else { weights.iter().map(|w| Expr::constant(w * a2)).collect() };
            let a2 = if k == 0 { 0.0 } else { a2 };
            (Expr::constant(alpha1), Expr::constant(a2), th)
        }
    };
    let mut b1 = Block::new(&ctx.cat);
    b1.add(&ctx.cu, &a1);
    let mut b2 = Block::new(&ctx.cat);
    for (c, t) in ctx.fv.iter().zip(&th) {
        b2.add(c, t);
    }
    let g1 = add_gap_block(&mut p, &ctx.cat, &b1, &ctx.x)?;
    let g2 = add_gap_block(&mut p, &ctx.cat, &b2, &ctx.x)?;
    let mut slope: Vec<Expr> = g1
        .slope
        .iter()
        .zip(&g2.slope)
        .map(|(a, b)| {
            let mut e = a.clone();
            e.add_scaled(b, 1.0);
            e
        })
        .collect();
    let gap3 = match &ctx.q {
        Some(q) => add_eps_normal(&mut p, q, &ctx.x, &mut slope)?,
        None => Expr::new(),
    };
    equate(&mut p, &slope, &const_exprs(xs));
    let mut obj = g1.gap.clone();
    obj.add_scaled(&g2.gap, 1.0);
    obj.add_scaled(&gap3, 1.0);
    for (t, a) in th.iter().zip(&ctx.act) {
        obj.add_scaled(t, *a);
    }
    p.minimize(obj);
    let (val, sol) = min_value(&p)?;
    if !(val <= eta + ctx.tol) {
        return Ok(None);
    }
    let al1 = a1.value(&sol).clamp(0.0, 1.0);
    let al2 = a2.value(&sol).clamp(0.0, 1.0);
    let s1: Vec<f64> = g1.slope.iter().map(|e| e.value(&sol)).collect();
    let s2: Vec<f64> = g2.slope.iter().map(|e| e.value(&sol)).collect();
    let s3: Vec<f64> = (0..xs.len()).map(|i| xs[i] - s1[i] - s2[i]).collect();
    let m = ctx.mc.as_ref().map_or(0, |mc| mc.comps.len());
    let mut lambda = vec![0.0; m];
    if al2 > 1e-12 {
        for (t, v) in th.iter().zip(&ctx.verts) {
            lambda = linalg::axpy(&lambda, t.value(&sol) / al2, v);
        }
    }
    let per = |gap: f64, a: f64| if a > 1e-12 { gap.max(0.0) / a } else { 0.0 };
    let mut eta1 = per(g1.gap.value(&sol), al1);
    let mut eta2 = per(g2.gap.value(&sol), al2);
    let eta3 = gap3.value(&sol).max(0.0);
    let act: f64 = th.iter().zip(&ctx.act).map(|(t, a)| t.value(&sol) * a).sum();
    let used = al1 * eta1 + al2 * eta2 + act + eta3;
    let slack = eta - used;
    if slack > 0.0 {
        if al1 > 1e-12 {
            eta1 += slack / al1;
        } else if al2 > 1e-12 {
            eta2 += slack / al2;
        }
    }
    Ok(Some(Witness { eta, x_star: xs.to_vec(), alpha: [al1, al2], eta1, eta2, eta3, lambda, s1, s2, s3 }))
}

/// Witness search at one point: prefers `α1 >= ε0`.
fn search_point(ctx: &GlobalCtx, xs: &[f64], eta: f64, opts: &CheckOptions) -> Result<(Option<Witness>, bool)> {
    match solve_point(ctx, xs, eta, Mode::Joint { alpha1_min: opts.eps0 }) {
        Ok(Some(w)) => return Ok((Some(w), true)),
        Ok(None) => {}
        Err(Error::Unsupported(_)) => return grid_point(ctx, xs, eta, opts).map(|w| (w, false)),
        Err(e) => return Err(e),
    }
    Ok((solve_point(ctx, xs, eta, Mode::Joint { alpha1_min: 0.0 })?, true))
}

/// Fallback over an `α` grid and a few fixed scalarizations.
fn grid_point(ctx: &GlobalCtx, xs: &[f64], eta: f64, opts: &CheckOptions) -> Result<Option<Witness>> {
    let k = ctx.verts.len();
    let mut cands: Vec<Vec<f64>> = (0..k).map(|i| linalg::unit(k, i)).collect();
    if k > 1 {
        cands.push(vec![1.0 / k as f64; k]);
    }
    if k == 0 {
        cands.push(Vec::new());
    }
    let pts = opts.alpha_points.max(2);
    for i in 0..pts {
        let alpha1 = 1.0 - i as f64 / (pts - 1) as f64;
        for w in &cands {
            if let Some(wit) = solve_point(ctx, xs, eta, Mode::Fixed { alpha1, weights: w })? {
                return Ok(Some(wit));
            }
        }
    }
    Ok(None)
}

fn default_eta_max(p: &Problem, x: &[f64]) -> f64 {
    10.0 * (1.0 + p.objective.u.eval(x).abs() + p.objective.h.eval(x).abs())
}

/// Shared engine behind the set and cone global checks.
pub(crate) fn global_engine(p: &Problem, x: &[f64], opts: &CheckOptions) -> Result<Certificate> {
    p.require_feasible(x, opts.tol.max(1e-9))?;
    require_finite_valued(p)?;
    let ctx = build_ctx(p, x, opts.tol)?;
    let breaks = control_breakpoints(&ctx.cat, &ctx.ch, x);
    let etas = resolve_schedule(&opts.schedule, &breaks, default_eta_max(p, x));
    let mut tasks = Vec::new();
    let mut exhaustive = true;
    for (i, &eta) in etas.iter().enumerate() {
        let (pts, ex) = test_points(&ctx.cat, &ctx.ch, x, eta, opts.boundary_samples, opts.seed.wrapping_add(i as u64))?;
        exhaustive &= ex;
        tasks.extend(pts.into_iter().map(|xs| (eta, xs)));
    }
    let results: Vec<Result<(Option<Witness>, bool)>> =
        tasks.par_iter().map(|(eta, xs)| search_point(&ctx, xs, *eta, opts)).collect();
    let mut witnesses = Vec::new();
    let mut verdict = Verdict::Holds;
    let mut joint = true;
    for ((eta, xs), r) in tasks.iter().zip(results) {
        let (w, exact) = r?;
        joint &= exact;
        match w {
            Some(w) => witnesses.push(w),
            None => {
                if verdict == Verdict::Holds {
                    verdict = if exact {
                        Verdict::Fails { eta: *eta, x_star: xs.clone() }
                    } else {
                        Verdict::NotFoundAtResolution { eta: *eta, x_star: xs.clone() }
                    };
                }
            }
        }
    }
    let all_alpha1_positive = verdict == Verdict::Holds && witnesses.iter().all(|w| w.alpha[0] > 1e-12);
    let alpha1_at_least_eps0 = verdict == Verdict::Holds && witnesses.iter().all(|w| w.alpha[0] >= opts.eps0 - 1e-12);
    let mut warnings = Vec::new();
    if !exhaustive {
        warnings.push("tested points of ∂_η h(x̄) are sampled, not exhaustive".into());
    }
    let eta_bar_estimate = if opts.eta_bar_grid > 0 { eta_bar_estimate(p, x, opts.eta_bar_grid).ok() } else { None };
    Ok(Certificate {
        verdict,
        witnesses,
        meta: CertMeta {
            schedule: etas,
            tested_points: tasks.len(),
            tol: opts.tol,
            eps0: opts.eps0,
            all_alpha1_positive,
            alpha1_at_least_eps0,
            exhaustive,
            method: if joint { "joint" } else { "grid" }.into(),
            eta_bar_estimate,
            assumptions: vec![
                "continuity hypotheses hold: finite dimension with finite-valued u, Φ and h".into(),
                "η is quantified over the attached schedule only".into(),
            ],
            warnings,
        },
    })
}

/// Global certificate for the set-constrained (or unconstrained) problem.
pub fn check_global(p: &Problem, x: &[f64], opts: &CheckOptions) -> Result<Certificate> {
    if let Constraint::Cone { .. } = p.constraint {
        return Err(Error::InvalidInput("cone constraint: use check_cone_global".into()));
    }
    global_engine(p, x, opts)
}

/// Global certificate with the abstract constraint `x ∈ Q`.
pub fn check_global_with_q(p: &Problem, x: &[f64], opts: &CheckOptions) -> Result<Certificate> {
    if p.q.is_none() {
        return Err(Error::InvalidInput("problem has no Q".into()));
    }
    check_global(p, x, opts)
}

/// Re-checks the memberships and the scalar condition of a witness.
pub fn verify_witness(p: &Problem, x: &[f64], w: &Witness, tol: f64) -> Result<bool> {
    let n = p.dim();
    let mut cat = Catalog::new(n);
    let cu = cat.add(&p.objective.u)?;
    let ch = cat.add(&p.objective.h)?;
    let sc = p.scalarized()?;
    let mc = match &sc {
        Some(sc) => Some(sc.phi.register(&mut cat)?),
        None => None,
    };
    let (cu, ch) = (pad_to(&cat, cu), pad_to(&cat, ch));
    let loose = tol * (1.0 + linalg::norm_inf(&w.x_star));
    if coeffs_gap(&cat, &ch, x, &w.x_star)? > w.eta + loose {
        return Ok(false);
    }
    let sum = linalg::add(&linalg::add(&w.s1, &w.s2), &w.s3);
    if !linalg::approx_eq(&sum, &w.x_star, loose) {
        return Ok(false);
    }
    let [a1, a2] = w.alpha;
    if (a1 + a2 - 1.0).abs() > tol || a1 < -tol || a2 < -tol {
        return Ok(false);
    }
    let member = |c: &Coeffs, s: &[f64], a: f64, e: f64| -> Result<bool> {
        if a <= 1e-12 {
            return Ok(linalg::norm_inf(s) <= loose);
        }
        Ok(coeffs_gap(&cat, c, x, &linalg::scale(s, 1.0 / a))? <= e + loose / a)
    };
    if !member(&cu, &w.s1, a1, w.eta1)? {
        return Ok(false);
    }
    let mut act = 0.0;
    if let (Some(sc), Some(mc)) = (&sc, &mc) {
        if a2 > 1e-12 {
            let f = pad_to(&cat, mc.scalarization(&w.lambda, 1.0));
            if !member(&f, &w.s2, a2, w.eta2)? {
                return Ok(false);
            }
            act = sc.activity(&w.lambda, &sc.phi.eval_finite(x)?);
        } else if linalg::norm_inf(&w.s2) > loose {
            return Ok(false);
        }
    } else if linalg::norm_inf(&w.s2) > loose {
        return Ok(false);
    }
    match &p.q {
        Some(q) => {
            if !eps_normal_set_contains(q, x, &w.s3, w.eta3, loose)? {
                return Ok(false);
            }
        }
        None => {
            if linalg::norm_inf(&w.s3) > loose {
                return Ok(false);
            }
        }
    }
    let lhs = a1 * w.eta1 + a2 * (w.eta2 + act) + w.eta3;
    Ok((lhs - w.eta).abs() <= tol * (1.0 + w.eta.abs()) * 10.0)
}

/// Grid estimate of `η̄ = sup{h*(y*) + h(x̄) - <y*, x̄> : y* ∈ ∂h(y), y feasible}`
/// over the bounding box of `Q` (or a box around `x̄`).
pub fn eta_bar_estimate(p: &Problem, x: &[f64], per_axis: usize) -> Result<f64> {
    let n = p.dim();
    let (lo, hi) = match &p.q {
        Some(q) => {
            let mut lo = Vec::new();
            let mut hi = Vec::new();
            for i in 0..n {
                let e = linalg::unit(n, i);
                hi.push(q.support(&e)?);
                lo.push(-q.support(&linalg::scale(&e, -1.0))?);
            }
            (lo, hi)
        }
        None => {
            let r = 1.0 + linalg::norm_inf(x);
            (x.iter().map(|v| v - r).collect(), x.iter().map(|v| v + r).collect())
        }
    };
    let per = if n <= 2 { per_axis } else { per_axis.min(5) };
    let mut cat = Catalog::new(n);
    let ch = cat.add(&p.objective.h)?;
    let ch = pad_to(&cat, ch);
    let mut best: f64 = 0.0;
    for y in crate::calculus::box_grid(&lo, &hi, per) {
        if !p.is_feasible(&y, 1e-9) || !cat.eval(&ch, &y).is_finite() {
            continue;
        }
        for ys in subdiff_vertices(&cat, &ch, &y)? {
            best = best.max(coeffs_gap(&cat, &ch, x, &ys)?);
        }
    }
    Ok(best)
}

/// Multipliers `(α1, α2, λ)` with `0 ∈ α1 ∂̂φ(x̄) + α2 D̂*Φ(x̄)(λ) [+ N_Q(x̄)]`.
#[derive(Clone, Debug, Serialize)]
pub struct Multipliers {
    pub alpha: [f64; 2],
    pub lambda: Vec<f64>,
    pub residual: f64,
    /// `α2 (c0 - <λ, Φ(x̄) - shift>)`.
    pub complementarity: f64,
}

/// `0 ∈ ∂̂φ(x̄) + η D̂*Φ(x̄)(λ) [+ N_Q(x̄)]` with `λ` on the active face.
#[derive(Clone, Debug, Serialize)]
pub struct ConeForm {
    pub eta: f64,
    pub lambda: Vec<f64>,
}

#[derive(Clone, Debug, Serialize)]
pub struct LocalCheck {
    pub multipliers: Option<Multipliers>,
    pub cone_form: Option<ConeForm>,
    /// Qualification condition over the active face.
    pub qc: bool,
    /// `min ||·||∞` over the qualification image (`+inf` when the face is empty).
    pub qc_margin: f64,
    /// Qualification over the whole base (cone with `Q` only).
    pub qc_all_base: Option<bool>,
    pub face: Vec<Vec<f64>>,
}

struct LocalCtx {
    cat: Catalog,
    cu: Coeffs,
    ch: Coeffs,
    fv: Vec<Coeffs>,
    face: Vec<Vec<f64>>,
    all: Vec<Coeffs>,
    all_verts: Vec<Vec<f64>>,
    grad_h: Option<Vec<f64>>,
    q: Option<HRep>,
    x: Vec<f64>,
    sc: Option<Scalarized>,
    phix: Vec<f64>,
}

fn local_ctx(p: &Problem, x: &[f64], tol: f64, need_grad: bool) -> Result<LocalCtx> {
    p.require_feasible(x, tol.max(1e-9))?;
    let n = p.dim();
    let mut cat = Catalog::new(n);
    let cu = cat.add(&p.objective.u)?;
    let ch = cat.add(&p.objective.h)?;
    let sc = p.scalarized()?;
    let (mc, phix) = match &sc {
        Some(sc) => (Some(sc.phi.register(&mut cat)?), sc.phi.eval_finite(x)?),
        None => (None, Vec::new()),
    };
    let (cu, ch) = (pad_to(&cat, cu), pad_to(&cat, ch));
    let grad_h = match cat.gradient(&ch, x) {
        Ok(g) => Some(g),
        Err(e @ Error::NotDifferentiable(_)) if need_grad => return Err(e),
        Err(Error::NotDifferentiable(_)) => None,
        Err(e) => return Err(e),
    };
    let (face, all_verts) = match &sc {
        Some(sc) => (active_face(sc, &phix, tol), sc.verts.clone()),
        None => (Vec::new(), Vec::new()),
    };
    let (fv, all) = match &mc {
        Some(mc) => (scalarizations(&cat, mc, &face)?, scalarizations(&cat, mc, &all_verts)?),
        None => (Vec::new(), Vec::new()),
    };
    let q = match &p.q {
        Some(q) => Some(q.hrep()?.clone()),
        None => None,
    };
    Ok(LocalCtx { cat, cu, ch, fv, face, all, all_verts, grad_h, q, x: x.to_vec(), sc, phix })
}

/// Vertices of `D` on the face `{λ : <λ, Φ(x̄) - shift> = c0}`.
fn active_face(sc: &Scalarized, phix: &[f64], tol: f64) -> Vec<Vec<f64>> {
    let a = linalg::sub(phix, &sc.shift);
    let scale = 1.0 + linalg::norm_inf(&a);
    let vals: Vec<f64> = sc.verts.iter().map(|v| dot(v, &a)).collect();
    let top = vals.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let ftol = tol.max(1e-9) * scale;
    if sc.verts.is_empty() || top < sc.c0 - ftol {
        return Vec::new();
    }
    sc.verts.iter().zip(&vals).filter(|(_, v)| **v >= top - ftol).map(|(v, _)| v.clone()).collect()
}

/// Adds `|slope_i| <= r` and returns `r`.
fn residual_var(p: &mut Program, slope: &[Expr]) -> Var {
    let r = p.nonneg();
    for s in slope {
        let mut up = s.clone();
        up.add_term(r, -1.0);
        p.constrain(up, Cmp::Le);
        let mut dn = s.clone();
        dn.add_term(r, 1.0);
        p.constrain(dn, Cmp::Ge);
    }
    r
}

fn sum_into(a: &mut [Expr], b: &[Expr], t: f64) {
    for (x, y) in a.iter_mut().zip(b) {
        x.add_scaled(y, t);
    }
}

/// Slope of `Σ θ_k F_k` at `x̄` (subdifferential), with `θ` program variables.
fn face_slope(p: &mut Program, ctx: &LocalCtx, coeffs: &[Coeffs], theta: &[Var]) -> Result<Vec<Expr>> {
    let mut blk = Block::new(&ctx.cat);
    for (c, t) in coeffs.iter().zip(theta) {
        blk.add(c, &Expr::var(*t));
    }
    add_subdiff_block(p, &ctx.cat, &blk, &ctx.x)
}

/// Minimum of `||∂̂φ(x̄) + Σ θ_k D̂*Φ(x̄)(v_k) [+ N_Q]||∞` with `θ >= 0` free
/// in scale; returns `(r, θ)` with the smallest `Σ θ` among near-optimal.
fn cone_form_lp(ctx: &LocalCtx, tol: f64, use_face: bool) -> Result<Option<(f64, Vec<f64>)>> {
    let grad_h = ctx.grad_h.as_ref().expect("gradient checked");
    let empty = Vec::new();
    let coeffs: &[Coeffs] = if use_face { &ctx.fv } else { &empty };
    let build = |cap: Option<f64>| -> Result<Option<(f64, Vec<f64>)>> {
        let mut p = Program::new();
        let theta = p.vars(coeffs.len(), 0.0, f64::INFINITY);
        let mut slope = add_subdiff_block(&mut p, &ctx.cat, &Block::constant(&ctx.cat, &ctx.cu), &ctx.x)?;
        for (s, g) in slope.iter_mut().zip(grad_h) {
            s.add_const(-g);
        }
        if !theta.is_empty() {
            let fs = face_slope(&mut p, ctx, coeffs, &theta)?;
            sum_into(&mut slope, &fs, 1.0);
            for (s, g) in slope.iter_mut().zip(grad_h) {
                for t in &theta {
                    s.add_term(*t, -g);
                }
            }
        }
        if let Some(q) = &ctx.q {
            add_normal_cone(&mut p, q, &ctx.x, &mut slope)?;
        }
        let r = residual_var(&mut p, &slope);
        match cap {
            None => p.minimize(Expr::var(r)),
            Some(c) => {
                p.constrain_rhs(Expr::var(r), Cmp::Le, c);
                let mut s = Expr::new();
                for t in &theta {
                    s.add_term(*t, 1.0);
                }
                p.minimize(s);
            }
        }
        let (v, sol) = min_value(&p)?;
        if !v.is_finite() {
            return Ok(None);
        }
        Ok(Some((sol[r.0], theta.iter().map(|t| sol[t.0]).collect())))
    };
    match build(None)? {
        Some((r, th)) if r <= tol => Ok(build(Some(r * (1.0 + 1e-9)))?.or(Some((r, th)))),
        other => Ok(other),
    }
}

/// `min ||Σ θ_k ∂F_k(x̄) - ∇h(x̄) [+ N_Q]||∞` over `Σ θ = 1`.
fn qc_lp(ctx: &LocalCtx, coeffs: &[Coeffs]) -> Result<(f64, Vec<f64>)> {
    if coeffs.is_empty() {
        return Ok((f64::INFINITY, Vec::new()));
    }
    let grad_h = ctx.grad_h.as_ref().expect("gradient checked");
    let mut p = Program::new();
    let theta = p.vars(coeffs.len(), 0.0, f64::INFINITY);
    let mut s = Expr::new();
    for t in &theta {
        s.add_term(*t, 1.0);
    }
    p.constrain_rhs(s, Cmp::Eq, 1.0);
    let mut slope = face_slope(&mut p, ctx, coeffs, &theta)?;
    for (s, g) in slope.iter_mut().zip(grad_h) {
        s.add_const(-g);
    }
    if let Some(q) = &ctx.q {
        add_normal_cone(&mut p, q, &ctx.x, &mut slope)?;
    }
    let r = residual_var(&mut p, &slope);
    p.minimize(Expr::var(r));
    let (v, sol) = min_value(&p)?;
    if !v.is_finite() {
        return Ok((f64::INFINITY, Vec::new()));
    }
    Ok((sol[r.0], theta.iter().map(|t| sol[t.0]).collect()))
}

fn combine(verts: &[Vec<f64>], w: &[f64], m: usize) -> Vec<f64> {
    let mut l = vec![0.0; m];
    for (v, t) in verts.iter().zip(w) {
        l = linalg::axpy(&l, *t, v);
    }
    l
}

fn complementarity(ctx: &LocalCtx, a2: f64, lambda: &[f64]) -> f64 {
    match &ctx.sc {
        Some(sc) if a2 > 0.0 => a2 * sc.activity(lambda, &ctx.phix),
        _ => 0.0,
    }
}

pub(crate) fn local_engine(p: &Problem, x: &[f64], tol: f64, all_base_qc: bool) -> Result<LocalCheck> {
    let ctx = local_ctx(p, x, tol, true)?;
    let m = ctx.sc.as_ref().map_or(0, |s| s.phi.out_dim());
    let (qc_margin, qc_theta) = qc_lp(&ctx, &ctx.fv)?;
    let qc = qc_margin > tol;
    let qc_all_base = if all_base_qc { Some(qc_lp(&ctx, &ctx.all)?.0 > tol) } else { None };
    let _ = &ctx.all_verts;

    let mut multipliers = None;
    let mut cone_form = None;
    if let Some((r, _)) = cone_form_lp(&ctx, tol, false)? {
        if r <= tol {
            multipliers = Some(Multipliers { alpha: [1.0, 0.0], lambda: vec![0.0; m], residual: r, complementarity: 0.0 });
            if qc {
                cone_form = Some(ConeForm { eta: 0.0, lambda: vec![0.0; m] });
            }
        }
    }
    if multipliers.is_none() && !ctx.fv.is_empty() {
        if let Some((r, th)) = cone_form_lp(&ctx, tol, true)? {
            if r <= tol {
                let t: f64 = th.iter().sum();
                let mu = combine(&ctx.face, &th, m);
                let lambda = if t > 0.0 { linalg::scale(&mu, 1.0 / t) } else { ctx.face[0].clone() };
                let a1 = 1.0 / (1.0 + t);
                let a2 = t / (1.0 + t);
                multipliers = Some(Multipliers {
                    alpha: [a1, a2],
                    complementarity: complementarity(&ctx, a2, &lambda),
                    lambda: lambda.clone(),
                    residual: r * a1,
                });
                if qc {
                    cone_form = Some(ConeForm { eta: t, lambda });
                }
            }
        }
    }
    if multipliers.is_none() && !qc && !qc_theta.is_empty() {
        let lambda = combine(&ctx.face, &qc_theta, m);
        multipliers = Some(Multipliers {
            alpha: [0.0, 1.0],
            complementarity: complementarity(&ctx, 1.0, &lambda),
            lambda,
            residual: qc_margin,
        });
    }
    Ok(LocalCheck { multipliers, cone_form, qc, qc_margin, qc_all_base, face: ctx.face.clone() })
}

/// Necessary optimality conditions with multipliers at `x̄`.
pub fn check_local_necessary(p: &Problem, x: &[f64], tol: f64) -> Result<LocalCheck> {
    if let Constraint::Cone { .. } = p.constraint {
        return Err(Error::InvalidInput("cone constraint: use check_cone_local".into()));
    }
    local_engine(p, x, tol, false)
}

/// The qualification condition over the active face.
pub fn check_qc(p: &Problem, x: &[f64], tol: f64) -> Result<bool> {
    let ctx = local_ctx(p, x, tol, true)?;
    Ok(qc_lp(&ctx, &ctx.fv)?.0 > tol)
}

#[derive(Clone, Debug, PartialEq, Serialize)]
#[serde(tag = "kind")]
pub enum LocalVerdict {
    LocalMin,
    NotCertified { reasons: Vec<String> },
}

#[derive(Clone, Debug, Serialize)]
pub struct SufficiencyReport {
    pub verdict: LocalVerdict,
    pub inclusion: Certificate,
    /// Whether `∂h(x̄) ∩ ∪ ∂(<λ,Φ> + h)(x̄)` over the face is empty.
    pub intersection_empty: bool,
    pub intersection_margin: f64,
}

/// Default small η values of the sufficiency test.
pub fn small_schedule() -> EtaSchedule {
    EtaSchedule::Explicit(vec![0.0, 1e-4, 1e-3, 1e-2])
}

pub(crate) fn sufficiency_engine(p: &Problem, x: &[f64], schedule: &EtaSchedule, tol: f64) -> Result<SufficiencyReport> {
    let opts = CheckOptions { schedule: schedule.clone(), tol, ..CheckOptions::default() };
    let inclusion = global_engine(p, x, &opts)?;
    let ctx = local_ctx(p, x, tol, false)?;
    let margin = if ctx.fv.is_empty() {
        f64::INFINITY
    } else {
        let mut prog = Program::new();
        let theta = prog.vars(ctx.fv.len(), 0.0, f64::INFINITY);
        let mut s = Expr::new();
        for t in &theta {
            s.add_term(*t, 1.0);
        }
        prog.constrain_rhs(s, Cmp::Eq, 1.0);
        let mut slope = face_slope(&mut prog, &ctx, &ctx.fv, &theta)?;
        if let Some(q) = &ctx.q {
            add_normal_cone(&mut prog, q, &ctx.x, &mut slope)?;
        }
        let sh = add_subdiff_block(&mut prog, &ctx.cat, &Block::constant(&ctx.cat, &ctx.ch), &ctx.x)?;
        sum_into(&mut slope, &sh, -1.0);
        let r = residual_var(&mut prog, &slope);
        prog.minimize(Expr::var(r));
        let (v, sol) = min_value(&prog)?;
        if v.is_finite() {
            sol[r.0]
        } else {
            f64::INFINITY
        }
    };
    let intersection_empty = margin > tol;
    let mut reasons = Vec::new();
    if !inclusion.holds() {
        reasons.push("inclusion fails for small η".to_string());
    }
    if !intersection_empty {
        reasons.push("∂h(x̄) meets the constraint subdifferentials on the active face".to_string());
    }
    let verdict = if reasons.is_empty() { LocalVerdict::LocalMin } else { LocalVerdict::NotCertified { reasons } };
    Ok(SufficiencyReport { verdict, inclusion, intersection_empty, intersection_margin: margin })
}

/// Sufficient condition for a local minimum at `x̄`.
pub fn check_local_sufficient(p: &Problem, x: &[f64], schedule: &EtaSchedule, tol: f64) -> Result<SufficiencyReport> {
    if let Constraint::Cone { .. } = p.constraint {
        return Err(Error::InvalidInput("cone constraint: use check_cone_sufficient".into()));
    }
    sufficiency_engine(p, x, schedule, tol)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::calculus::VectorMap;

    fn interval_problem(phi: ConvexFunc, lo: f64, hi: f64, q: Option<Polytope>) -> Problem {
        let map = VectorMap::affine(vec![vec![1.0]], vec![0.0]).unwrap();
        let obj = DCPair::new(phi, ConvexFunc::zero(1)).unwrap();
        let c = Constraint::Set { phi: map, c: Polytope::interval(lo, hi), z0: vec![0.5 * (lo + hi)] };
        Problem::new(obj, c, q).unwrap()
    }

    #[test]
    fn improvement_function() {
        let p = interval_problem(ConvexFunc::abs(), 1.0, 3.0, None);
        let imp = improvement_objective(&p, 1.0).unwrap();
        for x in [-1.0, 0.0, 1.0, 2.0, 3.5] {
            assert!((imp.f(&[x]) - ((x - 2.0f64).abs() - 1.0)).abs() < 1e-12);
        }
        assert!((imp.f(&[0.0]) - 1.0).abs() < 1e-12);
        assert!(imp.eval(&[1.0]).abs() < 1e-12);
    }

    #[test]
    fn global_examples() {
        let p = interval_problem(ConvexFunc::abs(), 1.0, 3.0, None);
        let o = CheckOptions::default();
        let c = check_global(&p, &[1.0], &o).unwrap();
        assert!(c.holds());
        assert!(c.meta.all_alpha1_positive);
        for w in &c.witnesses {
            assert!(verify_witness(&p, &[1.0], w, 1e-7).unwrap(), "{w:?}");
        }
        assert!(matches!(check_global(&p, &[2.0], &o).unwrap().verdict, Verdict::Fails { .. }));
        assert!(matches!(check_global(&p, &[0.0], &o), Err(Error::InfeasiblePoint(_))));
    }

    #[test]
    fn global_with_q_examples() {
        let q = Some(Polytope::interval(0.0, 1.0));
        let p = interval_problem(ConvexFunc::affine(vec![1.0], 0.0), -10.0, 10.0, q);
        let o = CheckOptions::default();
        let c = check_global_with_q(&p, &[0.0], &o).unwrap();
        assert!(c.holds());
        for w in &c.witnesses {
            assert!(verify_witness(&p, &[0.0], w, 1e-7).unwrap());
        }
        assert!(!check_global_with_q(&p, &[0.5], &o).unwrap().holds());
    }

    #[test]
    fn local_examples() {
        let p = interval_problem(ConvexFunc::abs(), 1.0, 3.0, None);
        let l = check_local_necessary(&p, &[1.0], 1e-9).unwrap();
        let m = l.multipliers.unwrap();
        assert!(linalg::approx_eq(&m.lambda, &[-1.0], 1e-9));
        assert!(m.complementarity.abs() < 1e-8);
        let cf = l.cone_form.unwrap();
        assert!((cf.eta - 1.0).abs() < 1e-9);
        let p2 = interval_problem(ConvexFunc::square(1.0), -1.0, 1.0, None);
        let l = check_local_necessary(&p2, &[0.0], 1e-9).unwrap();
        assert_eq!(l.multipliers.unwrap().alpha, [1.0, 0.0]);
        assert!(check_local_necessary(&p, &[0.0], 1e-9).is_err());
    }

    #[test]
    fn qc_examples() {
        let p = interval_problem(ConvexFunc::abs(), 1.0, 3.0, None);
        assert!(check_qc(&p, &[1.0], 1e-9).unwrap());
        assert!(check_qc(&p, &[2.0], 1e-9).unwrap());
        let constant = VectorMap::affine(vec![vec![0.0]], vec![1.0]).unwrap();
        let obj = DCPair::new(ConvexFunc::zero(1), ConvexFunc::zero(1)).unwrap();
        let c = Constraint::Set { phi: constant, c: Polytope::interval(0.0, 1.0), z0: vec![0.5] };
        let p = Problem::new(obj, c, None).unwrap();
        assert!(!check_qc(&p, &[0.3], 1e-9).unwrap());
    }

    #[test]
    fn sufficiency_examples() {
        let p = interval_problem(ConvexFunc::abs(), 1.0, 3.0, None);
        let r = check_local_sufficient(&p, &[1.0], &small_schedule(), 1e-9).unwrap();
        assert_eq!(r.verdict, LocalVerdict::LocalMin);
        let p = interval_problem(ConvexFunc::affine(vec![1.0], 0.0), 1.0, 3.0, None);
        let r = check_local_sufficient(&p, &[2.0], &small_schedule(), 1e-9).unwrap();
        assert!(matches!(r.verdict, LocalVerdict::NotCertified { .. }));
    }
}
