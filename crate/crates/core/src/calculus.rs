//! DC subdifferential calculus: B-DC validation, the intersection formula
//! for `∂_ε(g - h)`, the supremum rule over a compact polytope of
//! scalarizations, the max rule, and regular coderivatives.

use rand::{RngExt, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::convex::{
    add_gap_block, coeffs_eps_subdiff_vrep, coeffs_gap, const_exprs, equate, min_value, Block, Catalog, Coeffs,
    ConvexFunc,
};
use crate::error::{check_dim, Error, Result};
use crate::geometry::Polytope;
use crate::linalg::{self, dot};
use crate::opt::{Cmp, Expr, Program};

/// Default number of uniform η grid points.
pub const ETA_POINTS: usize = 64;

/// `Φ = (u_1 - h, ..., u_m - h)` with a shared control `h`.
#[derive(Clone, Debug, PartialEq)]
pub struct VectorMap {
    pub dim: usize,
    pub components: Vec<ConvexFunc>,
    pub control: ConvexFunc,
}

/// A vector map registered in a catalog.
#[derive(Clone, Debug)]
pub struct MapCoeffs {
    pub comps: Vec<Coeffs>,
    pub h: Coeffs,
}

impl MapCoeffs {
    /// Coefficients of `<λ, Φ> + t h`.
    pub fn scalarization(&self, lambda: &[f64], t: f64) -> Coeffs {
        let mut c = Coeffs::zero(self.h.lin.len());
        let total: f64 = lambda.iter().sum();
        for (l, uj) in lambda.iter().zip(&self.comps) {
            c.add_scaled(uj, *l);
        }
        c.add_scaled(&self.h, t - total);
        c
    }
}

impl VectorMap {
    pub fn new(components: Vec<ConvexFunc>, control: ConvexFunc) -> Result<Self> {
        let dim = control.dim();
        if components.is_empty() {
            return Err(Error::InvalidInput("vector map needs a component".into()));
        }
        for c in &components {
            check_dim(dim, c.dim())?;
        }
        Ok(VectorMap { dim, components, control })
    }

    /// Affine map `x -> A x + b` with zero control.
    pub fn affine(a: Vec<Vec<f64>>, b: Vec<f64>) -> Result<Self> {
        let dim = a.first().map_or(0, |r| r.len());
        let comps = a.into_iter().zip(b).map(|(r, bi)| ConvexFunc::affine(r, bi)).collect();
        Self::new(comps, ConvexFunc::zero(dim))
    }

    pub fn out_dim(&self) -> usize {
        self.components.len()
    }

    /// `Φ(x)`; components are `+inf` outside their domains.
    pub fn eval(&self, x: &[f64]) -> Vec<f64> {
        let h = self.control.eval(x);
        self.components
            .iter()
            .map(|u| {
                let v = u.eval(x);
                if v.is_finite() {
                    v - h
                } else {
                    f64::INFINITY
                }
            })
            .collect()
    }

    pub fn eval_finite(&self, x: &[f64]) -> Result<Vec<f64>> {
        let v = self.eval(x);
        if v.iter().all(|t| t.is_finite()) {
            Ok(v)
        } else {
            Err(Error::InfiniteValue)
        }
    }

    pub fn register(&self, cat: &mut Catalog) -> Result<MapCoeffs> {
        let comps = self.components.iter().map(|u| cat.add(u)).collect::<Result<Vec<_>>>()?;
        let h = cat.add(&self.control)?;
        Ok(MapCoeffs { comps, h })
    }

    /// Evaluates `<λ, Φ>(x) + h(x)` directly from the components.
    pub fn scalarized_value(&self, lambda: &[f64], x: &[f64]) -> f64 {
        let phi = self.eval(x);
        if phi.iter().any(|v| !v.is_finite()) {
            return f64::INFINITY;
        }
        dot(lambda, &phi) + self.control.eval(x)
    }

    /// `(Φ_1 - Φ_2)`-style signed recombination `A Φ - b`, expressed with the
    /// same control; fails when a component is not representable as convex
    /// minus `h`.
    pub fn linear_image(&self, a: &[Vec<f64>], b: &[f64]) -> Result<VectorMap> {
        let mut cat = Catalog::new(self.dim);
        let mc = self.register(&mut cat)?;
        let mut comps = Vec::new();
        for (row, bi) in a.iter().zip(b) {
            let mut c = mc.scalarization(row, 1.0);
            c.cst -= bi;
            cat.check_convex(&c, 1e-12)?;
            comps.push(coeffs_to_func(&cat, &c)?);
        }
        VectorMap::new(comps, self.control.clone())
    }
}

/// Rebuilds a convex function from catalog coefficients.
pub fn coeffs_to_func(cat: &Catalog, c: &Coeffs) -> Result<ConvexFunc> {
    let mut terms = vec![ConvexFunc::affine(c.lin.clone(), c.cst)];
    for (k, t) in c.max.iter().enumerate() {
        if t.abs() > 0.0 {
            if *t < 0.0 {
                return Err(Error::NotRepresentable("negative max-affine coefficient".into()));
            }
            let pieces = cat.maxes[k]
                .iter()
                .map(|p| crate::convex::Piece::new(linalg::scale(&p.a, *t), p.b * t))
                .collect();
            terms.push(ConvexFunc::max_affine(pieces)?);
        }
    }
    let q = cat.quad_matrix(c);
    if q.iter().flatten().any(|v| *v != 0.0) {
        terms.push(ConvexFunc::quadratic(q, vec![0.0; cat.dim], 0.0)?);
    }
    for (k, d) in c.dom.iter().enumerate() {
        if *d {
            terms.push(ConvexFunc::indicator(Polytope::from_hrep(cat.domains[k].clone())));
        }
    }
    if terms.len() == 1 {
        return Ok(terms.pop().unwrap());
    }
    ConvexFunc::sum(terms)
}

/// Outcome of [`validate_bdc`].
#[derive(Clone, Debug, Serialize)]
pub struct BdcReport {
    pub pass: bool,
    /// Largest midpoint-convexity violation over vertices and grid pairs.
    pub worst_violation: f64,
    pub per_vertex: Vec<VertexCheck>,
    /// Whether every vertex scalarization is convex in the atom calculus.
    pub structural: bool,
    /// `Φ + Φ` with control `2h` passes as well.
    pub sum_closure: bool,
    /// `-Φ` passes, checked when `B = -B` and `dom Φ` is the whole space.
    pub symmetric: Option<bool>,
}

#[derive(Clone, Debug, Serialize)]
pub struct VertexCheck {
    pub lambda: Vec<f64>,
    pub violation: f64,
    pub structural: bool,
}

fn midpoint_violation(f: &dyn Fn(&[f64]) -> f64, grid: &[Vec<f64>]) -> f64 {
    let mut worst: f64 = 0.0;
    for (i, x) in grid.iter().enumerate() {
        let fx = f(x);
        if !fx.is_finite() {
            continue;
        }
        for y in &grid[i + 1..] {
            let fy = f(y);
            if !fy.is_finite() {
                continue;
            }
            let mid: Vec<f64> = x.iter().zip(y).map(|(a, b)| 0.5 * (a + b)).collect();
            let fm = f(&mid);
            let scale = 1.0 + fx.abs().max(fy.abs());
            worst = worst.max((fm - 0.5 * (fx + fy)) / scale);
        }
    }
    worst
}

/// Checks that `<λ, Φ> + h` is convex at every vertex `λ` of `B`, by
/// midpoint tests over `grid` and by the atom calculus.
pub fn validate_bdc(phi: &VectorMap, b: &Polytope, grid: &[Vec<f64>]) -> Result<BdcReport> {
    check_dim(phi.out_dim(), b.dim())?;
    let tol = 1e-9;
    let verts = b.extreme_points()?;
    let mut cat = Catalog::new(phi.dim);
    let mc = phi.register(&mut cat)?;
    let mut per_vertex = Vec::new();
    let mut worst: f64 = 0.0;
    let mut worst_doubled: f64 = 0.0;
    for l in &verts {
        let f = |x: &[f64]| phi.scalarized_value(l, x);
        let v = midpoint_violation(&f, grid);
        let doubled = |x: &[f64]| 2.0 * phi.scalarized_value(l, x);
        worst_doubled = worst_doubled.max(midpoint_violation(&doubled, grid));
        let structural = cat.check_convex(&mc.scalarization(l, 1.0), tol).is_ok();
        worst = worst.max(v);
        per_vertex.push(VertexCheck { lambda: l.clone(), violation: v, structural });
    }
    let symmetric_b = verts.iter().all(|v| verts.iter().any(|w| linalg::approx_eq(w, &linalg::scale(v, -1.0), 1e-9)));
    let whole_domain = phi.components.iter().all(|u| u.is_finite_valued()) && phi.control.is_finite_valued();
    let symmetric = (symmetric_b && whole_domain).then(|| {
        verts.iter().all(|l| {
            let neg = linalg::scale(l, -1.0);
            midpoint_violation(&|x: &[f64]| phi.scalarized_value(&neg, x), grid) <= tol
        })
    });
    let structural = per_vertex.iter().all(|v| v.structural);
    Ok(BdcReport {
        pass: worst <= tol && structural,
        worst_violation: worst,
        structural,
        per_vertex,
        sum_closure: worst_doubled <= 2.0 * tol,
        symmetric,
    })
}

/// Uniform grid over a box.
pub fn box_grid(lo: &[f64], hi: &[f64], per_axis: usize) -> Vec<Vec<f64>> {
    let n = lo.len();
    let k = per_axis.max(2);
    let mut out = vec![Vec::new()];
    for i in 0..n {
        let mut next = Vec::new();
        for p in &out {
            for j in 0..k {
                let mut q: Vec<f64> = p.clone();
                q.push(lo[i] + (hi[i] - lo[i]) * j as f64 / (k - 1) as f64);
                next.push(q);
            }
        }
        out = next;
    }
    out
}

/// How η values are chosen when a formula quantifies over all `η >= 0`.
#[derive(Clone, Debug, PartialEq)]
pub enum EtaSchedule {
    /// Breakpoints of the control plus a uniform grid on `[0, eta_max]`;
    /// `eta_max = None` uses `10 (1 + |g(x)| + |h(x)|)`.
    Auto { eta_max: Option<f64>, points: usize },
    Explicit(Vec<f64>),
}

impl Default for EtaSchedule {
    fn default() -> Self {
        EtaSchedule::Auto { eta_max: None, points: ETA_POINTS }
    }
}

/// Values `h(x) - (a_i x + b_i)` of the flattened polyhedral part of `h`,
/// where the vertex structure of `∂_η h(x)` changes.
pub fn control_breakpoints(cat: &Catalog, h: &Coeffs, x: &[f64]) -> Vec<f64> {
    let mut pieces = vec![(h.lin.clone(), h.cst)];
    for (k, t) in h.max.iter().enumerate() {
        if *t == 0.0 {
            continue;
        }
        let mut next = Vec::new();
        for (a, b) in &pieces {
            for p in &cat.maxes[k] {
                next.push((linalg::axpy(a, *t, &p.a), b + t * p.b));
            }
        }
        pieces = next;
        if pieces.len() > 5000 {
            break;
        }
    }
    let vals: Vec<f64> = pieces.iter().map(|(a, b)| dot(a, x) + b).collect();
    let m = vals.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let mut d: Vec<f64> = vals.iter().map(|v| (m - v).max(0.0)).collect();
    d.sort_by(f64::total_cmp);
    d.dedup_by(|a, b| (*a - *b).abs() <= 1e-12);
    d
}

/// Materializes an η schedule, sorted and deduplicated.
pub fn resolve_schedule(schedule: &EtaSchedule, breakpoints: &[f64], default_max: f64) -> Vec<f64> {
    let mut etas = match schedule {
        EtaSchedule::Explicit(v) => v.clone(),
        EtaSchedule::Auto { eta_max, points } => {
            let top = eta_max.unwrap_or(default_max);
            let k = (*points).max(2);
            let mut v: Vec<f64> = (0..k).map(|i| top * i as f64 / (k - 1) as f64).collect();
            v.extend(breakpoints.iter().copied().filter(|b| *b <= top));
            v.push(0.0);
            v
        }
    };
    etas.retain(|e| e.is_finite() && *e >= 0.0);
    etas.sort_by(f64::total_cmp);
    etas.dedup_by(|a, b| (*a - *b).abs() <= 1e-14);
    etas
}

/// Points of `∂_η f(x)` used to test inclusions: vertices when `f` is
/// polyhedral, otherwise boundary points along sampled directions.
/// The flag tells whether the list is exhaustive (vertices or 1-D).
pub fn test_points(cat: &Catalog, c: &Coeffs, x: &[f64], eta: f64, samples: usize, seed: u64) -> Result<(Vec<Vec<f64>>, bool)> {
    let n = cat.dim;
    if c.quad.iter().all(|t| *t == 0.0) {
        let p = coeffs_eps_subdiff_vrep(cat, c, x, eta)?;
        let verts = p.vertices()?.clone();
        let mut pts = verts.clone();
        if samples > 0 && verts.len() > 1 {
            let h = p.hrep()?.clone();
            let center = p.centroid()?;
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            for _ in 0..samples {
                let d: Vec<f64> = (0..n).map(|_| rng.random_range(-1.0..1.0)).collect();
                if let Some(t) = ray_exit(&h, &center, &d) {
                    pts.push(linalg::axpy(&center, t, &d));
                }
            }
        }
        return Ok((pts, true));
    }
    let center = some_subgradient(cat, c, x)?;
    let mut dirs: Vec<Vec<f64>> = Vec::new();
    for i in 0..n {
        dirs.push(linalg::unit(n, i));
        dirs.push(linalg::scale(&linalg::unit(n, i), -1.0));
    }
    if n > 1 {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        for _ in 0..samples {
            dirs.push((0..n).map(|_| rng.random_range(-1.0..1.0)).collect());
        }
    }
    let mut pts = Vec::new();
    for d in &dirs {
        let t = max_step(cat, c, x, &center, d, eta)?;
        pts.push(linalg::axpy(&center, t, d));
    }
    Ok((linalg::dedup_points(pts, 1e-12), n == 1))
}

/// Largest `t >= 0` with `c + t d` in the polyhedron.
fn ray_exit(h: &crate::geometry::HRep, c: &[f64], d: &[f64]) -> Option<f64> {
    let mut t = f64::INFINITY;
    for (r, b) in h.a.iter().zip(&h.b) {
        let rd = dot(r, d);
        if rd > 1e-14 {
            t = t.min((b - dot(r, c)) / rd);
        }
    }
    if h.aeq.iter().any(|r| dot(r, d).abs() > 1e-12) {
        return None;
    }
    t.is_finite().then_some(t.max(0.0))
}

/// An element of `∂f(x)`.
pub fn some_subgradient(cat: &Catalog, c: &Coeffs, x: &[f64]) -> Result<Vec<f64>> {
    let mut p = Program::new();
    let blk = Block::constant(cat, c);
    let bg = add_gap_block(&mut p, cat, &blk, x)?;
    p.minimize(bg.gap.clone());
    let (_, sol) = min_value(&p)?;
    if sol.is_empty() {
        return Err(Error::Numeric("no subgradient found".into()));
    }
    Ok(bg.slope.iter().map(|e| e.value(&sol)).collect())
}

/// `max { t : gap_f(x, c + t d) <= η }`.
fn max_step(cat: &Catalog, coeffs: &Coeffs, x: &[f64], c: &[f64], d: &[f64], eta: f64) -> Result<f64> {
    let mut p = Program::new();
    let t = p.var(0.0, 1e9);
    let blk = Block::constant(cat, coeffs);
    let bg = add_gap_block(&mut p, cat, &blk, x)?;
    let target: Vec<Expr> = (0..cat.dim)
        .map(|i| {
            let mut e = Expr::constant(c[i]);
            e.add_term(t, d[i]);
            e
        })
        .collect();
    equate(&mut p, &bg.slope, &target);
    p.constrain_rhs(bg.gap, Cmp::Le, eta);
    p.minimize(Expr::var(t).scaled(-1.0));
    let (v, _) = min_value(&p)?;
    if v <= -1e9 + 1.0 {
        return Err(Error::UnboundedSet);
    }
    Ok(if v.is_finite() { -v } else { 0.0 })
}

/// Result of [`dc_subdiff_contains`].
#[derive(Clone, Debug, Serialize)]
pub struct DcVerdict {
    pub contains: bool,
    /// First η at which the inclusion failed.
    pub failing_eta: Option<f64>,
    /// Smallest `η + ε - gap` over the tested points.
    pub margin: f64,
    /// Whether the tested points cover `∂_η h(x)` exactly.
    pub exact: bool,
    pub schedule: Vec<f64>,
    pub warnings: Vec<String>,
}

/// `x* ∈ ∂_ε(g - h)(x)` through `x* + ∂_η h(x) ⊆ ∂_{η+ε} g(x)` for all η in
/// the schedule.
pub fn dc_subdiff_contains(
    g: &ConvexFunc,
    h: &ConvexFunc,
    x: &[f64],
    s: &[f64],
    eps: f64,
    schedule: &EtaSchedule,
    tol: f64,
) -> Result<DcVerdict> {
    check_dim(g.dim(), h.dim())?;
    check_dim(g.dim(), x.len())?;
    check_dim(g.dim(), s.len())?;
    let (gx, hx) = (g.eval(x), h.eval(x));
    if !gx.is_finite() || !hx.is_finite() {
        return Err(Error::InfiniteValue);
    }
    let mut cat = Catalog::new(g.dim());
    let cg = cat.add(g)?;
    let ch = cat.add(h)?;
    let cg = pad_to(&cat, cg);
    let breaks = control_breakpoints(&cat, &ch, x);
    let etas = resolve_schedule(schedule, &breaks, 10.0 * (1.0 + gx.abs() + hx.abs()));
    let mut margin = f64::INFINITY;
    let mut exact = true;
    let mut failing = None;
    let mut per_eta = Vec::new();
    for (k, &eta) in etas.iter().enumerate() {
        let (pts, ex) = test_points(&cat, &ch, x, eta, 0, 7 + k as u64)?;
        exact &= ex;
        let mut ok = true;
        for v in &pts {
            let gap = coeffs_gap(&cat, &cg, x, &linalg::add(s, v))?;
            let m = eta + eps - gap;
            margin = margin.min(m);
            if m < -tol {
                ok = false;
            }
        }
        per_eta.push(ok);
        if !ok && failing.is_none() {
            failing = Some(eta);
        }
    }
    let mut warnings = Vec::new();
    if !exact {
        for w in per_eta.windows(3) {
            if w[0] && !w[1] && w[2] {
                warnings.push("ScheduleTooCoarse: isolated failing η between passing neighbours".into());
                break;
            }
        }
    }
    Ok(DcVerdict { contains: failing.is_none(), failing_eta: failing, margin, exact, schedule: etas, warnings })
}

pub(crate) fn pad_to(cat: &Catalog, mut c: Coeffs) -> Coeffs {
    c.max.resize(cat.maxes.len(), 0.0);
    c.quad.resize(cat.quads.len(), 0.0);
    c.dom.resize(cat.domains.len(), false);
    c
}

/// Witness of [`sup_compact_subdiff_contains`].
#[derive(Clone, Debug, Serialize)]
pub struct SupWitness {
    pub eta: f64,
    pub lambda: Vec<f64>,
    /// `ε - (η + activity gap)`.
    pub slack: f64,
}

/// `x* ∈ ∂_ε(sup_{λ∈C} <λ, Φ> + g)(x)` via the union over `η ∈ [0, ε]` and
/// `λ ∈ C_{ε-η}(x)`; decided by one joint program over the weights of the
/// vertices of `C`.
pub fn sup_compact_subdiff_contains(
    phi: &VectorMap,
    g: &ConvexFunc,
    c: &Polytope,
    x: &[f64],
    s: &[f64],
    eps: f64,
    tol: f64,
) -> Result<(bool, Option<SupWitness>)> {
    check_dim(phi.out_dim(), c.dim())?;
    check_dim(phi.dim, x.len())?;
    let fx = phi.eval_finite(x)?;
    if !g.eval(x).is_finite() {
        return Err(Error::InfiniteValue);
    }
    let verts = c.extreme_points()?;
    let mut cat = Catalog::new(phi.dim);
    let mc = phi.register(&mut cat)?;
    let cg = cat.add(g)?;
    let mut blk = Block::new(&cat);
    let mut p = Program::new();
    let theta = p.vars(verts.len(), 0.0, f64::INFINITY);
    let mut sum = Expr::new();
    let sup = verts.iter().map(|v| dot(v, &fx)).fold(f64::NEG_INFINITY, f64::max);
    let mut activity = Expr::new();
    for (th, v) in theta.iter().zip(&verts) {
        let mut k = mc.scalarization(v, 0.0);
        k.add_scaled(&cg, 1.0);
        let k = pad_to(&cat, k);
        cat.check_convex(&k, 1e-9).map_err(|e| Error::ValidationFailed(format!("<λ,Φ>+g at vertex {v:?}: {e}")))?;
        blk.add(&k, &Expr::var(*th));
        sum.add_term(*th, 1.0);
        activity.add_term(*th, sup - dot(v, &fx));
    }
    p.constrain_rhs(sum, Cmp::Eq, 1.0);
    let bg = add_gap_block(&mut p, &cat, &blk, x)?;
    equate(&mut p, &bg.slope, &const_exprs(s));
    let mut obj = bg.gap.clone();
    obj.add_scaled(&activity, 1.0);
    p.minimize(obj);
    let (val, sol) = min_value(&p)?;
    if !val.is_finite() || val > eps + tol {
        return Ok((false, None));
    }
    let mut lambda = vec![0.0; c.dim()];
    for (th, v) in theta.iter().zip(&verts) {
        lambda = linalg::axpy(&lambda, sol[th.0], v);
    }
    let eta = bg.gap.value(&sol).max(0.0);
    Ok((true, Some(SupWitness { eta, lambda, slack: eps - val })))
}

/// The ε-active face `C_ε(x)`.
#[derive(Clone, Debug)]
pub struct ActiveSet {
    pub base: Polytope,
    pub x: Vec<f64>,
    pub eps: f64,
    pub face: Polytope,
}

pub fn active_index_face(c: &Polytope, phi: &VectorMap, x: &[f64], eps: f64) -> Result<ActiveSet> {
    check_dim(phi.out_dim(), c.dim())?;
    let fx = phi.eval_finite(x)?;
    let s = c.support(&fx)?;
    let face = c.intersect_rows(&[(linalg::scale(&fx, -1.0), eps - s)], &[])?;
    let face = crate::geometry::convert(&face)?;
    Ok(ActiveSet { base: c.clone(), x: x.to_vec(), eps, face })
}

/// Witness of [`max_rule_contains`].
#[derive(Clone, Debug, Serialize)]
pub struct MaxWitness {
    pub alpha: [f64; 2],
    pub eta1: f64,
    pub eta0: f64,
    pub slack: f64,
}

/// `x* ∈ ∂_η max(ψ1, ψ2)(x)` via the union of `α1 ∂_{η1}ψ1 + α2 ∂_{η0}ψ2`
/// under `α1(η1 + ψ(x) - ψ1(x)) + α2(η0 + ψ(x) - ψ2(x)) <= η`.
pub fn max_rule_contains(
    psi1: &ConvexFunc,
    psi2: &ConvexFunc,
    x: &[f64],
    s: &[f64],
    eta: f64,
    tol: f64,
) -> Result<(bool, Option<MaxWitness>)> {
    check_dim(psi1.dim(), psi2.dim())?;
    check_dim(psi1.dim(), x.len())?;
    let (v1, v2) = (psi1.eval(x), psi2.eval(x));
    if !v1.is_finite() || !v2.is_finite() {
        return Err(Error::InfiniteValue);
    }
    let psi = v1.max(v2);
    let mut cat = Catalog::new(psi1.dim());
    let c1 = cat.add(psi1)?;
    let c2 = cat.add(psi2)?;
    let (c1, c2) = (pad_to(&cat, c1), pad_to(&cat, c2));
    let mut p = Program::new();
    let a1 = p.nonneg();
    let a2 = p.nonneg();
    let mut sum = Expr::var(a1);
    sum.add_term(a2, 1.0);
    p.constrain_rhs(sum, Cmp::Eq, 1.0);
    let mut b1 = Block::new(&cat);
    b1.add(&c1, &Expr::var(a1));
    let mut b2 = Block::new(&cat);
    b2.add(&c2, &Expr::var(a2));
    let g1 = add_gap_block(&mut p, &cat, &b1, x)?;
    let g2 = add_gap_block(&mut p, &cat, &b2, x)?;
    let total: Vec<Expr> = g1
        .slope
        .iter()
        .zip(&g2.slope)
        .map(|(a, b)| {
            let mut e = a.clone();
            e.add_scaled(b, 1.0);
            e
        })
        .collect();
    equate(&mut p, &total, &const_exprs(s));
    let mut obj = g1.gap.clone();
    obj.add_scaled(&g2.gap, 1.0);
    obj.add_term(a1, psi - v1);
    obj.add_term(a2, psi - v2);
    p.minimize(obj);
    let (val, sol) = min_value(&p)?;
    if !val.is_finite() || val > eta + tol {
        return Ok((false, None));
    }
    let (al1, al2) = (sol[a1.0], sol[a2.0]);
    let per = |gap: f64, a: f64| if a > 1e-12 { gap.max(0.0) / a } else { 0.0 };
    Ok((
        true,
        Some(MaxWitness {
            alpha: [al1, al2],
            eta1: per(g1.gap.value(&sol), al1),
            eta0: per(g2.gap.value(&sol), al2),
            slack: eta - val,
        }),
    ))
}

/// Vertices of `∂f(x)` for `f` = quadratic + polyhedral part, finite near `x`.
pub fn subdiff_vertices(cat: &Catalog, c: &Coeffs, x: &[f64]) -> Result<Vec<Vec<f64>>> {
    let mut poly = c.clone();
    let q = cat.quad_matrix(c);
    poly.quad.iter_mut().for_each(|t| *t = 0.0);
    let shift = linalg::mat_vec(&q, x);
    let p = coeffs_eps_subdiff_vrep(cat, &poly, x, 0.0)?;
    Ok(p.vertices()?.iter().map(|v| linalg::add(v, &shift)).collect())
}

/// Splits signed coefficients into convex parts `G - H`.
pub fn split_signed(c: &Coeffs) -> (Coeffs, Coeffs) {
    let mut g = c.clone();
    let mut h = Coeffs::zero(c.lin.len());
    h.max = vec![0.0; c.max.len()];
    h.quad = vec![0.0; c.quad.len()];
    h.dom = vec![false; c.dom.len()];
    for (k, t) in c.max.iter().enumerate() {
        if *t < 0.0 {
            g.max[k] = 0.0;
            h.max[k] = -t;
        }
    }
    for (k, t) in c.quad.iter().enumerate() {
        if *t < 0.0 {
            g.quad[k] = 0.0;
            h.quad[k] = -t;
        }
    }
    (g, h)
}

/// `s ∈ ∂̂(G - H)(x)` for catalog coefficients: `s + ∂H(x) ⊆ ∂G(x)`, exact
/// when `H` is quadratic plus polyhedral.
pub fn regular_subdiff_signed(cat: &Catalog, c: &Coeffs, x: &[f64], s: &[f64], tol: f64) -> Result<bool> {
    let (g, h) = split_signed(c);
    let hv = subdiff_vertices(cat, &h, x)?;
    for v in &hv {
        if coeffs_gap(cat, &g, x, &linalg::add(s, v))? > tol {
            return Ok(false);
        }
    }
    Ok(true)
}

/// `x* ∈ D̂*Φ(x)(λ) = ∂̂(<λ, Φ>)(x)`.
pub fn coderivative_contains(phi: &VectorMap, x: &[f64], lambda: &[f64], s: &[f64], tol: f64) -> Result<bool> {
    check_dim(phi.out_dim(), lambda.len())?;
    check_dim(phi.dim, x.len())?;
    phi.eval_finite(x)?;
    let mut cat = Catalog::new(phi.dim);
    let mc = phi.register(&mut cat)?;
    let c = pad_to(&cat, mc.scalarization(lambda, 0.0));
    regular_subdiff_signed(&cat, &c, x, s, tol)
}

/// Random points in a box, for sampling-based checks.
pub fn sample_box(lo: &[f64], hi: &[f64], count: usize, seed: u64) -> Vec<Vec<f64>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..count)
        .map(|_| lo.iter().zip(hi).map(|(a, b)| if b > a { rng.random_range(*a..*b) } else { *a }).collect())
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::convex::Piece;

    fn x_minus_x() -> VectorMap {
        VectorMap::affine(vec![vec![1.0], vec![-1.0]], vec![0.0, 0.0]).unwrap()
    }

    #[test]
    fn bdc_examples() {
        let grid = box_grid(&[-2.0], &[2.0], 41);
        let phi = VectorMap::new(vec![ConvexFunc::square(1.0)], ConvexFunc::abs()).unwrap();
        // λ = -1 gives -x² + 2|x|, which is not convex; [0, 1] is fine
        let r = validate_bdc(&phi, &Polytope::interval(-1.0, 1.0), &grid).unwrap();
        assert!(!r.pass);
        let r = validate_bdc(&phi, &Polytope::interval(0.0, 1.0), &grid).unwrap();
        assert!(r.pass, "{r:?}");
        let neg = VectorMap::new(vec![ConvexFunc::zero(1)], ConvexFunc::square(1.0)).unwrap();
        let r = validate_bdc(&neg, &Polytope::from_vertices(1, vec![vec![1.0]]).unwrap(), &grid);
        // Φ = 0 - x² with control x²: <1, Φ> + h = 0, convex; the concave case needs h = 0
        assert!(r.unwrap().pass);
        let conc = VectorMap::new(vec![ConvexFunc::zero(1)], ConvexFunc::zero(1)).unwrap();
        assert!(validate_bdc(&conc, &Polytope::interval(-3.0, 3.0), &grid).unwrap().pass);
    }

    #[test]
    fn dc_formula_examples() {
        let sched = EtaSchedule::default();
        let x2 = ConvexFunc::square(1.0);
        let abs = ConvexFunc::abs();
        let z = ConvexFunc::zero(1);
        assert!(!dc_subdiff_contains(&x2, &abs, &[0.0], &[0.0], 0.0, &sched, 1e-9).unwrap().contains);
        assert!(dc_subdiff_contains(&x2, &z, &[1.0], &[2.0], 0.0, &sched, 1e-9).unwrap().contains);
        assert!(dc_subdiff_contains(&abs, &abs, &[1.0], &[0.0], 0.0, &sched, 1e-9).unwrap().contains);
    }

    #[test]
    fn sup_rule_examples() {
        let simplex = Polytope::simplex(2);
        let g = ConvexFunc::zero(1);
        let (ok, w) = sup_compact_subdiff_contains(&x_minus_x(), &g, &simplex, &[0.0], &[1.0], 0.0, 1e-9).unwrap();
        assert!(ok);
        assert!(linalg::approx_eq(&w.unwrap().lambda, &[1.0, 0.0], 1e-9));
        let (ok, w) = sup_compact_subdiff_contains(&x_minus_x(), &g, &simplex, &[1.0], &[1.0], 0.0, 1e-9).unwrap();
        assert!(ok && linalg::approx_eq(&w.unwrap().lambda, &[1.0, 0.0], 1e-9));
        let (ok, _) = sup_compact_subdiff_contains(&x_minus_x(), &g, &simplex, &[1.0], &[-1.0], 0.0, 1e-9).unwrap();
        assert!(!ok);
    }

    #[test]
    fn active_face_examples() {
        let simplex = Polytope::simplex(2);
        let f = active_index_face(&simplex, &x_minus_x(), &[0.0], 0.0).unwrap();
        assert_eq!(f.face.vertices().unwrap().len(), 2);
        let f = active_index_face(&simplex, &x_minus_x(), &[1.0], 0.0).unwrap();
        let v = f.face.vertices().unwrap();
        assert_eq!(v.len(), 1);
        assert!(linalg::approx_eq(&v[0], &[1.0, 0.0], 1e-9));
        let f = active_index_face(&simplex, &x_minus_x(), &[1.0], 2.0).unwrap();
        assert_eq!(f.face.vertices().unwrap().len(), 2);
    }

    #[test]
    fn max_rule_examples() {
        let x = ConvexFunc::affine(vec![1.0], 0.0);
        let mx = ConvexFunc::affine(vec![-1.0], 0.0);
        let (ok, w) = max_rule_contains(&x, &mx, &[0.0], &[0.0], 0.0, 1e-9).unwrap();
        assert!(ok);
        let w = w.unwrap();
        assert!((w.alpha[0] - 0.5).abs() < 1e-9);
        assert!(!max_rule_contains(&x, &mx, &[0.0], &[1.5], 0.0, 1e-9).unwrap().0);
        let xm1 = ConvexFunc::affine(vec![1.0], -1.0);
        let (ok, w) = max_rule_contains(&x, &xm1, &[0.0], &[1.0], 0.0, 1e-9).unwrap();
        assert!(ok);
        assert!((w.unwrap().alpha[0] - 1.0).abs() < 1e-9);
    }

    #[test]
    fn coderivative_examples() {
        let id = VectorMap::affine(vec![vec![1.0]], vec![0.0]).unwrap();
        assert!(coderivative_contains(&id, &[0.0], &[3.0], &[3.0], 1e-9).unwrap());
        assert!(!coderivative_contains(&id, &[0.0], &[3.0], &[2.0], 1e-9).unwrap());
        let m = VectorMap::new(vec![ConvexFunc::affine(vec![1.0], 0.0), ConvexFunc::square(1.0)], ConvexFunc::zero(1)).unwrap();
        assert!(coderivative_contains(&m, &[1.0], &[1.0, 1.0], &[3.0], 1e-9).unwrap());
        // -|x| has no regular subgradient at 0
        let a = VectorMap::new(vec![ConvexFunc::abs()], ConvexFunc::zero(1)).unwrap();
        assert!(!coderivative_contains(&a, &[0.0], &[-1.0], &[0.0], 1e-9).unwrap());
        let kink = ConvexFunc::max_affine(vec![Piece::new(vec![1.0], 0.0), Piece::new(vec![2.0], -1.0)]).unwrap();
        let k = VectorMap::new(vec![kink], ConvexFunc::zero(1)).unwrap();
        assert!(coderivative_contains(&k, &[1.0], &[1.0], &[1.5], 1e-9).unwrap());
    }
}
