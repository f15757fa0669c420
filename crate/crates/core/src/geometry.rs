//! Polytopes, polyhedral cones and the convex-analytic operations on them.
//!
//! A [`Polytope`] keeps whichever representation it was built from and derives
//! the other one on demand. H-to-V conversion enumerates `d`-subsets of the
//! constraint rows inside the affine hull, V-to-H enumerates hyperplanes
//! through `d`-subsets of points; both are fine for the small dimensions used
//! here (n <= 6, a few thousand candidates).

use std::sync::OnceLock;

use crate::error::{check_dim, Error, Result};
use crate::linalg::{self, dot, Mat};
use crate::opt::{Cmp, Expr, Outcome, Program};

/// Feasibility tolerance used by the conversions.
pub const GEOM_TOL: f64 = 1e-9;

/// Upper bound on the number of candidate subsets in an enumeration.
pub const MAX_SUBSETS: u128 = 5_000_000;

/// `A x <= b`, `Aeq x = beq`.
#[derive(Clone, Debug, PartialEq)]
pub struct HRep {
    pub dim: usize,
    pub a: Mat,
    pub b: Vec<f64>,
    pub aeq: Mat,
    pub beq: Vec<f64>,
}

impl HRep {
    pub fn new(dim: usize, a: Mat, b: Vec<f64>) -> Result<Self> {
        Self::with_eq(dim, a, b, Vec::new(), Vec::new())
    }

    pub fn with_eq(dim: usize, a: Mat, b: Vec<f64>, aeq: Mat, beq: Vec<f64>) -> Result<Self> {
        check_dim(a.len(), b.len())?;
        check_dim(aeq.len(), beq.len())?;
        for row in a.iter().chain(aeq.iter()) {
            check_dim(dim, row.len())?;
        }
        if a.iter().flatten().chain(b.iter()).chain(aeq.iter().flatten()).chain(beq.iter()).any(|v| !v.is_finite()) {
            return Err(Error::InvalidInput("non-finite entry in H-representation".into()));
        }
        Ok(HRep { dim, a, b, aeq, beq })
    }

    /// The box `lo <= x <= hi`.
    pub fn boxed(lo: &[f64], hi: &[f64]) -> Self {
        let n = lo.len();
        let mut a = Vec::new();
        let mut b = Vec::new();
        for i in 0..n {
            a.push(linalg::unit(n, i));
            b.push(hi[i]);
            a.push(linalg::scale(&linalg::unit(n, i), -1.0));
            b.push(-lo[i]);
        }
        HRep { dim: n, a, b, aeq: Vec::new(), beq: Vec::new() }
    }

    pub fn add_row(&mut self, row: Vec<f64>, rhs: f64) {
        self.a.push(row);
        self.b.push(rhs);
    }

    pub fn add_eq(&mut self, row: Vec<f64>, rhs: f64) {
        self.aeq.push(row);
        self.beq.push(rhs);
    }

    /// Largest constraint violation at `x` (0 when feasible).
    pub fn violation(&self, x: &[f64]) -> f64 {
        let ineq = self.a.iter().zip(&self.b).map(|(r, b)| dot(r, x) - b).fold(0.0, f64::max);
        let eq = self.aeq.iter().zip(&self.beq).map(|(r, b)| (dot(r, x) - b).abs()).fold(0.0, f64::max);
        ineq.max(eq)
    }

    pub fn contains(&self, x: &[f64], tol: f64) -> bool {
        self.violation(x) <= tol
    }

    /// Adds the rows as constraints on `x` to a program.
    pub fn constrain(&self, p: &mut Program, x: &[crate::opt::Var]) {
        for (row, &rhs) in self.a.iter().zip(&self.b) {
            p.constrain_rhs(lin(x, row), Cmp::Le, rhs);
        }
        for (row, &rhs) in self.aeq.iter().zip(&self.beq) {
            p.constrain_rhs(lin(x, row), Cmp::Eq, rhs);
        }
    }

    /// Maximizes `<s, x>` over the set. `None` when infeasible.
    pub fn support(&self, s: &[f64]) -> Option<f64> {
        let mut p = Program::new();
        let x: Vec<_> = (0..self.dim).map(|_| p.free()).collect();
        self.constrain(&mut p, &x);
        p.minimize(lin(&x, s).scaled(-1.0));
        match p.solve() {
            Outcome::Optimal { objective, .. } => Some(-objective),
            Outcome::Unbounded => Some(f64::INFINITY),
            _ => None,
        }
    }

    /// Some point of the set, or `None` when empty.
    pub fn feasible_point(&self) -> Option<Vec<f64>> {
        let mut p = Program::new();
        let x: Vec<_> = (0..self.dim).map(|_| p.free()).collect();
        self.constrain(&mut p, &x);
        match p.solve() {
            Outcome::Optimal { x: sol, .. } => Some(x.iter().map(|v| sol[v.0]).collect()),
            Outcome::Unbounded => Some(vec![0.0; self.dim]),
            _ => None,
        }
    }

    /// A point maximizing the minimal slack over the inequality rows
    /// (normalized), inside the equality rows. Returns `(point, radius)`.
    pub fn chebyshev_center(&self) -> Option<(Vec<f64>, f64)> {
        let mut p = Program::new();
        let x: Vec<_> = (0..self.dim).map(|_| p.free()).collect();
        let r = p.var(0.0, 1e6);
        for (row, &rhs) in self.a.iter().zip(&self.b) {
            let nr = linalg::norm2(row);
            let mut e = lin(&x, row);
            e.add_term(r, nr);
            p.constrain_rhs(e, Cmp::Le, rhs);
        }
        for (row, &rhs) in self.aeq.iter().zip(&self.beq) {
            p.constrain_rhs(lin(&x, row), Cmp::Eq, rhs);
        }
        p.minimize(Expr::var(r).scaled(-1.0));
        match p.solve() {
            Outcome::Optimal { x: sol, .. } => Some((x.iter().map(|v| sol[v.0]).collect(), sol[r.0])),
            _ => None,
        }
    }
}

pub(crate) fn lin(x: &[crate::opt::Var], c: &[f64]) -> Expr {
    let mut e = Expr::new();
    for (v, &ci) in x.iter().zip(c) {
        e.add_term(*v, ci);
    }
    e
}

/// Which representation a polytope was constructed from.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Source {
    H,
    V,
}

/// A bounded convex polyhedron in R^n.
#[derive(Clone, Debug)]
pub struct Polytope {
    dim: usize,
    source: Source,
    h: OnceLock<HRep>,
    v: OnceLock<Vec<Vec<f64>>>,
}

impl PartialEq for Polytope {
    fn eq(&self, other: &Self) -> bool {
        self.dim == other.dim && self.source == other.source && match self.source {
            Source::H => self.h.get() == other.h.get(),
            Source::V => self.v.get() == other.v.get(),
        }
    }
}

impl Polytope {
    /// Builds from an H-representation. Boundedness is checked lazily.
    pub fn from_hrep(h: HRep) -> Self {
        let p = Polytope { dim: h.dim, source: Source::H, h: OnceLock::new(), v: OnceLock::new() };
        let _ = p.h.set(h);
        p
    }

    pub fn from_vertices(dim: usize, points: Vec<Vec<f64>>) -> Result<Self> {
        for pt in &points {
            check_dim(dim, pt.len())?;
            if pt.iter().any(|v| !v.is_finite()) {
                return Err(Error::InvalidInput("non-finite vertex".into()));
            }
        }
        if points.is_empty() {
            return Err(Error::EmptySet);
        }
        let p = Polytope { dim, source: Source::V, h: OnceLock::new(), v: OnceLock::new() };
        let _ = p.v.set(points);
        Ok(p)
    }

    pub fn boxed(lo: &[f64], hi: &[f64]) -> Self {
        Self::from_hrep(HRep::boxed(lo, hi))
    }

    /// The interval `[lo, hi]` in R^1.
    pub fn interval(lo: f64, hi: f64) -> Self {
        Self::boxed(&[lo], &[hi])
    }

    /// Standard simplex in R^m.
    pub fn simplex(m: usize) -> Self {
        let mut h = HRep { dim: m, a: Vec::new(), b: Vec::new(), aeq: vec![vec![1.0; m]], beq: vec![1.0] };
        for i in 0..m {
            h.add_row(linalg::scale(&linalg::unit(m, i), -1.0), 0.0);
        }
        Self::from_hrep(h)
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn source(&self) -> Source {
        self.source
    }

    /// The H-representation, computing it from the vertices if needed.
    pub fn hrep(&self) -> Result<&HRep> {
        if let Some(h) = self.h.get() {
            return Ok(h);
        }
        let h = vrep_to_hrep(self.dim, self.v.get().expect("one representation is set"))?;
        Ok(self.h.get_or_init(|| h))
    }

    /// The vertices in lexicographic order.
    pub fn vertices(&self) -> Result<&Vec<Vec<f64>>> {
        if let Some(v) = self.v.get() {
            return Ok(v);
        }
        let v = hrep_to_vrep(self.h.get().expect("one representation is set"))?;
        Ok(self.v.get_or_init(|| v))
    }

    /// Vertices after removing points that are not extreme.
    pub fn extreme_points(&self) -> Result<Vec<Vec<f64>>> {
        match self.source {
            Source::H => Ok(self.vertices()?.clone()),
            Source::V => Ok(prune_to_extreme(self.vertices()?)),
        }
    }

    pub fn contains(&self, x: &[f64], tol: f64) -> Result<bool> {
        check_dim(self.dim, x.len())?;
        if let Some(h) = self.h.get() {
            return Ok(h.contains(x, tol));
        }
        Ok(in_convex_hull(self.vertices()?, x, tol))
    }

    /// `sigma_P(s) = max_{x in P} <s, x>`.
    pub fn support(&self, s: &[f64]) -> Result<f64> {
        check_dim(self.dim, s.len())?;
        if let Some(v) = self.v.get() {
            return Ok(v.iter().map(|p| dot(p, s)).fold(f64::NEG_INFINITY, f64::max));
        }
        match self.hrep()?.support(s) {
            Some(val) if val.is_finite() => Ok(val),
            Some(_) => Err(Error::UnboundedSet),
            None => Ok(f64::NEG_INFINITY),
        }
    }

    /// Intersection with extra rows, as an H-polytope.
    pub fn intersect_rows(&self, rows: &[(Vec<f64>, f64)], eqs: &[(Vec<f64>, f64)]) -> Result<Polytope> {
        let mut h = self.hrep()?.clone();
        for (r, b) in rows {
            h.add_row(r.clone(), *b);
        }
        for (r, b) in eqs {
            h.add_eq(r.clone(), *b);
        }
        Ok(Polytope::from_hrep(h))
    }

    /// Image under `x -> x + t`.
    pub fn translate(&self, t: &[f64]) -> Result<Polytope> {
        let v: Vec<_> = self.vertices()?.iter().map(|p| linalg::add(p, t)).collect();
        Polytope::from_vertices(self.dim, v)
    }

    pub fn centroid(&self) -> Result<Vec<f64>> {
        let v = self.vertices()?;
        if v.is_empty() {
            return Err(Error::EmptySet);
        }
        let mut c = vec![0.0; self.dim];
        for p in v {
            for (ci, pi) in c.iter_mut().zip(p) {
                *ci += pi / v.len() as f64;
            }
        }
        Ok(c)
    }

    /// Whether the vertex set equals that of another polytope up to `tol`.
    pub fn same_set(&self, other: &Polytope, tol: f64) -> Result<bool> {
        let a = self.extreme_points()?;
        let b = other.extreme_points()?;
        Ok(a.iter().all(|p| other.contains(p, tol).unwrap_or(false))
            && b.iter().all(|p| self.contains(p, tol).unwrap_or(false)))
    }
}

/// Returns a copy with both representations populated. V-sourced vertices
/// are pruned to extreme points first.
pub fn convert(p: &Polytope) -> Result<Polytope> {
    let verts = p.extreme_points()?;
    if verts.is_empty() {
        return Err(Error::EmptySet);
    }
    let h = p.hrep()?.clone();
    let out = Polytope { dim: p.dim, source: p.source, h: OnceLock::new(), v: OnceLock::new() };
    let _ = out.h.set(h);
    let _ = out.v.set(verts);
    Ok(out)
}

/// Calls `f` on every `k`-subset of `0..m` in lexicographic order.
pub(crate) fn for_each_subset(m: usize, k: usize, mut f: impl FnMut(&[usize])) {
    if k > m {
        return;
    }
    let mut idx: Vec<usize> = (0..k).collect();
    loop {
        f(&idx);
        let mut i = k;
        loop {
            if i == 0 {
                return;
            }
            i -= 1;
            if idx[i] != i + m - k {
                break;
            }
            if i == 0 {
                return;
            }
        }
        if idx[i] == i + m - k {
            return;
        }
        idx[i] += 1;
        for j in i + 1..k {
            idx[j] = idx[j - 1] + 1;
        }
    }
}

fn binomial(m: usize, k: usize) -> u128 {
    if k > m {
        return 0;
    }
    let k = k.min(m - k);
    let mut r: u128 = 1;
    for i in 0..k {
        r = r * (m - i) as u128 / (i + 1) as u128;
    }
    r
}

/// Vertex enumeration.
pub fn hrep_to_vrep(h: &HRep) -> Result<Vec<Vec<f64>>> {
    let n = h.dim;
    let scale = 1.0 + h.b.iter().chain(&h.beq).fold(0.0f64, |m, v| m.max(v.abs()));
    let tol = GEOM_TOL * scale;
    let x0 = h.feasible_point().ok_or(Error::EmptySet)?;

    // implicit equalities
    let mut eq_rows: Vec<Vec<f64>> = h.aeq.clone();
    let mut ineq: Vec<(Vec<f64>, f64)> = Vec::new();
    for (row, &b) in h.a.iter().zip(&h.b) {
        if linalg::norm_inf(row) <= 1e-14 {
            continue;
        }
        let mut p = Program::new();
        let x: Vec<_> = (0..n).map(|_| p.free()).collect();
        h.constrain(&mut p, &x);
        p.minimize(lin(&x, row));
        let tight = match p.solve() {
            Outcome::Optimal { objective, .. } => objective >= b - tol,
            _ => false,
        };
        if tight {
            eq_rows.push(row.clone());
        } else {
            ineq.push((row.clone(), b));
        }
    }
    let basis = linalg::null_space(&eq_rows, n, 1e-12);
    let d = basis.len();
    if d == 0 {
        return Ok(vec![x0]);
    }
    // reduced rows in y-coordinates: x = x0 + sum y_k basis_k
    let mut red: Vec<(Vec<f64>, f64)> = Vec::new();
    for (row, b) in &ineq {
        let r: Vec<f64> = basis.iter().map(|v| dot(row, v)).collect();
        if linalg::norm_inf(&r) <= 1e-12 {
            continue;
        }
        red.push((r, b - dot(row, &x0)));
    }
    // boundedness along every reduced coordinate
    for k in 0..d {
        for sgn in [1.0, -1.0] {
            let mut p = Program::new();
            let y: Vec<_> = (0..d).map(|_| p.free()).collect();
            for (r, b) in &red {
                p.constrain_rhs(lin(&y, r), Cmp::Le, *b);
            }
            p.minimize(Expr::var(y[k]).scaled(-sgn));
            match p.solve() {
                Outcome::Optimal { .. } => {}
                Outcome::Unbounded => return Err(Error::UnboundedSet),
                Outcome::Infeasible => return Err(Error::EmptySet),
                Outcome::Failed(e) => return Err(Error::Numeric(e)),
            }
        }
    }
    let count = binomial(red.len(), d);
    if count > MAX_SUBSETS {
        return Err(Error::TooLarge(count));
    }
    let mut verts: Vec<Vec<f64>> = Vec::new();
    for_each_subset(red.len(), d, |idx| {
        let m: Mat = idx.iter().map(|&i| red[i].0.clone()).collect();
        let rhs: Vec<f64> = idx.iter().map(|&i| red[i].1).collect();
        if let Some(y) = linalg::solve(&m, &rhs) {
            if red.iter().all(|(r, b)| dot(r, &y) <= b + tol) {
                let mut x = x0.clone();
                for (yk, v) in y.iter().zip(&basis) {
                    x = linalg::axpy(&x, *yk, v);
                }
                if !verts.iter().any(|q| linalg::approx_eq(q, &x, 1e3 * tol)) {
                    verts.push(x);
                }
            }
        }
    });
    verts.sort_by(|a, b| linalg::lex_cmp(a, b));
    Ok(verts)
}

/// Facet enumeration.
pub fn vrep_to_hrep(dim: usize, points: &[Vec<f64>]) -> Result<HRep> {
    if points.is_empty() {
        return Err(Error::EmptySet);
    }
    let n = dim;
    let pts = linalg::dedup_points(points.to_vec(), 1e-12);
    let mut x0 = vec![0.0; n];
    for p in &pts {
        for (c, v) in x0.iter_mut().zip(p) {
            *c += v / pts.len() as f64;
        }
    }
    let diffs: Vec<Vec<f64>> = pts.iter().map(|p| linalg::sub(p, &x0)).collect();
    let span = linalg::row_space(&diffs, n, 1e-12);
    let normals = linalg::null_space(&span, n, 1e-12);
    let mut h = HRep { dim: n, a: Vec::new(), b: Vec::new(), aeq: Vec::new(), beq: Vec::new() };
    for w in &normals {
        h.add_eq(w.clone(), dot(w, &x0));
    }
    let d = span.len();
    if d == 0 {
        return Ok(h);
    }
    let ys: Vec<Vec<f64>> = diffs.iter().map(|p| span.iter().map(|b| dot(b, p)).collect()).collect();
    let scale = 1.0 + ys.iter().flatten().fold(0.0f64, |m, v| m.max(v.abs()));
    let tol = GEOM_TOL * scale;
    let mut facets: Vec<(Vec<f64>, f64)> = Vec::new();
    let mut push = |c: Vec<f64>, off: f64| {
        let nc = linalg::norm2(&c);
        let c = linalg::scale(&c, 1.0 / nc);
        let off = off / nc;
        if !facets.iter().any(|(c2, o2)| linalg::approx_eq(c2, &c, 1e-9) && (o2 - off).abs() <= 1e-9 * scale) {
            facets.push((c, off));
        }
    };
    if d == 1 {
        let lo = ys.iter().map(|y| y[0]).fold(f64::INFINITY, f64::min);
        let hi = ys.iter().map(|y| y[0]).fold(f64::NEG_INFINITY, f64::max);
        push(vec![1.0], hi);
        push(vec![-1.0], -lo);
    } else {
        let count = binomial(ys.len(), d);
        if count > MAX_SUBSETS {
            return Err(Error::TooLarge(count));
        }
        for_each_subset(ys.len(), d, |idx| {
            let base = &ys[idx[0]];
            let m: Vec<Vec<f64>> = idx[1..].iter().map(|&i| linalg::sub(&ys[i], base)).collect();
            let ns = linalg::null_space(&m, d, 1e-12);
            if ns.len() != 1 {
                return;
            }
            let mut c = ns[0].clone();
            let mut off = dot(&c, base);
            let vals: Vec<f64> = ys.iter().map(|y| dot(&c, y) - off).collect();
            let above = vals.iter().any(|v| *v > tol);
            let below = vals.iter().any(|v| *v < -tol);
            if above && below {
                return;
            }
            if above {
                c = linalg::scale(&c, -1.0);
                off = -off;
            }
            push(c, off);
        });
    }
    for (c, off) in facets {
        let a: Vec<f64> = (0..n).map(|i| span.iter().zip(&c).map(|(b, ck)| b[i] * ck).sum()).collect();
        let rhs = off + dot(&a, &x0);
        h.add_row(a, rhs);
    }
    Ok(h)
}

/// Whether `x` lies in the convex hull of `points` (LP feasibility).
pub fn in_convex_hull(points: &[Vec<f64>], x: &[f64], tol: f64) -> bool {
    if points.is_empty() {
        return false;
    }
    let n = x.len();
    let mut p = Program::new();
    let w = p.vars(points.len(), 0.0, f64::INFINITY);
    let mut sum = Expr::new();
    for &wi in &w {
        sum.add_term(wi, 1.0);
    }
    p.constrain_rhs(sum, Cmp::Eq, 1.0);
    // slack in the infinity norm
    let t = p.nonneg();
    for k in 0..n {
        let mut e = Expr::new();
        for (wi, pt) in w.iter().zip(points) {
            e.add_term(*wi, pt[k]);
        }
        e.add_const(-x[k]);
        let mut up = e.clone();
        up.add_term(t, -1.0);
        p.constrain(up, Cmp::Le);
        let mut dn = e;
        dn.add_term(t, 1.0);
        p.constrain(dn, Cmp::Ge);
    }
    p.minimize(Expr::var(t));
    matches!(p.solve(), Outcome::Optimal { objective, .. } if objective <= tol)
}

/// Drops points lying in the convex hull of the others.
pub fn prune_to_extreme(points: &[Vec<f64>]) -> Vec<Vec<f64>> {
    let pts = linalg::dedup_points(points.to_vec(), 1e-12);
    let mut keep = pts.clone();
    let mut i = 0;
    while i < keep.len() {
        let others: Vec<Vec<f64>> = keep.iter().enumerate().filter(|(j, _)| *j != i).map(|(_, p)| p.clone()).collect();
        if !others.is_empty() && in_convex_hull(&others, &keep[i], 1e-10) {
            keep.remove(i);
        } else {
            i += 1;
        }
    }
    keep.sort_by(|a, b| linalg::lex_cmp(a, b));
    keep
}

/// Whether `s + B` is contained in `A`.
pub fn minkowski_diff_contains(a: &Polytope, b: &Polytope, s: &[f64], tol: f64) -> Result<bool> {
    check_dim(a.dim(), b.dim())?;
    for v in b.vertices()? {
        if !a.contains(&linalg::add(s, v), tol)? {
            return Ok(false);
        }
    }
    Ok(true)
}

/// The dual slope `(C - z0)° = {l : <l, c - z0> <= 1 for all c in C}`.
///
/// Requires `z0` interior to `C` so that the result is bounded.
pub fn dual_slope(c: &Polytope, z0: &[f64]) -> Result<Polytope> {
    check_dim(c.dim(), z0.len())?;
    let h = c.hrep()?;
    let slack_ok = h.a.iter().zip(&h.b).all(|(r, b)| dot(r, z0) < b - GEOM_TOL * (1.0 + b.abs()));
    if !h.aeq.is_empty() || !slack_ok {
        return Err(Error::NotInterior("z0 must lie in the interior of C".into()));
    }
    let mut out = HRep { dim: c.dim(), a: Vec::new(), b: Vec::new(), aeq: Vec::new(), beq: Vec::new() };
    for v in c.vertices()? {
        out.add_row(linalg::sub(v, z0), 1.0);
    }
    Ok(Polytope::from_hrep(out))
}

/// Whether `s` belongs to the eps-normal set
/// `{s : <s, y - x> <= eps for all y in P}`.
pub fn eps_normal_set_contains(p: &Polytope, x: &[f64], s: &[f64], eps: f64, tol: f64) -> Result<bool> {
    check_dim(p.dim(), x.len())?;
    if !p.contains(x, tol)? {
        return Ok(false);
    }
    let sigma = p.support(s)?;
    Ok(sigma - dot(s, x) <= eps + tol)
}

/// A polyhedral convex cone `cone(generators)` in R^m.
#[derive(Clone, Debug, PartialEq)]
pub struct PolyCone {
    pub dim: usize,
    pub generators: Vec<Vec<f64>>,
}

impl PolyCone {
    pub fn new(dim: usize, generators: Vec<Vec<f64>>) -> Result<Self> {
        for g in &generators {
            check_dim(dim, g.len())?;
        }
        Ok(PolyCone { dim, generators })
    }

    /// The nonnegative orthant.
    pub fn orthant(m: usize) -> Self {
        PolyCone { dim: m, generators: (0..m).map(|i| linalg::unit(m, i)).collect() }
    }

    /// Builds `{y : A y <= 0}`.
    pub fn from_hrep(dim: usize, rows: &[Vec<f64>]) -> Result<Self> {
        Ok(PolyCone { dim, generators: cone_generators(dim, rows)? })
    }

    /// Rows `r` with `K = {y : <r, y> <= 0 for every row}`.
    pub fn hrep_rows(&self) -> Result<Vec<Vec<f64>>> {
        let polar = positive_polar(self)?;
        Ok(polar.generators.iter().map(|g| linalg::scale(g, -1.0)).collect())
    }

    pub fn contains(&self, y: &[f64], tol: f64) -> Result<bool> {
        check_dim(self.dim, y.len())?;
        if self.generators.is_empty() {
            return Ok(linalg::norm_inf(y) <= tol);
        }
        let mut p = Program::new();
        let w = p.vars(self.generators.len(), 0.0, f64::INFINITY);
        let t = p.nonneg();
        for k in 0..self.dim {
            let mut e = Expr::new();
            for (wi, g) in w.iter().zip(&self.generators) {
                e.add_term(*wi, g[k]);
            }
            e.add_const(-y[k]);
            let mut up = e.clone();
            up.add_term(t, -1.0);
            p.constrain(up, Cmp::Le);
            let mut dn = e;
            dn.add_term(t, 1.0);
            p.constrain(dn, Cmp::Ge);
        }
        p.minimize(Expr::var(t));
        Ok(matches!(p.solve(), Outcome::Optimal { objective, .. } if objective <= tol))
    }

    /// Whether the cone has nonempty interior.
    pub fn is_solid(&self) -> bool {
        linalg::row_space(&self.generators, self.dim, 1e-12).len() == self.dim
    }
}

/// Generators of `{y : A y <= 0}` from the vertices of its section with the
/// unit cube, pruned to a non-redundant set.
pub fn cone_generators(dim: usize, rows: &[Vec<f64>]) -> Result<Vec<Vec<f64>>> {
    let mut h = HRep::boxed(&vec![-1.0; dim], &vec![1.0; dim]);
    for r in rows {
        check_dim(dim, r.len())?;
        h.add_row(r.clone(), 0.0);
    }
    let verts = hrep_to_vrep(&h)?;
    let mut gens: Vec<Vec<f64>> = verts.into_iter().filter(|v| linalg::norm_inf(v) > 1e-9).collect();
    // drop generators already in the cone of the others
    let mut i = 0;
    while i < gens.len() {
        let others: Vec<Vec<f64>> = gens.iter().enumerate().filter(|(j, _)| *j != i).map(|(_, g)| g.clone()).collect();
        let cone = PolyCone { dim, generators: others };
        if !cone.generators.is_empty() && cone.contains(&gens[i], 1e-10)? {
            gens.remove(i);
        } else {
            i += 1;
        }
    }
    gens.sort_by(|a, b| linalg::lex_cmp(a, b));
    Ok(gens)
}

/// `K+ = {l : <l, k> >= 0 for all k in K}`, returned with generators.
pub fn positive_polar(k: &PolyCone) -> Result<PolyCone> {
    let rows: Vec<Vec<f64>> = k.generators.iter().map(|g| linalg::scale(g, -1.0)).collect();
    PolyCone::from_hrep(k.dim, &rows)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn square() -> Polytope {
        Polytope::boxed(&[-1.0, -1.0], &[1.0, 1.0])
    }

    #[test]
    fn square_vertices() {
        let v = square().vertices().unwrap().clone();
        assert_eq!(v, vec![vec![-1.0, -1.0], vec![-1.0, 1.0], vec![1.0, -1.0], vec![1.0, 1.0]]);
    }

    #[test]
    fn triangle_facets() {
        let t = Polytope::from_vertices(2, vec![vec![0.0, 0.0], vec![1.0, 0.0], vec![0.0, 1.0]]).unwrap();
        let h = t.hrep().unwrap();
        assert_eq!(h.a.len(), 3);
        assert!(h.contains(&[0.25, 0.25], 1e-12));
        assert!(!h.contains(&[0.6, 0.6], 1e-12));
    }

    #[test]
    fn degenerate_simplex_segment() {
        // thin H-rep of the 2-simplex written with two opposite inequalities
        let h = HRep::new(
            2,
            vec![vec![-1.0, 0.0], vec![0.0, -1.0], vec![1.0, 1.0], vec![-1.0, -1.0]],
            vec![0.0, 0.0, 1.0, -1.0],
        )
        .unwrap();
        let v = hrep_to_vrep(&h).unwrap();
        assert_eq!(v.len(), 2);
        assert!(linalg::approx_eq(&v[0], &[0.0, 1.0], 1e-12));
        assert!(linalg::approx_eq(&v[1], &[1.0, 0.0], 1e-12));
        let back = vrep_to_hrep(2, &v).unwrap();
        assert_eq!(back.aeq.len(), 1);
    }

    #[test]
    fn unbounded_detected() {
        let h = HRep::new(1, vec![vec![-1.0]], vec![0.0]).unwrap();
        assert_eq!(hrep_to_vrep(&h), Err(Error::UnboundedSet));
    }

    #[test]
    fn supports_and_normals() {
        assert!((square().support(&[1.0, 2.0]).unwrap() - 3.0).abs() < 1e-9);
        let p = Polytope::interval(-1.0, 1.0);
        assert!(eps_normal_set_contains(&p, &[1.0], &[5.0], 0.0, 1e-9).unwrap());
        assert!(!eps_normal_set_contains(&p, &[1.0], &[-1.0], 0.0, 1e-9).unwrap());
        assert!(eps_normal_set_contains(&p, &[1.0], &[-1.0], 2.0, 1e-9).unwrap());
    }

    #[test]
    fn dual_slope_of_interval() {
        let d = dual_slope(&Polytope::interval(-1.0, 1.0), &[0.0]).unwrap();
        let v = d.vertices().unwrap();
        assert!(linalg::approx_eq(&v[0], &[-1.0], 1e-12) && linalg::approx_eq(&v[1], &[1.0], 1e-12));
        let d = dual_slope(&Polytope::interval(1.0, 3.0), &[2.0]).unwrap();
        assert!(d.contains(&[-1.0], 1e-12).unwrap() && !d.contains(&[1.1], 1e-12).unwrap());
        assert!(matches!(dual_slope(&Polytope::interval(1.0, 3.0), &[3.0]), Err(Error::NotInterior(_))));
    }

    #[test]
    fn minkowski_difference() {
        let a = Polytope::interval(-2.0, 2.0);
        let b = Polytope::interval(-1.0, 1.0);
        assert!(minkowski_diff_contains(&a, &b, &[1.0], 1e-12).unwrap());
        assert!(!minkowski_diff_contains(&a, &b, &[1.5], 1e-12).unwrap());
    }

    #[test]
    fn polar_of_orthant_and_ray() {
        let k = positive_polar(&PolyCone::orthant(2)).unwrap();
        assert_eq!(k.generators, vec![vec![0.0, 1.0], vec![1.0, 0.0]]);
        let ray = PolyCone::new(2, vec![vec![1.0, 1.0]]).unwrap();
        let p = positive_polar(&ray).unwrap();
        assert!(p.contains(&[1.0, -1.0], 1e-9).unwrap());
        assert!(p.contains(&[-1.0, 1.0], 1e-9).unwrap());
        assert!(!p.contains(&[-1.0, -0.5], 1e-9).unwrap());
        assert!(!ray.is_solid());
    }

    #[test]
    fn subsets_enumerated() {
        let mut seen = Vec::new();
        for_each_subset(4, 2, |s| seen.push(s.to_vec()));
        assert_eq!(seen.len(), 6);
        assert_eq!(seen[5], vec![2, 3]);
        let mut n = 0;
        for_each_subset(3, 3, |_| n += 1);
        assert_eq!(n, 1);
    }
}
