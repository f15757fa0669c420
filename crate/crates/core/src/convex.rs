//! Convex functions of the supported kinds and their ε-subdifferentials.
//!
//! Membership `s ∈ ∂_ε f(x)` is decided through the Fenchel gap
//! `f(x) + f*(s) - <s, x>`, computed as one convex program in dual form. The
//! same construction works when the coefficients of a combination of atoms are
//! themselves decision variables, which is what the certificate checks need.

use crate::error::{check_dim, Error, Result};
use crate::geometry::{hrep_to_vrep, HRep, Polytope};
use crate::linalg::{self, dot, Mat};
use crate::opt::{Cmp, Expr, Outcome, Program, Var};

/// Activity tolerance for max-affine pieces.
pub const ACTIVE_TOL: f64 = 1e-9;

/// One affine piece `<a, x> + b`.
#[derive(Clone, Debug, PartialEq)]
pub struct Piece {
    pub a: Vec<f64>,
    pub b: f64,
}

impl Piece {
    pub fn new(a: Vec<f64>, b: f64) -> Self {
        Piece { a, b }
    }

    pub fn eval(&self, x: &[f64]) -> f64 {
        dot(&self.a, x) + self.b
    }
}

/// A proper lsc convex function on R^n.
#[derive(Clone, Debug, PartialEq)]
pub enum ConvexFunc {
    MaxAffine { dim: usize, pieces: Vec<Piece> },
    /// `½ xᵀQx + qᵀx + c`
    Quadratic { q_mat: Mat, q: Vec<f64>, c: f64 },
    Indicator(Polytope),
    Sum { dim: usize, terms: Vec<ConvexFunc> },
}

impl ConvexFunc {
    pub fn max_affine(pieces: Vec<Piece>) -> Result<Self> {
        let dim = pieces.first().ok_or_else(|| Error::InvalidInput("max-affine needs a piece".into()))?.a.len();
        for p in &pieces {
            check_dim(dim, p.a.len())?;
            if !p.b.is_finite() || p.a.iter().any(|v| !v.is_finite()) {
                return Err(Error::InvalidInput("non-finite piece".into()));
            }
        }
        Ok(ConvexFunc::MaxAffine { dim, pieces })
    }

    pub fn affine(a: Vec<f64>, b: f64) -> Self {
        ConvexFunc::MaxAffine { dim: a.len(), pieces: vec![Piece::new(a, b)] }
    }

    pub fn zero(dim: usize) -> Self {
        Self::affine(vec![0.0; dim], 0.0)
    }

    /// `|x|` on R^1.
    pub fn abs() -> Self {
        ConvexFunc::MaxAffine { dim: 1, pieces: vec![Piece::new(vec![1.0], 0.0), Piece::new(vec![-1.0], 0.0)] }
    }

    pub fn quadratic(q_mat: Mat, q: Vec<f64>, c: f64) -> Result<Self> {
        let n = q.len();
        check_dim(n, q_mat.len())?;
        for row in &q_mat {
            check_dim(n, row.len())?;
        }
        for i in 0..n {
            for j in 0..n {
                if (q_mat[i][j] - q_mat[j][i]).abs() > 1e-12 * (1.0 + q_mat[i][j].abs()) {
                    return Err(Error::InvalidInput("quadratic matrix is not symmetric".into()));
                }
            }
        }
        if linalg::min_eigenvalue(&q_mat) < -1e-9 {
            return Err(Error::InvalidInput("quadratic matrix is not PSD".into()));
        }
        Ok(ConvexFunc::Quadratic { q_mat, q, c })
    }

    /// `t * x²` on R^1, that is `Q = 2t`.
    pub fn square(t: f64) -> Self {
        ConvexFunc::Quadratic { q_mat: vec![vec![2.0 * t]], q: vec![0.0], c: 0.0 }
    }

    pub fn indicator(p: Polytope) -> Self {
        ConvexFunc::Indicator(p)
    }

    pub fn sum(terms: Vec<ConvexFunc>) -> Result<Self> {
        let dim = terms.first().ok_or_else(|| Error::InvalidInput("empty sum".into()))?.dim();
        for t in &terms {
            check_dim(dim, t.dim())?;
        }
        Ok(ConvexFunc::Sum { dim, terms })
    }

    pub fn dim(&self) -> usize {
        match self {
            ConvexFunc::MaxAffine { dim, .. } | ConvexFunc::Sum { dim, .. } => *dim,
            ConvexFunc::Quadratic { q, .. } => q.len(),
            ConvexFunc::Indicator(p) => p.dim(),
        }
    }

    /// Value at `x`, `+inf` outside the domain.
    pub fn eval(&self, x: &[f64]) -> f64 {
        match self {
            ConvexFunc::MaxAffine { pieces, .. } => {
                pieces.iter().map(|p| p.eval(x)).fold(f64::NEG_INFINITY, f64::max)
            }
            ConvexFunc::Quadratic { q_mat, q, c } => 0.5 * linalg::quad_form(q_mat, x) + dot(q, x) + c,
            ConvexFunc::Indicator(p) => {
                if p.contains(x, 1e-9).unwrap_or(false) {
                    0.0
                } else {
                    f64::INFINITY
                }
            }
            ConvexFunc::Sum { terms, .. } => terms.iter().map(|t| t.eval(x)).sum(),
        }
    }

    /// Whether the function is piecewise affine (no quadratic part).
    pub fn is_polyhedral(&self) -> bool {
        match self {
            ConvexFunc::MaxAffine { .. } | ConvexFunc::Indicator(_) => true,
            ConvexFunc::Quadratic { q_mat, .. } => q_mat.iter().flatten().all(|v| *v == 0.0),
            ConvexFunc::Sum { terms, .. } => terms.iter().all(|t| t.is_polyhedral()),
        }
    }

    /// Whether the function is finite everywhere.
    pub fn is_finite_valued(&self) -> bool {
        match self {
            ConvexFunc::Indicator(_) => false,
            ConvexFunc::Sum { terms, .. } => terms.iter().all(|t| t.is_finite_valued()),
            _ => true,
        }
    }
}

/// Catalog of distinct atoms shared by several functions.
///
/// Functions registered in one catalog are described by [`Coeffs`] over the
/// same atoms, so signed combinations can cancel exactly.
#[derive(Clone, Debug)]
pub struct Catalog {
    pub dim: usize,
    /// Max-affine atoms with at least two pieces.
    pub maxes: Vec<Vec<Piece>>,
    pub quads: Vec<Mat>,
    pub domains: Vec<HRep>,
}

/// Coefficients of a function over a catalog.
#[derive(Clone, Debug, PartialEq)]
pub struct Coeffs {
    pub max: Vec<f64>,
    pub quad: Vec<f64>,
    pub lin: Vec<f64>,
    pub cst: f64,
    pub dom: Vec<bool>,
}

impl Coeffs {
    pub fn zero(dim: usize) -> Self {
        Coeffs { max: Vec::new(), quad: Vec::new(), lin: vec![0.0; dim], cst: 0.0, dom: Vec::new() }
    }

    fn pad(&mut self, cat: &Catalog) {
        self.max.resize(cat.maxes.len(), 0.0);
        self.quad.resize(cat.quads.len(), 0.0);
        self.dom.resize(cat.domains.len(), false);
    }

    /// `self += t * other`; domains are united regardless of `t`.
    pub fn add_scaled(&mut self, other: &Coeffs, t: f64) {
        let grow = |v: &mut Vec<f64>, n: usize| if v.len() < n { v.resize(n, 0.0) };
        grow(&mut self.max, other.max.len());
        grow(&mut self.quad, other.quad.len());
        if self.dom.len() < other.dom.len() {
            self.dom.resize(other.dom.len(), false);
        }
        for (a, b) in self.max.iter_mut().zip(&other.max) {
            *a += t * b;
        }
        for (a, b) in self.quad.iter_mut().zip(&other.quad) {
            *a += t * b;
        }
        for (a, b) in self.lin.iter_mut().zip(&other.lin) {
            *a += t * b;
        }
        self.cst += t * other.cst;
        for (a, b) in self.dom.iter_mut().zip(&other.dom) {
            *a |= *b;
        }
    }

    pub fn has_domain(&self) -> bool {
        self.dom.iter().any(|d| *d)
    }
}

fn same_pieces(a: &[Piece], b: &[Piece]) -> bool {
    let covered = |x: &[Piece], y: &[Piece]| {
        x.iter().all(|p| y.iter().any(|q| (p.b - q.b).abs() <= 1e-12 && linalg::approx_eq(&p.a, &q.a, 1e-12)))
    };
    covered(a, b) && covered(b, a)
}

impl Catalog {
    pub fn new(dim: usize) -> Self {
        Catalog { dim, maxes: Vec::new(), quads: Vec::new(), domains: Vec::new() }
    }

    /// Registers the atoms of `f` and returns its coefficients.
    pub fn add(&mut self, f: &ConvexFunc) -> Result<Coeffs> {
        check_dim(self.dim, f.dim())?;
        let mut c = Coeffs::zero(self.dim);
        self.add_into(f, &mut c);
        c.pad(self);
        Ok(c)
    }

    fn add_into(&mut self, f: &ConvexFunc, c: &mut Coeffs) {
        match f {
            ConvexFunc::MaxAffine { pieces, .. } => {
                let first = &pieces[0];
                if pieces.iter().all(|p| p.b == first.b && p.a == first.a) {
                    for (l, a) in c.lin.iter_mut().zip(&first.a) {
                        *l += a;
                    }
                    c.cst += first.b;
                    return;
                }
                let k = match self.maxes.iter().position(|m| same_pieces(m, pieces)) {
                    Some(k) => k,
                    None => {
                        self.maxes.push(pieces.clone());
                        self.maxes.len() - 1
                    }
                };
                c.pad(self);
                c.max[k] += 1.0;
            }
            ConvexFunc::Quadratic { q_mat, q, c: cst } => {
                for (l, a) in c.lin.iter_mut().zip(q) {
                    *l += a;
                }
                c.cst += cst;
                if q_mat.iter().flatten().all(|v| *v == 0.0) {
                    return;
                }
                let k = match self.quads.iter().position(|m| m == q_mat) {
                    Some(k) => k,
                    None => {
                        self.quads.push(q_mat.clone());
                        self.quads.len() - 1
                    }
                };
                c.pad(self);
                c.quad[k] += 1.0;
            }
            ConvexFunc::Indicator(p) => {
                let h = match p.hrep() {
                    Ok(h) => h.clone(),
                    Err(_) => return,
                };
                let k = match self.domains.iter().position(|d| *d == h) {
                    Some(k) => k,
                    None => {
                        self.domains.push(h);
                        self.domains.len() - 1
                    }
                };
                c.pad(self);
                c.dom[k] = true;
            }
            ConvexFunc::Sum { terms, .. } => {
                for t in terms {
                    self.add_into(t, c);
                }
            }
        }
    }

    pub fn max_value(&self, k: usize, x: &[f64]) -> f64 {
        self.maxes[k].iter().map(|p| p.eval(x)).fold(f64::NEG_INFINITY, f64::max)
    }

    /// Value of a coefficient vector at `x` (`+inf` outside flagged domains).
    pub fn eval(&self, c: &Coeffs, x: &[f64]) -> f64 {
        for (k, d) in c.dom.iter().enumerate() {
            if *d && !self.domains[k].contains(x, 1e-9) {
                return f64::INFINITY;
            }
        }
        let mut v = dot(&c.lin, x) + c.cst;
        for (k, t) in c.max.iter().enumerate() {
            if *t != 0.0 {
                v += t * self.max_value(k, x);
            }
        }
        for (k, t) in c.quad.iter().enumerate() {
            if *t != 0.0 {
                v += 0.5 * t * linalg::quad_form(&self.quads[k], x);
            }
        }
        v
    }

    pub fn quad_matrix(&self, c: &Coeffs) -> Mat {
        let mut q = linalg::zeros(self.dim, self.dim);
        for (k, t) in c.quad.iter().enumerate() {
            for i in 0..self.dim {
                for j in 0..self.dim {
                    q[i][j] += t * self.quads[k][i][j];
                }
            }
        }
        q
    }

    /// Checks that the coefficients describe a convex function: nonnegative
    /// weights on nonsmooth atoms and a PSD quadratic part.
    pub fn check_convex(&self, c: &Coeffs, tol: f64) -> Result<()> {
        for (k, t) in c.max.iter().enumerate() {
            if *t < -tol {
                return Err(Error::NotRepresentable(format!("max-affine atom {k} has coefficient {t:e}")));
            }
        }
        let q = self.quad_matrix(c);
        let lo = linalg::min_eigenvalue(&q);
        if lo < -tol.max(1e-9) {
            return Err(Error::NotRepresentable(format!("quadratic part has eigenvalue {lo:e}")));
        }
        Ok(())
    }

    /// Gradient of a coefficient vector at `x` if every atom is smooth there.
    pub fn gradient(&self, c: &Coeffs, x: &[f64]) -> Result<Vec<f64>> {
        let mut g = c.lin.clone();
        for (k, t) in c.max.iter().enumerate() {
            if *t == 0.0 {
                continue;
            }
            let grad = active_gradient(&self.maxes[k], x)
                .ok_or_else(|| Error::NotDifferentiable(format!("max-affine atom {k} has several active gradients")))?;
            g = linalg::axpy(&g, *t, &grad);
        }
        let q = self.quad_matrix(c);
        g = linalg::add(&g, &linalg::mat_vec(&q, x));
        for (k, d) in c.dom.iter().enumerate() {
            if *d {
                let h = &self.domains[k];
                if !h.contains(x, 1e-9) {
                    return Err(Error::InfiniteValue);
                }
                let interior = h.aeq.is_empty()
                    && h.a.iter().zip(&h.b).all(|(r, b)| dot(r, x) < b - ACTIVE_TOL);
                if !interior {
                    return Err(Error::NotDifferentiable("point on the domain boundary".into()));
                }
            }
        }
        Ok(g)
    }
}

/// The unique gradient among active pieces, if unique.
pub fn active_gradient(pieces: &[Piece], x: &[f64]) -> Option<Vec<f64>> {
    let act = active_pieces(pieces, x, ACTIVE_TOL);
    let first = pieces[act[0]].a.clone();
    act.iter().all(|&i| linalg::approx_eq(&pieces[i].a, &first, 1e-9)).then_some(first)
}

pub fn active_pieces(pieces: &[Piece], x: &[f64], tol: f64) -> Vec<usize> {
    let vals: Vec<f64> = pieces.iter().map(|p| p.eval(x)).collect();
    let m = vals.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let scale = 1.0 + m.abs();
    (0..pieces.len()).filter(|&i| vals[i] >= m - tol * scale).collect()
}

/// Coefficients that may depend on program variables.
#[derive(Clone, Debug)]
pub struct Block {
    pub max: Vec<Expr>,
    pub quad: Vec<Expr>,
    pub lin: Vec<Expr>,
    pub cst: Expr,
    pub dom: Vec<bool>,
}

impl Block {
    pub fn new(cat: &Catalog) -> Self {
        Block {
            max: vec![Expr::new(); cat.maxes.len()],
            quad: vec![Expr::new(); cat.quads.len()],
            lin: vec![Expr::new(); cat.dim],
            cst: Expr::new(),
            dom: vec![false; cat.domains.len()],
        }
    }

    pub fn constant(cat: &Catalog, c: &Coeffs) -> Self {
        let mut b = Block::new(cat);
        b.add(c, &Expr::constant(1.0));
        b
    }

    /// `self += e * c`; domains of `c` are always included.
    pub fn add(&mut self, c: &Coeffs, e: &Expr) {
        for (dst, v) in self.max.iter_mut().zip(&c.max) {
            dst.add_scaled(e, *v);
        }
        for (dst, v) in self.quad.iter_mut().zip(&c.quad) {
            dst.add_scaled(e, *v);
        }
        for (dst, v) in self.lin.iter_mut().zip(&c.lin) {
            dst.add_scaled(e, *v);
        }
        self.cst.add_scaled(e, c.cst);
        for (dst, v) in self.dom.iter_mut().zip(&c.dom) {
            *dst |= *v;
        }
    }

    /// `self += e * c` without touching domains.
    pub fn add_without_domains(&mut self, c: &Coeffs, e: &Expr) {
        let dom = self.dom.clone();
        self.add(c, e);
        self.dom = dom;
    }
}

/// Variables and expressions attached to one block of a gap program.
#[derive(Clone, Debug)]
pub struct BlockGap {
    /// Fenchel gap of the block at the evaluation point.
    pub gap: Expr,
    /// Slope assigned to the block.
    pub slope: Vec<Expr>,
}

/// Quadratic part `κ Q0` of a block, when the block's matrices are
/// proportional or fixed.
fn quad_structure(cat: &Catalog, blk: &Block) -> Result<Option<(Expr, Mat)>> {
    let used: Vec<usize> = (0..cat.quads.len()).filter(|&k| !blk.quad[k].terms.is_empty() || blk.quad[k].constant != 0.0).collect();
    if used.is_empty() {
        return Ok(None);
    }
    if used.iter().all(|&k| blk.quad[k].is_constant()) {
        let mut q = linalg::zeros(cat.dim, cat.dim);
        for &k in &used {
            let t = blk.quad[k].constant;
            for i in 0..cat.dim {
                for j in 0..cat.dim {
                    q[i][j] += t * cat.quads[k][i][j];
                }
            }
        }
        if linalg::min_eigenvalue(&q) < -1e-9 {
            return Err(Error::NotRepresentable("quadratic part is not PSD".into()));
        }
        return Ok(Some((Expr::constant(1.0), q)));
    }
    if let Some(ratios) = common_multiple(&used.iter().map(|&k| &blk.quad[k]).collect::<Vec<_>>()) {
        let mut q = linalg::zeros(cat.dim, cat.dim);
        for (&k, r) in used.iter().zip(&ratios) {
            for i in 0..cat.dim {
                for j in 0..cat.dim {
                    q[i][j] += r * cat.quads[k][i][j];
                }
            }
        }
        if linalg::min_eigenvalue(&q) >= -1e-9 {
            return Ok(Some((blk.quad[used[0]].clone(), q)));
        }
    }
    let q0 = &cat.quads[used[0]];
    let n0 = linalg::frobenius(q0);
    let mut kappa = Expr::new();
    for &k in &used {
        let qk = &cat.quads[k];
        let ratio = dot(&qk.concat(), &q0.concat()) / (n0 * n0);
        let resid: f64 = qk.iter().flatten().zip(q0.iter().flatten()).map(|(a, b)| (a - ratio * b).powi(2)).sum::<f64>().sqrt();
        if resid > 1e-12 * (1.0 + n0) {
            return Err(Error::Unsupported("quadratic atoms with parameter-dependent non-proportional matrices".into()));
        }
        kappa.add_scaled(&blk.quad[k], ratio);
    }
    Ok(Some((kappa, q0.clone())))
}

/// Ratios `r_k` with `e_k = r_k e_0`, when every expression is a multiple of
/// the first.
fn common_multiple(es: &[&Expr]) -> Option<Vec<f64>> {
    let e0 = es[0];
    let (pivot, c0) = match e0.terms.iter().find(|(_, c)| *c != 0.0) {
        Some((v, c)) => (Some(*v), *c),
        None => (None, e0.constant),
    };
    if c0 == 0.0 {
        return None;
    }
    let coef = |e: &Expr, v| e.terms.iter().filter(|(w, _)| *w == v).map(|(_, c)| c).sum::<f64>();
    let mut out = Vec::new();
    for e in es {
        let r = match pivot {
            Some(v) => coef(e, v) / c0,
            None => e.constant / c0,
        };
        let mut d = (*e).clone();
        d.add_scaled(e0, -r);
        let scale = 1.0 + r.abs();
        let mut acc: std::collections::BTreeMap<usize, f64> = Default::default();
        for (v, c) in &d.terms {
            *acc.entry(v.0).or_default() += c;
        }
        if d.constant.abs() > 1e-12 * scale || acc.values().any(|c| c.abs() > 1e-12 * scale) {
            return None;
        }
        out.push(r);
    }
    Some(out)
}

/// Adds the Fenchel gap of a block at `x` to a program: the slope of the
/// block is free and the returned gap expression is convex in the slope and
/// the coefficients jointly.
pub fn add_gap_block(p: &mut Program, cat: &Catalog, blk: &Block, x: &[f64]) -> Result<BlockGap> {
    let n = cat.dim;
    let mut gap = Expr::new();
    let mut slope: Vec<Expr> = blk.lin.clone();
    for (k, pieces) in cat.maxes.iter().enumerate() {
        let coef = &blk.max[k];
        if coef.terms.is_empty() && coef.constant == 0.0 {
            continue;
        }
        let fx = cat.max_value(k, x);
        let w = p.vars(pieces.len(), 0.0, f64::INFINITY);
        let mut sum = Expr::new();
        for (wi, piece) in w.iter().zip(pieces) {
            sum.add_term(*wi, 1.0);
            let d = (fx - piece.eval(x)).max(0.0);
            gap.add_term(*wi, d);
            for (s, a) in slope.iter_mut().zip(&piece.a) {
                s.add_term(*wi, *a);
            }
        }
        sum.add_scaled(coef, -1.0);
        p.constrain(sum, Cmp::Eq);
    }
    if let Some((kappa, q0)) = quad_structure(cat, blk)? {
        // slope part s_q with v = s_q - κ Q0 x in range(Q0)
        let sq: Vec<Var> = (0..n).map(|_| p.free()).collect();
        let q0x = linalg::mat_vec(&q0, x);
        let v: Vec<Expr> = (0..n)
            .map(|i| {
                let mut e = Expr::var(sq[i]);
                e.add_scaled(&kappa, -q0x[i]);
                e
            })
            .collect();
        let split = linalg::psd_split(&q0, 1e-12);
        for kv in &split.kernel {
            let mut e = Expr::new();
            for (vi, ki) in v.iter().zip(kv) {
                e.add_scaled(vi, *ki);
            }
            p.constrain(e, Cmp::Eq);
        }
        if !split.range.is_empty() {
            let t = p.nonneg();
            let w: Vec<Expr> = split
                .range
                .iter()
                .map(|(lam, u)| {
                    let mut e = Expr::new();
                    for (vi, ui) in v.iter().zip(u) {
                        e.add_scaled(vi, ui / lam.sqrt());
                    }
                    e
                })
                .collect();
            p.rotated_soc(kappa.clone(), Expr::var(t), w);
            gap.add_term(t, 1.0);
        }
        for (s, v) in slope.iter_mut().zip(&sq) {
            s.add_term(*v, 1.0);
        }
    }
    for (k, flagged) in blk.dom.iter().enumerate() {
        if !*flagged {
            continue;
        }
        let h = &cat.domains[k];
        if !h.contains(x, 1e-9 * (1.0 + linalg::norm_inf(x))) {
            return Err(Error::InfiniteValue);
        }
        for (row, b) in h.a.iter().zip(&h.b) {
            let y = p.nonneg();
            gap.add_term(y, (b - dot(row, x)).max(0.0));
            for (s, a) in slope.iter_mut().zip(row) {
                s.add_term(y, *a);
            }
        }
        for row in &h.aeq {
            let y = p.free();
            for (s, a) in slope.iter_mut().zip(row) {
                s.add_term(y, *a);
            }
        }
    }
    Ok(BlockGap { gap, slope })
}

/// Adds the exact subdifferential `∂F(x)` of a block whose nonsmooth atoms
/// have nonnegative coefficients, returning the slope expressions.
///
/// Smooth atoms contribute their gradient times the (possibly signed)
/// coefficient; nonsmooth atoms contribute weights over active pieces that sum
/// to the coefficient; flagged domains contribute their normal cones.
pub fn add_subdiff_block(p: &mut Program, cat: &Catalog, blk: &Block, x: &[f64]) -> Result<Vec<Expr>> {
    let n = cat.dim;
    let mut slope = blk.lin.clone();
    for (k, pieces) in cat.maxes.iter().enumerate() {
        let coef = &blk.max[k];
        if coef.terms.is_empty() && coef.constant == 0.0 {
            continue;
        }
        if let Some(g) = active_gradient(pieces, x) {
            for (s, gi) in slope.iter_mut().zip(&g) {
                s.add_scaled(coef, *gi);
            }
            continue;
        }
        let act = active_pieces(pieces, x, ACTIVE_TOL);
        let mut sum = Expr::new();
        for &i in &act {
            let w = p.nonneg();
            sum.add_term(w, 1.0);
            for (s, a) in slope.iter_mut().zip(&pieces[i].a) {
                s.add_term(w, *a);
            }
        }
        sum.add_scaled(coef, -1.0);
        p.constrain(sum, Cmp::Eq);
    }
    for (k, coef) in blk.quad.iter().enumerate() {
        let qx = linalg::mat_vec(&cat.quads[k], x);
        for (s, v) in slope.iter_mut().zip(&qx) {
            s.add_scaled(coef, *v);
        }
    }
    for (k, flagged) in blk.dom.iter().enumerate() {
        if *flagged {
            add_normal_cone(p, &cat.domains[k], x, &mut slope)?;
        }
    }
    debug_assert_eq!(slope.len(), n);
    Ok(slope)
}

/// Adds `N_D(x)` for the polyhedron `D` to `slope`.
pub fn add_normal_cone(p: &mut Program, h: &HRep, x: &[f64], slope: &mut [Expr]) -> Result<()> {
    let scale = 1.0 + linalg::norm_inf(x);
    if !h.contains(x, 1e-9 * scale) {
        return Err(Error::InfiniteValue);
    }
    for (row, b) in h.a.iter().zip(&h.b) {
        if dot(row, x) >= b - 1e-9 * scale.max(b.abs()) {
            let y = p.nonneg();
            for (s, a) in slope.iter_mut().zip(row) {
                s.add_term(y, *a);
            }
        }
    }
    for row in &h.aeq {
        let y = p.free();
        for (s, a) in slope.iter_mut().zip(row) {
            s.add_term(y, *a);
        }
    }
    Ok(())
}

/// Adds the ε-normal set `N^η_D(x)` with `η` the returned gap expression.
pub fn add_eps_normal(p: &mut Program, h: &HRep, x: &[f64], slope: &mut [Expr]) -> Result<Expr> {
    if !h.contains(x, 1e-9 * (1.0 + linalg::norm_inf(x))) {
        return Err(Error::InfiniteValue);
    }
    let mut gap = Expr::new();
    for (row, b) in h.a.iter().zip(&h.b) {
        let y = p.nonneg();
        gap.add_term(y, (b - dot(row, x)).max(0.0));
        for (s, a) in slope.iter_mut().zip(row) {
            s.add_term(y, *a);
        }
    }
    for row in &h.aeq {
        let y = p.free();
        for (s, a) in slope.iter_mut().zip(row) {
            s.add_term(y, *a);
        }
    }
    Ok(gap)
}

/// Constrains `lhs == rhs` componentwise.
pub fn equate(p: &mut Program, lhs: &[Expr], rhs: &[Expr]) {
    for (l, r) in lhs.iter().zip(rhs) {
        let mut e = l.clone();
        e.add_scaled(r, -1.0);
        p.constrain(e, Cmp::Eq);
    }
}

pub fn const_exprs(v: &[f64]) -> Vec<Expr> {
    v.iter().map(|c| Expr::constant(*c)).collect()
}

/// Minimum of a program objective: `+inf` when infeasible.
pub fn min_value(p: &Program) -> Result<(f64, Vec<f64>)> {
    match p.solve() {
        Outcome::Optimal { x, objective } => Ok((objective, x)),
        Outcome::Infeasible => Ok((f64::INFINITY, Vec::new())),
        Outcome::Unbounded => Ok((f64::NEG_INFINITY, Vec::new())),
        Outcome::Failed(e) => Err(Error::Numeric(e)),
    }
}

/// Fenchel gap `f(x) + f*(s) - <s, x>` (`+inf` when `s` is out of reach).
pub fn fenchel_gap(f: &ConvexFunc, x: &[f64], s: &[f64]) -> Result<f64> {
    check_dim(f.dim(), x.len())?;
    check_dim(f.dim(), s.len())?;
    if !f.eval(x).is_finite() {
        return Err(Error::InfiniteValue);
    }
    let mut cat = Catalog::new(f.dim());
    let c = cat.add(f)?;
    coeffs_gap(&cat, &c, x, s)
}

/// Fenchel gap of a coefficient vector.
pub fn coeffs_gap(cat: &Catalog, c: &Coeffs, x: &[f64], s: &[f64]) -> Result<f64> {
    if c.max.iter().all(|t| *t == 0.0) && !c.has_domain() {
        return Ok(quadratic_gap(&cat.quad_matrix(c), &c.lin, x, s));
    }
    let mut p = Program::new();
    let blk = Block::constant(cat, c);
    let bg = add_gap_block(&mut p, cat, &blk, x)?;
    equate(&mut p, &bg.slope, &const_exprs(s));
    p.minimize(bg.gap);
    let (v, _) = min_value(&p)?;
    Ok(v.max(0.0))
}

/// Closed form for `½ xᵀQx + <l, x>`: `½ vᵀQ⁺v` with `v = s - l - Qx`,
/// `+inf` when `v` leaves the range of `Q`.
pub fn quadratic_gap(q: &Mat, l: &[f64], x: &[f64], s: &[f64]) -> f64 {
    let v = linalg::sub(&linalg::sub(s, l), &linalg::mat_vec(q, x));
    let split = linalg::psd_split(q, 1e-12);
    let scale = 1.0 + linalg::norm_inf(s) + linalg::norm_inf(l);
    if split.kernel.iter().any(|k| dot(k, &v).abs() > 1e-10 * scale) {
        return f64::INFINITY;
    }
    0.5 * split.range.iter().map(|(lam, u)| dot(u, &v).powi(2) / lam).sum::<f64>()
}

/// `f*(s) = sup_x <s, x> - f(x)`.
pub fn conjugate_value(f: &ConvexFunc, s: &[f64]) -> Result<f64> {
    check_dim(f.dim(), s.len())?;
    let mut cat = Catalog::new(f.dim());
    let c = cat.add(f)?;
    let x = domain_point(&cat, &c)?;
    let g = coeffs_gap(&cat, &c, &x, s)?;
    Ok(g + dot(s, &x) - f.eval(&x))
}

/// A point of the effective domain.
pub fn domain_point(cat: &Catalog, c: &Coeffs) -> Result<Vec<f64>> {
    let mut h = HRep { dim: cat.dim, a: Vec::new(), b: Vec::new(), aeq: Vec::new(), beq: Vec::new() };
    for (k, d) in c.dom.iter().enumerate() {
        if *d {
            let dk = &cat.domains[k];
            h.a.extend(dk.a.iter().cloned());
            h.b.extend(dk.b.iter().copied());
            h.aeq.extend(dk.aeq.iter().cloned());
            h.beq.extend(dk.beq.iter().copied());
        }
    }
    if h.a.is_empty() && h.aeq.is_empty() {
        return Ok(vec![0.0; cat.dim]);
    }
    h.chebyshev_center().map(|(p, _)| p).or_else(|| h.feasible_point()).ok_or(Error::EmptySet)
}

/// `s ∈ ∂_ε f(x)`.
pub fn in_eps_subdiff(f: &ConvexFunc, x: &[f64], s: &[f64], eps: f64, tol: f64) -> Result<bool> {
    if eps < 0.0 {
        return Err(Error::InvalidInput("ε must be nonnegative".into()));
    }
    Ok(fenchel_gap(f, x, s)? <= eps + tol)
}

/// `s ∈ ∂f(x)`; for convex functions the regular and convex subdifferentials
/// coincide.
pub fn regular_subdiff_contains(f: &ConvexFunc, x: &[f64], s: &[f64], tol: f64) -> Result<bool> {
    in_eps_subdiff(f, x, s, 0.0, tol)
}

pub fn grad(f: &ConvexFunc, x: &[f64]) -> Result<Vec<f64>> {
    check_dim(f.dim(), x.len())?;
    if !f.eval(x).is_finite() {
        return Err(Error::InfiniteValue);
    }
    let mut cat = Catalog::new(f.dim());
    let c = cat.add(f)?;
    cat.gradient(&c, x)
}

/// Flattens the polyhedral finite part of `c` into one max-affine function.
fn flatten_pieces(cat: &Catalog, c: &Coeffs) -> Result<Vec<Piece>> {
    if c.quad.iter().any(|t| *t != 0.0) {
        return Err(Error::Unsupported("vertex description needs a polyhedral function".into()));
    }
    let mut out = vec![Piece::new(c.lin.clone(), c.cst)];
    for (k, t) in c.max.iter().enumerate() {
        if *t == 0.0 {
            continue;
        }
        let mut next = Vec::new();
        for p in &out {
            for q in &cat.maxes[k] {
                next.push(Piece::new(linalg::axpy(&p.a, *t, &q.a), p.b + t * q.b));
            }
        }
        out = next;
        if out.len() > 20_000 {
            return Err(Error::TooLarge(out.len() as u128));
        }
    }
    Ok(out)
}

/// Vertices of `∂_ε f(x)` for a polyhedral `f`.
pub fn eps_subdiff_vrep(f: &ConvexFunc, x: &[f64], eps: f64) -> Result<Polytope> {
    check_dim(f.dim(), x.len())?;
    let mut cat = Catalog::new(f.dim());
    let c = cat.add(f)?;
    coeffs_eps_subdiff_vrep(&cat, &c, x, eps)
}

pub fn coeffs_eps_subdiff_vrep(cat: &Catalog, c: &Coeffs, x: &[f64], eps: f64) -> Result<Polytope> {
    let n = cat.dim;
    if !cat.eval(c, x).is_finite() {
        return Err(Error::InfiniteValue);
    }
    let pieces = flatten_pieces(cat, c)?;
    let vals: Vec<f64> = pieces.iter().map(|p| p.eval(x)).collect();
    let fx = vals.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let d: Vec<f64> = vals.iter().map(|v| (fx - v).max(0.0)).collect();
    let points = if !c.has_domain() {
        simplex_cut_points(&pieces, &d, eps)
    } else {
        lifted_points(cat, c, &pieces, &d, x, eps)?
    };
    Polytope::from_vertices(n, crate::geometry::prune_to_extreme(&points))
}

/// Images of the vertices of `{λ ∈ Δ : Σ λ_i d_i <= ε}`.
fn simplex_cut_points(pieces: &[Piece], d: &[f64], eps: f64) -> Vec<Vec<f64>> {
    let mut pts = Vec::new();
    for i in 0..pieces.len() {
        if d[i] <= eps {
            pts.push(pieces[i].a.clone());
        }
    }
    for i in 0..pieces.len() {
        if d[i] >= eps {
            continue;
        }
        for j in 0..pieces.len() {
            if d[j] <= eps {
                continue;
            }
            let li = (d[j] - eps) / (d[j] - d[i]);
            pts.push(linalg::axpy(&linalg::scale(&pieces[i].a, li), 1.0 - li, &pieces[j].a));
        }
    }
    linalg::dedup_points(pts, 1e-12)
}

/// Vertices for a polyhedral function with domain constraints, obtained by
/// enumerating the lifted set of weights and normal vectors.
fn lifted_points(cat: &Catalog, c: &Coeffs, pieces: &[Piece], d: &[f64], x: &[f64], eps: f64) -> Result<Vec<Vec<f64>>> {
    let n = cat.dim;
    let mut dom = HRep { dim: n, a: Vec::new(), b: Vec::new(), aeq: Vec::new(), beq: Vec::new() };
    for (k, f) in c.dom.iter().enumerate() {
        if *f {
            let dk = &cat.domains[k];
            dom.a.extend(dk.a.iter().cloned());
            dom.b.extend(dk.b.iter().copied());
            dom.aeq.extend(dk.aeq.iter().cloned());
            dom.beq.extend(dk.beq.iter().copied());
        }
    }
    let dverts = hrep_to_vrep(&dom)?;
    let m = pieces.len();
    let dim = m + n;
    let mut h = HRep { dim, a: Vec::new(), b: Vec::new(), aeq: Vec::new(), beq: Vec::new() };
    let mut sum = vec![0.0; dim];
    for (i, s) in sum.iter_mut().take(m).enumerate() {
        *s = 1.0;
        let mut row = vec![0.0; dim];
        row[i] = -1.0;
        h.add_row(row, 0.0);
    }
    h.add_eq(sum, 1.0);
    for v in &dverts {
        let mut row = d.to_vec();
        row.extend(linalg::sub(v, x));
        h.add_row(row, eps);
    }
    let lifted = hrep_to_vrep(&h)?;
    Ok(lifted
        .iter()
        .map(|z| {
            let mut s = z[m..].to_vec();
            for (i, p) in pieces.iter().enumerate() {
                s = linalg::axpy(&s, z[i], &p.a);
            }
            s
        })
        .collect())
}

/// `u - h` with `u = f + h`.
#[derive(Clone, Debug, PartialEq)]
pub struct DCPair {
    pub u: ConvexFunc,
    pub h: ConvexFunc,
}

impl DCPair {
    pub fn new(u: ConvexFunc, h: ConvexFunc) -> Result<Self> {
        check_dim(u.dim(), h.dim())?;
        Ok(DCPair { u, h })
    }

    pub fn dim(&self) -> usize {
        self.u.dim()
    }

    /// `u(x) - h(x)`; `+inf` outside `dom u`.
    pub fn eval(&self, x: &[f64]) -> f64 {
        let u = self.u.eval(x);
        if !u.is_finite() {
            return f64::INFINITY;
        }
        u - self.h.eval(x)
    }
}
