//! Symmetric-matrix constraints `Φ(x) ⪯ 0` and eigenvalue functions.

use rand::{RngExt, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use super::{add_q, dc_gradient, regular_slope, residual};
use crate::convex::{ConvexFunc, DCPair};
use crate::error::{check_dim, Error, Result};
use crate::geometry::Polytope;
use crate::linalg::{self, dot, Mat};
use crate::opt::{Cmp, Expr, Program};

/// Largest supported matrix order.
pub const MAX_ORDER: usize = 64;

/// Symmetric matrix stored as its upper triangle, row by row.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct SymMatrix {
    pub p: usize,
    pub upper: Vec<f64>,
}

impl SymMatrix {
    pub fn from_dense(a: &Mat) -> Result<Self> {
        let p = a.len();
        let mut upper = Vec::with_capacity(p * (p + 1) / 2);
        for i in 0..p {
            check_dim(p, a[i].len())?;
            for j in i..p {
                if (a[i][j] - a[j][i]).abs() > 1e-12 * (1.0 + a[i][j].abs()) {
                    return Err(Error::InvalidInput(format!("matrix is not symmetric at ({i}, {j})")));
                }
                upper.push(a[i][j]);
            }
        }
        Ok(SymMatrix { p, upper })
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        let (i, j) = if i <= j { (i, j) } else { (j, i) };
        self.upper[i * self.p - i * (i + 1) / 2 + j]
    }

    pub fn to_dense(&self) -> Mat {
        (0..self.p).map(|i| (0..self.p).map(|j| self.get(i, j)).collect()).collect()
    }

    pub fn identity(p: usize) -> Self {
        SymMatrix::from_dense(&linalg::identity(p)).expect("identity is symmetric")
    }

    pub fn trace(&self) -> f64 {
        (0..self.p).map(|i| self.get(i, i)).sum()
    }

    /// `<A, B> = Tr(AB)`.
    pub fn inner(&self, other: &SymMatrix) -> f64 {
        let mut s = 0.0;
        for i in 0..self.p {
            for j in 0..self.p {
                s += self.get(i, j) * other.get(i, j);
            }
        }
        s
    }

    /// `v^T A v`.
    pub fn quad(&self, v: &[f64]) -> f64 {
        linalg::quad_form(&self.to_dense(), v)
    }
}

/// Eigen-decomposition by cyclic Jacobi sweeps: `(Q, λ)` with eigenvectors as
/// columns of `Q` and `λ` descending.
pub fn sym_eig(a: &SymMatrix) -> Result<(Mat, Vec<f64>)> {
    if a.p > MAX_ORDER {
        return Err(Error::InvalidInput(format!("matrix order {} exceeds {MAX_ORDER}", a.p)));
    }
    let dense = a.to_dense();
    if dense.iter().flatten().any(|v| !v.is_finite()) {
        return Err(Error::InfiniteValue);
    }
    let (vals, q) = linalg::jacobi_eigen(&dense);
    let p = a.p;
    let mut recon = linalg::zeros(p, p);
    for i in 0..p {
        for j in 0..p {
            recon[i][j] = (0..p).map(|k| q[i][k] * vals[k] * q[j][k]).sum();
        }
    }
    let err: f64 = recon.iter().flatten().zip(dense.iter().flatten()).map(|(x, y)| (x - y).powi(2)).sum::<f64>().sqrt();
    if err > 1e-8 * (1.0 + linalg::frobenius(&dense)) {
        return Err(Error::NoConvergence);
    }
    Ok((q, vals))
}

/// `x -> Φ(x)` with DC entries and a control `h` such that `v^T Φ v + h` is
/// convex for unit `v`.
#[derive(Clone, Debug, PartialEq)]
pub struct MatrixMap {
    pub dim: usize,
    pub p: usize,
    /// Full `p x p` array; entry `(i, j)` must equal entry `(j, i)`.
    pub entries: Vec<Vec<DCPair>>,
    pub control: ConvexFunc,
}

impl MatrixMap {
    pub fn new(entries: Vec<Vec<DCPair>>, control: ConvexFunc) -> Result<Self> {
        let p = entries.len();
        if p == 0 || p > MAX_ORDER {
            return Err(Error::InvalidInput(format!("matrix order must be in 1..={MAX_ORDER}")));
        }
        let dim = control.dim();
        for i in 0..p {
            check_dim(p, entries[i].len())?;
            for j in 0..p {
                check_dim(dim, entries[i][j].dim())?;
                if entries[i][j] != entries[j][i] {
                    return Err(Error::InvalidInput(format!("entry ({i}, {j}) differs from ({j}, {i})")));
                }
            }
        }
        Ok(MatrixMap { dim, p, entries, control })
    }

    /// Affine map `A0 + Σ x_k A_k` with zero control.
    pub fn affine(a0: &Mat, ak: &[Mat]) -> Result<Self> {
        let p = a0.len();
        let n = ak.len();
        let entries = (0..p)
            .map(|i| {
                (0..p)
                    .map(|j| {
                        let row: Vec<f64> = ak.iter().map(|a| 0.5 * (a[i][j] + a[j][i])).collect();
                        DCPair::new(ConvexFunc::affine(row, 0.5 * (a0[i][j] + a0[j][i])), ConvexFunc::zero(n)).unwrap()
                    })
                    .collect()
            })
            .collect();
        MatrixMap::new(entries, ConvexFunc::zero(n))
    }

    pub fn eval(&self, x: &[f64]) -> Result<SymMatrix> {
        check_dim(self.dim, x.len())?;
        let mut a = linalg::zeros(self.p, self.p);
        for i in 0..self.p {
            for j in i..self.p {
                let v = self.entries[i][j].eval(x);
                if !v.is_finite() {
                    return Err(Error::InfiniteValue);
                }
                a[i][j] = v;
                a[j][i] = v;
            }
        }
        SymMatrix::from_dense(&a)
    }

    pub fn max_eigenvalue(&self, x: &[f64]) -> Result<f64> {
        Ok(sym_eig(&self.eval(x)?)?.1[0])
    }

    /// Gradients `∂Φ_ij/∂x_k` at `x`, as one matrix per coordinate.
    pub fn jacobian(&self, x: &[f64]) -> Result<Vec<Mat>> {
        let mut out = vec![linalg::zeros(self.p, self.p); self.dim];
        for i in 0..self.p {
            for j in i..self.p {
                let g = dc_gradient(&self.entries[i][j], x)?;
                for k in 0..self.dim {
                    out[k][i][j] = g[k];
                    out[k][j][i] = g[k];
                }
            }
        }
        Ok(out)
    }

    /// Midpoint convexity of `v^T Φ v + h` over sampled unit `v` and pairs of
    /// grid points; returns the worst violation.
    pub fn validate(&self, grid: &[Vec<f64>], sphere_samples: usize, seed: u64) -> Result<f64> {
        let dirs = sphere_points(self.p, sphere_samples, seed);
        let mut worst: f64 = 0.0;
        let vals: Vec<Option<SymMatrix>> = grid.iter().map(|x| self.eval(x).ok()).collect();
        for (i, x) in grid.iter().enumerate() {
            for (j, y) in grid.iter().enumerate().skip(i + 1) {
                let (Some(a), Some(b)) = (&vals[i], &vals[j]) else { continue };
                let mid: Vec<f64> = x.iter().zip(y).map(|(s, t)| 0.5 * (s + t)).collect();
                let Ok(m) = self.eval(&mid) else { continue };
                let (hx, hy, hm) = (self.control.eval(x), self.control.eval(y), self.control.eval(&mid));
                for v in &dirs {
                    let fx = a.quad(v) + hx;
                    let fy = b.quad(v) + hy;
                    let fm = m.quad(v) + hm;
                    worst = worst.max((fm - 0.5 * (fx + fy)) / (1.0 + fx.abs().max(fy.abs())));
                }
            }
        }
        Ok(worst)
    }
}

/// Unit vectors: an angle grid in 2-D, seeded random directions otherwise.
pub fn sphere_points(p: usize, count: usize, seed: u64) -> Vec<Vec<f64>> {
    if p == 1 {
        return vec![vec![1.0]];
    }
    if p == 2 {
        return (0..count.max(4))
            .map(|k| {
                let t = std::f64::consts::PI * k as f64 / count.max(4) as f64;
                vec![t.cos(), t.sin()]
            })
            .collect();
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut out = Vec::with_capacity(count);
    while out.len() < count {
        let v: Vec<f64> = (0..p).map(|_| rng.random_range(-1.0..1.0)).collect();
        let n = linalg::norm2(&v);
        if n > 1e-3 && n <= 1.0 {
            out.push(linalg::scale(&v, 1.0 / n));
        }
    }
    out
}

/// `(λ_k(Φ(x)), Λ_k(Φ(x)))`: the k-th largest eigenvalue and the sum of the
/// k largest.
pub fn eigen_value_funcs(m: &MatrixMap, x: &[f64], k: usize) -> Result<(f64, f64)> {
    if k == 0 || k > m.p {
        return Err(Error::InvalidInput(format!("k must be in 1..={}", m.p)));
    }
    let (_, vals) = sym_eig(&m.eval(x)?)?;
    Ok((vals[k - 1], vals[..k].iter().sum()))
}

/// `|λ1(Φ(x)) + h(x) - max_{|v|=1} (v^T Φ(x) v + h(x))|` with the right side
/// from a sphere grid refined by shifted power iterations.
pub fn scalarization_equiv_check(m: &MatrixMap, x: &[f64], sphere_samples: usize, seed: u64) -> Result<f64> {
    let a = m.eval(x)?;
    let hx = m.control.eval(x);
    let lhs = sym_eig(&a)?.1[0] + hx;
    let dense = a.to_dense();
    let shift = linalg::frobenius(&dense) + 1.0;
    let mut best = sphere_points(m.p, sphere_samples, seed)
        .into_iter()
        .max_by(|u, v| a.quad(u).total_cmp(&a.quad(v)))
        .expect("at least one direction");
    for _ in 0..2000 {
        let w = linalg::axpy(&linalg::mat_vec(&dense, &best), shift, &best);
        let n = linalg::norm2(&w);
        let next = linalg::scale(&w, 1.0 / n);
        let done = linalg::norm_inf(&linalg::sub(&next, &best)) < 1e-15;
        best = next;
        if done {
            break;
        }
    }
    Ok((lhs - (a.quad(&best) + hx)).abs())
}

#[derive(Clone, Debug, Serialize)]
#[serde(tag = "kind")]
pub enum SdpOutcome {
    /// `0 ∈ ∂̂φ(x̄) + η D̂*Φ(x̄)(A) + N_Q(x̄)` with `A ⪰ 0`, `Tr A = 1`.
    Multiplier { a: SymMatrix, eta: f64, residual: f64, complementarity: f64, kernel_dim: usize },
    NoMultiplier { residual: f64 },
    Abstain { reason: String },
}

/// Options for [`sdp_check_local`].
#[derive(Clone, Debug)]
pub struct SdpOptions {
    pub tol: f64,
    /// Rotations per kernel plane when the kernel has dimension >= 2.
    pub rotations: usize,
}

impl Default for SdpOptions {
    fn default() -> Self {
        SdpOptions { tol: 1e-8, rotations: 32 }
    }
}

/// Unit vectors of the kernel used as rank-one generators.
fn kernel_generators(kernel: &[Vec<f64>], rotations: usize) -> Vec<Vec<f64>> {
    let mut out: Vec<Vec<f64>> = kernel.to_vec();
    for i in 0..kernel.len() {
        for j in i + 1..kernel.len() {
            for k in 1..rotations.max(2) {
                let t = std::f64::consts::PI * k as f64 / rotations.max(2) as f64;
                out.push(linalg::axpy(&linalg::scale(&kernel[i], t.cos()), t.sin(), &kernel[j]));
            }
        }
    }
    out
}

/// Local multiplier for `min φ` subject to `Φ(x) ⪯ 0`, `x ∈ Q`.
pub fn sdp_check_local(m: &MatrixMap, phi: &DCPair, q: Option<&Polytope>, x: &[f64], opts: &SdpOptions) -> Result<SdpOutcome> {
    check_dim(m.dim, phi.dim())?;
    check_dim(m.dim, x.len())?;
    let tol = opts.tol;
    let a = m.eval(x)?;
    let (vecs, vals) = sym_eig(&a)?;
    if vals[0] > tol.max(1e-9) * (1.0 + linalg::frobenius(&a.to_dense())) {
        return Err(Error::InfeasiblePoint(vals[0]));
    }
    if let Some(q) = q {
        let h = q.hrep()?;
        if !h.contains(x, 1e-9) {
            return Err(Error::InfeasiblePoint(h.violation(x)));
        }
    }
    let ktol = 1e-7 * (1.0 + linalg::frobenius(&a.to_dense()));
    let kernel: Vec<Vec<f64>> = (0..m.p).filter(|&k| vals[k] >= -ktol).map(|k| linalg::column(&vecs, k)).collect();
    let jac = m.jacobian(x)?;
    let gens = kernel_generators(&kernel, opts.rotations);
    // v^T ∇Φ v per generator
    let dirs: Vec<Vec<f64>> = gens.iter().map(|v| jac.iter().map(|jk| linalg::quad_form(jk, v)).collect()).collect();
    let qh = match q {
        Some(q) => Some(q.hrep()?.clone()),
        None => None,
    };

    if !gens.is_empty() {
        let mut p = Program::new();
        let th = p.vars(gens.len(), 0.0, f64::INFINITY);
        let mut s = Expr::new();
        for t in &th {
            s.add_term(*t, 1.0);
        }
        p.constrain_rhs(s, Cmp::Eq, 1.0);
        let mut slope: Vec<Expr> = (0..m.dim)
            .map(|k| {
                let mut e = Expr::new();
                for (t, d) in th.iter().zip(&dirs) {
                    e.add_term(*t, d[k]);
                }
                e
            })
            .collect();
        add_q(&mut p, qh.as_ref(), x, &mut slope)?;
        let r = residual(&mut p, &slope);
        p.minimize(Expr::var(r));
        let (v, sol) = crate::convex::min_value(&p)?;
        if v.is_finite() && sol[r.0] <= tol {
            return Ok(SdpOutcome::Abstain { reason: "QcViolated: 0 lies in the coderivative image over the kernel".into() });
        }
    }

    let solve = |cap: Option<f64>| -> Result<Option<(f64, Vec<f64>)>> {
        let mut p = Program::new();
        let th = p.vars(gens.len(), 0.0, f64::INFINITY);
        let mut slope = regular_slope(&mut p, phi, x)?;
        for (k, s) in slope.iter_mut().enumerate() {
            for (t, d) in th.iter().zip(&dirs) {
                s.add_term(*t, d[k]);
            }
        }
        add_q(&mut p, qh.as_ref(), x, &mut slope)?;
        let r = residual(&mut p, &slope);
        match cap {
            None => p.minimize(Expr::var(r)),
            Some(c) => {
                p.constrain_rhs(Expr::var(r), Cmp::Le, c);
                let mut s = Expr::new();
                for t in &th {
                    s.add_term(*t, 1.0);
                }
                p.minimize(s);
            }
        }
        let (v, sol) = crate::convex::min_value(&p)?;
        if !v.is_finite() {
            return Ok(None);
        }
        Ok(Some((sol[r.0], th.iter().map(|t| sol[t.0]).collect())))
    };
    let Some((r, mut w)) = solve(None)? else {
        return Ok(SdpOutcome::NoMultiplier { residual: f64::INFINITY });
    };
    if r > tol {
        return Ok(SdpOutcome::NoMultiplier { residual: r });
    }
    if let Some((_, w2)) = solve(Some(r * (1.0 + 1e-9)))? {
        w = w2;
    }
    let eta: f64 = w.iter().sum();
    let mut mat = linalg::zeros(m.p, m.p);
    if eta > 1e-14 {
        for (t, v) in w.iter().zip(&gens) {
            for i in 0..m.p {
                for j in 0..m.p {
                    mat[i][j] += t / eta * v[i] * v[j];
                }
            }
        }
    } else if let Some(v) = gens.first().or(kernel.first()) {
        for i in 0..m.p {
            for j in 0..m.p {
                mat[i][j] = v[i] * v[j];
            }
        }
    } else {
        for (i, row) in mat.iter_mut().enumerate() {
            row[i] = 1.0 / m.p as f64;
        }
    }
    let amat = SymMatrix::from_dense(&symmetrize(&mat))?;
    let complementarity = eta * amat.inner(&a);
    Ok(SdpOutcome::Multiplier { a: amat, eta, residual: r, complementarity, kernel_dim: kernel.len() })
}

fn symmetrize(m: &Mat) -> Mat {
    let p = m.len();
    (0..p).map(|i| (0..p).map(|j| 0.5 * (m[i][j] + m[j][i])).collect()).collect()
}

/// `<A, ∇Φ(x)>` per coordinate, for re-checking multipliers.
pub fn coderivative_image(m: &MatrixMap, x: &[f64], a: &SymMatrix) -> Result<Vec<f64>> {
    let jac = m.jacobian(x)?;
    Ok(jac.iter().map(|jk| dot(&jk.concat(), &a.to_dense().concat())).collect())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn diag_family() -> MatrixMap {
        MatrixMap::affine(&vec![vec![-1.0, 0.0], vec![0.0, -1.0]], &[vec![vec![1.0, 0.0], vec![0.0, -1.0]]]).unwrap()
    }

    #[test]
    fn eig_examples() {
        let (q, l) = sym_eig(&SymMatrix::from_dense(&vec![vec![3.0, 0.0], vec![0.0, 1.0]]).unwrap()).unwrap();
        assert_eq!(l, vec![3.0, 1.0]);
        assert!((q[0][0].abs() - 1.0).abs() < 1e-12);
        let (_, l) = sym_eig(&SymMatrix::from_dense(&vec![vec![0.0, 1.0], vec![1.0, 0.0]]).unwrap()).unwrap();
        assert!((l[0] - 1.0).abs() < 1e-12 && (l[1] + 1.0).abs() < 1e-12);
        let (_, l) = sym_eig(&SymMatrix::identity(4)).unwrap();
        assert!(l.iter().all(|v| (v - 1.0).abs() < 1e-12));
    }

    #[test]
    fn eigen_function_examples() {
        let m = MatrixMap::affine(&vec![vec![0.0, 0.0], vec![0.0, 0.0]], &[vec![vec![1.0, 0.0], vec![0.0, -1.0]]]).unwrap();
        let (l1, _) = eigen_value_funcs(&m, &[2.0], 1).unwrap();
        let (_, big2) = eigen_value_funcs(&m, &[2.0], 2).unwrap();
        assert!((l1 - 2.0).abs() < 1e-12 && big2.abs() < 1e-12);
        let c = MatrixMap::affine(&vec![vec![3.0, 0.0], vec![0.0, 1.0]], &[vec![vec![0.0, 0.0], vec![0.0, 0.0]]]).unwrap();
        assert!((eigen_value_funcs(&c, &[0.0], 2).unwrap().0 - 1.0).abs() < 1e-12);
    }

    #[test]
    fn scalarization_examples() {
        let m = MatrixMap::affine(&vec![vec![1.0, 0.0], vec![0.0, 0.0]], &[vec![vec![0.0, 0.0], vec![0.0, 0.0]]]).unwrap();
        assert!(scalarization_equiv_check(&m, &[0.0], 64, 1).unwrap() < 1e-9);
    }

    #[test]
    fn local_examples() {
        let m = diag_family();
        let q = Polytope::interval(-5.0, 5.0);
        let neg = DCPair::new(ConvexFunc::affine(vec![-1.0], 0.0), ConvexFunc::zero(1)).unwrap();
        match sdp_check_local(&m, &neg, Some(&q), &[1.0], &SdpOptions::default()).unwrap() {
            SdpOutcome::Multiplier { a, eta, complementarity, .. } => {
                assert!((a.get(0, 0) - 1.0).abs() < 1e-9);
                assert!((eta - 1.0).abs() < 1e-9);
                assert!(complementarity.abs() < 1e-8);
            }
            o => panic!("{o:?}"),
        }
        let sq = DCPair::new(ConvexFunc::square(1.0), ConvexFunc::zero(1)).unwrap();
        match sdp_check_local(&m, &sq, Some(&q), &[0.0], &SdpOptions::default()).unwrap() {
            SdpOutcome::Multiplier { eta, .. } => assert_eq!(eta, 0.0),
            o => panic!("{o:?}"),
        }
        assert!(matches!(
            sdp_check_local(&m, &neg, Some(&q), &[0.5], &SdpOptions::default()).unwrap(),
            SdpOutcome::NoMultiplier { .. }
        ));
    }
}
