//! Small dense linear algebra on `Vec<f64>` rows.
//!
//! Dimensions in this crate are tiny (n <= 8 for most inputs), so everything
//! here is written for clarity rather than cache efficiency.

pub type Mat = Vec<Vec<f64>>;

pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

pub fn norm2(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}

pub fn norm_inf(a: &[f64]) -> f64 {
    a.iter().fold(0.0, |m, x| m.max(x.abs()))
}

pub fn sub(a: &[f64], b: &[f64]) -> Vec<f64> {
    a.iter().zip(b).map(|(x, y)| x - y).collect()
}

pub fn add(a: &[f64], b: &[f64]) -> Vec<f64> {
    a.iter().zip(b).map(|(x, y)| x + y).collect()
}

pub fn scale(a: &[f64], t: f64) -> Vec<f64> {
    a.iter().map(|x| x * t).collect()
}

/// `a + t * b`
pub fn axpy(a: &[f64], t: f64, b: &[f64]) -> Vec<f64> {
    a.iter().zip(b).map(|(x, y)| x + t * y).collect()
}

pub fn mat_vec(m: &Mat, x: &[f64]) -> Vec<f64> {
    m.iter().map(|row| dot(row, x)).collect()
}

/// `m^T y`
pub fn mat_t_vec(m: &Mat, y: &[f64], ncols: usize) -> Vec<f64> {
    let mut out = vec![0.0; ncols];
    for (row, &yi) in m.iter().zip(y) {
        for (o, r) in out.iter_mut().zip(row) {
            *o += r * yi;
        }
    }
    out
}

pub fn quad_form(q: &Mat, x: &[f64]) -> f64 {
    dot(x, &mat_vec(q, x))
}

pub fn zeros(n: usize, m: usize) -> Mat {
    vec![vec![0.0; m]; n]
}

pub fn identity(n: usize) -> Mat {
    let mut m = zeros(n, n);
    for (i, row) in m.iter_mut().enumerate() {
        row[i] = 1.0;
    }
    m
}

pub fn transpose(m: &Mat, ncols: usize) -> Mat {
    let mut t = zeros(ncols, m.len());
    for (i, row) in m.iter().enumerate() {
        for (j, v) in row.iter().enumerate() {
            t[j][i] = *v;
        }
    }
    t
}

pub fn mat_mul(a: &Mat, b: &Mat) -> Mat {
    let m = b.first().map_or(0, |r| r.len());
    a.iter()
        .map(|row| {
            (0..m)
                .map(|j| row.iter().zip(b).map(|(x, br)| x * br[j]).sum())
                .collect()
        })
        .collect()
}

pub fn frobenius(m: &Mat) -> f64 {
    m.iter().flatten().map(|v| v * v).sum::<f64>().sqrt()
}

/// Solves a square system by Gaussian elimination with partial pivoting.
/// Returns `None` when the matrix is numerically singular.
pub fn solve(a: &Mat, b: &[f64]) -> Option<Vec<f64>> {
    let n = b.len();
    let mut m: Mat = a.iter().zip(b).map(|(r, &bi)| {
        let mut row = r.clone();
        row.push(bi);
        row
    }).collect();
    let scale = frobenius(a).max(1.0);
    for col in 0..n {
        let piv = (col..n).max_by(|&i, &j| m[i][col].abs().total_cmp(&m[j][col].abs()))?;
        if m[piv][col].abs() <= 1e-12 * scale {
            return None;
        }
        m.swap(col, piv);
        for r in col + 1..n {
            let f = m[r][col] / m[col][col];
            if f != 0.0 {
                for c in col..=n {
                    m[r][c] -= f * m[col][c];
                }
            }
        }
    }
    let mut x = vec![0.0; n];
    for i in (0..n).rev() {
        let s: f64 = (i + 1..n).map(|j| m[i][j] * x[j]).sum();
        x[i] = (m[i][n] - s) / m[i][i];
    }
    Some(x)
}

/// Cyclic Jacobi eigen-decomposition of a symmetric matrix.
///
/// Returns eigenvalues in descending order and the matching orthonormal
/// eigenvectors as the columns of the second matrix.
pub fn jacobi_eigen(a: &Mat) -> (Vec<f64>, Mat) {
    let n = a.len();
    let mut m = a.clone();
    // symmetrize defensively
    for i in 0..n {
        for j in 0..i {
            let v = 0.5 * (m[i][j] + m[j][i]);
            m[i][j] = v;
            m[j][i] = v;
        }
    }
    let mut v = identity(n);
    let total = frobenius(&m).max(f64::MIN_POSITIVE);
    for _sweep in 0..100 {
        let off: f64 = (0..n)
            .flat_map(|i| (0..n).filter(move |&j| j != i).map(move |j| (i, j)))
            .map(|(i, j)| m[i][j] * m[i][j])
            .sum::<f64>()
            .sqrt();
        if off <= 1e-15 * total {
            break;
        }
        for p in 0..n {
            for q in p + 1..n {
                let apq = m[p][q];
                if apq.abs() <= 1e-300 {
                    continue;
                }
                let theta = (m[q][q] - m[p][p]) / (2.0 * apq);
                let sign = if theta >= 0.0 { 1.0 } else { -1.0 };
                let t = sign / (theta.abs() + (theta * theta + 1.0).sqrt());
                let c = 1.0 / (t * t + 1.0).sqrt();
                let s = t * c;
                for k in 0..n {
                    let mkp = m[k][p];
                    let mkq = m[k][q];
                    m[k][p] = c * mkp - s * mkq;
                    m[k][q] = s * mkp + c * mkq;
                }
                for k in 0..n {
                    let mpk = m[p][k];
                    let mqk = m[q][k];
                    m[p][k] = c * mpk - s * mqk;
                    m[q][k] = s * mpk + c * mqk;
                }
                for row in v.iter_mut() {
                    let vkp = row[p];
                    let vkq = row[q];
                    row[p] = c * vkp - s * vkq;
                    row[q] = s * vkp + c * vkq;
                }
            }
        }
    }
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| m[j][j].total_cmp(&m[i][i]));
    let vals = order.iter().map(|&i| m[i][i]).collect();
    let vecs = (0..n).map(|r| order.iter().map(|&c| v[r][c]).collect()).collect();
    (vals, vecs)
}

/// Column `j` of a row-major matrix.
pub fn column(m: &Mat, j: usize) -> Vec<f64> {
    m.iter().map(|r| r[j]).collect()
}

/// Orthonormal basis of the null space of the rows of `a` (vectors in R^n).
pub fn null_space(a: &[Vec<f64>], n: usize, tol: f64) -> Vec<Vec<f64>> {
    if a.is_empty() {
        return (0..n).map(|i| unit(n, i)).collect();
    }
    let mut ata = zeros(n, n);
    for row in a {
        for i in 0..n {
            for j in 0..n {
                ata[i][j] += row[i] * row[j];
            }
        }
    }
    let (vals, vecs) = jacobi_eigen(&ata);
    let top = vals.first().copied().unwrap_or(0.0).max(1.0);
    (0..n)
        .filter(|&k| vals[k].abs() <= tol * top)
        .map(|k| column(&vecs, k))
        .collect()
}

/// Orthonormal basis of the row span of `a`.
pub fn row_space(a: &[Vec<f64>], n: usize, tol: f64) -> Vec<Vec<f64>> {
    if a.is_empty() {
        return Vec::new();
    }
    let mut ata = zeros(n, n);
    for row in a {
        for i in 0..n {
            for j in 0..n {
                ata[i][j] += row[i] * row[j];
            }
        }
    }
    let (vals, vecs) = jacobi_eigen(&ata);
    let top = vals.first().copied().unwrap_or(0.0).max(1.0);
    (0..n)
        .filter(|&k| vals[k].abs() > tol * top)
        .map(|k| column(&vecs, k))
        .collect()
}

pub fn unit(n: usize, i: usize) -> Vec<f64> {
    let mut e = vec![0.0; n];
    e[i] = 1.0;
    e
}

/// Smallest eigenvalue of a symmetric matrix (0 for the empty matrix).
pub fn min_eigenvalue(a: &Mat) -> f64 {
    if a.is_empty() {
        return 0.0;
    }
    let (vals, _) = jacobi_eigen(a);
    *vals.last().unwrap()
}

/// Eigen data of a PSD matrix split into range and kernel parts.
pub struct PsdSplit {
    /// `(eigenvalue, eigenvector)` with eigenvalue above the cutoff.
    pub range: Vec<(f64, Vec<f64>)>,
    pub kernel: Vec<Vec<f64>>,
}

pub fn psd_split(q: &Mat, tol: f64) -> PsdSplit {
    let n = q.len();
    let (vals, vecs) = jacobi_eigen(q);
    let top = vals.iter().fold(0.0f64, |m, v| m.max(v.abs())).max(1.0);
    let mut range = Vec::new();
    let mut kernel = Vec::new();
    for k in 0..n {
        let v = column(&vecs, k);
        if vals[k] > tol * top {
            range.push((vals[k], v));
        } else {
            kernel.push(v);
        }
    }
    PsdSplit { range, kernel }
}

pub fn approx_eq(a: &[f64], b: &[f64], tol: f64) -> bool {
    a.len() == b.len() && a.iter().zip(b).all(|(x, y)| (x - y).abs() <= tol)
}

pub fn lex_cmp(a: &[f64], b: &[f64]) -> std::cmp::Ordering {
    for (x, y) in a.iter().zip(b) {
        match x.total_cmp(y) {
            std::cmp::Ordering::Equal => continue,
            o => return o,
        }
    }
    a.len().cmp(&b.len())
}

/// Removes near-duplicate points, keeping the first occurrence.
pub fn dedup_points(points: Vec<Vec<f64>>, tol: f64) -> Vec<Vec<f64>> {
    let mut out: Vec<Vec<f64>> = Vec::new();
    for p in points {
        if !out.iter().any(|q| approx_eq(q, &p, tol)) {
            out.push(p);
        }
    }
    out
}
