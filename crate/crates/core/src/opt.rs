//! Linear and second-order-cone programs.
//!
//! Purely linear programs go to the simplex solver in `microlp`; anything with
//! a cone constraint goes to the interior point solver in `clarabel`.

use clarabel::algebra::CscMatrix;
use clarabel::solver::{
    DefaultSettingsBuilder, DefaultSolver, IPSolver, NonnegativeConeT, SecondOrderConeT,
    SolverStatus, SupportedConeT, ZeroConeT,
};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct Var(pub usize);

/// Affine expression `sum coeff * var + constant`.
#[derive(Clone, Debug, Default)]
pub struct Expr {
    pub terms: Vec<(Var, f64)>,
    pub constant: f64,
}

impl Expr {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn constant(c: f64) -> Self {
        Expr { terms: Vec::new(), constant: c }
    }

    pub fn var(v: Var) -> Self {
        Expr { terms: vec![(v, 1.0)], constant: 0.0 }
    }

    pub fn add_term(&mut self, v: Var, c: f64) -> &mut Self {
        if c != 0.0 {
            self.terms.push((v, c));
        }
        self
    }

    pub fn add_const(&mut self, c: f64) -> &mut Self {
        self.constant += c;
        self
    }

    /// `self += t * other`
    pub fn add_scaled(&mut self, other: &Expr, t: f64) -> &mut Self {
        if t != 0.0 {
            for &(v, c) in &other.terms {
                self.terms.push((v, c * t));
            }
            self.constant += other.constant * t;
        }
        self
    }

    pub fn scaled(&self, t: f64) -> Expr {
        let mut e = Expr::new();
        e.add_scaled(self, t);
        e
    }

    pub fn value(&self, x: &[f64]) -> f64 {
        self.constant + self.terms.iter().map(|(v, c)| c * x[v.0]).sum::<f64>()
    }

    pub fn is_constant(&self) -> bool {
        self.terms.iter().all(|(_, c)| *c == 0.0)
    }

    /// Merges repeated variables.
    fn compact(&self) -> Vec<(usize, f64)> {
        let mut acc: Vec<(usize, f64)> = Vec::new();
        for &(v, c) in &self.terms {
            match acc.iter_mut().find(|(i, _)| *i == v.0) {
                Some(slot) => slot.1 += c,
                None => acc.push((v.0, c)),
            }
        }
        acc.retain(|(_, c)| *c != 0.0);
        acc
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Cmp {
    Le,
    Ge,
    Eq,
}

#[derive(Clone, Debug)]
struct Row {
    expr: Expr,
    cmp: Cmp,
}

/// Outcome of a solve.
#[derive(Clone, Debug)]
pub enum Outcome {
    Optimal { x: Vec<f64>, objective: f64 },
    Infeasible,
    Unbounded,
    Failed(String),
}

impl Outcome {
    pub fn objective(&self) -> Option<f64> {
        match self {
            Outcome::Optimal { objective, .. } => Some(*objective),
            _ => None,
        }
    }
}

/// A minimization problem with linear rows and optional second-order cones.
#[derive(Clone, Debug, Default)]
pub struct Program {
    lower: Vec<f64>,
    upper: Vec<f64>,
    objective: Expr,
    rows: Vec<Row>,
    /// Each cone is `e[0] >= ||(e[1], ..., e[k])||`.
    socs: Vec<Vec<Expr>>,
    /// Entries `(i, j, v)` of `P` in the objective term `x^T P x / 2`.
    quad: Vec<(usize, usize, f64)>,
}

impl Program {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn num_vars(&self) -> usize {
        self.lower.len()
    }

    pub fn var(&mut self, lower: f64, upper: f64) -> Var {
        self.lower.push(lower);
        self.upper.push(upper);
        Var(self.lower.len() - 1)
    }

    pub fn free(&mut self) -> Var {
        self.var(f64::NEG_INFINITY, f64::INFINITY)
    }

    pub fn nonneg(&mut self) -> Var {
        self.var(0.0, f64::INFINITY)
    }

    pub fn vars(&mut self, k: usize, lower: f64, upper: f64) -> Vec<Var> {
        (0..k).map(|_| self.var(lower, upper)).collect()
    }

    /// Adds `expr (cmp) 0`.
    pub fn constrain(&mut self, expr: Expr, cmp: Cmp) {
        self.rows.push(Row { expr, cmp });
    }

    pub fn constrain_rhs(&mut self, mut expr: Expr, cmp: Cmp, rhs: f64) {
        expr.constant -= rhs;
        self.constrain(expr, cmp);
    }

    pub fn soc(&mut self, parts: Vec<Expr>) {
        self.socs.push(parts);
    }

    /// `2 * a * b >= ||w||^2` with `a, b >= 0`.
    pub fn rotated_soc(&mut self, a: Expr, b: Expr, w: Vec<Expr>) {
        let mut head = a.clone();
        head.add_scaled(&b, 1.0);
        let mut diff = a;
        diff.add_scaled(&b, -1.0);
        let mut parts = vec![head, diff];
        for e in w {
            parts.push(e.scaled(std::f64::consts::SQRT_2));
        }
        self.socs.push(parts);
    }

    pub fn minimize(&mut self, objective: Expr) {
        self.objective = objective;
    }

    /// Adds `x^T Q x / 2` to the objective (`Q` symmetric PSD).
    pub fn add_quadratic_objective(&mut self, x: &[Var], q: &[Vec<f64>]) {
        for (i, vi) in x.iter().enumerate() {
            for (j, vj) in x.iter().enumerate() {
                if q[i][j] != 0.0 {
                    self.quad.push((vi.0, vj.0, q[i][j]));
                }
            }
        }
    }

    pub fn has_cones(&self) -> bool {
        !self.socs.is_empty()
    }

    pub fn solve(&self) -> Outcome {
        if self.socs.is_empty() && self.quad.is_empty() {
            self.solve_lp()
        } else {
            self.solve_conic()
        }
    }

    fn solve_lp(&self) -> Outcome {
        use microlp::{ComparisonOp, Error, LinearExpr, OptimizationDirection, Problem, SolveOutcome};
        let n = self.num_vars();
        let mut obj = vec![0.0; n];
        for (i, c) in self.objective.compact() {
            obj[i] += c;
        }
        let mut p = Problem::new(OptimizationDirection::Minimize);
        let vars: Vec<_> = (0..n).map(|i| p.add_var(obj[i], (self.lower[i], self.upper[i]))).collect();
        for row in &self.rows {
            let terms = row.expr.compact();
            if terms.is_empty() {
                let ok = match row.cmp {
                    Cmp::Le => row.expr.constant <= 1e-12,
                    Cmp::Ge => row.expr.constant >= -1e-12,
                    Cmp::Eq => row.expr.constant.abs() <= 1e-12,
                };
                if !ok {
                    return Outcome::Infeasible;
                }
                continue;
            }
            let mut e = LinearExpr::empty();
            for (i, c) in terms {
                e.add(vars[i], c);
            }
            let op = match row.cmp {
                Cmp::Le => ComparisonOp::Le,
                Cmp::Ge => ComparisonOp::Ge,
                Cmp::Eq => ComparisonOp::Eq,
            };
            p.add_constraint(e, op, -row.expr.constant);
        }
        match p.solve() {
            Ok(SolveOutcome::Solution(sol)) => {
                let x: Vec<f64> = vars.iter().map(|v| sol.var_value(*v)).collect();
                let objective = sol.objective() + self.objective.constant;
                Outcome::Optimal { x, objective }
            }
            Ok(SolveOutcome::Interrupted(_)) => Outcome::Failed("interrupted".into()),
            Err(Error::Infeasible) => Outcome::Infeasible,
            Err(Error::Unbounded) => Outcome::Unbounded,
            Err(e) => Outcome::Failed(e.to_string()),
        }
    }

    fn solve_conic(&self) -> Outcome {
        let n = self.num_vars();
        // rows of A x + s = b
        let mut zero_rows: Vec<(Vec<(usize, f64)>, f64)> = Vec::new();
        let mut nn_rows: Vec<(Vec<(usize, f64)>, f64)> = Vec::new();
        for row in &self.rows {
            let t = row.expr.compact();
            let c = row.expr.constant;
            match row.cmp {
                // a x + c <= 0  ->  s = -c - a x >= 0
                Cmp::Le => nn_rows.push((t, -c)),
                Cmp::Ge => nn_rows.push((t.into_iter().map(|(i, v)| (i, -v)).collect(), c)),
                Cmp::Eq => zero_rows.push((t, -c)),
            }
        }
        for i in 0..n {
            if self.lower[i].is_finite() {
                nn_rows.push((vec![(i, -1.0)], -self.lower[i]));
            }
            if self.upper[i].is_finite() {
                nn_rows.push((vec![(i, 1.0)], self.upper[i]));
            }
        }
        let mut all = Vec::new();
        let mut cones: Vec<SupportedConeT<f64>> = Vec::new();
        if !zero_rows.is_empty() {
            cones.push(ZeroConeT(zero_rows.len()));
            all.extend(zero_rows);
        }
        if !nn_rows.is_empty() {
            cones.push(NonnegativeConeT(nn_rows.len()));
            all.extend(nn_rows);
        }
        for cone in &self.socs {
            cones.push(SecondOrderConeT(cone.len()));
            for e in cone {
                // s = e(x) = a x + c  ->  A row = -a, b = c
                let t = e.compact().into_iter().map(|(i, v)| (i, -v)).collect();
                all.push((t, e.constant));
            }
        }
        let m = all.len();
        let mut dense = vec![vec![0.0; n]; m];
        let mut b = vec![0.0; m];
        for (r, (terms, rhs)) in all.iter().enumerate() {
            for &(i, v) in terms {
                dense[r][i] += v;
            }
            b[r] = *rhs;
        }
        let a = csc_from_dense(&dense, m, n);
        let p = if self.quad.is_empty() {
            CscMatrix::zeros((n, n))
        } else {
            let mut dp = vec![vec![0.0; n]; n];
            for &(i, j, v) in &self.quad {
                if i <= j {
                    dp[i][j] += v;
                }
            }
            csc_from_dense(&dp, n, n)
        };
        let mut q = vec![0.0; n];
        for (i, c) in self.objective.compact() {
            q[i] += c;
        }
        let settings = DefaultSettingsBuilder::default()
            .verbose(false)
            .tol_gap_abs(1e-10)
            .tol_gap_rel(1e-10)
            .tol_feas(1e-10)
            .max_iter(200)
            .build()
            .expect("valid settings");
        let mut solver = match DefaultSolver::new(&p, &q, &a, &b, &cones, settings) {
            Ok(s) => s,
            Err(e) => return Outcome::Failed(format!("{e:?}")),
        };
        solver.solve();
        let sol = &solver.solution;
        match sol.status {
            SolverStatus::Solved | SolverStatus::AlmostSolved => Outcome::Optimal {
                x: sol.x.clone(),
                objective: sol.obj_val + self.objective.constant,
            },
            SolverStatus::PrimalInfeasible | SolverStatus::AlmostPrimalInfeasible => Outcome::Infeasible,
            SolverStatus::DualInfeasible | SolverStatus::AlmostDualInfeasible => Outcome::Unbounded,
            s => Outcome::Failed(format!("{s:?}")),
        }
    }
}

fn csc_from_dense(dense: &[Vec<f64>], m: usize, n: usize) -> CscMatrix<f64> {
    let mut colptr = vec![0usize];
    let mut rowval = Vec::new();
    let mut nzval = Vec::new();
    for j in 0..n {
        for (i, row) in dense.iter().enumerate() {
            if row[j] != 0.0 {
                rowval.push(i);
                nzval.push(row[j]);
            }
        }
        colptr.push(rowval.len());
    }
    CscMatrix::new(m, n, colptr, rowval, nzval)
}
