//! Cone constraints `Φ(x) ∈ -K` for polyhedral `K`: compact bases of `K+`
//! and the cone versions of the certificates.

use serde::Serialize;

use crate::certificates::{
    global_engine, local_engine, sufficiency_engine, Certificate, Constraint, LocalCheck, Problem, SufficiencyReport,
};
use crate::calculus::EtaSchedule;
use crate::error::{check_dim, Error, Result};
use crate::geometry::{positive_polar, HRep, PolyCone, Polytope};
use crate::linalg::{self, dot};
use crate::opt::{Cmp, Expr, Outcome, Program};

/// A compact base `B` with `cone(B) = K+`.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ConeBase {
    #[serde(skip)]
    pub k: PolyCone,
    #[serde(skip)]
    pub kplus: PolyCone,
    #[serde(skip)]
    pub b: Polytope,
    pub e: Option<Vec<f64>>,
    /// `K+` contains a line, so `B` is a cross-polytope slice containing 0.
    pub non_pointed: bool,
}

impl ConeBase {
    pub fn vertices(&self) -> Result<Vec<Vec<f64>>> {
        self.b.extreme_points()
    }

    /// `max_{λ ∈ B} <λ, y>`; `y ∈ -K` iff this is `<= 0`.
    pub fn support(&self, y: &[f64]) -> Result<f64> {
        self.b.support(y)
    }
}

/// Direction `e` maximizing the inscribed radius of `K ∩ [-1, 1]^m`.
pub fn chebyshev_direction(k: &PolyCone) -> Result<Option<Vec<f64>>> {
    let rows = k.hrep_rows()?;
    let m = k.dim;
    let mut p = Program::new();
    let e = p.vars(m, -1.0, 1.0);
    let r = p.nonneg();
    for row in &rows {
        let mut ex = Expr::new();
        for (v, a) in e.iter().zip(row) {
            ex.add_term(*v, *a);
        }
        ex.add_term(r, linalg::norm2(row));
        p.constrain(ex, Cmp::Le);
    }
    p.minimize(Expr::var(r).scaled(-1.0));
    match p.solve() {
        Outcome::Optimal { x, .. } if x[r.0] > 1e-9 => Ok(Some(e.iter().map(|v| x[v.0]).collect())),
        Outcome::Optimal { .. } => Ok(None),
        Outcome::Failed(s) => Err(Error::Numeric(s)),
        _ => Ok(None),
    }
}

/// Builds `B = K+ ∩ {<e, λ> = 1}` for `e ∈ int K`, or the cross-polytope
/// slice of `K+` when `K` has empty interior.
pub fn make_base(k: &PolyCone, e: Option<&[f64]>) -> Result<ConeBase> {
    let kplus = positive_polar(k)?;
    if kplus.generators.is_empty() {
        return Err(Error::DegenerateCone);
    }
    let m = k.dim;
    let dir = match e {
        Some(e) => {
            check_dim(m, e.len())?;
            if kplus.generators.iter().any(|g| dot(g, e) <= 1e-12 * (1.0 + linalg::norm_inf(g))) {
                return Err(Error::NotInterior("base direction e must lie in the interior of K".into()));
            }
            Some(e.to_vec())
        }
        None if k.is_solid() => chebyshev_direction(k)?,
        None => None,
    };
    match dir {
        Some(e) => {
            let pts = kplus.generators.iter().map(|g| linalg::scale(g, 1.0 / dot(g, &e))).collect();
            let b = crate::geometry::convert(&Polytope::from_vertices(m, pts)?)?;
            Ok(ConeBase { k: k.clone(), kplus, b, e: Some(e), non_pointed: false })
        }
        None => {
            let mut h = HRep::new(m, Vec::new(), Vec::new())?;
            for row in kplus.hrep_rows()? {
                h.add_row(row, 0.0);
            }
            for mask in 0..(1usize << m) {
                let row = (0..m).map(|i| if mask >> i & 1 == 1 { -1.0 } else { 1.0 }).collect();
                h.add_row(row, 1.0);
            }
            let b = crate::geometry::convert(&Polytope::from_hrep(h))?;
            Ok(ConeBase { k: k.clone(), kplus, b, e: None, non_pointed: true })
        }
    }
}

fn require_cone(p: &Problem) -> Result<&ConeBase> {
    match &p.constraint {
        Constraint::Cone { base, .. } => Ok(base),
        _ => Err(Error::InvalidInput("problem has no cone constraint".into())),
    }
}

/// Global certificate for the cone-constrained problem.
pub fn check_cone_global(p: &Problem, x: &[f64], opts: &crate::certificates::CheckOptions) -> Result<Certificate> {
    let base = require_cone(p)?;
    if base.non_pointed {
        return Err(Error::Unsupported(
            "K+ is not pointed: its base contains 0 and the global certificate is vacuous; encode the equality part in Q".into(),
        ));
    }
    global_engine(p, x, opts)
}

/// Multipliers for the cone-constrained problem at `x̄`.
pub fn check_cone_local(p: &Problem, x: &[f64], tol: f64) -> Result<LocalCheck> {
    require_cone(p)?;
    local_engine(p, x, tol, false)
}

/// As [`check_cone_local`] with the `N_Q(x̄)` term; also reports the
/// qualification over all of `B`.
pub fn check_cone_local_with_q(p: &Problem, x: &[f64], tol: f64) -> Result<LocalCheck> {
    require_cone(p)?;
    if p.q.is_none() {
        return Err(Error::InvalidInput("problem has no Q".into()));
    }
    local_engine(p, x, tol, true)
}

pub fn check_cone_sufficient(p: &Problem, x: &[f64], schedule: &EtaSchedule, tol: f64) -> Result<SufficiencyReport> {
    require_cone(p)?;
    sufficiency_engine(p, x, schedule, tol)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::calculus::VectorMap;
    use crate::certificates::{small_schedule, CheckOptions, LocalVerdict, Verdict};
    use crate::convex::{ConvexFunc, DCPair};

    fn cone_problem(phi_obj: ConvexFunc, a: f64, b: f64, q: Option<Polytope>) -> Problem {
        let map = VectorMap::affine(vec![vec![a]], vec![b]).unwrap();
        let base = make_base(&PolyCone::orthant(1), None).unwrap();
        let obj = DCPair::new(phi_obj, ConvexFunc::zero(1)).unwrap();
        Problem::new(obj, Constraint::Cone { phi: map, base }, q).unwrap()
    }

    #[test]
    fn bases() {
        let b = make_base(&PolyCone::orthant(2), None).unwrap();
        assert!(b.b.same_set(&Polytope::simplex(2), 1e-9).unwrap());
        let b = make_base(&PolyCone::orthant(2), Some(&[1.0, 1.0])).unwrap();
        assert!(b.b.same_set(&Polytope::simplex(2), 1e-9).unwrap());
        let b = make_base(&PolyCone::orthant(1), Some(&[1.0])).unwrap();
        assert_eq!(b.vertices().unwrap(), vec![vec![1.0]]);
        let ray = PolyCone::new(2, vec![vec![1.0, 1.0]]).unwrap();
        let b = make_base(&ray, None).unwrap();
        assert!(b.non_pointed);
        for g in &b.kplus.generators {
            assert!(dot(g, &[1.0, 1.0]) >= -1e-12);
        }
        let whole = PolyCone::new(1, vec![vec![1.0], vec![-1.0]]).unwrap();
        assert_eq!(make_base(&whole, None).unwrap_err(), Error::DegenerateCone);
    }

    #[test]
    fn cone_global_examples() {
        let o = CheckOptions::default();
        let p = cone_problem(ConvexFunc::abs(), 1.0, -1.0, None);
        let c = check_cone_global(&p, &[0.0], &o).unwrap();
        assert!(c.holds());
        let p = cone_problem(ConvexFunc::affine(vec![-1.0], 0.0), 1.0, -1.0, None);
        let c = check_cone_global(&p, &[1.0], &o).unwrap();
        assert!(c.holds());
        assert!(matches!(check_cone_global(&p, &[0.5], &o).unwrap().verdict, Verdict::Fails { .. }));
    }

    #[test]
    fn cone_local_examples() {
        let p = cone_problem(ConvexFunc::affine(vec![-1.0], 0.0), 1.0, -1.0, None);
        let l = check_cone_local(&p, &[1.0], 1e-9).unwrap();
        let cf = l.cone_form.unwrap();
        assert!((cf.eta - 1.0).abs() < 1e-9 && (cf.lambda[0] - 1.0).abs() < 1e-9);
        let p = cone_problem(ConvexFunc::square(1.0), 1.0, -1.0, None);
        let l = check_cone_local(&p, &[0.0], 1e-9).unwrap();
        assert!(l.face.is_empty());
        assert_eq!(l.multipliers.unwrap().alpha, [1.0, 0.0]);
    }

    #[test]
    fn cone_local_with_q_examples() {
        let q = Some(Polytope::interval(-1.0, 1.0));
        let p = cone_problem(ConvexFunc::affine(vec![1.0], 0.0), -1.0, 0.0, q.clone());
        let l = check_cone_local_with_q(&p, &[0.0], 1e-9).unwrap();
        assert!((l.cone_form.unwrap().eta - 1.0).abs() < 1e-9);
        let p = cone_problem(ConvexFunc::affine(vec![-1.0], 0.0), -1.0, 0.0, q.clone());
        let l = check_cone_local_with_q(&p, &[1.0], 1e-9).unwrap();
        assert_eq!(l.multipliers.unwrap().alpha, [1.0, 0.0]);
        let p = cone_problem(ConvexFunc::affine(vec![1.0], 0.0), 0.0, 0.0, q);
        let l = check_cone_local_with_q(&p, &[0.0], 1e-9).unwrap();
        assert!(!l.qc && l.cone_form.is_none());
    }

    #[test]
    fn cone_sufficient_examples() {
        let p = cone_problem(ConvexFunc::affine(vec![-1.0], 0.0), 1.0, -1.0, None);
        let r = check_cone_sufficient(&p, &[1.0], &small_schedule(), 1e-9).unwrap();
        assert_eq!(r.verdict, LocalVerdict::LocalMin);
        let r = check_cone_sufficient(&p, &[0.5], &small_schedule(), 1e-9).unwrap();
        assert!(matches!(r.verdict, LocalVerdict::NotCertified { .. }));
    }
}
