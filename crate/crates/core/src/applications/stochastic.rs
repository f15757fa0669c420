//! Finite expectations `Σ_ω w_ω φ_ω` of DC functions.

use super::{residual, regular_slope};
use crate::convex::{add_normal_cone, min_value, Catalog, DCPair};
use crate::error::{check_dim, Error, Result};
use crate::opt::{Expr, Program};

/// `x* ∈ Σ w_ω ∂̂φ_ω(x̄) + N_D(x̄)` with `D` the common domain.
pub fn expected_subdiff_contains(terms: &[(f64, DCPair)], x: &[f64], s: &[f64], tol: f64) -> Result<bool> {
    if terms.is_empty() {
        return Err(Error::InvalidInput("no terms".into()));
    }
    let n = x.len();
    check_dim(n, s.len())?;
    let mut total = 0.0;
    for (w, f) in terms {
        check_dim(n, f.dim())?;
        if *w < 0.0 || !w.is_finite() {
            return Err(Error::InvalidInput(format!("weight {w} must be nonnegative")));
        }
        let v = f.eval(x);
        if !v.is_finite() {
            return Err(Error::ImproperSum);
        }
        total += w * v;
    }
    if !total.is_finite() {
        return Err(Error::ImproperSum);
    }
    let mut p = Program::new();
    let mut slope: Vec<Expr> = s.iter().map(|v| Expr::constant(-v)).collect();
    for (w, f) in terms {
        if *w == 0.0 {
            continue;
        }
        let part = regular_slope(&mut p, f, x)?;
        for (a, b) in slope.iter_mut().zip(&part) {
            a.add_scaled(b, *w);
        }
    }
    // zero-weight terms still restrict the domain
    let mut cat = Catalog::new(n);
    for (_, f) in terms {
        cat.add(&f.u)?;
    }
    for d in &cat.domains {
        add_normal_cone(&mut p, d, x, &mut slope)?;
    }
    let r = residual(&mut p, &slope);
    p.minimize(Expr::var(r));
    let (v, sol) = min_value(&p)?;
    Ok(v.is_finite() && sol[r.0] <= tol)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::convex::{regular_subdiff_contains, ConvexFunc};

    #[test]
    fn expectation_examples() {
        let abs = DCPair::new(ConvexFunc::abs(), ConvexFunc::zero(1)).unwrap();
        let sq = DCPair::new(ConvexFunc::square(1.0), ConvexFunc::zero(1)).unwrap();
        let terms = vec![(0.5, abs.clone()), (0.5, sq)];
        assert!(expected_subdiff_contains(&terms, &[1.0], &[1.5], 1e-9).unwrap());
        assert!(!expected_subdiff_contains(&terms, &[1.0], &[3.0], 1e-9).unwrap());
        for s in [-1.0, -0.5, 0.0, 0.7, 1.2] {
            let a = expected_subdiff_contains(&[(1.0, abs.clone())], &[0.0], &[s], 1e-9).unwrap();
            assert_eq!(a, regular_subdiff_contains(&ConvexFunc::abs(), &[0.0], &[s], 1e-9).unwrap());
        }
    }
}
