//! Instantiations: semi-infinite programs on a finite index grid, finite
//! expectations, and semidefinite constraints.

pub mod sdp;
pub mod sip;
pub mod stochastic;

use crate::convex::{add_normal_cone, add_subdiff_block, Block, Catalog, DCPair};
use crate::error::Result;
use crate::geometry::HRep;
use crate::opt::{Cmp, Expr, Program, Var};

/// Adds `∂̂(u - h)(x) = ∂u(x) - ∇h(x)` (h differentiable) and returns the slope.
pub(crate) fn regular_slope(p: &mut Program, f: &DCPair, x: &[f64]) -> Result<Vec<Expr>> {
    let grad_h = crate::convex::grad(&f.h, x)?;
    let mut cat = Catalog::new(f.dim());
    let cu = cat.add(&f.u)?;
    let mut slope = add_subdiff_block(p, &cat, &Block::constant(&cat, &cu), x)?;
    for (s, g) in slope.iter_mut().zip(&grad_h) {
        s.add_const(-g);
    }
    Ok(slope)
}

/// Adds `N_Q(x)` when `q` is present.
pub(crate) fn add_q(p: &mut Program, q: Option<&HRep>, x: &[f64], slope: &mut [Expr]) -> Result<()> {
    if let Some(q) = q {
        add_normal_cone(p, q, x, slope)?;
    }
    Ok(())
}

/// Adds `|slope_i| <= r` and returns `r`.
pub(crate) fn residual(p: &mut Program, slope: &[Expr]) -> Var {
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

/// `∇(u - h)(x)` for a DC pair with both parts differentiable.
pub(crate) fn dc_gradient(f: &DCPair, x: &[f64]) -> Result<Vec<f64>> {
    let gu = crate::convex::grad(&f.u, x)?;
    let gh = crate::convex::grad(&f.h, x)?;
    Ok(crate::linalg::sub(&gu, &gh))
}

