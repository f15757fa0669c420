#![allow(dead_code)]

use dccert::conic::make_base;
use dccert::oracle::GridSpec;
use dccert::{Constraint, ConvexFunc, DCPair, PolyCone, Polytope, Problem, VectorMap};

/// `max_i <a_i, x> + b_i` from rows `[a..., b]`.
pub fn ma(rows: &[&[f64]]) -> ConvexFunc {
    let pieces = rows
        .iter()
        .map(|r| {
            let (b, a) = r.split_last().unwrap();
            dccert::Piece::new(a.to_vec(), *b)
        })
        .collect();
    ConvexFunc::max_affine(pieces).unwrap()
}

pub fn aff(a: &[f64], b: f64) -> ConvexFunc {
    ConvexFunc::affine(a.to_vec(), b)
}

pub fn sum(terms: Vec<ConvexFunc>) -> ConvexFunc {
    ConvexFunc::sum(terms).unwrap()
}

/// `t ||x||_1` in R^n.
pub fn l1(n: usize, t: f64) -> ConvexFunc {
    let rows: Vec<Vec<f64>> = (0..1usize << n)
        .map(|mask| {
            let mut r: Vec<f64> = (0..n).map(|i| if mask >> i & 1 == 1 { -t } else { t }).collect();
            r.push(0.0);
            r
        })
        .collect();
    ma(&rows.iter().map(|r| r.as_slice()).collect::<Vec<_>>())
}

/// `t ||x||_inf` in R^n.
pub fn linf(n: usize, t: f64) -> ConvexFunc {
    let mut rows = Vec::new();
    for i in 0..n {
        for s in [t, -t] {
            let mut r = vec![0.0; n + 1];
            r[i] = s;
            rows.push(r);
        }
    }
    ma(&rows.iter().map(|r| r.as_slice()).collect::<Vec<_>>())
}

/// `Φ(x) = A x + b` written with control `h`: components `A_j x + b_j + h`.
pub fn affine_map(h: &ConvexFunc, a: &[&[f64]], b: &[f64]) -> VectorMap {
    let zero = *h == ConvexFunc::zero(h.dim());
    let comps = a
        .iter()
        .zip(b)
        .map(|(row, bj)| if zero { aff(row, *bj) } else { sum(vec![aff(row, *bj), h.clone()]) })
        .collect();
    VectorMap::new(comps, h.clone()).unwrap()
}

pub fn set_problem(g: ConvexFunc, h: ConvexFunc, phi: VectorMap, c: Polytope, z0: &[f64], q: Option<Polytope>) -> Problem {
    let obj = DCPair::new(g, h).unwrap();
    Problem::new(obj, Constraint::Set { phi, c, z0: z0.to_vec() }, q).unwrap()
}

/// One golden problem with oracle-verified data.
pub struct Case {
    pub name: &'static str,
    pub problem: Problem,
    pub lo: Vec<f64>,
    pub hi: Vec<f64>,
    /// A grid minimizer and the frozen grid minimum.
    pub opt: Vec<f64>,
    pub value: f64,
    /// Feasible points that are not optimal.
    pub perturbed: Vec<Vec<f64>>,
    /// Feasible boundary point that is not optimal.
    pub boundary: Vec<f64>,
    /// `boundary` is a local minimizer, so multipliers are expected there.
    pub stationary_boundary: bool,
}

impl Case {
    pub fn grid(&self) -> GridSpec {
        GridSpec::new(self.lo.clone(), self.hi.clone(), 201).unwrap()
    }

    pub fn dim(&self) -> usize {
        self.lo.len()
    }
}

#[allow(clippy::too_many_arguments)]
fn case(
    name: &'static str,
    problem: Problem,
    lo: &[f64],
    hi: &[f64],
    opt: &[f64],
    value: f64,
    perturbed: &[&[f64]],
    boundary: &[f64],
    stationary_boundary: bool,
) -> Case {
    Case {
        name,
        problem,
        lo: lo.to_vec(),
        hi: hi.to_vec(),
        opt: opt.to_vec(),
        value,
        perturbed: perturbed.iter().map(|p| p.to_vec()).collect(),
        boundary: boundary.to_vec(),
        stationary_boundary,
    }
}

fn iv(lo: f64, hi: f64) -> Polytope {
    Polytope::interval(lo, hi)
}

fn bx(lo: &[f64], hi: &[f64]) -> Polytope {
    Polytope::boxed(lo, hi)
}

/// The 20 golden problems. Grid minima were computed with
/// `oracle::brute_min` on 201 points per axis and are frozen here.
pub fn corpus() -> Vec<Case> {
    let z1 = ConvexFunc::zero(1);
    let z2 = ConvexFunc::zero(2);
    let abs = ma(&[&[1.0, 0.0], &[-1.0, 0.0]]);
    let id1 = |h: &ConvexFunc| affine_map(h, &[&[1.0]], &[0.0]);
    let id2 = |h: &ConvexFunc| affine_map(h, &[&[1.0, 0.0], &[0.0, 1.0]], &[0.0, 0.0]);
    let mut out = Vec::new();

    out.push(case(
        "abs_on_interval",
        set_problem(abs.clone(), z1.clone(), id1(&z1), iv(1.0, 3.0), &[2.0], None),
        &[0.0], &[4.0], &[1.0], 1.0,
        &[&[1.5], &[2.0], &[3.0]], &[3.0], false,
    ));
    out.push(case(
        "linear_upper_bound",
        set_problem(aff(&[-1.0], 0.0), z1.clone(), id1(&z1), iv(-1.0, 2.0), &[0.5], None),
        &[-2.0], &[3.0], &[2.0], -2.0,
        &[&[-1.0], &[0.0], &[1.5]], &[-1.0], false,
    ));
    out.push(case(
        "dc_abs_with_control",
        set_problem(ma(&[&[2.0, 0.0], &[-2.0, 0.0]]), abs.clone(), id1(&abs), iv(0.5, 3.0), &[1.0], None),
        &[0.0], &[4.0], &[0.5], 0.5,
        &[&[1.0], &[2.0], &[3.0]], &[3.0], false,
    ));
    let h4 = ma(&[&[1.0, -1.0], &[-1.0, 1.0]]);
    out.push(case(
        "concave_kink",
        set_problem(z1.clone(), h4.clone(), id1(&h4), iv(-1.0, 2.0), &[0.5], None),
        &[-2.0], &[3.0], &[-1.0], -2.0,
        &[&[0.0], &[1.0], &[2.0]], &[2.0], true,
    ));
    out.push(case(
        "interior_kink",
        set_problem(ma(&[&[1.0, -1.0], &[-0.5, 0.5]]), z1.clone(), id1(&z1), iv(-2.0, 4.0), &[0.0], None),
        &[-3.0], &[5.0], &[1.0], 0.0,
        &[&[-2.0], &[0.0], &[3.0]], &[4.0], false,
    ));
    out.push(case(
        "active_upper_bound",
        set_problem(ma(&[&[-1.0, 0.0], &[2.0, -3.0]]), z1.clone(), id1(&z1), iv(-2.0, 0.5), &[-0.75], None),
        &[-3.0], &[1.0], &[0.5], -0.5,
        &[&[-2.0], &[-1.0], &[0.0]], &[-2.0], false,
    ));
    out.push(case(
        "l1_on_box",
        set_problem(l1(2, 1.0), z2.clone(), id2(&z2), bx(&[1.0, -1.0], &[2.0, 1.0]), &[1.5, 0.0], None),
        &[0.0, -2.0], &[4.0, 2.0], &[1.0, 0.0], 1.0,
        &[&[1.5, 0.0], &[2.0, 1.0], &[1.0, 1.0]], &[2.0, 0.0], false,
    ));
    out.push(case(
        "rotated_square",
        set_problem(
            aff(&[-1.0, -1.0], 0.0),
            z2.clone(),
            affine_map(&z2, &[&[1.0, 1.0], &[1.0, -1.0]], &[0.0, 0.0]),
            bx(&[-1.0, -1.0], &[1.0, 1.0]),
            &[0.0, 0.0],
            None,
        ),
        &[-2.0, -2.0], &[2.0, 2.0], &[0.5, 0.5], -1.0,
        &[&[0.0, 0.0], &[0.5, -0.5], &[-0.5, 0.0]], &[-0.5, -0.5], false,
    ));
    let h9 = linf(2, 0.5);
    out.push(case(
        "l1_minus_linf",
        set_problem(l1(2, 1.0), h9.clone(), id2(&h9), bx(&[0.5, 1.0], &[2.0, 2.0]), &[1.25, 1.5], None),
        &[0.0, 0.0], &[2.5, 2.5], &[0.5, 1.0], 1.0,
        &[&[1.0, 1.0], &[0.5, 2.0], &[2.0, 1.0]], &[2.0, 1.5], false,
    ));
    let h10 = ma(&[&[0.0, 0.5, 0.0], &[0.0, -0.5, 0.0]]);
    out.push(case(
        "linear_minus_abs",
        set_problem(aff(&[1.0, 0.0], 0.0), h10.clone(), id2(&h10), bx(&[-1.0, -1.0], &[1.0, 1.0]), &[0.0, 0.0], None),
        &[-2.0, -2.0], &[2.0, 2.0], &[-1.0, 1.0], -1.5,
        &[&[0.0, 0.0], &[-1.0, 0.0], &[1.0, 1.0]], &[1.0, 0.5], false,
    ));
    out.push(case(
        "abstract_set_active",
        set_problem(aff(&[1.0], 0.0), z1.clone(), id1(&z1), iv(-10.0, 10.0), &[0.0], Some(iv(0.0, 1.0))),
        &[0.0], &[1.0], &[0.0], 0.0,
        &[&[0.25], &[0.5], &[1.0]], &[1.0], false,
    ));
    out.push(case(
        "halfplane_in_square",
        set_problem(
            ma(&[&[-1.0, 1.0, -0.5], &[-1.0, -1.0, 0.5]]),
            z2.clone(),
            affine_map(&z2, &[&[1.0, 1.0]], &[0.0]),
            iv(-5.0, 1.5),
            &[0.0],
            Some(bx(&[0.0, 0.0], &[1.0, 1.0])),
        ),
        &[0.0, 0.0], &[1.0, 1.0], &[1.0, 0.5], -1.0,
        &[&[0.5, 0.5], &[1.0, 0.0], &[0.0, 1.0]], &[0.0, 0.0], false,
    ));
    let h13 = ma(&[&[0.0, 0.0], &[2.0, -2.0]]);
    out.push(case(
        "two_wells",
        set_problem(ma(&[&[-1.0, 0.0], &[1.0, 0.0], &[3.0, -4.0]]), h13.clone(), id1(&h13), iv(-1.0, 3.0), &[1.0], None),
        &[-2.0], &[3.0], &[0.0], 0.0,
        &[&[1.0], &[3.0], &[-0.5]], &[-1.0], false,
    ));
    // shared atoms keep every scalarization structurally convex
    let h14 = sum(vec![abs.clone(), abs.clone()]);
    out.push(case(
        "annulus_constraint",
        set_problem(
            sum(vec![ma(&[&[1.0, -0.2], &[-1.0, 0.2]]), abs.clone(), abs.clone()]),
            h14.clone(),
            VectorMap::new(vec![sum(vec![abs.clone(), abs.clone(), abs.clone()])], h14.clone()).unwrap(),
            iv(0.5, 2.0),
            &[1.25],
            None,
        ),
        &[-2.5], &[2.5], &[0.5], 0.3,
        &[&[-0.5], &[1.0], &[2.0]], &[2.0], false,
    ));
    out.push(case(
        "max_over_halfplane",
        set_problem(
            ma(&[&[1.0, 0.0, 0.0], &[0.0, 1.0, 0.0]]),
            z2.clone(),
            affine_map(&z2, &[&[1.0, 1.0]], &[0.0]),
            iv(1.0, 4.0),
            &[2.5],
            Some(bx(&[-2.0, -2.0], &[3.0, 3.0])),
        ),
        &[-2.0, -2.0], &[3.0, 3.0], &[0.5, 0.5], 0.5,
        &[&[1.0, 1.0], &[2.0, 0.0], &[0.5, 2.0]], &[3.0, -2.0], false,
    ));
    let h16 = ma(&[&[1.0, 0.0, 0.0], &[0.0, 1.0, 0.0]]);
    out.push(case(
        "l1_minus_max",
        set_problem(l1(2, 0.25), h16.clone(), id2(&h16), bx(&[-1.0, -1.0], &[1.0, 1.0]), &[0.0, 0.0], None),
        &[-2.0, -2.0], &[2.0, 2.0], &[1.0, 0.0], -0.75,
        &[&[0.0, 0.0], &[1.0, 1.0], &[0.5, 0.0]], &[-1.0, 0.0], false,
    ));
    let h17 = ma(&[&[0.5, 0.0], &[-0.5, 0.0]]);
    out.push(case(
        "unconstrained_on_q",
        Problem::new(DCPair::new(ma(&[&[1.0, -1.0], &[-1.0, 1.0]]), h17).unwrap(), Constraint::None, Some(iv(-2.0, 3.0)))
            .unwrap(),
        &[-2.0], &[3.0], &[1.0], -0.5,
        &[&[0.0], &[2.0], &[3.0]], &[3.0], false,
    ));
    out.push(case(
        "two_sided_map",
        set_problem(
            ma(&[&[-1.0, 0.0], &[1.0, -2.0]]),
            z1.clone(),
            affine_map(&z1, &[&[1.0], &[-1.0]], &[0.0, 0.0]),
            bx(&[-1.0, -1.5], &[2.0, 0.5]),
            &[0.5, -0.5],
            None,
        ),
        &[-2.0], &[3.0], &[1.0], -1.0,
        &[&[-0.5], &[0.0], &[1.5]], &[-0.5], false,
    ));
    out.push(case(
        "disjoint_feasible_set",
        set_problem(
            sum(vec![ma(&[&[1.0, -0.5], &[-1.0, 0.5]]), abs.clone()]),
            abs.clone(),
            VectorMap::new(vec![aff(&[0.0], 2.0)], abs.clone()).unwrap(),
            iv(-10.0, 1.0),
            &[-4.0],
            Some(iv(-2.0, 3.0)),
        ),
        &[-2.0], &[3.0], &[1.0], 0.5,
        &[&[-1.0], &[2.0], &[3.0]], &[3.0], false,
    ));
    out.push(case(
        "max_constraint",
        set_problem(
            ma(&[&[0.0, -2.0, 0.0], &[-1.0, -1.0, 0.0]]),
            h16.clone(),
            VectorMap::new(vec![sum(vec![h16.clone(), h16.clone()])], h16.clone()).unwrap(),
            iv(-5.0, 1.0),
            &[0.0],
            Some(bx(&[-2.0, -2.0], &[2.0, 0.5])),
        ),
        &[-2.0, -2.0], &[2.0, 0.5], &[1.0, 0.5], -2.0,
        &[&[0.0, 0.0], &[1.0, -1.0], &[-1.0, 0.5]], &[-2.0, 0.0], false,
    ));
    out
}

/// Rewrites a set constraint `Φ(x) ∈ {y : A y <= b}` as `A Φ(x) - b ∈ -R^r_+`.
pub fn as_cone(p: &Problem) -> Option<Problem> {
    let Constraint::Set { phi, c, .. } = &p.constraint else { return None };
    let h = c.hrep().unwrap();
    assert!(h.aeq.is_empty());
    let map = phi.linear_image(&h.a, &h.b).unwrap();
    let base = make_base(&PolyCone::orthant(h.a.len()), None).unwrap();
    Some(Problem::new(p.objective.clone(), Constraint::Cone { phi: map, base }, p.q.clone()).unwrap())
}

/// Points of the feasible set within `r` (sup norm) of `x` on a fine grid.
pub fn local_feasible_points(p: &Problem, x: &[f64], r: f64, per_axis: usize) -> Vec<Vec<f64>> {
    let lo: Vec<f64> = x.iter().map(|v| v - r).collect();
    let hi: Vec<f64> = x.iter().map(|v| v + r).collect();
    dccert::calculus::box_grid(&lo, &hi, per_axis).into_iter().filter(|y| p.is_feasible(y, 1e-9)).collect()
}

/// Whether `x` is a local minimizer on a fine neighbourhood grid.
pub fn is_local_min(p: &Problem, x: &[f64], r: f64) -> bool {
    let fx = p.objective_value(x);
    local_feasible_points(p, x, r, if x.len() == 1 { 201 } else { 41 })
        .iter()
        .all(|y| p.objective_value(y) >= fx - 1e-9)
}
