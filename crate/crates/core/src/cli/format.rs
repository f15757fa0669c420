//! Problem-file schema. Reals are read from JSON numbers or decimal strings
//! and always written as strings, so a parse/serialize cycle is bit-exact.

use std::fmt;

use serde::{de, Deserialize, Deserializer, Serialize, Serializer};

use crate::applications::sdp::MatrixMap;
use crate::applications::sip::SipProblem;
use crate::calculus::{EtaSchedule, VectorMap, ETA_POINTS};
use crate::certificates::{Constraint, Problem};
use crate::conic::make_base;
use crate::convex::{ConvexFunc, DCPair, Piece};
use crate::error::{Error, Result};
use crate::geometry::{HRep, PolyCone, Polytope, Source};

pub const FORMAT_VERSION: &str = "1";

/// A real number in the problem file.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Num(pub f64);

/// Shortest decimal string that parses back to the same `f64`.
pub fn fmt_num(v: f64) -> String {
    format!("{v:?}")
}

impl Serialize for Num {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        s.serialize_str(&fmt_num(self.0))
    }
}

impl<'de> Deserialize<'de> for Num {
    fn deserialize<D: Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        struct V;
        impl de::Visitor<'_> for V {
            type Value = Num;
            fn expecting(&self, f: &mut fmt::Formatter) -> fmt::Result {
                f.write_str("a number or a decimal string")
            }
            fn visit_f64<E: de::Error>(self, v: f64) -> std::result::Result<Num, E> {
                Ok(Num(v))
            }
            fn visit_i64<E: de::Error>(self, v: i64) -> std::result::Result<Num, E> {
                Ok(Num(v as f64))
            }
            fn visit_u64<E: de::Error>(self, v: u64) -> std::result::Result<Num, E> {
                Ok(Num(v as f64))
            }
            fn visit_str<E: de::Error>(self, v: &str) -> std::result::Result<Num, E> {
                v.trim().parse::<f64>().map(Num).map_err(|_| E::custom(format!("invalid number {v:?}")))
            }
        }
        d.deserialize_any(V)
    }
}

fn reals(v: &[Num]) -> Vec<f64> {
    v.iter().map(|n| n.0).collect()
}

fn nums(v: &[f64]) -> Vec<Num> {
    v.iter().copied().map(Num).collect()
}

fn real_rows(m: &[Vec<Num>]) -> Vec<Vec<f64>> {
    m.iter().map(|r| reals(r)).collect()
}

fn num_rows(m: &[Vec<f64>]) -> Vec<Vec<Num>> {
    m.iter().map(|r| nums(r)).collect()
}

fn at<T>(path: &str, r: Result<T>) -> Result<T> {
    r.map_err(|e| Error::InvalidInput(format!("{path}: {e}")))
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase", deny_unknown_fields)]
pub enum PolySpec {
    Hrep(HRepSpec),
    Vrep(Vec<Vec<Num>>),
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct HRepSpec {
    /// Needed only when there are no rows.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub dim: Option<usize>,
    #[serde(rename = "A", default)]
    pub a: Vec<Vec<Num>>,
    #[serde(default)]
    pub b: Vec<Num>,
    #[serde(rename = "Aeq", default, skip_serializing_if = "Vec::is_empty")]
    pub aeq: Vec<Vec<Num>>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub beq: Vec<Num>,
}

impl PolySpec {
    pub fn build(&self, path: &str) -> Result<Polytope> {
        match self {
            PolySpec::Hrep(h) => {
                let dim = h
                    .dim
                    .or_else(|| h.a.first().or(h.aeq.first()).map(|r| r.len()))
                    .ok_or_else(|| Error::InvalidInput(format!("{path}.hrep: no rows and no dim")))?;
                let rep = at(
                    &format!("{path}.hrep"),
                    HRep::with_eq(dim, real_rows(&h.a), reals(&h.b), real_rows(&h.aeq), reals(&h.beq)),
                )?;
                Ok(Polytope::from_hrep(rep))
            }
            PolySpec::Vrep(v) => {
                let dim = v.first().map(|r| r.len()).ok_or_else(|| Error::InvalidInput(format!("{path}.vrep: no points")))?;
                at(&format!("{path}.vrep"), Polytope::from_vertices(dim, real_rows(v)))
            }
        }
    }

    pub fn from_polytope(p: &Polytope) -> Result<Self> {
        Ok(match p.source() {
            Source::H => {
                let h = p.hrep()?;
                PolySpec::Hrep(HRepSpec {
                    dim: (h.a.is_empty() && h.aeq.is_empty()).then_some(h.dim),
                    a: num_rows(&h.a),
                    b: nums(&h.b),
                    aeq: num_rows(&h.aeq),
                    beq: nums(&h.beq),
                })
            }
            Source::V => PolySpec::Vrep(num_rows(p.vertices()?)),
        })
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase", deny_unknown_fields)]
pub enum FuncSpec {
    /// Rows `[a..., b]` of `max_i <a_i, x> + b_i`.
    Maxaffine(Vec<Vec<Num>>),
    Quadratic(QuadSpec),
    Indicator(PolySpec),
    Sum(Vec<FuncSpec>),
}

/// `½ xᵀQx + qᵀx + c`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct QuadSpec {
    #[serde(rename = "Q")]
    pub q_mat: Vec<Vec<Num>>,
    pub q: Vec<Num>,
    pub c: Num,
}

impl FuncSpec {
    pub fn build(&self, path: &str) -> Result<ConvexFunc> {
        match self {
            FuncSpec::Maxaffine(rows) => {
                let mut pieces = Vec::with_capacity(rows.len());
                for (i, r) in rows.iter().enumerate() {
                    let (b, a) = r
                        .split_last()
                        .ok_or_else(|| Error::InvalidInput(format!("{path}.maxaffine[{i}]: empty row")))?;
                    pieces.push(Piece::new(reals(a), b.0));
                }
                at(&format!("{path}.maxaffine"), ConvexFunc::max_affine(pieces))
            }
            FuncSpec::Quadratic(q) => {
                at(&format!("{path}.quadratic"), ConvexFunc::quadratic(real_rows(&q.q_mat), reals(&q.q), q.c.0))
            }
            FuncSpec::Indicator(p) => Ok(ConvexFunc::indicator(p.build(&format!("{path}.indicator"))?)),
            FuncSpec::Sum(terms) => {
                let built = terms
                    .iter()
                    .enumerate()
                    .map(|(i, t)| t.build(&format!("{path}.sum[{i}]")))
                    .collect::<Result<Vec<_>>>()?;
                at(&format!("{path}.sum"), ConvexFunc::sum(built))
            }
        }
    }

    pub fn from_func(f: &ConvexFunc) -> Result<Self> {
        Ok(match f {
            ConvexFunc::MaxAffine { pieces, .. } => FuncSpec::Maxaffine(
                pieces
                    .iter()
                    .map(|p| {
                        let mut row = nums(&p.a);
                        row.push(Num(p.b));
                        row
                    })
                    .collect(),
            ),
            ConvexFunc::Quadratic { q_mat, q, c } => {
                FuncSpec::Quadratic(QuadSpec { q_mat: num_rows(q_mat), q: nums(q), c: Num(*c) })
            }
            ConvexFunc::Indicator(p) => FuncSpec::Indicator(PolySpec::from_polytope(p)?),
            ConvexFunc::Sum { terms, .. } => FuncSpec::Sum(terms.iter().map(Self::from_func).collect::<Result<_>>()?),
        })
    }
}

/// `g - h` with convex `g` and control `h`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DcSpec {
    pub g: FuncSpec,
    pub h: FuncSpec,
}

impl DcSpec {
    pub fn build(&self, path: &str) -> Result<DCPair> {
        let g = self.g.build(&format!("{path}.g"))?;
        let h = self.h.build(&format!("{path}.h"))?;
        at(path, DCPair::new(g, h))
    }

    pub fn from_pair(p: &DCPair) -> Result<Self> {
        Ok(DcSpec { g: FuncSpec::from_func(&p.u)?, h: FuncSpec::from_func(&p.h)? })
    }
}

/// Constraint records. `phi` lists the convex parts `u_j` of
/// `Φ_j = u_j - h`, with `h` the objective control.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase", deny_unknown_fields)]
pub enum ConstraintSpec {
    #[default]
    None,
    Set {
        phi: Vec<FuncSpec>,
        c: PolySpec,
        z0: Vec<Num>,
    },
    Cone {
        phi: Vec<FuncSpec>,
        generators: Vec<Vec<Num>>,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        base_e: Option<Vec<Num>>,
    },
    Sdp {
        entries: Vec<Vec<DcSpec>>,
        p: usize,
    },
}

fn build_map(phi: &[FuncSpec], h: &ConvexFunc, path: &str) -> Result<VectorMap> {
    let comps = phi
        .iter()
        .enumerate()
        .map(|(j, f)| f.build(&format!("{path}.phi[{j}]")))
        .collect::<Result<Vec<_>>>()?;
    at(&format!("{path}.phi"), VectorMap::new(comps, h.clone()))
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ProblemSpec {
    pub objective: DcSpec,
    #[serde(default)]
    pub constraint: ConstraintSpec,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub q: Option<PolySpec>,
}

impl ProblemSpec {
    pub fn build(&self) -> Result<Problem> {
        let objective = self.objective.build("problem.objective")?;
        let h = &objective.h;
        let constraint = match &self.constraint {
            ConstraintSpec::None => Constraint::None,
            ConstraintSpec::Set { phi, c, z0 } => Constraint::Set {
                phi: build_map(phi, h, "problem.constraint.set")?,
                c: c.build("problem.constraint.set.c")?,
                z0: reals(z0),
            },
            ConstraintSpec::Cone { phi, generators, base_e } => {
                let map = build_map(phi, h, "problem.constraint.cone")?;
                let path = "problem.constraint.cone";
                let k = at(path, PolyCone::new(map.out_dim(), real_rows(generators)))?;
                let e = base_e.as_ref().map(|e| reals(e));
                let base = at(&format!("{path}.base_e"), make_base(&k, e.as_deref()))?;
                Constraint::Cone { phi: map, base }
            }
            ConstraintSpec::Sdp { entries, p } => {
                let path = "problem.constraint.sdp";
                if entries.len() != *p {
                    return Err(Error::InvalidInput(format!("{path}.entries: expected {p} rows, got {}", entries.len())));
                }
                let rows = entries
                    .iter()
                    .enumerate()
                    .map(|(i, row)| {
                        row.iter()
                            .enumerate()
                            .map(|(j, e)| e.build(&format!("{path}.entries[{i}][{j}]")))
                            .collect::<Result<Vec<_>>>()
                    })
                    .collect::<Result<Vec<_>>>()?;
                Constraint::Sdp(at(&format!("{path}.entries"), MatrixMap::new(rows, h.clone()))?)
            }
        };
        let q = self.q.as_ref().map(|q| q.build("problem.q")).transpose()?;
        at("problem", Problem::new(objective, constraint, q))
    }

    pub fn from_problem(p: &Problem) -> Result<Self> {
        let comps = |m: &VectorMap| m.components.iter().map(FuncSpec::from_func).collect::<Result<Vec<_>>>();
        let constraint = match &p.constraint {
            Constraint::None => ConstraintSpec::None,
            Constraint::Set { phi, c, z0 } => {
                ConstraintSpec::Set { phi: comps(phi)?, c: PolySpec::from_polytope(c)?, z0: nums(z0) }
            }
            Constraint::Cone { phi, base } => ConstraintSpec::Cone {
                phi: comps(phi)?,
                generators: num_rows(&base.k.generators),
                base_e: base.e.as_ref().map(|e| nums(e)),
            },
            Constraint::Sdp(m) => ConstraintSpec::Sdp {
                entries: m
                    .entries
                    .iter()
                    .map(|row| row.iter().map(DcSpec::from_pair).collect::<Result<Vec<_>>>())
                    .collect::<Result<_>>()?,
                p: m.p,
            },
        };
        Ok(ProblemSpec {
            objective: DcSpec::from_pair(&p.objective)?,
            constraint,
            q: p.q.as_ref().map(PolySpec::from_polytope).transpose()?,
        })
    }
}

/// Semi-infinite problem over a finite index grid: `φ_t = g_t - h`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SipSpec {
    pub objective: DcSpec,
    pub index_points: Vec<Num>,
    pub phi_t: Vec<DcSpec>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub region: Option<PolySpec>,
}

impl SipSpec {
    pub fn build(&self) -> Result<SipProblem> {
        let objective = self.objective.build("sip.objective")?;
        let funcs = self
            .phi_t
            .iter()
            .enumerate()
            .map(|(i, f)| f.build(&format!("sip.phi_t[{i}]")))
            .collect::<Result<Vec<_>>>()?;
        let region = self.region.as_ref().map(|r| r.build("sip.region")).transpose()?;
        at("sip", SipProblem::new(objective, reals(&self.index_points), funcs, region))
    }

    pub fn from_sip(s: &SipProblem) -> Result<Self> {
        Ok(SipSpec {
            objective: DcSpec::from_pair(&s.objective)?,
            index_points: nums(&s.index_points),
            phi_t: s.constraint_funcs.iter().map(DcSpec::from_pair).collect::<Result<_>>()?,
            region: s.region.as_ref().map(PolySpec::from_polytope).transpose()?,
        })
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase", deny_unknown_fields)]
pub enum EtaSpec {
    Auto {
        #[serde(default, skip_serializing_if = "Option::is_none")]
        eta_max: Option<Num>,
        #[serde(default = "default_eta_points")]
        points: usize,
    },
    Explicit(Vec<Num>),
}

fn default_eta_points() -> usize {
    ETA_POINTS
}

impl EtaSpec {
    pub fn schedule(&self) -> EtaSchedule {
        match self {
            EtaSpec::Auto { eta_max, points } => EtaSchedule::Auto { eta_max: eta_max.map(|n| n.0), points: *points },
            EtaSpec::Explicit(v) => EtaSchedule::Explicit(reals(v)),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridFileSpec {
    pub lo: Vec<Num>,
    pub hi: Vec<Num>,
    pub points_per_dim: usize,
}

impl GridFileSpec {
    pub fn lo(&self) -> Vec<f64> {
        reals(&self.lo)
    }

    pub fn hi(&self) -> Vec<f64> {
        reals(&self.hi)
    }
}

/// Optional settings; command-line flags take precedence.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OptionsSpec {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub tol: Option<Num>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub eta_schedule: Option<EtaSpec>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub alpha_grid: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub grid: Option<GridFileSpec>,
    /// Point to check, or the start of `solve`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub point: Option<Vec<Num>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub max_iter: Option<usize>,
}

impl OptionsSpec {
    pub fn point(&self) -> Option<Vec<f64>> {
        self.point.as_ref().map(|p| reals(p))
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ProblemFile {
    pub version: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub problem: Option<ProblemSpec>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sip: Option<SipSpec>,
    #[serde(default)]
    pub options: OptionsSpec,
}

impl ProblemFile {
    pub fn parse(text: &str) -> Result<Self> {
        let f: ProblemFile =
            serde_json::from_str(text).map_err(|e| Error::InvalidInput(format!("problem file: {e}")))?;
        if f.version != FORMAT_VERSION {
            return Err(Error::InvalidInput(format!("version: unsupported {:?}, expected {FORMAT_VERSION:?}", f.version)));
        }
        match (&f.problem, &f.sip) {
            (Some(_), Some(_)) => Err(Error::InvalidInput("problem/sip: give exactly one of the two".into())),
            (None, None) => Err(Error::InvalidInput("problem: missing (or give sip)".into())),
            _ => Ok(f),
        }
    }

    pub fn from_problem(p: &Problem) -> Result<Self> {
        Ok(ProblemFile {
            version: FORMAT_VERSION.into(),
            problem: Some(ProblemSpec::from_problem(p)?),
            sip: None,
            options: OptionsSpec::default(),
        })
    }

    pub fn from_sip(s: &SipProblem) -> Result<Self> {
        Ok(ProblemFile {
            version: FORMAT_VERSION.into(),
            problem: None,
            sip: Some(SipSpec::from_sip(s)?),
            options: OptionsSpec::default(),
        })
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("problem file serializes")
    }

    pub fn problem(&self) -> Result<Problem> {
        self.problem
            .as_ref()
            .ok_or_else(|| Error::InvalidInput("problem: missing; this command needs a problem record".into()))?
            .build()
    }

    pub fn sip(&self) -> Result<SipProblem> {
        self.sip.as_ref().ok_or_else(|| Error::InvalidInput("sip: missing; this command needs a sip record".into()))?.build()
    }
}
