//! Command-line front end: problem files in, reports out.

pub mod format;

use std::ffi::OsString;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::time::Instant;

use clap::{Args, Parser, Subcommand};
use serde::Serialize;
use serde_json::{json, Value};
use sha2::{Digest, Sha256};

use crate::applications::sdp::{scalarization_equiv_check, sdp_check_local, SdpOptions};
use crate::applications::sip::{sip_check_local, ACTIVE_TOL};
use crate::calculus::{box_grid, validate_bdc, EtaSchedule};
use crate::certificates::{
    check_global, check_local_necessary, check_local_sufficient, small_schedule, verify_witness, Certificate,
    CheckOptions, Constraint, Problem,
};
use crate::conic::{check_cone_global, check_cone_local, check_cone_local_with_q, check_cone_sufficient};
use crate::error::{Error, Result};
use crate::geometry::dual_slope;
use crate::oracle::{brute_min, brute_min_with, GridSpec};
use crate::solver::solve_dca;
use format::{fmt_num, ProblemFile};

pub use format::FORMAT_VERSION;

#[derive(Parser, Debug)]
#[command(name = "dccert", version, about = "Optimality certificates for DC programs")]
struct Cli {
    #[command(subcommand)]
    cmd: Cmd,
    /// Numerical tolerance.
    #[arg(long, global = true)]
    tol: Option<f64>,
    /// Upper end of the automatic η grid.
    #[arg(long, global = true)]
    eta_max: Option<f64>,
    /// Number of points of the automatic η grid.
    #[arg(long, global = true)]
    eta_points: Option<usize>,
    /// α grid size of the fallback search.
    #[arg(long, global = true)]
    alpha_points: Option<usize>,
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Worker threads (falls back to DCCERT_THREADS).
    #[arg(long, global = true)]
    threads: Option<usize>,
    /// Write the JSON report here.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Write the solver trace (or oracle summary) as CSV here.
    #[arg(long, global = true)]
    csv: Option<PathBuf>,
}

#[derive(Args, Debug)]
struct Input {
    /// Problem file (JSON).
    file: PathBuf,
    /// Comma-separated point; overrides `options.point`.
    #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
    point: Option<Vec<f64>>,
}

#[derive(Subcommand, Debug)]
enum Cmd {
    /// Global optimality certificate (unconstrained or set constraint).
    CheckGlobal(Input),
    /// Local necessary conditions: multipliers and qualification.
    CheckLocal(Input),
    /// Local sufficient condition.
    CheckSufficient(Input),
    /// Global and local certificates for a cone constraint.
    CheckCone(Input),
    /// Semi-infinite problem over a finite index grid.
    Sip(Input),
    /// Semidefinite constraint multiplier.
    Sdp(Input),
    /// DCA iteration from the given point.
    Solve {
        #[command(flatten)]
        input: Input,
        #[arg(long)]
        max_iter: Option<usize>,
    },
    /// Brute-force grid minimum.
    Oracle {
        #[command(flatten)]
        input: Input,
        /// Points per axis when the grid comes from Q or the SIP region.
        #[arg(long)]
        grid_points: Option<usize>,
    },
    /// Structural checks of the problem data.
    Validate(Input),
}

impl Cmd {
    fn name(&self) -> &'static str {
        match self {
            Cmd::CheckGlobal(_) => "check-global",
            Cmd::CheckLocal(_) => "check-local",
            Cmd::CheckSufficient(_) => "check-sufficient",
            Cmd::CheckCone(_) => "check-cone",
            Cmd::Sip(_) => "sip",
            Cmd::Sdp(_) => "sdp",
            Cmd::Solve { .. } => "solve",
            Cmd::Oracle { .. } => "oracle",
            Cmd::Validate(_) => "validate",
        }
    }

    fn input(&self) -> &Input {
        match self {
            Cmd::CheckGlobal(i)
            | Cmd::CheckLocal(i)
            | Cmd::CheckSufficient(i)
            | Cmd::CheckCone(i)
            | Cmd::Sip(i)
            | Cmd::Sdp(i)
            | Cmd::Validate(i) => i,
            Cmd::Solve { input, .. } | Cmd::Oracle { input, .. } => input,
        }
    }
}

/// Exit code for a library error.
pub fn exit_code(e: &Error) -> i32 {
    if e.is_input_error() {
        2
    } else {
        3
    }
}

/// Runs the command line and returns the process exit code: 0 when a
/// verdict was produced, 2 on input errors, 3 on numeric failures.
pub fn run<I, T>(argv: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(argv) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { 2 } else { 0 };
        }
    };
    let threads = match (cli.threads, std::env::var("DCCERT_THREADS")) {
        (Some(n), _) => Ok(Some(n)),
        (None, Ok(v)) => v
            .trim()
            .parse()
            .map(Some)
            .map_err(|_| Error::InvalidInput(format!("DCCERT_THREADS: expected a thread count, got {v:?}"))),
        (None, Err(_)) => Ok(None),
    };
    let result = match threads {
        Ok(Some(n)) => match rayon::ThreadPoolBuilder::new().num_threads(n).build() {
            Ok(pool) => pool.install(|| execute(&cli)),
            Err(e) => Err(Error::InvalidInput(format!("--threads: {e}"))),
        },
        Ok(None) => execute(&cli),
        Err(e) => Err(e),
    };
    match result {
        Ok(text) => {
            print!("{text}");
            0
        }
        Err(e) => {
            eprintln!("error: {e}");
            exit_code(&e)
        }
    }
}

/// Effective settings after merging file options and flags.
struct Settings {
    tol: f64,
    schedule: Option<EtaSchedule>,
    alpha_points: usize,
    seed: u64,
    point: Option<Vec<f64>>,
    grid: Option<(Vec<f64>, Vec<f64>, usize)>,
    max_iter: usize,
}

impl Settings {
    fn new(cli: &Cli, file: &ProblemFile) -> Self {
        let o = &file.options;
        let base = CheckOptions::default();
        let mut schedule = o.eta_schedule.as_ref().map(|s| s.schedule());
        if cli.eta_max.is_some() || cli.eta_points.is_some() {
            let (m, p) = match &schedule {
                Some(EtaSchedule::Auto { eta_max, points }) => (*eta_max, *points),
                _ => (None, crate::calculus::ETA_POINTS),
            };
            schedule = Some(EtaSchedule::Auto { eta_max: cli.eta_max.or(m), points: cli.eta_points.unwrap_or(p) });
        }
        let point = cli.cmd.input().point.clone().or_else(|| o.point());
        Settings {
            tol: cli.tol.or(o.tol.map(|n| n.0)).unwrap_or(base.tol),
            schedule,
            alpha_points: cli.alpha_points.or(o.alpha_grid).unwrap_or(base.alpha_points),
            seed: cli.seed.or(o.seed).unwrap_or(base.seed),
            point,
            grid: o.grid.as_ref().map(|g| (g.lo(), g.hi(), g.points_per_dim)),
            max_iter: o.max_iter.unwrap_or(100),
        }
    }

    fn check_options(&self) -> CheckOptions {
        CheckOptions {
            schedule: self.schedule.clone().unwrap_or_default(),
            tol: self.tol,
            alpha_points: self.alpha_points,
            seed: self.seed,
            ..CheckOptions::default()
        }
    }

    fn point(&self, dim: usize) -> Result<Vec<f64>> {
        let x = self
            .point
            .clone()
            .ok_or_else(|| Error::InvalidInput("point: give --point or options.point".into()))?;
        if x.len() != dim {
            return Err(Error::InvalidInput(format!("point: expected {dim} coordinates, got {}", x.len())));
        }
        Ok(x)
    }

    fn to_json(&self) -> Value {
        let schedule = match &self.schedule {
            None => json!("default"),
            Some(EtaSchedule::Auto { eta_max, points }) => json!({"auto": {"eta_max": eta_max, "points": points}}),
            Some(EtaSchedule::Explicit(v)) => json!({"explicit": v}),
        };
        json!({
            "tol": self.tol,
            "eta_schedule": schedule,
            "alpha_points": self.alpha_points,
            "seed": self.seed,
            "point": self.point,
        })
    }
}

#[derive(Serialize)]
struct Assumption {
    hypothesis: String,
    /// `verified`, `assumed` or `failed`.
    status: &'static str,
}

fn assumed(h: &str) -> Assumption {
    Assumption { hypothesis: h.into(), status: "assumed" }
}

fn checked(h: &str, ok: bool) -> Assumption {
    Assumption { hypothesis: h.into(), status: if ok { "verified" } else { "failed" } }
}

/// Outcome of one subcommand before it is rendered.
struct Outcome {
    verdict: String,
    details: Vec<String>,
    result: Value,
    assumptions: Vec<Assumption>,
    csv: Option<String>,
}

fn to_value<T: Serialize>(v: &T) -> Value {
    serde_json::to_value(v).expect("report values serialize")
}

/// Rewrites every float in a report as a decimal string.
fn stringify_floats(v: Value) -> Value {
    match v {
        Value::Number(n) if n.is_f64() => Value::String(fmt_num(n.as_f64().unwrap_or(f64::NAN))),
        Value::Array(a) => Value::Array(a.into_iter().map(stringify_floats).collect()),
        Value::Object(m) => Value::Object(m.into_iter().map(|(k, v)| (k, stringify_floats(v))).collect()),
        other => other,
    }
}

fn read_input(path: &Path) -> Result<(String, String)> {
    let bytes = std::fs::read(path).map_err(|e| Error::InvalidInput(format!("{}: {e}", path.display())))?;
    let digest: String = Sha256::digest(&bytes).iter().map(|b| format!("{b:02x}")).collect();
    let text = String::from_utf8(bytes).map_err(|_| Error::InvalidInput(format!("{}: not UTF-8", path.display())))?;
    Ok((text, digest))
}

fn write_file(path: &Path, text: &str) -> Result<()> {
    std::fs::write(path, text).map_err(|e| Error::InvalidInput(format!("{}: {e}", path.display())))
}

fn execute(cli: &Cli) -> Result<String> {
    let start = Instant::now();
    let (text, digest) = read_input(&cli.cmd.input().file)?;
    let file = ProblemFile::parse(&text)?;
    let s = Settings::new(cli, &file);
    let outcome = match &cli.cmd {
        Cmd::CheckGlobal(_) => cmd_check_global(&file.problem()?, &s)?,
        Cmd::CheckLocal(_) => cmd_check_local(&file.problem()?, &s)?,
        Cmd::CheckSufficient(_) => cmd_check_sufficient(&file.problem()?, &s)?,
        Cmd::CheckCone(_) => cmd_check_cone(&file.problem()?, &s)?,
        Cmd::Sip(_) => cmd_sip(&file, &s)?,
        Cmd::Sdp(_) => cmd_sdp(&file.problem()?, &s)?,
        Cmd::Solve { max_iter, .. } => cmd_solve(&file.problem()?, &s, max_iter.unwrap_or(s.max_iter))?,
        Cmd::Oracle { grid_points, .. } => cmd_oracle(&file, &s, *grid_points)?,
        Cmd::Validate(_) => cmd_validate(&file, &s)?,
    };
    let elapsed = start.elapsed().as_secs_f64() * 1e3;
    let report = json!({
        "tool": "dccert",
        "version": env!("CARGO_PKG_VERSION"),
        "command": cli.cmd.name(),
        "input_sha256": digest,
        "settings": s.to_json(),
        "verdict": outcome.verdict,
        "result": outcome.result,
        "assumptions": to_value(&outcome.assumptions),
        "timings": {"total_ms": elapsed},
    });
    if let Some(path) = &cli.out {
        let body = serde_json::to_string_pretty(&stringify_floats(report)).expect("report serializes");
        write_file(path, &(body + "\n"))?;
    }
    if let Some(path) = &cli.csv {
        let csv = outcome
            .csv
            .as_ref()
            .ok_or_else(|| Error::InvalidInput(format!("--csv: `{}` produces no CSV", cli.cmd.name())))?;
        write_file(path, csv)?;
    }
    let mut out = String::new();
    let _ = writeln!(out, "dccert {} {}", env!("CARGO_PKG_VERSION"), cli.cmd.name());
    let _ = writeln!(out, "input sha256: {digest}");
    if let Some(x) = &s.point {
        let _ = writeln!(out, "point: {}", fmt_vec(x));
    }
    let _ = writeln!(out, "verdict: {}", outcome.verdict);
    for d in &outcome.details {
        let _ = writeln!(out, "  {d}");
    }
    if !outcome.assumptions.is_empty() {
        let _ = writeln!(out, "assumptions:");
        for a in &outcome.assumptions {
            let _ = writeln!(out, "  [{}] {}", a.status, a.hypothesis);
        }
    }
    Ok(out)
}

fn fmt_vec(x: &[f64]) -> String {
    format!("[{}]", x.iter().map(|v| fmt_num(*v)).collect::<Vec<_>>().join(", "))
}

fn verdict_kind(v: &Value) -> String {
    v.get("kind").and_then(Value::as_str).unwrap_or("unknown").to_string()
}

fn common_assumptions(p: &Problem) -> Vec<Assumption> {
    let finite = p.objective.u.is_finite_valued()
        && p.control().is_finite_valued()
        && match &p.constraint {
            Constraint::Set { phi, .. } | Constraint::Cone { phi, .. } => phi.components.iter().all(|u| u.is_finite_valued()),
            _ => true,
        };
    let mut v = vec![
        checked("objective and constraint share the control h", true),
        checked("g, h and the constraint parts are finite-valued (continuity hypotheses)", finite),
        assumed("scalarizations over the base are convex; run `validate` to check"),
    ];
    if matches!(p.constraint, Constraint::Set { .. }) {
        v.push(checked("z0 is interior to C, so the dual slope is bounded", true));
        v.push(checked("C is a polytope (given as H- or V-representation)", true));
    }
    v
}

fn certificate_outcome(p: &Problem, x: &[f64], cert: &Certificate, tol: f64, mut assumptions: Vec<Assumption>) -> Result<Outcome> {
    let result = to_value(cert);
    let verdict = verdict_kind(&result["verdict"]);
    let mut ok = true;
    for w in &cert.witnesses {
        ok &= verify_witness(p, x, w, tol)?;
    }
    if cert.holds() {
        assumptions.push(checked("every witness re-checks independently", ok));
    }
    let mut details = vec![
        format!("tested points: {} ({})", cert.meta.tested_points, if cert.meta.exhaustive { "exhaustive" } else { "sampled" }),
        format!("eta values: {}", cert.meta.schedule.len()),
        format!("method: {}", cert.meta.method),
        format!("alpha1 >= eps0 everywhere: {}", cert.meta.alpha1_at_least_eps0),
    ];
    details.extend(cert.meta.warnings.iter().map(|w| format!("warning: {w}")));
    Ok(Outcome { verdict, details, result, assumptions, csv: None })
}

fn cmd_check_global(p: &Problem, s: &Settings) -> Result<Outcome> {
    match p.constraint {
        Constraint::Cone { .. } => return Err(Error::InvalidInput("problem.constraint: cone; use check-cone".into())),
        Constraint::Sdp(_) => return Err(Error::InvalidInput("problem.constraint: sdp; use the sdp command".into())),
        _ => {}
    }
    let x = s.point(p.dim())?;
    let cert = check_global(p, &x, &s.check_options())?;
    certificate_outcome(p, &x, &cert, s.tol, common_assumptions(p))
}

fn local_outcome(p: &Problem, check: crate::certificates::LocalCheck) -> Outcome {
    let verdict = if check.multipliers.is_some() {
        "MultipliersFound"
    } else if check.qc {
        "NoMultiplier"
    } else {
        "QcFails"
    };
    let mut details = vec![format!("qualification holds on the active face: {} (margin {})", check.qc, fmt_num(check.qc_margin))];
    if let Some(m) = &check.multipliers {
        details.push(format!("alpha = {}, lambda = {}", fmt_vec(&m.alpha), fmt_vec(&m.lambda)));
        details.push(format!("residual {}, complementarity {}", fmt_num(m.residual), fmt_num(m.complementarity)));
    }
    let mut assumptions = common_assumptions(p);
    assumptions.push(assumed("g, h and Φ are differentiable where the regular subdifferential is used"));
    Outcome { verdict: verdict.into(), details, result: to_value(&check), assumptions, csv: None }
}

fn cmd_check_local(p: &Problem, s: &Settings) -> Result<Outcome> {
    let x = s.point(p.dim())?;
    let check = match (&p.constraint, &p.q) {
        (Constraint::Cone { .. }, Some(_)) => check_cone_local_with_q(p, &x, s.tol)?,
        (Constraint::Cone { .. }, None) => check_cone_local(p, &x, s.tol)?,
        (Constraint::Sdp(_), _) => return Err(Error::InvalidInput("problem.constraint: sdp; use the sdp command".into())),
        _ => check_local_necessary(p, &x, s.tol)?,
    };
    Ok(local_outcome(p, check))
}

fn cmd_check_sufficient(p: &Problem, s: &Settings) -> Result<Outcome> {
    let x = s.point(p.dim())?;
    let schedule = s.schedule.clone().unwrap_or_else(small_schedule);
    let rep = match p.constraint {
        Constraint::Cone { .. } => check_cone_sufficient(p, &x, &schedule, s.tol)?,
        Constraint::Sdp(_) => return Err(Error::InvalidInput("problem.constraint: sdp; use the sdp command".into())),
        _ => check_local_sufficient(p, &x, &schedule, s.tol)?,
    };
    let result = to_value(&rep);
    let verdict = verdict_kind(&result["verdict"]);
    let details = vec![
        format!("inclusion verdict: {}", verdict_kind(&result["inclusion"]["verdict"])),
        format!("intersection empty: {} (margin {})", rep.intersection_empty, fmt_num(rep.intersection_margin)),
    ];
    Ok(Outcome { verdict, details, result, assumptions: common_assumptions(p), csv: None })
}

fn cmd_check_cone(p: &Problem, s: &Settings) -> Result<Outcome> {
    let Constraint::Cone { base, .. } = &p.constraint else {
        return Err(Error::InvalidInput("problem.constraint: check-cone needs a cone record".into()));
    };
    let x = s.point(p.dim())?;
    let global = match check_cone_global(p, &x, &s.check_options()) {
        Ok(c) => Ok(c),
        Err(Error::Unsupported(r)) => Err(r),
        Err(e) => return Err(e),
    };
    let local = match p.q {
        Some(_) => check_cone_local_with_q(p, &x, s.tol)?,
        None => check_cone_local(p, &x, s.tol)?,
    };
    let mut assumptions = common_assumptions(p);
    assumptions.push(checked("K+ is pointed, so the base excludes 0", !base.non_pointed));
    let local = local_outcome(p, local);
    let (verdict, global_value, mut details) = match &global {
        Ok(cert) => {
            let o = certificate_outcome(p, &x, cert, s.tol, Vec::new())?;
            assumptions.extend(o.assumptions);
            (o.verdict, o.result, o.details)
        }
        Err(reason) => ("Abstain".to_string(), json!({"kind": "Abstain", "reason": reason}), vec![format!("global: {reason}")]),
    };
    details.push(format!("local: {}", local.verdict));
    details.extend(local.details);
    Ok(Outcome {
        verdict,
        details,
        result: json!({"global": global_value, "local": local.result, "base": to_value(base)}),
        assumptions,
        csv: None,
    })
}

fn cmd_sip(file: &ProblemFile, s: &Settings) -> Result<Outcome> {
    let sp = file.sip()?;
    let x = s.point(sp.objective.dim())?;
    let out = sip_check_local(&sp, &x, ACTIVE_TOL, s.tol)?;
    let result = to_value(&out);
    let verdict = verdict_kind(&result);
    let mut details = Vec::new();
    if let crate::applications::sip::SipOutcome::Multiplier { measure, residual, .. } = &out {
        for (t, w) in measure.by_value(&sp.index_points) {
            details.push(format!("mass {} at t = {}", fmt_num(w), fmt_num(t)));
        }
        details.push(format!("residual {}", fmt_num(*residual)));
    }
    let assumptions = vec![
        checked("every φ_t shares the objective control h", true),
        assumed("the index set is the given finite grid"),
        assumed("φ_t and h are differentiable at the point"),
    ];
    Ok(Outcome { verdict, details, result, assumptions, csv: None })
}

fn cmd_sdp(p: &Problem, s: &Settings) -> Result<Outcome> {
    let Constraint::Sdp(m) = &p.constraint else {
        return Err(Error::InvalidInput("problem.constraint: the sdp command needs an sdp record".into()));
    };
    let x = s.point(p.dim())?;
    let opts = SdpOptions { tol: s.tol.min(SdpOptions::default().tol), ..SdpOptions::default() };
    let out = sdp_check_local(m, &p.objective, p.q.as_ref(), &x, &opts)?;
    let result = to_value(&out);
    let verdict = verdict_kind(&result);
    let gap = scalarization_equiv_check(m, &x, 256, s.seed)?;
    let mut details = vec![format!("max eigenvalue at the point: {}", fmt_num(m.max_eigenvalue(&x)?))];
    if let crate::applications::sdp::SdpOutcome::Multiplier { eta, residual, complementarity, .. } = &out {
        details.push(format!("eta {}, residual {}, complementarity {}", fmt_num(*eta), fmt_num(*residual), fmt_num(*complementarity)));
    }
    let assumptions = vec![
        checked("entries share the objective control h", true),
        checked("λ1(Φ(x)) + h(x) matches the sphere maximum at the point", gap <= 1e-6),
        assumed("entries and h are differentiable at the point"),
    ];
    Ok(Outcome { verdict, details, result, assumptions, csv: None })
}

fn cmd_solve(p: &Problem, s: &Settings, max_iter: usize) -> Result<Outcome> {
    let x0 = s.point(p.dim())?;
    let trace = solve_dca(p, &x0, max_iter, s.tol)?;
    let mut details = vec![
        format!("iterations: {}", trace.iterates.len() - 1),
        format!("final point: {}", fmt_vec(&trace.final_point)),
    ];
    if let Some(last) = trace.iterates.last() {
        details.push(format!("objective {}, feasible {}", fmt_num(last.objective), last.feasible));
    }
    let verdict = format!("{:?}", trace.status);
    let result = json!({"trace": to_value(&trace)});
    let csv = Some(trace.to_csv());
    Ok(Outcome { verdict, details, result, assumptions: common_assumptions(p), csv })
}

fn oracle_grid(s: &Settings, region: Option<&crate::geometry::Polytope>, per_axis: Option<usize>, dim: usize) -> Result<GridSpec> {
    if let Some((lo, hi, n)) = &s.grid {
        if lo.len() != dim {
            return Err(Error::InvalidInput(format!("options.grid: expected {dim} coordinates, got {}", lo.len())));
        }
        return GridSpec::new(lo.clone(), hi.clone(), per_axis.unwrap_or(*n));
    }
    let r = region.ok_or_else(|| Error::InvalidInput("options.grid: needed when the problem has no bounded region".into()))?;
    GridSpec::from_polytope(r, per_axis.unwrap_or(201))
}

fn cmd_oracle(file: &ProblemFile, s: &Settings, per_axis: Option<usize>) -> Result<Outcome> {
    let (best, grid) = if file.sip.is_some() {
        let sp = file.sip()?;
        let g = oracle_grid(s, sp.region.as_ref(), per_axis, sp.objective.dim())?;
        let tol = s.tol;
        let region = sp.region.clone();
        let feasible = move |x: &[f64]| {
            sp.max_violation(x) <= tol && region.as_ref().is_none_or(|r| r.contains(x, tol).unwrap_or(false))
        };
        let obj = file.sip()?.objective;
        (brute_min_with(&g, &|x| obj.eval(x), &feasible)?, g)
    } else {
        let p = file.problem()?;
        let g = oracle_grid(s, p.q.as_ref(), per_axis, p.dim())?;
        (brute_min(&p, &g, s.tol)?, g)
    };
    let details = vec![
        format!("grid points: {} ({} per axis)", grid.len(), grid.points_per_dim),
        format!("feasible points: {}", best.feasible_count),
        format!("minimum {} at {}", fmt_num(best.value), fmt_vec(&best.x_min)),
    ];
    let mut csv = String::from("value");
    for i in 0..best.x_min.len() {
        let _ = write!(csv, ",x{i}");
    }
    let _ = write!(csv, "\n{}", best.value);
    for v in &best.x_min {
        let _ = write!(csv, ",{v}");
    }
    csv.push('\n');
    let result = json!({"minimum": to_value(&best), "grid": {"lo": grid.lo, "hi": grid.hi, "points_per_dim": grid.points_per_dim}});
    Ok(Outcome { verdict: "MinimumFound".into(), details, result, assumptions: Vec::new(), csv: Some(csv) })
}

fn validation_grid(s: &Settings, p: &Problem) -> Result<Vec<Vec<f64>>> {
    if let Some((lo, hi, n)) = &s.grid {
        return Ok(box_grid(lo, hi, (*n).min(7)));
    }
    match &p.q {
        Some(q) => {
            let g = GridSpec::from_polytope(q, 5)?;
            Ok(box_grid(&g.lo, &g.hi, 5))
        }
        None => Ok(box_grid(&vec![-1.0; p.dim()], &vec![1.0; p.dim()], 5)),
    }
}

fn cmd_validate(file: &ProblemFile, s: &Settings) -> Result<Outcome> {
    let mut checks: Vec<(String, bool)> = Vec::new();
    let mut result = json!({});
    if file.sip.is_some() {
        let sp = file.sip()?;
        checks.push(("sip record builds with a shared control".into(), true));
        checks.push((format!("{} index points", sp.index_points.len()), true));
    } else {
        let p = file.problem()?;
        checks.push(("problem builds with a shared control".into(), true));
        let grid = validation_grid(s, &p)?;
        match &p.constraint {
            Constraint::None => {}
            Constraint::Set { phi, c, z0 } => {
                checks.push(("C is nonempty and z0 is interior".into(), dual_slope(c, z0).is_ok()));
                let rep = validate_bdc(phi, &dual_slope(c, z0)?, &grid)?;
                checks.push((format!("B-DC on the dual slope (worst violation {})", fmt_num(rep.worst_violation)), rep.pass));
                result["bdc"] = to_value(&rep);
            }
            Constraint::Cone { phi, base } => {
                checks.push(("K+ is pointed".into(), !base.non_pointed));
                let rep = validate_bdc(phi, &base.b, &grid)?;
                checks.push((format!("B-DC on the cone base (worst violation {})", fmt_num(rep.worst_violation)), rep.pass));
                result["bdc"] = to_value(&rep);
            }
            Constraint::Sdp(m) => {
                let worst = m.validate(&grid, 64, s.seed)?;
                checks.push((format!("quadratic forms vᵀΦv + h are convex (worst violation {})", fmt_num(worst)), worst <= 1e-9));
            }
        }
        if let Some(q) = &p.q {
            checks.push(("Q is nonempty".into(), q.extreme_points().is_ok_and(|v| !v.is_empty())));
        }
        if let Some(x) = &s.point {
            if x.len() == p.dim() {
                checks.push((format!("point is feasible (violation {})", fmt_num(p.violation(x))), p.is_feasible(x, s.tol)));
            }
        }
    }
    let pass = checks.iter().all(|c| c.1);
    let details = checks.iter().map(|(name, ok)| format!("[{}] {name}", if *ok { "pass" } else { "fail" })).collect();
    result["checks"] = checks.iter().map(|(name, ok)| json!({"check": name, "pass": ok})).collect();
    Ok(Outcome { verdict: if pass { "Pass" } else { "Fail" }.into(), details, result, assumptions: Vec::new(), csv: None })
}
