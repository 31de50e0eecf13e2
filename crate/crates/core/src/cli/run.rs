//! Mode dispatch and the run report.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::Serialize;
use serde_json::{json, Value};

use super::config::{EkelandMode, MapKind, Mode, ProblemConfig};
use crate::deformation::deform;
use crate::ekeland::{limiting_case_search, strict_case_search, LimitingOptions, StrictOptions};
use crate::functional::{Functional, TestFunctional};
use crate::geometry::{
    find_intersection, make_pair, verify_linking, AdmissibleMap, IntersectOptions, LinkOptions, LinkingPair,
};
use crate::minimax::{
    estimate_cgamma, locate_on_s, pucci_serrin_third, rabinowitz_sphere, CorollaryOptions, LocateOptions,
    MinimaxOptions, MinimaxReport,
};
use crate::space::Vector;

/// Default ε sweep for the `ekeland` mode.
pub const DEFAULT_EPS: [f64; 3] = [0.2, 0.1, 0.05];

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Check {
    pub name: String,
    pub pass: bool,
    pub detail: String,
}

impl Check {
    fn new(name: impl Into<String>, pass: bool, detail: impl Into<String>) -> Self {
        Self { name: name.into(), pass, detail: detail.into() }
    }
}

/// Everything written to `report.json`. Holds no wall-clock data, so equal
/// configs give byte-identical reports.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct RunReport {
    pub mode: Mode,
    pub config: ProblemConfig,
    pub results: Value,
    pub checks: Vec<Check>,
    /// Error from the failing module, prefixed with its name.
    pub error: Option<String>,
    pub all_pass: bool,
}

#[derive(Clone, Debug, PartialEq)]
pub struct TraceRow {
    pub t: f64,
    pub node: usize,
    pub coords: Vec<f64>,
    pub f: f64,
    pub grad_norm: f64,
}

impl TraceRow {
    fn new(f: &dyn Functional, t: f64, node: usize, x: &Vector) -> Self {
        Self { t, node, coords: x.iter().copied().collect(), f: f.value(x), grad_norm: f.grad_norm(x) }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct RunOutput {
    pub report: RunReport,
    pub trace: Vec<TraceRow>,
    pub history: Vec<(usize, f64)>,
}

#[derive(Default)]
struct Partial {
    results: serde_json::Map<String, Value>,
    checks: Vec<Check>,
    trace: Vec<TraceRow>,
    history: Vec<(usize, f64)>,
}

impl Partial {
    fn put(&mut self, key: &str, v: impl Serialize) {
        self.results.insert(key.into(), serde_json::to_value(v).unwrap_or(Value::Null));
    }

    fn check(&mut self, name: impl Into<String>, pass: bool, detail: impl Into<String>) {
        self.checks.push(Check::new(name, pass, detail));
    }
}

type Step = Result<(), String>;

fn tag<E: std::fmt::Display>(module: &'static str) -> impl Fn(E) -> String {
    move |e| format!("{module}: {e}")
}

pub fn run(cfg: &ProblemConfig, mode: Mode) -> RunOutput {
    let mut p = Partial::default();
    let outcome = cfg.functional().map_err(tag("cli")).and_then(|f| match mode {
        Mode::LinkVerify => link_verify(cfg, &mut p),
        Mode::Minimax => minimax(cfg, &f, &mut p),
        Mode::Deform => deformation(cfg, &f, &mut p),
        Mode::Ekeland => ekeland(cfg, &f, &mut p),
        Mode::Corollaries => corollaries(cfg, &f, &mut p),
    });
    let error = outcome.err();
    let all_pass = error.is_none() && !p.checks.is_empty() && p.checks.iter().all(|c| c.pass);
    RunOutput {
        report: RunReport {
            mode,
            config: cfg.clone(),
            results: Value::Object(p.results),
            checks: p.checks,
            error,
            all_pass,
        },
        trace: p.trace,
        history: p.history,
    }
}

fn pair(cfg: &ProblemConfig) -> Result<LinkingPair, String> {
    let pc = cfg.pair.as_ref().ok_or("cli: this mode needs a [pair] table")?;
    let decomp = cfg.decomposition().map_err(tag("cli"))?;
    make_pair(pc.kind, &decomp, &pc.params, pc.resolution).map_err(tag("geometry"))
}

fn initial_map(cfg: &ProblemConfig, pair: &LinkingPair) -> Result<AdmissibleMap, String> {
    let mesh = pair.mesh.clone();
    let amp = cfg.map.amplitude;
    Ok(match cfg.map.kind {
        MapKind::Identity => AdmissibleMap::identity(mesh),
        MapKind::Random => {
            let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
            AdmissibleMap::random_perturbation(mesh, amp, &mut rng)
        }
        MapKind::Bump => {
            if mesh.dim() != 1 {
                return Err("cli: map.kind = bump needs a path (one-dimensional Q)".into());
            }
            let n = mesh.chart().ambient_dim();
            let dir = match &cfg.map.direction {
                Some(d) => Vector::from_column_slice(d),
                None => Vector::from_fn(n, |i, _| if i == 1.min(n - 1) { 1.0 } else { 0.0 }),
            };
            AdmissibleMap::from_fn(mesh, |u, r| u + &dir * (amp * 4.0 * r[0] * (1.0 - r[0])))
        }
    })
}

fn minimax_options(cfg: &ProblemConfig) -> MinimaxOptions {
    MinimaxOptions { tau_c: cfg.tolerances.tau_c, b: cfg.tolerances.b, ..Default::default() }
}

fn limiting_options(cfg: &ProblemConfig) -> LimitingOptions {
    LimitingOptions { tau_c: cfg.tolerances.tau_c, tau_m: cfg.tolerances.tau_m, ..Default::default() }
}

fn map_trace(f: &dyn Functional, g: &AdmissibleMap, t: f64) -> Vec<TraceRow> {
    g.images().iter().enumerate().map(|(i, x)| TraceRow::new(f, t, i, x)).collect()
}

fn link_verify(cfg: &ProblemConfig, p: &mut Partial) -> Step {
    let pair = pair(cfg)?;
    let gamma = initial_map(cfg, &pair)?;
    p.put("pair", json!({"kind": pair.kind, "boundary_gap": pair.boundary_gap, "diam": pair.diam, "links": pair.links}));
    p.check("S and ∂Q disjoint", pair.boundary_gap > 0.0, format!("gap {:.6e}", pair.boundary_gap));
    let report = verify_linking(&pair, &gamma, &LinkOptions::default()).map_err(tag("geometry"))?;
    p.check("degree one across the homotopy", report.degree_one_throughout, format!("degrees {:?}", report.degrees));
    p.put("linking", &report);
    let opts = IntersectOptions { tau_link: cfg.tolerances.tau_link, ..Default::default() };
    let hit = find_intersection(&gamma, &pair, &opts).map_err(tag("geometry"))?;
    p.check(
        "γ(Q) meets S",
        hit.residual <= cfg.tolerances.tau_link,
        format!("residual {:.6e} (τ_link {:.1e})", hit.residual, cfg.tolerances.tau_link),
    );
    p.put("intersection", &hit);
    Ok(())
}

fn run_driver(
    cfg: &ProblemConfig,
    f: &TestFunctional,
    pair: &LinkingPair,
    p: &mut Partial,
) -> Result<MinimaxReport, String> {
    let gamma = initial_map(cfg, pair)?;
    let report = estimate_cgamma(f, pair, &gamma, &minimax_options(cfg)).map_err(tag("minimax"))?;
    p.history = report.iteration_history.clone();
    p.trace = map_trace(f, &report.best_map, report.accepted_steps as f64);
    Ok(report)
}

fn minimax(cfg: &ProblemConfig, f: &TestFunctional, p: &mut Partial) -> Step {
    let pair = pair(cfg)?;
    let report = run_driver(cfg, f, &pair, p)?;
    let tau_c = cfg.tolerances.tau_c;
    let monotone = report.iteration_history.windows(2).all(|w| w[1].1 <= w[0].1);
    p.check("sup history nonincreasing", monotone, format!("{} entries", report.iteration_history.len()));
    p.check(
        "c ≥ α − τ_c",
        report.c_estimate >= report.alpha - tau_c,
        format!("c = {:.6e}, α = {:.6e}", report.c_estimate, report.alpha),
    );
    if report.limiting_case {
        let opts = LocateOptions { tol: cfg.tolerances.tau_link, limiting: limiting_options(cfg), ..Default::default() };
        match locate_on_s(f, &report, &pair, &opts) {
            Ok(loc) => {
                p.check(
                    "critical point on S",
                    true,
                    format!("‖f′‖ = {:.3e}, dist to S = {:.3e}", loc.grad_norm, loc.dist_to_s),
                );
                p.put("localization", &loc);
            }
            Err(e) => p.check("critical point on S", false, format!("minimax: {e}")),
        }
    } else {
        p.check(
            "candidate near-critical",
            report.grad_norm_at_candidate <= cfg.tolerances.b,
            format!("‖f′‖ = {:.3e} (b = {:.1e})", report.grad_norm_at_candidate, cfg.tolerances.b),
        );
    }
    p.put("minimax", &report);
    Ok(())
}

fn deformation(cfg: &ProblemConfig, f: &TestFunctional, p: &mut Partial) -> Step {
    let (d, e) = cfg.deform_sets();
    if cfg.deform.e.is_empty() {
        return Err("cli: deform mode needs points in deform.e".into());
    }
    let dc = cfg.deformation_config();
    let def = deform(f, &d, &e, cfg.deform.c, &dc).map_err(tag("deformation"))?;
    let ch = &def.checks;
    p.check(
        "reversibility",
        ch.reversibility_error <= cfg.tolerances.tau_flow,
        format!("{:.3e} over {} starts", ch.reversibility_error, ch.starts),
    );
    p.check("monotone along trajectories", ch.monotonicity_violations == 0, format!("{} violations", ch.monotonicity_violations));
    p.check("D fixed", ch.d_fixed, "");
    p.check(
        "E pushed below c − ε",
        ch.iv_holds,
        format!("max f(η(1,E)) = {:.6e}, c − ε = {:.6e}", ch.max_final_on_e, cfg.deform.c - def.eps),
    );
    for (k, x) in cfg.deform.e.iter().enumerate() {
        let tr = def.eta(&Vector::from_column_slice(x), 1.0).map_err(tag("deformation"))?;
        for (t, y) in tr.times.iter().zip(&tr.points) {
            p.trace.push(TraceRow::new(f, *t, k, y));
        }
    }
    p.put("eps", def.eps);
    p.put("checks", &def.checks);
    p.put("diagnostics", &def.diagnostics);
    Ok(())
}

fn ekeland(cfg: &ProblemConfig, f: &TestFunctional, p: &mut Partial) -> Step {
    let pair = pair(cfg)?;
    let eps_list = if cfg.eps.is_empty() { DEFAULT_EPS.to_vec() } else { cfg.eps.clone() };
    let report = run_driver(cfg, f, &pair, p)?;
    let c = cfg.ekeland.c.unwrap_or(report.c_estimate);
    let mut points = Vec::new();
    for &eps in &eps_list {
        let name = format!("ε = {eps}");
        let out = match cfg.ekeland.mode {
            EkelandMode::Limiting => {
                limiting_case_search(f, &pair, &report.best_map, c, report.alpha, eps, &limiting_options(cfg))
                    .map(|lp| (lp.all_pass(), serde_json::to_value(&lp).unwrap_or(Value::Null)))
            }
            EkelandMode::Strict => {
                let opts = StrictOptions { tau_m: cfg.tolerances.tau_m, ..Default::default() };
                strict_case_search(f, &initial_map(cfg, &pair)?, c, eps, &opts)
                    .map(|sp| (sp.all_pass(), serde_json::to_value(&sp).unwrap_or(Value::Null)))
            }
        };
        match out {
            Ok((pass, v)) => {
                p.check(name, pass, "bound checks and certificate");
                points.push(json!({"eps": eps, "point": v}));
            }
            Err(e) => {
                p.check(name, false, format!("ekeland: {e}"));
                points.push(json!({"eps": eps, "error": format!("ekeland: {e}")}));
            }
        }
    }
    p.put("mode", cfg.ekeland.mode);
    p.put("c", c);
    p.put("alpha", report.alpha);
    p.put("points", points);
    Ok(())
}

fn corollaries(cfg: &ProblemConfig, f: &TestFunctional, p: &mut Partial) -> Step {
    let co = &cfg.corollaries;
    if co.third_point.is_none() && co.sphere.is_none() {
        return Err("cli: corollaries mode needs corollaries.third_point or corollaries.sphere".into());
    }
    let opts = CorollaryOptions {
        minimax: minimax_options(cfg),
        locate: LocateOptions { limiting: limiting_options(cfg), ..Default::default() },
        ..Default::default()
    };
    if let Some(t) = &co.third_point {
        let m1 = Vector::from_column_slice(&t.m1);
        let m2 = Vector::from_column_slice(&t.m2);
        match pucci_serrin_third(f, &m1, &m2, &opts) {
            Ok(tp) => {
                p.check("third critical point", true, format!("at {:?}, ‖f′‖ = {:.3e}", tp.point.as_slice(), tp.grad_norm));
                p.put("third_point", &tp);
            }
            Err(e) => p.check("third critical point", false, format!("minimax: {e}")),
        }
    }
    if let Some(s) = &co.sphere {
        match rabinowitz_sphere(f, &Vector::from_column_slice(&s.e), s.r, &opts) {
            Ok(sl) => {
                let ok = sl.localization.grad_norm <= opts.tol && sl.sphere_gap <= cfg.tolerances.tau_link;
                p.check(
                    "critical point on the sphere",
                    ok,
                    format!("‖f′‖ = {:.3e}, |‖x‖ − r| = {:.3e}", sl.localization.grad_norm, sl.sphere_gap),
                );
                p.put("sphere", &sl);
            }
            Err(e) => p.check("critical point on the sphere", false, format!("minimax: {e}")),
        }
    }
    Ok(())
}
