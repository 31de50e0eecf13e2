//! Inf-max over admissible maps: sup evaluation with a refinement hook, the
//! deform-and-compose iteration, limiting-case detection with localization
//! on `S`, and the sphere and third-critical-point corollaries.

use std::sync::Arc;

use serde::Serialize;
use thiserror::Error;

use crate::deformation::{band_check, ClassicalDeformation, DeformationError, FlowOptions};
use crate::ekeland::{limiting_case_search, EkelandError, LimitingOptions, LocalizedPoint};
use crate::exec::Exec;
use crate::functional::{fd_hessian, newton_polish, Functional};
use crate::geometry::{make_pair, GeometryError, LinkingPair, PairKind, PairParams};
use crate::report::ser_vector;
use crate::space::{Decomposition, SetDescriptor, Vector};

pub use crate::geometry::AdmissibleMap;

/// Tolerance for `c = α`.
pub const TAU_C: f64 = 1e-4;
/// Slack in `max_{∂Q} f ≤ α`.
pub const TAU_B: f64 = 1e-9;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum MinimaxError {
    #[error("S and ∂Q do not link for this pair")]
    NotLinking,
    #[error("boundary bound fails: max over ∂Q = {boundary_max} exceeds α = {alpha}")]
    BoundsViolated { alpha: f64, boundary_max: f64 },
    #[error("initial map is not admissible (boundary deviation {0:.3e})")]
    NotAdmissible(f64),
    #[error("sup over the initial map is not finite")]
    InfiniteSup,
    #[error("flow stalled at level {level} (ε̄ = {eps_bar:.3e}) without a near-critical point in the band")]
    FlowStall { level: f64, eps_bar: f64 },
    #[error("not in the limiting case: |c − α| = {gap:.3e}")]
    NotLimiting { gap: f64 },
    #[error("localization failed: {0}")]
    Localization(String),
    #[error("precondition violated: {0}")]
    Precondition(String),
    #[error("no third critical point: {0}")]
    NoThirdPoint(String),
    #[error(transparent)]
    Geometry(#[from] GeometryError),
    #[error(transparent)]
    Deformation(#[from] DeformationError),
    #[error(transparent)]
    Ekeland(#[from] EkelandError),
}

/// `max f(γ(u))` over the nodes, with the first maximizing node.
pub fn sup_on_map(f: &dyn Functional, gamma: &AdmissibleMap) -> (f64, usize) {
    let mut best = (f64::NEG_INFINITY, 0);
    for (i, x) in gamma.images().iter().enumerate() {
        let v = f.value(x);
        if v > best.0 || v.is_nan() {
            best = (v, i);
        }
    }
    best
}

const SEGMENT_PROBES: usize = 8;

/// Refinement hook for the node sup. On paths, a segment is split at its
/// highest interior probe when that probe exceeds the node max by more than
/// `tau_sup`, and at its midpoint when its image is longer than `h_max`. On
/// higher-dimensional meshes, cells whose barycenter exceeds the node max
/// trigger a uniform refinement. Stops at `max_nodes`.
pub fn refine_sup(
    f: &dyn Functional,
    gamma: &AdmissibleMap,
    tau_sup: f64,
    h_max: f64,
    max_nodes: usize,
) -> AdmissibleMap {
    let mut g = gamma.clone();
    for _ in 0..64 {
        let mesh = g.mesh().clone();
        if mesh.len() >= max_nodes {
            break;
        }
        let (top, _) = sup_on_map(f, &g);
        if mesh.dim() == 1 {
            let mut order: Vec<usize> = (0..mesh.len()).collect();
            order.sort_by(|&a, &b| mesh.ref_coords(a)[0].total_cmp(&mesh.ref_coords(b)[0]));
            let mut breaks = Vec::new();
            for w in order.windows(2) {
                let (a, b) = (g.image(w[0]), g.image(w[1]));
                let (ra, rb) = (mesh.ref_coords(w[0])[0], mesh.ref_coords(w[1])[0]);
                if (b - a).norm() > h_max {
                    breaks.push(0.5 * (ra + rb));
                    continue;
                }
                // the max along a segment need not sit at its midpoint
                let (best, t) = (1..SEGMENT_PROBES)
                    .map(|k| {
                        let t = k as f64 / SEGMENT_PROBES as f64;
                        (f.value(&(a + (b - a) * t)), t)
                    })
                    .fold((f64::NEG_INFINITY, 0.5), |m, x| if x.0 > m.0 { x } else { m });
                if best > top + tau_sup {
                    breaks.push(ra + t * (rb - ra));
                }
            }
            if breaks.is_empty() {
                break;
            }
            breaks.truncate(max_nodes - mesh.len());
            g = g.transfer(Arc::new(mesh.with_breaks(&[breaks])));
        } else {
            let exceeds = mesh.cells().iter().any(|c| {
                let mut bary = Vector::zeros(g.image(0).len());
                for &v in c {
                    bary += g.image(v);
                }
                bary /= c.len() as f64;
                f.value(&bary) > top + tau_sup
            });
            if !exceeds || mesh.len() << mesh.dim() > max_nodes {
                break;
            }
            g = g.transfer(Arc::new(mesh.refined(2)));
        }
    }
    g
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct GeometryBounds {
    /// `inf_S f` over samples of `S`, improved by projected descent.
    pub alpha: f64,
    #[serde(serialize_with = "ser_vector")]
    pub alpha_point: Vector,
    pub boundary_max: f64,
    /// `boundary_max ≤ alpha` within [`TAU_B`].
    pub holds: bool,
}

/// Projected gradient descent of `f` on `S` with step doubling and halving.
fn projected_descent(f: &dyn Functional, s: &SetDescriptor, x0: &Vector, iters: usize, cap: f64) -> Vector {
    let mut x = s.nearest(x0);
    let mut fx = f.value(&x);
    let mut step = 1.0;
    for _ in 0..iters {
        let g = f.gradient(&x);
        if g.norm() == 0.0 || x.norm() > cap {
            break;
        }
        let mut t = step;
        let mut moved = false;
        for _ in 0..50 {
            let y = s.nearest(&(&x - &g * t));
            let fy = f.value(&y);
            if fy < fx {
                x = y;
                fx = fy;
                step = 2.0 * t;
                moved = true;
                break;
            }
            t *= 0.5;
        }
        if !moved {
            break;
        }
    }
    x
}

/// `α = inf_S f` (sampled, then refined by projected descent from the best
/// samples) against `max_{∂Q} f`.
pub fn check_geometry_bounds(f: &dyn Functional, pair: &LinkingPair) -> GeometryBounds {
    let extent = pair.diam.max(4.0);
    let samples = pair.s.samples(512, extent);
    let mut scored: Vec<(f64, usize)> = samples.iter().enumerate().map(|(i, x)| (f.value(x), i)).collect();
    scored.sort_by(|a, b| a.0.total_cmp(&b.0));
    let mut alpha = f64::INFINITY;
    let mut alpha_point = samples.first().cloned().unwrap_or_else(|| Vector::zeros(pair.decomp.dim()));
    for &(v, i) in scored.iter().take(8) {
        if v < alpha {
            alpha = v;
            alpha_point = samples[i].clone();
        }
        let y = projected_descent(f, &pair.s, &samples[i], 200, 1e6 * extent);
        let fy = f.value(&y);
        if fy < alpha {
            alpha = fy;
            alpha_point = y;
        }
    }
    let boundary_max = pair
        .mesh
        .boundary_nodes()
        .iter()
        .map(|&b| f.value(pair.mesh.node(b)))
        .fold(f64::NEG_INFINITY, f64::max);
    GeometryBounds { alpha, alpha_point, boundary_max, holds: boundary_max <= alpha + TAU_B }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct MinimaxOptions {
    pub max_iters: usize,
    pub tau_c: f64,
    pub tau_sup: f64,
    /// Near-critical threshold on `‖f′‖` in the deformation band.
    pub b: f64,
    /// The iteration stops once the band half-width `ε̄` falls below this.
    pub eps_min: f64,
    /// Longest allowed image of a 1-D cell (default `diam(Q)/32`).
    pub h_max: Option<f64>,
    pub max_nodes: usize,
    pub polish_iters: usize,
    pub flow: FlowOptions,
    #[serde(skip)]
    pub exec: Exec,
}

impl Default for MinimaxOptions {
    fn default() -> Self {
        Self {
            max_iters: 400,
            tau_c: TAU_C,
            tau_sup: 1e-7,
            b: 1e-3,
            eps_min: 1e-6,
            h_max: None,
            max_nodes: 4097,
            polish_iters: 50,
            flow: FlowOptions::default(),
            exec: Exec::Auto,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Termination {
    /// Every band down to `eps_min` contained a point with `‖f′‖ < b`.
    NearCritical,
    /// The sup reached the boundary level; flows cannot move it further.
    LimitingRegime,
    MaxIters,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct MinimaxReport {
    pub c_estimate: f64,
    pub alpha: f64,
    pub boundary_max: f64,
    pub iteration_history: Vec<(usize, f64)>,
    pub best_map: AdmissibleMap,
    #[serde(serialize_with = "ser_vector")]
    pub argmax_point: Vector,
    #[serde(serialize_with = "ser_vector")]
    pub candidate_critical: Vector,
    pub grad_norm_at_argmax: f64,
    pub grad_norm_at_candidate: f64,
    /// `|c − α| ≤ τ_c`.
    pub limiting_case: bool,
    /// The sup met the boundary level, so deformation was not applicable.
    pub limiting_regime: bool,
    /// `dist(candidate, S)` in the limiting case.
    pub location_check: Option<f64>,
    pub termination: Termination,
    pub accepted_steps: usize,
    pub rejected_steps: usize,
    pub final_eps_bar: f64,
    pub nodes: usize,
}

enum StepFailure {
    NearCritical,
    Stall,
}

/// One deformation `γ ↦ η(1,·)∘γ` at level `c`; boundary nodes are below
/// the band and are not moved.
fn deform_step(
    f: &dyn Functional,
    gamma: &AdmissibleMap,
    c: f64,
    eps_bar: f64,
    opts: &MinimaxOptions,
) -> Result<Result<AdmissibleMap, StepFailure>, MinimaxError> {
    match band_check(f, c, eps_bar, gamma.images(), opts.b) {
        Ok(_) => {}
        Err(DeformationError::NearCritical { .. }) => return Ok(Err(StepFailure::NearCritical)),
        Err(e) => return Err(e.into()),
    }
    let def = ClassicalDeformation::new(f, c, eps_bar / 2.0, opts.b, opts.flow);
    let mesh = gamma.mesh();
    let moved = opts.exec.map_range(mesh.len(), |i| {
        if mesh.is_boundary(i) {
            Ok(gamma.image(i).clone())
        } else {
            def.apply(gamma.image(i))
        }
    });
    let mut images = Vec::with_capacity(moved.len());
    for r in moved {
        match r {
            Ok(x) => images.push(x),
            Err(DeformationError::NearCritical { .. } | DeformationError::StepUnderflow { .. }) => {
                return Ok(Err(StepFailure::NearCritical))
            }
            Err(e) => return Err(e.into()),
        }
    }
    let top = images.iter().map(|x| f.value(x)).fold(f64::NEG_INFINITY, f64::max);
    if top > c - def.eps {
        return Ok(Err(StepFailure::Stall));
    }
    Ok(Ok(AdmissibleMap::from_images(mesh.clone(), images)))
}

/// Polishes the argmax of `gamma` and asks whether it lands on a point with
/// `‖f′‖ ≤ b` whose value is within `tau_c` of `level`.
fn level_is_critical(f: &dyn Functional, gamma: &AdmissibleMap, level: f64, diam: f64, opts: &MinimaxOptions) -> bool {
    let (_, arg) = sup_on_map(f, gamma);
    let x = gamma.image(arg);
    let p = newton_polish(f, x, opts.polish_iters);
    (&p - x).norm() <= 0.1 * diam && f.grad_norm(&p) <= opts.b && (f.value(&p) - level).abs() <= opts.tau_c
}

/// Iterates `γ_{k+1} = η(1,·)∘γ_k` with the classical deformation at level
/// `sup f∘γ_k`. The band half-width `ε̄` is halved whenever the band holds a
/// near-critical point (or the flow cannot be integrated), and doubled after
/// each successful step; the run ends when `ε̄ < eps_min`.
pub fn estimate_cgamma(
    f: &dyn Functional,
    pair: &LinkingPair,
    gamma0: &AdmissibleMap,
    opts: &MinimaxOptions,
) -> Result<MinimaxReport, MinimaxError> {
    if !pair.links {
        return Err(MinimaxError::NotLinking);
    }
    let bounds = check_geometry_bounds(f, pair);
    if !bounds.holds {
        return Err(MinimaxError::BoundsViolated { alpha: bounds.alpha, boundary_max: bounds.boundary_max });
    }
    if !gamma0.is_pinned() {
        return Err(MinimaxError::NotAdmissible(gamma0.boundary_deviation()));
    }
    let h_max = opts.h_max.unwrap_or(pair.diam / 32.0);
    let mut gamma = refine_sup(f, gamma0, opts.tau_sup, h_max, opts.max_nodes);
    let (mut sup, _) = sup_on_map(f, &gamma);
    if !sup.is_finite() {
        return Err(MinimaxError::InfiniteSup);
    }
    let bmax = bounds.boundary_max;
    let mut history = vec![(0, sup)];
    let mut eps_bar = (sup - bmax) / 2.0;
    let (mut accepted, mut rejected) = (0, 0);
    let mut last_stall = false;
    let mut termination = Termination::MaxIters;
    for iter in 1..=opts.max_iters {
        let room = (sup - bmax) / 2.0;
        if room < opts.eps_min {
            termination = Termination::LimitingRegime;
            break;
        }
        eps_bar = eps_bar.min(room);
        if eps_bar < opts.eps_min {
            // a stall is only an error when nothing critical sits at the level
            if last_stall && !level_is_critical(f, &gamma, sup, pair.diam, opts) {
                return Err(MinimaxError::FlowStall { level: sup, eps_bar });
            }
            termination = Termination::NearCritical;
            break;
        }
        match deform_step(f, &gamma, sup, eps_bar, opts)? {
            Ok(next) => {
                let next = refine_sup(f, &next, opts.tau_sup, h_max, opts.max_nodes);
                let (nsup, _) = sup_on_map(f, &next);
                if nsup <= sup {
                    gamma = next;
                    sup = nsup;
                    accepted += 1;
                    eps_bar *= 2.0;
                    last_stall = false;
                } else {
                    rejected += 1;
                    eps_bar /= 2.0;
                    last_stall = true;
                }
            }
            Err(StepFailure::NearCritical) => {
                rejected += 1;
                eps_bar /= 2.0;
                last_stall = false;
            }
            Err(StepFailure::Stall) => {
                rejected += 1;
                eps_bar /= 2.0;
                last_stall = true;
            }
        }
        history.push((iter, sup));
    }
    let (c, arg) = sup_on_map(f, &gamma);
    let argmax_point = gamma.image(arg).clone();
    let polished = newton_polish(f, &argmax_point, opts.polish_iters);
    let g_arg = f.grad_norm(&argmax_point);
    let candidate = if (&polished - &argmax_point).norm() <= 0.1 * pair.diam && f.grad_norm(&polished) <= g_arg {
        polished
    } else {
        argmax_point.clone()
    };
    let limiting_case = (c - bounds.alpha).abs() <= opts.tau_c;
    let location_check = limiting_case.then(|| pair.s.dist(&candidate));
    Ok(MinimaxReport {
        c_estimate: c,
        alpha: bounds.alpha,
        boundary_max: bmax,
        iteration_history: history,
        nodes: gamma.mesh().len(),
        best_map: gamma,
        grad_norm_at_argmax: g_arg,
        grad_norm_at_candidate: f.grad_norm(&candidate),
        argmax_point,
        candidate_critical: candidate,
        limiting_case,
        limiting_regime: termination == Termination::LimitingRegime,
        location_check,
        termination,
        accepted_steps: accepted,
        rejected_steps: rejected,
        final_eps_bar: eps_bar,
    })
}

/// Writes `iteration,sup` rows.
pub fn write_history_csv<W: std::io::Write>(out: W, report: &MinimaxReport) -> csv::Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["iteration", "sup"])?;
    for (k, v) in &report.iteration_history {
        w.write_record([k.to_string(), v.to_string()])?;
    }
    w.flush()?;
    Ok(())
}

/// Projected descent of `‖f′‖²` on `S`, starting from the projection of `x0`.
pub fn polish_near_s(f: &dyn Functional, s: &SetDescriptor, x0: &Vector, iters: usize) -> Vector {
    let phi = |x: &Vector| f.gradient(x).norm_squared();
    let mut x = s.nearest(x0);
    let mut px = phi(&x);
    let mut step = 1.0;
    for _ in 0..iters {
        if px == 0.0 {
            break;
        }
        let d = fd_hessian(f, &x, 1e-6) * f.gradient(&x) * 2.0;
        if d.norm() == 0.0 {
            break;
        }
        let mut t = step;
        let mut moved = false;
        for _ in 0..50 {
            let y = s.nearest(&(&x - &d * t));
            let py = phi(&y);
            if py < px {
                x = y;
                px = py;
                step = 2.0 * t;
                moved = true;
                break;
            }
            t *= 0.5;
        }
        if !moved {
            break;
        }
    }
    x
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct LocateOptions {
    pub tol: f64,
    /// First ε tried (default `min{0.2, 0.9·min{1, dist(∂Q,S)}/2}`).
    pub eps_start: Option<f64>,
    pub halvings: usize,
    pub polish_iters: usize,
    pub limiting: LimitingOptions,
}

impl Default for LocateOptions {
    fn default() -> Self {
        Self { tol: 1e-3, eps_start: None, halvings: 6, polish_iters: 200, limiting: LimitingOptions::default() }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Localization {
    #[serde(serialize_with = "ser_vector")]
    pub point: Vector,
    pub value: f64,
    pub grad_norm: f64,
    pub dist_to_s: f64,
    pub eps: f64,
    pub localized: LocalizedPoint,
}

/// Critical point candidate on `S` in the limiting case: the localized
/// almost critical point for decreasing `ε`, polished on `S`.
pub fn locate_on_s(
    f: &dyn Functional,
    report: &MinimaxReport,
    pair: &LinkingPair,
    opts: &LocateOptions,
) -> Result<Localization, MinimaxError> {
    if !report.limiting_case {
        return Err(MinimaxError::NotLimiting { gap: (report.c_estimate - report.alpha).abs() });
    }
    let limit = pair.boundary_gap.min(1.0) / 2.0;
    let mut eps = opts.eps_start.unwrap_or((0.9 * limit).min(0.2));
    let mut last = String::from("no ε tried");
    for _ in 0..=opts.halvings {
        match limiting_case_search(f, pair, &report.best_map, report.c_estimate, report.alpha, eps, &opts.limiting) {
            Ok(lp) => {
                let y = polish_near_s(f, &pair.s, &lp.x_eps, opts.polish_iters);
                let grad_norm = f.grad_norm(&y);
                let dist_to_s = pair.s.dist(&y);
                if grad_norm <= opts.tol && dist_to_s <= opts.tol {
                    return Ok(Localization { value: f.value(&y), point: y, grad_norm, dist_to_s, eps, localized: lp });
                }
                last = format!("ε = {eps}: ‖f′‖ = {grad_norm:.3e}, dist = {dist_to_s:.3e}");
            }
            Err(e) => last = format!("ε = {eps}: {e}"),
        }
        eps /= 2.0;
    }
    Err(MinimaxError::Localization(last))
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct CorollaryOptions {
    pub tol: f64,
    pub resolution: usize,
    pub minimax: MinimaxOptions,
    pub locate: LocateOptions,
}

impl Default for CorollaryOptions {
    fn default() -> Self {
        Self { tol: 1e-6, resolution: 64, minimax: MinimaxOptions::default(), locate: LocateOptions::default() }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ThirdPoint {
    #[serde(serialize_with = "ser_vector")]
    pub point: Vector,
    pub value: f64,
    pub grad_norm: f64,
    pub sphere_radius: f64,
    pub report: MinimaxReport,
}

fn check_minimum(f: &dyn Functional, m: &Vector, name: &str) -> Result<(), MinimaxError> {
    let g = f.grad_norm(m);
    if g > 1e-8 {
        return Err(MinimaxError::Precondition(format!("{name} is not critical (‖f′‖ = {g:.3e})")));
    }
    let h = fd_hessian(f, m, 1e-5);
    let low = h.symmetric_eigen().eigenvalues.min();
    if !(low > 0.0) {
        return Err(MinimaxError::Precondition(format!("{name} is not a strict minimum (λ_min = {low:.3e})")));
    }
    Ok(())
}

fn full_space(n: usize) -> Result<Decomposition, MinimaxError> {
    let all: Vec<usize> = (0..n).collect();
    Ok(Decomposition::coordinate(n, &all, &[], None).map_err(GeometryError::from)?)
}

/// Mountain pass between two strict local minima. `S` is a sphere about the
/// higher minimum, of radius half their distance, halved until the
/// boundary bound holds.
pub fn pucci_serrin_third(
    f: &dyn Functional,
    m1: &Vector,
    m2: &Vector,
    opts: &CorollaryOptions,
) -> Result<ThirdPoint, MinimaxError> {
    if (m1 - m2).norm() <= 10.0 * opts.tol {
        return Err(MinimaxError::Precondition("the two minima coincide".into()));
    }
    check_minimum(f, m1, "m1")?;
    check_minimum(f, m2, "m2")?;
    let decomp = full_space(m1.len())?;
    let center = if f.value(m1) >= f.value(m2) { m1 } else { m2 };
    let mut r = (m2 - m1).norm() / 2.0;
    let mut pair = None;
    for _ in 0..30 {
        let params = PairParams {
            rho: r,
            start: Some(m1.iter().copied().collect()),
            e: Some(m2.iter().copied().collect()),
            center: Some(center.iter().copied().collect()),
            ..Default::default()
        };
        let p = make_pair(PairKind::MpPath, &decomp, &params, opts.resolution)?;
        if check_geometry_bounds(f, &p).holds {
            pair = Some(p);
            break;
        }
        r /= 2.0;
    }
    let pair = pair.ok_or_else(|| MinimaxError::Precondition("no sphere about the minimum separates the levels".into()))?;
    let report = estimate_cgamma(f, &pair, &AdmissibleMap::identity(pair.mesh.clone()), &opts.minimax)?;
    let mut point = report.candidate_critical.clone();
    if f.grad_norm(&point) > opts.tol && report.limiting_case {
        let locate = LocateOptions { tol: opts.tol, ..opts.locate.clone() };
        point = locate_on_s(f, &report, &pair, &locate)?.point;
    }
    let grad_norm = f.grad_norm(&point);
    if grad_norm > opts.tol {
        return Err(MinimaxError::NoThirdPoint(format!("‖f′‖ = {grad_norm:.3e} at the candidate")));
    }
    let sep = (&point - m1).norm().min((&point - m2).norm());
    if sep < 10.0 * opts.tol {
        return Err(MinimaxError::NoThirdPoint(format!("candidate within {sep:.3e} of a given minimum")));
    }
    Ok(ThirdPoint { value: f.value(&point), point, grad_norm, sphere_radius: r, report })
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct SphereLocalization {
    /// `inf_{B(0,r)} f − max{f(0), f(e)}`.
    pub hypothesis_gap: f64,
    pub report: MinimaxReport,
    pub localization: Localization,
    /// `|‖x‖ − r|` at the localized point.
    pub sphere_gap: f64,
}

/// Paths from 0 to `e` with `inf_{B(0,r)} f = max{f(0), f(e)} = c`: the
/// critical point at level `c` on the sphere `‖x‖ = r`.
pub fn rabinowitz_sphere(
    f: &dyn Functional,
    e: &Vector,
    r: f64,
    opts: &CorollaryOptions,
) -> Result<SphereLocalization, MinimaxError> {
    let n = e.len();
    if !(r > 0.0 && r < e.norm()) {
        return Err(MinimaxError::Precondition(format!("0 < r < ‖e‖ violated (r = {r}, ‖e‖ = {})", e.norm())));
    }
    let zero = Vector::zeros(n);
    let ball = SetDescriptor::Ball { center: zero.clone(), radius: r, basis: None };
    let inf_ball = ball
        .samples(512, r)
        .iter()
        .map(|x| f.value(&projected_descent(f, &ball, x, 100, 1e6)))
        .fold(f64::INFINITY, f64::min);
    let hypothesis_gap = inf_ball - f.value(&zero).max(f.value(e));
    if hypothesis_gap.abs() > opts.minimax.tau_c {
        return Err(MinimaxError::Precondition(format!("inf over B(0,r) differs from max{{f(0), f(e)}} by {hypothesis_gap:.3e}")));
    }
    let params = PairParams {
        rho: r,
        start: Some(vec![0.0; n]),
        e: Some(e.iter().copied().collect()),
        center: Some(vec![0.0; n]),
        ..Default::default()
    };
    let pair = make_pair(PairKind::MpPath, &full_space(n)?, &params, opts.resolution)?;
    let report = estimate_cgamma(f, &pair, &AdmissibleMap::identity(pair.mesh.clone()), &opts.minimax)?;
    let localization = locate_on_s(f, &report, &pair, &opts.locate)?;
    let sphere_gap = (localization.point.norm() - r).abs();
    Ok(SphereLocalization { hypothesis_gap, report, localization, sphere_gap })
}
