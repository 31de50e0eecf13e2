//! Deformation flows: the cutoff construction that pushes a set `E` below a
//! level while fixing a set `D`, and the classical level-set deformation.

pub mod classical;
pub mod flow;
pub mod trace;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::exec::Exec;
use crate::functional::Functional;
use crate::space::{unit_sphere, SetDescriptor, Vector};

pub use classical::{band_check, classical_deform, ClassicalChecks, ClassicalDeformation};
pub use flow::{flow, FlowOptions, FnField, Trajectory, VectorField};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum DeformationError {
    #[error("cutoff_rho needs s ≥ 0, got {0}")]
    NegativeArgument(f64),
    #[error("A1 and A2 overlap; the cutoff quotient is undefined")]
    OverlappingSets,
    #[error("D and E intersect (distance {0:.3e})")]
    DMeetsE(f64),
    #[error("hypothesis violated: {0}")]
    Hypothesis(String),
    #[error("‖f′‖ = {norm:.3e} < b at {point:?}: E may contain a critical point at level c")]
    GradientBound { point: Vec<f64>, norm: f64 },
    #[error("‖f′‖ = {norm:.3e} < b at {point:?} inside the band: level may be critical")]
    NearCritical { point: Vec<f64>, norm: f64 },
    #[error("RK4 step underflow after {steps} steps")]
    StepUnderflow { steps: usize },
    #[error("property {property} failed: {detail}")]
    Property { property: String, detail: String },
    #[error("invalid configuration: {0}")]
    InvalidConfig(String),
}

/// `ρ(s) = 1` on `[0,1]`, `1/s` beyond.
pub fn cutoff_rho(s: f64) -> Result<f64, DeformationError> {
    if !(s >= 0.0) {
        return Err(DeformationError::NegativeArgument(s));
    }
    Ok(if s <= 1.0 { 1.0 } else { 1.0 / s })
}

/// `h(x) = ‖x − A1‖ / (‖x − A1‖ + ‖x − A2‖)`.
pub fn cutoff_h(
    x: &Vector,
    a1: &SetDescriptor,
    a2: &SetDescriptor,
) -> Result<f64, DeformationError> {
    let d1 = a1.dist(x);
    let d2 = a2.dist(x);
    quotient(d1, d2).ok_or(DeformationError::OverlappingSets)
}

fn quotient(d1: f64, d2: f64) -> Option<f64> {
    let s = d1 + d2;
    if s > 0.0 {
        Some(d1 / s)
    } else {
        None
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DeformationConfig {
    pub c: f64,
    pub eps_bar: f64,
    pub delta: f64,
    pub b: f64,
    pub ode_step: f64,
    pub max_steps: usize,
    /// Reversibility tolerance.
    pub tau_flow: f64,
    /// Number of random starts for the flow checks.
    pub verify_starts: usize,
    /// Number of points for the field checks.
    pub field_samples: usize,
    /// Points per unbounded sampled set.
    pub set_samples: usize,
    pub seed: u64,
}

impl Default for DeformationConfig {
    fn default() -> Self {
        Self {
            c: 0.0,
            eps_bar: 1.0,
            delta: 0.5,
            b: 1e-3,
            ode_step: 0.05,
            max_steps: 1 << 16,
            tau_flow: 1e-6,
            verify_starts: 200,
            field_samples: 1000,
            set_samples: 64,
            seed: 0,
        }
    }
}

impl DeformationConfig {
    pub fn flow_options(&self) -> FlowOptions {
        FlowOptions {
            step: self.ode_step,
            max_steps: self.max_steps,
            ..Default::default()
        }
    }

    fn validate(&self) -> Result<(), DeformationError> {
        for (name, v) in [
            ("eps_bar", self.eps_bar),
            ("delta", self.delta),
            ("b", self.b),
            ("ode_step", self.ode_step),
        ] {
            if !(v > 0.0 && v.is_finite()) {
                return Err(DeformationError::InvalidConfig(format!(
                    "{name} must be positive, got {v}"
                )));
            }
        }
        Ok(())
    }
}

/// Finite sample of a set, with truncation for unbounded pieces.
fn sample_set(set: &SetDescriptor, count: usize) -> Vec<Vector> {
    set.samples(count, 4.0)
}

fn set_distance(a: &[Vector], b: &SetDescriptor) -> f64 {
    a.iter().map(|p| b.dist(p)).fold(f64::INFINITY, f64::min)
}

/// Pseudogradient field of the deformation lemma, before and after the `q` cutoff.
pub struct FlowField<'a> {
    f: &'a dyn Functional,
    d: SetDescriptor,
    e: SetDescriptor,
    c: f64,
    eps_bar: f64,
    delta: f64,
    e1: Option<SetDescriptor>,
}

impl<'a> FlowField<'a> {
    /// Effective neighborhood width (the configured δ clamped to `dist(D,E)/3`).
    pub fn delta(&self) -> f64 {
        self.delta
    }

    pub fn functional(&self) -> &'a dyn Functional {
        self.f
    }

    /// Distance surrogates to `A2 = N_{δ/3}(E) ∩ f-band(ε̄/3)` and to the
    /// complement `A1` of `N_{δ/2}(E) ∩ f-band(ε̄/2)`; each vanishes exactly
    /// on its set.
    fn band_distances(&self, x: &Vector) -> (f64, f64) {
        let de = self.e.dist(x);
        let gap = (self.f.value(x) - self.c).abs();
        let d_a2 = (de - self.delta / 3.0)
            .max(gap - self.eps_bar / 3.0)
            .max(0.0);
        let d_a1 = (self.delta / 2.0 - de)
            .min(self.eps_bar / 2.0 - gap)
            .max(0.0);
        (d_a1, d_a2)
    }

    pub fn h(&self, x: &Vector) -> f64 {
        let (d1, d2) = self.band_distances(x);
        quotient(d1, d2).expect("A1 and A2 are disjoint by construction")
    }

    /// `q(x)`: 0 on `D1 = {d ≤ 1/2}`, 1 on `{d ≥ 3/4} ⊇ E1`, where
    /// `d = dist(x,D) / (dist(x,D) + dist(x,E1))`.
    pub fn q(&self, x: &Vector) -> f64 {
        let Some(e1) = &self.e1 else { return 1.0 };
        let dd = self.d.dist(x);
        if !dd.is_finite() {
            return 1.0;
        }
        let de = e1.dist(x);
        let ratio = quotient(dd, de).unwrap_or(0.0);
        ((ratio - 0.5) / 0.25).clamp(0.0, 1.0)
    }

    /// Whether `x` lies in `D1`.
    pub fn in_d1(&self, x: &Vector) -> bool {
        self.e1.is_some() && self.q(x) == 0.0
    }

    /// `X1 = −(δ/3)·h·ρ(‖W‖)·W` with `W = f′`.
    pub fn x1(&self, x: &Vector) -> Vector {
        let h = self.h(x);
        if h == 0.0 {
            return Vector::zeros(x.len());
        }
        let w = self.f.gradient(x);
        let nw = w.norm();
        let rho = if nw <= 1.0 { 1.0 } else { 1.0 / nw };
        w * (-(self.delta / 3.0) * h * rho)
    }

    /// `X = q·X1`.
    pub fn eval_field(&self, x: &Vector) -> Vector {
        let q = self.q(x);
        if q == 0.0 {
            return Vector::zeros(x.len());
        }
        self.x1(x) * q
    }
}

impl VectorField for FlowField<'_> {
    fn eval(&self, x: &Vector) -> Result<Vector, DeformationError> {
        Ok(self.eval_field(x))
    }
}

struct ZetaField<'b, 'a>(&'b FlowField<'a>);

impl VectorField for ZetaField<'_, '_> {
    fn eval(&self, x: &Vector) -> Result<Vector, DeformationError> {
        Ok(self.0.x1(x))
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct FieldDiagnostics {
    pub samples: usize,
    pub max_norm: f64,
    pub norm_bound: f64,
    /// Largest finite-difference Lipschitz quotient over sampled pairs.
    pub lipschitz_estimate: f64,
    /// Sampled points with `dist(x,E) > δ` or in `D1` where the field is nonzero.
    pub locality_violations: usize,
    pub min_grad_on_a: f64,
    pub delta: f64,
}

fn a_samples(
    f: &dyn Functional,
    e_pts: &[Vector],
    delta: f64,
    c: f64,
    eps_bar: f64,
) -> Vec<Vector> {
    let n = e_pts.first().map_or(0, |p| p.len());
    let dirs = unit_sphere(n, 16);
    let mut out = Vec::new();
    for p in e_pts {
        out.push(p.clone());
        for u in &dirs {
            for s in [1.0 / 3.0, 2.0 / 3.0, 1.0] {
                out.push(p + u * (s * delta));
            }
        }
    }
    out.retain(|x| (f.value(x) - c).abs() <= eps_bar);
    out
}

/// Builds the deformation field after checking the hypotheses on samples.
pub fn build_field<'a>(
    f: &'a dyn Functional,
    d: &SetDescriptor,
    e: &SetDescriptor,
    config: &DeformationConfig,
) -> Result<(FlowField<'a>, FieldDiagnostics), DeformationError> {
    config.validate()?;
    let c = config.c;
    let e_pts = sample_set(e, config.set_samples);
    let d_pts = sample_set(d, config.set_samples);
    let mut delta = config.delta;
    if !d_pts.is_empty() {
        let gap = set_distance(&d_pts, e).min(set_distance(&e_pts, d));
        if !(gap > 0.0) {
            return Err(DeformationError::DMeetsE(gap));
        }
        delta = delta.min(gap / 3.0);
    }
    if let Some(p) = e_pts.iter().find(|p| f.value(p) > c + 1e-12) {
        return Err(DeformationError::Hypothesis(format!(
            "f = {} > c on E at {:?}",
            f.value(p),
            p.as_slice()
        )));
    }
    if let Some(p) = d_pts.iter().find(|p| f.value(p) < c - 1e-12) {
        return Err(DeformationError::Hypothesis(format!(
            "f = {} < c on D at {:?}",
            f.value(p),
            p.as_slice()
        )));
    }
    let a_pts = a_samples(f, &e_pts, delta, c, config.eps_bar);
    let mut min_grad = f64::INFINITY;
    for p in &a_pts {
        let g = f.grad_norm(p);
        if g < config.b {
            return Err(DeformationError::GradientBound {
                point: p.as_slice().to_vec(),
                norm: g,
            });
        }
        min_grad = min_grad.min(g);
    }

    let mut field = FlowField {
        f,
        d: d.clone(),
        e: e.clone(),
        c,
        eps_bar: config.eps_bar,
        delta,
        e1: None,
    };
    if !d_pts.is_empty() {
        // E1: the ζ-trajectories of the sampled E over [0,1]
        let zeta = ZetaField(&field);
        let opts = config.flow_options();
        let mut env = Vec::new();
        for p in &e_pts {
            let tr = flow(&zeta, p, 1.0, &opts)?;
            // keep roughly 32 points per trajectory; the field moves at most δ/3 per unit time
            let stride = (tr.points.len() / 32).max(1);
            env.extend(tr.points.iter().step_by(stride).cloned());
            env.push(tr.end().clone());
        }
        field.e1 = Some(SetDescriptor::Composite(vec![
            e.clone(),
            SetDescriptor::FiniteSample { points: env },
        ]));
    }

    // field checks on a cloud around E and D plus a bounding box
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed ^ 0x5eed_f1e1d);
    let n = f.dim();
    let anchors: Vec<Vector> = e_pts.iter().chain(&d_pts).cloned().collect();
    let count = config.field_samples.max(1000);
    let pts: Vec<Vector> = (0..count)
        .map(|i| {
            if i % 2 == 0 && !anchors.is_empty() {
                let a = &anchors[rng.gen_range(0..anchors.len())];
                a + Vector::from_fn(n, |_, _| rng.gen_range(-1.5..1.5) * delta)
            } else {
                Vector::from_fn(n, |_, _| rng.gen_range(-3.0..3.0))
            }
        })
        .collect();
    let probe = 1e-6;
    let stats = Exec::Auto.map(&pts, |x| {
        let v = field.eval_field(x);
        let dir = Vector::from_fn(n, |k, _| ((k + 1) as f64).sqrt()).normalize();
        let w = field.eval_field(&(x + &dir * probe));
        let nonlocal = v.norm() > 0.0 && (e.dist(x) > delta || field.in_d1(x));
        (v.norm(), (w - &v).norm() / probe, nonlocal)
    });
    let diag = FieldDiagnostics {
        samples: pts.len(),
        max_norm: stats.iter().map(|s| s.0).fold(0.0, f64::max),
        norm_bound: delta / 3.0,
        lipschitz_estimate: stats.iter().map(|s| s.1).fold(0.0, f64::max),
        locality_violations: stats.iter().filter(|s| s.2).count(),
        min_grad_on_a: min_grad,
        delta,
    };
    if diag.max_norm > diag.norm_bound * (1.0 + 1e-12) {
        return Err(DeformationError::Property {
            property: "field bound".into(),
            detail: format!("‖X‖ = {} > δ/3 = {}", diag.max_norm, diag.norm_bound),
        });
    }
    if diag.locality_violations > 0 {
        return Err(DeformationError::Property {
            property: "locality".into(),
            detail: format!(
                "{} nonzero samples outside A or inside D1",
                diag.locality_violations
            ),
        });
    }
    Ok((field, diag))
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct DeformationChecks {
    pub eps: f64,
    pub delta: f64,
    pub halvings: usize,
    /// (i) `max ‖η_{−1}(η_1(x)) − x‖` over the random starts.
    pub reversibility_error: f64,
    /// (ii) steps with `f(η(t_{k+1})) > f(η(t_k)) + 1e−10`.
    pub monotonicity_violations: usize,
    /// (iii) every sampled point of D is left exactly in place.
    pub d_fixed: bool,
    /// (iv) `max f(η(1,x))` over sampled E, against `c − ε`.
    pub max_final_on_e: f64,
    pub iv_holds: bool,
    pub starts: usize,
}

/// Result of [`deform`]: the level drop ε, the flow and its verification.
pub struct Deformation<'a> {
    pub eps: f64,
    pub field: FlowField<'a>,
    pub diagnostics: FieldDiagnostics,
    pub checks: DeformationChecks,
    options: FlowOptions,
}

impl Deformation<'_> {
    /// `η(t, x)`.
    pub fn eta(&self, x: &Vector, t: f64) -> Result<Trajectory, DeformationError> {
        flow(&self.field, x, t, &self.options)
    }
}

/// Builds the field, flows E for unit time and verifies properties (i)–(iv)
/// on samples; ε starts at ε̄/3 and is halved (at most five times) until
/// (iv) holds.
pub fn deform<'a>(
    f: &'a dyn Functional,
    d: &SetDescriptor,
    e: &SetDescriptor,
    c: f64,
    config: &DeformationConfig,
) -> Result<Deformation<'a>, DeformationError> {
    let config = DeformationConfig {
        c,
        ..config.clone()
    };
    let (field, diagnostics) = build_field(f, d, e, &config)?;
    let opts = config.flow_options();
    let e_pts = sample_set(e, config.set_samples);
    let d_pts = sample_set(d, config.set_samples);

    let finals = Exec::Auto.try_map_range(e_pts.len(), |i| flow(&field, &e_pts[i], 1.0, &opts))?;
    let max_final = finals
        .iter()
        .map(|t| f.value(t.end()))
        .fold(f64::NEG_INFINITY, f64::max);
    let mut eps = config.eps_bar / 3.0;
    let mut halvings = 0;
    while max_final > c - eps {
        if halvings == 5 {
            return Err(DeformationError::Property {
                property: "(iv)".into(),
                detail: format!("max f(η(1,E)) = {max_final} > c − ε = {}", c - eps),
            });
        }
        eps /= 2.0;
        halvings += 1;
    }

    let d_fixed = d_pts
        .iter()
        .all(|p| field.eval_field(p).iter().all(|v| *v == 0.0));

    // random starts around E, D and in a box for (i) and (ii)
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let n = f.dim();
    let anchors: Vec<Vector> = e_pts.iter().chain(&d_pts).cloned().collect();
    let delta = field.delta();
    let starts: Vec<Vector> = (0..config.verify_starts)
        .map(|i| {
            if i % 2 == 0 && !anchors.is_empty() {
                let a = &anchors[rng.gen_range(0..anchors.len())];
                a + Vector::from_fn(n, |_, _| rng.gen_range(-delta..delta))
            } else {
                Vector::from_fn(n, |_, _| rng.gen_range(-2.0..2.0))
            }
        })
        .collect();
    let runs = Exec::Auto.try_map_range(starts.len(), |i| {
        let fwd = flow(&field, &starts[i], 1.0, &opts)?;
        let back = flow(&field, fwd.end(), -1.0, &opts)?;
        let rev = (back.end() - &starts[i]).norm();
        let vals: Vec<f64> = fwd.points.iter().map(|p| f.value(p)).collect();
        let bad = vals.windows(2).filter(|w| w[1] > w[0] + 1e-10).count();
        Ok::<_, DeformationError>((rev, bad))
    })?;
    let reversibility_error = runs.iter().map(|r| r.0).fold(0.0, f64::max);
    let monotonicity_violations = runs.iter().map(|r| r.1).sum();

    let checks = DeformationChecks {
        eps,
        delta,
        halvings,
        reversibility_error,
        monotonicity_violations,
        d_fixed,
        max_final_on_e: max_final,
        iv_holds: max_final <= c - eps,
        starts: starts.len(),
    };
    if reversibility_error > config.tau_flow {
        return Err(DeformationError::Property {
            property: "(i)".into(),
            detail: format!("reversibility error {reversibility_error:.3e}"),
        });
    }
    if monotonicity_violations > 0 || !d_fixed {
        return Err(DeformationError::Property {
            property: if d_fixed { "(ii)" } else { "(iii)" }.into(),
            detail: format!(
                "{monotonicity_violations} monotonicity violations, D fixed: {d_fixed}"
            ),
        });
    }
    Ok(Deformation {
        eps,
        field,
        diagnostics,
        checks,
        options: opts,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::functional::TestFunctional;
    use approx::assert_abs_diff_eq;

    fn v(x: &[f64]) -> Vector {
        Vector::from_column_slice(x)
    }

    fn pts(p: &[[f64; 2]]) -> SetDescriptor {
        SetDescriptor::FiniteSample {
            points: p.iter().map(|x| v(x)).collect(),
        }
    }

    #[test]
    fn rho_branches() {
        assert_eq!(cutoff_rho(0.5).unwrap(), 1.0);
        assert_eq!(cutoff_rho(1.0).unwrap(), 1.0);
        assert_eq!(cutoff_rho(4.0).unwrap(), 0.25);
        assert!(cutoff_rho(-0.1).is_err());
    }

    #[test]
    fn h_quotient_cases() {
        let a1 = SetDescriptor::point(v(&[0.0, 0.0]));
        let a2 = SetDescriptor::point(v(&[2.0, 0.0]));
        assert_eq!(cutoff_h(&v(&[0.0, 0.0]), &a1, &a2).unwrap(), 0.0);
        assert_eq!(cutoff_h(&v(&[2.0, 0.0]), &a1, &a2).unwrap(), 1.0);
        assert_eq!(cutoff_h(&v(&[1.0, 3.0]), &a1, &a2).unwrap(), 0.5);
        assert!(cutoff_h(&v(&[0.0, 0.0]), &a1, &a1).is_err());
    }

    fn saddle_config() -> DeformationConfig {
        DeformationConfig {
            eps_bar: 4.0,
            delta: 0.5,
            ..Default::default()
        }
    }

    #[test]
    fn field_at_saddle_instance_points() {
        let f = TestFunctional::saddle();
        let d = pts(&[[1.0, 0.0], [-1.0, 0.0]]);
        let e = pts(&[[0.0, 1.0], [0.0, -1.0]]);
        let (field, diag) = build_field(&f, &d, &e, &saddle_config()).unwrap();
        // δ is clamped to dist(D,E)/3 = √2/3
        let delta = 2f64.sqrt() / 3.0;
        assert_abs_diff_eq!(field.delta(), delta, epsilon = 1e-15);
        assert_eq!(field.eval_field(&v(&[1.0, 0.0])), v(&[0.0, 0.0]));
        assert_eq!(field.eval_field(&v(&[-1.0, 0.0])), v(&[0.0, 0.0]));
        // W = (0,−2), ρ(2) = 1/2, h = q = 1
        let x = field.eval_field(&v(&[0.0, 1.0]));
        assert_abs_diff_eq!(x[0], 0.0);
        assert_abs_diff_eq!(x[1], delta / 3.0, epsilon = 1e-15);
        assert!(diag.max_norm <= delta / 3.0 * (1.0 + 1e-12));
        assert_eq!(
            field.eval_field(&v(&[0.0, 1.0 + 1.01 * delta])),
            v(&[0.0, 0.0])
        );
    }

    #[test]
    fn deform_saddle_instance() {
        let f = TestFunctional::saddle();
        let d = pts(&[[1.0, 0.0], [-1.0, 0.0]]);
        let e = pts(&[[0.0, 1.0], [0.0, -1.0]]);
        let def = deform(&f, &d, &e, 0.0, &saddle_config()).unwrap();
        assert!(def.eps >= 0.01);
        for p in [[0.0, 1.0], [0.0, -1.0]] {
            let tr = def.eta(&v(&p), 1.0).unwrap();
            assert!(f.value(tr.end()) <= -def.eps);
            let vals: Vec<f64> = tr.points.iter().map(|x| f.value(x)).collect();
            assert!(vals.windows(2).all(|w| w[1] <= w[0] + 1e-10));
        }
        let tr = def.eta(&v(&[1.0, 0.0]), 0.7).unwrap();
        assert!(tr.points.iter().all(|p| *p == v(&[1.0, 0.0])));
        assert!(def.checks.reversibility_error <= 1e-6);
    }

    #[test]
    fn critical_point_in_e_is_refused() {
        let f = TestFunctional::saddle();
        let d = pts(&[[1.0, 0.0]]);
        let e = pts(&[[0.0, 0.0]]);
        assert!(matches!(
            deform(&f, &d, &e, 0.0, &saddle_config()),
            Err(DeformationError::GradientBound { .. })
        ));
    }

    #[test]
    fn level_e_points_are_pushed_below() {
        // E on the level set {f = c}: the flow must do real work
        let f = TestFunctional::saddle();
        let d = pts(&[[2.0, 0.0], [-2.0, 0.0]]);
        let e = pts(&[[0.5, 0.5], [-0.5, 0.5], [0.5, -0.5]]);
        let cfg = DeformationConfig {
            eps_bar: 0.5,
            delta: 0.6,
            ..Default::default()
        };
        let def = deform(&f, &d, &e, 0.0, &cfg).unwrap();
        assert!(def.eps > 0.0 && def.checks.iv_holds);
        assert!(def.checks.max_final_on_e < 0.0);
    }
}
