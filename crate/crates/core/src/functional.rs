//! C¹ functionals on R^n, the library of test functionals, pseudogradients
//! and Palais–Smale diagnostics.

use std::collections::BTreeMap;
use std::fmt;

use nalgebra::DMatrix;
use serde::Serialize;
use thiserror::Error;

use crate::space::Vector;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum FunctionalError {
    #[error("unknown test functional `{0}`")]
    UnknownName(String),
    #[error("invalid parameter `{name}`: {reason}")]
    InvalidParam { name: String, reason: String },
    #[error("pseudogradient requested at a critical point (‖f′‖ = {0:.3e})")]
    CriticalPoint(f64),
}

/// A C¹ map `R^n → R` together with its gradient.
pub trait Functional: Send + Sync {
    fn name(&self) -> &str;
    fn dim(&self) -> usize;
    fn value(&self, x: &Vector) -> f64;
    fn gradient(&self, x: &Vector) -> Vector;

    /// Analytically known critical points with their levels.
    fn known_critical_points(&self) -> &[(Vector, f64)] {
        &[]
    }

    fn grad_norm(&self, x: &Vector) -> f64 {
        self.gradient(x).norm()
    }
}

type ValueFn = Box<dyn Fn(&Vector) -> f64 + Send + Sync>;
type GradFn = Box<dyn Fn(&Vector) -> Vector + Send + Sync>;

/// Functional assembled from closures.
pub struct FnFunctional {
    name: String,
    dim: usize,
    value: ValueFn,
    gradient: GradFn,
    critical: Vec<(Vector, f64)>,
}

impl FnFunctional {
    pub fn new(
        name: impl Into<String>,
        dim: usize,
        value: impl Fn(&Vector) -> f64 + Send + Sync + 'static,
        gradient: impl Fn(&Vector) -> Vector + Send + Sync + 'static,
    ) -> Self {
        Self {
            name: name.into(),
            dim,
            value: Box::new(value),
            gradient: Box::new(gradient),
            critical: Vec::new(),
        }
    }

    pub fn with_critical_points(mut self, pts: Vec<(Vector, f64)>) -> Self {
        self.critical = pts;
        self
    }
}

impl fmt::Debug for FnFunctional {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("FnFunctional")
            .field("name", &self.name)
            .field("dim", &self.dim)
            .finish()
    }
}

impl Functional for FnFunctional {
    fn name(&self) -> &str {
        &self.name
    }
    fn dim(&self) -> usize {
        self.dim
    }
    fn value(&self, x: &Vector) -> f64 {
        (self.value)(x)
    }
    fn gradient(&self, x: &Vector) -> Vector {
        (self.gradient)(x)
    }
    fn known_critical_points(&self) -> &[(Vector, f64)] {
        &self.critical
    }
}

#[derive(Clone, Debug, PartialEq)]
enum Kind {
    /// x₀⁴ − 2x₀² + Σ_{i≥1} xᵢ² + shift
    DoubleWell {
        shift: f64,
    },
    /// Σ_{i<k} xᵢ² − Σ_{i≥k} xᵢ²
    Saddle {
        positive: usize,
    },
    Exp1d,
    /// max(0, ‖x‖ − r)²
    RadialPlateau {
        radius: f64,
    },
    /// Discrete energy of −u″ = u³ on (0, L) with Dirichlet data; `h = L/m`.
    BvpQuartic {
        h: f64,
    },
}

/// Member of the built-in test library.
#[derive(Clone, Debug, PartialEq)]
pub struct TestFunctional {
    name: String,
    dim: usize,
    kind: Kind,
    critical: Vec<(Vector, f64)>,
}

pub const TEST_FUNCTIONALS: [&str; 5] = [
    "double_well",
    "saddle",
    "exp1d",
    "radial_plateau",
    "bvp_quartic",
];

struct Params<'a> {
    name: &'a str,
    map: &'a BTreeMap<String, f64>,
    allowed: &'a [&'a str],
}

impl Params<'_> {
    fn check_keys(&self) -> Result<(), FunctionalError> {
        for k in self.map.keys() {
            if !self.allowed.contains(&k.as_str()) {
                return Err(FunctionalError::InvalidParam {
                    name: k.clone(),
                    reason: format!("not a parameter of {}", self.name),
                });
            }
        }
        Ok(())
    }

    fn real(&self, key: &str, default: f64) -> Result<f64, FunctionalError> {
        let v = self.map.get(key).copied().unwrap_or(default);
        if !v.is_finite() {
            return Err(FunctionalError::InvalidParam {
                name: key.into(),
                reason: "not finite".into(),
            });
        }
        Ok(v)
    }

    fn count(&self, key: &str, default: usize, min: usize) -> Result<usize, FunctionalError> {
        let v = self.map.get(key).copied().unwrap_or(default as f64);
        if v.fract() != 0.0 || v < min as f64 {
            return Err(FunctionalError::InvalidParam {
                name: key.into(),
                reason: format!("expected an integer ≥ {min}, got {v}"),
            });
        }
        Ok(v as usize)
    }
}

fn axis(n: usize, i: usize, s: f64) -> Vector {
    Vector::from_fn(n, |k, _| if k == i { s } else { 0.0 })
}

/// Builds a library functional by name.
///
/// | name | parameters (defaults) |
/// |------|-----------------------|
/// | `double_well` | `dim` (2), `shift` (0) |
/// | `saddle` | `dim` (2), `positive` (1) |
/// | `exp1d` | none |
/// | `radial_plateau` | `dim` (2), `radius` (1) |
/// | `bvp_quartic` | `intervals` (16), `length` (1) |
pub fn make_test_functional(
    name: &str,
    params: &BTreeMap<String, f64>,
) -> Result<TestFunctional, FunctionalError> {
    let allowed: &[&str] = match name {
        "double_well" => &["dim", "shift"],
        "saddle" => &["dim", "positive"],
        "exp1d" => &[],
        "radial_plateau" => &["dim", "radius"],
        "bvp_quartic" => &["intervals", "length"],
        _ => return Err(FunctionalError::UnknownName(name.into())),
    };
    let p = Params {
        name,
        map: params,
        allowed,
    };
    p.check_keys()?;
    let (dim, kind, critical) = match name {
        "double_well" => {
            let n = p.count("dim", 2, 1)?;
            let shift = p.real("shift", 0.0)?;
            let crit = vec![
                (Vector::zeros(n), shift),
                (axis(n, 0, 1.0), shift - 1.0),
                (axis(n, 0, -1.0), shift - 1.0),
            ];
            (n, Kind::DoubleWell { shift }, crit)
        }
        "saddle" => {
            let n = p.count("dim", 2, 1)?;
            let k = p.count("positive", 1, 0)?;
            if k > n {
                return Err(FunctionalError::InvalidParam {
                    name: "positive".into(),
                    reason: format!("{k} exceeds dim {n}"),
                });
            }
            (
                n,
                Kind::Saddle { positive: k },
                vec![(Vector::zeros(n), 0.0)],
            )
        }
        "exp1d" => (1, Kind::Exp1d, vec![]),
        "radial_plateau" => {
            let n = p.count("dim", 2, 1)?;
            let r = p.real("radius", 1.0)?;
            if r <= 0.0 {
                return Err(FunctionalError::InvalidParam {
                    name: "radius".into(),
                    reason: "must be positive".into(),
                });
            }
            (
                n,
                Kind::RadialPlateau { radius: r },
                vec![(Vector::zeros(n), 0.0)],
            )
        }
        "bvp_quartic" => {
            let m = p.count("intervals", 16, 2)?;
            let len = p.real("length", 1.0)?;
            if len <= 0.0 {
                return Err(FunctionalError::InvalidParam {
                    name: "length".into(),
                    reason: "must be positive".into(),
                });
            }
            let n = m - 1;
            (
                n,
                Kind::BvpQuartic { h: len / m as f64 },
                vec![(Vector::zeros(n), 0.0)],
            )
        }
        _ => unreachable!(),
    };
    Ok(TestFunctional {
        name: name.into(),
        dim,
        kind,
        critical,
    })
}

impl TestFunctional {
    /// `x⁴ − 2x² + y² (+ shift)` in R^2.
    pub fn double_well() -> Self {
        make_test_functional("double_well", &BTreeMap::new()).unwrap()
    }

    /// `x² − y²` in R^2.
    pub fn saddle() -> Self {
        make_test_functional("saddle", &BTreeMap::new()).unwrap()
    }

    pub fn exp1d() -> Self {
        make_test_functional("exp1d", &BTreeMap::new()).unwrap()
    }

    pub fn radial_plateau(dim: usize, radius: f64) -> Self {
        let p = BTreeMap::from([
            ("dim".to_string(), dim as f64),
            ("radius".to_string(), radius),
        ]);
        make_test_functional("radial_plateau", &p).unwrap()
    }

    /// Whether `x` lies in the analytically known critical set.
    pub fn is_known_critical(&self, x: &Vector, tol: f64) -> bool {
        match self.kind {
            Kind::RadialPlateau { radius } => x.norm() <= radius + tol,
            _ => self.critical.iter().any(|(p, _)| (p - x).norm() <= tol),
        }
    }
}

impl Functional for TestFunctional {
    fn name(&self) -> &str {
        &self.name
    }

    fn dim(&self) -> usize {
        self.dim
    }

    fn value(&self, x: &Vector) -> f64 {
        match &self.kind {
            Kind::DoubleWell { shift } => {
                let x0 = x[0];
                x0.powi(4) - 2.0 * x0 * x0 + x.iter().skip(1).map(|v| v * v).sum::<f64>() + shift
            }
            Kind::Saddle { positive } => x
                .iter()
                .enumerate()
                .map(|(i, v)| if i < *positive { v * v } else { -v * v })
                .sum(),
            Kind::Exp1d => x[0].exp(),
            Kind::RadialPlateau { radius } => {
                let t = (x.norm() - radius).max(0.0);
                t * t
            }
            Kind::BvpQuartic { h } => {
                let n = x.len();
                let at = |i: isize| {
                    if i < 0 || i as usize >= n {
                        0.0
                    } else {
                        x[i as usize]
                    }
                };
                let mut kinetic = 0.0;
                for i in -1..n as isize {
                    let d = (at(i + 1) - at(i)) / h;
                    kinetic += d * d;
                }
                0.5 * kinetic * h - 0.25 * x.iter().map(|u| u.powi(4)).sum::<f64>() * h
            }
        }
    }

    fn gradient(&self, x: &Vector) -> Vector {
        match &self.kind {
            Kind::DoubleWell { .. } => Vector::from_fn(x.len(), |i, _| {
                if i == 0 {
                    4.0 * x[0].powi(3) - 4.0 * x[0]
                } else {
                    2.0 * x[i]
                }
            }),
            Kind::Saddle { positive } => Vector::from_fn(x.len(), |i, _| {
                if i < *positive {
                    2.0 * x[i]
                } else {
                    -2.0 * x[i]
                }
            }),
            Kind::Exp1d => Vector::from_element(1, x[0].exp()),
            Kind::RadialPlateau { radius } => {
                let r = x.norm();
                if r <= *radius {
                    Vector::zeros(x.len())
                } else {
                    x * (2.0 * (r - radius) / r)
                }
            }
            Kind::BvpQuartic { h } => {
                let n = x.len();
                let at = |i: isize| {
                    if i < 0 || i as usize >= n {
                        0.0
                    } else {
                        x[i as usize]
                    }
                };
                Vector::from_fn(n, |j, _| {
                    let j = j as isize;
                    let lap = (2.0 * at(j) - at(j - 1) - at(j + 1)) / (h * h);
                    h * (lap - at(j).powi(3))
                })
            }
        }
    }

    fn known_critical_points(&self) -> &[(Vector, f64)] {
        &self.critical
    }
}

/// Central finite-difference gradient with per-coordinate step `step·max(1,|xᵢ|)`.
pub fn fd_gradient(f: &dyn Functional, x: &Vector, step: f64) -> Vector {
    Vector::from_fn(x.len(), |i, _| {
        let h = step * x[i].abs().max(1.0);
        let mut xp = x.clone();
        let mut xm = x.clone();
        xp[i] += h;
        xm[i] -= h;
        (f.value(&xp) - f.value(&xm)) / (xp[i] - xm[i])
    })
}

/// Relative gradient error `‖∇f − ∇_FD f‖ / max(1, ‖∇f‖)`.
pub fn gradient_error(f: &dyn Functional, x: &Vector, step: f64) -> f64 {
    let g = f.gradient(x);
    (&g - fd_gradient(f, x, step)).norm() / g.norm().max(1.0)
}

/// Symmetric finite-difference Hessian built from gradient differences.
pub fn fd_hessian(f: &dyn Functional, x: &Vector, step: f64) -> DMatrix<f64> {
    let n = x.len();
    let mut h = DMatrix::zeros(n, n);
    for j in 0..n {
        let s = step * x[j].abs().max(1.0);
        let mut xp = x.clone();
        let mut xm = x.clone();
        xp[j] += s;
        xm[j] -= s;
        let col = (f.gradient(&xp) - f.gradient(&xm)) / (2.0 * s);
        h.set_column(j, &col);
    }
    (&h + h.transpose()) * 0.5
}

/// Newton iteration on `∇f = 0` with a finite-difference Hessian; keeps a
/// step only when it lowers `‖∇f‖`. Returns the best point seen.
pub fn newton_polish(f: &dyn Functional, x0: &Vector, max_iters: usize) -> Vector {
    let mut x = x0.clone();
    let mut gn = f.grad_norm(&x);
    for _ in 0..max_iters {
        if gn == 0.0 {
            break;
        }
        let g = f.gradient(&x);
        let h = fd_hessian(f, &x, 1e-6);
        let Some(step) = h.clone().lu().solve(&g) else {
            break;
        };
        let mut t = 1.0;
        let mut improved = false;
        for _ in 0..30 {
            let cand = &x - &step * t;
            let cn = f.grad_norm(&cand);
            if cn < gn {
                x = cand;
                gn = cn;
                improved = true;
                break;
            }
            t *= 0.5;
        }
        if !improved {
            break;
        }
    }
    x
}

/// The pseudogradient used throughout: `W(x) = f′(x)`, which satisfies
/// `‖W‖ ≤ 2‖f′‖` and `⟨f′, W⟩ ≥ ‖f′‖²`.
pub fn pseudogradient(f: &dyn Functional, x: &Vector) -> Result<Vector, FunctionalError> {
    let g = f.gradient(x);
    let n = g.norm();
    if n <= 1e-14 {
        return Err(FunctionalError::CriticalPoint(n));
    }
    Ok(g)
}

/// A candidate Palais–Smale sequence with recorded values and gradient norms.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct PalaisSmaleTrace {
    #[serde(serialize_with = "crate::report::ser_vectors")]
    pub points: Vec<Vector>,
    pub values: Vec<f64>,
    pub gradient_norms: Vec<f64>,
    pub level: f64,
}

impl PalaisSmaleTrace {
    pub fn record(f: &dyn Functional, points: Vec<Vector>, level: f64) -> Self {
        let values = points.iter().map(|p| f.value(p)).collect();
        let gradient_norms = points.iter().map(|p| f.grad_norm(p)).collect();
        Self {
            points,
            values,
            gradient_norms,
            level,
        }
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    /// Recorded values and norms agree with re-evaluation to 1e−12.
    pub fn is_consistent(&self, f: &dyn Functional) -> bool {
        self.values.len() == self.points.len()
            && self.gradient_norms.len() == self.points.len()
            && self
                .points
                .iter()
                .zip(&self.values)
                .zip(&self.gradient_norms)
                .all(|((p, v), g)| {
                    (f.value(p) - v).abs() <= 1e-12 * v.abs().max(1.0)
                        && (f.grad_norm(p) - g).abs() <= 1e-12 * g.abs().max(1.0)
                })
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct PsOptions {
    pub tol_v: f64,
    pub tol_g: f64,
    pub tol_x: f64,
    pub window: usize,
    /// Norm beyond which monotone growth is read as escape to infinity.
    pub norm_bound: f64,
}

impl Default for PsOptions {
    fn default() -> Self {
        Self {
            tol_v: 1e-3,
            tol_g: 1e-3,
            tol_x: 1e-3,
            window: 20,
            norm_bound: 10.0,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct PsDiagnosis {
    pub consistent: bool,
    pub almost_critical: bool,
    pub clustered: bool,
    pub divergent: bool,
    /// Clustered and not divergent.
    pub precompact: bool,
    pub tail_value_gap: f64,
    pub tail_max_grad: f64,
    pub tail_min_pair_distance: f64,
}

/// Finite-window proxy for the (P.S.)_c condition on a recorded sequence.
pub fn check_ps(
    f: &dyn Functional,
    trace: &PalaisSmaleTrace,
    c: f64,
    opts: &PsOptions,
) -> PsDiagnosis {
    let n = trace.len();
    let start = n.saturating_sub(opts.window);
    let tail = start..n;
    let tail_value_gap = trace.values[tail.clone()]
        .iter()
        .map(|v| (v - c).abs())
        .fold(0.0, f64::max);
    let tail_max_grad = trace.gradient_norms[tail.clone()]
        .iter()
        .copied()
        .fold(0.0, f64::max);
    let mut min_pair = f64::INFINITY;
    for i in tail.clone() {
        for j in (i + 1)..n {
            min_pair = min_pair.min((&trace.points[i] - &trace.points[j]).norm());
        }
    }
    let norms: Vec<f64> = trace.points[tail].iter().map(|p| p.norm()).collect();
    let increasing = norms.len() >= 2 && norms.windows(2).all(|w| w[1] > w[0]);
    let divergent = increasing && norms.last().copied().unwrap_or(0.0) > opts.norm_bound;
    let clustered = min_pair <= opts.tol_x;
    PsDiagnosis {
        consistent: trace.is_consistent(f),
        almost_critical: tail_value_gap <= opts.tol_v && tail_max_grad <= opts.tol_g,
        clustered,
        divergent,
        precompact: clustered && !divergent,
        tail_value_gap,
        tail_max_grad,
        tail_min_pair_distance: min_pair,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    fn v(x: &[f64]) -> Vector {
        Vector::from_column_slice(x)
    }

    #[test]
    fn double_well_critical_structure() {
        let f = TestFunctional::double_well();
        // roots of 4x³ − 4x and 2y
        for (p, level) in f.known_critical_points() {
            assert_eq!(f.grad_norm(p), 0.0);
            assert_eq!(f.value(p), *level);
        }
        let levels: Vec<f64> = f.known_critical_points().iter().map(|c| c.1).collect();
        assert_eq!(levels, vec![0.0, -1.0, -1.0]);
    }

    #[test]
    fn saddle_and_exp() {
        let s = TestFunctional::saddle();
        assert_eq!(s.known_critical_points(), &[(v(&[0.0, 0.0]), 0.0)]);
        assert_eq!(s.value(&v(&[1.0, 2.0])), -3.0);
        let e = TestFunctional::exp1d();
        assert!(e.known_critical_points().is_empty());
        for x in [-30.0, -1.0, 0.0, 2.0] {
            assert!(e.gradient(&v(&[x]))[0] > 0.0);
        }
    }

    #[test]
    fn unknown_and_invalid_params() {
        assert_eq!(
            make_test_functional("rosenbrock", &BTreeMap::new()),
            Err(FunctionalError::UnknownName("rosenbrock".into()))
        );
        let bad = BTreeMap::from([("intervals".to_string(), 0.0)]);
        assert!(matches!(
            make_test_functional("bvp_quartic", &bad),
            Err(FunctionalError::InvalidParam { .. })
        ));
        let bad = BTreeMap::from([("intervals".to_string(), -4.0)]);
        assert!(make_test_functional("bvp_quartic", &bad).is_err());
        let stray = BTreeMap::from([("shift".to_string(), 1.0)]);
        assert!(make_test_functional("saddle", &stray).is_err());
    }

    #[test]
    fn pseudogradient_inequalities_and_rejection() {
        let s = TestFunctional::saddle();
        let w = pseudogradient(&s, &v(&[1.0, 1.0])).unwrap();
        assert_eq!(w, v(&[2.0, -2.0]));
        let g = s.gradient(&v(&[1.0, 1.0]));
        assert!(w.norm() <= 2.0 * g.norm());
        assert_abs_diff_eq!(g.dot(&w), 8.0, epsilon = 1e-15);
        let dw = TestFunctional::double_well();
        assert!(matches!(
            pseudogradient(&dw, &v(&[1.0, 0.0])),
            Err(FunctionalError::CriticalPoint(_))
        ));
    }

    #[test]
    fn bvp_gradient_is_scaled_residual() {
        let p = BTreeMap::from([("intervals".to_string(), 8.0)]);
        let f = make_test_functional("bvp_quartic", &p).unwrap();
        assert_eq!(f.dim(), 7);
        let h = 1.0 / 8.0;
        let u = Vector::from_fn(7, |i, _| ((i + 1) as f64 * h * std::f64::consts::PI).sin());
        let g = f.gradient(&u);
        // −u″ − u³ by the three-point stencil, times h
        let ext: Vec<f64> = std::iter::once(0.0)
            .chain(u.iter().copied())
            .chain(std::iter::once(0.0))
            .collect();
        for j in 0..7 {
            let res = -(ext[j] - 2.0 * ext[j + 1] + ext[j + 2]) / (h * h) - ext[j + 1].powi(3);
            assert_abs_diff_eq!(g[j], h * res, epsilon = 1e-12);
        }
        assert!(gradient_error(&f, &u, 1e-5) < 1e-6);
    }

    #[test]
    fn newton_polish_finds_saddle() {
        let f = TestFunctional::double_well();
        let x = newton_polish(&f, &v(&[0.05, -0.03]), 50);
        assert!(f.grad_norm(&x) < 1e-12);
        assert!(x.norm() < 1e-10);
    }

    #[test]
    fn ps_constant_trace_is_clustered() {
        let f = TestFunctional::saddle();
        let trace = PalaisSmaleTrace::record(&f, vec![v(&[0.0, 0.0]); 30], 0.0);
        let d = check_ps(&f, &trace, 0.0, &PsOptions::default());
        assert!(d.consistent && d.almost_critical && d.clustered && d.precompact && !d.divergent);
    }

    #[test]
    fn ps_exp_escaping_trace() {
        let f = TestFunctional::exp1d();
        let pts: Vec<Vector> = (1..=50).map(|n| v(&[-(n as f64)])).collect();
        let trace = PalaisSmaleTrace::record(&f, pts, 0.0);
        // values e^{−n} and slopes e^{−n} on the last 20 terms are below e^{−31}
        assert!(trace.values[30] <= (-31f64).exp() * (1.0 + 1e-12));
        let d = check_ps(&f, &trace, 0.0, &PsOptions::default());
        assert!(d.almost_critical);
        assert!(d.divergent);
        assert!(!d.clustered);
        assert!(!d.precompact);
    }

    #[test]
    fn ps_alternating_trace_clusters() {
        let f = TestFunctional::saddle();
        let a = v(&[1e-4, 0.0]);
        let b = v(&[-1e-4, 2e-4]);
        // pairwise distance 2.83e-4 < tol_x
        assert!((&a - &b).norm() < 1e-3);
        let pts: Vec<Vector> = (0..40)
            .map(|i| if i % 2 == 0 { a.clone() } else { b.clone() })
            .collect();
        let d = check_ps(
            &f,
            &PalaisSmaleTrace::record(&f, pts, 0.0),
            0.0,
            &PsOptions::default(),
        );
        assert!(d.clustered && !d.divergent);
    }

    #[test]
    fn trace_consistency_detects_tampering() {
        let f = TestFunctional::saddle();
        let mut t = PalaisSmaleTrace::record(&f, vec![v(&[1.0, 0.5])], 0.0);
        assert!(t.is_consistent(&f));
        t.values[0] += 1e-9;
        assert!(!t.is_consistent(&f));
    }
}
