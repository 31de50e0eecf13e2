//! Ekeland's variational principle as a certified search, and the almost
//! critical point constructions built on it: the strict case (values on the
//! pinned set strictly below the inf-max) and the limiting case, where the
//! penalized functional `𝓘(k) = max f(k) + Ψ(k)` localizes points near `S`.

pub mod maps;
pub mod pipeline;
pub mod principle;

use serde::Serialize;
use thiserror::Error;

use crate::geometry::GeometryError;
use crate::space::{SetDescriptor, Vector};

pub use maps::{build_a, ABar, MapSpace, MoveLadder, Objective};
pub use pipeline::{
    dist_to_image, limiting_case_search, strict_case_search, BoundCheck, CertificateSummary,
    LimitingOptions, LocalizedPoint, ProofChain, StrictOptions, StrictPoint,
};
pub use principle::{
    ekeland_point, EkelandCertificate, EkelandChecks, EkelandOptions, EkelandSpace, GridSpace,
};

/// Tie band for maximizer sets.
pub const TAU_M: f64 = 1e-8;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum EkelandError {
    #[error("precondition violated: {0}")]
    Precondition(String),
    #[error("no stabilization after {moves} moves; is Φ bounded below on the candidates?")]
    NoStabilization { moves: usize },
    #[error("Ā is empty: the mesh is too coarse or S and ∂Q do not link")]
    EmptyA,
    #[error("ε = {eps} outside (0, {limit})")]
    EpsRange { eps: f64, limit: f64 },
    #[error("not a limiting instance: |c − α| = {gap:.3e}")]
    NotLimiting { gap: f64 },
    #[error("max f∘g = {sup} is not below {limit}")]
    MapTooHigh { sup: f64, limit: f64 },
    #[error("no gap between the inf-max c = {c} and the pinned level d = {d}")]
    GapNonPositive { c: f64, d: f64 },
    #[error(transparent)]
    Geometry(#[from] GeometryError),
}

/// `Ψ(x) = max{0, ε² − ε·dist(x,S)}`.
pub fn penalty_psi(x: &Vector, s: &SetDescriptor, eps: f64) -> f64 {
    psi_from_dist(s.dist(x), eps)
}

pub(crate) fn psi_from_dist(d: f64, eps: f64) -> f64 {
    (eps * eps - eps * d).max(0.0)
}

/// Gradient of `Ψ` where it is differentiable (`0 < dist < ε`), zero elsewhere.
pub(crate) fn psi_gradient(x: &Vector, s: &SetDescriptor, eps: f64) -> Vector {
    let p = s.nearest(x);
    let diff = x - p;
    let d = diff.norm();
    if d > 0.0 && d < eps {
        diff * (-eps / d)
    } else {
        Vector::zeros(x.len())
    }
}

/// Maximizer set of a value list. Every probability vector supported on
/// `indices` is a subgradient of the max function.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Subdifferential {
    pub indices: Vec<usize>,
    pub max: f64,
    /// Dimension of the unit simplex over `indices`.
    pub simplex_dim: usize,
}

pub fn max_subdifferential(values: &[f64], tau_m: f64) -> Subdifferential {
    assert!(!values.is_empty(), "max_subdifferential needs values");
    let max = values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let indices: Vec<usize> = (0..values.len())
        .filter(|&i| values[i] >= max - tau_m)
        .collect();
    let simplex_dim = indices.len() - 1;
    Subdifferential {
        indices,
        max,
        simplex_dim,
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Descent {
    /// Position in the input list of the smallest gradient.
    pub t0: usize,
    pub bound: f64,
    #[serde(serialize_with = "crate::report::ser_vector")]
    pub direction: Vector,
}

/// `inf_{‖h‖≤1} max_μ Σ μᵢ⟨gᵢ, hᵢ⟩ = −min ‖gᵢ‖`: the decoupled min-max over
/// per-node directions and measures on the maximizer set.
pub fn min_norm_descent(gradients: &[Vector]) -> Descent {
    assert!(
        !gradients.is_empty(),
        "min_norm_descent needs a nonempty maximizer set"
    );
    let mut t0 = 0;
    let mut bound = f64::INFINITY;
    for (i, g) in gradients.iter().enumerate() {
        let n = g.norm();
        if n < bound {
            bound = n;
            t0 = i;
        }
    }
    let g = &gradients[t0];
    let direction = if bound > 0.0 {
        -g / bound
    } else {
        Vector::zeros(g.len())
    };
    Descent {
        t0,
        bound,
        direction,
    }
}
