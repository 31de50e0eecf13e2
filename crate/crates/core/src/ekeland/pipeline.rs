//! Almost critical points from Ekeland's principle on map spaces.
//!
//! Limiting case (`c = inf_S f`): with `g` such that `max f∘g < c + ε²/4`,
//! minimize `𝓘` over maps on `Ā` that agree with `g` on `∂A`. Since every
//! such map meets `S`, `inf 𝓘 ≥ c + ε²` while `𝓘(g̃) ≤ c + 5ε²/4`, so `g̃` is
//! `ε²/4`-optimal and Ekeland with `δ = ε/2` yields `ĝ` within `ε/2` of `g̃`
//! whose maximizer set carries a point of small gradient.

use serde::Serialize;

use super::maps::{build_a, MapSpace, MoveLadder, Site};
use super::principle::{ekeland_point, EkelandChecks, EkelandOptions, EkelandSpace};
use super::{max_subdifferential, min_norm_descent, EkelandError, TAU_M};
use crate::functional::Functional;
use crate::geometry::{AdmissibleMap, LinkingPair};
use crate::space::Vector;

/// `lhs ≤ rhs` up to `slack`, with the numbers kept for the report.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct BoundCheck {
    pub name: String,
    pub lhs: f64,
    pub rhs: f64,
    pub holds: bool,
}

impl BoundCheck {
    fn le(name: &str, lhs: f64, rhs: f64, slack: f64) -> Self {
        Self {
            name: name.into(),
            lhs,
            rhs,
            holds: lhs <= rhs + slack,
        }
    }
}

/// `c + ε² ≤ 𝓘(ĝ) ≤ 𝓘(g̃) ≤ c + 5ε²/4`.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ProofChain {
    pub lower: f64,
    pub i_hat: f64,
    pub i_tilde: f64,
    pub upper: f64,
    pub holds: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct CertificateSummary {
    pub moves: usize,
    pub distance: f64,
    pub eps: f64,
    pub delta: f64,
    pub checks: EkelandChecks,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct LocalizedPoint {
    #[serde(serialize_with = "crate::report::ser_vector")]
    pub x_eps: Vector,
    pub f_value: f64,
    pub grad_norm: f64,
    pub dist_to_s: f64,
    pub eps: f64,
    pub c: f64,
    pub site: Site,
    pub a_nodes: usize,
    pub a_free: usize,
    pub maximizers: usize,
    pub chain: ProofChain,
    pub bound_checks: Vec<BoundCheck>,
    /// `‖f′(x_ε)‖ ≤ ε/2`; reported, not required.
    pub gradient_half_eps: bool,
    pub certificate: CertificateSummary,
    #[serde(serialize_with = "crate::report::ser_vectors")]
    pub g_hat: Vec<Vector>,
}

impl LocalizedPoint {
    pub fn all_pass(&self) -> bool {
        self.chain.holds
            && self.bound_checks.iter().all(|b| b.holds)
            && self.certificate.checks.all_hold()
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct LimitingOptions {
    pub tau_c: f64,
    /// Slack in every reported inequality.
    pub slack: f64,
    pub tau_m: f64,
    /// Unpinned nodes wanted in `Ā` before the mesh stops being refined.
    pub min_free: usize,
    pub max_refinements: usize,
    pub ladder: MoveLadder,
    pub ekeland: EkelandOptions,
}

impl Default for LimitingOptions {
    fn default() -> Self {
        Self {
            tau_c: 1e-4,
            slack: 1e-8,
            tau_m: TAU_M,
            min_free: 8,
            max_refinements: 6,
            ladder: MoveLadder::default(),
            ekeland: EkelandOptions::default(),
        }
    }
}

fn node_max(f: &dyn Functional, images: &[Vector]) -> f64 {
    images
        .iter()
        .map(|x| f.value(x))
        .fold(f64::NEG_INFINITY, f64::max)
}

/// Localized almost critical point for the limiting case `c = α`.
///
/// `ε` must lie in `(0, min{1, dist(∂Q,S)}/2)`.
pub fn limiting_case_search(
    f: &dyn Functional,
    pair: &LinkingPair,
    g: &AdmissibleMap,
    c: f64,
    alpha: f64,
    eps: f64,
    opts: &LimitingOptions,
) -> Result<LocalizedPoint, EkelandError> {
    if (c - alpha).abs() > opts.tau_c {
        return Err(EkelandError::NotLimiting {
            gap: (c - alpha).abs(),
        });
    }
    let limit = pair.boundary_gap.min(1.0) / 2.0;
    if !(eps > 0.0 && eps < limit) {
        return Err(EkelandError::EpsRange { eps, limit });
    }
    if !g.is_pinned() {
        return Err(EkelandError::Precondition(format!(
            "g is not pinned on ∂Q (deviation {:.3e})",
            g.boundary_deviation()
        )));
    }
    let high = c + eps * eps / 4.0;
    let sup = node_max(f, g.images());
    if !(sup < high) {
        return Err(EkelandError::MapTooHigh { sup, limit: high });
    }
    let abar = build_a(g, pair, eps, opts.min_free, opts.max_refinements)?;
    let sup = node_max(f, abar.g.images());
    if !(sup < high) {
        return Err(EkelandError::MapTooHigh { sup, limit: high });
    }
    let space = MapSpace::penalized(f, &abar, pair.s.clone(), eps, eps / 2.0)
        .with_lower_bound(c + eps * eps)
        .with_ladder(opts.ladder.clone());
    let g_tilde = abar.g_tilde();
    let i_tilde = space.value(&g_tilde);
    let cert = ekeland_point(&space, g_tilde, eps * eps / 4.0, eps / 2.0, &opts.ekeland)?;
    let sites = space.sites(&cert.y);
    let values: Vec<f64> = sites.iter().map(|p| p.value).collect();
    let sub = max_subdifferential(&values, opts.tau_m);
    let grads: Vec<Vector> = sub
        .indices
        .iter()
        .map(|&i| f.gradient(&sites[i].x))
        .collect();
    let descent = min_norm_descent(&grads);
    let best = &sites[sub.indices[descent.t0]];
    let x_eps = best.x.clone();
    let f_value = f.value(&x_eps);
    let dist_to_s = pair.s.dist(&x_eps);
    let i_hat = cert.value;
    let s = opts.slack;
    let lower = c + eps * eps;
    let upper = c + 1.25 * eps * eps;
    let chain = ProofChain {
        lower,
        i_hat,
        i_tilde,
        upper,
        holds: lower <= i_hat + s && i_hat <= i_tilde + s && i_tilde <= upper + s,
    };
    let bound_checks = vec![
        BoundCheck::le("c ≤ f(x_ε)", c, f_value, s),
        BoundCheck::le("f(x_ε) ≤ c + 5ε²/4", f_value, upper, s),
        BoundCheck::le("dist(x_ε,S) ≤ 3ε/2", dist_to_s, 1.5 * eps, s),
        BoundCheck::le("‖f′(x_ε)‖ ≤ 3ε/2", descent.bound, 1.5 * eps, s),
    ];
    Ok(LocalizedPoint {
        x_eps,
        f_value,
        grad_norm: descent.bound,
        dist_to_s,
        eps,
        c,
        site: best.site,
        a_nodes: abar.nodes.len(),
        a_free: abar.free_count(),
        maximizers: sub.indices.len(),
        chain,
        bound_checks,
        gradient_half_eps: descent.bound <= eps / 2.0,
        certificate: CertificateSummary {
            moves: cert.moves,
            distance: cert.distance,
            eps: cert.eps,
            delta: cert.delta,
            checks: cert.checks,
        },
        g_hat: cert.y,
    })
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct StrictOptions {
    pub slack: f64,
    pub tau_m: f64,
    pub ladder: MoveLadder,
    pub ekeland: EkelandOptions,
}

impl Default for StrictOptions {
    fn default() -> Self {
        Self {
            slack: 1e-8,
            tau_m: TAU_M,
            ladder: MoveLadder::default(),
            ekeland: EkelandOptions::default(),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct StrictPoint {
    #[serde(serialize_with = "crate::report::ser_vector")]
    pub u: Vector,
    pub f_value: f64,
    pub grad_norm: f64,
    pub dist_to_image: f64,
    pub max_p: f64,
    pub c: f64,
    pub d: f64,
    pub eps: f64,
    pub bound_checks: Vec<BoundCheck>,
    pub certificate: CertificateSummary,
}

impl StrictPoint {
    pub fn all_pass(&self) -> bool {
        self.bound_checks.iter().all(|b| b.holds) && self.certificate.checks.all_hold()
    }
}

fn segment_dist(a: &Vector, b: &Vector, x: &Vector) -> f64 {
    let d = b - a;
    let dd = d.norm_squared();
    let t = if dd > 0.0 {
        ((x - a).dot(&d) / dd).clamp(0.0, 1.0)
    } else {
        0.0
    };
    (a + d * t - x).norm()
}

/// Distance from `x` to the image of the edges of `p` (all of `p(K)` for a
/// path, an upper bound in higher dimensions).
pub fn dist_to_image(p: &AdmissibleMap, x: &Vector) -> f64 {
    let edges = p.mesh().edges();
    if edges.is_empty() {
        return p
            .images()
            .iter()
            .map(|y| (y - x).norm())
            .fold(f64::INFINITY, f64::min);
    }
    edges
        .iter()
        .map(|&(i, j)| segment_dist(p.image(i), p.image(j), x))
        .fold(f64::INFINITY, f64::min)
}

/// Almost critical point when `c > d = max_{∂Q} f∘p`: Ekeland on maps pinned
/// on `∂Q` with `Φ(m) = max f∘m`, `ε` and `δ = √ε`.
pub fn strict_case_search(
    f: &dyn Functional,
    p: &AdmissibleMap,
    c: f64,
    eps: f64,
    opts: &StrictOptions,
) -> Result<StrictPoint, EkelandError> {
    let mesh = p.mesh();
    let d = mesh
        .boundary_nodes()
        .iter()
        .map(|&b| f.value(p.image(b)))
        .fold(f64::NEG_INFINITY, f64::max);
    if !(c > d) {
        return Err(EkelandError::GapNonPositive { c, d });
    }
    if !(eps > 0.0 && eps < c - d) {
        return Err(EkelandError::EpsRange { eps, limit: c - d });
    }
    let max_p = node_max(f, p.images());
    if max_p > c + eps {
        return Err(EkelandError::MapTooHigh {
            sup: max_p,
            limit: c + eps,
        });
    }
    let delta = eps.sqrt();
    let space = MapSpace::pinned_boundary(f, mesh, delta)
        .with_lower_bound(c)
        .with_ladder(opts.ladder.clone());
    let cert = ekeland_point(&space, p.images().to_vec(), eps, delta, &opts.ekeland)?;
    let values: Vec<f64> = cert.y.iter().map(|x| f.value(x)).collect();
    let sub = max_subdifferential(&values, opts.tau_m);
    let grads: Vec<Vector> = sub
        .indices
        .iter()
        .map(|&i| f.gradient(&cert.y[i]))
        .collect();
    let descent = min_norm_descent(&grads);
    let u = cert.y[sub.indices[descent.t0]].clone();
    let f_value = f.value(&u);
    let dist = dist_to_image(p, &u);
    let s = opts.slack;
    let bound_checks = vec![
        BoundCheck::le("c − ε ≤ f(u)", c - eps, f_value, s),
        BoundCheck::le("f(u) ≤ max f(p)", f_value, max_p, s),
        BoundCheck::le("dist(u, p(K)) ≤ √ε", dist, delta, s),
        BoundCheck::le("‖f′(u)‖ ≤ √ε", descent.bound, delta, s),
    ];
    Ok(StrictPoint {
        u,
        f_value,
        grad_norm: descent.bound,
        dist_to_image: dist,
        max_p,
        c,
        d,
        eps,
        bound_checks,
        certificate: CertificateSummary {
            moves: cert.moves,
            distance: cert.distance,
            eps: cert.eps,
            delta: cert.delta,
            checks: cert.checks,
        },
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::functional::TestFunctional;
    use crate::geometry::{make_pair, PairKind, PairParams};
    use crate::space::Decomposition;

    fn saddle_pair(res: usize) -> LinkingPair {
        let d = Decomposition::coordinate(2, &[0], &[1], None).unwrap();
        make_pair(
            PairKind::Saddle,
            &d,
            &PairParams {
                radius: 2.0,
                ..Default::default()
            },
            res,
        )
        .unwrap()
    }

    #[test]
    fn saddle_identity_is_already_optimal() {
        let pair = saddle_pair(64);
        let f = TestFunctional::saddle();
        let g = AdmissibleMap::identity(pair.mesh.clone());
        let lp = limiting_case_search(&f, &pair, &g, 0.0, 0.0, 0.1, &LimitingOptions::default())
            .unwrap();
        assert!(lp.all_pass(), "{lp:#?}");
        assert!(lp.x_eps.norm() < 1e-12);
        assert!((lp.chain.i_tilde - 0.01).abs() < 1e-15);
    }

    #[test]
    fn saddle_bent_map_moves() {
        let pair = saddle_pair(64);
        let f = TestFunctional::saddle();
        let eps = 0.2;
        // x-offset a·(1 − y²/4) keeps max f∘g = a² below ε²/4
        let a = 0.09;
        let g = AdmissibleMap::from_fn(pair.mesh.clone(), |u, _| {
            Vector::from_vec(vec![a * (1.0 - u[1] * u[1] / 4.0), u[1]])
        });
        let lp = limiting_case_search(&f, &pair, &g, 0.0, 0.0, eps, &LimitingOptions::default())
            .unwrap();
        assert!(lp.all_pass(), "{:#?}", lp.bound_checks);
        assert!(lp.chain.i_tilde > lp.chain.lower);
    }

    #[test]
    fn guards() {
        let pair = saddle_pair(16);
        let f = TestFunctional::saddle();
        let g = AdmissibleMap::identity(pair.mesh.clone());
        let o = LimitingOptions::default();
        assert!(matches!(
            limiting_case_search(&f, &pair, &g, 0.0, 0.0, 0.6, &o),
            Err(EkelandError::EpsRange { .. })
        ));
        assert!(matches!(
            limiting_case_search(&f, &pair, &g, 0.1, 0.0, 0.1, &o),
            Err(EkelandError::NotLimiting { .. })
        ));
        let high =
            AdmissibleMap::from_fn(pair.mesh.clone(), |u, _| Vector::from_vec(vec![0.5, u[1]]));
        assert!(matches!(
            limiting_case_search(&f, &pair, &high, 0.0, 0.0, 0.1, &o),
            Err(EkelandError::MapTooHigh { .. })
        ));
    }

    #[test]
    fn strict_double_well_bulged_path() {
        let d = Decomposition::coordinate(2, &[0, 1], &[], None).unwrap();
        let p = PairParams {
            rho: 0.5,
            e: Some(vec![1.0, 0.0]),
            start: Some(vec![-1.0, 0.0]),
            ..Default::default()
        };
        let pair = make_pair(PairKind::MpPath, &d, &p, 64).unwrap();
        let f = TestFunctional::double_well();
        let path = AdmissibleMap::from_fn(pair.mesh.clone(), |u, _| {
            Vector::from_vec(vec![u[0], 0.3 * (1.0 - u[0] * u[0])])
        });
        let sp = strict_case_search(&f, &path, 0.0, 0.25, &StrictOptions::default()).unwrap();
        assert!(sp.all_pass(), "{sp:#?}");
        assert!(matches!(
            strict_case_search(&f, &path, 0.0, 1.5, &StrictOptions::default()),
            Err(EkelandError::EpsRange { .. })
        ));
        let high = AdmissibleMap::from_fn(pair.mesh.clone(), |u, _| {
            Vector::from_vec(vec![u[0], 0.9 * (1.0 - u[0] * u[0])])
        });
        assert!(matches!(
            strict_case_search(&f, &high, 0.0, 0.25, &StrictOptions::default()),
            Err(EkelandError::MapTooHigh { .. })
        ));
    }
}
