//! Degree-based linking verification and numerical intersection finding.

use serde::Serialize;

use super::degree::{brouwer_degree, DegreeResult};
use super::map::AdmissibleMap;
use super::pair::{LinkingPair, PairKind};
use super::GeometryError;
use crate::exec::Exec;
use crate::space::{project_onto, Vector};

/// Default intersection residual.
pub const TAU_LINK: f64 = 1e-3;

/// The cutoff `χ_β`: 0 for `x ≤ 0`, `βx/ρ` on `[0, ρ/β]`, 1 beyond.
pub fn chi_beta(beta: f64, rho: f64, x: f64) -> Result<f64, GeometryError> {
    if !(beta > 0.0) {
        return Err(GeometryError::InvalidBeta(beta));
    }
    Ok((beta * x / rho).clamp(0.0, 1.0))
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Intersection {
    #[serde(serialize_with = "crate::report::ser_vector")]
    pub ref_point: Vector,
    #[serde(serialize_with = "crate::report::ser_vector")]
    pub u: Vector,
    #[serde(serialize_with = "crate::report::ser_vector")]
    pub image: Vector,
    pub residual: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct LinkingWitness {
    pub point: Intersection,
    /// `⟨γ(u), e⟩` for the Silva geometry.
    pub pe_component: Option<f64>,
    /// `ρ/β` for the Silva geometry.
    pub pe_bound: Option<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct LinkingReport {
    pub kind: PairKind,
    pub ts: Vec<f64>,
    pub degrees: Vec<i64>,
    pub margins: Vec<f64>,
    /// Bound on how fast the boundary image moves with t.
    pub boundary_speed: f64,
    pub degree_one_throughout: bool,
    pub witness: Option<LinkingWitness>,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct LinkOptions {
    pub t_points: usize,
    pub max_bisections: usize,
    pub beta: Option<f64>,
    pub exec: Exec,
}

impl Default for LinkOptions {
    fn default() -> Self {
        Self {
            t_points: 11,
            max_bisections: 8,
            beta: None,
            exec: Exec::Auto,
        }
    }
}

/// Node values of the kind-specific homotopy at parameter `t`, in chart
/// coordinates, together with the degree target. `t = 0` is the identity.
pub fn homotopy_values(
    pair: &LinkingPair,
    gamma: &AdmissibleMap,
    t: f64,
    beta: f64,
    exec: Exec,
) -> Result<(Vec<Vector>, Vector), GeometryError> {
    let mesh = gamma.mesh();
    let chart = mesh.chart();
    let d = mesh.dim();
    let b1 = pair.decomp.basis1();
    let rho = pair.params.rho;
    match pair.kind {
        PairKind::Saddle => {
            let vals = exec.map_range(mesh.len(), |i| {
                let mix = gamma.image(i) * t + mesh.node(i) * (1.0 - t);
                chart.coords(&mix)
            });
            Ok((vals, Vector::zeros(d)))
        }
        PairKind::MpCylinder => {
            let e = pair.e.as_ref().expect("cylinder axis");
            let vals = exec.map_range(mesh.len(), |i| {
                let u = mesh.node(i);
                let g = gamma.image(i);
                let s = e.dot(u);
                let mut c = chart.coords(&(g * t + u * (1.0 - t)));
                c[0] = t * project_onto(b1, g).norm() - rho + (1.0 - t) * s;
                c
            });
            Ok((vals, Vector::zeros(d)))
        }
        PairKind::Silva => {
            chi_beta(beta, rho, 0.0)?;
            let e = pair.e.as_ref().expect("silva e");
            let s = 1.0 - t;
            let vals = exec.map_range(mesh.len(), |i| {
                let u = mesh.node(i);
                let g = gamma.image(i);
                let p1 = project_onto(b1, g);
                let rest = (g - &p1).norm();
                let chi = (beta * e.dot(g) / rho).clamp(0.0, 1.0);
                let inner = p1 + e * (chi * rest);
                chart.coords(&(u * s + inner * (1.0 - s)))
            });
            let mut y = Vector::zeros(d);
            y[d - 1] = rho;
            Ok((vals, y))
        }
        PairKind::MpPath => Err(GeometryError::UnsupportedKind(
            "mp_path has no degree homotopy".into(),
        )),
    }
}

fn degree_at(
    pair: &LinkingPair,
    gamma: &AdmissibleMap,
    t: f64,
    beta: f64,
    exec: Exec,
) -> Result<DegreeResult, GeometryError> {
    let (vals, y) = homotopy_values(pair, gamma, t, beta, exec)?;
    brouwer_degree(gamma.mesh(), &vals, &y, exec).map_err(|e| match e {
        GeometryError::BoundaryZero { margin } => GeometryError::Inconclusive { t, margin },
        other => other,
    })
}

/// Degree of the linking homotopy across a t-grid, with interval
/// certification against boundary zeros and a witness from the `t = 1` end.
pub fn verify_linking(
    pair: &LinkingPair,
    gamma: &AdmissibleMap,
    opts: &LinkOptions,
) -> Result<LinkingReport, GeometryError> {
    if !gamma.is_pinned() {
        return Err(GeometryError::NotAdmissible(gamma.boundary_deviation()));
    }
    let beta = opts.beta.unwrap_or(pair.params.beta);
    let exec = opts.exec;
    // every homotopy is affine in t at each node
    let (v0, _) = homotopy_values(pair, gamma, 0.0, beta, exec)?;
    let (v1, _) = homotopy_values(pair, gamma, 1.0, beta, exec)?;
    let speed = gamma
        .mesh()
        .boundary_nodes()
        .iter()
        .map(|&b| (&v1[b] - &v0[b]).norm())
        .fold(0.0, f64::max);

    let n = opts.t_points.max(2);
    let mut pts: Vec<(f64, DegreeResult)> = Vec::new();
    for k in 0..n {
        let t = k as f64 / (n - 1) as f64;
        pts.push((t, degree_at(pair, gamma, t, beta, exec)?));
    }
    if pts[0].1.degree != 1 {
        return Err(GeometryError::Inconsistent(format!(
            "degree {} at t = 0",
            pts[0].1.degree
        )));
    }
    // bisect intervals whose end margins do not rule out a boundary zero
    for _ in 0..=opts.max_bisections {
        let mut inserted = Vec::new();
        for w in pts.windows(2) {
            let (ta, ra) = &w[0];
            let (tb, rb) = &w[1];
            if ra.boundary_margin + rb.boundary_margin <= speed * (tb - ta) {
                inserted.push(0.5 * (ta + tb));
            }
        }
        if inserted.is_empty() {
            break;
        }
        if pts.len() > n << opts.max_bisections {
            let t = inserted[0];
            return Err(GeometryError::Inconclusive { t, margin: 0.0 });
        }
        for t in inserted {
            pts.push((t, degree_at(pair, gamma, t, beta, exec)?));
        }
        pts.sort_by(|a, b| a.0.total_cmp(&b.0));
    }
    let uncertified = pts
        .windows(2)
        .find(|w| w[0].1.boundary_margin + w[1].1.boundary_margin <= speed * (w[1].0 - w[0].0));
    if let Some(w) = uncertified {
        return Err(GeometryError::Inconclusive {
            t: w[0].0,
            margin: w[0].1.boundary_margin,
        });
    }

    let last = &pts.last().expect("grid").1;
    let witness = last.certificate.first().map(|cell| {
        let r = cell.ref_point.clone();
        let image = gamma.eval(&r);
        let residual = pair.s.dist(&image);
        let (pe_component, pe_bound) = match pair.kind {
            PairKind::Silva => (
                pair.e.as_ref().map(|e| e.dot(&image)),
                Some(pair.params.rho / beta),
            ),
            _ => (None, None),
        };
        LinkingWitness {
            point: Intersection {
                u: gamma.mesh().point(&r),
                ref_point: r,
                image,
                residual,
            },
            pe_component,
            pe_bound,
        }
    });
    Ok(LinkingReport {
        kind: pair.kind,
        degree_one_throughout: pts.iter().all(|(_, r)| r.degree == 1),
        ts: pts.iter().map(|p| p.0).collect(),
        degrees: pts.iter().map(|p| p.1.degree).collect(),
        margins: pts.iter().map(|p| p.1.boundary_margin).collect(),
        boundary_speed: speed,
        witness,
    })
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct IntersectOptions {
    pub tau_link: f64,
    pub max_refinements: usize,
    pub seeds: usize,
    pub exec: Exec,
}

impl Default for IntersectOptions {
    fn default() -> Self {
        Self {
            tau_link: TAU_LINK,
            max_refinements: 6,
            seeds: 8,
            exec: Exec::Auto,
        }
    }
}

fn lattice(d: usize, half: i32) -> Vec<Vec<i32>> {
    let side = (2 * half + 1) as usize;
    (0..side.pow(d as u32))
        .map(|mut lin| {
            (0..d)
                .map(|_| {
                    let k = (lin % side) as i32 - half;
                    lin /= side;
                    k
                })
                .collect()
        })
        .collect()
}

/// Point `u*` of Q with `dist(γ(u*), S)` small: exact edge crossings on
/// one-dimensional meshes, node scan plus lattice refinement otherwise.
pub fn find_intersection(
    gamma: &AdmissibleMap,
    pair: &LinkingPair,
    opts: &IntersectOptions,
) -> Result<Intersection, GeometryError> {
    if !gamma.is_pinned() {
        return Err(GeometryError::NotAdmissible(gamma.boundary_deviation()));
    }
    let mesh = gamma.mesh();
    let s = &pair.s;
    let d = mesh.dim();
    let exec = opts.exec;
    let node_res = exec.map_range(mesh.len(), |i| s.dist(gamma.image(i)));
    let make = |r: Vector| {
        let image = gamma.eval(&r);
        let residual = s.dist(&image);
        Intersection {
            u: mesh.point(&r),
            ref_point: r,
            image,
            residual,
        }
    };
    let mut order: Vec<usize> = (0..mesh.len()).collect();
    order.sort_by(|a, b| node_res[*a].total_cmp(&node_res[*b]));
    let mut best = make(mesh.ref_coords(order[0]));

    if d == 1 {
        let cells = mesh.cells();
        let found = exec.map_range(cells.len(), |ci| {
            let (a, b) = (cells[ci][0], cells[ci][1]);
            let (ra, rb) = (mesh.ref_coords(a)[0], mesh.ref_coords(b)[0]);
            s.segment_hits(gamma.image(a), gamma.image(b))
                .into_iter()
                .map(|h| make(Vector::from_element(1, ra + h * (rb - ra))))
                .min_by(|x, y| x.residual.total_cmp(&y.residual))
        });
        for cand in found.into_iter().flatten() {
            if cand.residual < best.residual {
                best = cand;
            }
        }
    }
    if best.residual > 0.0 && d > 1 {
        let spacing = mesh
            .axes()
            .iter()
            .flat_map(|ax| ax.windows(2).map(|w| w[1] - w[0]))
            .fold(0.0, f64::max);
        let offsets = lattice(d, 4);
        let seeds: Vec<Vector> = order
            .iter()
            .take(opts.seeds.max(1))
            .map(|&i| mesh.ref_coords(i))
            .collect();
        let refined = exec.map(&seeds, |seed| {
            let mut cur = make(seed.clone());
            let mut h = spacing;
            for _ in 0..opts.max_refinements {
                h /= 4.0;
                let center = cur.ref_point.clone();
                for off in &offsets {
                    let r =
                        Vector::from_fn(d, |k, _| (center[k] + h * off[k] as f64).clamp(0.0, 1.0));
                    let cand = make(r);
                    if cand.residual < cur.residual {
                        cur = cand;
                    }
                }
                if cur.residual == 0.0 {
                    break;
                }
            }
            cur
        });
        for cand in refined {
            if cand.residual < best.residual {
                best = cand;
            }
        }
    }
    if best.residual > opts.tau_link {
        return Err(GeometryError::LinkingViolation {
            residual: best.residual,
        });
    }
    Ok(best)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::pair::{make_pair, PairParams};
    use crate::space::Decomposition;
    use std::f64::consts::PI;

    fn saddle_pair() -> LinkingPair {
        let d = Decomposition::coordinate(2, &[0], &[1], None).unwrap();
        make_pair(
            PairKind::Saddle,
            &d,
            &PairParams {
                radius: 2.0,
                ..Default::default()
            },
            16,
        )
        .unwrap()
    }

    #[test]
    fn chi_beta_branches() {
        assert_eq!(chi_beta(2.0, 1.0, -1.0).unwrap(), 0.0);
        assert_eq!(chi_beta(2.0, 1.0, 0.25).unwrap(), 0.5);
        assert_eq!(chi_beta(2.0, 1.0, 3.0).unwrap(), 1.0);
        assert!(matches!(
            chi_beta(0.0, 1.0, 1.0),
            Err(GeometryError::InvalidBeta(_))
        ));
    }

    #[test]
    fn identity_saddle_links_with_witness_at_origin() {
        let pair = saddle_pair();
        let g = AdmissibleMap::identity(pair.mesh.clone());
        let rep = verify_linking(&pair, &g, &LinkOptions::default()).unwrap();
        assert_eq!(rep.degrees, vec![1; 11]);
        assert_eq!(rep.boundary_speed, 0.0);
        let w = rep.witness.unwrap();
        assert!(w.point.residual < 1e-12);
        let x = find_intersection(&g, &pair, &IntersectOptions::default()).unwrap();
        assert_eq!(x.residual, 0.0);
        assert_eq!(x.u.norm(), 0.0);
    }

    #[test]
    fn sine_profile_crossing() {
        let pair = saddle_pair();
        let r = 2.0;
        let g = AdmissibleMap::from_fn(pair.mesh.clone(), |u, _| {
            let y = u[1];
            Vector::from_vec(vec![(PI * y / r).sin() * (r * r - y * y), y])
        });
        let x = find_intersection(&g, &pair, &IntersectOptions::default()).unwrap();
        assert!(x.residual <= 1e-6);
        assert!(x.u[1].abs() <= 1e-6);
    }

    #[test]
    fn path_crossings_of_origin_circle() {
        let d = Decomposition::coordinate(2, &[0, 1], &[], None).unwrap();
        let p = PairParams {
            rho: 0.5,
            e: Some(vec![1.0, 0.0]),
            start: Some(vec![-1.0, 0.0]),
            center: Some(vec![0.0, 0.0]),
            ..Default::default()
        };
        let pair = make_pair(PairKind::MpPath, &d, &p, 64).unwrap();
        let g = AdmissibleMap::identity(pair.mesh.clone());
        let x = find_intersection(&g, &pair, &IntersectOptions::default()).unwrap();
        assert!(x.residual <= 1e-9);
        assert!((x.image[0].abs() - 0.5).abs() <= 1e-9);
    }

    #[test]
    fn far_map_is_a_linking_violation() {
        // a path pinned at both ends that never meets a tiny sphere off the segment
        let d = Decomposition::coordinate(2, &[0, 1], &[], None).unwrap();
        let p = PairParams {
            rho: 0.1,
            e: Some(vec![1.0, 0.0]),
            start: Some(vec![-1.0, 0.0]),
            center: Some(vec![0.0, 1.0]),
            ..Default::default()
        };
        let pair = make_pair(PairKind::MpPath, &d, &p, 16).unwrap();
        let g = AdmissibleMap::identity(pair.mesh.clone());
        assert!(matches!(
            find_intersection(&g, &pair, &IntersectOptions::default()),
            Err(GeometryError::LinkingViolation { .. })
        ));
    }

    #[test]
    fn silva_identity_degree_is_one() {
        let d = Decomposition::coordinate(3, &[0], &[2], Some(1)).unwrap();
        let p = PairParams {
            rho: 1.0,
            radius: 2.0,
            ..Default::default()
        };
        let pair = make_pair(PairKind::Silva, &d, &p, 8).unwrap();
        let g = AdmissibleMap::identity(pair.mesh.clone());
        let rep = verify_linking(
            &pair,
            &g,
            &LinkOptions {
                beta: Some(2.0),
                ..Default::default()
            },
        )
        .unwrap();
        assert!(rep.degree_one_throughout);
        let w = rep.witness.unwrap();
        // γ = id: the zero of G at s = 0 is ρe itself
        assert!((w.point.image[1] - 1.0).abs() < 1e-9);
        assert!(w.point.residual < 1e-9);
    }

    #[test]
    fn mp_path_has_no_homotopy() {
        let d = Decomposition::coordinate(1, &[0], &[], None).unwrap();
        let p = PairParams {
            rho: 0.5,
            e: Some(vec![1.0]),
            ..Default::default()
        };
        let pair = make_pair(PairKind::MpPath, &d, &p, 8).unwrap();
        let g = AdmissibleMap::identity(pair.mesh.clone());
        assert!(matches!(
            verify_linking(&pair, &g, &LinkOptions::default()),
            Err(GeometryError::UnsupportedKind(_))
        ));
    }
}
