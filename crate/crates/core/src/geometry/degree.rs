//! Brouwer degree of a piecewise-linear map by signed counting of simplex
//! preimages.

use nalgebra::DMatrix;
use serde::Serialize;

use super::mesh::Mesh;
use super::GeometryError;
use crate::exec::Exec;
use crate::space::Vector;

/// Minimum admissible distance between the target and the image of ∂Q.
pub const ETA_DEG: f64 = 1e-6;

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct PreimageCell {
    pub cell: usize,
    pub sign: i64,
    /// Reference coordinates of the preimage point.
    #[serde(serialize_with = "crate::report::ser_vector")]
    pub ref_point: Vector,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct DegreeResult {
    pub degree: i64,
    /// Distance from the target to the image of the boundary facets.
    pub boundary_margin: f64,
    pub certificate: Vec<PreimageCell>,
}

impl DegreeResult {
    pub fn signed_count(&self) -> i64 {
        self.certificate.iter().map(|c| c.sign).sum()
    }
}

/// Distance from `y` to the convex hull of `pts` (at most four points).
pub fn dist_to_simplex(pts: &[&Vector], y: &Vector) -> f64 {
    let k = pts.len();
    let mut best = f64::INFINITY;
    for mask in 1u32..(1 << k) {
        let sub: Vec<&Vector> = (0..k)
            .filter(|i| mask & (1 << i) != 0)
            .map(|i| pts[i])
            .collect();
        let p0 = sub[0];
        if sub.len() == 1 {
            best = best.min((p0 - y).norm());
            continue;
        }
        let m = sub.len() - 1;
        let dirs: Vec<Vector> = sub[1..].iter().map(|p| *p - p0).collect();
        let gram = DMatrix::from_fn(m, m, |i, j| dirs[i].dot(&dirs[j]));
        let rhs = Vector::from_fn(m, |i, _| dirs[i].dot(&(y - p0)));
        let Some(mu) = gram.lu().solve(&rhs) else {
            continue;
        };
        if mu.iter().any(|w| *w < 0.0) || mu.sum() > 1.0 {
            continue;
        }
        let mut q = p0.clone();
        for (w, d) in mu.iter().zip(&dirs) {
            q.axpy(*w, d, 1.0);
        }
        best = best.min((q - y).norm());
    }
    best
}

enum CellHit {
    Miss,
    Hit(PreimageCell),
    Ambiguous,
}

fn barycentric(f: &[&Vector], y: &Vector) -> Option<(Vector, f64)> {
    let d = y.len();
    let m = DMatrix::from_fn(d, d, |i, j| f[j + 1][i] - f[0][i]);
    let det = m.determinant();
    if det == 0.0 || !det.is_finite() {
        return None;
    }
    let lam = m.lu().solve(&(y - f[0]))?;
    Some((lam, det))
}

const PERTURB: [f64; 3] = [0.577_215_664_9, 0.302_775_637_7, 0.141_421_356_2];

/// Degree of the PL interpolant of `values` (one point of R^d per node) on the
/// mesh domain, at the target `y`.
pub fn brouwer_degree(
    mesh: &Mesh,
    values: &[Vector],
    y: &Vector,
    exec: Exec,
) -> Result<DegreeResult, GeometryError> {
    let d = mesh.dim();
    if d == 0 || d > 3 {
        return Err(GeometryError::UnsupportedDimension(d));
    }
    if values.len() != mesh.len() || values.iter().any(|v| v.len() != d) || y.len() != d {
        return Err(GeometryError::Shape(format!(
            "degree needs {} values in R^{d} and a target in R^{d}",
            mesh.len()
        )));
    }
    let facets = mesh.boundary_facets();
    let margin = exec
        .map_range(facets.len(), |i| {
            let pts: Vec<&Vector> = facets[i].iter().map(|&v| &values[v]).collect();
            dist_to_simplex(&pts, y)
        })
        .into_iter()
        .fold(f64::INFINITY, f64::min);
    if !(margin >= ETA_DEG) {
        return Err(GeometryError::BoundaryZero { margin });
    }
    let cells = mesh.cells();
    for attempt in 0..6 {
        // a shift far below the boundary margin leaves the degree unchanged
        let scale = margin.min(1.0) * 1e-7 * (attempt as f64 + 1.0);
        let yp = Vector::from_fn(d, |k, _| y[k] + scale * PERTURB[(k + attempt) % 3]);
        let hits = exec.map_range(cells.len(), |ci| {
            let c = &cells[ci];
            let f: Vec<&Vector> = c.iter().map(|&v| &values[v]).collect();
            let Some((lam, det)) = barycentric(&f, &yp) else {
                return CellHit::Miss;
            };
            let l0 = 1.0 - lam.sum();
            let low = lam.min().min(l0);
            if low < -1e-12 {
                return CellHit::Miss;
            }
            if low < 1e-12 {
                return CellHit::Ambiguous;
            }
            // report the preimage of the unshifted target, clamped into the cell
            let mut w = match barycentric(&f, y) {
                Some((l, _)) => {
                    let mut w = vec![1.0 - l.sum()];
                    w.extend(l.iter().copied());
                    w
                }
                None => {
                    let mut w = vec![l0];
                    w.extend(lam.iter().copied());
                    w
                }
            };
            w.iter_mut().for_each(|x| *x = x.max(0.0));
            let total: f64 = w.iter().sum();
            let mut r = Vector::zeros(d);
            for (k, wk) in w.iter().enumerate() {
                r.axpy(wk / total, &mesh.ref_coords(c[k]), 1.0);
            }
            let sign = (mesh.orientation(ci) * det.signum()) as i64;
            CellHit::Hit(PreimageCell {
                cell: ci,
                sign,
                ref_point: r,
            })
        });
        if hits.iter().any(|h| matches!(h, CellHit::Ambiguous)) {
            continue;
        }
        let certificate: Vec<PreimageCell> = hits
            .into_iter()
            .filter_map(|h| {
                if let CellHit::Hit(p) = h {
                    Some(p)
                } else {
                    None
                }
            })
            .collect();
        let degree = certificate.iter().map(|c| c.sign).sum();
        return Ok(DegreeResult {
            degree,
            boundary_margin: margin,
            certificate,
        });
    }
    Err(GeometryError::DegenerateTarget)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::mesh::Chart;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn cube_mesh(d: usize, m: usize) -> Mesh {
        let chart = Chart::Box {
            origin: Vector::zeros(d),
            basis: DMatrix::identity(d, d),
            lo: Vector::from_element(d, -1.0),
            hi: Vector::from_element(d, 1.0),
        };
        Mesh::uniform(chart, m)
    }

    fn ball_mesh(d: usize, m: usize) -> Mesh {
        let chart = Chart::Ball {
            center: Vector::zeros(d),
            basis: DMatrix::identity(d, d),
            radius: 1.0,
        };
        Mesh::uniform(chart, m)
    }

    #[test]
    fn identity_and_negation() {
        for d in 1..=3 {
            let mesh = ball_mesh(d, 4);
            let y = Vector::from_element(d, 0.1);
            let id: Vec<Vector> = mesh.nodes().to_vec();
            let r = brouwer_degree(&mesh, &id, &y, Exec::Sequential).unwrap();
            assert_eq!(r.degree, 1);
            assert_eq!(r.signed_count(), r.degree);
            let neg: Vec<Vector> = mesh.nodes().iter().map(|v| -v).collect();
            let r = brouwer_degree(&mesh, &neg, &Vector::zeros(d), Exec::Sequential).unwrap();
            assert_eq!(r.degree, if d % 2 == 0 { 1 } else { -1 });
        }
    }

    #[test]
    fn translated_far_away_has_degree_zero() {
        let mesh = ball_mesh(2, 6);
        let c = Vector::from_vec(vec![3.0, 0.5]);
        let vals: Vec<Vector> = mesh.nodes().iter().map(|v| v + &c).collect();
        let r = brouwer_degree(&mesh, &vals, &Vector::zeros(2), Exec::Sequential).unwrap();
        assert_eq!(r.degree, 0);
        assert!(r.certificate.is_empty());
    }

    #[test]
    fn target_on_boundary_image_is_rejected() {
        let mesh = ball_mesh(2, 4);
        let vals: Vec<Vector> = mesh.nodes().to_vec();
        let y = mesh.node(mesh.boundary_nodes()[0]).clone();
        assert!(matches!(
            brouwer_degree(&mesh, &vals, &y, Exec::Sequential),
            Err(GeometryError::BoundaryZero { .. })
        ));
    }

    #[test]
    fn target_on_interior_vertex_is_handled() {
        // y sits exactly on a node shared by many cells
        let mesh = cube_mesh(2, 4);
        let vals: Vec<Vector> = mesh.nodes().to_vec();
        let r = brouwer_degree(&mesh, &vals, &Vector::zeros(2), Exec::Sequential).unwrap();
        assert_eq!(r.degree, 1);
        assert_eq!(r.certificate.len(), 1);
    }

    #[test]
    fn fold_map_has_degree_zero_or_one() {
        // u ↦ (u₀², u₁) folds the square: degree 0 at points with two preimages
        let mesh = cube_mesh(2, 8);
        let vals: Vec<Vector> = mesh
            .nodes()
            .iter()
            .map(|v| Vector::from_vec(vec![v[0] * v[0], v[1]]))
            .collect();
        let r = brouwer_degree(
            &mesh,
            &vals,
            &Vector::from_vec(vec![0.3, 0.1]),
            Exec::Sequential,
        )
        .unwrap();
        assert_eq!(r.degree, 0);
        assert_eq!(r.certificate.len(), 2);
    }

    #[test]
    fn affine_maps_match_determinant_sign() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for d in 1..=3 {
            let mesh = cube_mesh(d, 3);
            for _ in 0..10 {
                let a: DMatrix<f64> = DMatrix::from_fn(d, d, |_, _| rng.gen_range(-1.0..1.0));
                if a.determinant().abs() < 0.05 {
                    continue;
                }
                let b = Vector::from_fn(d, |_, _| rng.gen_range(-1.0..1.0));
                let u0 = Vector::from_fn(d, |_, _| rng.gen_range(-0.5..0.5));
                let y = &a * &u0 + &b;
                let vals: Vec<Vector> = mesh.nodes().iter().map(|u| &a * u + &b).collect();
                let r = brouwer_degree(&mesh, &vals, &y, Exec::Parallel).unwrap();
                assert_eq!(r.degree, a.determinant().signum() as i64);
            }
        }
    }

    #[test]
    fn simplex_distance() {
        let a = Vector::from_vec(vec![0.0, 0.0, 0.0]);
        let b = Vector::from_vec(vec![1.0, 0.0, 0.0]);
        let c = Vector::from_vec(vec![0.0, 1.0, 0.0]);
        let y = Vector::from_vec(vec![0.2, 0.2, 2.0]);
        assert!((dist_to_simplex(&[&a, &b, &c], &y) - 2.0).abs() < 1e-14);
        let y = Vector::from_vec(vec![2.0, -1.0, 0.0]);
        assert!((dist_to_simplex(&[&a, &b, &c], &y) - 2f64.sqrt()).abs() < 1e-14);
    }
}
