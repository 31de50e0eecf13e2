//! Linking pairs `(S, Q, ∂Q)` for the saddle, cylinder, Silva and path geometries.

use std::fmt;
use std::str::FromStr;
use std::sync::Arc;

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use super::mesh::{Chart, Mesh};
use super::GeometryError;
use crate::space::{Decomposition, SetDescriptor, Vector};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PairKind {
    /// `S = V1`, `Q = B_R ∩ V2`.
    Saddle,
    /// `S = ∂B_ρ ∩ V1`, `Q = {se + u₂ : 0 ≤ s ≤ R1, ‖u₂‖ ≤ R2}` with `e ∈ V1`.
    MpCylinder,
    /// `S_ρ = cl(V2 \ B_ρ) ∪ (∂B_ρ ∩ (R⁺e ⊕ V2))`, `Q = B_R ∩ (V1 ⊕ Re)`.
    Silva,
    /// `Q` = segment from `start` to `end`, `S` = sphere of radius ρ about `center`.
    MpPath,
}

impl PairKind {
    pub fn as_str(self) -> &'static str {
        match self {
            PairKind::Saddle => "saddle",
            PairKind::MpCylinder => "mp_cylinder",
            PairKind::Silva => "silva",
            PairKind::MpPath => "mp_path",
        }
    }
}

impl fmt::Display for PairKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for PairKind {
    type Err = GeometryError;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "saddle" => Ok(PairKind::Saddle),
            "mp_cylinder" => Ok(PairKind::MpCylinder),
            "silva" => Ok(PairKind::Silva),
            "mp_path" => Ok(PairKind::MpPath),
            other => Err(GeometryError::UnsupportedKind(other.into())),
        }
    }
}

/// Geometry parameters; which ones matter depends on the kind.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PairParams {
    pub rho: f64,
    /// Ball radius `R` (saddle, silva).
    pub radius: f64,
    /// Cylinder height `R1`.
    pub r1: f64,
    /// Cylinder radius `R2`.
    pub r2: f64,
    /// Cylinder axis in V1, or the path end point.
    pub e: Option<Vec<f64>>,
    /// Path start point (default 0).
    pub start: Option<Vec<f64>>,
    /// Sphere center for paths (default `start`).
    pub center: Option<Vec<f64>>,
    /// Cutoff slope for the Silva homotopy.
    pub beta: f64,
}

impl Default for PairParams {
    fn default() -> Self {
        Self {
            rho: 1.0,
            radius: 2.0,
            r1: 2.0,
            r2: 1.0,
            e: None,
            start: None,
            center: None,
            beta: 2.0,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct LinkingPair {
    pub kind: PairKind,
    pub decomp: Decomposition,
    pub params: PairParams,
    pub s: SetDescriptor,
    pub mesh: Arc<Mesh>,
    /// `min dist(node, S)` over boundary nodes.
    pub boundary_gap: f64,
    pub diam: f64,
    /// False only for paths whose end points sit on the same side of S.
    pub links: bool,
    /// Unit direction `e` (cylinder axis or the decomposition's e).
    pub e: Option<Vector>,
}

fn fail(msg: impl Into<String>) -> GeometryError {
    GeometryError::Parameter(msg.into())
}

fn positive(name: &str, v: f64) -> Result<(), GeometryError> {
    if v > 0.0 && v.is_finite() {
        Ok(())
    } else {
        Err(fail(format!("{name} > 0 violated ({name} = {v})")))
    }
}

fn vector_param(
    v: &Option<Vec<f64>>,
    n: usize,
    name: &str,
) -> Result<Option<Vector>, GeometryError> {
    match v {
        None => Ok(None),
        Some(x) if x.len() == n => Ok(Some(Vector::from_column_slice(x))),
        Some(x) => Err(fail(format!(
            "{name} has {} entries, expected {n}",
            x.len()
        ))),
    }
}

fn max_mesh_dim(d: usize) -> Result<(), GeometryError> {
    if d == 0 || d > 3 {
        Err(GeometryError::UnsupportedDimension(d))
    } else {
        Ok(())
    }
}

fn hstack(cols: &[Vector], n: usize) -> DMatrix<f64> {
    if cols.is_empty() {
        DMatrix::zeros(n, 0)
    } else {
        DMatrix::from_columns(cols)
    }
}

/// Mesh whose largest cell is at most `diam / resolution` across.
fn sized_mesh(chart: Chart, diam: f64, resolution: usize) -> Mesh {
    let target = diam / resolution.max(1) as f64;
    // even counts keep a node at the center of every axis
    let mut m = resolution.max(1);
    m += m % 2;
    loop {
        let mesh = Mesh::uniform(chart.clone(), m);
        if mesh.max_cell_diameter() <= target * (1.0 + 1e-12) || m > 64 * resolution.max(1) {
            return mesh;
        }
        m = (m as f64 * 1.25).ceil() as usize;
        m += m % 2;
    }
}

/// Builds a linking pair and checks `S ∩ ∂Q = ∅` on the boundary nodes.
pub fn make_pair(
    kind: PairKind,
    decomp: &Decomposition,
    params: &PairParams,
    mesh_resolution: usize,
) -> Result<LinkingPair, GeometryError> {
    let n = decomp.dim();
    let p = params;
    let cols = |m: &DMatrix<f64>| {
        m.column_iter()
            .map(|c| c.into_owned())
            .collect::<Vec<Vector>>()
    };
    let mut links = true;
    let (chart, s, diam, e) = match kind {
        PairKind::Saddle => {
            positive("R", p.radius)?;
            if decomp.d2() < 1 {
                return Err(fail("dim V2 ≥ 1 violated"));
            }
            max_mesh_dim(decomp.d2())?;
            let chart = Chart::Ball {
                center: Vector::zeros(n),
                basis: decomp.basis2().clone(),
                radius: p.radius,
            };
            (
                chart,
                SetDescriptor::Subspace {
                    basis: decomp.basis1().clone(),
                },
                2.0 * p.radius,
                None,
            )
        }
        PairKind::MpCylinder => {
            positive("ρ", p.rho)?;
            positive("R2", p.r2)?;
            if p.rho >= p.r1 {
                return Err(fail(format!(
                    "ρ < R1 violated (ρ = {}, R1 = {})",
                    p.rho, p.r1
                )));
            }
            if decomp.d1() < 1 {
                return Err(fail("dim V1 ≥ 1 violated"));
            }
            max_mesh_dim(decomp.d2() + 1)?;
            let e = match vector_param(&p.e, n, "e")? {
                Some(e) => e,
                None => decomp.basis1().column(0).into_owned(),
            };
            if e.norm() == 0.0 {
                return Err(fail("e ≠ 0 violated"));
            }
            let e = e.normalize();
            let off = (&e - crate::space::project_onto(decomp.basis1(), &e)).norm();
            if off > 1e-9 {
                return Err(fail(format!("e ∈ V1 violated (distance {off:.3e})")));
            }
            let chart = Chart::Cylinder {
                e: e.clone(),
                basis: decomp.basis2().clone(),
                height: p.r1,
                radius: p.r2,
            };
            let s = SetDescriptor::Sphere {
                center: Vector::zeros(n),
                radius: p.rho,
                basis: Some(decomp.basis1().clone()),
            };
            let diam = if decomp.d2() > 0 {
                p.r1.hypot(2.0 * p.r2)
            } else {
                p.r1
            };
            (chart, s, diam, Some(e))
        }
        PairKind::Silva => {
            positive("ρ", p.rho)?;
            if p.rho >= p.radius {
                return Err(fail(format!(
                    "ρ < R violated (ρ = {}, R = {})",
                    p.rho, p.radius
                )));
            }
            let e = decomp
                .e()
                .cloned()
                .ok_or_else(|| fail("decomposition needs e"))?;
            max_mesh_dim(decomp.d1() + 1)?;
            let mut c = cols(decomp.basis1());
            c.push(e.clone());
            let chart = Chart::Ball {
                center: Vector::zeros(n),
                basis: hstack(&c, n),
                radius: p.radius,
            };
            let mut parts = Vec::new();
            if decomp.d2() > 0 {
                parts.push(SetDescriptor::Shell {
                    basis: decomp.basis2().clone(),
                    radius: p.rho,
                });
            }
            parts.push(SetDescriptor::Hemisphere {
                axis: e.clone(),
                basis: decomp.basis2().clone(),
                radius: p.rho,
            });
            (
                chart,
                SetDescriptor::Composite(parts),
                2.0 * p.radius,
                Some(e),
            )
        }
        PairKind::MpPath => {
            positive("ρ", p.rho)?;
            let end =
                vector_param(&p.e, n, "e")?.ok_or_else(|| fail("path end point e is required"))?;
            let start = vector_param(&p.start, n, "start")?.unwrap_or_else(|| Vector::zeros(n));
            let center = vector_param(&p.center, n, "center")?.unwrap_or_else(|| start.clone());
            let len = (&end - &start).norm();
            positive("‖e − start‖", len)?;
            let inside = |x: &Vector| (x - &center).norm() < p.rho;
            links = inside(&start) != inside(&end);
            let dir = (&end - &start) / len;
            let chart = Chart::Box {
                origin: start,
                basis: DMatrix::from_columns(&[dir]),
                lo: Vector::zeros(1),
                hi: Vector::from_element(1, len),
            };
            let s = SetDescriptor::Sphere {
                center,
                radius: p.rho,
                basis: None,
            };
            (chart, s, len, None)
        }
    };
    let mesh = sized_mesh(chart, diam, mesh_resolution);
    let boundary_gap = mesh
        .boundary_nodes()
        .iter()
        .map(|&b| s.dist(mesh.node(b)))
        .fold(f64::INFINITY, f64::min);
    if !(boundary_gap > 0.0) {
        return Err(GeometryError::L1Violated { gap: boundary_gap });
    }
    Ok(LinkingPair {
        kind,
        decomp: decomp.clone(),
        params: params.clone(),
        s,
        mesh: Arc::new(mesh),
        boundary_gap,
        diam,
        links,
        e,
    })
}

impl LinkingPair {
    /// Same geometry on a different mesh (e.g. after refinement).
    pub fn with_mesh(&self, mesh: Arc<Mesh>) -> Self {
        let boundary_gap = mesh
            .boundary_nodes()
            .iter()
            .map(|&b| self.s.dist(mesh.node(b)))
            .fold(f64::INFINITY, f64::min);
        Self {
            mesh,
            boundary_gap,
            ..self.clone()
        }
    }

    pub fn q_dim(&self) -> usize {
        self.mesh.dim()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    #[test]
    fn saddle_in_the_plane() {
        let d = Decomposition::coordinate(2, &[0], &[1], None).unwrap();
        let p = PairParams {
            radius: 2.0,
            ..Default::default()
        };
        let pair = make_pair(PairKind::Saddle, &d, &p, 8).unwrap();
        let bn: Vec<Vector> = pair
            .mesh
            .boundary_nodes()
            .iter()
            .map(|&b| pair.mesh.node(b).clone())
            .collect();
        assert_eq!(
            bn,
            vec![
                Vector::from_vec(vec![0.0, -2.0]),
                Vector::from_vec(vec![0.0, 2.0])
            ]
        );
        assert_eq!(pair.boundary_gap, 2.0);
        assert!(pair.mesh.max_cell_diameter() <= 4.0 / 8.0 + 1e-12);
    }

    #[test]
    fn cylinder_gap_matches_enumeration() {
        let d = Decomposition::coordinate(3, &[0, 1], &[2], None).unwrap();
        let p = PairParams {
            rho: 1.0,
            r1: 2.0,
            r2: 1.0,
            ..Default::default()
        };
        let pair = make_pair(PairKind::MpCylinder, &d, &p, 8).unwrap();
        // boundary pieces: s = 0 (gap ≥ ρ), s = R1 (gap R1 − ρ), ‖u₂‖ = R2 (gap ≥ R2)
        let mut brute = f64::INFINITY;
        for &b in pair.mesh.boundary_nodes() {
            let x = pair.mesh.node(b);
            let r = x[0].hypot(x[1]);
            brute = brute.min(((r - 1.0).powi(2) + x[2] * x[2]).sqrt());
        }
        assert_abs_diff_eq!(pair.boundary_gap, brute, epsilon = 1e-14);
        assert_abs_diff_eq!(pair.boundary_gap, 1.0, epsilon = 1e-12);
        assert!(pair.mesh.max_cell_diameter() <= pair.diam / 8.0 + 1e-12);
    }

    #[test]
    fn silva_rejects_rho_above_r() {
        let d = Decomposition::coordinate(3, &[0], &[2], Some(1)).unwrap();
        let p = PairParams {
            rho: 2.0,
            radius: 1.0,
            ..Default::default()
        };
        let err = make_pair(PairKind::Silva, &d, &p, 8).unwrap_err();
        assert!(err.to_string().contains("ρ < R violated"), "{err}");
    }

    #[test]
    fn silva_gap_is_r_minus_rho() {
        let d = Decomposition::coordinate(3, &[0], &[2], Some(1)).unwrap();
        let p = PairParams {
            rho: 1.0,
            radius: 2.0,
            ..Default::default()
        };
        let pair = make_pair(PairKind::Silva, &d, &p, 8).unwrap();
        assert_abs_diff_eq!(pair.boundary_gap, 1.0, epsilon = 1e-12);
    }

    #[test]
    fn path_linking_flag() {
        let d = Decomposition::coordinate(2, &[0, 1], &[], None).unwrap();
        let p = PairParams {
            rho: 0.5,
            e: Some(vec![1.0, 0.0]),
            start: Some(vec![-1.0, 0.0]),
            center: Some(vec![0.0, 0.0]),
            ..Default::default()
        };
        let pair = make_pair(PairKind::MpPath, &d, &p, 64).unwrap();
        assert!(!pair.links);
        let p = PairParams { center: None, ..p };
        let pair = make_pair(PairKind::MpPath, &d, &p, 64).unwrap();
        assert!(pair.links);
        assert_eq!(pair.mesh.len(), 65);
    }

    #[test]
    fn kind_round_trip() {
        for k in [
            PairKind::Saddle,
            PairKind::MpCylinder,
            PairKind::Silva,
            PairKind::MpPath,
        ] {
            assert_eq!(k.as_str().parse::<PairKind>().unwrap(), k);
        }
        assert!("torus".parse::<PairKind>().is_err());
    }
}
