//! Piecewise-linear maps on a mesh of Q whose boundary nodes are the identity.

use std::f64::consts::PI;
use std::sync::Arc;

use rand::Rng;
use serde::ser::{Serialize, SerializeStruct, Serializer};

use super::mesh::Mesh;
use crate::space::Vector;

/// Admissible map of the class `γ|∂Q = id`, stored as node images.
#[derive(Clone, Debug, PartialEq)]
pub struct AdmissibleMap {
    mesh: Arc<Mesh>,
    images: Vec<Vector>,
}

impl AdmissibleMap {
    pub fn identity(mesh: Arc<Mesh>) -> Self {
        let images = mesh.nodes().to_vec();
        Self { mesh, images }
    }

    /// `γ(u) = f(u, r)` at interior nodes (`r` = reference coordinates);
    /// boundary nodes are pinned.
    pub fn from_fn(mesh: Arc<Mesh>, f: impl Fn(&Vector, &Vector) -> Vector) -> Self {
        let images = (0..mesh.len())
            .map(|i| {
                if mesh.is_boundary(i) {
                    mesh.node(i).clone()
                } else {
                    f(mesh.node(i), &mesh.ref_coords(i))
                }
            })
            .collect();
        Self { mesh, images }
    }

    /// Images taken as given except on boundary nodes, which are re-pinned.
    pub fn from_images(mesh: Arc<Mesh>, mut images: Vec<Vector>) -> Self {
        assert_eq!(images.len(), mesh.len(), "one image per node");
        for &b in mesh.boundary_nodes() {
            images[b] = mesh.node(b).clone();
        }
        Self { mesh, images }
    }

    /// `id + amplitude·w·φ` with `w` vanishing on the reference boundary and
    /// `φ` a random smooth field with `‖φ‖ ≤ 1`.
    pub fn random_perturbation<R: Rng>(mesh: Arc<Mesh>, amplitude: f64, rng: &mut R) -> Self {
        let n = mesh.chart().ambient_dim();
        let d = mesh.dim();
        let modes: Vec<(Vector, Vector, f64)> = (0..3)
            .map(|_| {
                let dir = Vector::from_fn(n, |_, _| rng.gen_range(-1.0..1.0));
                let dir = if dir.norm() > 0.0 {
                    dir.normalize()
                } else {
                    Vector::zeros(n)
                };
                let freq = Vector::from_fn(d, |_, _| rng.gen_range(0.5..2.0));
                (dir, freq, rng.gen_range(0.0..2.0 * PI))
            })
            .collect();
        Self::from_fn(mesh, |u, r| {
            let w = r.iter().map(|t| 4.0 * t * (1.0 - t)).fold(1.0, f64::min);
            let mut phi = Vector::zeros(n);
            for (dir, freq, phase) in &modes {
                phi.axpy((2.0 * PI * freq.dot(r) + phase).sin() / 3.0, dir, 1.0);
            }
            u + phi * (amplitude * w)
        })
    }

    pub fn mesh(&self) -> &Arc<Mesh> {
        &self.mesh
    }

    pub fn images(&self) -> &[Vector] {
        &self.images
    }

    pub fn image(&self, i: usize) -> &Vector {
        &self.images[i]
    }

    /// Replaces one interior image; boundary nodes are refused.
    pub fn set_image(&mut self, i: usize, v: Vector) -> bool {
        if self.mesh.is_boundary(i) {
            return false;
        }
        self.images[i] = v;
        true
    }

    /// PL value at a reference point.
    pub fn eval(&self, r: &Vector) -> Vector {
        self.mesh.interpolate(&self.images, r)
    }

    /// `max ‖γ(u) − u‖` over boundary nodes; zero for admissible maps.
    pub fn boundary_deviation(&self) -> f64 {
        self.mesh
            .boundary_nodes()
            .iter()
            .map(|&b| (&self.images[b] - self.mesh.node(b)).norm())
            .fold(0.0, f64::max)
    }

    pub fn is_pinned(&self) -> bool {
        self.boundary_deviation() == 0.0
            && self.images.iter().all(|v| v.iter().all(|x| x.is_finite()))
    }

    /// The same map re-expressed on a finer mesh with the same realized domain.
    pub fn transfer(&self, mesh: Arc<Mesh>) -> Self {
        let images = (0..mesh.len())
            .map(|i| {
                if mesh.is_boundary(i) {
                    mesh.node(i).clone()
                } else {
                    self.eval(&mesh.ref_coords(i))
                }
            })
            .collect();
        Self { mesh, images }
    }

    /// Applies `f` to every interior image.
    pub fn compose(&self, f: impl Fn(&Vector) -> Vector) -> Self {
        let images = (0..self.mesh.len())
            .map(|i| {
                if self.mesh.is_boundary(i) {
                    self.images[i].clone()
                } else {
                    f(&self.images[i])
                }
            })
            .collect();
        Self {
            mesh: self.mesh.clone(),
            images,
        }
    }
}

/// Serialized as reference coordinates plus images, enough to rebuild the
/// PL map on the same chart.
impl Serialize for AdmissibleMap {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        let refs: Vec<Vec<f64>> = (0..self.mesh.len())
            .map(|i| self.mesh.ref_coords(i).iter().copied().collect())
            .collect();
        let images: Vec<Vec<f64>> = self.images.iter().map(|v| v.iter().copied().collect()).collect();
        let mut st = s.serialize_struct("AdmissibleMap", 3)?;
        st.serialize_field("nodes", &self.mesh.len())?;
        st.serialize_field("ref_coords", &refs)?;
        st.serialize_field("images", &images)?;
        st.end()
    }
}
