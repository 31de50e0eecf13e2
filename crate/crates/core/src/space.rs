//! Vectors of R^n, orthogonal splittings `V1 ⊕ Re ⊕ V2`, and closed sets
//! described well enough to compute nearest points and distances.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};
use thiserror::Error;

/// A point of R^n.
pub type Vector = DVector<f64>;

/// Default membership band for `dist(v, set) = 0`.
pub const TAU_SET: f64 = 1e-9;

const ORTHO_TOL: f64 = 1e-10;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SpaceError {
    #[error("projection onto Re requested but the decomposition has no e")]
    MissingE,
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("basis vectors are not orthonormal (max Gram deviation {0:.3e})")]
    NotOrthonormal(f64),
    #[error("subspaces do not span R^{n}: {got} directions supplied")]
    NotSpanning { n: usize, got: usize },
    #[error("invalid decomposition text: {0}")]
    Parse(String),
}

/// Selects one of the orthogonal projections of a [`Decomposition`].
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum Projection {
    P1,
    P2,
    Pe,
}

/// Orthogonal splitting `R^n = V1 ⊕ (Re) ⊕ V2` stored as orthonormal column bases.
#[derive(Clone, Debug, PartialEq)]
pub struct Decomposition {
    basis1: DMatrix<f64>,
    basis2: DMatrix<f64>,
    e: Option<Vector>,
}

/// Plain-data form of a decomposition: every basis column is one list.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DecompositionSpec {
    pub n: usize,
    #[serde(default)]
    pub basis1: Vec<Vec<f64>>,
    #[serde(default)]
    pub basis2: Vec<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub e: Option<Vec<f64>>,
}

fn columns_to_matrix(n: usize, cols: &[Vec<f64>]) -> Result<DMatrix<f64>, SpaceError> {
    for c in cols {
        if c.len() != n {
            return Err(SpaceError::DimensionMismatch {
                expected: n,
                got: c.len(),
            });
        }
    }
    Ok(DMatrix::from_fn(n, cols.len(), |i, j| cols[j][i]))
}

fn matrix_to_columns(m: &DMatrix<f64>) -> Vec<Vec<f64>> {
    m.column_iter()
        .map(|c| c.iter().copied().collect())
        .collect()
}

impl Decomposition {
    /// Builds a decomposition, checking orthonormality and that the pieces span R^n.
    pub fn new(
        basis1: DMatrix<f64>,
        basis2: DMatrix<f64>,
        e: Option<Vector>,
    ) -> Result<Self, SpaceError> {
        let n = basis1
            .nrows()
            .max(basis2.nrows())
            .max(e.as_ref().map_or(0, |e| e.len()));
        for rows in [basis1.nrows(), basis2.nrows()] {
            if rows != n && rows != 0 {
                return Err(SpaceError::DimensionMismatch {
                    expected: n,
                    got: rows,
                });
            }
        }
        let mut cols: Vec<Vector> = Vec::new();
        cols.extend(basis1.column_iter().map(|c| c.into_owned()));
        cols.extend(basis2.column_iter().map(|c| c.into_owned()));
        if let Some(e) = &e {
            if e.len() != n {
                return Err(SpaceError::DimensionMismatch {
                    expected: n,
                    got: e.len(),
                });
            }
            cols.push(e.clone());
        }
        if cols.len() != n {
            return Err(SpaceError::NotSpanning { n, got: cols.len() });
        }
        let mut worst: f64 = 0.0;
        for i in 0..cols.len() {
            for j in i..cols.len() {
                let target = if i == j { 1.0 } else { 0.0 };
                worst = worst.max((cols[i].dot(&cols[j]) - target).abs());
            }
        }
        if worst > ORTHO_TOL {
            return Err(SpaceError::NotOrthonormal(worst));
        }
        let basis1 = if basis1.ncols() == 0 {
            DMatrix::zeros(n, 0)
        } else {
            basis1
        };
        let basis2 = if basis2.ncols() == 0 {
            DMatrix::zeros(n, 0)
        } else {
            basis2
        };
        Ok(Self { basis1, basis2, e })
    }

    /// Splitting along coordinate axes.
    pub fn coordinate(
        n: usize,
        v1: &[usize],
        v2: &[usize],
        e: Option<usize>,
    ) -> Result<Self, SpaceError> {
        let axis = |i: usize| Vector::from_fn(n, |k, _| if k == i { 1.0 } else { 0.0 });
        let stack = |idx: &[usize]| {
            if idx.is_empty() {
                DMatrix::zeros(n, 0)
            } else {
                DMatrix::from_columns(&idx.iter().map(|&i| axis(i)).collect::<Vec<_>>())
            }
        };
        let (b1, b2) = (stack(v1), stack(v2));
        Self::new(b1, b2, e.map(axis))
    }

    pub fn from_spec(spec: &DecompositionSpec) -> Result<Self, SpaceError> {
        let b1 = columns_to_matrix(spec.n, &spec.basis1)?;
        let b2 = columns_to_matrix(spec.n, &spec.basis2)?;
        let e = spec.e.as_ref().map(|e| Vector::from_column_slice(e));
        let d = Self::new(b1, b2, e)?;
        if d.dim() != spec.n {
            return Err(SpaceError::DimensionMismatch {
                expected: spec.n,
                got: d.dim(),
            });
        }
        Ok(d)
    }

    pub fn to_spec(&self) -> DecompositionSpec {
        DecompositionSpec {
            n: self.dim(),
            basis1: matrix_to_columns(&self.basis1),
            basis2: matrix_to_columns(&self.basis2),
            e: self.e.as_ref().map(|e| e.iter().copied().collect()),
        }
    }

    /// Structured text block (TOML table) describing this decomposition.
    pub fn to_text(&self) -> String {
        toml::to_string(&self.to_spec()).expect("decomposition spec is always serializable")
    }

    pub fn from_text(text: &str) -> Result<Self, SpaceError> {
        let spec: DecompositionSpec =
            toml::from_str(text).map_err(|e| SpaceError::Parse(e.to_string()))?;
        Self::from_spec(&spec)
    }

    pub fn dim(&self) -> usize {
        self.basis1.nrows()
    }

    pub fn d1(&self) -> usize {
        self.basis1.ncols()
    }

    pub fn d2(&self) -> usize {
        self.basis2.ncols()
    }

    pub fn basis1(&self) -> &DMatrix<f64> {
        &self.basis1
    }

    pub fn basis2(&self) -> &DMatrix<f64> {
        &self.basis2
    }

    pub fn e(&self) -> Option<&Vector> {
        self.e.as_ref()
    }

    pub fn project(&self, which: Projection, v: &Vector) -> Result<Vector, SpaceError> {
        if v.len() != self.dim() {
            return Err(SpaceError::DimensionMismatch {
                expected: self.dim(),
                got: v.len(),
            });
        }
        Ok(match which {
            Projection::P1 => project_onto(&self.basis1, v),
            Projection::P2 => project_onto(&self.basis2, v),
            Projection::Pe => {
                let e = self.e.as_ref().ok_or(SpaceError::MissingE)?;
                e * e.dot(v)
            }
        })
    }

    /// Coefficients of `v` in the columns of `basis1`.
    pub fn coords1(&self, v: &Vector) -> Vector {
        self.basis1.tr_mul(v)
    }

    pub fn coords2(&self, v: &Vector) -> Vector {
        self.basis2.tr_mul(v)
    }
}

/// Orthogonal projection onto the span of orthonormal columns.
pub fn project_onto(basis: &DMatrix<f64>, v: &Vector) -> Vector {
    if basis.ncols() == 0 {
        return Vector::zeros(v.len());
    }
    basis * basis.tr_mul(v)
}

fn first_column_or_axis(basis: Option<&DMatrix<f64>>, n: usize) -> Vector {
    match basis {
        Some(b) if b.ncols() > 0 => b.column(0).into_owned(),
        _ => Vector::from_fn(n, |i, _| if i == 0 { 1.0 } else { 0.0 }),
    }
}

/// Closed subsets of R^n with computable nearest points.
#[derive(Clone, Debug, PartialEq)]
pub enum SetDescriptor {
    /// Linear subspace spanned by orthonormal columns.
    Subspace {
        basis: DMatrix<f64>,
    },
    /// `{center + w : w ∈ span(basis), ‖w‖ = radius}`; `basis = None` means all of R^n.
    Sphere {
        center: Vector,
        radius: f64,
        basis: Option<DMatrix<f64>>,
    },
    /// Closed ball, optionally restricted to `center + span(basis)`.
    Ball {
        center: Vector,
        radius: f64,
        basis: Option<DMatrix<f64>>,
    },
    /// `{w ∈ span(basis) : ‖w‖ ≥ radius}`, the closure of a subspace minus an open ball.
    Shell {
        basis: DMatrix<f64>,
        radius: f64,
    },
    /// `∂B_radius(0) ∩ (R⁺ axis ⊕ span(basis))`.
    Hemisphere {
        axis: Vector,
        basis: DMatrix<f64>,
        radius: f64,
    },
    FiniteSample {
        points: Vec<Vector>,
    },
    /// Union of the parts.
    Composite(Vec<SetDescriptor>),
}

impl SetDescriptor {
    pub fn point(p: Vector) -> Self {
        SetDescriptor::FiniteSample { points: vec![p] }
    }

    /// Nearest point of the set to `v` (one of them when it is not unique).
    pub fn nearest(&self, v: &Vector) -> Vector {
        match self {
            SetDescriptor::Subspace { basis } => project_onto(basis, v),
            SetDescriptor::Sphere {
                center,
                radius,
                basis,
            } => {
                let w = v - center;
                let p = match basis {
                    Some(b) => project_onto(b, &w),
                    None => w,
                };
                let norm = p.norm();
                if norm > 0.0 {
                    center + p * (*radius / norm)
                } else {
                    center + first_column_or_axis(basis.as_ref(), v.len()) * *radius
                }
            }
            SetDescriptor::Ball {
                center,
                radius,
                basis,
            } => {
                let w = v - center;
                let p = match basis {
                    Some(b) => project_onto(b, &w),
                    None => w,
                };
                let norm = p.norm();
                if norm <= *radius {
                    center + p
                } else {
                    center + p * (*radius / norm)
                }
            }
            SetDescriptor::Shell { basis, radius } => {
                let p = project_onto(basis, v);
                let norm = p.norm();
                if norm >= *radius {
                    p
                } else if norm > 0.0 {
                    p * (*radius / norm)
                } else {
                    first_column_or_axis(Some(basis), v.len()) * *radius
                }
            }
            SetDescriptor::Hemisphere {
                axis,
                basis,
                radius,
            } => {
                let s = axis.dot(v);
                let w = project_onto(basis, v);
                if s >= 0.0 {
                    let p = axis * s + &w;
                    let norm = p.norm();
                    if norm > 0.0 {
                        p * (*radius / norm)
                    } else {
                        axis * *radius
                    }
                } else {
                    let norm = w.norm();
                    if norm > 0.0 {
                        w * (*radius / norm)
                    } else if basis.ncols() > 0 {
                        basis.column(0).into_owned() * *radius
                    } else {
                        axis * *radius
                    }
                }
            }
            SetDescriptor::FiniteSample { points } => points
                .iter()
                .min_by(|a, b| (*a - v).norm().total_cmp(&(*b - v).norm()))
                .cloned()
                .unwrap_or_else(|| v.clone()),
            SetDescriptor::Composite(parts) => parts
                .iter()
                .map(|p| p.nearest(v))
                .min_by(|a, b| (a - v).norm().total_cmp(&(b - v).norm()))
                .unwrap_or_else(|| v.clone()),
        }
    }

    pub fn dist(&self, v: &Vector) -> f64 {
        match self {
            SetDescriptor::Subspace { basis } => (v - project_onto(basis, v)).norm(),
            SetDescriptor::FiniteSample { points } => points
                .iter()
                .map(|p| (p - v).norm())
                .fold(f64::INFINITY, f64::min),
            SetDescriptor::Composite(parts) => parts
                .iter()
                .map(|p| p.dist(v))
                .fold(f64::INFINITY, f64::min),
            _ => (v - self.nearest(v)).norm(),
        }
    }

    pub fn contains(&self, v: &Vector, tol: f64) -> bool {
        self.dist(v) <= tol
    }

    /// Deterministic sample of roughly `count` points of the set; unbounded
    /// pieces are truncated to the ball of radius `extent`.
    pub fn samples(&self, count: usize, extent: f64) -> Vec<Vector> {
        let count = count.max(2);
        match self {
            SetDescriptor::FiniteSample { points } => points.clone(),
            SetDescriptor::Subspace { basis } => grid_in_cube(basis.ncols(), count, extent)
                .into_iter()
                .map(|c| basis * c)
                .collect(),
            SetDescriptor::Sphere {
                center,
                radius,
                basis,
            } => {
                let b = basis
                    .clone()
                    .unwrap_or_else(|| DMatrix::identity(center.len(), center.len()));
                unit_sphere(b.ncols(), count)
                    .into_iter()
                    .map(|u| center + &b * u * *radius)
                    .collect()
            }
            SetDescriptor::Ball {
                center,
                radius,
                basis,
            } => {
                let b = basis
                    .clone()
                    .unwrap_or_else(|| DMatrix::identity(center.len(), center.len()));
                let shells = 8usize;
                let per = (count / shells).max(2);
                let mut out = vec![center.clone()];
                for k in 1..=shells {
                    let r = *radius * k as f64 / shells as f64;
                    out.extend(
                        unit_sphere(b.ncols(), per)
                            .into_iter()
                            .map(|u| center + &b * u * r),
                    );
                }
                out
            }
            SetDescriptor::Shell { basis, radius } => {
                let shells = 8usize;
                let per = (count / shells).max(2);
                let top = extent.max(*radius);
                let mut out = Vec::new();
                for k in 0..shells {
                    let r = *radius + (top - *radius) * k as f64 / (shells - 1) as f64;
                    out.extend(
                        unit_sphere(basis.ncols(), per)
                            .into_iter()
                            .map(|u| basis * u * r),
                    );
                }
                out
            }
            SetDescriptor::Hemisphere {
                axis,
                basis,
                radius,
            } => {
                let mut full = DMatrix::zeros(axis.len(), basis.ncols() + 1);
                full.set_column(0, axis);
                for j in 0..basis.ncols() {
                    full.set_column(j + 1, &basis.column(j));
                }
                unit_sphere(full.ncols(), 2 * count)
                    .into_iter()
                    .filter(|u| u[0] >= 0.0)
                    .map(|u| &full * u * *radius)
                    .collect()
            }
            SetDescriptor::Composite(parts) => {
                let per = (count / parts.len().max(1)).max(2);
                parts.iter().flat_map(|p| p.samples(per, extent)).collect()
            }
        }
    }

    /// Parameters `s ∈ [0,1]` where the segment `a + s(b−a)` meets the set
    /// (to within [`TAU_SET`]).
    pub fn segment_hits(&self, a: &Vector, b: &Vector) -> Vec<f64> {
        let d = b - a;
        match self {
            SetDescriptor::Subspace { basis } => {
                let pa = a - project_onto(basis, a);
                let pd = &d - project_onto(basis, &d);
                let dd = pd.norm_squared();
                if dd == 0.0 {
                    return if pa.norm() <= TAU_SET {
                        vec![0.0, 0.5, 1.0]
                    } else {
                        vec![]
                    };
                }
                let s = (-pa.dot(&pd) / dd).clamp(0.0, 1.0);
                if (&pa + &pd * s).norm() <= TAU_SET {
                    vec![s]
                } else {
                    vec![]
                }
            }
            SetDescriptor::Sphere {
                center,
                radius,
                basis,
            } => {
                let w = a - center;
                let (pw, pd) = match basis {
                    Some(bm) => (project_onto(bm, &w), project_onto(bm, &d)),
                    None => (w.clone(), d.clone()),
                };
                let (ow, od) = (&w - &pw, &d - &pd);
                // ‖pw + s pd‖² = r²
                let qa = pd.norm_squared();
                let qb = 2.0 * pw.dot(&pd);
                let qc = pw.norm_squared() - radius * radius;
                let mut roots = Vec::new();
                if qa == 0.0 {
                    if qc.abs() <= TAU_SET {
                        roots.extend([0.0, 0.5, 1.0]);
                    }
                } else {
                    let disc = qb * qb - 4.0 * qa * qc;
                    if disc >= 0.0 {
                        let sq = disc.sqrt();
                        // numerically stable pair of roots
                        let q = -0.5 * (qb + qb.signum() * sq);
                        let (r1, r2) = if q != 0.0 {
                            (q / qa, qc / q)
                        } else {
                            (0.0, 0.0)
                        };
                        roots.push(r1);
                        if disc > 0.0 {
                            roots.push(r2);
                        }
                    }
                }
                let mut hits: Vec<f64> = roots
                    .into_iter()
                    .filter(|s| (-1e-12..=1.0 + 1e-12).contains(s))
                    .map(|s| s.clamp(0.0, 1.0))
                    .filter(|&s| (&ow + &od * s).norm() <= TAU_SET)
                    .collect();
                hits.sort_by(f64::total_cmp);
                hits.dedup_by(|x, y| (*x - *y).abs() < 1e-15);
                hits
            }
            SetDescriptor::Composite(parts) => {
                let mut all: Vec<f64> = parts.iter().flat_map(|p| p.segment_hits(a, b)).collect();
                all.sort_by(f64::total_cmp);
                all.dedup_by(|x, y| (*x - *y).abs() < 1e-15);
                all
            }
            _ => generic_segment_hits(|s| self.dist(&(a + &d * s))),
        }
    }
}

/// Local minima of a distance profile on [0,1] that reach zero.
fn generic_segment_hits(dist: impl Fn(f64) -> f64) -> Vec<f64> {
    const K: usize = 64;
    let vals: Vec<f64> = (0..=K).map(|i| dist(i as f64 / K as f64)).collect();
    let mut hits = Vec::new();
    for i in 0..=K {
        let left = if i == 0 { f64::INFINITY } else { vals[i - 1] };
        let right = if i == K { f64::INFINITY } else { vals[i + 1] };
        if vals[i] <= left && vals[i] <= right {
            let lo = (i.saturating_sub(1)) as f64 / K as f64;
            let hi = ((i + 1).min(K)) as f64 / K as f64;
            let s = golden_min(&dist, lo, hi);
            if dist(s) <= TAU_SET {
                hits.push(s);
            }
        }
    }
    hits.dedup_by(|x, y| (*x - *y).abs() < 1e-9);
    hits
}

fn golden_min(f: &impl Fn(f64) -> f64, mut lo: f64, mut hi: f64) -> f64 {
    let g = (5f64.sqrt() - 1.0) / 2.0;
    let mut x1 = hi - g * (hi - lo);
    let mut x2 = lo + g * (hi - lo);
    let (mut f1, mut f2) = (f(x1), f(x2));
    for _ in 0..100 {
        if f1 <= f2 {
            hi = x2;
            x2 = x1;
            f2 = f1;
            x1 = hi - g * (hi - lo);
            f1 = f(x1);
        } else {
            lo = x1;
            x1 = x2;
            f1 = f2;
            x2 = lo + g * (hi - lo);
            f2 = f(x2);
        }
        if hi - lo < 1e-15 {
            break;
        }
    }
    0.5 * (lo + hi)
}

/// Grid of about `count` points in `[-extent, extent]^k` (odd per-axis count, so 0 is included).
fn grid_in_cube(k: usize, count: usize, extent: f64) -> Vec<Vector> {
    if k == 0 {
        return vec![Vector::zeros(0)];
    }
    let mut m = (count as f64).powf(1.0 / k as f64).floor() as usize;
    m = m.max(3);
    if m.is_multiple_of(2) {
        m += 1;
    }
    let total = m.pow(k as u32);
    (0..total)
        .map(|mut idx| {
            Vector::from_fn(k, |_, _| {
                let i = idx % m;
                idx /= m;
                -extent + 2.0 * extent * i as f64 / (m - 1) as f64
            })
        })
        .collect()
}

/// Deterministic points on the unit sphere of R^k (k = 1: ±1; k = 2: uniform
/// angles starting at 0; k ≥ 3: normalized cube-surface grid).
pub fn unit_sphere(k: usize, count: usize) -> Vec<Vector> {
    match k {
        0 => vec![],
        1 => vec![Vector::from_element(1, 1.0), Vector::from_element(1, -1.0)],
        2 => (0..count.max(4))
            .map(|i| {
                let th = 2.0 * std::f64::consts::PI * i as f64 / count.max(4) as f64;
                Vector::from_vec(vec![th.cos(), th.sin()])
            })
            .collect(),
        _ => {
            let faces = 2 * k;
            let per_face = (count / faces).max(1);
            let m = ((per_face as f64).powf(1.0 / (k - 1) as f64).ceil() as usize).max(2);
            let mut out = Vec::new();
            for axis in 0..k {
                for sign in [1.0, -1.0] {
                    for g in grid_in_cube(k - 1, m.pow((k - 1) as u32), 1.0) {
                        let mut v = Vector::zeros(k);
                        let mut j = 0;
                        for i in 0..k {
                            if i == axis {
                                v[i] = sign;
                            } else {
                                v[i] = g[j];
                                j += 1;
                            }
                        }
                        out.push(v.normalize());
                    }
                }
            }
            out
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use proptest::prelude::*;

    fn v(x: &[f64]) -> Vector {
        Vector::from_column_slice(x)
    }

    fn r3() -> Decomposition {
        Decomposition::coordinate(3, &[0], &[1, 2], None).unwrap()
    }

    #[test]
    fn project_onto_coordinate_plane() {
        let p = r3().project(Projection::P2, &v(&[1.0, 2.0, 3.0])).unwrap();
        assert_eq!(p, v(&[0.0, 2.0, 3.0]));
    }

    #[test]
    fn project_is_identity_on_own_subspace() {
        let x = v(&[4.5, 0.0, 0.0]);
        assert_eq!(r3().project(Projection::P1, &x).unwrap(), x);
    }

    #[test]
    fn pe_without_e_is_an_error() {
        assert_eq!(
            r3().project(Projection::Pe, &v(&[1.0, 0.0, 0.0])),
            Err(SpaceError::MissingE)
        );
    }

    #[test]
    fn rejects_non_orthonormal_and_non_spanning() {
        let b1 = DMatrix::from_column_slice(2, 1, &[1.0, 0.0]);
        let b2 = DMatrix::from_column_slice(2, 1, &[1.0, 1.0]);
        assert!(matches!(
            Decomposition::new(b1.clone(), b2, None),
            Err(SpaceError::NotOrthonormal(_))
        ));
        let empty = DMatrix::zeros(2, 0);
        assert!(matches!(
            Decomposition::new(b1, empty, None),
            Err(SpaceError::NotSpanning { .. })
        ));
    }

    #[test]
    fn sphere_distance() {
        let s = SetDescriptor::Sphere {
            center: v(&[0.0, 0.0]),
            radius: 1.0,
            basis: None,
        };
        assert_abs_diff_eq!(s.dist(&v(&[3.0, 4.0])), 4.0, epsilon = 1e-15);
        assert_eq!(s.dist(&v(&[0.6, 0.8])), 0.0);
    }

    #[test]
    fn subspace_distance_is_complementary_norm() {
        let s = SetDescriptor::Subspace {
            basis: DMatrix::from_column_slice(2, 1, &[1.0, 0.0]),
        };
        assert_eq!(s.dist(&v(&[2.0, 3.0])), 3.0);
        assert_eq!(s.dist(&v(&[2.0, 0.0])), 0.0);
    }

    #[test]
    fn sphere_in_subspace_distance() {
        // S = {u ∈ xy-plane : ‖u‖ = 1} in R^3
        let b = DMatrix::from_column_slice(3, 2, &[1.0, 0.0, 0.0, 0.0, 1.0, 0.0]);
        let s = SetDescriptor::Sphere {
            center: Vector::zeros(3),
            radius: 1.0,
            basis: Some(b),
        };
        assert_abs_diff_eq!(s.dist(&v(&[0.0, 0.0, 1.0])), 2f64.sqrt(), epsilon = 1e-15);
        assert_abs_diff_eq!(s.dist(&v(&[2.0, 0.0, 1.0])), 2f64.sqrt(), epsilon = 1e-15);
    }

    #[test]
    fn hemisphere_nearest_on_equator_for_negative_side() {
        // axis = e1, V2 = span(e2): half circle {x ≥ 0, x² + y² = 1}
        let h = SetDescriptor::Hemisphere {
            axis: v(&[1.0, 0.0]),
            basis: DMatrix::from_column_slice(2, 1, &[0.0, 1.0]),
            radius: 1.0,
        };
        assert_abs_diff_eq!(h.dist(&v(&[-1.0, 2.0])), 2f64.sqrt(), epsilon = 1e-14);
        assert_abs_diff_eq!(h.dist(&v(&[2.0, 0.0])), 1.0, epsilon = 1e-14);
        // brute force over the arc
        let p = v(&[-0.3, -0.7]);
        let brute = (0..=20000)
            .map(|i| {
                let th = -std::f64::consts::FRAC_PI_2 + std::f64::consts::PI * i as f64 / 20000.0;
                (v(&[th.cos(), th.sin()]) - &p).norm()
            })
            .fold(f64::INFINITY, f64::min);
        assert_abs_diff_eq!(h.dist(&p), brute, epsilon = 1e-6);
    }

    #[test]
    fn composite_takes_minimum() {
        let c = SetDescriptor::Composite(vec![
            SetDescriptor::point(v(&[0.0, 0.0])),
            SetDescriptor::point(v(&[5.0, 0.0])),
        ]);
        assert_eq!(c.dist(&v(&[4.0, 0.0])), 1.0);
    }

    #[test]
    fn segment_hits_on_axis_and_circle() {
        let axis = SetDescriptor::Subspace {
            basis: DMatrix::from_column_slice(2, 1, &[1.0, 0.0]),
        };
        let hits = axis.segment_hits(&v(&[0.3, -1.0]), &v(&[0.1, 3.0]));
        assert_eq!(hits.len(), 1);
        assert_abs_diff_eq!(hits[0], 0.25, epsilon = 1e-15);

        let circle = SetDescriptor::Sphere {
            center: Vector::zeros(2),
            radius: 0.5,
            basis: None,
        };
        let hits = circle.segment_hits(&v(&[-1.0, 0.0]), &v(&[1.0, 0.0]));
        assert_eq!(hits.len(), 2);
        assert_abs_diff_eq!(hits[0], 0.25, epsilon = 1e-15);
        assert_abs_diff_eq!(hits[1], 0.75, epsilon = 1e-15);
    }

    #[test]
    fn generic_segment_hits_on_shell() {
        let shell = SetDescriptor::Shell {
            basis: DMatrix::from_column_slice(2, 1, &[0.0, 1.0]),
            radius: 1.0,
        };
        // segment crossing the y-axis at y = 2 (in the shell) from (-1,2) to (1,2)
        let hits = shell.segment_hits(&v(&[-1.0, 2.0]), &v(&[1.0, 2.0]));
        assert_eq!(hits.len(), 1);
        assert_abs_diff_eq!(hits[0], 0.5, epsilon = 1e-8);
    }

    #[test]
    fn text_block_round_trip() {
        let d = Decomposition::coordinate(3, &[0], &[2], Some(1)).unwrap();
        let text = d.to_text();
        assert!(text.contains("n = 3"));
        assert_eq!(Decomposition::from_text(&text).unwrap(), d);
        assert!(Decomposition::from_text("n = 2\nbasis1 = [[1.0, 0.0, 0.0]]").is_err());
    }

    #[test]
    fn samples_lie_in_their_sets() {
        let b = DMatrix::from_column_slice(3, 2, &[1.0, 0.0, 0.0, 0.0, 0.0, 1.0]);
        let sets = [
            SetDescriptor::Sphere {
                center: v(&[1.0, 0.0, 0.0]),
                radius: 0.5,
                basis: None,
            },
            SetDescriptor::Ball {
                center: Vector::zeros(3),
                radius: 2.0,
                basis: Some(b.clone()),
            },
            SetDescriptor::Subspace { basis: b.clone() },
            SetDescriptor::Shell {
                basis: b.clone(),
                radius: 1.0,
            },
            SetDescriptor::Hemisphere {
                axis: v(&[0.0, 1.0, 0.0]),
                basis: b,
                radius: 1.5,
            },
        ];
        for s in &sets {
            let pts = s.samples(200, 3.0);
            assert!(pts.len() >= 2);
            for p in pts {
                assert!(s.dist(&p) <= 1e-12, "{s:?} {p}");
            }
        }
    }

    fn random_rotation(seed: u64) -> DMatrix<f64> {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
        let m = DMatrix::from_fn(4, 4, |_, _| rng.gen_range(-1.0..1.0));
        m.qr().q()
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(200))]

        #[test]
        fn projections_resolve_identity(seed in 0u64..50, x in proptest::collection::vec(-10.0f64..10.0, 4)) {
            let q = random_rotation(seed);
            let d = Decomposition::new(
                q.columns(0, 1).into_owned(),
                q.columns(1, 2).into_owned(),
                Some(q.column(3).into_owned()),
            ).unwrap();
            let x = Vector::from_vec(x);
            let p1 = d.project(Projection::P1, &x).unwrap();
            let p2 = d.project(Projection::P2, &x).unwrap();
            let pe = d.project(Projection::Pe, &x).unwrap();
            prop_assert!((&p1 + &p2 + &pe - &x).norm() <= 1e-12);
            prop_assert!((d.project(Projection::P2, &p2).unwrap() - &p2).norm() <= 1e-12);
            let pyth = p1.norm_squared() + p2.norm_squared() + pe.norm_squared();
            prop_assert!((pyth - x.norm_squared()).abs() <= 1e-10 * (1.0 + x.norm_squared()));
        }

        #[test]
        fn distance_is_one_lipschitz(a in proptest::collection::vec(-3.0f64..3.0, 3),
                                     b in proptest::collection::vec(-3.0f64..3.0, 3)) {
            let (a, b) = (Vector::from_vec(a), Vector::from_vec(b));
            let plane = DMatrix::from_column_slice(3, 2, &[1.0, 0.0, 0.0, 0.0, 1.0, 0.0]);
            let sets = [
                SetDescriptor::Sphere { center: Vector::zeros(3), radius: 1.0, basis: Some(plane.clone()) },
                SetDescriptor::Shell { basis: plane.clone(), radius: 1.0 },
                SetDescriptor::Hemisphere { axis: Vector::from_vec(vec![0.0, 0.0, 1.0]), basis: plane.clone(), radius: 1.0 },
                SetDescriptor::Subspace { basis: plane },
            ];
            for s in &sets {
                prop_assert!((s.dist(&a) - s.dist(&b)).abs() <= (&a - &b).norm() + 1e-12);
                prop_assert!(s.dist(&a) >= 0.0);
            }
        }
    }
}
