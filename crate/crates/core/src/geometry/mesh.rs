//! Simplicial meshes of compact parameter domains.
//!
//! A mesh lives on the reference cube `[0,1]^d` cut by per-axis breakpoints;
//! every grid box is split into `d!` Freudenthal simplices. A [`Chart`] sends
//! reference points into R^n. Node positions are fixed when the mesh is built
//! and refinements interpolate them, so the realized domain (the union of the
//! node simplices) never changes under refinement.

use nalgebra::DMatrix;

use crate::space::Vector;

/// Map from the reference cube into R^n.
#[derive(Clone, Debug, PartialEq)]
pub enum Chart {
    /// `center + basis·(radius·squash(2r − 1))`: the cube onto a ball of `span(basis)`.
    Ball {
        center: Vector,
        basis: DMatrix<f64>,
        radius: f64,
    },
    /// `origin + basis·(lo + (hi − lo)∘r)`.
    Box {
        origin: Vector,
        basis: DMatrix<f64>,
        lo: Vector,
        hi: Vector,
    },
    /// `height·r₀·e + basis·(radius·squash(2r′ − 1))` with `r = (r₀, r′)`.
    Cylinder {
        e: Vector,
        basis: DMatrix<f64>,
        height: f64,
        radius: f64,
    },
}

/// Radial map of `[-1,1]^k` onto the closed unit ball.
pub fn squash(c: &Vector) -> Vector {
    let l2 = c.norm();
    if l2 == 0.0 {
        return c.clone();
    }
    c * (c.amax() / l2)
}

impl Chart {
    pub fn dim(&self) -> usize {
        match self {
            Chart::Ball { basis, .. } | Chart::Box { basis, .. } => basis.ncols(),
            Chart::Cylinder { basis, .. } => basis.ncols() + 1,
        }
    }

    pub fn ambient_dim(&self) -> usize {
        match self {
            Chart::Ball { center, .. } => center.len(),
            Chart::Box { origin, .. } => origin.len(),
            Chart::Cylinder { e, .. } => e.len(),
        }
    }

    pub fn map(&self, r: &Vector) -> Vector {
        match self {
            Chart::Ball {
                center,
                basis,
                radius,
            } => {
                let c = r.map(|t| 2.0 * t - 1.0);
                center + basis * (squash(&c) * *radius)
            }
            Chart::Box {
                origin,
                basis,
                lo,
                hi,
            } => {
                let local = lo + (hi - lo).component_mul(r);
                origin + basis * local
            }
            Chart::Cylinder {
                e,
                basis,
                height,
                radius,
            } => {
                let c = Vector::from_fn(r.len() - 1, |i, _| 2.0 * r[i + 1] - 1.0);
                e * (height * r[0]) + basis * (squash(&c) * *radius)
            }
        }
    }

    /// Coordinates of an ambient point in the chart's own frame, in which
    /// the identity map has degree +1 about interior points.
    pub fn coords(&self, x: &Vector) -> Vector {
        match self {
            Chart::Ball { center, basis, .. } => basis.tr_mul(&(x - center)),
            Chart::Box { origin, basis, .. } => basis.tr_mul(&(x - origin)),
            Chart::Cylinder { e, basis, .. } => {
                let tail = basis.tr_mul(x);
                let mut out = Vector::zeros(tail.len() + 1);
                out[0] = e.dot(x);
                out.rows_mut(1, tail.len()).copy_from(&tail);
                out
            }
        }
    }

    /// Inverse of [`Chart::coords`] on the chart's affine span.
    pub fn from_coords(&self, c: &Vector) -> Vector {
        match self {
            Chart::Ball { center, basis, .. } => center + basis * c,
            Chart::Box { origin, basis, .. } => origin + basis * c,
            Chart::Cylinder { e, basis, .. } => {
                e * c[0] + basis * c.rows(1, c.len() - 1).into_owned()
            }
        }
    }
}

/// A point of the reference cube located in its containing simplex.
#[derive(Clone, Debug, PartialEq)]
pub struct Location {
    pub vertices: Vec<usize>,
    pub weights: Vec<f64>,
}

/// Tensor-grid simplicial mesh of a chart's image.
#[derive(Clone, Debug, PartialEq)]
pub struct Mesh {
    chart: Chart,
    axes: Vec<Vec<f64>>,
    strides: Vec<usize>,
    nodes: Vec<Vector>,
    cells: Vec<Vec<usize>>,
    orientation: Vec<f64>,
    boundary: Vec<bool>,
    boundary_nodes: Vec<usize>,
}

fn permutations(d: usize) -> Vec<Vec<usize>> {
    if d == 0 {
        return vec![vec![]];
    }
    let mut out = Vec::new();
    for p in permutations(d - 1) {
        for pos in 0..=p.len() {
            let mut q = p.clone();
            q.insert(pos, d - 1);
            out.push(q);
        }
    }
    out
}

fn permutation_sign(p: &[usize]) -> f64 {
    let mut inv = 0;
    for i in 0..p.len() {
        for j in (i + 1)..p.len() {
            if p[i] > p[j] {
                inv += 1;
            }
        }
    }
    if inv % 2 == 0 {
        1.0
    } else {
        -1.0
    }
}

impl Mesh {
    /// Uniform mesh with `per_axis` intervals along every reference axis.
    pub fn uniform(chart: Chart, per_axis: usize) -> Self {
        let m = per_axis.max(1);
        let axis: Vec<f64> = (0..=m).map(|i| i as f64 / m as f64).collect();
        let axes = vec![axis; chart.dim()];
        let nodes = Self::grid_refs(&axes)
            .iter()
            .map(|r| chart.map(r))
            .collect();
        Self::assemble(chart, axes, nodes)
    }

    fn grid_refs(axes: &[Vec<f64>]) -> Vec<Vector> {
        let d = axes.len();
        let total: usize = axes.iter().map(|a| a.len()).product();
        (0..total)
            .map(|mut lin| {
                Vector::from_fn(d, |k, _| {
                    let idx = lin % axes[k].len();
                    lin /= axes[k].len();
                    axes[k][idx]
                })
            })
            .collect()
    }

    fn assemble(chart: Chart, axes: Vec<Vec<f64>>, nodes: Vec<Vector>) -> Self {
        let d = axes.len();
        let mut strides = vec![1usize; d];
        for k in 1..d {
            strides[k] = strides[k - 1] * axes[k - 1].len();
        }
        let total: usize = axes.iter().map(|a| a.len()).product();
        let mut boundary = vec![false; total];
        for (lin, b) in boundary.iter_mut().enumerate() {
            for k in 0..d {
                let idx = (lin / strides[k]) % axes[k].len();
                if idx == 0 || idx + 1 == axes[k].len() {
                    *b = true;
                }
            }
        }
        let perms = permutations(d);
        let signs: Vec<f64> = perms.iter().map(|p| permutation_sign(p)).collect();
        let boxes: usize = axes.iter().map(|a| a.len() - 1).product();
        let mut cells = Vec::with_capacity(boxes * perms.len());
        let mut orientation = Vec::with_capacity(boxes * perms.len());
        for mut b in 0..boxes {
            let mut base = 0;
            for k in 0..d {
                let n = axes[k].len() - 1;
                base += (b % n) * strides[k];
                b /= n;
            }
            for (p, s) in perms.iter().zip(&signs) {
                let mut cell = Vec::with_capacity(d + 1);
                let mut v = base;
                cell.push(v);
                for &k in p {
                    v += strides[k];
                    cell.push(v);
                }
                cells.push(cell);
                orientation.push(*s);
            }
        }
        let boundary_nodes = (0..total).filter(|&i| boundary[i]).collect();
        Self {
            chart,
            axes,
            strides,
            nodes,
            cells,
            orientation,
            boundary,
            boundary_nodes,
        }
    }

    pub fn chart(&self) -> &Chart {
        &self.chart
    }

    pub fn dim(&self) -> usize {
        self.axes.len()
    }

    pub fn axes(&self) -> &[Vec<f64>] {
        &self.axes
    }

    pub fn nodes(&self) -> &[Vector] {
        &self.nodes
    }

    pub fn node(&self, i: usize) -> &Vector {
        &self.nodes[i]
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn cells(&self) -> &[Vec<usize>] {
        &self.cells
    }

    /// Sign of the reference orientation of each cell.
    pub fn orientation(&self, cell: usize) -> f64 {
        self.orientation[cell]
    }

    pub fn is_boundary(&self, i: usize) -> bool {
        self.boundary[i]
    }

    pub fn boundary_nodes(&self) -> &[usize] {
        &self.boundary_nodes
    }

    pub fn multi_index(&self, i: usize) -> Vec<usize> {
        (0..self.dim())
            .map(|k| (i / self.strides[k]) % self.axes[k].len())
            .collect()
    }

    pub fn ref_coords(&self, i: usize) -> Vector {
        let idx = self.multi_index(i);
        Vector::from_fn(self.dim(), |k, _| self.axes[k][idx[k]])
    }

    /// Containing simplex and barycentric weights of a reference point
    /// (clamped into the cube).
    pub fn locate(&self, r: &Vector) -> Location {
        let d = self.dim();
        let mut base = 0;
        let mut frac = vec![0.0; d];
        for k in 0..d {
            let ax = &self.axes[k];
            let x = r[k].clamp(0.0, 1.0);
            let j = match ax.binary_search_by(|a| a.total_cmp(&x)) {
                Ok(j) => j.min(ax.len() - 2),
                Err(j) => j.saturating_sub(1).min(ax.len() - 2),
            };
            frac[k] = ((x - ax[j]) / (ax[j + 1] - ax[j])).clamp(0.0, 1.0);
            base += j * self.strides[k];
        }
        let mut order: Vec<usize> = (0..d).collect();
        order.sort_by(|&a, &b| frac[b].total_cmp(&frac[a]));
        let mut vertices = Vec::with_capacity(d + 1);
        let mut weights = Vec::with_capacity(d + 1);
        let mut v = base;
        vertices.push(v);
        weights.push(1.0 - order.first().map_or(0.0, |&k| frac[k]));
        for (pos, &k) in order.iter().enumerate() {
            v += self.strides[k];
            vertices.push(v);
            let next = order.get(pos + 1).map_or(0.0, |&n| frac[n]);
            weights.push(frac[k] - next);
        }
        Location { vertices, weights }
    }

    /// Piecewise-linear interpolation of node values at a reference point.
    pub fn interpolate(&self, values: &[Vector], r: &Vector) -> Vector {
        let loc = self.locate(r);
        let mut out = Vector::zeros(values[0].len());
        for (v, w) in loc.vertices.iter().zip(&loc.weights) {
            if *w != 0.0 {
                out.axpy(*w, &values[*v], 1.0);
            }
        }
        out
    }

    /// Domain point of the realized mesh at a reference point.
    pub fn point(&self, r: &Vector) -> Vector {
        self.interpolate(&self.nodes, r)
    }

    /// Distinct mesh edges as ordered index pairs.
    pub fn edges(&self) -> Vec<(usize, usize)> {
        let mut out: Vec<(usize, usize)> = Vec::new();
        for c in &self.cells {
            for i in 0..c.len() {
                for j in (i + 1)..c.len() {
                    out.push((c[i].min(c[j]), c[i].max(c[j])));
                }
            }
        }
        out.sort_unstable();
        out.dedup();
        out
    }

    /// Adjacency lists built from [`Mesh::edges`].
    pub fn neighbors(&self) -> Vec<Vec<usize>> {
        let mut adj = vec![Vec::new(); self.len()];
        for (a, b) in self.edges() {
            adj[a].push(b);
            adj[b].push(a);
        }
        adj
    }

    /// Facets on the boundary of the reference cube (all vertices share a
    /// face coordinate).
    pub fn boundary_facets(&self) -> Vec<Vec<usize>> {
        let d = self.dim();
        let mut out = Vec::new();
        for c in &self.cells {
            for drop in 0..c.len() {
                let facet: Vec<usize> = c
                    .iter()
                    .enumerate()
                    .filter(|(i, _)| *i != drop)
                    .map(|(_, v)| *v)
                    .collect();
                let idx: Vec<Vec<usize>> = facet.iter().map(|&v| self.multi_index(v)).collect();
                let on_face = (0..d).any(|k| {
                    let last = self.axes[k].len() - 1;
                    idx.iter().all(|m| m[k] == 0) || idx.iter().all(|m| m[k] == last)
                });
                if on_face {
                    out.push(facet);
                }
            }
        }
        out
    }

    pub fn max_cell_diameter(&self) -> f64 {
        self.cells
            .iter()
            .map(|c| {
                let mut m: f64 = 0.0;
                for i in 0..c.len() {
                    for j in (i + 1)..c.len() {
                        m = m.max((&self.nodes[c[i]] - &self.nodes[c[j]]).norm());
                    }
                }
                m
            })
            .fold(0.0, f64::max)
    }

    /// Adds breakpoints (reference coordinates strictly inside existing
    /// intervals) and interpolates node positions from this mesh.
    pub fn with_breaks(&self, extra: &[Vec<f64>]) -> Mesh {
        let mut axes = self.axes.clone();
        for (k, more) in extra.iter().enumerate() {
            axes[k].extend(more.iter().copied().filter(|x| *x > 0.0 && *x < 1.0));
            axes[k].sort_by(f64::total_cmp);
            axes[k].dedup();
        }
        let nodes = Self::grid_refs(&axes)
            .iter()
            .map(|r| self.point(r))
            .collect();
        Self::assemble(self.chart.clone(), axes, nodes)
    }

    /// Splits every interval into `factor` equal pieces.
    pub fn refined(&self, factor: usize) -> Mesh {
        let extra: Vec<Vec<f64>> = self
            .axes
            .iter()
            .map(|ax| {
                ax.windows(2)
                    .flat_map(|w| {
                        (1..factor).map(move |j| w[0] + (w[1] - w[0]) * j as f64 / factor as f64)
                    })
                    .collect()
            })
            .collect();
        self.with_breaks(&extra)
    }
}
