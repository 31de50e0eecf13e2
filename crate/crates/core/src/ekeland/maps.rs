//! Spaces of maps on a mesh with pinned nodes, under the uniform distance,
//! and the set `Ā = {t : dist(g(t), S) < ε}` of the limiting-case argument.

use std::sync::Arc;

use serde::Serialize;

use super::principle::EkelandSpace;
use super::{psi_from_dist, psi_gradient, EkelandError};
use crate::functional::Functional;
use crate::geometry::{AdmissibleMap, LinkingPair, Mesh};
use crate::space::{SetDescriptor, Vector};

/// Mesh nodes of `Ā` with the data `Γ(A)` needs.
#[derive(Clone, Debug)]
pub struct ABar {
    /// Mesh of Q (refined if `Ā` came out too small on the input mesh).
    pub mesh: Arc<Mesh>,
    /// `g` on that mesh.
    pub g: AdmissibleMap,
    /// Mesh indices of the nodes of `Ā`.
    pub nodes: Vec<usize>,
    /// Local flags: `Ā` nodes adjacent to a node outside `Ā` (kept equal to `g`).
    pub pinned: Vec<bool>,
    /// Mesh edges with both ends in `Ā`, in local indices.
    pub edges: Vec<(usize, usize)>,
    /// Image segments of `g` on edges leaving `Ā`; fixed for every `k ∈ Γ(A)`.
    pub collar: Vec<(Vector, Vector)>,
    pub refinements: usize,
}

impl ABar {
    pub fn free_count(&self) -> usize {
        self.pinned.iter().filter(|p| !**p).count()
    }

    /// `g̃ = g|Ā` as a point of the map space.
    pub fn g_tilde(&self) -> Vec<Vector> {
        self.nodes
            .iter()
            .map(|&i| self.g.image(i).clone())
            .collect()
    }

    /// Extends `k` by `g` outside `Ā`.
    pub fn extend(&self, k: &[Vector]) -> AdmissibleMap {
        let mut images = self.g.images().to_vec();
        for (local, &i) in self.nodes.iter().enumerate() {
            images[i] = k[local].clone();
        }
        AdmissibleMap::from_images(self.mesh.clone(), images)
    }
}

/// Collects `Ā`; refines the mesh (at most `max_refinements` times) until
/// `Ā` has `min_free` unpinned nodes. Requires `ε < dist(∂Q, S)`, which keeps
/// `∂Q` outside `Ā`.
pub fn build_a(
    g: &AdmissibleMap,
    pair: &LinkingPair,
    eps: f64,
    min_free: usize,
    max_refinements: usize,
) -> Result<ABar, EkelandError> {
    if !(eps > 0.0 && eps < pair.boundary_gap) {
        return Err(EkelandError::EpsRange {
            eps,
            limit: pair.boundary_gap,
        });
    }
    let mut g = g.clone();
    let mut refinements = 0;
    loop {
        let mesh = g.mesh().clone();
        let in_a: Vec<bool> = g.images().iter().map(|x| pair.s.dist(x) < eps).collect();
        let adj = mesh.neighbors();
        let nodes: Vec<usize> = (0..mesh.len()).filter(|&i| in_a[i]).collect();
        let pinned: Vec<bool> = nodes
            .iter()
            .map(|&i| adj[i].iter().any(|&j| !in_a[j]))
            .collect();
        let free = pinned.iter().filter(|p| !**p).count();
        let enough = free >= min_free;
        if enough || refinements >= max_refinements {
            if nodes.is_empty() {
                return Err(EkelandError::EmptyA);
            }
            let mut local = vec![usize::MAX; mesh.len()];
            for (l, &i) in nodes.iter().enumerate() {
                local[i] = l;
            }
            let mut edges = Vec::new();
            let mut collar = Vec::new();
            for (a, b) in mesh.edges() {
                match (in_a[a], in_a[b]) {
                    (true, true) => edges.push((local[a], local[b])),
                    (true, false) | (false, true) => {
                        collar.push((g.image(a).clone(), g.image(b).clone()))
                    }
                    _ => {}
                }
            }
            return Ok(ABar {
                mesh,
                g,
                nodes,
                pinned,
                edges,
                collar,
                refinements,
            });
        }
        let finer = Arc::new(mesh.refined(2));
        g = g.transfer(finer);
        refinements += 1;
    }
}

/// What the map space minimizes.
#[derive(Clone, Debug, PartialEq)]
pub enum Objective {
    /// `max_t f(k(t))` over nodes.
    Max,
    /// `𝓘(k) = max_t {f(k(t)) + Ψ(k(t))}` over nodes and over the points
    /// where mesh edges (and the fixed collar) cross `S`.
    Penalized { s: SetDescriptor, eps: f64 },
}

/// Move oracle settings.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct MoveLadder {
    /// Number of top-valued nodes used as move centers.
    pub top_nodes: usize,
    /// Magnitudes `step·2^{-j}` for `j = 0..levels`.
    pub levels: usize,
    /// Bump radii in graph hops.
    pub radii: Vec<usize>,
    /// Value bands below the max for simultaneous moves.
    pub bands: Vec<f64>,
}

impl Default for MoveLadder {
    fn default() -> Self {
        Self {
            top_nodes: 6,
            levels: 16,
            radii: vec![1, 2, 4, 8],
            bands: vec![1e-8, 1e-6, 1e-4, 1e-3, 1e-2, 1e-1],
        }
    }
}

/// Where an objective term is evaluated.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub enum Site {
    Node(usize),
    /// Crossing with `S` at parameter `s` along a local edge.
    Edge {
        edge: usize,
        s: f64,
    },
    Collar {
        segment: usize,
        s: f64,
    },
}

#[derive(Clone, Debug, PartialEq)]
pub struct SitePoint {
    pub site: Site,
    pub x: Vector,
    pub value: f64,
}

/// Node-image lists on a node set with pinned entries, under
/// `dist(k₁,k₂) = max ‖k₁(t) − k₂(t)‖`.
pub struct MapSpace<'a> {
    f: &'a dyn Functional,
    objective: Objective,
    pinned: Vec<bool>,
    edges: Vec<(usize, usize)>,
    adjacency: Vec<Vec<usize>>,
    collar: Vec<(Vector, Vector)>,
    step: f64,
    ladder: MoveLadder,
    lower: Option<f64>,
}

impl<'a> MapSpace<'a> {
    pub fn new(
        f: &'a dyn Functional,
        objective: Objective,
        pinned: Vec<bool>,
        edges: Vec<(usize, usize)>,
        step: f64,
    ) -> Self {
        let mut adjacency = vec![Vec::new(); pinned.len()];
        for &(a, b) in &edges {
            adjacency[a].push(b);
            adjacency[b].push(a);
        }
        Self {
            f,
            objective,
            pinned,
            edges,
            adjacency,
            collar: Vec::new(),
            step,
            ladder: MoveLadder::default(),
            lower: None,
        }
    }

    /// `Γ(A)` with the penalized objective.
    pub fn penalized(
        f: &'a dyn Functional,
        abar: &ABar,
        s: SetDescriptor,
        eps: f64,
        step: f64,
    ) -> Self {
        let mut space = Self::new(
            f,
            Objective::Penalized { s, eps },
            abar.pinned.clone(),
            abar.edges.clone(),
            step,
        );
        space.collar = abar.collar.clone();
        space
    }

    /// Maps on the whole mesh, pinned on `∂Q`, with `Φ(m) = max f(m(t))`.
    pub fn pinned_boundary(f: &'a dyn Functional, mesh: &Mesh, step: f64) -> Self {
        let pinned = (0..mesh.len()).map(|i| mesh.is_boundary(i)).collect();
        Self::new(f, Objective::Max, pinned, mesh.edges(), step)
    }

    pub fn with_lower_bound(mut self, lb: f64) -> Self {
        self.lower = Some(lb);
        self
    }

    pub fn with_ladder(mut self, ladder: MoveLadder) -> Self {
        self.ladder = ladder;
        self
    }

    pub fn objective(&self) -> &Objective {
        &self.objective
    }

    pub fn is_pinned(&self, i: usize) -> bool {
        self.pinned[i]
    }

    fn node_term(&self, x: &Vector) -> f64 {
        match &self.objective {
            Objective::Max => self.f.value(x),
            Objective::Penalized { s, eps } => self.f.value(x) + psi_from_dist(s.dist(x), *eps),
        }
    }

    /// Gradient of the node term (one-sided choice on the kinks of `Ψ`).
    fn node_gradient(&self, x: &Vector) -> Vector {
        match &self.objective {
            Objective::Max => self.f.gradient(x),
            Objective::Penalized { s, eps } => self.f.gradient(x) + psi_gradient(x, s, *eps),
        }
    }

    /// Every evaluated term of the objective at `k`.
    pub fn sites(&self, k: &[Vector]) -> Vec<SitePoint> {
        let mut out: Vec<SitePoint> = k
            .iter()
            .enumerate()
            .map(|(i, x)| SitePoint {
                site: Site::Node(i),
                x: x.clone(),
                value: self.node_term(x),
            })
            .collect();
        if let Objective::Penalized { s, .. } = &self.objective {
            let mut hit = |site: Site, a: &Vector, b: &Vector, t: f64| {
                let x = a + (b - a) * t;
                let value = self.node_term(&x);
                out.push(SitePoint { site, x, value });
            };
            for (e, &(i, j)) in self.edges.iter().enumerate() {
                for t in s.segment_hits(&k[i], &k[j]) {
                    if t > 0.0 && t < 1.0 {
                        hit(Site::Edge { edge: e, s: t }, &k[i], &k[j], t);
                    }
                }
            }
            for (c, (a, b)) in self.collar.iter().enumerate() {
                for t in s.segment_hits(a, b) {
                    if t > 0.0 && t < 1.0 {
                        hit(Site::Collar { segment: c, s: t }, a, b, t);
                    }
                }
            }
        }
        out
    }

    /// Hop distances from `center`, up to `limit`.
    fn hops(&self, center: usize, limit: usize) -> Vec<(usize, usize)> {
        let mut seen = vec![usize::MAX; self.pinned.len()];
        seen[center] = 0;
        let mut frontier = vec![center];
        let mut out = vec![(center, 0)];
        for h in 1..=limit {
            let mut next = Vec::new();
            for &u in &frontier {
                for &v in &self.adjacency[u] {
                    if seen[v] == usize::MAX {
                        seen[v] = h;
                        next.push(v);
                        out.push((v, h));
                    }
                }
            }
            frontier = next;
        }
        out
    }
}

fn unit(v: Vector) -> Option<Vector> {
    let n = v.norm();
    (n > 0.0 && n.is_finite()).then(|| v / n)
}

impl EkelandSpace for MapSpace<'_> {
    type Point = Vec<Vector>;

    fn value(&self, k: &Vec<Vector>) -> f64 {
        self.sites(k)
            .iter()
            .map(|p| p.value)
            .fold(f64::NEG_INFINITY, f64::max)
    }

    fn dist(&self, a: &Vec<Vector>, b: &Vec<Vector>) -> f64 {
        a.iter()
            .zip(b)
            .map(|(x, y)| (x - y).norm())
            .fold(0.0, f64::max)
    }

    fn lower_bound(&self) -> Option<f64> {
        self.lower
    }

    fn candidates(&self, y: &Vec<Vector>) -> Vec<Vec<Vector>> {
        let n = y.len();
        let free: Vec<usize> = (0..n).filter(|&i| !self.pinned[i]).collect();
        if free.is_empty() {
            return Vec::new();
        }
        let terms: Vec<f64> = y.iter().map(|x| self.node_term(x)).collect();
        let top_value = terms.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        // two direction fields: steepest descent of the node term and of f alone
        let fields: Vec<Vec<Option<Vector>>> = {
            let full: Vec<Option<Vector>> = (0..n)
                .map(|i| {
                    if self.pinned[i] {
                        None
                    } else {
                        unit(-self.node_gradient(&y[i]))
                    }
                })
                .collect();
            let plain: Vec<Option<Vector>> = (0..n)
                .map(|i| {
                    if self.pinned[i] {
                        None
                    } else {
                        unit(-self.f.gradient(&y[i]))
                    }
                })
                .collect();
            if matches!(self.objective, Objective::Max) {
                vec![full]
            } else {
                vec![full, plain]
            }
        };
        // move centers: the top free nodes and the ends of the top crossing edges
        let mut centers: Vec<usize> = free.clone();
        centers.sort_by(|&a, &b| terms[b].total_cmp(&terms[a]).then(a.cmp(&b)));
        centers.truncate(self.ladder.top_nodes);
        let mut crossings: Vec<SitePoint> = self
            .sites(y)
            .into_iter()
            .filter(|p| matches!(p.site, Site::Edge { .. }))
            .collect();
        crossings.sort_by(|a, b| b.value.total_cmp(&a.value));
        for p in crossings.iter().take(3) {
            if let Site::Edge { edge, .. } = p.site {
                let (i, j) = self.edges[edge];
                for v in [i, j] {
                    if !self.pinned[v] && !centers.contains(&v) {
                        centers.push(v);
                    }
                }
            }
        }
        let max_radius = self.ladder.radii.iter().copied().max().unwrap_or(0);
        let neighborhoods: Vec<Vec<(usize, usize)>> =
            centers.iter().map(|&c| self.hops(c, max_radius)).collect();

        // unit-magnitude displacement patterns; each is scaled by the ladder
        let mut patterns: Vec<Vec<(usize, Vector)>> = Vec::new();
        for field in &fields {
            for (ci, &c) in centers.iter().enumerate() {
                if let Some(d) = &field[c] {
                    patterns.push(vec![(c, d.clone())]);
                }
                for &r in &self.ladder.radii {
                    let p: Vec<(usize, Vector)> = neighborhoods[ci]
                        .iter()
                        .filter(|(_, h)| *h <= r)
                        .filter_map(|&(v, h)| {
                            let w = 1.0 - h as f64 / (r + 1) as f64;
                            field[v].as_ref().map(|d| (v, d * w))
                        })
                        .collect();
                    if p.len() > 1 {
                        patterns.push(p);
                    }
                }
            }
            for &kappa in &self.ladder.bands {
                let p: Vec<(usize, Vector)> = free
                    .iter()
                    .filter(|&&v| terms[v] >= top_value - kappa)
                    .filter_map(|&v| field[v].as_ref().map(|d| (v, d.clone())))
                    .collect();
                if !p.is_empty() {
                    patterns.push(p);
                }
            }
        }
        let mut out = Vec::with_capacity(patterns.len() * self.ladder.levels);
        for j in 0..self.ladder.levels {
            let lambda = self.step * 0.5f64.powi(j as i32);
            for p in &patterns {
                let mut k = y.clone();
                for (v, d) in p {
                    k[*v].axpy(lambda, d, 1.0);
                }
                out.push(k);
            }
        }
        out
    }
}
