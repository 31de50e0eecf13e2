//! Ekeland's principle on spaces that come with a finite candidate oracle.

use serde::Serialize;

use super::EkelandError;
use crate::exec::Exec;
use crate::space::Vector;

/// Metric space with a lower semicontinuous functional `Φ` and a finite
/// set of candidate moves around each point.
pub trait EkelandSpace: Sync {
    type Point: Clone + Send + Sync;

    fn value(&self, p: &Self::Point) -> f64;
    fn dist(&self, a: &Self::Point, b: &Self::Point) -> f64;
    fn candidates(&self, y: &Self::Point) -> Vec<Self::Point>;

    /// A known lower bound for `Φ` on the whole space, when one is available.
    fn lower_bound(&self) -> Option<f64> {
        None
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct EkelandOptions {
    pub max_moves: usize,
    #[serde(skip)]
    pub exec: Exec,
}

impl Default for EkelandOptions {
    fn default() -> Self {
        Self {
            max_moves: 10_000,
            exec: Exec::Auto,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct EkelandChecks {
    /// `Φ(y) ≤ Φ(x)`.
    pub a_holds: bool,
    /// `dist(x,y) ≤ δ`.
    pub b_holds: bool,
    /// Candidates `z ≠ y` checked against `Φ(z) > Φ(y) − (ε/δ)·dist(z,y)`.
    pub c_witness_count: usize,
    pub c_violations: usize,
    /// Smallest `Φ(z) − Φ(y) + (ε/δ)·dist(z,y)` over the witnesses.
    pub c_min_margin: f64,
}

impl EkelandChecks {
    pub fn all_hold(&self) -> bool {
        self.a_holds && self.b_holds && self.c_violations == 0
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct EkelandCertificate<P> {
    pub y: P,
    pub value: f64,
    pub start_value: f64,
    pub distance: f64,
    pub moves: usize,
    pub eps: f64,
    pub delta: f64,
    pub checks: EkelandChecks,
}

/// Moves from `x` to the candidate of least value among those with
/// `Φ(z) ≤ Φ(y) − (ε/δ)·dist(z,y)` until no candidate qualifies. Each move
/// lowers `Φ` by at least `(ε/δ)` times its length, so the total travel is
/// at most `δ` whenever `Φ(x) ≤ inf Φ + ε`.
pub fn ekeland_point<S: EkelandSpace>(
    space: &S,
    x: S::Point,
    eps: f64,
    delta: f64,
    opts: &EkelandOptions,
) -> Result<EkelandCertificate<S::Point>, EkelandError> {
    if !(eps > 0.0 && delta > 0.0) {
        return Err(EkelandError::Precondition(format!(
            "ε, δ > 0 required (ε = {eps}, δ = {delta})"
        )));
    }
    let slope = eps / delta;
    let start_value = space.value(&x);
    if let Some(lb) = space.lower_bound() {
        if start_value > lb + eps {
            return Err(EkelandError::Precondition(format!(
                "Φ(x) = {start_value} > inf Φ + ε = {}",
                lb + eps
            )));
        }
    }
    let mut y = x.clone();
    let mut fy = start_value;
    let mut moves = 0;
    loop {
        let cands = space.candidates(&y);
        let scored = opts.exec.map_range(cands.len(), |i| {
            let d = space.dist(&cands[i], &y);
            (space.value(&cands[i]), d)
        });
        let mut best: Option<usize> = None;
        let mut witnesses = 0;
        let mut min_margin = f64::INFINITY;
        for (i, &(v, d)) in scored.iter().enumerate() {
            if d == 0.0 {
                continue;
            }
            witnesses += 1;
            let margin = v - (fy - slope * d);
            min_margin = min_margin.min(margin);
            if margin <= 0.0 && best.is_none_or(|b| v < scored[b].0) {
                best = Some(i);
            }
        }
        match best {
            Some(i) => {
                moves += 1;
                if moves > opts.max_moves {
                    return Err(EkelandError::NoStabilization {
                        moves: opts.max_moves,
                    });
                }
                fy = scored[i].0;
                y = cands
                    .into_iter()
                    .nth(i)
                    .expect("index from the scored list");
            }
            None => {
                let distance = space.dist(&x, &y);
                let checks = EkelandChecks {
                    a_holds: fy <= start_value,
                    b_holds: distance <= delta,
                    c_witness_count: witnesses,
                    c_violations: 0,
                    c_min_margin: min_margin,
                };
                return Ok(EkelandCertificate {
                    y,
                    value: fy,
                    start_value,
                    distance,
                    moves,
                    eps,
                    delta,
                    checks,
                });
            }
        }
    }
}

/// Finite point set in R^n with precomputed values; the oracle proposes
/// every other point, so condition c) is checked exhaustively.
#[derive(Clone, Debug, PartialEq)]
pub struct GridSpace {
    pub points: Vec<Vector>,
    pub values: Vec<f64>,
}

impl GridSpace {
    pub fn new(points: Vec<Vector>, values: Vec<f64>) -> Self {
        assert_eq!(points.len(), values.len(), "one value per grid point");
        assert!(!points.is_empty(), "grid needs a point");
        Self { points, values }
    }

    pub fn from_fn(points: Vec<Vector>, f: impl Fn(&Vector) -> f64) -> Self {
        let values = points.iter().map(&f).collect();
        Self::new(points, values)
    }

    /// Index of the grid point nearest to `x`.
    pub fn nearest(&self, x: &Vector) -> usize {
        let mut best = 0;
        let mut bd = f64::INFINITY;
        for (i, p) in self.points.iter().enumerate() {
            let d = (p - x).norm();
            if d < bd {
                bd = d;
                best = i;
            }
        }
        best
    }

    /// Brute-force recheck of a certificate: a) and b) exactly, c) against
    /// every grid point. Returns the number of c) violations.
    pub fn verify(&self, x: usize, cert: &EkelandCertificate<usize>) -> (bool, bool, usize) {
        let y = cert.y;
        let slope = cert.eps / cert.delta;
        let a = self.values[y] <= self.values[x];
        let b = self.dist(&x, &y) <= cert.delta;
        let violations = (0..self.points.len())
            .filter(|&z| z != y && self.values[z] <= self.values[y] - slope * self.dist(&z, &y))
            .count();
        (a, b, violations)
    }
}

impl EkelandSpace for GridSpace {
    type Point = usize;

    fn value(&self, p: &usize) -> f64 {
        self.values[*p]
    }

    fn dist(&self, a: &usize, b: &usize) -> f64 {
        (&self.points[*a] - &self.points[*b]).norm()
    }

    fn candidates(&self, y: &usize) -> Vec<usize> {
        (0..self.points.len()).filter(|z| z != y).collect()
    }

    fn lower_bound(&self) -> Option<f64> {
        Some(self.values.iter().copied().fold(f64::INFINITY, f64::min))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn exp_grid() -> GridSpace {
        let pts: Vec<Vector> = (0..=100)
            .map(|i| Vector::from_element(1, -10.0 + 0.1 * i as f64))
            .collect();
        GridSpace::from_fn(pts, |x| x[0].exp())
    }

    #[test]
    fn exp_grid_certificate() {
        let g = exp_grid();
        let x = g.nearest(&Vector::from_element(1, -3.0));
        let cert = ekeland_point(&g, x, 0.1, 1.0, &EkelandOptions::default()).unwrap();
        assert!(cert.checks.all_hold());
        assert_eq!(cert.checks.c_witness_count, 100);
        assert_eq!(g.verify(x, &cert), (true, true, 0));
    }

    #[test]
    fn fixed_point_is_returned() {
        let g = exp_grid();
        // the grid minimum satisfies c) for any slope
        let cert = ekeland_point(&g, 0, 0.1, 1.0, &EkelandOptions::default()).unwrap();
        assert_eq!((cert.y, cert.moves), (0, 0));
    }

    #[test]
    fn precondition_is_checked() {
        let g = exp_grid();
        let x = g.nearest(&Vector::from_element(1, 0.0));
        assert!(matches!(
            ekeland_point(&g, x, 0.1, 1.0, &EkelandOptions::default()),
            Err(EkelandError::Precondition(_))
        ));
    }
}
