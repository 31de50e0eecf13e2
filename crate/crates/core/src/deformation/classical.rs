//! Classical deformation across a noncritical level: a normalized gradient
//! flow that lowers every point of `f^{c+ε}` below `c − ε` in unit time.

use serde::Serialize;

use super::flow::{flow, FlowOptions, Trajectory, VectorField};
use super::DeformationError;
use crate::exec::Exec;
use crate::functional::Functional;
use crate::space::Vector;

/// Flow `X = −3ε·χ(f)·f′/‖f′‖²`, with `χ = 1` on `[c−ε, c+ε]` and `χ = 0`
/// outside `(c−2ε, c+2ε)`. Inside `χ = 1` the value drops at rate `3ε`.
pub struct ClassicalDeformation<'a> {
    f: &'a dyn Functional,
    pub c: f64,
    pub eps: f64,
    pub b: f64,
    options: FlowOptions,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ClassicalChecks {
    pub eps: f64,
    pub band_samples: usize,
    pub min_grad_in_band: f64,
    /// `max f(η(1,x))` over sampled `x` with `f(x) ≤ c + ε`.
    pub max_final: f64,
}

impl<'a> ClassicalDeformation<'a> {
    pub fn new(f: &'a dyn Functional, c: f64, eps: f64, b: f64, options: FlowOptions) -> Self {
        Self {
            f,
            c,
            eps,
            b,
            options,
        }
    }

    fn chi(&self, v: f64) -> f64 {
        let t = (v - self.c).abs();
        if t <= self.eps {
            1.0
        } else {
            (2.0 - t / self.eps).max(0.0)
        }
    }

    pub fn eta(&self, x: &Vector) -> Result<Trajectory, DeformationError> {
        flow(self, x, 1.0, &self.options)
    }

    pub fn apply(&self, x: &Vector) -> Result<Vector, DeformationError> {
        Ok(self.eta(x)?.end().clone())
    }
}

impl VectorField for ClassicalDeformation<'_> {
    fn eval(&self, x: &Vector) -> Result<Vector, DeformationError> {
        let chi = self.chi(self.f.value(x));
        if chi == 0.0 {
            return Ok(Vector::zeros(x.len()));
        }
        let g = self.f.gradient(x);
        let n2 = g.norm_squared();
        if n2.sqrt() < self.b {
            return Err(DeformationError::NearCritical {
                point: x.as_slice().to_vec(),
                norm: n2.sqrt(),
            });
        }
        Ok(g * (-3.0 * self.eps * chi / n2))
    }
}

/// Number of samples in `|f − c| ≤ ε̄` and their smallest gradient norm;
/// fails with `NearCritical` when one of them has `‖f′‖ < b`.
pub fn band_check(
    f: &dyn Functional,
    c: f64,
    eps_bar: f64,
    sample: &[Vector],
    b: f64,
) -> Result<(usize, f64), DeformationError> {
    let mut count = 0;
    let mut min_grad = f64::INFINITY;
    for x in sample {
        if (f.value(x) - c).abs() > eps_bar {
            continue;
        }
        let g = f.grad_norm(x);
        if g < b {
            return Err(DeformationError::NearCritical {
                point: x.as_slice().to_vec(),
                norm: g,
            });
        }
        count += 1;
        min_grad = min_grad.min(g);
    }
    Ok((count, min_grad))
}

/// Checks the band `f^{c+ε̄}_{c−ε̄}` on the sample for near-critical points,
/// then takes `ε = ε̄/2` and verifies `f(η(1,x)) ≤ c − ε` on sampled points
/// of `f^{c+ε}`.
pub fn classical_deform<'a>(
    f: &'a dyn Functional,
    c: f64,
    eps_bar: f64,
    sample: &[Vector],
    b: f64,
    options: FlowOptions,
) -> Result<(ClassicalDeformation<'a>, ClassicalChecks), DeformationError> {
    if !(eps_bar > 0.0) {
        return Err(DeformationError::InvalidConfig(format!(
            "ε̄ must be positive, got {eps_bar}"
        )));
    }
    let (band, min_grad) = band_check(f, c, eps_bar, sample, b)?;
    let def = ClassicalDeformation::new(f, c, eps_bar / 2.0, b, options);
    let below: Vec<&Vector> = sample
        .iter()
        .filter(|x| f.value(x) <= c + def.eps)
        .collect();
    let finals = Exec::Auto.try_map_range(below.len(), |i| def.apply(below[i]))?;
    let max_final = finals
        .iter()
        .map(|x| f.value(x))
        .fold(f64::NEG_INFINITY, f64::max);
    if max_final > c - def.eps {
        return Err(DeformationError::Property {
            property: "level drop".into(),
            detail: format!("max f(η(1,x)) = {max_final} > c − ε = {}", c - def.eps),
        });
    }
    let checks = ClassicalChecks {
        eps: def.eps,
        band_samples: band,
        min_grad_in_band: min_grad,
        max_final,
    };
    Ok((def, checks))
}
