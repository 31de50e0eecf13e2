//! Fixed-step RK4 integration with step halving.

use serde::Serialize;

use super::DeformationError;
use crate::space::Vector;

/// Autonomous vector field on R^n. Evaluation may fail (e.g. a classical
/// deformation field meeting a near-critical point).
pub trait VectorField: Sync {
    fn eval(&self, x: &Vector) -> Result<Vector, DeformationError>;
}

/// Closure adapter for [`VectorField`].
pub struct FnField<F>(pub F);

impl<F> VectorField for FnField<F>
where
    F: Fn(&Vector) -> Vector + Sync,
{
    fn eval(&self, x: &Vector) -> Result<Vector, DeformationError> {
        Ok((self.0)(x))
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct FlowOptions {
    /// Initial step size.
    pub step: f64,
    /// Largest step count tried before reporting underflow.
    pub max_steps: usize,
    /// Endpoint agreement required between successive halvings.
    pub tol: f64,
}

impl Default for FlowOptions {
    fn default() -> Self {
        Self {
            step: 0.05,
            max_steps: 1 << 16,
            tol: 1e-9,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Trajectory {
    pub times: Vec<f64>,
    #[serde(serialize_with = "crate::report::ser_vectors")]
    pub points: Vec<Vector>,
}

impl Trajectory {
    pub fn end(&self) -> &Vector {
        self.points
            .last()
            .expect("trajectory has at least its start point")
    }
}

fn rk4<V: VectorField + ?Sized>(
    field: &V,
    x0: &Vector,
    t_end: f64,
    steps: usize,
) -> Result<Trajectory, DeformationError> {
    let h = t_end / steps as f64;
    let mut times = Vec::with_capacity(steps + 1);
    let mut points = Vec::with_capacity(steps + 1);
    let mut x = x0.clone();
    times.push(0.0);
    points.push(x.clone());
    for k in 0..steps {
        let k1 = field.eval(&x)?;
        let k2 = field.eval(&(&x + &k1 * (0.5 * h)))?;
        let k3 = field.eval(&(&x + &k2 * (0.5 * h)))?;
        let k4 = field.eval(&(&x + &k3 * h))?;
        let incr = (k1 + k2 * 2.0 + k3 * 2.0 + k4) * (h / 6.0);
        x += incr;
        times.push(if k + 1 == steps {
            t_end
        } else {
            h * (k + 1) as f64
        });
        points.push(x.clone());
    }
    Ok(Trajectory { times, points })
}

/// `η(t, x0)` on `[0, T]` (T may be negative). Halves the step until two
/// successive endpoints agree to `opts.tol`; returns the finer trajectory.
pub fn flow<V: VectorField + ?Sized>(
    field: &V,
    x0: &Vector,
    t_end: f64,
    opts: &FlowOptions,
) -> Result<Trajectory, DeformationError> {
    if !t_end.is_finite() {
        return Err(DeformationError::InvalidConfig(format!(
            "flow time {t_end} is not finite"
        )));
    }
    if t_end == 0.0 {
        return Ok(Trajectory {
            times: vec![0.0],
            points: vec![x0.clone()],
        });
    }
    let mut steps = ((t_end.abs() / opts.step).ceil() as usize).max(1);
    let mut prev = rk4(field, x0, t_end, steps)?;
    loop {
        steps *= 2;
        if steps > opts.max_steps {
            return Err(DeformationError::StepUnderflow { steps });
        }
        let next = rk4(field, x0, t_end, steps)?;
        if (next.end() - prev.end()).norm() < opts.tol {
            return Ok(next);
        }
        prev = next;
    }
}
