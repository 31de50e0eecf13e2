//! CSV output of flow trajectories.

use std::io::Write;

use super::flow::{Trajectory, VectorField};
use crate::functional::Functional;

/// Writes `t, node, x0..x{n-1}, f, grad_norm, field_norm`, one row per
/// trajectory point. `trajectories` pairs a start index with its trajectory.
pub fn write_trace_csv<W: Write>(
    out: W,
    f: &dyn Functional,
    field: Option<&dyn VectorField>,
    trajectories: &[(usize, Trajectory)],
) -> csv::Result<()> {
    let mut w = csv::Writer::from_writer(out);
    let n = f.dim();
    let mut header = vec!["t".to_string(), "node".to_string()];
    header.extend((0..n).map(|i| format!("x{i}")));
    header.extend(["f", "grad_norm", "field_norm"].map(String::from));
    w.write_record(&header)?;
    for (node, tr) in trajectories {
        for (t, x) in tr.times.iter().zip(&tr.points) {
            let field_norm = field
                .and_then(|fl| fl.eval(x).ok())
                .map_or(f64::NAN, |v| v.norm());
            let mut row = vec![t.to_string(), node.to_string()];
            row.extend(x.iter().map(|v| v.to_string()));
            row.push(f.value(x).to_string());
            row.push(f.grad_norm(x).to_string());
            row.push(field_norm.to_string());
            w.write_record(&row)?;
        }
    }
    w.flush()?;
    Ok(())
}
