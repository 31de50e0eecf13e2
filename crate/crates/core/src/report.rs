//! Serialization helpers and run reports.

use serde::ser::{SerializeSeq, Serializer};

use crate::space::Vector;

pub fn ser_vector<S: Serializer>(v: &Vector, s: S) -> Result<S::Ok, S::Error> {
    s.collect_seq(v.iter())
}

pub fn ser_vectors<S: Serializer>(vs: &[Vector], s: S) -> Result<S::Ok, S::Error> {
    let mut seq = s.serialize_seq(Some(vs.len()))?;
    for v in vs {
        seq.serialize_element(&v.iter().copied().collect::<Vec<f64>>())?;
    }
    seq.end()
}
