//! Linking geometries, simplicial meshes of Q, Brouwer degree and
//! intersection finding.

pub mod degree;
pub mod linking;
pub mod map;
pub mod mesh;
pub mod pair;

use thiserror::Error;

use crate::space::SpaceError;

pub use degree::{brouwer_degree, DegreeResult, PreimageCell, ETA_DEG};
pub use linking::{
    chi_beta, find_intersection, verify_linking, IntersectOptions, Intersection, LinkOptions,
    LinkingReport, LinkingWitness, TAU_LINK,
};
pub use map::AdmissibleMap;
pub use mesh::{Chart, Mesh};
pub use pair::{make_pair, LinkingPair, PairKind, PairParams};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum GeometryError {
    #[error("parameter violation: {0}")]
    Parameter(String),
    #[error("S meets ∂Q: boundary distance {gap:.3e}")]
    L1Violated { gap: f64 },
    #[error("mesh dimension {0} unsupported (need 1 ≤ d ≤ 3)")]
    UnsupportedDimension(usize),
    #[error("shape mismatch: {0}")]
    Shape(String),
    #[error("degree undefined near boundary zero (margin {margin:.3e})")]
    BoundaryZero { margin: f64 },
    #[error("target stays on cell faces under every perturbation")]
    DegenerateTarget,
    #[error("unsupported pair kind: {0}")]
    UnsupportedKind(String),
    #[error(
        "inconclusive: boundary zero possible near t = {t} (margin {margin:.3e}); refine the mesh"
    )]
    Inconclusive { t: f64, margin: f64 },
    #[error("internal inconsistency: {0}")]
    Inconsistent(String),
    #[error("linking violation: best residual {residual:.3e} above tolerance")]
    LinkingViolation { residual: f64 },
    #[error("β must be positive, got {0}")]
    InvalidBeta(f64),
    #[error("map is not pinned on ∂Q (deviation {0:.3e})")]
    NotAdmissible(f64),
    #[error(transparent)]
    Space(#[from] SpaceError),
}
