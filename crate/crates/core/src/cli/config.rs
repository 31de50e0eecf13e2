//! Problem configuration files (TOML).

use std::collections::BTreeMap;
use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::deformation::DeformationConfig;
use crate::functional::{make_test_functional, Functional, TestFunctional};
use crate::geometry::{PairKind, PairParams};
use crate::space::{Decomposition, DecompositionSpec, SetDescriptor, Vector};

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("cannot read {path}: {source}")]
    Io { path: String, source: std::io::Error },
    #[error("parse error: {0}")]
    Parse(#[from] toml::de::Error),
    #[error("invalid config: {0}")]
    Invalid(String),
}

fn invalid(msg: impl Into<String>) -> ConfigError {
    ConfigError::Invalid(msg.into())
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Mode {
    LinkVerify,
    Minimax,
    Deform,
    Ekeland,
    Corollaries,
}

impl Mode {
    pub fn as_str(self) -> &'static str {
        match self {
            Mode::LinkVerify => "link-verify",
            Mode::Minimax => "minimax",
            Mode::Deform => "deform",
            Mode::Ekeland => "ekeland",
            Mode::Corollaries => "corollaries",
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FunctionalConfig {
    pub name: String,
    #[serde(default)]
    pub params: BTreeMap<String, f64>,
}

/// Either coordinate index lists (`v1`, `v2`, optional `e` axis) or explicit
/// orthonormal bases.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DecompositionConfig {
    pub v1: Option<Vec<usize>>,
    pub v2: Option<Vec<usize>>,
    pub e_axis: Option<usize>,
    pub basis1: Option<Vec<Vec<f64>>>,
    pub basis2: Option<Vec<Vec<f64>>>,
    pub e: Option<Vec<f64>>,
}

/// `flatten` disables `deny_unknown_fields`, so unknown keys are caught by
/// [`ProblemConfig::from_toml`] against [`PAIR_KEYS`].
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PairConfig {
    pub kind: PairKind,
    #[serde(default = "default_resolution")]
    pub resolution: usize,
    #[serde(flatten)]
    pub params: PairParams,
}

pub const PAIR_KEYS: &[&str] = &["kind", "resolution", "rho", "radius", "r1", "r2", "e", "start", "center", "beta"];

fn default_resolution() -> usize {
    64
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MapKind {
    Identity,
    /// Seeded smooth perturbation vanishing on ∂Q.
    Random,
    /// `u + amplitude·(1 − s²)·direction` on a path, `s ∈ [−1, 1]`.
    Bump,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct MapConfig {
    pub kind: MapKind,
    pub amplitude: f64,
    pub direction: Option<Vec<f64>>,
}

impl Default for MapConfig {
    fn default() -> Self {
        Self { kind: MapKind::Identity, amplitude: 0.3, direction: None }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Tolerances {
    pub tau_c: f64,
    pub tau_link: f64,
    pub b: f64,
    pub tau_m: f64,
    pub tau_flow: f64,
}

impl Default for Tolerances {
    fn default() -> Self {
        Self { tau_c: 1e-4, tau_link: 1e-3, b: 1e-3, tau_m: 1e-8, tau_flow: 1e-6 }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DeformSection {
    pub c: f64,
    /// Points of `D`, left fixed by the flow.
    pub d: Vec<Vec<f64>>,
    /// Points of `E`, pushed below `c − ε`.
    pub e: Vec<Vec<f64>>,
    pub eps_bar: f64,
    pub delta: f64,
    pub ode_step: f64,
    pub verify_starts: usize,
}

impl Default for DeformSection {
    fn default() -> Self {
        let d = DeformationConfig::default();
        Self {
            c: 0.0,
            d: Vec::new(),
            e: Vec::new(),
            eps_bar: d.eps_bar,
            delta: d.delta,
            ode_step: d.ode_step,
            verify_starts: d.verify_starts,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EkelandMode {
    Strict,
    Limiting,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EkelandSection {
    pub mode: EkelandMode,
    /// Level `c`; estimated by the minimax driver when absent.
    pub c: Option<f64>,
}

impl Default for EkelandSection {
    fn default() -> Self {
        Self { mode: EkelandMode::Limiting, c: None }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ThirdPointConfig {
    pub m1: Vec<f64>,
    pub m2: Vec<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SphereConfig {
    pub e: Vec<f64>,
    pub r: f64,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CorollariesSection {
    pub third_point: Option<ThirdPointConfig>,
    pub sphere: Option<SphereConfig>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ProblemConfig {
    #[serde(default)]
    pub mode: Option<Mode>,
    #[serde(default)]
    pub seed: u64,
    pub functional: FunctionalConfig,
    #[serde(default)]
    pub decomposition: DecompositionConfig,
    pub pair: Option<PairConfig>,
    #[serde(default)]
    pub map: MapConfig,
    #[serde(default)]
    pub tolerances: Tolerances,
    #[serde(default)]
    pub eps: Vec<f64>,
    #[serde(default)]
    pub deform: DeformSection,
    #[serde(default)]
    pub ekeland: EkelandSection,
    #[serde(default)]
    pub corollaries: CorollariesSection,
    /// Output directory, relative to the working directory.
    #[serde(default)]
    pub out: Option<String>,
}

impl ProblemConfig {
    pub fn from_toml(text: &str) -> Result<Self, ConfigError> {
        let table: toml::Table = toml::from_str(text)?;
        if let Some(pair) = table.get("pair").and_then(|p| p.as_table()) {
            if let Some(k) = pair.keys().find(|k| !PAIR_KEYS.contains(&k.as_str())) {
                return Err(ConfigError::Invalid(format!("unknown key `{k}` in [pair]")));
            }
        }
        let cfg: Self = table.try_into()?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self, ConfigError> {
        let text = std::fs::read_to_string(path)
            .map_err(|source| ConfigError::Io { path: path.display().to_string(), source })?;
        Self::from_toml(&text)
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        let t = &self.tolerances;
        for (name, v) in
            [("tau_c", t.tau_c), ("tau_link", t.tau_link), ("b", t.b), ("tau_m", t.tau_m), ("tau_flow", t.tau_flow)]
        {
            if !(v > 0.0 && v.is_finite()) {
                return Err(invalid(format!("tolerance {name} must be positive, got {v}")));
            }
        }
        if let Some(e) = self.eps.iter().find(|e| !(**e > 0.0 && e.is_finite())) {
            return Err(invalid(format!("eps entries must be positive, got {e}")));
        }
        let f = self.functional()?;
        let n = f.dim();
        let check_len = |what: &str, v: &[f64]| {
            if v.len() == n {
                Ok(())
            } else {
                Err(invalid(format!("{what} has length {}, functional dimension is {n}", v.len())))
            }
        };
        if let Some(p) = &self.pair {
            if p.resolution < 2 {
                return Err(invalid("pair.resolution must be at least 2"));
            }
            for (what, v) in [("pair.start", &p.params.start), ("pair.center", &p.params.center)] {
                if let Some(v) = v {
                    check_len(what, v)?;
                }
            }
            if p.kind == PairKind::MpPath {
                if let Some(e) = &p.params.e {
                    check_len("pair.e", e)?;
                }
            }
            self.decomposition()?;
        }
        for p in self.deform.d.iter().chain(&self.deform.e) {
            check_len("deform point", p)?;
        }
        if let Some(t) = &self.corollaries.third_point {
            check_len("corollaries.third_point.m1", &t.m1)?;
            check_len("corollaries.third_point.m2", &t.m2)?;
        }
        if let Some(s) = &self.corollaries.sphere {
            check_len("corollaries.sphere.e", &s.e)?;
        }
        if let Some(d) = &self.map.direction {
            check_len("map.direction", d)?;
        }
        Ok(())
    }

    pub fn functional(&self) -> Result<TestFunctional, ConfigError> {
        make_test_functional(&self.functional.name, &self.functional.params).map_err(|e| invalid(e.to_string()))
    }

    /// Explicit bases win over index lists. Without either, paths use the
    /// whole space as V1 and the other kinds split off the last axis as V2.
    pub fn decomposition(&self) -> Result<Decomposition, ConfigError> {
        let n = self.functional()?.dim();
        let d = &self.decomposition;
        let out = if d.basis1.is_some() || d.basis2.is_some() {
            let spec = DecompositionSpec {
                n,
                basis1: d.basis1.clone().unwrap_or_default(),
                basis2: d.basis2.clone().unwrap_or_default(),
                e: d.e.clone(),
            };
            Decomposition::from_spec(&spec)
        } else {
            let (v1, v2) = match (&d.v1, &d.v2) {
                (Some(a), Some(b)) => (a.clone(), b.clone()),
                (Some(a), None) => (a.clone(), (0..n).filter(|i| !a.contains(i)).collect()),
                (None, Some(b)) => ((0..n).filter(|i| !b.contains(i)).collect(), b.clone()),
                (None, None) => {
                    if self.pair.as_ref().is_some_and(|p| p.kind == PairKind::MpPath) || n == 1 {
                        ((0..n).collect(), Vec::new())
                    } else {
                        ((0..n - 1).collect(), vec![n - 1])
                    }
                }
            };
            if let Some(i) = v1.iter().chain(&v2).chain(&d.e_axis).find(|&&i| i >= n) {
                return Err(invalid(format!("axis {i} out of range for dimension {n}")));
            }
            Decomposition::coordinate(n, &v1, &v2, d.e_axis)
        };
        out.map_err(|e| invalid(format!("decomposition: {e}")))
    }

    pub fn deform_sets(&self) -> (SetDescriptor, SetDescriptor) {
        let pts = |v: &[Vec<f64>]| SetDescriptor::FiniteSample {
            points: v.iter().map(|p| Vector::from_column_slice(p)).collect(),
        };
        (pts(&self.deform.d), pts(&self.deform.e))
    }

    pub fn deformation_config(&self) -> DeformationConfig {
        DeformationConfig {
            c: self.deform.c,
            eps_bar: self.deform.eps_bar,
            delta: self.deform.delta,
            b: self.tolerances.b,
            ode_step: self.deform.ode_step,
            tau_flow: self.tolerances.tau_flow,
            verify_starts: self.deform.verify_starts,
            seed: self.seed,
            ..Default::default()
        }
    }
}
