//! Experiment configuration: one JSON document drives every subcommand.

use std::fmt;
use std::str::FromStr;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::field::FieldSpec;
use crate::grid::{GridSpec, Tessellation};
use crate::young::YoungSpec;

/// Deepest tessellation an experiment may request.
pub const MAX_EXPERIMENT_DEPTH: u32 = 10;

/// Default seed of the test-function family.
pub const DEFAULT_SEED: u64 = 0xB5EBA;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum TheoremId {
    T1,
    T2,
    T3,
    T4,
    T5,
    C1,
}

impl TheoremId {
    pub const ALL: [TheoremId; 6] = [Self::T1, Self::T2, Self::T3, Self::T4, Self::T5, Self::C1];

    /// `q < p` regime (`K_μ` conditions).
    pub fn lower_triangle(self) -> bool {
        matches!(self, Self::T2 | Self::T5)
    }
}

impl fmt::Display for TheoremId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{self:?}")
    }
}

impl FromStr for TheoremId {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Self::ALL
            .into_iter()
            .find(|t| t.to_string().eq_ignore_ascii_case(s))
            .ok_or_else(|| Error::config("theorem", format!("unknown theorem `{s}`, expected one of T1..T5, C1")))
    }
}

/// What a theorem report is expected to conclude.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Expectation {
    Pass,
    Fail,
}

/// Test functions used for empirical operator ratios.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FamilySpec {
    /// Indicators of every dyadic box inside the support root.
    #[serde(default = "yes")]
    pub indicators: bool,
    /// Only indicators of boxes at level `<=` this.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub max_indicator_level: Option<u32>,
    /// Number of seeded log-uniform cell fields.
    #[serde(default = "default_seeded")]
    pub seeded: usize,
    #[serde(default = "default_seed")]
    pub seed: u64,
    #[serde(default = "default_range")]
    pub range: [f64; 2],
    #[serde(default = "yes")]
    pub constant: bool,
}

impl Default for FamilySpec {
    fn default() -> Self {
        Self {
            indicators: true,
            max_indicator_level: None,
            seeded: default_seeded(),
            seed: DEFAULT_SEED,
            range: default_range(),
            constant: true,
        }
    }
}

fn yes() -> bool {
    true
}

fn default_seeded() -> usize {
    32
}

fn default_seed() -> u64 {
    DEFAULT_SEED
}

fn default_range() -> [f64; 2] {
    [1e-2, 1e2]
}

fn default_grid() -> GridSpec {
    GridSpec::padded(6)
}

fn default_phi() -> YoungSpec {
    YoungSpec::Power { a: 1.5 }
}

fn unit_field() -> FieldSpec {
    FieldSpec::Constant { value: 1.0 }
}

fn default_p() -> f64 {
    2.0
}

fn default_depths() -> Vec<u32> {
    vec![6, 7, 8]
}

fn default_lattice_depth() -> u32 {
    4
}

/// A full experiment description. Every key has a default except where a
/// subcommand needs it (`theorem` for `verify`, `f` for field operations
/// falls back to a seeded field).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub name: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub theorem: Option<TheoremId>,
    #[serde(default = "default_grid")]
    pub grid: GridSpec,
    #[serde(default)]
    pub alpha: f64,
    #[serde(default = "default_phi")]
    pub phi: YoungSpec,
    #[serde(default = "unit_field")]
    pub omega: FieldSpec,
    /// Density of `μ` against `dV_α`.
    #[serde(default = "unit_field")]
    pub mu: FieldSpec,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub f: Option<FieldSpec>,
    #[serde(default = "default_p")]
    pub p: f64,
    /// Defaults to `p`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub q: Option<f64>,
    /// Integrability gain of Corollary-type conditions.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub r: Option<f64>,
    #[serde(default)]
    pub family: FamilySpec,
    #[serde(default = "default_depths")]
    pub depths: Vec<u32>,
    #[serde(default = "default_lattice_depth")]
    pub lattice_depth: u32,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub expect: Option<Expectation>,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        serde_json::from_str("{}").expect("all keys have defaults")
    }
}

fn check(ok: bool, key: &str, message: impl FnOnce() -> String) -> Result<()> {
    if ok {
        Ok(())
    } else {
        Err(Error::config(key, message()))
    }
}

impl ExperimentConfig {
    /// Parses and validates; the error names the offending key.
    pub fn parse(text: &str) -> Result<Self> {
        let de = &mut serde_json::Deserializer::from_str(text);
        let cfg: Self = serde_path_to_error::deserialize(de).map_err(|e| {
            let path = e.path().to_string();
            let key = if path == "." { "<root>".to_string() } else { path };
            Error::config(key, e.inner().to_string())
        })?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("config serializes")
    }

    pub fn q(&self) -> f64 {
        self.q.unwrap_or(self.p)
    }

    pub fn validate(&self) -> Result<()> {
        check(self.alpha.is_finite() && self.alpha > -1.0, "alpha", || {
            format!("must be > -1, got {}", self.alpha)
        })?;
        check(self.p.is_finite() && self.p > 1.0, "p", || format!("must be > 1, got {}", self.p))?;
        let q = self.q();
        check(q.is_finite() && q > 1.0, "q", || format!("must be > 1, got {q}"))?;
        check(self.grid.depth <= MAX_EXPERIMENT_DEPTH, "grid.depth", || {
            format!("must be <= {MAX_EXPERIMENT_DEPTH}, got {}", self.grid.depth)
        })?;
        check(self.grid.tiles >= 1, "grid.tiles", || "must be >= 1".into())?;
        check(!self.depths.is_empty(), "depths", || "must not be empty".into())?;
        check(self.depths.windows(2).all(|w| w[0] < w[1]), "depths", || {
            format!("must be strictly ascending, got {:?}", self.depths)
        })?;
        let max = *self.depths.last().unwrap_or(&0);
        check(max <= MAX_EXPERIMENT_DEPTH, "depths", || {
            format!("must be <= {MAX_EXPERIMENT_DEPTH}, got {max}")
        })?;
        check(self.lattice_depth <= self.depths[0], "lattice_depth", || {
            format!("must not exceed the smallest depth {}", self.depths[0])
        })?;
        let [lo, hi] = self.family.range;
        check(lo > 0.0 && lo <= hi && hi.is_finite(), "family.range", || {
            format!("need 0 < lo <= hi < inf, got [{lo}, {hi}]")
        })?;
        if let Some(t) = self.theorem {
            if t.lower_triangle() {
                check(q < self.p, "q", || format!("{t} needs 1 < q < p, got p = {}, q = {q}", self.p))?;
            } else {
                check(self.p <= q, "q", || format!("{t} needs 1 < p <= q, got p = {}, q = {q}", self.p))?;
            }
            if t == TheoremId::C1 {
                let r = self.r.ok_or_else(|| Error::config("r", "C1 needs r > 1"))?;
                check(r.is_finite() && r > 1.0, "r", || format!("must be > 1, got {r}"))?;
            }
        }
        Ok(())
    }

    /// The configured grid at `depth`.
    pub fn tessellation(&self, depth: u32) -> Result<Arc<Tessellation>> {
        let spec = GridSpec {
            depth,
            ..self.grid.clone()
        };
        Ok(Arc::new(Tessellation::from_spec(&spec)?))
    }
}
