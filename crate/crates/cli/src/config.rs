//! Experiment configuration files (TOML).
//!
//! ```toml
//! schema_version = 1
//! output = "out/quadratic"
//! seeds = [0, 1, 2]
//! gap_targets = [1e-3, 1e-6]
//!
//! [problem]
//! kind = "quadratic"
//! d = 300
//! decay = "exp:0.95"
//! ridge = 1e-2
//! seed = 7
//!
//! [[methods]]
//! name = "ZO_Gauss"
//! method = "zo_sketch"
//! sketch = "gaussian"
//! ell = 10
//! alpha = 1e-4
//! step = { policy = "known_trace" }
//! max_queries = 200000
//! ```
//!
//! Relative paths are resolved against the directory of the config file.

use std::fs;
use std::ops::Range;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Deserializer, Serialize, Serializer};
use zosketch::optimizer::RunConfig;
use zosketch::oracle::{DecayKind, NoiseSpec};
use zosketch::sketch::SketchKind;

use crate::error::{CliError, Result};

pub const SCHEMA_VERSION: u32 = 1;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub schema_version: u32,
    pub problem: ProblemConfig,
    #[serde(default)]
    pub noise: NoiseSpec,
    #[serde(default = "default_output")]
    pub output: PathBuf,
    #[serde(default = "default_seeds")]
    pub seeds: Vec<u64>,
    /// Relative gap thresholds reported in summaries.
    #[serde(default = "default_targets")]
    pub gap_targets: Vec<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub threads: Option<usize>,
    #[serde(default)]
    pub methods: Vec<MethodEntry>,
    #[serde(default)]
    pub trace_check: TraceCheckConfig,
}

fn default_output() -> PathBuf {
    PathBuf::from("out")
}

fn default_seeds() -> Vec<u64> {
    vec![0]
}

fn default_targets() -> Vec<f64> {
    vec![1e-3, 1e-6]
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ProblemConfig {
    Quadratic {
        d: usize,
        #[serde(serialize_with = "ser_display", deserialize_with = "de_decay")]
        decay: DecayKind,
        ridge: f64,
        #[serde(default)]
        seed: u64,
    },
    /// A problem file written by `gen-quadratic`.
    QuadraticFile { path: PathBuf },
    Logistic {
        dataset: PathBuf,
        ridge: f64,
        /// Feature count, if the file may not mention the last feature.
        #[serde(default, skip_serializing_if = "Option::is_none")]
        d: Option<usize>,
        /// Defaults to `<dataset>.ref-<ridge>.json`.
        #[serde(default, skip_serializing_if = "Option::is_none")]
        reference_cache: Option<PathBuf>,
    },
}

pub(crate) fn ser_display<T: std::fmt::Display, S: Serializer>(
    v: &T,
    s: S,
) -> Result<S::Ok, S::Error> {
    s.collect_str(v)
}

pub(crate) fn de_decay<'de, D: Deserializer<'de>>(d: D) -> Result<DecayKind, D::Error> {
    let s = String::deserialize(d)?;
    s.parse().map_err(serde::de::Error::custom)
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PrecondChoice {
    #[default]
    Identity,
    /// Exact Hessian at `x₀` (spectral for quadratics, dense eigensolve otherwise).
    Exact,
}

/// One labelled method of an experiment.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MethodEntry {
    pub name: String,
    #[serde(flatten)]
    pub run: RunConfig,
    #[serde(default)]
    pub preconditioner: PrecondChoice,
    /// Replace the step by the white-box theorem step (Algorithm 1 or 2).
    #[serde(default)]
    pub theorem_step: bool,
    /// For zo_gd: try `η = m / L̂` for each multiplier and keep the best run.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub step_grid: Option<Vec<f64>>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TraceCheckConfig {
    #[serde(default = "all_kinds")]
    pub kinds: Vec<SketchKind>,
    #[serde(default = "default_ells")]
    pub ells: Vec<usize>,
    #[serde(default = "default_samples")]
    pub samples: usize,
    #[serde(default = "default_epsilon")]
    pub epsilon: f64,
    #[serde(default = "default_alpha")]
    pub alpha: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sparsity: Option<usize>,
}

fn all_kinds() -> Vec<SketchKind> {
    SketchKind::ALL.to_vec()
}

fn default_ells() -> Vec<usize> {
    vec![4, 8, 16, 32]
}

fn default_samples() -> usize {
    100
}

fn default_epsilon() -> f64 {
    0.5
}

fn default_alpha() -> f64 {
    1e-2
}

impl Default for TraceCheckConfig {
    fn default() -> Self {
        Self {
            kinds: all_kinds(),
            ells: default_ells(),
            samples: default_samples(),
            epsilon: default_epsilon(),
            alpha: default_alpha(),
            sparsity: None,
        }
    }
}

/// Command-line overrides applied on top of a config file.
#[derive(Clone, Debug, Default)]
pub struct Overrides {
    pub out: Option<PathBuf>,
    pub seeds: Option<Vec<u64>>,
    pub budget: Option<u64>,
    pub methods: Vec<String>,
    pub sketch: Option<SketchKind>,
    pub ell: Option<usize>,
    pub alpha: Option<f64>,
    pub threads: Option<usize>,
}

/// Parses `N..M` (half-open), `N..=M` or a single `N`.
pub fn parse_seed_range(s: &str) -> Result<Vec<u64>> {
    let bad = || CliError::Config(format!("bad seed range '{s}', expected N..M"));
    let num = |t: &str| t.trim().parse::<u64>().map_err(|_| bad());
    let range: Range<u64> = if let Some((a, b)) = s.split_once("..=") {
        num(a)?..num(b)? + 1
    } else if let Some((a, b)) = s.split_once("..") {
        num(a)?..num(b)?
    } else {
        let n = num(s)?;
        n..n + 1
    };
    if range.is_empty() {
        return Err(bad());
    }
    Ok(range.collect())
}

impl ExperimentConfig {
    pub fn from_toml(text: &str) -> Result<Self> {
        let cfg: Self = toml::from_str(text).map_err(|e| CliError::Config(e.to_string()))?;
        Ok(cfg)
    }

    /// Reads a config and resolves its relative paths against the file's directory.
    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
        let mut cfg = Self::from_toml(&text)?;
        let base = path.parent().unwrap_or(Path::new("."));
        cfg.resolve_paths(base);
        Ok(cfg)
    }

    fn resolve_paths(&mut self, base: &Path) {
        let fix = |p: &mut PathBuf| {
            if p.is_relative() {
                *p = base.join(&*p);
            }
        };
        match &mut self.problem {
            ProblemConfig::QuadraticFile { path } => fix(path),
            ProblemConfig::Logistic {
                dataset,
                reference_cache,
                ..
            } => {
                fix(dataset);
                if let Some(c) = reference_cache {
                    fix(c);
                }
            }
            ProblemConfig::Quadratic { .. } => {}
        }
        fix(&mut self.output);
    }

    pub fn to_toml(&self) -> Result<String> {
        toml::to_string(self).map_err(|e| CliError::Config(e.to_string()))
    }

    pub fn apply(&mut self, o: &Overrides) -> Result<()> {
        if let Some(out) = &o.out {
            self.output = out.clone();
        }
        if let Some(seeds) = &o.seeds {
            self.seeds = seeds.clone();
        }
        if o.threads.is_some() {
            self.threads = o.threads;
        }
        if !o.methods.is_empty() {
            for want in &o.methods {
                if !self
                    .methods
                    .iter()
                    .any(|m| &m.name == want || m.run.method.as_str() == want)
                {
                    return Err(CliError::Config(format!("no method named '{want}'")));
                }
            }
            self.methods.retain(|m| {
                o.methods
                    .iter()
                    .any(|w| w == &m.name || w == m.run.method.as_str())
            });
        }
        for m in &mut self.methods {
            if let Some(b) = o.budget {
                m.run.max_queries = Some(b);
            }
            if let Some(a) = o.alpha {
                m.run.alpha = a;
            }
            if m.run.method != zosketch::optimizer::Method::ZoGd {
                if let Some(k) = o.sketch {
                    m.run.sketch = k;
                }
                if let Some(l) = o.ell {
                    m.run.ell = l;
                }
            }
        }
        self.validate()
    }

    pub fn validate(&self) -> Result<()> {
        if self.schema_version != SCHEMA_VERSION {
            return Err(CliError::Config(format!(
                "unsupported schema_version {} (expected {SCHEMA_VERSION})",
                self.schema_version
            )));
        }
        if self.seeds.is_empty() {
            return Err(CliError::Config("seeds must not be empty".into()));
        }
        if self
            .gap_targets
            .iter()
            .any(|t| !(*t > 0.0 && t.is_finite()))
        {
            return Err(CliError::Config("gap_targets must be positive".into()));
        }
        if self.threads == Some(0) {
            return Err(CliError::Config("threads must be >= 1".into()));
        }
        if let ProblemConfig::Quadratic {
            d, decay, ridge, ..
        } = &self.problem
        {
            if *d == 0 {
                return Err(CliError::Config("problem.d must be >= 1".into()));
            }
            if !(*ridge >= 0.0 && ridge.is_finite()) {
                return Err(CliError::Config("problem.ridge must be >= 0".into()));
            }
            decay
                .validate()
                .map_err(|e| CliError::Config(e.to_string()))?;
        }
        let mut names = std::collections::HashSet::new();
        for m in &self.methods {
            if m.name.is_empty() || m.name.contains(['/', '\\']) {
                return Err(CliError::Config(format!("bad method name '{}'", m.name)));
            }
            if !names.insert(&m.name) {
                return Err(CliError::Config(format!(
                    "duplicate method name '{}'",
                    m.name
                )));
            }
            m.run
                .validate()
                .map_err(|e| CliError::Config(format!("method {}: {e}", m.name)))?;
            if let Some(grid) = &m.step_grid {
                if grid.is_empty() || grid.iter().any(|g| !(*g > 0.0 && g.is_finite())) {
                    return Err(CliError::Config(format!(
                        "method {}: bad step_grid",
                        m.name
                    )));
                }
            }
        }
        let tc = &self.trace_check;
        if tc.samples == 0 || tc.ells.contains(&0) || !(tc.epsilon > 0.0) || !(tc.alpha > 0.0) {
            return Err(CliError::Config("invalid trace_check settings".into()));
        }
        Ok(())
    }

    /// `run`/`compare` also need at least one method.
    pub fn require_methods(&self) -> Result<()> {
        if self.methods.is_empty() {
            Err(CliError::Config("config lists no methods".into()))
        } else {
            Ok(())
        }
    }
}
