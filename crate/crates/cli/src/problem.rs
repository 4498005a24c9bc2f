//! Building objectives from configs, and white-box helpers used by the harness.

use std::fs;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use nalgebra::{DMatrix, SymmetricEigen};
use serde::{Deserialize, Serialize};
use zosketch::estimator::Preconditioner;
use zosketch::numeric::power_iteration_sym;
use zosketch::oracle::{
    load_libsvm, make_quadratic, DecayKind, LogisticObjective, Objective, QuadraticSpec, WhiteBox,
};
use zosketch::RngStream;

use crate::config::{de_decay, ser_display, ProblemConfig, SCHEMA_VERSION};
use crate::error::{CliError, Result};

/// Largest dimension for which a dense Hessian eigensolve is attempted.
pub const MAX_DENSE_D: usize = 512;

const POWER_ITERS: usize = 2000;
const POWER_TOL: f64 = 1e-12;

pub enum Problem {
    Quadratic(QuadraticSpec),
    Logistic(LogisticObjective),
}

/// Persisted quadratic problem: the generating parameters plus a summary.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct QuadraticProblemFile {
    pub schema_version: u32,
    pub seed: u64,
    pub d: usize,
    #[serde(serialize_with = "ser_display", deserialize_with = "de_decay")]
    pub decay: DecayKind,
    pub ridge: f64,
    /// Trace of the Hessian `A + λ_reg I`.
    pub trace: f64,
    /// Largest Hessian eigenvalue.
    pub lambda_max: f64,
}

impl QuadraticProblemFile {
    pub fn new(d: usize, decay: DecayKind, ridge: f64, seed: u64) -> Result<Self> {
        let q = make_quadratic(d, decay, ridge, &RngStream::new(seed, 0))?;
        Ok(Self {
            schema_version: SCHEMA_VERSION,
            seed,
            d,
            decay,
            ridge,
            trace: q.trace_a() + d as f64 * ridge,
            lambda_max: q.lambda_max() + ridge,
        })
    }

    pub fn read(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
        let f: Self = serde_json::from_str(&text)
            .map_err(|e| CliError::Config(format!("{}: {e}", path.display())))?;
        if f.schema_version != SCHEMA_VERSION {
            return Err(CliError::Config(format!(
                "{}: unsupported schema_version",
                path.display()
            )));
        }
        Ok(f)
    }

    pub fn write(&self, path: &Path) -> Result<()> {
        if let Some(dir) = path.parent().filter(|p| !p.as_os_str().is_empty()) {
            fs::create_dir_all(dir).map_err(|e| CliError::io(dir, e))?;
        }
        let text = serde_json::to_string_pretty(self)? + "\n";
        fs::write(path, text).map_err(|e| CliError::io(path, e))
    }

    pub fn build(&self) -> Result<QuadraticSpec> {
        Ok(make_quadratic(
            self.d,
            self.decay,
            self.ridge,
            &RngStream::new(self.seed, 0),
        )?)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ProblemSummary {
    pub kind: &'static str,
    pub d: usize,
    pub ridge: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub n: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub dataset_hash: Option<String>,
}

impl Problem {
    pub fn build(cfg: &ProblemConfig) -> Result<Self> {
        match cfg {
            ProblemConfig::Quadratic {
                d,
                decay,
                ridge,
                seed,
            } => Ok(Problem::Quadratic(make_quadratic(
                *d,
                *decay,
                *ridge,
                &RngStream::new(*seed, 0),
            )?)),
            ProblemConfig::QuadraticFile { path } => Ok(Problem::Quadratic(
                QuadraticProblemFile::read(path)?.build()?,
            )),
            ProblemConfig::Logistic {
                dataset,
                ridge,
                d,
                reference_cache,
            } => {
                let data = load_libsvm(dataset, *d)?;
                let mut obj = LogisticObjective::new(Arc::new(data), *ridge)?;
                let cache: PathBuf = reference_cache
                    .clone()
                    .unwrap_or_else(|| LogisticObjective::cache_path(dataset, *ridge));
                obj.ensure_reference(&cache)?;
                Ok(Problem::Logistic(obj))
            }
        }
    }

    pub fn white_box(&self) -> &dyn WhiteBox {
        match self {
            Problem::Quadratic(q) => q,
            Problem::Logistic(l) => l,
        }
    }

    pub fn dim(&self) -> usize {
        self.white_box().dim()
    }

    /// Every experiment starts from the origin.
    pub fn x0(&self) -> Vec<f64> {
        vec![0.0; self.dim()]
    }

    pub fn summary(&self) -> ProblemSummary {
        match self {
            Problem::Quadratic(q) => ProblemSummary {
                kind: "quadratic",
                d: q.dim(),
                ridge: q.ridge(),
                n: None,
                dataset_hash: None,
            },
            Problem::Logistic(l) => ProblemSummary {
                kind: "logistic",
                d: l.dim(),
                ridge: l.ridge(),
                n: Some(l.dataset().n()),
                dataset_hash: Some(l.dataset().content_hash().to_string()),
            },
        }
    }

    /// Where spectra are taken: the origin for quadratics (the Hessian is
    /// constant), the reference optimum for logistic regression.
    pub fn spectrum_point(&self) -> Vec<f64> {
        match self {
            Problem::Quadratic(_) => self.x0(),
            Problem::Logistic(l) => l
                .reference()
                .map(|r| r.x_star.clone())
                .unwrap_or_else(|| self.x0()),
        }
    }

    /// Largest Hessian eigenvalue at `x` by white-box power iteration.
    pub fn hessian_lmax(&self, x: &[f64]) -> Result<f64> {
        let wb = self.white_box();
        Ok(power_iteration_sym(
            |v, out| out.copy_from_slice(&wb.hessian_matvec(x, v)),
            wb.dim(),
            POWER_ITERS,
            POWER_TOL,
            &RngStream::new(0x5eed, 0),
        )?)
    }

    /// Eigen-decomposition of the Hessian at `x`, eigenvalues descending.
    pub fn hessian_eigen(&self, x: &[f64]) -> Result<(Option<DMatrix<f64>>, Vec<f64>)> {
        match self {
            Problem::Quadratic(q) => {
                let mut pairs: Vec<(usize, f64)> =
                    q.hessian_eigenvalues().into_iter().enumerate().collect();
                pairs.sort_by(|a, b| b.1.total_cmp(&a.1));
                let vals = pairs.iter().map(|p| p.1).collect();
                let basis = q
                    .basis()
                    .map(|u| DMatrix::from_fn(u.nrows(), u.ncols(), |i, j| u[(i, pairs[j].0)]));
                Ok((basis, vals))
            }
            Problem::Logistic(l) => {
                let d = l.dim();
                if d > MAX_DENSE_D {
                    return Err(zosketch::Error::Capability(format!(
                        "dense eigensolve capped at d = {MAX_DENSE_D}, problem has d = {d}"
                    ))
                    .into());
                }
                let mut h = DMatrix::zeros(d, d);
                let mut e = vec![0.0; d];
                for j in 0..d {
                    e[j] = 1.0;
                    let col = l.hessian_matvec(x, &e);
                    e[j] = 0.0;
                    for (i, v) in col.into_iter().enumerate() {
                        h[(i, j)] = v;
                    }
                }
                let h = (&h + h.transpose()) * 0.5;
                let eig = SymmetricEigen::new(h);
                let mut order: Vec<usize> = (0..d).collect();
                order.sort_by(|&a, &b| eig.eigenvalues[b].total_cmp(&eig.eigenvalues[a]));
                let vals = order.iter().map(|&i| eig.eigenvalues[i]).collect();
                let vecs = DMatrix::from_fn(d, d, |i, j| eig.eigenvectors[(i, order[j])]);
                Ok((Some(vecs), vals))
            }
        }
    }

    pub fn preconditioner(&self, exact: bool, x: &[f64]) -> Result<Preconditioner> {
        if !exact {
            return Ok(Preconditioner::identity());
        }
        match self {
            Problem::Quadratic(q) => Ok(Preconditioner::exact_quadratic(q)),
            Problem::Logistic(l) => {
                let (basis, vals) = self.hessian_eigen(x)?;
                // Clamp rounding-level negatives; the ridge bounds the true spectrum below.
                let vals = vals.into_iter().map(|v| v.max(l.ridge())).collect();
                Ok(Preconditioner::spectral(basis, vals)?)
            }
        }
    }
}
