use std::fs;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use super::{LogisticDataset, Objective, ObjectiveMeta, WhiteBox};
use crate::error::{Error, Result};
use crate::numeric::{axpy, dot, norm};

/// Cached high-accuracy solution of a regularized logistic problem.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ReferenceOptimum {
    pub dataset_hash: String,
    pub lambda: f64,
    pub f_star: f64,
    pub x_star: Vec<f64>,
}

/// `φ(x) = (1/n) Σ log(1 + exp(−yᵢ⟨aᵢ, x⟩)) + (λ/2)‖x‖²`.
#[derive(Clone, Debug)]
pub struct LogisticObjective {
    data: Arc<LogisticDataset>,
    ridge: f64,
    row_sq_norms: Vec<f64>,
    reference: Option<ReferenceOptimum>,
}

#[inline]
fn softplus(t: f64) -> f64 {
    t.max(0.0) + (-t.abs()).exp().ln_1p()
}

#[inline]
fn sigmoid(t: f64) -> f64 {
    if t >= 0.0 {
        1.0 / (1.0 + (-t).exp())
    } else {
        let e = t.exp();
        e / (1.0 + e)
    }
}

/// Gradient-norm threshold for the reference solve.
pub const REFERENCE_TOLERANCE: f64 = 1e-10;

impl LogisticObjective {
    pub fn new(data: Arc<LogisticDataset>, ridge: f64) -> Result<Self> {
        if !(ridge > 0.0 && ridge.is_finite()) {
            return Err(Error::InvalidParameter(format!(
                "logistic ridge must be > 0, got {ridge}"
            )));
        }
        let row_sq_norms = (0..data.n())
            .map(|i| data.row(i).1.iter().map(|v| v * v).sum())
            .collect();
        Ok(Self {
            data,
            ridge,
            row_sq_norms,
            reference: None,
        })
    }

    pub fn dataset(&self) -> &LogisticDataset {
        &self.data
    }

    pub fn ridge(&self) -> f64 {
        self.ridge
    }

    pub fn reference(&self) -> Option<&ReferenceOptimum> {
        self.reference.as_ref()
    }

    pub fn set_reference(&mut self, r: ReferenceOptimum) -> Result<()> {
        if r.dataset_hash != self.data.content_hash() || r.lambda != self.ridge {
            return Err(Error::State(
                "reference optimum belongs to a different problem".into(),
            ));
        }
        if r.x_star.len() != self.data.d() {
            return Err(Error::Dimension {
                expected: self.data.d(),
                got: r.x_star.len(),
            });
        }
        self.reference = Some(r);
        Ok(())
    }

    fn margins(&self, x: &[f64]) -> Vec<f64> {
        (0..self.data.n())
            .map(|i| self.data.row_dot(i, x))
            .collect()
    }

    /// Curvature weights `pᵢ(1 − pᵢ)` at `x`.
    fn weights(&self, x: &[f64]) -> Vec<f64> {
        self.margins(x)
            .into_iter()
            .map(|m| sigmoid(m) * sigmoid(-m))
            .collect()
    }

    fn hessian_apply_with(&self, w: &[f64], v: &[f64]) -> Vec<f64> {
        let n = self.data.n() as f64;
        let mut out: Vec<f64> = v.iter().map(|vi| self.ridge * vi).collect();
        for (i, wi) in w.iter().enumerate() {
            if *wi == 0.0 {
                continue;
            }
            let c = wi * self.data.row_dot(i, v) / n;
            let (idx, val) = self.data.row(i);
            for (&j, a) in idx.iter().zip(val) {
                out[j] += c * a;
            }
        }
        out
    }

    /// Conjugate gradients on `H p = b` with a fixed curvature-weight vector.
    fn cg(&self, w: &[f64], b: &[f64], rtol: f64, max_iter: usize) -> Vec<f64> {
        let d = b.len();
        let mut x = vec![0.0; d];
        let mut r = b.to_vec();
        let mut p = r.clone();
        let mut rr = dot(&r, &r);
        let stop = rtol * rtol * rr;
        for _ in 0..max_iter {
            if rr <= stop {
                break;
            }
            let hp = self.hessian_apply_with(w, &p);
            let alpha = rr / dot(&p, &hp);
            axpy(alpha, &p, &mut x);
            axpy(-alpha, &hp, &mut r);
            let rr_new = dot(&r, &r);
            let beta = rr_new / rr;
            rr = rr_new;
            for (pi, ri) in p.iter_mut().zip(&r) {
                *pi = ri + beta * *pi;
            }
        }
        x
    }

    /// Solves to `‖∇φ‖ ≤ 1e-10` by damped Newton–CG from the origin.
    pub fn compute_reference(&self) -> Result<ReferenceOptimum> {
        let d = self.data.d();
        let mut x = vec![0.0; d];
        let mut fx = self.value(&x);
        for _ in 0..200 {
            let g = self.gradient(&x);
            let gnorm = norm(&g);
            if gnorm <= REFERENCE_TOLERANCE {
                return Ok(ReferenceOptimum {
                    dataset_hash: self.data.content_hash().to_string(),
                    lambda: self.ridge,
                    f_star: fx,
                    x_star: x,
                });
            }
            let w = self.weights(&x);
            let neg_g: Vec<f64> = g.iter().map(|v| -v).collect();
            let p = self.cg(
                &w,
                &neg_g,
                (0.5f64).min(gnorm.sqrt()).max(1e-12),
                10 * d + 100,
            );
            let slope = dot(&g, &p);
            let mut t = 1.0;
            let mut accepted = false;
            for _ in 0..60 {
                let mut xn = x.clone();
                axpy(t, &p, &mut xn);
                let fn_ = self.value(&xn);
                let armijo = fn_ <= fx + 1e-4 * t * slope;
                // Below the rounding level of φ the decrease test is meaningless;
                // fall back to requiring a smaller gradient.
                let flat = (fn_ - fx).abs() <= 1e-14 * fx.abs().max(1.0)
                    && norm(&self.gradient(&xn)) < gnorm;
                if armijo || flat {
                    x = xn;
                    fx = fn_;
                    accepted = true;
                    break;
                }
                t *= 0.5;
            }
            if !accepted {
                return Err(Error::Numeric(format!(
                    "reference solve stalled at gradient norm {gnorm:e}"
                )));
            }
        }
        Err(Error::Numeric("reference solve did not converge".into()))
    }

    /// Default cache location: `<dataset>.ref-<lambda>.json`.
    pub fn cache_path(dataset_path: &Path, ridge: f64) -> PathBuf {
        let mut name = dataset_path
            .file_name()
            .map(|s| s.to_os_string())
            .unwrap_or_default();
        name.push(format!(".ref-{ridge:e}.json"));
        dataset_path.with_file_name(name)
    }

    /// Loads the cached reference if it matches this problem, otherwise
    /// computes it and writes the cache.
    pub fn ensure_reference(&mut self, cache: &Path) -> Result<&ReferenceOptimum> {
        if self.reference.is_none() {
            let cached = fs::read_to_string(cache)
                .ok()
                .and_then(|s| serde_json::from_str::<ReferenceOptimum>(&s).ok());
            let r = match cached {
                Some(r) if r.dataset_hash == self.data.content_hash() && r.lambda == self.ridge => {
                    r
                }
                _ => {
                    let r = self.compute_reference()?;
                    let text = serde_json::to_string_pretty(&r)?;
                    fs::write(cache, text).map_err(|e| Error::io(cache, e))?;
                    r
                }
            };
            self.set_reference(r)?;
        }
        Ok(self.reference.as_ref().expect("reference just set"))
    }
}

impl Objective for LogisticObjective {
    fn dim(&self) -> usize {
        self.data.d()
    }

    fn value(&self, x: &[f64]) -> f64 {
        let n = self.data.n();
        let loss: f64 = (0..n)
            .map(|i| softplus(-self.data.labels()[i] * self.data.row_dot(i, x)))
            .sum();
        loss / n as f64 + 0.5 * self.ridge * dot(x, x)
    }
}

impl WhiteBox for LogisticObjective {
    fn gradient(&self, x: &[f64]) -> Vec<f64> {
        let n = self.data.n() as f64;
        let mut g: Vec<f64> = x.iter().map(|xi| self.ridge * xi).collect();
        for i in 0..self.data.n() {
            let y = self.data.labels()[i];
            let c = -y * sigmoid(-y * self.data.row_dot(i, x)) / n;
            let (idx, val) = self.data.row(i);
            for (&j, a) in idx.iter().zip(val) {
                g[j] += c * a;
            }
        }
        g
    }

    fn hessian_matvec(&self, x: &[f64], v: &[f64]) -> Vec<f64> {
        self.hessian_apply_with(&self.weights(x), v)
    }

    fn hessian_trace(&self, x: &[f64]) -> f64 {
        let n = self.data.n() as f64;
        let data: f64 = self
            .weights(x)
            .iter()
            .zip(&self.row_sq_norms)
            .map(|(w, s)| w * s)
            .sum();
        data / n + self.ridge * self.data.d() as f64
    }

    fn optimum_gap(&self, x: &[f64]) -> Result<f64> {
        let r = self
            .reference
            .as_ref()
            .ok_or_else(|| Error::State("logistic gap needs a reference optimum".into()))?;
        Ok((self.value(x) - r.f_star).max(0.0))
    }

    fn meta(&self) -> ObjectiveMeta {
        let n = self.data.n() as f64;
        ObjectiveMeta {
            // λ_max(∇²φ) ≤ (1/4n) Σ‖aᵢ‖² + λ
            smoothness: Some(self.row_sq_norms.iter().sum::<f64>() / (4.0 * n) + self.ridge),
            strong_convexity: Some(self.ridge),
            hessian_lipschitz: None,
            trace: None,
        }
    }
}
