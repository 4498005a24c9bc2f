//! Oblivious sketching matrices used as bundles of search directions.
//!
//! A sketch `S` is a `d × ℓ` matrix whose columns `s⁽ⁱ⁾` are the probe
//! directions of one estimator call. Four families are provided:
//!
//! * `Gaussian`: i.i.d. `N(0, 1/ℓ)` entries.
//! * `Rademacher`: i.i.d. `±1/√ℓ` entries.
//! * `Srht`: `S = (P H D)ᵀ / √ℓ` built over the padded dimension
//!   `D = 2^⌈log₂ d⌉`, with `ℓ` Hadamard columns sampled with replacement and
//!   every direction truncated to its first `d` coordinates.
//! * `Sparse`: `S = Πᵀ` where the `ℓ × d` matrix `Π` places `s` signed entries
//!   `±1/√s` in distinct rows of every column, so each input coordinate (row
//!   of `S`) carries exactly `s` nonzeros.
//!
//! Each family satisfies `E[S Sᵀ] = I_d`.

use std::fmt;
use std::str::FromStr;

use rand::seq::index;
use rand::Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{check_dim, Error, Result};
use crate::numeric::{dot, fwht_in_place, hadamard_entry, power_iteration_sym, DenseVector};
use crate::rng::RngStream;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SketchKind {
    Gaussian,
    Rademacher,
    Srht,
    Sparse,
}

impl SketchKind {
    pub const ALL: [SketchKind; 4] = [
        SketchKind::Gaussian,
        SketchKind::Rademacher,
        SketchKind::Srht,
        SketchKind::Sparse,
    ];

    pub fn as_str(&self) -> &'static str {
        match self {
            SketchKind::Gaussian => "gaussian",
            SketchKind::Rademacher => "rademacher",
            SketchKind::Srht => "srht",
            SketchKind::Sparse => "sparse",
        }
    }
}

impl fmt::Display for SketchKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for SketchKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "gaussian" | "gauss" => Ok(SketchKind::Gaussian),
            "rademacher" | "rad" => Ok(SketchKind::Rademacher),
            "srht" => Ok(SketchKind::Srht),
            "sparse" => Ok(SketchKind::Sparse),
            other => Err(Error::InvalidParameter(format!(
                "unknown sketch kind '{other}'"
            ))),
        }
    }
}

/// Default rank parameter recorded alongside a sketch of `ell` columns.
pub fn default_rank(ell: usize) -> usize {
    (ell / 4).max(1)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SketchSpec {
    pub kind: SketchKind,
    /// Ambient dimension.
    pub d: usize,
    /// Number of directions.
    pub ell: usize,
    /// Nonzeros per input coordinate; only read by the sparse kind.
    pub sparsity: usize,
    /// Rank parameter used when checking matrix-product bounds.
    pub k: usize,
    pub seed: RngStream,
}

impl SketchSpec {
    pub fn new(kind: SketchKind, d: usize, ell: usize, seed: RngStream) -> Self {
        Self {
            kind,
            d,
            ell,
            sparsity: 1,
            k: default_rank(ell),
            seed,
        }
    }

    pub fn with_sparsity(mut self, s: usize) -> Self {
        self.sparsity = s;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if self.d == 0 {
            return Err(Error::Construction("dimension d must be >= 1".into()));
        }
        if self.ell == 0 {
            return Err(Error::Construction("sketch size ell must be >= 1".into()));
        }
        if self.k == 0 {
            return Err(Error::Construction("rank parameter k must be >= 1".into()));
        }
        if self.kind == SketchKind::Sparse && (self.sparsity == 0 || self.sparsity > self.ell) {
            return Err(Error::Construction(format!(
                "sparse sketch needs 1 <= s <= ell, got s={} ell={}",
                self.sparsity, self.ell
            )));
        }
        Ok(())
    }
}

#[derive(Clone, Debug)]
enum Payload {
    /// Column-major `d × ℓ` block.
    Dense(Vec<f64>),
    Srht {
        padded: usize,
        /// Diagonal of `D`, length `padded`.
        signs: Vec<f64>,
        /// Sampled Hadamard column per direction.
        picks: Vec<usize>,
    },
    Sparse {
        /// Per direction: `(coordinate, value)` pairs, coordinates ascending.
        columns: Vec<Vec<(usize, f64)>>,
    },
}

/// A sampled `d × ℓ` sketching matrix. Immutable once sampled.
#[derive(Clone, Debug)]
pub struct SketchMatrix {
    spec: SketchSpec,
    payload: Payload,
}

/// Samples a sketch; deterministic in `spec.seed`.
pub fn sample_sketch(spec: &SketchSpec) -> Result<SketchMatrix> {
    spec.validate()?;
    let mut rng = spec.seed.rng();
    let (d, ell) = (spec.d, spec.ell);
    let scale = 1.0 / (ell as f64).sqrt();
    let payload = match spec.kind {
        SketchKind::Gaussian => {
            let data = (0..d * ell)
                .map(|_| {
                    scale * <StandardNormal as Distribution<f64>>::sample(&StandardNormal, &mut rng)
                })
                .collect();
            Payload::Dense(data)
        }
        SketchKind::Rademacher => {
            let data = (0..d * ell)
                .map(|_| if rng.random::<bool>() { scale } else { -scale })
                .collect();
            Payload::Dense(data)
        }
        SketchKind::Srht => {
            let padded = d.next_power_of_two();
            let signs = (0..padded)
                .map(|_| if rng.random::<bool>() { 1.0 } else { -1.0 })
                .collect();
            let picks = (0..ell).map(|_| rng.random_range(0..padded)).collect();
            Payload::Srht {
                padded,
                signs,
                picks,
            }
        }
        SketchKind::Sparse => {
            let s = spec.sparsity;
            let value = 1.0 / (s as f64).sqrt();
            let mut columns = vec![Vec::new(); ell];
            for j in 0..d {
                for row in index::sample(&mut rng, ell, s) {
                    let v = if rng.random::<bool>() { value } else { -value };
                    columns[row].push((j, v));
                }
            }
            Payload::Sparse { columns }
        }
    };
    Ok(SketchMatrix {
        spec: spec.clone(),
        payload,
    })
}

impl SketchMatrix {
    pub fn spec(&self) -> &SketchSpec {
        &self.spec
    }

    pub fn dim(&self) -> usize {
        self.spec.d
    }

    pub fn ell(&self) -> usize {
        self.spec.ell
    }

    pub fn kind(&self) -> SketchKind {
        self.spec.kind
    }

    /// Writes column `i` into `out` (length `d`).
    pub fn column_into(&self, i: usize, out: &mut [f64]) -> Result<()> {
        let (d, ell) = (self.spec.d, self.spec.ell);
        if i >= ell {
            return Err(Error::IndexOutOfRange { index: i, len: ell });
        }
        check_dim(d, out.len())?;
        match &self.payload {
            Payload::Dense(data) => out.copy_from_slice(&data[i * d..(i + 1) * d]),
            Payload::Srht { signs, picks, .. } => {
                let scale = 1.0 / (ell as f64).sqrt();
                let c = picks[i];
                for (j, o) in out.iter_mut().enumerate() {
                    *o = scale * signs[j] * hadamard_entry(j, c);
                }
            }
            Payload::Sparse { columns } => {
                out.fill(0.0);
                for &(j, v) in &columns[i] {
                    out[j] = v;
                }
            }
        }
        Ok(())
    }

    /// Column `s⁽ⁱ⁾` as a dense vector.
    pub fn column(&self, i: usize) -> Result<DenseVector> {
        let mut out = vec![0.0; self.spec.d];
        self.column_into(i, &mut out)?;
        Ok(out)
    }

    /// `Sᵀ x`.
    pub fn apply_transpose(&self, x: &[f64]) -> Result<DenseVector> {
        let (d, ell) = (self.spec.d, self.spec.ell);
        check_dim(d, x.len())?;
        let out = match &self.payload {
            Payload::Dense(data) => data.chunks_exact(d).map(|c| dot(c, x)).collect(),
            Payload::Srht {
                padded,
                signs,
                picks,
            } => {
                let scale = 1.0 / (ell as f64).sqrt();
                let mut buf = vec![0.0; *padded];
                for j in 0..d {
                    buf[j] = signs[j] * x[j];
                }
                fwht_in_place(&mut buf)?;
                picks.iter().map(|&c| scale * buf[c]).collect()
            }
            Payload::Sparse { columns } => columns
                .iter()
                .map(|col| col.iter().map(|&(j, v)| v * x[j]).sum())
                .collect(),
        };
        Ok(out)
    }

    /// `S y = Σᵢ yᵢ s⁽ⁱ⁾`.
    pub fn apply(&self, y: &[f64]) -> Result<DenseVector> {
        let (d, ell) = (self.spec.d, self.spec.ell);
        check_dim(ell, y.len())?;
        let mut out = vec![0.0; d];
        match &self.payload {
            Payload::Dense(data) => {
                for (c, &yi) in data.chunks_exact(d).zip(y) {
                    for (o, v) in out.iter_mut().zip(c) {
                        *o += yi * v;
                    }
                }
            }
            Payload::Srht {
                padded,
                signs,
                picks,
            } => {
                let scale = 1.0 / (ell as f64).sqrt();
                let mut buf = vec![0.0; *padded];
                for (&c, &yi) in picks.iter().zip(y) {
                    buf[c] += yi;
                }
                fwht_in_place(&mut buf)?;
                for j in 0..d {
                    out[j] = scale * signs[j] * buf[j];
                }
            }
            Payload::Sparse { columns } => {
                for (col, &yi) in columns.iter().zip(y) {
                    for &(j, v) in col {
                        out[j] += yi * v;
                    }
                }
            }
        }
        Ok(out)
    }

    /// `S Sᵀ x`.
    pub fn project(&self, x: &[f64]) -> Result<DenseVector> {
        self.apply(&self.apply_transpose(x)?)
    }
}

/// Measured matrix-product distortion of `S` on a symmetric operator `B`:
///
/// `‖B S Sᵀ B − B²‖₂ / (‖B‖₂² + ‖B‖_F² / k)`.
///
/// `b` applies `B` to a vector. The spectral norm of the (indefinite)
/// difference `M` is obtained as `sqrt(λ_max(M²))` by power iteration.
pub fn product_approx_error<F>(
    sketch: &SketchMatrix,
    mut b: F,
    b_norm2: f64,
    b_fro: f64,
    k: usize,
    stream: &RngStream,
) -> Result<f64>
where
    F: FnMut(&[f64]) -> DenseVector,
{
    if k == 0 {
        return Err(Error::InvalidParameter("k must be >= 1".into()));
    }
    let d = sketch.dim();
    let mut diff = |v: &[f64]| -> Result<DenseVector> {
        let bv = b(v);
        let sketched = b(&sketch.project(&bv)?);
        let exact = b(&bv);
        Ok(sketched.iter().zip(&exact).map(|(s, e)| s - e).collect())
    };
    let mut failure = None;
    let lambda = power_iteration_sym(
        |v, out| match diff(v).and_then(|mv| diff(&mv)) {
            Ok(r) => out.copy_from_slice(&r),
            Err(e) => {
                failure = Some(e);
                out.fill(f64::NAN);
            }
        },
        d,
        300,
        1e-10,
        stream,
    );
    if let Some(e) = failure {
        return Err(e);
    }
    let spectral = lambda?.max(0.0).sqrt();
    Ok(spectral / (b_norm2 * b_norm2 + b_fro * b_fro / k as f64))
}
