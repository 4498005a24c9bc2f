//! Function-value estimators of gradients and Hessian traces.
//!
//! All estimators probe symmetric pairs `x ± α p` and therefore cost two
//! oracle queries per direction; the trace estimate adds one shared query at
//! `x` itself.

use nalgebra::DMatrix;

use crate::error::{check_dim, Error, Result};
use crate::numeric::{mat_t_vec, mat_vec, DenseVector};
use crate::oracle::{CountingOracle, QuadraticSpec};
use crate::sketch::SketchMatrix;

/// A gradient estimate together with its query bill.
#[derive(Clone, Debug, PartialEq)]
pub struct GradientEstimate {
    pub direction: DenseVector,
    /// Directional difference quotients `[f(x+αpᵢ) − f(x−αpᵢ)] / 2α`, one per probe.
    pub coefficients: Vec<f64>,
    pub queries_used: u64,
    pub alpha: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub enum PreconditionerKind {
    Identity,
    /// `H = V diag(h) Vᵀ`; `basis = None` stands for `V = I`.
    Spectral {
        basis: Option<DMatrix<f64>>,
        eigenvalues: Vec<f64>,
    },
}

/// Approximate Hessian `H` used to reshape search directions as `H^{-1/2} s`.
#[derive(Clone, Debug, PartialEq)]
pub struct Preconditioner {
    pub kind: PreconditionerKind,
    /// `ρ` with `ρ H ⪯ ∇²φ`, when known.
    pub rho: Option<f64>,
}

impl Preconditioner {
    pub fn identity() -> Self {
        Self {
            kind: PreconditionerKind::Identity,
            rho: None,
        }
    }

    pub fn spectral(basis: Option<DMatrix<f64>>, eigenvalues: Vec<f64>) -> Result<Self> {
        if eigenvalues.iter().any(|h| !(h.is_finite() && *h > 0.0)) {
            return Err(Error::InvalidParameter(
                "preconditioner eigenvalues must be finite and > 0".into(),
            ));
        }
        if let Some(b) = &basis {
            check_dim(eigenvalues.len(), b.nrows())?;
            check_dim(eigenvalues.len(), b.ncols())?;
        }
        Ok(Self {
            kind: PreconditionerKind::Spectral { basis, eigenvalues },
            rho: None,
        })
    }

    /// The exact Hessian `A + λ_reg I` of a quadratic (so `ρ = 1`).
    pub fn exact_quadratic(q: &QuadraticSpec) -> Self {
        let mut p = Self::spectral(q.basis().cloned(), q.hessian_eigenvalues())
            .expect("quadratic Hessian is positive definite");
        p.rho = Some(1.0);
        p
    }

    pub fn is_identity(&self) -> bool {
        matches!(self.kind, PreconditionerKind::Identity)
    }

    fn apply_power(&self, v: &[f64], p: f64) -> Result<DenseVector> {
        match &self.kind {
            PreconditionerKind::Identity => Ok(v.to_vec()),
            PreconditionerKind::Spectral { basis, eigenvalues } => {
                check_dim(eigenvalues.len(), v.len())?;
                let z = match basis {
                    Some(b) => mat_t_vec(b, v),
                    None => v.to_vec(),
                };
                let z: Vec<f64> = z
                    .iter()
                    .zip(eigenvalues)
                    .map(|(zi, h)| zi * h.powf(p))
                    .collect();
                Ok(match basis {
                    Some(b) => mat_vec(b, &z),
                    None => z,
                })
            }
        }
    }

    /// `H^{-1/2} v`
    pub fn apply_inv_sqrt(&self, v: &[f64]) -> Result<DenseVector> {
        self.apply_power(v, -0.5)
    }

    /// `H^{-1} v`
    pub fn apply_inv(&self, v: &[f64]) -> Result<DenseVector> {
        self.apply_power(v, -1.0)
    }
}

fn check_alpha(alpha: f64) -> Result<()> {
    if alpha > 0.0 && alpha.is_finite() {
        Ok(())
    } else {
        Err(Error::InvalidParameter(format!(
            "smoothing radius must be > 0, got {alpha}"
        )))
    }
}

fn finite(v: f64) -> Result<f64> {
    if v.is_finite() {
        Ok(v)
    } else {
        Err(Error::Numeric("oracle returned a non-finite value".into()))
    }
}

/// `(f(x + α p), f(x − α p))` for one probe direction.
fn probe_pair(
    oracle: &mut CountingOracle<'_>,
    x: &[f64],
    p: &[f64],
    alpha: f64,
    buf: &mut [f64],
) -> Result<(f64, f64)> {
    for ((b, xi), pi) in buf.iter_mut().zip(x).zip(p) {
        *b = xi + alpha * pi;
    }
    let plus = finite(oracle.eval(buf)?)?;
    for ((b, xi), pi) in buf.iter_mut().zip(x).zip(p) {
        *b = xi - alpha * pi;
    }
    let minus = finite(oracle.eval(buf)?)?;
    Ok((plus, minus))
}

/// Probes every column of `sketch` and returns the `(plus, minus)` values.
fn probe_sketch(
    oracle: &mut CountingOracle<'_>,
    x: &[f64],
    sketch: &SketchMatrix,
    alpha: f64,
) -> Result<Vec<(f64, f64)>> {
    check_alpha(alpha)?;
    check_dim(oracle.dim(), x.len())?;
    check_dim(sketch.dim(), x.len())?;
    let d = x.len();
    let mut col = vec![0.0; d];
    let mut buf = vec![0.0; d];
    (0..sketch.ell())
        .map(|i| {
            sketch.column_into(i, &mut col)?;
            probe_pair(oracle, x, &col, alpha, &mut buf)
        })
        .collect()
}

fn gradient_from_pairs(
    sketch: &SketchMatrix,
    pairs: &[(f64, f64)],
    alpha: f64,
) -> Result<GradientEstimate> {
    let coefficients: Vec<f64> = pairs.iter().map(|(p, m)| (p - m) / (2.0 * alpha)).collect();
    let direction = sketch.apply(&coefficients)?;
    Ok(GradientEstimate {
        direction,
        coefficients,
        queries_used: 2 * pairs.len() as u64,
        alpha,
    })
}

fn trace_from_pairs(pairs: &[(f64, f64)], center: f64, alpha: f64) -> f64 {
    pairs
        .iter()
        .map(|(p, m)| (p + m - 2.0 * center) / (alpha * alpha))
        .sum()
}

/// Sketched central-difference gradient `g = Σᵢ [f(x+αsᵢ) − f(x−αsᵢ)]/(2α) · sᵢ`.
/// Costs `2ℓ` queries.
pub fn zo_gradient(
    oracle: &mut CountingOracle<'_>,
    x: &[f64],
    sketch: &SketchMatrix,
    alpha: f64,
) -> Result<GradientEstimate> {
    let pairs = probe_sketch(oracle, x, sketch, alpha)?;
    gradient_from_pairs(sketch, &pairs, alpha)
}

/// Hessian-aware direction `g̃ = Σᵢ [f(x+αH^{-1/2}sᵢ) − f(x−αH^{-1/2}sᵢ)]/(2α) · H^{-1/2}sᵢ`.
///
/// No `1/ℓ` prefactor is applied, so with `H = I` this is exactly
/// [`zo_gradient`]. Costs `2ℓ` queries.
pub fn zo_gradient_precond(
    oracle: &mut CountingOracle<'_>,
    x: &[f64],
    sketch: &SketchMatrix,
    alpha: f64,
    precond: &Preconditioner,
) -> Result<GradientEstimate> {
    if precond.is_identity() {
        return zo_gradient(oracle, x, sketch, alpha);
    }
    check_alpha(alpha)?;
    check_dim(oracle.dim(), x.len())?;
    check_dim(sketch.dim(), x.len())?;
    let d = x.len();
    let mut col = vec![0.0; d];
    let mut buf = vec![0.0; d];
    let mut coefficients = Vec::with_capacity(sketch.ell());
    for i in 0..sketch.ell() {
        sketch.column_into(i, &mut col)?;
        let p = precond.apply_inv_sqrt(&col)?;
        let (plus, minus) = probe_pair(oracle, x, &p, alpha, &mut buf)?;
        coefficients.push((plus - minus) / (2.0 * alpha));
    }
    let direction = precond.apply_inv_sqrt(&sketch.apply(&coefficients)?)?;
    Ok(GradientEstimate {
        direction,
        queries_used: 2 * coefficients.len() as u64,
        coefficients,
        alpha,
    })
}

/// Coordinate-wise central differences (the classical Kiefer–Wolfowitz
/// gradient). Costs `2d` queries.
pub fn zo_full_fd(
    oracle: &mut CountingOracle<'_>,
    x: &[f64],
    alpha: f64,
) -> Result<GradientEstimate> {
    check_alpha(alpha)?;
    check_dim(oracle.dim(), x.len())?;
    let d = x.len();
    let mut buf = x.to_vec();
    let mut coefficients = Vec::with_capacity(d);
    for i in 0..d {
        buf[i] = x[i] + alpha;
        let plus = finite(oracle.eval(&buf)?)?;
        buf[i] = x[i] - alpha;
        let minus = finite(oracle.eval(&buf)?)?;
        buf[i] = x[i];
        coefficients.push((plus - minus) / (2.0 * alpha));
    }
    Ok(GradientEstimate {
        direction: coefficients.clone(),
        coefficients,
        queries_used: 2 * d as u64,
        alpha,
    })
}

/// Second-difference trace estimate
/// `τ(x, S) = Σᵢ [f(x+αsᵢ) + f(x−αsᵢ) − 2f(x)] / α²`. Costs `2ℓ + 1` queries.
pub fn trace_estimate(
    oracle: &mut CountingOracle<'_>,
    x: &[f64],
    sketch: &SketchMatrix,
    alpha: f64,
) -> Result<f64> {
    Ok(zo_grad_and_trace(oracle, x, sketch, alpha)?.1)
}

/// Gradient and trace estimates from one shared set of `2ℓ + 1` queries.
pub fn zo_grad_and_trace(
    oracle: &mut CountingOracle<'_>,
    x: &[f64],
    sketch: &SketchMatrix,
    alpha: f64,
) -> Result<(GradientEstimate, f64)> {
    check_alpha(alpha)?;
    check_dim(oracle.dim(), x.len())?;
    let center = finite(oracle.eval(x)?)?;
    let pairs = probe_sketch(oracle, x, sketch, alpha)?;
    let mut grad = gradient_from_pairs(sketch, &pairs, alpha)?;
    grad.queries_used += 1;
    Ok((grad, trace_from_pairs(&pairs, center, alpha)))
}
