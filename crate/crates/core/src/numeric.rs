//! Deterministic numerical primitives: dense vector helpers, the fast
//! Walsh–Hadamard transform, Haar-like random orthogonal factors and power
//! iteration for symmetric operators.

use nalgebra::DMatrix;
use rand_distr::{Distribution, StandardNormal};

use crate::error::{Error, Result};
use crate::rng::RngStream;

/// A dense real vector. All public operations keep entries finite.
pub type DenseVector = Vec<f64>;

#[inline]
pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    debug_assert_eq!(a.len(), b.len());
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

#[inline]
pub fn norm(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}

/// `y += alpha * x`
#[inline]
pub fn axpy(alpha: f64, x: &[f64], y: &mut [f64]) {
    debug_assert_eq!(x.len(), y.len());
    for (yi, xi) in y.iter_mut().zip(x) {
        *yi += alpha * xi;
    }
}

pub fn sub(a: &[f64], b: &[f64]) -> DenseVector {
    a.iter().zip(b).map(|(x, y)| x - y).collect()
}

pub fn all_finite(a: &[f64]) -> bool {
    a.iter().all(|v| v.is_finite())
}

/// `U^T x` for a column-major square or tall matrix.
pub fn mat_t_vec(u: &DMatrix<f64>, x: &[f64]) -> DenseVector {
    debug_assert_eq!(u.nrows(), x.len());
    u.column_iter().map(|c| dot(c.as_slice(), x)).collect()
}

/// `U z` for a column-major matrix.
pub fn mat_vec(u: &DMatrix<f64>, z: &[f64]) -> DenseVector {
    debug_assert_eq!(u.ncols(), z.len());
    let mut out = vec![0.0; u.nrows()];
    for (c, &zj) in u.column_iter().zip(z) {
        if zj != 0.0 {
            axpy(zj, c.as_slice(), &mut out);
        }
    }
    out
}

/// In-place unnormalized Walsh–Hadamard transform (iterative butterfly).
pub fn fwht_in_place(v: &mut [f64]) -> Result<()> {
    let n = v.len();
    if !n.is_power_of_two() {
        return Err(Error::InvalidDimension(format!(
            "fwht needs a power-of-two length, got {n}"
        )));
    }
    let mut h = 1;
    while h < n {
        for block in v.chunks_exact_mut(2 * h) {
            let (lo, hi) = block.split_at_mut(h);
            for (a, b) in lo.iter_mut().zip(hi.iter_mut()) {
                let (x, y) = (*a, *b);
                *a = x + y;
                *b = x - y;
            }
        }
        h *= 2;
    }
    Ok(())
}

/// Returns `H_n v` for the unnormalized `n × n` Walsh–Hadamard matrix.
pub fn fwht(v: &[f64]) -> Result<DenseVector> {
    let mut out = v.to_vec();
    fwht_in_place(&mut out)?;
    Ok(out)
}

/// Entry `(i, j)` of the unnormalized Walsh–Hadamard matrix (Sylvester order).
#[inline]
pub fn hadamard_entry(i: usize, j: usize) -> f64 {
    if (i & j).count_ones().is_multiple_of(2) {
        1.0
    } else {
        -1.0
    }
}

/// Samples a `d × d` orthogonal matrix: QR of a standard Gaussian matrix with
/// the signs of `diag(R)` folded into `Q`.
pub fn random_orthogonal(d: usize, stream: &RngStream) -> Result<DMatrix<f64>> {
    if d == 0 {
        return Err(Error::InvalidDimension(
            "orthogonal factor needs d >= 1".into(),
        ));
    }
    let mut rng = stream.rng();
    let g = DMatrix::<f64>::from_fn(d, d, |_, _| StandardNormal.sample(&mut rng));
    let qr = g.qr();
    let r = qr.r();
    let mut q = qr.q();
    for j in 0..d {
        if r[(j, j)] < 0.0 {
            q.column_mut(j).neg_mut();
        }
    }
    Ok(q)
}

/// Estimates the largest eigenvalue of a symmetric PSD operator.
///
/// `matvec(v, out)` must write `A v` into `out`. The return value is the
/// Rayleigh quotient of the final iterate, hence never above `λ_max` (up to
/// rounding). Iteration stops early once successive estimates agree to a
/// relative `tol`.
pub fn power_iteration_sym<F>(
    mut matvec: F,
    d: usize,
    iters: usize,
    tol: f64,
    stream: &RngStream,
) -> Result<f64>
where
    F: FnMut(&[f64], &mut [f64]),
{
    if d == 0 {
        return Err(Error::InvalidDimension(
            "power iteration needs d >= 1".into(),
        ));
    }
    if iters == 0 {
        return Err(Error::InvalidParameter(
            "power iteration needs iters >= 1".into(),
        ));
    }
    let mut rng = stream.rng();
    let mut v: DenseVector = (0..d).map(|_| StandardNormal.sample(&mut rng)).collect();
    let nv = norm(&v);
    v.iter_mut().for_each(|x| *x /= nv);

    let mut av = vec![0.0; d];
    let mut estimate = 0.0;
    for it in 0..iters {
        matvec(&v, &mut av);
        if !all_finite(&av) {
            return Err(Error::Numeric("operator returned non-finite values".into()));
        }
        let rayleigh = dot(&v, &av);
        let nav = norm(&av);
        if nav == 0.0 {
            return Ok(0.0);
        }
        let converged = it > 0 && (rayleigh - estimate).abs() <= tol * rayleigh.abs();
        estimate = rayleigh;
        if converged {
            break;
        }
        for (vi, ai) in v.iter_mut().zip(&av) {
            *vi = ai / nav;
        }
    }
    Ok(estimate)
}
