use std::fmt;
use std::str::FromStr;

use nalgebra::DMatrix;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use super::{Objective, ObjectiveMeta, WhiteBox};
use crate::error::{check_dim, Error, Result};
use crate::numeric::{dot, mat_t_vec, mat_vec, random_orthogonal, DenseVector};
use crate::rng::RngStream;

/// Eigenvalue profile of a synthetic quadratic.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum DecayKind {
    /// `λᵢ = rate^(i−1)`
    Exp { rate: f64 },
    /// `λᵢ = 1/i`
    PolyInv,
    /// `λᵢ = 1/√i`
    PolyInvSqrt,
}

impl DecayKind {
    pub fn validate(&self) -> Result<()> {
        match *self {
            DecayKind::Exp { rate } if !(rate > 0.0 && rate < 1.0) => Err(Error::InvalidParameter(
                format!("exponential decay rate must lie in (0, 1), got {rate}"),
            )),
            _ => Ok(()),
        }
    }

    /// The `d` eigenvalues, largest first.
    pub fn eigenvalues(&self, d: usize) -> Result<Vec<f64>> {
        self.validate()?;
        Ok((1..=d)
            .map(|i| {
                let i = i as f64;
                match *self {
                    DecayKind::Exp { rate } => rate.powf(i - 1.0),
                    DecayKind::PolyInv => 1.0 / i,
                    DecayKind::PolyInvSqrt => 1.0 / i.sqrt(),
                }
            })
            .collect())
    }
}

impl fmt::Display for DecayKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            DecayKind::Exp { rate } => write!(f, "exp:{rate}"),
            DecayKind::PolyInv => f.write_str("poly_inv"),
            DecayKind::PolyInvSqrt => f.write_str("poly_inv_sqrt"),
        }
    }
}

impl FromStr for DecayKind {
    type Err = Error;

    /// Accepts `exp` (rate 0.95), `exp:<rate>`, `poly_inv`, `poly_inv_sqrt`.
    fn from_str(s: &str) -> Result<Self> {
        let kind = match s {
            "exp" => DecayKind::Exp { rate: 0.95 },
            "poly_inv" | "poly" => DecayKind::PolyInv,
            "poly_inv_sqrt" | "poly_sqrt" => DecayKind::PolyInvSqrt,
            _ => match s.strip_prefix("exp:") {
                Some(r) => DecayKind::Exp {
                    rate: r
                        .parse()
                        .map_err(|_| Error::InvalidParameter(format!("bad decay rate '{r}'")))?,
                },
                None => return Err(Error::InvalidParameter(format!("unknown decay '{s}'"))),
            },
        };
        kind.validate()?;
        Ok(kind)
    }
}

/// `φ(x) = ½ xᵀAx + (λ_reg/2)‖x‖² − ⟨x, a⟩` with `A = U diag(λ) Uᵀ`.
#[derive(Clone, Debug)]
pub struct QuadraticSpec {
    /// `None` stands for the identity basis.
    u: Option<DMatrix<f64>>,
    lambdas: Vec<f64>,
    ridge: f64,
    a: Vec<f64>,
    /// `Uᵀ a`
    ua: Vec<f64>,
}

impl QuadraticSpec {
    pub fn new(
        u: Option<DMatrix<f64>>,
        lambdas: Vec<f64>,
        ridge: f64,
        a: Vec<f64>,
    ) -> Result<Self> {
        let d = lambdas.len();
        if d == 0 {
            return Err(Error::InvalidDimension("quadratic needs d >= 1".into()));
        }
        check_dim(d, a.len())?;
        if let Some(u) = &u {
            check_dim(d, u.nrows())?;
            check_dim(d, u.ncols())?;
        }
        if lambdas.iter().any(|l| !(l.is_finite() && *l > 0.0)) {
            return Err(Error::InvalidParameter(
                "eigenvalues must be finite and > 0".into(),
            ));
        }
        if lambdas.windows(2).any(|w| w[1] > w[0]) {
            return Err(Error::InvalidParameter(
                "eigenvalues must be non-increasing".into(),
            ));
        }
        if !(ridge >= 0.0 && ridge.is_finite()) {
            return Err(Error::InvalidParameter(format!(
                "ridge must be >= 0, got {ridge}"
            )));
        }
        let ua = match &u {
            Some(u) => mat_t_vec(u, &a),
            None => a.clone(),
        };
        Ok(Self {
            u,
            lambdas,
            ridge,
            a,
            ua,
        })
    }

    /// `φ(x) = ½‖x‖²`.
    pub fn identity(d: usize) -> Self {
        Self::new(None, vec![1.0; d.max(1)], 0.0, vec![0.0; d.max(1)])
            .expect("valid identity quadratic")
    }

    pub fn dim(&self) -> usize {
        self.lambdas.len()
    }

    pub fn basis(&self) -> Option<&DMatrix<f64>> {
        self.u.as_ref()
    }

    pub fn lambdas(&self) -> &[f64] {
        &self.lambdas
    }

    pub fn ridge(&self) -> f64 {
        self.ridge
    }

    pub fn linear_term(&self) -> &[f64] {
        &self.a
    }

    /// `λ_max(A)`
    pub fn lambda_max(&self) -> f64 {
        self.lambdas[0]
    }

    /// `tr(A)`, excluding the ridge.
    pub fn trace_a(&self) -> f64 {
        self.lambdas.iter().sum()
    }

    /// Eigenvalues of the Hessian `A + λ_reg I`, largest first.
    pub fn hessian_eigenvalues(&self) -> Vec<f64> {
        self.lambdas.iter().map(|l| l + self.ridge).collect()
    }

    fn to_eigen(&self, x: &[f64]) -> DenseVector {
        match &self.u {
            Some(u) => mat_t_vec(u, x),
            None => x.to_vec(),
        }
    }

    fn from_eigen(&self, z: &[f64]) -> DenseVector {
        match &self.u {
            Some(u) => mat_vec(u, z),
            None => z.to_vec(),
        }
    }

    fn optimum_eigen(&self) -> DenseVector {
        self.ua
            .iter()
            .zip(&self.lambdas)
            .map(|(b, l)| b / (l + self.ridge))
            .collect()
    }

    /// `x* = (A + λ_reg I)⁻¹ a`
    pub fn minimizer(&self) -> DenseVector {
        self.from_eigen(&self.optimum_eigen())
    }

    /// `A v` (no ridge).
    pub fn apply_a(&self, v: &[f64]) -> DenseVector {
        let z = self.to_eigen(v);
        let z: Vec<f64> = z.iter().zip(&self.lambdas).map(|(zi, l)| zi * l).collect();
        self.from_eigen(&z)
    }

    /// `A^p v` through the spectral factorization.
    pub fn apply_a_power(&self, p: f64, v: &[f64]) -> DenseVector {
        let z = self.to_eigen(v);
        let z: Vec<f64> = z
            .iter()
            .zip(&self.lambdas)
            .map(|(zi, l)| zi * l.powf(p))
            .collect();
        self.from_eigen(&z)
    }
}

/// Builds a quadratic with the given spectrum, a Haar-like random basis and a
/// standard Gaussian linear term.
pub fn make_quadratic(
    d: usize,
    decay: DecayKind,
    ridge: f64,
    stream: &RngStream,
) -> Result<QuadraticSpec> {
    if d == 0 {
        return Err(Error::InvalidDimension("quadratic needs d >= 1".into()));
    }
    let lambdas = decay.eigenvalues(d)?;
    let u = random_orthogonal(d, &stream.derive(1))?;
    let mut rng = stream.derive(2).rng();
    let a = (0..d).map(|_| StandardNormal.sample(&mut rng)).collect();
    QuadraticSpec::new(Some(u), lambdas, ridge, a)
}

impl Objective for QuadraticSpec {
    fn dim(&self) -> usize {
        self.lambdas.len()
    }

    fn value(&self, x: &[f64]) -> f64 {
        let z = self.to_eigen(x);
        let quad: f64 = z.iter().zip(&self.lambdas).map(|(zi, l)| l * zi * zi).sum();
        0.5 * quad + 0.5 * self.ridge * dot(x, x) - dot(x, &self.a)
    }
}

impl WhiteBox for QuadraticSpec {
    fn gradient(&self, x: &[f64]) -> Vec<f64> {
        let mut g = self.apply_a(x);
        for ((gi, xi), ai) in g.iter_mut().zip(x).zip(&self.a) {
            *gi += self.ridge * xi - ai;
        }
        g
    }

    fn hessian_matvec(&self, _x: &[f64], v: &[f64]) -> Vec<f64> {
        let mut h = self.apply_a(v);
        for (hi, vi) in h.iter_mut().zip(v) {
            *hi += self.ridge * vi;
        }
        h
    }

    fn hessian_trace(&self, _x: &[f64]) -> f64 {
        self.trace_a() + self.dim() as f64 * self.ridge
    }

    /// `½ (x − x*)ᵀ(A + λ_reg I)(x − x*)`, evaluated in the eigenbasis so it
    /// stays accurate far below the rounding level of `φ` itself.
    fn optimum_gap(&self, x: &[f64]) -> Result<f64> {
        let z = self.to_eigen(x);
        let zs = self.optimum_eigen();
        Ok(0.5
            * z.iter()
                .zip(&zs)
                .zip(&self.lambdas)
                .map(|((zi, si), l)| (l + self.ridge) * (zi - si) * (zi - si))
                .sum::<f64>())
    }

    fn meta(&self) -> ObjectiveMeta {
        ObjectiveMeta {
            smoothness: Some(self.lambda_max() + self.ridge),
            strong_convexity: Some(self.lambdas[self.dim() - 1] + self.ridge),
            hessian_lipschitz: Some(0.0),
            trace: Some(self.hessian_trace(&[])),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::oracle::{optimum_gap, true_gradient};

    fn random_vec(d: usize, seed: u64) -> Vec<f64> {
        let mut rng = RngStream::new(seed, 77).rng();
        (0..d).map(|_| StandardNormal.sample(&mut rng)).collect()
    }

    #[test]
    fn paper_trace_ratios() {
        let r = RngStream::new(0, 0);
        let ratio = |decay| {
            let q = make_quadratic(300, decay, 1e-4, &r).unwrap();
            (q.trace_a() + 300.0 * 1e-4) / q.lambda_max()
        };
        assert!((ratio(DecayKind::Exp { rate: 0.95 }) - 20.0).abs() < 0.05);
        // Harmonic number H₃₀₀ + 0.03.
        let h300: f64 = (1..=300).map(|i| 1.0 / i as f64).sum();
        assert!((ratio(DecayKind::PolyInv) - (h300 + 0.03)).abs() < 1e-12);
        assert!((ratio(DecayKind::PolyInv) - 6.0).abs() < 0.35);
        assert!((ratio(DecayKind::PolyInvSqrt) - 33.0).abs() < 0.5);
    }

    #[test]
    fn exp_trace_matches_geometric_series() {
        let q = make_quadratic(
            300,
            DecayKind::Exp { rate: 0.95 },
            1e-4,
            &RngStream::new(1, 0),
        )
        .unwrap();
        let series = (1.0 - 0.95f64.powi(300)) / 0.05 + 300.0 * 1e-4;
        assert!((q.hessian_trace(&[]) - series).abs() < 1e-10);
        assert!((q.hessian_trace(&[]) - 20.03).abs() < 1e-3);
    }

    #[test]
    fn invalid_decay_rejected() {
        assert!(DecayKind::Exp { rate: 1.5 }.validate().is_err());
        assert!("exp:1.5".parse::<DecayKind>().is_err());
        assert!(
            make_quadratic(4, DecayKind::Exp { rate: 0.0 }, 0.0, &RngStream::new(0, 0)).is_err()
        );
        assert_eq!(
            "exp:0.9".parse::<DecayKind>().unwrap(),
            DecayKind::Exp { rate: 0.9 }
        );
        assert_eq!(
            "poly_inv_sqrt".parse::<DecayKind>().unwrap(),
            DecayKind::PolyInvSqrt
        );
    }

    #[test]
    fn gradient_examples() {
        let q = QuadraticSpec::identity(2);
        assert_eq!(true_gradient(&q, &[1.0, 2.0]).unwrap(), vec![1.0, 2.0]);
        assert!(true_gradient(&q, &[1.0]).is_err());
    }

    #[test]
    fn gradient_matches_central_differences() {
        let q =
            make_quadratic(4, DecayKind::Exp { rate: 0.7 }, 0.1, &RngStream::new(5, 0)).unwrap();
        let x = random_vec(4, 1);
        let g = q.gradient(&x);
        let h = 1e-5;
        for i in 0..4 {
            let mut xp = x.clone();
            let mut xm = x.clone();
            xp[i] += h;
            xm[i] -= h;
            let fd = (q.value(&xp) - q.value(&xm)) / (2.0 * h);
            assert!(
                (fd - g[i]).abs() <= 1e-6 * g[i].abs().max(1.0),
                "{fd} vs {}",
                g[i]
            );
        }
    }

    #[test]
    fn hessian_eigen_action() {
        let q = make_quadratic(5, DecayKind::PolyInv, 0.01, &RngStream::new(2, 0)).unwrap();
        let u = q.basis().unwrap();
        for i in 0..5 {
            let ui: Vec<f64> = u.column(i).iter().copied().collect();
            let hv = q.hessian_matvec(&ui, &ui);
            let want = q.lambdas()[i] + 0.01;
            for (h, x) in hv.iter().zip(&ui) {
                assert!((h - want * x).abs() < 1e-12);
            }
        }
        assert!(q
            .hessian_matvec(&[0.0; 5], &[0.0; 5])
            .iter()
            .all(|v| *v == 0.0));
    }

    #[test]
    fn gradient_difference_is_hessian_action() {
        let q = make_quadratic(20, DecayKind::PolyInvSqrt, 1e-3, &RngStream::new(8, 0)).unwrap();
        let x = random_vec(20, 3);
        let y = random_vec(20, 4);
        let gx = q.gradient(&x);
        let gy = q.gradient(&y);
        let diff: Vec<f64> = x.iter().zip(&y).map(|(a, b)| a - b).collect();
        let hd = q.hessian_matvec(&x, &diff);
        let scale = hd.iter().map(|v| v.abs()).fold(0.0, f64::max);
        for (i, h) in hd.iter().enumerate() {
            assert!(((gx[i] - gy[i]) - h).abs() <= 1e-12 * scale.max(1.0) * 10.0);
        }
    }

    #[test]
    fn gap_examples() {
        let q =
            make_quadratic(6, DecayKind::Exp { rate: 0.8 }, 1e-2, &RngStream::new(3, 0)).unwrap();
        let xs = q.minimizer();
        assert!(optimum_gap(&q, &xs).unwrap() < 1e-20);
        assert!(q.gradient(&xs).iter().all(|g| g.abs() < 1e-10));

        let iso = QuadraticSpec::identity(2);
        assert_eq!(optimum_gap(&iso, &[1.0, 0.0]).unwrap(), 0.5);
    }

    #[test]
    fn gap_equals_inverse_hessian_gradient_norm() {
        // φ(x) − φ(x*) = ½ ∇φ(x)ᵀ (A + λI)⁻¹ ∇φ(x)
        let q = make_quadratic(5, DecayKind::PolyInv, 1e-2, &RngStream::new(4, 0)).unwrap();
        let x = random_vec(5, 9);
        let g = q.gradient(&x);
        let u = q.basis().unwrap();
        let gz = mat_t_vec(u, &g);
        let want: f64 = 0.5
            * gz.iter()
                .zip(q.hessian_eigenvalues())
                .map(|(gi, h)| gi * gi / h)
                .sum::<f64>();
        let got = q.optimum_gap(&x).unwrap();
        assert!((got - want).abs() <= 1e-12 * want.max(1.0));
        let direct = q.value(&x) - q.value(&q.minimizer());
        assert!((got - direct).abs() <= 1e-10 * want.max(1.0));
    }

    #[test]
    fn homogeneous_minimum_at_origin() {
        let q = QuadraticSpec::new(None, vec![2.0, 1.0], 0.0, vec![0.0, 0.0]).unwrap();
        assert_eq!(q.value(&[0.0, 0.0]), 0.0);
    }

    #[test]
    fn constructor_validation() {
        assert!(QuadraticSpec::new(None, vec![1.0, 2.0], 0.0, vec![0.0; 2]).is_err());
        assert!(QuadraticSpec::new(None, vec![1.0, 0.0], 0.0, vec![0.0; 2]).is_err());
        assert!(QuadraticSpec::new(None, vec![1.0], -1.0, vec![0.0]).is_err());
        assert!(QuadraticSpec::new(None, vec![1.0], 0.0, vec![0.0; 2]).is_err());
    }
}
