//! Objective oracles.
//!
//! An [`Objective`] is the noiseless `φ`. Zeroth-order code only ever sees a
//! [`CountingOracle`], which adds bounded pseudo-noise and counts queries.
//! The [`WhiteBox`] trait exposes ground truth (gradients, Hessian products,
//! traces, optimality gaps) for tests and harness telemetry; none of it
//! touches a query counter.

mod libsvm;
mod logistic;
mod noise;
mod quadratic;

pub use libsvm::{load_libsvm, LogisticDataset};
pub use logistic::{LogisticObjective, ReferenceOptimum};
pub use noise::{NoiseMode, NoiseSpec};
pub use quadratic::{make_quadratic, DecayKind, QuadraticSpec};

use serde::{Deserialize, Serialize};

use crate::error::{check_dim, Error, Result};
use crate::numeric::all_finite;

/// A deterministic objective `φ: ℝᵈ → ℝ`.
pub trait Objective: Send + Sync {
    fn dim(&self) -> usize;

    /// `φ(x)`; callers guarantee `x.len() == dim()`.
    fn value(&self, x: &[f64]) -> f64;
}

/// Ground-truth access used by tests, baselines and telemetry.
pub trait WhiteBox: Objective {
    fn gradient(&self, x: &[f64]) -> Vec<f64>;

    fn hessian_matvec(&self, x: &[f64], v: &[f64]) -> Vec<f64>;

    fn hessian_trace(&self, x: &[f64]) -> f64;

    /// `φ(x) − φ(x*)`, clamped at zero.
    fn optimum_gap(&self, x: &[f64]) -> Result<f64>;

    fn meta(&self) -> ObjectiveMeta;
}

/// Known curvature constants of an objective.
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct ObjectiveMeta {
    /// Smoothness constant `L`.
    pub smoothness: Option<f64>,
    /// Strong convexity constant `μ`.
    pub strong_convexity: Option<f64>,
    /// Hessian Lipschitz constant.
    pub hessian_lipschitz: Option<f64>,
    /// Hessian trace, when it does not depend on `x`.
    pub trace: Option<f64>,
}

pub fn true_gradient(obj: &dyn WhiteBox, x: &[f64]) -> Result<Vec<f64>> {
    check_dim(obj.dim(), x.len())?;
    Ok(obj.gradient(x))
}

pub fn hessian_matvec(obj: &dyn WhiteBox, x: &[f64], v: &[f64]) -> Result<Vec<f64>> {
    check_dim(obj.dim(), x.len())?;
    check_dim(obj.dim(), v.len())?;
    Ok(obj.hessian_matvec(x, v))
}

pub fn true_hessian_trace(obj: &dyn WhiteBox, x: &[f64]) -> Result<f64> {
    check_dim(obj.dim(), x.len())?;
    Ok(obj.hessian_trace(x))
}

pub fn optimum_gap(obj: &dyn WhiteBox, x: &[f64]) -> Result<f64> {
    check_dim(obj.dim(), x.len())?;
    obj.optimum_gap(x)
}

/// The only handle zeroth-order routines get: `f(x) = φ(x) + ζ(x)` plus a
/// monotone query counter.
pub struct CountingOracle<'a> {
    objective: &'a dyn Objective,
    noise: NoiseSpec,
    queries: u64,
}

impl<'a> CountingOracle<'a> {
    pub fn new(objective: &'a dyn Objective, noise: NoiseSpec) -> Self {
        Self {
            objective,
            noise,
            queries: 0,
        }
    }

    pub fn noiseless(objective: &'a dyn Objective) -> Self {
        Self::new(objective, NoiseSpec::none())
    }

    pub fn dim(&self) -> usize {
        self.objective.dim()
    }

    pub fn queries(&self) -> u64 {
        self.queries
    }

    pub fn noise(&self) -> &NoiseSpec {
        &self.noise
    }

    /// The underlying noiseless objective, for telemetry that must not be
    /// billed as queries.
    pub fn objective(&self) -> &'a dyn Objective {
        self.objective
    }

    /// One oracle query.
    pub fn eval(&mut self, x: &[f64]) -> Result<f64> {
        check_dim(self.objective.dim(), x.len())?;
        if !all_finite(x) {
            return Err(Error::Numeric(
                "oracle queried at a non-finite point".into(),
            ));
        }
        self.queries += 1;
        Ok(self.objective.value(x) + self.noise.sample(x))
    }
}
