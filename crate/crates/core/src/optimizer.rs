//! Iteration loops: sketched zeroth-order descent, its Hessian-aware variant
//! and the full finite-difference baseline.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{check_dim, Error, Result};
use crate::estimator::{
    zo_full_fd, zo_grad_and_trace, zo_gradient, zo_gradient_precond, GradientEstimate,
    Preconditioner,
};
use crate::numeric::{all_finite, axpy, power_iteration_sym, DenseVector};
use crate::oracle::{CountingOracle, WhiteBox};
use crate::rng::RngStream;
use crate::sketch::{default_rank, sample_sketch, SketchKind, SketchSpec};

/// Divergence threshold on `f(x_t) − f(x₀)`.
pub const DIVERGENCE_LIMIT: f64 = 1e12;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Method {
    ZoSketch,
    ZoHessianAware,
    ZoGd,
}

impl Method {
    pub fn as_str(&self) -> &'static str {
        match self {
            Method::ZoSketch => "zo_sketch",
            Method::ZoHessianAware => "zo_hessian_aware",
            Method::ZoGd => "zo_gd",
        }
    }
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Method {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "zo_sketch" => Ok(Method::ZoSketch),
            "zo_hessian_aware" => Ok(Method::ZoHessianAware),
            "zo_gd" => Ok(Method::ZoGd),
            other => Err(Error::InvalidParameter(format!("unknown method '{other}'"))),
        }
    }
}

/// Step-size rule.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "policy", rename_all = "snake_case")]
pub enum StepPolicy {
    Fixed {
        eta: f64,
    },
    /// `η = ℓ / tr(∇²φ)`. `trace` defaults to the white-box trace.
    KnownTrace {
        #[serde(default, skip_serializing_if = "Option::is_none")]
        trace: Option<f64>,
    },
    /// `η_t = 1 / (c · max(τ_t, floor))`; `floor` defaults to `1e-12 · max(1, |τ₀|)`.
    AdaptiveTrace {
        #[serde(default = "default_c")]
        c: f64,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        floor: Option<f64>,
    },
    /// `η = 1 / L`. `lmax` defaults to the white-box smoothness constant.
    InverseLmax {
        #[serde(default, skip_serializing_if = "Option::is_none")]
        lmax: Option<f64>,
    },
}

fn default_c() -> f64 {
    4.0
}

impl StepPolicy {
    pub fn adaptive() -> Self {
        StepPolicy::AdaptiveTrace {
            c: default_c(),
            floor: None,
        }
    }

    fn validate(&self) -> Result<()> {
        let positive = |name: &str, v: f64| {
            if v > 0.0 && v.is_finite() {
                Ok(())
            } else {
                Err(Error::InvalidParameter(format!(
                    "{name} must be finite and > 0, got {v}"
                )))
            }
        };
        match *self {
            // η = 0 is allowed as a degenerate fixed step.
            StepPolicy::Fixed { eta } if eta >= 0.0 && eta.is_finite() => Ok(()),
            StepPolicy::Fixed { eta } => Err(Error::InvalidParameter(format!(
                "step must be >= 0, got {eta}"
            ))),
            StepPolicy::KnownTrace { trace } => trace.map_or(Ok(()), |t| positive("trace", t)),
            StepPolicy::AdaptiveTrace { c, floor } => {
                positive("c", c)?;
                floor.map_or(Ok(()), |f| positive("floor", f))
            }
            StepPolicy::InverseLmax { lmax } => lmax.map_or(Ok(()), |l| positive("lmax", l)),
        }
    }
}

/// Everything needed to reproduce one run.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunConfig {
    pub method: Method,
    #[serde(default = "default_kind")]
    pub sketch: SketchKind,
    #[serde(default = "default_ell")]
    pub ell: usize,
    /// Nonzeros per input coordinate for sparse sketches.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sparsity: Option<usize>,
    #[serde(default)]
    pub seed: u64,
    pub alpha: f64,
    pub step: StepPolicy,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub max_queries: Option<u64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub max_iters: Option<u64>,
    /// Stop once `gap ≤ gap_target · gap₀`. Needs white-box access.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub gap_target: Option<f64>,
    #[serde(default = "default_record_every")]
    pub record_every: u64,
}

fn default_kind() -> SketchKind {
    SketchKind::Gaussian
}

fn default_ell() -> usize {
    10
}

fn default_record_every() -> u64 {
    1
}

impl RunConfig {
    pub fn new(method: Method, alpha: f64, step: StepPolicy) -> Self {
        Self {
            method,
            sketch: default_kind(),
            ell: default_ell(),
            sparsity: None,
            seed: 0,
            alpha,
            step,
            max_queries: None,
            max_iters: None,
            gap_target: None,
            record_every: 1,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.alpha > 0.0 && self.alpha.is_finite()) {
            return Err(Error::InvalidParameter(format!(
                "alpha must be > 0, got {}",
                self.alpha
            )));
        }
        if self.max_queries.is_none() && self.max_iters.is_none() && self.gap_target.is_none() {
            return Err(Error::InvalidParameter(
                "set at least one of max_queries, max_iters, gap_target".into(),
            ));
        }
        if let Some(g) = self.gap_target {
            if !(g >= 0.0 && g.is_finite()) {
                return Err(Error::InvalidParameter(format!(
                    "gap_target must be >= 0, got {g}"
                )));
            }
        }
        if self.record_every == 0 {
            return Err(Error::InvalidParameter("record_every must be >= 1".into()));
        }
        if self.method != Method::ZoGd && self.ell == 0 {
            return Err(Error::InvalidParameter("ell must be >= 1".into()));
        }
        self.step.validate()?;
        match (self.method, self.step) {
            (Method::ZoGd, StepPolicy::KnownTrace { .. } | StepPolicy::AdaptiveTrace { .. }) => {
                Err(Error::InvalidParameter(
                    "zo_gd supports fixed and inverse_lmax steps".into(),
                ))
            }
            (Method::ZoHessianAware, StepPolicy::AdaptiveTrace { .. }) => Err(
                Error::InvalidParameter("zo_hessian_aware does not support adaptive_trace".into()),
            ),
            _ => Ok(()),
        }
    }

    /// Query cost of one iteration at dimension `d`.
    pub fn iteration_cost(&self, d: usize) -> u64 {
        match (self.method, self.step) {
            (Method::ZoGd, _) => 2 * d as u64,
            (_, StepPolicy::AdaptiveTrace { .. }) => 2 * self.ell as u64 + 1,
            _ => 2 * self.ell as u64,
        }
    }

    fn sketch_spec(&self, d: usize, t: u64) -> SketchSpec {
        let mut spec = SketchSpec::new(
            self.sketch,
            d,
            self.ell,
            RngStream::new(self.seed, 0).derive(t),
        );
        if let Some(s) = self.sparsity {
            spec = spec.with_sparsity(s);
        }
        spec
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct IterRecord {
    pub iter: u64,
    pub queries: u64,
    pub f_value: f64,
    pub gap: Option<f64>,
    /// Step used to reach this iterate.
    pub eta: Option<f64>,
    /// Trace estimate behind `eta`, under adaptive_trace.
    pub tau: Option<f64>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Termination {
    Budget,
    Iters,
    GapTarget,
    Numeric,
}

impl fmt::Display for Termination {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Termination::Budget => "budget",
            Termination::Iters => "iters",
            Termination::GapTarget => "gap_target",
            Termination::Numeric => "numeric",
        })
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunResult {
    pub records: Vec<IterRecord>,
    pub final_x: DenseVector,
    pub total_queries: u64,
    pub termination_reason: Termination,
}

enum Direction<'p> {
    Sketch,
    Precond(&'p Preconditioner),
    FullFd,
}

/// Algorithm 1: `x_{t+1} = x_t − η_t g(x_t)` with a fresh sketch per iteration.
///
/// `white_box` supplies gap telemetry and defaults for `known_trace` /
/// `inverse_lmax`; it is never billed.
pub fn run_zo_sketch(
    oracle: &mut CountingOracle<'_>,
    x0: &[f64],
    cfg: &RunConfig,
    white_box: Option<&dyn WhiteBox>,
) -> Result<RunResult> {
    expect_method(cfg, Method::ZoSketch)?;
    run(oracle, x0, cfg, Direction::Sketch, white_box)
}

/// Algorithm 2: as [`run_zo_sketch`] with directions `H^{-1/2} sᵢ`.
pub fn run_zo_hessian_aware(
    oracle: &mut CountingOracle<'_>,
    x0: &[f64],
    precond: &Preconditioner,
    cfg: &RunConfig,
    white_box: Option<&dyn WhiteBox>,
) -> Result<RunResult> {
    expect_method(cfg, Method::ZoHessianAware)?;
    run(oracle, x0, cfg, Direction::Precond(precond), white_box)
}

/// Coordinate finite-difference gradient descent, `2d` queries per iteration.
pub fn run_zo_gd(
    oracle: &mut CountingOracle<'_>,
    x0: &[f64],
    cfg: &RunConfig,
    white_box: Option<&dyn WhiteBox>,
) -> Result<RunResult> {
    expect_method(cfg, Method::ZoGd)?;
    run(oracle, x0, cfg, Direction::FullFd, white_box)
}

fn expect_method(cfg: &RunConfig, want: Method) -> Result<()> {
    if cfg.method == want {
        Ok(())
    } else {
        Err(Error::InvalidParameter(format!(
            "config method is {}, expected {want}",
            cfg.method
        )))
    }
}

fn need_white_box<'w>(white_box: Option<&'w dyn WhiteBox>, what: &str) -> Result<&'w dyn WhiteBox> {
    white_box.ok_or_else(|| Error::Capability(format!("{what} needs white-box access")))
}

/// Constant step for the non-adaptive policies.
fn resolve_fixed_step(
    cfg: &RunConfig,
    x0: &[f64],
    white_box: Option<&dyn WhiteBox>,
) -> Result<Option<f64>> {
    Ok(match cfg.step {
        StepPolicy::Fixed { eta } => Some(eta),
        StepPolicy::KnownTrace { trace } => {
            let tr = match trace {
                Some(t) => t,
                None => {
                    let wb = need_white_box(white_box, "known_trace without an explicit trace")?;
                    wb.meta().trace.unwrap_or_else(|| wb.hessian_trace(x0))
                }
            };
            Some(cfg.ell as f64 / tr)
        }
        StepPolicy::InverseLmax { lmax } => {
            let l = match lmax {
                Some(l) => l,
                None => need_white_box(white_box, "inverse_lmax without an explicit lmax")?
                    .meta()
                    .smoothness
                    .ok_or_else(|| {
                        Error::Capability("objective has no smoothness constant".into())
                    })?,
            };
            Some(1.0 / l)
        }
        StepPolicy::AdaptiveTrace { .. } => None,
    })
}

fn run(
    oracle: &mut CountingOracle<'_>,
    x0: &[f64],
    cfg: &RunConfig,
    direction: Direction<'_>,
    white_box: Option<&dyn WhiteBox>,
) -> Result<RunResult> {
    cfg.validate()?;
    let d = oracle.dim();
    check_dim(d, x0.len())?;
    if let Some(wb) = white_box {
        check_dim(d, wb.dim())?;
    }
    if !all_finite(x0) {
        return Err(Error::InvalidParameter("x0 must be finite".into()));
    }
    if cfg.gap_target.is_some() {
        need_white_box(white_box, "gap_target")?;
    }
    let fixed_step = resolve_fixed_step(cfg, x0, white_box)?;
    let cost = cfg.iteration_cost(d);
    let objective = oracle.objective();

    let gap_of =
        |x: &[f64]| -> Result<Option<f64>> { white_box.map(|wb| wb.optimum_gap(x)).transpose() };

    let mut x = x0.to_vec();
    let f0 = objective.value(&x);
    let gap0 = gap_of(&x)?;
    let target = match (cfg.gap_target, gap0) {
        (Some(rel), Some(g0)) => Some(rel * g0),
        _ => None,
    };
    let mut records = vec![IterRecord {
        iter: 0,
        queries: oracle.queries(),
        f_value: f0,
        gap: gap0,
        eta: None,
        tau: None,
    }];
    let start_queries = oracle.queries();
    let mut floor = match cfg.step {
        StepPolicy::AdaptiveTrace { floor, .. } => floor,
        _ => None,
    };

    let mut t = 0u64;
    let mut recorded_t = 0u64;
    let reason = loop {
        if let (Some(tg), Some(g)) = (target, records.last().and_then(|r| r.gap)) {
            if recorded_t == t && g <= tg {
                break Termination::GapTarget;
            }
        }
        if cfg.max_iters.is_some_and(|m| t >= m) {
            break Termination::Iters;
        }
        if cfg
            .max_queries
            .is_some_and(|m| oracle.queries() - start_queries + cost > m)
        {
            break Termination::Budget;
        }

        let step = (|| -> Result<(GradientEstimate, f64, Option<f64>)> {
            match direction {
                Direction::FullFd => Ok((
                    zo_full_fd(oracle, &x, cfg.alpha)?,
                    fixed_step.unwrap_or(0.0),
                    None,
                )),
                Direction::Precond(p) => {
                    let sketch = sample_sketch(&cfg.sketch_spec(d, t))?;
                    let g = zo_gradient_precond(oracle, &x, &sketch, cfg.alpha, p)?;
                    Ok((g, fixed_step.unwrap_or(0.0), None))
                }
                Direction::Sketch => {
                    let sketch = sample_sketch(&cfg.sketch_spec(d, t))?;
                    match (cfg.step, fixed_step) {
                        (StepPolicy::AdaptiveTrace { c, .. }, _) => {
                            let (g, tau) = zo_grad_and_trace(oracle, &x, &sketch, cfg.alpha)?;
                            let fl = *floor.get_or_insert(1e-12 * tau.abs().max(1.0));
                            Ok((g, 1.0 / (c * tau.max(fl)), Some(tau)))
                        }
                        (_, eta) => Ok((
                            zo_gradient(oracle, &x, &sketch, cfg.alpha)?,
                            eta.unwrap_or(0.0),
                            None,
                        )),
                    }
                }
            }
        })();
        let (g, eta, tau) = match step {
            Ok(s) => s,
            Err(Error::Numeric(_)) => break Termination::Numeric,
            Err(e) => return Err(e),
        };
        if !(eta.is_finite() && eta >= 0.0) {
            break Termination::Numeric;
        }
        axpy(-eta, &g.direction, &mut x);
        t += 1;
        if !all_finite(&x) {
            break Termination::Numeric;
        }

        let last_due = cfg.max_iters.is_some_and(|m| t >= m);
        if t.is_multiple_of(cfg.record_every) || last_due {
            let f = objective.value(&x);
            let gap = gap_of(&x)?;
            records.push(IterRecord {
                iter: t,
                queries: oracle.queries(),
                f_value: f,
                gap,
                eta: Some(eta),
                tau,
            });
            recorded_t = t;
            if !f.is_finite() || f - f0 > DIVERGENCE_LIMIT {
                break Termination::Numeric;
            }
        }
    };

    // Make sure the final iterate is always recorded.
    if recorded_t != t && reason != Termination::Numeric {
        records.push(IterRecord {
            iter: t,
            queries: oracle.queries(),
            f_value: objective.value(&x),
            gap: gap_of(&x)?,
            eta: None,
            tau: None,
        });
    }

    Ok(RunResult {
        records,
        final_x: x,
        total_queries: oracle.queries(),
        termination_reason: reason,
    })
}

/// Step `1 / (5 ‖∇²φ‖₂ + tr(∇²φ) / k)`.
pub fn theorem1_step(lmax: f64, trace: f64, k: usize) -> f64 {
    1.0 / (5.0 * lmax + trace / k as f64)
}

/// `k` used by the step rules for a sketch size `ℓ`.
pub fn rank_for(ell: usize) -> usize {
    default_rank(ell)
}

/// Step `(5 ‖H^{-1/2} ∇²φ(x) H^{-1/2}‖₂ + tr(H⁻¹ ∇²φ(x)) / k)⁻¹`, computed
/// from white-box Hessian products (the trace with `d` of them).
pub fn theorem2_step(
    obj: &dyn WhiteBox,
    x: &[f64],
    precond: &Preconditioner,
    k: usize,
    stream: &RngStream,
) -> Result<f64> {
    let d = obj.dim();
    check_dim(d, x.len())?;
    let whitened = |v: &[f64]| -> Result<DenseVector> {
        let w = precond.apply_inv_sqrt(v)?;
        precond.apply_inv_sqrt(&obj.hessian_matvec(x, &w))
    };
    let mut err = None;
    let norm = power_iteration_sym(
        |v, out| match whitened(v) {
            Ok(r) => out.copy_from_slice(&r),
            Err(e) => {
                err = Some(e);
                out.fill(f64::NAN);
            }
        },
        d,
        500,
        1e-10,
        stream,
    );
    if let Some(e) = err {
        return Err(e);
    }
    let norm = norm?;
    let mut trace = 0.0;
    let mut e = vec![0.0; d];
    for i in 0..d {
        e[i] = 1.0;
        trace += whitened(&e)?[i];
        e[i] = 0.0;
    }
    Ok(1.0 / (5.0 * norm + trace / k as f64))
}
