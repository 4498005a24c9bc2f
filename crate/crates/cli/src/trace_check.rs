use std::fs;

use rayon::prelude::*;
use serde::Serialize;
use zosketch::estimator::trace_estimate;
use zosketch::oracle::CountingOracle;
use zosketch::sketch::{sample_sketch, SketchKind, SketchSpec};
use zosketch::RngStream;

use crate::config::{ExperimentConfig, SCHEMA_VERSION};
use crate::error::{CliError, Result};
use crate::problem::Problem;

pub const TRACE_JSON: &str = "trace_check.json";

/// Stream id reserved for trace-check sketches.
const TRACE_STREAM: u64 = 0x7ace;

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct TraceCell {
    pub kind: SketchKind,
    pub ell: usize,
    pub samples: usize,
    pub success_fraction: f64,
    pub mean_relative_error: f64,
    pub mean_tau: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct TraceReport {
    pub schema_version: u32,
    pub d: usize,
    pub true_trace: f64,
    pub epsilon: f64,
    pub alpha: f64,
    pub cells: Vec<TraceCell>,
}

impl TraceReport {
    pub fn cell(&self, kind: SketchKind, ell: usize) -> Option<&TraceCell> {
        self.cells.iter().find(|c| c.kind == kind && c.ell == ell)
    }
}

/// Monte-Carlo check of `τ(x₀, S)` against the white-box trace at `x₀ = 0`.
pub fn trace_check(problem: &Problem, cfg: &ExperimentConfig) -> Result<TraceReport> {
    let tc = &cfg.trace_check;
    let wb = problem.white_box();
    let x0 = problem.x0();
    let d = problem.dim();
    let truth = wb.hessian_trace(&x0);
    let base = RngStream::new(cfg.seeds[0], TRACE_STREAM);

    let combos: Vec<(SketchKind, usize)> = tc
        .kinds
        .iter()
        .flat_map(|&k| tc.ells.iter().map(move |&l| (k, l)))
        .collect();
    let cells = combos
        .par_iter()
        .map(|&(kind, ell)| -> Result<TraceCell> {
            let mut oracle = CountingOracle::new(wb, cfg.noise);
            let (mut hits, mut rel_sum, mut tau_sum) = (0usize, 0.0, 0.0);
            for i in 0..tc.samples {
                let mut spec = SketchSpec::new(kind, d, ell, base.derive(i as u64));
                if kind == SketchKind::Sparse {
                    spec = spec.with_sparsity(tc.sparsity.unwrap_or(1).min(ell));
                }
                let s = sample_sketch(&spec)?;
                let tau = trace_estimate(&mut oracle, &x0, &s, tc.alpha)?;
                let rel = (tau - truth).abs() / truth.abs();
                if rel <= tc.epsilon {
                    hits += 1;
                }
                rel_sum += rel;
                tau_sum += tau;
            }
            let n = tc.samples as f64;
            Ok(TraceCell {
                kind,
                ell,
                samples: tc.samples,
                success_fraction: hits as f64 / n,
                mean_relative_error: rel_sum / n,
                mean_tau: tau_sum / n,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(TraceReport {
        schema_version: SCHEMA_VERSION,
        d,
        true_trace: truth,
        epsilon: tc.epsilon,
        alpha: tc.alpha,
        cells,
    })
}

/// [`trace_check`] on the configured problem, written to `trace_check.json`.
pub fn cmd_trace_check(cfg: &ExperimentConfig) -> Result<TraceReport> {
    cfg.validate()?;
    let problem = Problem::build(&cfg.problem)?;
    let report = trace_check(&problem, cfg)?;
    fs::create_dir_all(&cfg.output).map_err(|e| CliError::io(&cfg.output, e))?;
    let path = cfg.output.join(TRACE_JSON);
    fs::write(&path, serde_json::to_string_pretty(&report)? + "\n")
        .map_err(|e| CliError::io(&path, e))?;
    Ok(report)
}
