use std::fs;

use serde::Serialize;

use crate::config::{ExperimentConfig, SCHEMA_VERSION};
use crate::error::{CliError, Result};
use crate::problem::{Problem, MAX_DENSE_D};

pub const SPECTRUM_CSV: &str = "spectrum.csv";
pub const SPECTRUM_JSON: &str = "spectrum.json";

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct SpectrumSummary {
    pub schema_version: u32,
    pub d: usize,
    pub ridge: f64,
    /// Hessian trace `tr(A) + dλ`.
    pub trace: f64,
    /// Largest Hessian eigenvalue `L`.
    pub lmax: f64,
    /// `trace / lmax`
    pub ratio: f64,
    pub point: &'static str,
    pub eigenvalues_written: bool,
}

/// Hessian spectrum of the configured problem.
///
/// Quadratics are exact at any `d`. Logistic problems use a dense eigensolve
/// at the reference optimum, capped at `d = 512`; past the cap
/// `summary_only` switches to matvec estimates and writes no CSV.
pub fn cmd_spectrum(cfg: &ExperimentConfig, summary_only: bool) -> Result<SpectrumSummary> {
    cfg.validate()?;
    let problem = Problem::build(&cfg.problem)?;
    let d = problem.dim();
    let x = problem.spectrum_point();
    let wb = problem.white_box();
    let point = match problem {
        Problem::Quadratic(_) => "origin",
        Problem::Logistic(_) => "reference_optimum",
    };
    let dense = matches!(problem, Problem::Quadratic(_)) || d <= MAX_DENSE_D;
    if !dense && !summary_only {
        return Err(zosketch::Error::Capability(format!(
            "dense eigensolve capped at d = {MAX_DENSE_D} (d = {d}); pass --summary-only"
        ))
        .into());
    }
    fs::create_dir_all(&cfg.output).map_err(|e| CliError::io(&cfg.output, e))?;

    let trace = wb.hessian_trace(&x);
    let (lmax, written) = if dense && !summary_only {
        let (_, vals) = problem.hessian_eigen(&x)?;
        let path = cfg.output.join(SPECTRUM_CSV);
        let mut w = csv::Writer::from_path(&path).map_err(|e| match e.into_kind() {
            csv::ErrorKind::Io(io) => CliError::io(&path, io),
            other => CliError::Config(format!("{other:?}")),
        })?;
        w.write_record(["index", "eigenvalue"])?;
        for (i, v) in vals.iter().enumerate() {
            w.write_record([(i + 1).to_string(), format!("{v:e}")])?;
        }
        w.flush().map_err(|e| CliError::io(&path, e))?;
        (vals[0], true)
    } else {
        (problem.hessian_lmax(&x)?, false)
    };

    let ridge = problem.summary().ridge;
    let summary = SpectrumSummary {
        schema_version: SCHEMA_VERSION,
        d,
        ridge,
        trace,
        lmax,
        ratio: trace / lmax,
        point,
        eigenvalues_written: written,
    };
    let path = cfg.output.join(SPECTRUM_JSON);
    fs::write(&path, serde_json::to_string_pretty(&summary)? + "\n")
        .map_err(|e| CliError::io(&path, e))?;
    Ok(summary)
}
