//! Experiment harness for the `zosketch` optimizers: problem generation,
//! seeded (method × seed) runs, baseline comparison, spectrum and trace
//! diagnostics. Every command writes deterministic CSV/JSON artifacts.

pub mod config;
pub mod error;
pub mod problem;
pub mod run;
pub mod spectrum;
pub mod trace_check;

use std::path::Path;

use zosketch::oracle::DecayKind;

pub use config::{ExperimentConfig, MethodEntry, Overrides, ProblemConfig};
pub use error::{CliError, Result};
pub use problem::{Problem, QuadraticProblemFile};
pub use run::{cmd_compare, cmd_run, ExperimentSummary};
pub use spectrum::{cmd_spectrum, SpectrumSummary};
pub use trace_check::{cmd_trace_check, trace_check, TraceReport};

/// Writes a regenerable quadratic problem file.
pub fn cmd_gen_quadratic(
    d: usize,
    decay: DecayKind,
    ridge: f64,
    seed: u64,
    out: &Path,
) -> Result<QuadraticProblemFile> {
    if d == 0 {
        return Err(CliError::Config("d must be >= 1".into()));
    }
    if !(ridge >= 0.0 && ridge.is_finite()) {
        return Err(CliError::Config("ridge must be >= 0".into()));
    }
    decay
        .validate()
        .map_err(|e| CliError::Config(e.to_string()))?;
    let f = QuadraticProblemFile::new(d, decay, ridge, seed)?;
    f.write(out)?;
    Ok(f)
}
