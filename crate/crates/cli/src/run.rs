//! `run` and `compare`: fan out (method × seed) runs and collect artifacts.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::Serialize;
use zosketch::optimizer::{
    rank_for, run_zo_gd, run_zo_hessian_aware, run_zo_sketch, theorem1_step, theorem2_step,
    IterRecord, Method, RunResult, StepPolicy, Termination,
};
use zosketch::oracle::{CountingOracle, NoiseSpec};
use zosketch::RngStream;

use crate::config::{ExperimentConfig, MethodEntry, PrecondChoice, SCHEMA_VERSION};
use crate::error::{CliError, Result};
use crate::problem::{Problem, ProblemSummary};

pub const RESOLVED_CONFIG: &str = "config.resolved.toml";
pub const SUMMARY: &str = "summary.json";
pub const RUNS_DIR: &str = "runs";

/// One finished (method, seed) run.
#[derive(Clone, Debug)]
pub struct RunOutcome {
    pub method: String,
    pub seed: u64,
    pub result: RunResult,
    /// Step actually used, when the harness resolved it.
    pub eta: Option<f64>,
    pub grid: Vec<GridPoint>,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct GridPoint {
    pub eta: f64,
    pub final_gap: Option<f64>,
    pub final_f: f64,
    pub termination: String,
}

#[derive(Clone, Debug, Serialize)]
pub struct RunSummary {
    pub seed: u64,
    pub csv: String,
    pub total_queries: u64,
    pub iterations: u64,
    pub termination: String,
    pub initial_gap: Option<f64>,
    pub final_gap: Option<f64>,
    pub final_f: f64,
    pub queries_to_target: BTreeMap<String, Option<u64>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub eta: Option<f64>,
    #[serde(skip_serializing_if = "Vec::is_empty")]
    pub step_grid: Vec<GridPoint>,
}

#[derive(Clone, Debug, Serialize)]
pub struct MethodSummary {
    pub name: String,
    pub method: String,
    pub sketch: Option<String>,
    pub ell: Option<usize>,
    pub runs: Vec<RunSummary>,
    /// Median over seeds; a seed that never reached a target counts as infinite.
    pub median_queries_to_target: BTreeMap<String, Option<f64>>,
    pub median_final_gap: Option<f64>,
}

#[derive(Clone, Debug, Serialize)]
pub struct ExperimentSummary {
    pub schema_version: u32,
    pub problem: ProblemSummary,
    pub noise: NoiseSpec,
    pub gap_targets: Vec<f64>,
    pub methods: Vec<MethodSummary>,
}

impl ExperimentSummary {
    /// `(method, seed)` pairs whose final run ended in a numeric failure.
    pub fn numeric_failures(&self) -> Vec<(String, u64)> {
        self.methods
            .iter()
            .flat_map(|m| {
                m.runs
                    .iter()
                    .filter(|r| r.termination == Termination::Numeric.to_string())
                    .map(|r| (m.name.clone(), r.seed))
            })
            .collect()
    }

    pub fn method(&self, name: &str) -> Option<&MethodSummary> {
        self.methods.iter().find(|m| m.name == name)
    }
}

pub fn target_key(t: f64) -> String {
    format!("{t:e}")
}

/// Queries at the first record whose gap is at most `rel · gap₀`.
pub fn queries_to_target(records: &[IterRecord], rel: f64) -> Option<u64> {
    let g0 = records.first()?.gap?;
    records
        .iter()
        .find(|r| r.gap.is_some_and(|g| g <= rel * g0))
        .map(|r| r.queries)
}

fn median(mut v: Vec<f64>) -> Option<f64> {
    if v.is_empty() {
        return None;
    }
    v.sort_by(f64::total_cmp);
    let n = v.len();
    let m = if n % 2 == 1 {
        v[n / 2]
    } else {
        0.5 * (v[n / 2 - 1] + v[n / 2])
    };
    m.is_finite().then_some(m)
}

fn run_once(
    problem: &Problem,
    noise: &NoiseSpec,
    entry: &MethodEntry,
    step: StepPolicy,
    seed: u64,
) -> Result<RunResult> {
    let wb = problem.white_box();
    let x0 = problem.x0();
    let mut cfg = entry.run.clone();
    cfg.seed = seed;
    cfg.step = step;
    let mut oracle = CountingOracle::new(wb, *noise);
    let r = match cfg.method {
        Method::ZoSketch => run_zo_sketch(&mut oracle, &x0, &cfg, Some(wb))?,
        Method::ZoGd => run_zo_gd(&mut oracle, &x0, &cfg, Some(wb))?,
        Method::ZoHessianAware => {
            let p = problem.preconditioner(entry.preconditioner == PrecondChoice::Exact, &x0)?;
            run_zo_hessian_aware(&mut oracle, &x0, &p, &cfg, Some(wb))?
        }
    };
    Ok(r)
}

/// Runs one method for one seed, resolving white-box steps first.
pub fn execute(
    problem: &Problem,
    noise: &NoiseSpec,
    entry: &MethodEntry,
    seed: u64,
) -> Result<RunOutcome> {
    let wb = problem.white_box();
    let x0 = problem.x0();
    let run = &entry.run;
    let mut step = run.step;
    let mut eta = None;
    if entry.theorem_step {
        let k = rank_for(run.ell);
        let e = match run.method {
            Method::ZoSketch => theorem1_step(problem.hessian_lmax(&x0)?, wb.hessian_trace(&x0), k),
            Method::ZoHessianAware => {
                let p =
                    problem.preconditioner(entry.preconditioner == PrecondChoice::Exact, &x0)?;
                theorem2_step(wb, &x0, &p, k, &RngStream::new(0x5eed, 1))?
            }
            Method::ZoGd => {
                return Err(CliError::Config(format!(
                    "method {}: theorem_step does not apply to zo_gd",
                    entry.name
                )))
            }
        };
        step = StepPolicy::Fixed { eta: e };
        eta = Some(e);
    }
    if let StepPolicy::InverseLmax { lmax: None } = step {
        let l = problem.hessian_lmax(&x0)?;
        step = StepPolicy::InverseLmax { lmax: Some(l) };
        eta = Some(1.0 / l);
    }

    let mut grid = Vec::new();
    let result = match (&entry.step_grid, step) {
        (Some(mults), StepPolicy::InverseLmax { lmax: Some(l) }) => {
            let runs = mults
                .par_iter()
                .map(|m| {
                    let e = m / l;
                    run_once(problem, noise, entry, StepPolicy::Fixed { eta: e }, seed)
                        .map(|r| (r, e))
                })
                .collect::<Result<Vec<_>>>()?;
            let score = |r: &RunResult| {
                let last = r.records.last().expect("runs record x0");
                let s = last.gap.unwrap_or(last.f_value);
                if r.termination_reason == Termination::Numeric || !s.is_finite() {
                    f64::INFINITY
                } else {
                    s
                }
            };
            let mut best: Option<(RunResult, f64)> = None;
            for (r, e) in runs {
                let last = r.records.last().expect("runs record x0");
                grid.push(GridPoint {
                    eta: e,
                    final_gap: last.gap,
                    final_f: last.f_value,
                    termination: r.termination_reason.to_string(),
                });
                if best.as_ref().is_none_or(|(b, _)| score(&r) < score(b)) {
                    best = Some((r, e));
                }
            }
            let (r, e) = best.expect("step grid is non-empty");
            eta = Some(e);
            r
        }
        (Some(_), _) => {
            return Err(CliError::Config(format!(
                "method {}: step_grid needs step = inverse_lmax",
                entry.name
            )))
        }
        (None, step) => run_once(problem, noise, entry, step, seed)?,
    };
    Ok(RunOutcome {
        method: entry.name.clone(),
        seed,
        result,
        eta,
        grid,
    })
}

fn fmt_opt(v: Option<f64>) -> String {
    v.map(|x| format!("{x:e}")).unwrap_or_default()
}

pub fn write_records_csv(path: &Path, records: &[IterRecord]) -> Result<()> {
    let mut w = csv::Writer::from_path(path).map_err(|e| match e.into_kind() {
        csv::ErrorKind::Io(io) => CliError::io(path, io),
        other => CliError::Config(format!("{other:?}")),
    })?;
    w.write_record(["iter", "queries", "f_value", "gap", "eta", "tau"])?;
    for r in records {
        w.write_record([
            r.iter.to_string(),
            r.queries.to_string(),
            format!("{:e}", r.f_value),
            fmt_opt(r.gap),
            fmt_opt(r.eta),
            fmt_opt(r.tau),
        ])?;
    }
    w.flush().map_err(|e| CliError::io(path, e))?;
    Ok(())
}

pub fn csv_name(method: &str, seed: u64) -> String {
    format!("{method}__seed{seed}.csv")
}

fn create_dir(p: &Path) -> Result<()> {
    fs::create_dir_all(p).map_err(|e| CliError::io(p, e))
}

/// Executes every (method, seed) pair and writes CSVs, the summary and the
/// resolved config under `cfg.output`.
pub fn cmd_run(cfg: &ExperimentConfig) -> Result<ExperimentSummary> {
    cfg.validate()?;
    cfg.require_methods()?;
    let problem = Problem::build(&cfg.problem)?;

    let jobs: Vec<(&MethodEntry, u64)> = cfg
        .methods
        .iter()
        .flat_map(|m| cfg.seeds.iter().map(move |&s| (m, s)))
        .collect();
    let work = || -> Vec<Result<RunOutcome>> {
        jobs.par_iter()
            .map(|(m, s)| execute(&problem, &cfg.noise, m, *s))
            .collect()
    };
    let outcomes = match cfg.threads {
        Some(n) => rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build()
            .map_err(|e| CliError::Config(e.to_string()))?
            .install(work),
        None => work(),
    };
    let outcomes: Vec<RunOutcome> = outcomes.into_iter().collect::<Result<_>>()?;

    // Single collector: all files are written here, in job order.
    let runs_dir = cfg.output.join(RUNS_DIR);
    create_dir(&runs_dir)?;
    let resolved = cfg.output.join(RESOLVED_CONFIG);
    fs::write(&resolved, cfg.to_toml()?).map_err(|e| CliError::io(&resolved, e))?;

    let mut methods = Vec::new();
    for entry in &cfg.methods {
        let mut runs = Vec::new();
        for o in outcomes.iter().filter(|o| o.method == entry.name) {
            let name = csv_name(&o.method, o.seed);
            write_records_csv(&runs_dir.join(&name), &o.result.records)?;
            let first = o.result.records.first().expect("runs record x0");
            let last = o.result.records.last().expect("runs record x0");
            runs.push(RunSummary {
                seed: o.seed,
                csv: format!("{RUNS_DIR}/{name}"),
                total_queries: o.result.total_queries,
                iterations: last.iter,
                termination: o.result.termination_reason.to_string(),
                initial_gap: first.gap,
                final_gap: last.gap,
                final_f: last.f_value,
                queries_to_target: cfg
                    .gap_targets
                    .iter()
                    .map(|&t| (target_key(t), queries_to_target(&o.result.records, t)))
                    .collect(),
                eta: o.eta,
                step_grid: o.grid.clone(),
            });
        }
        let median_queries_to_target = cfg
            .gap_targets
            .iter()
            .map(|&t| {
                let key = target_key(t);
                let v = runs
                    .iter()
                    .map(|r| r.queries_to_target[&key].map_or(f64::INFINITY, |q| q as f64))
                    .collect();
                (key, median(v))
            })
            .collect();
        let median_final_gap = median(runs.iter().filter_map(|r| r.final_gap).collect());
        let sketched = entry.run.method != Method::ZoGd;
        methods.push(MethodSummary {
            name: entry.name.clone(),
            method: entry.run.method.to_string(),
            sketch: sketched.then(|| entry.run.sketch.to_string()),
            ell: sketched.then_some(entry.run.ell),
            runs,
            median_queries_to_target,
            median_final_gap,
        });
    }

    let summary = ExperimentSummary {
        schema_version: SCHEMA_VERSION,
        problem: problem.summary(),
        noise: cfg.noise,
        gap_targets: cfg.gap_targets.clone(),
        methods,
    };
    let path = cfg.output.join(SUMMARY);
    fs::write(&path, serde_json::to_string_pretty(&summary)? + "\n")
        .map_err(|e| CliError::io(&path, e))?;
    Ok(summary)
}

/// `run` plus a cross-method table (also written as `compare.csv`).
pub fn cmd_compare(cfg: &ExperimentConfig) -> Result<(ExperimentSummary, String)> {
    let summary = cmd_run(cfg)?;
    let path: PathBuf = cfg.output.join("compare.csv");
    let mut w = csv::Writer::from_path(&path).map_err(|e| match e.into_kind() {
        csv::ErrorKind::Io(io) => CliError::io(&path, io),
        other => CliError::Config(format!("{other:?}")),
    })?;
    let mut header = vec!["method".to_string()];
    header.extend(
        cfg.gap_targets
            .iter()
            .map(|t| format!("queries_to_{}", target_key(*t))),
    );
    header.push("median_final_gap".into());
    w.write_record(&header)?;

    let mut table = String::new();
    let _ = write!(table, "{:<20}", "method");
    for t in &cfg.gap_targets {
        let _ = write!(table, "{:>16}", format!("q@{}", target_key(*t)));
    }
    let _ = writeln!(table, "{:>16}", "final gap");
    for m in &summary.methods {
        let mut row = vec![m.name.clone()];
        let _ = write!(table, "{:<20}", m.name);
        for t in &cfg.gap_targets {
            let q = m.median_queries_to_target[&target_key(*t)];
            row.push(fmt_opt(q));
            let _ = write!(
                table,
                "{:>16}",
                q.map_or("-".to_string(), |q| format!("{q:.0}"))
            );
        }
        row.push(fmt_opt(m.median_final_gap));
        let _ = writeln!(
            table,
            "{:>16}",
            m.median_final_gap
                .map_or("-".to_string(), |g| format!("{g:.3e}"))
        );
        w.write_record(&row)?;
    }
    w.flush().map_err(|e| CliError::io(&path, e))?;
    Ok((summary, table))
}
