use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use zosketch::oracle::DecayKind;
use zosketch::sketch::SketchKind;
use zosketch_cli::config::parse_seed_range;
use zosketch_cli::{
    cmd_compare, cmd_gen_quadratic, cmd_run, cmd_spectrum, cmd_trace_check, CliError,
    ExperimentConfig, ExperimentSummary, Overrides, Result,
};

#[derive(Parser)]
#[command(
    name = "zosketch",
    version,
    about = "Sketched zeroth-order optimization experiments"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Write a regenerable quadratic problem file.
    GenQuadratic {
        #[arg(long)]
        d: usize,
        /// exp, exp:<rate>, poly_inv or poly_inv_sqrt
        #[arg(long, default_value = "exp")]
        decay: DecayKind,
        #[arg(long, default_value_t = 1e-4)]
        ridge: f64,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        out: PathBuf,
    },
    /// Hessian eigenvalues (CSV) and trace/lmax summary (JSON).
    Spectrum {
        #[command(flatten)]
        common: Common,
        /// Only estimate trace and lmax; needed past the dense-solve cap.
        #[arg(long)]
        summary_only: bool,
    },
    /// Execute every (method, seed) pair of a config.
    Run(Common),
    /// Monte-Carlo accuracy of the trace estimator.
    TraceCheck(Common),
    /// `run` plus a cross-method table.
    Compare(Common),
}

#[derive(Args)]
struct Common {
    #[arg(long)]
    config: PathBuf,
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long, conflicts_with = "seeds")]
    seed: Option<u64>,
    /// Half-open range N..M (or N..=M).
    #[arg(long)]
    seeds: Option<String>,
    /// Query budget applied to every method.
    #[arg(long)]
    budget: Option<u64>,
    /// Keep only these methods (by name or method kind).
    #[arg(long = "method")]
    methods: Vec<String>,
    #[arg(long)]
    sketch: Option<SketchKind>,
    #[arg(long)]
    ell: Option<usize>,
    #[arg(long)]
    alpha: Option<f64>,
    #[arg(long)]
    threads: Option<usize>,
}

impl Common {
    fn load(&self) -> Result<ExperimentConfig> {
        let mut cfg = ExperimentConfig::load(&self.config)?;
        let seeds = match (&self.seeds, self.seed) {
            (Some(r), _) => Some(parse_seed_range(r)?),
            (None, Some(s)) => Some(vec![s]),
            (None, None) => None,
        };
        cfg.apply(&Overrides {
            out: self.out.clone(),
            seeds,
            budget: self.budget,
            methods: self.methods.clone(),
            sketch: self.sketch,
            ell: self.ell,
            alpha: self.alpha,
            threads: self.threads,
        })?;
        Ok(cfg)
    }
}

fn check_runs(summary: &ExperimentSummary) -> Result<()> {
    let failed = summary.numeric_failures();
    if failed.is_empty() {
        return Ok(());
    }
    let list: Vec<String> = failed.iter().map(|(m, s)| format!("{m}/seed{s}")).collect();
    Err(CliError::Numeric(format!(
        "runs diverged: {}",
        list.join(", ")
    )))
}

fn dispatch(cli: Cli) -> Result<()> {
    match cli.command {
        Command::GenQuadratic {
            d,
            decay,
            ridge,
            seed,
            out,
        } => {
            let f = cmd_gen_quadratic(d, decay, ridge, seed, &out)?;
            println!(
                "wrote {} (trace {:.6}, lambda_max {:.6})",
                out.display(),
                f.trace,
                f.lambda_max
            );
        }
        Command::Spectrum {
            common,
            summary_only,
        } => {
            let cfg = common.load()?;
            let s = cmd_spectrum(&cfg, summary_only)?;
            println!(
                "trace {:.6}  lmax {:.6}  ratio {:.4}",
                s.trace, s.lmax, s.ratio
            );
        }
        Command::Run(common) => {
            let cfg = common.load()?;
            let summary = cmd_run(&cfg)?;
            println!("wrote {}", cfg.output.display());
            check_runs(&summary)?;
        }
        Command::TraceCheck(common) => {
            let cfg = common.load()?;
            let r = cmd_trace_check(&cfg)?;
            println!("true trace {:.6}", r.true_trace);
            for c in &r.cells {
                println!(
                    "{:<11} ell={:<4} success={:.3} mean_rel_err={:.4}",
                    c.kind.as_str(),
                    c.ell,
                    c.success_fraction,
                    c.mean_relative_error
                );
            }
        }
        Command::Compare(common) => {
            let cfg = common.load()?;
            let (summary, table) = cmd_compare(&cfg)?;
            print!("{table}");
            check_runs(&summary)?;
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    match dispatch(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
