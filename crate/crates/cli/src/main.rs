// SPDX-License-Identifier: Apache-2.0

use clap::{Args, Parser, Subcommand};
use heavydp_cli::{calibrate, run, summarize, CliError, ExperimentConfig, Mode};
use std::path::PathBuf;
use std::process::ExitCode;

#[derive(Parser)]
#[command(name = "heavydp", version, about = "Private mean estimation and SGD benchmarks")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Mean-estimation error over a parameter grid.
    MeanBench(RunArgs),
    /// Excess risk of private SGD on quadratic problems over a parameter grid.
    OptBench(RunArgs),
    /// Print per-step privacy budgets.
    Calibrate(CalibrateArgs),
    /// Per-cell quantiles of a results file.
    Summarize(SummarizeArgs),
}

#[derive(Args)]
struct RunArgs {
    /// Config file of `key = value` lines.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    seed: Option<String>,
    /// Output directory.
    #[arg(long)]
    out: Option<String>,
    #[arg(long)]
    reps: Option<String>,
    /// Worker threads.
    #[arg(long)]
    jobs: Option<String>,
    /// Comma-separated sample sizes.
    #[arg(long)]
    n: Option<String>,
    #[arg(long)]
    d: Option<String>,
    #[arg(long)]
    p: Option<String>,
    #[arg(long)]
    eps: Option<String>,
    #[arg(long)]
    delta: Option<String>,
    /// `simple`, `iterative` or both, comma-separated.
    #[arg(long)]
    estimator: Option<String>,
    /// `gaussian`, `student`, `pareto`, comma-separated.
    #[arg(long)]
    family: Option<String>,
    #[arg(long)]
    k: Option<String>,
    #[arg(long)]
    tc: Option<String>,
    #[arg(long)]
    radius_mult: Option<String>,
    /// Write 0 in the wall_ms column so repeated runs are byte-identical.
    #[arg(long)]
    no_wall_time: bool,
}

impl RunArgs {
    fn into_config(self, mode: Mode) -> Result<ExperimentConfig, CliError> {
        let mut cfg = ExperimentConfig::new(mode);
        if let Some(path) = &self.config {
            cfg.apply_file(path)?;
        }
        let overrides = [
            ("seed", self.seed),
            ("out", self.out),
            ("reps", self.reps),
            ("jobs", self.jobs),
            ("n", self.n),
            ("d", self.d),
            ("p", self.p),
            ("eps", self.eps),
            ("delta", self.delta),
            ("estimator", self.estimator),
            ("family", self.family),
            ("k", self.k),
            ("tc", self.tc),
            ("radius_mult", self.radius_mult),
        ];
        for (key, value) in overrides {
            if let Some(v) = value {
                cfg.set(key, &v)?;
            }
        }
        if self.no_wall_time {
            cfg.record_wall_time = false;
        }
        cfg.validate()?;
        Ok(cfg)
    }
}

#[derive(Args)]
struct CalibrateArgs {
    #[arg(long)]
    eps: f64,
    #[arg(long)]
    delta: f64,
    /// Number of steps T.
    #[arg(long, default_value_t = 1)]
    steps: usize,
    /// Group count of the iterative estimator.
    #[arg(long)]
    k: Option<usize>,
}

#[derive(Args)]
struct SummarizeArgs {
    /// results.csv to read.
    input: PathBuf,
    /// Where to write the summary; defaults to summary.csv beside the input.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Comma-separated quantiles in (0, 1).
    #[arg(long, value_delimiter = ',', default_value = "0.1,0.5,0.9")]
    quantiles: Vec<f64>,
}

fn bench(mode: Mode, args: RunArgs) -> ExitCode {
    let cfg = match args.into_config(mode) {
        Ok(c) => c,
        Err(e) => {
            eprintln!("error: {e}");
            return ExitCode::from(1);
        }
    };
    match run(&cfg) {
        Ok(s) => {
            println!(
                "{} rows ({} ok, {} skipped, {} failed) written to {}",
                s.rows,
                s.ok,
                s.skipped,
                s.failed,
                cfg.out.display()
            );
            if s.failed > 0 {
                ExitCode::from(2)
            } else {
                ExitCode::SUCCESS
            }
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(1)
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match cli.command {
        Command::MeanBench(args) => bench(Mode::MeanBench, args),
        Command::OptBench(args) => bench(Mode::OptBench, args),
        Command::Calibrate(a) => match calibrate(a.eps, a.delta, a.steps, a.k) {
            Ok(text) => {
                print!("{text}");
                ExitCode::SUCCESS
            }
            Err(e) => {
                eprintln!("error: {e}");
                ExitCode::from(1)
            }
        },
        Command::Summarize(a) => {
            let out = a
                .out
                .unwrap_or_else(|| a.input.with_file_name("summary.csv"));
            match summarize(&a.input, &out, &a.quantiles) {
                Ok(cells) => {
                    println!("{} cells written to {}", cells.len(), out.display());
                    ExitCode::SUCCESS
                }
                Err(e) => {
                    eprintln!("error: {e}");
                    ExitCode::from(1)
                }
            }
        }
    }
}
