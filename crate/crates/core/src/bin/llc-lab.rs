use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use llc_lab::cli::{self, ReportFormat, RunConfig};
use llc_lab::Error;

#[derive(Parser)]
#[command(name = "llc-lab", version, about = "LLC way allocation with digital twins")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct Common {
    /// Run configuration (JSON). Defaults are used when omitted.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Override the master seed.
    #[arg(long)]
    seed: Option<u64>,
    /// Override the output directory.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Subcommand)]
enum Command {
    /// Sample contexts and measure the twin training data.
    GenData(Common),
    /// Fit the digital twin.
    TrainTwin(Common),
    /// Label classifier contexts by exhaustive search over the twin.
    BuildLabels(Common),
    /// Train the allocation classifier.
    TrainClf(Common),
    /// Benchmark the classifier and baselines on fresh contexts.
    Evaluate(Common),
    /// Run every stage in order.
    RunAll(Common),
    /// Summarize a per-context report CSV.
    Report {
        report: PathBuf,
        #[arg(long, value_enum, default_value = "summary")]
        format: ReportFormat,
    },
}

fn load(c: &Common) -> Result<RunConfig, Error> {
    let mut cfg = match &c.config {
        Some(p) => RunConfig::load(p)?,
        None => RunConfig::default(),
    };
    if let Some(seed) = c.seed {
        cfg.seed = seed;
    }
    if let Some(out) = &c.out {
        cfg.output_dir = out.clone();
    }
    Ok(cfg)
}

fn run(cmd: Command) -> Result<(), Error> {
    match cmd {
        Command::GenData(c) => {
            let ds = cli::cmd_gen_data(&load(&c)?)?;
            eprintln!("gen-data: {} samples", ds.len());
        }
        Command::TrainTwin(c) => {
            let t = cli::cmd_train_twin(&load(&c)?)?;
            eprintln!("train-twin: stopped at {} (test mse {:.5})", t.stopped_at, t.test_mse);
        }
        Command::BuildLabels(c) => {
            let ds = cli::cmd_build_labels(&load(&c)?)?;
            eprintln!("build-labels: {} rows, {} distinct labels", ds.len(), ds.distinct_labels());
        }
        Command::TrainClf(c) => {
            let clf = cli::cmd_train_clf(&load(&c)?)?;
            eprintln!(
                "train-clf: stopped at {}, accuracy {:.3}, regret {:.4}",
                clf.stopped_at, clf.test_accuracy, clf.test_regret
            );
        }
        Command::Evaluate(c) => {
            let r = cli::cmd_evaluate(&load(&c)?)?;
            print!("{}", cli::render_summary(&r.summary));
        }
        Command::RunAll(c) => {
            let s = cli::cmd_run_all(&load(&c)?)?;
            eprintln!("{s:?}");
        }
        Command::Report { report, format } => print!("{}", cli::cmd_report(&report, format)?),
    }
    Ok(())
}

fn main() -> ExitCode {
    match run(Cli::parse().command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
