use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use kgcm::config::ExperimentConfig;
use kgcm::experiment;
use kgcm::plot::emit_plots;

#[derive(Parser)]
#[command(name = "kgcm", version, about = "Treatment-effect experiments on sea-ice thickness")]
struct Cli {
    #[command(subcommand)]
    command: Command,
    /// Config file of `key = value` lines.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Override one setting, e.g. `--set train.lr=0.01`. Repeatable.
    #[arg(long = "set", global = true, value_name = "KEY=VALUE")]
    set: Vec<String>,
    /// Output directory.
    #[arg(long, global = true, default_value = "out")]
    out: PathBuf,
}

#[derive(Subcommand)]
enum Command {
    /// Load (or spatially average) the daily series and write it with split info.
    Ingest,
    /// Write the smoothed and modulated treatment series.
    Treatment,
    /// Write synthetic counterfactual outcomes.
    Synth,
    /// Train the configured model and write checkpoint, log and test report.
    Train,
    /// Score a checkpoint on the test windows.
    Eval,
    /// Four models at lag 1 over the seed list.
    Benchmark,
    /// MMD x adjacency ablation grid.
    Ablate,
    /// One row per lag in `protocol.lags`.
    LagSweep,
    /// SVG figures from a finished `train` run.
    Plot,
    /// Print every config key with its default.
    Schema,
}

fn run(cli: Cli) -> kgcm::Result<()> {
    if let Command::Schema = cli.command {
        for (k, d, help) in kgcm::config::SCHEMA {
            println!("{k:<26} {d:<14} {help}");
        }
        return Ok(());
    }
    let cfg = ExperimentConfig::load(cli.config.as_deref(), &cli.set)?;
    let out = cli.out.as_path();
    match cli.command {
        Command::Ingest => {
            let f = experiment::run_ingest(&cfg, out)?;
            println!("{} rows x {} features -> {}", f.len(), f.n_features(), out.join("series.csv").display());
        }
        Command::Treatment => {
            let t = experiment::run_treatment(&cfg, out)?;
            println!("v0 = {:.6}; wrote {}", t.v0, out.join("treatment.csv").display());
        }
        Command::Synth => {
            let s = experiment::run_synth(&cfg, out)?;
            println!("mu_T = {:.6}; {} rows -> {}", s.mu_t, s.y1.len(), out.join("counterfactual.csv").display());
        }
        Command::Train => {
            let run = experiment::run_train(&cfg, out)?;
            println!("{}", serde_json::to_string_pretty(&run.report)?);
        }
        Command::Eval => {
            let ck = experiment::checkpoint_path(&cfg, out);
            let report = experiment::run_eval(&cfg, &ck, out)?;
            println!("{}", serde_json::to_string_pretty(&report)?);
        }
        Command::Benchmark => print!("{}", experiment::run_benchmark(&cfg, Some(out))?.render()),
        Command::Ablate => print!("{}", experiment::run_ablation(&cfg, Some(out))?.render()),
        Command::LagSweep => print!("{}", experiment::run_lag_sweep(&cfg, &cfg.lags, Some(out))?.render()),
        Command::Plot => {
            let files = emit_plots(&cfg, out)?;
            if files.is_empty() {
                println!("no scenarios configured; nothing plotted");
            }
            for f in files {
                println!("{}", f.display());
            }
        }
        Command::Schema => unreachable!(),
    }
    Ok(())
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
