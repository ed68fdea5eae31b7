//! Train, save a checkpoint, reload it and score it again.
//!
//! cargo run --release --example checkpoint

use kgcm::checkpoint::Checkpoint;
use kgcm::config::ExperimentConfig;
use kgcm::experiment::{run_eval, run_train};

fn main() -> kgcm::Result<()> {
    let cfg = ExperimentConfig::with_overrides(&["data.length=400", "train.max_epochs=5"])?;
    let out = std::env::temp_dir().join("kgcm-checkpoint-example");
    let run = run_train(&cfg, &out)?;
    let path = out.join("checkpoint.json");
    let ck = Checkpoint::load(&path)?;
    println!("{}: format {} v{}, kind {}, seed {}", path.display(), ck.format, ck.version, ck.kind, ck.seed);
    println!("reloaded model equals trained model: {}", ck.model == run.model);
    let report = run_eval(&cfg, &path, &out)?;
    println!("train-time report == reloaded report: {}", report == run.report);
    println!("{}", serde_json::to_string_pretty(&report)?);
    Ok(())
}
