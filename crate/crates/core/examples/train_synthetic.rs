//! Trains the main model on a generated dataset and prints the test report.
//!
//! cargo run --release --example train_synthetic -- [key=value ...]

use kgcm::config::{ExperimentConfig, ModelKind};
use kgcm::experiment::{prepare, train_and_eval};

fn main() -> kgcm::Result<()> {
    let overrides: Vec<String> = std::env::args().skip(1).collect();
    let cfg = ExperimentConfig::load(None, &overrides)?;
    let data = prepare(&cfg, cfg.window.lag)?;
    println!("windows train/val/test: {:?}", data.window_counts());
    let start = std::time::Instant::now();
    let run = train_and_eval(&cfg, ModelKind::Kgcm, &data, cfg.seed)?;
    let secs = start.elapsed().as_secs_f64();
    for e in &run.log.epochs {
        println!(
            "epoch {:>3}  l_pred {:.5}  l_kl {:.4}  l_mmd {:.5}  val_mse {:.5}",
            e.epoch, e.l_pred, e.l_kl, e.l_mmd, e.val_mse
        );
    }
    let r = &run.report;
    println!("rmse {:.4}  pehe {:?}  zero-predictor pehe {:?}  latent mmd2 {:.5}", r.rmse, r.pehe, r.pehe_zero, r.latent_mmd2);
    println!("{} epochs in {secs:.1}s", run.log.epochs.len());
    Ok(())
}
