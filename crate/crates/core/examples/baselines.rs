//! The three recurrent baselines next to the main model on one dataset.
//!
//! cargo run --release --example baselines -- [key=value ...]

use kgcm::baselines::Variant;
use kgcm::config::{ExperimentConfig, ModelKind};
use kgcm::experiment::{prepare, train_and_eval};

fn main() -> kgcm::Result<()> {
    let mut overrides = vec!["data.length=800".to_string(), "train.max_epochs=30".to_string()];
    overrides.extend(std::env::args().skip(1));
    let cfg = ExperimentConfig::load(None, &overrides)?;
    let data = prepare(&cfg, 1)?;
    let mut kinds = vec![ModelKind::Kgcm];
    kinds.extend(Variant::ALL.iter().map(|&v| ModelKind::Baseline(v)));
    println!("{:<10} {:>7} {:>9} {:>10} {:>8}", "model", "epochs", "rmse", "pehe/zero", "mmd2");
    for kind in kinds {
        let run = train_and_eval(&cfg, kind, &data, cfg.seed)?;
        let r = &run.report;
        let ratio = r.pehe.zip(r.pehe_zero).map(|(p, z)| p / z).unwrap_or(f64::NAN);
        println!(
            "{:<10} {:>7} {:>9.4} {:>10.3} {:>8.4}",
            kind.name(),
            run.log.epochs.len(),
            r.rmse,
            ratio,
            r.latent_mmd2
        );
    }
    Ok(())
}
