//! Training curves and scenario panels as SVG.
//!
//! cargo run --release --example plots

use kgcm::config::ExperimentConfig;
use kgcm::experiment::run_train;
use kgcm::plot::emit_plots;

fn main() -> kgcm::Result<()> {
    let cfg = ExperimentConfig::with_overrides(&["data.length=600", "train.max_epochs=15"])?;
    let out = std::env::temp_dir().join("kgcm-plots");
    run_train(&cfg, &out)?;
    for f in emit_plots(&cfg, &out)? {
        println!("{}", f.display());
    }
    Ok(())
}
