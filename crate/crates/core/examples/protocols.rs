//! Benchmark table, ablation grid and lag sweep at a reduced size.
//!
//! cargo run --release --example protocols -- [key=value ...]
//! Pass e.g. `data.length=2000 train.max_epochs=200` for the full setting.

use kgcm::config::ExperimentConfig;
use kgcm::experiment::{run_ablation, run_benchmark, run_lag_sweep};

fn main() -> kgcm::Result<()> {
    let mut overrides = vec!["data.length=600".to_string(), "train.max_epochs=10".to_string()];
    overrides.extend(std::env::args().skip(1));
    let cfg = ExperimentConfig::load(None, &overrides)?;
    let out = std::env::temp_dir().join("kgcm-protocols");
    print!("{}", run_benchmark(&cfg, Some(&out))?.render());
    println!();
    print!("{}", run_ablation(&cfg, Some(&out))?.render());
    println!();
    let sweep = run_lag_sweep(&cfg, &cfg.lags, Some(&out))?;
    print!("{}", sweep.render());
    for r in &sweep.rows {
        println!("lag {} windows {:?}", r.lag, r.window_counts);
    }
    println!("tables and per-run logs under {}", out.display());
    Ok(())
}
