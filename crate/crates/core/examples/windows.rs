//! Sliding windows per split and lag, and seeded minibatching.
//!
//! cargo run --example windows -- [key=value ...]

use kgcm::config::ExperimentConfig;
use kgcm::experiment::prepare;
use kgcm::windowing::{batch, Trajectory};

fn main() -> kgcm::Result<()> {
    let overrides: Vec<String> = std::env::args().skip(1).collect();
    let cfg = ExperimentConfig::load(None, &overrides)?;
    let w = &cfg.window;
    for lag in [1, 3, 6, 9] {
        let data = prepare(&cfg, lag)?;
        let (a, b, c) = data.lengths;
        let formula = |len: usize| len - w.lead - (w.lookback + lag - 1);
        println!(
            "lag {lag}: rows {:?} -> windows {:?} (formula {:?})",
            (a, b, c),
            data.window_counts(),
            [formula(a), formula(b), formula(c)]
        );
    }

    let data = prepare(&cfg, w.lag)?;
    let s = &data.train[0];
    println!("first training window: anchor t = {}, x_hist {:?}", s.anchor_t, s.x_hist.dim());
    println!("  encoder input (factual) {:?}", s.encoder_input(Trajectory::Factual).dim());
    println!("  decoder input (factual)        {:?}", s.decoder_input(Trajectory::Factual));
    println!("  decoder input (counterfactual) {:?}", s.decoder_input(Trajectory::Counterfactual));
    println!("  y1 {:.4}  y2 {:?}  ite {:?}  group {}", s.y1, s.y2, s.ite_true, s.group_label);

    let order = batch(10, 4, Some(7))?;
    println!("10 samples, batch 4, seed 7: {order:?}");
    println!("unshuffled: {:?}", batch(10, 4, None)?);
    Ok(())
}
