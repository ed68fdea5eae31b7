//! Finite-difference checks of the three loss terms against the analytic
//! gradients of the full model.
//!
//! cargo run --release --example grad_check

use kgcm::config::ExperimentConfig;
use kgcm::experiment::prepare;
use kgcm::model::KgcmModel;
use kgcm::objectives::{grad_check, MmdConfig};
use kgcm::train::{term_gradient, CausalModel, LossTerm};

fn main() -> kgcm::Result<()> {
    let cfg = ExperimentConfig::with_overrides(&["data.length=400"])?;
    let data = prepare(&cfg, 1)?;
    let model = KgcmModel::new(cfg.kgcm_spec(data.n_covariates(), data.outcome_index(&cfg)?, 0))?;
    let batch: Vec<_> = data.train.iter().step_by(9).take(16).collect();
    let mmd = MmdConfig::default();
    let flat = model.params().flatten();
    println!("{} parameters", flat.len());
    for term in [LossTerm::Pred, LossTerm::Kl, LossTerm::Mmd] {
        let (value, grad) = term_gradient(&model, &batch, 1, &mmd, term)?;
        let loss = |x: &[f64]| {
            let mut m = model.clone();
            m.params_mut().unflatten(x);
            term_gradient(&m, &batch, 1, &mmd, term).map(|r| r.0).unwrap_or(f64::NAN)
        };
        let r = grad_check(loss, &flat, &grad, 20, 3, 1e-4)?;
        let nonzero = r.analytic.iter().filter(|g| **g != 0.0).count();
        println!(
            "{term:?}: value {value:.6}, max rel error {:.2e} over {} probes ({nonzero} with nonzero gradient), passed {}",
            r.max_rel_error,
            r.coords.len(),
            r.passed
        );
    }
    Ok(())
}
