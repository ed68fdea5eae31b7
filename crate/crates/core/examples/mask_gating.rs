//! The adjacency mask: pinned edges, soft and hard modes, and exact gating
//! of the decoder.
//!
//! cargo run --example mask_gating

use ndarray::Array2;
use kgcm::model::{KgcmModel, KgcmSpec, MaskMode};

fn show(name: &str, m: &Array2<f64>) {
    println!("{name}:");
    for row in m.rows() {
        println!("  {}", row.iter().map(|v| format!("{v:5.2}")).collect::<Vec<_>>().join(" "));
    }
}

fn main() -> kgcm::Result<()> {
    // 5 covariates plus T_t and T_lag; outcome is column 0
    let mut model = KgcmModel::new(KgcmSpec::new(5, 0, 1))?;
    let p = model.spec.n_features();
    for i in 0..p {
        for j in 0..p {
            model.logits_mut()[[i, j]] = ((i * 7 + j * 3) % 9) as f64 - 4.0;
        }
    }
    show("soft mask", &model.mask(MaskMode::Soft));
    let hard = model.mask(MaskMode::Hard);
    show("hard mask", &hard);
    let y = model.spec.outcome_index;
    println!(
        "pinned T_t -> Y = {}, T_lag -> Y = {}",
        hard[[y, model.spec.treatment_index()]],
        hard[[y, model.spec.lagged_treatment_index()]]
    );

    let z = Array2::from_shape_fn((1, model.spec.latent_dim), |(_, k)| (k as f64 * 0.37).sin());
    let x = Array2::from_shape_fn((1, p), |(_, j)| 0.1 * j as f64);
    let base = model.decode(&z, &x, &hard)?;
    for j in 0..p {
        let mut moved = x.clone();
        moved[[0, j]] += 10.0;
        let out = model.decode(&z, &moved, &hard)?;
        let changed: Vec<usize> = (0..p).filter(|&i| out[[0, i]].to_bits() != base[[0, i]].to_bits()).collect();
        let gated: Vec<usize> = (0..p).filter(|&i| hard[[i, j]] == 0.0).collect();
        println!("input {j} + 10 changes units {changed:?}; units gated off from it {gated:?}");
    }
    Ok(())
}
