//! Static SVG figures.

use std::path::{Path, PathBuf};

use plotters::prelude::*;

use crate::checkpoint::Checkpoint;
use crate::config::ExperimentConfig;
use crate::error::{KgcmError, Result};
use crate::experiment::{checkpoint_path, prepare, read_json, scenario_windows, treatment_for};
use crate::train::{CausalModel, TrainLog};

const PALETTE: [RGBColor; 5] = [
    RGBColor(31, 119, 180),
    RGBColor(214, 39, 40),
    RGBColor(44, 160, 44),
    RGBColor(148, 103, 189),
    RGBColor(127, 127, 127),
];

fn plot_err(path: &Path, e: impl std::fmt::Display) -> KgcmError {
    KgcmError::Plot(format!("{}: {e}", path.display()))
}

/// Line chart of several named series sharing `x`.
pub fn line_chart(path: &Path, title: &str, x_label: &str, x: &[f64], series: &[(&str, Vec<f64>)]) -> Result<()> {
    if x.is_empty() || series.is_empty() {
        return Err(KgcmError::InvalidArgument(format!("{}: nothing to plot", path.display())));
    }
    let finite = series.iter().flat_map(|(_, v)| v.iter().copied()).filter(|v| v.is_finite());
    let (lo, hi) = finite.fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), v| (a.min(v), b.max(v)));
    let pad = if hi > lo { 0.05 * (hi - lo) } else { 1.0 };
    let (x0, x1) = (x[0], x[x.len() - 1].max(x[0] + 1.0));

    let root = SVGBackend::new(path, (900, 420)).into_drawing_area();
    root.fill(&WHITE).map_err(|e| plot_err(path, e))?;
    let mut chart = ChartBuilder::on(&root)
        .caption(title, ("sans-serif", 20))
        .margin(12)
        .x_label_area_size(36)
        .y_label_area_size(64)
        .build_cartesian_2d(x0..x1, (lo - pad)..(hi + pad))
        .map_err(|e| plot_err(path, e))?;
    chart
        .configure_mesh()
        .x_desc(x_label)
        .light_line_style(WHITE)
        .draw()
        .map_err(|e| plot_err(path, e))?;
    for (k, (name, ys)) in series.iter().enumerate() {
        let color = PALETTE[k % PALETTE.len()];
        chart
            .draw_series(LineSeries::new(x.iter().copied().zip(ys.iter().copied()), color.stroke_width(2)))
            .map_err(|e| plot_err(path, e))?
            .label(*name)
            .legend(move |(px, py)| PathElement::new(vec![(px, py), (px + 18, py)], color.stroke_width(2)));
    }
    chart
        .configure_series_labels()
        .background_style(WHITE.mix(0.85))
        .border_style(BLACK)
        .draw()
        .map_err(|e| plot_err(path, e))?;
    root.present().map_err(|e| plot_err(path, e))?;
    Ok(())
}

/// Training-loss curves and the latent MMD trajectory from a training log.
pub fn plot_training(log: &TrainLog, dir: &Path) -> Result<Vec<PathBuf>> {
    let x: Vec<f64> = log.epochs.iter().map(|e| e.epoch as f64).collect();
    let col = |f: fn(&crate::train::EpochLog) -> f64| log.epochs.iter().map(f).collect::<Vec<_>>();
    let losses = dir.join("loss_curves.svg");
    line_chart(
        &losses,
        "training losses",
        "epoch",
        &x,
        &[
            ("l_pred", col(|e| e.l_pred)),
            ("total", col(|e| e.total)),
            ("val mse", col(|e| e.val_mse)),
        ],
    )?;
    let kl = dir.join("kl_curve.svg");
    line_chart(&kl, "KL term", "epoch", &x, &[("l_kl", col(|e| e.l_kl))])?;
    let mmd = dir.join("latent_mmd.svg");
    line_chart(&mmd, "latent MMD^2 between groups", "epoch", &x, &[("l_mmd", col(|e| e.l_mmd))])?;
    Ok(vec![losses, kl, mmd])
}

/// Treatment and predicted outcome panels for one scenario over the test
/// period: `ssh` uses the configured modulation, `velocity` shifts the total
/// velocity before modulation.
pub fn plot_scenario<M: CausalModel>(
    cfg: &ExperimentConfig,
    model: &M,
    scenario: &str,
    dir: &Path,
) -> Result<Vec<PathBuf>> {
    let data = prepare(cfg, cfg.window.lag)?;
    let shift = match scenario {
        "ssh" => 0.0,
        "velocity" => cfg.velocity_shift,
        s => return Err(KgcmError::Config(format!("unknown scenario '{s}'"))),
    };
    let treat = treatment_for(&data.frame, cfg, data.lengths.0, shift)?;
    let windows = scenario_windows(cfg, &data, &treat)?;
    let refs: Vec<_> = windows.iter().collect();
    let (y1, y2, _) = model.predict(&refs)?;
    let x: Vec<f64> = windows.iter().map(|s| s.anchor_t as f64).collect();
    let t1: Vec<f64> = windows.iter().map(|s| *s.t1_hist.last().unwrap()).collect();
    let t2: Vec<f64> = windows.iter().map(|s| *s.t2_hist.last().unwrap()).collect();
    let observed: Vec<f64> = windows.iter().map(|s| s.y1).collect();
    let tp = dir.join(format!("{scenario}_treatment.svg"));
    line_chart(
        &tp,
        &format!("{scenario}-perturbed treatment"),
        "test day",
        &x,
        &[("factual", t1), ("perturbed", t2)],
    )?;
    let op = dir.join(format!("{scenario}_outcome.svg"));
    line_chart(
        &op,
        &format!("{scenario}-perturbed outcome"),
        "test day",
        &x,
        &[("observed", observed), ("predicted factual", y1), ("predicted counterfactual", y2)],
    )?;
    Ok(vec![tp, op])
}

/// Writes every figure under `<out>/plots`. Needs `train_log.json` and the
/// checkpoint of a finished `train` run. No scenarios means no files.
pub fn emit_plots(cfg: &ExperimentConfig, out: &Path) -> Result<Vec<PathBuf>> {
    if cfg.scenarios.is_empty() {
        return Ok(Vec::new());
    }
    let log_path = out.join("train_log.json");
    if !log_path.exists() {
        return Err(KgcmError::Data(format!("missing report {}", log_path.display())));
    }
    let ck_path = checkpoint_path(cfg, out);
    if !ck_path.exists() {
        return Err(KgcmError::Data(format!("missing checkpoint {}", ck_path.display())));
    }
    let log: TrainLog = read_json(&log_path)?;
    let ck = Checkpoint::load(&ck_path)?;
    let dir = out.join("plots");
    std::fs::create_dir_all(&dir).map_err(|e| KgcmError::io(&dir, e))?;
    let mut files = plot_training(&log, &dir)?;
    for s in &cfg.scenarios {
        files.extend(plot_scenario(cfg, &ck.model, s, &dir)?);
    }
    Ok(files)
}
