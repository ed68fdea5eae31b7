//! End-to-end pipeline and experiment protocols.
//!
//! Output layout under `--out <dir>`:
//!
//! ```text
//! series.csv  stats.json  splits.json          ingest
//! treatment.csv  treatment.json                treatment
//! counterfactual.csv  counterfactual.csv.meta.json   synth
//! checkpoint.json  train_log.json  train_log.csv  report.json   train
//! eval_report.json                             eval
//! benchmark.{csv,json}  ablation.{csv,json}  lag_sweep.{csv,json}
//! runs/<row>/seed<k>/{train_log.json,report.json}
//! plots/*.svg                                  plot
//! ```

use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::baselines::{BaselineModel, Variant};
use crate::checkpoint::{AnyModel, Checkpoint};
use crate::config::{DataSource, ExperimentConfig, ModelKind};
use crate::error::{KgcmError, Result};
use crate::ingest::{load_series, spatial_average, standardize, GriddedField, StandardizationStats, TimeSeriesFrame, DEFAULT_SCHEMA};
use crate::model::KgcmModel;
use crate::objectives::EvalReport;
use crate::synthetic::{gen_counterfactual_centered, generate_base_frame, write_counterfactual_csv, SynthOutput};
use crate::train::{evaluate, train, TrainLog};
use crate::treatment::{build_treatment, ModulatedSeries, TransitionCenter, TreatmentConfig};
use crate::windowing::{build_windows, windows_checksum, OutcomeTrack, WindowedSample};

pub(crate) fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let text = serde_json::to_string_pretty(value)?;
    fs::write(path, text + "\n").map_err(|e| KgcmError::io(path, e))
}

/// Reads a JSON document.
pub fn read_json<T: for<'de> Deserialize<'de>>(path: &Path) -> Result<T> {
    let text = fs::read_to_string(path).map_err(|e| KgcmError::io(path, e))?;
    Ok(serde_json::from_str(&text)?)
}

fn ensure_dir(dir: &Path) -> Result<()> {
    fs::create_dir_all(dir).map_err(|e| KgcmError::io(dir, e))
}

/// The raw daily series named by the config.
pub fn load_frame(cfg: &ExperimentConfig) -> Result<TimeSeriesFrame> {
    match &cfg.source {
        DataSource::Synthetic { length, start, seed } => generate_base_frame(*length, *start, *seed),
        DataSource::Csv(path) => load_series(path, &DEFAULT_SCHEMA),
    }
}

/// Synthetic counterfactual outcomes aligned with the full series.
#[derive(Debug, Clone, PartialEq)]
pub struct SynthTrack {
    pub track: OutcomeTrack,
    /// Generator output over rows `lag..T`.
    pub output: SynthOutput,
    pub lag: usize,
}

/// Everything a run needs, built from one config and lag.
#[derive(Debug, Clone, PartialEq)]
pub struct Prepared {
    pub raw: TimeSeriesFrame,
    /// Standardized with training-split statistics.
    pub frame: TimeSeriesFrame,
    pub stats: StandardizationStats,
    /// Train, validation and test row counts.
    pub lengths: (usize, usize, usize),
    pub treatment: ModulatedSeries,
    pub synth: Option<SynthTrack>,
    pub lag: usize,
    pub train: Vec<WindowedSample>,
    pub val: Vec<WindowedSample>,
    pub test: Vec<WindowedSample>,
}

impl Prepared {
    pub fn n_covariates(&self) -> usize {
        self.frame.n_features()
    }

    pub fn outcome_index(&self, cfg: &ExperimentConfig) -> Result<usize> {
        self.frame
            .column_index(&cfg.window.outcome)
            .ok_or_else(|| KgcmError::Data(format!("missing column '{}'", cfg.window.outcome)))
    }

    /// Window counts per split.
    pub fn window_counts(&self) -> [usize; 3] {
        [self.train.len(), self.val.len(), self.test.len()]
    }
}

fn slice_treatment(t: &ModulatedSeries, a: usize, b: usize) -> ModulatedSeries {
    ModulatedSeries {
        ssh_smooth: t.ssh_smooth[a..b].to_vec(),
        v_smooth: t.v_smooth[a..b].to_vec(),
        sigma: t.sigma[a..b].to_vec(),
        ssh_treat: t.ssh_treat[a..b].to_vec(),
        group_label: t.group_label[a..b].to_vec(),
        v0: t.v0,
    }
}

fn standardized(cfg: &ExperimentConfig) -> Result<(TimeSeriesFrame, TimeSeriesFrame, StandardizationStats, (usize, usize, usize))> {
    let raw = load_frame(cfg)?;
    let lengths = cfg.split.lengths(raw.len())?;
    let need = cfg.window.min_segment_len();
    for (name, len) in [("train", lengths.0), ("val", lengths.1), ("test", lengths.2)] {
        if len < need {
            return Err(KgcmError::Data(format!("{name} segment has {len} rows, need at least {need}")));
        }
    }
    let (_, stats) = standardize(&raw.slice(0, lengths.0), None)?;
    let (frame, _) = standardize(&raw, Some(&stats))?;
    Ok((raw, frame, stats, lengths))
}

/// Modulated treatment of a standardized frame. `v_shift` is added to the
/// total velocity before modulation; the transition center is resolved on
/// the unshifted training rows.
pub fn treatment_for(
    frame: &TimeSeriesFrame,
    cfg: &ExperimentConfig,
    train_len: usize,
    v_shift: f64,
) -> Result<ModulatedSeries> {
    let ssh = frame.column(&cfg.window.treatment)?;
    let vtot = frame.column("vtot")?;
    let base = build_treatment(&ssh, &vtot, train_len, &cfg.treatment)?;
    if v_shift == 0.0 {
        return Ok(base);
    }
    let shifted: Vec<f64> = vtot.iter().map(|v| v + v_shift).collect();
    let fixed = TreatmentConfig {
        transition_center: TransitionCenter::Value(base.v0),
        ..cfg.treatment.clone()
    };
    build_treatment(&ssh, &shifted, train_len, &fixed)
}

/// Counterfactual outcomes for `lag`: row `s` responds to the treatment
/// difference at `s - lag`, centered on its training-rows mean.
pub fn synth_track(
    frame: &TimeSeriesFrame,
    treat: &ModulatedSeries,
    cfg: &ExperimentConfig,
    train_len: usize,
    lag: usize,
) -> Result<Option<SynthTrack>> {
    let Some(scfg) = &cfg.synth else {
        return Ok(None);
    };
    let n = frame.len();
    if lag >= train_len {
        return Err(KgcmError::Data(format!("lag {lag} leaves no training rows")));
    }
    let y0 = frame.column(&cfg.window.outcome)?;
    let t1 = &treat.ssh_treat[..n - lag];
    let t0 = &treat.ssh_smooth[..n - lag];
    let m = train_len - lag;
    let mu_t = (0..m).map(|s| t1[s] - t0[s]).sum::<f64>() / m as f64;
    let output = gen_counterfactual_centered(&y0[lag..], t1, t0, scfg, mu_t)?;
    let mut track = OutcomeTrack {
        y_cf: vec![None; n],
        tau_true: vec![None; n],
    };
    for (k, s) in (lag..n).enumerate() {
        track.y_cf[s] = Some(output.y1[k]);
        track.tau_true[s] = Some(output.tau_true[k]);
    }
    Ok(Some(SynthTrack { track, output, lag }))
}

/// Loads, standardizes, builds the treatment and counterfactuals, and
/// windows each split separately.
pub fn prepare(cfg: &ExperimentConfig, lag: usize) -> Result<Prepared> {
    let (raw, frame, stats, lengths) = standardized(cfg)?;
    let treatment = treatment_for(&frame, cfg, lengths.0, 0.0)?;
    let synth = synth_track(&frame, &treatment, cfg, lengths.0, lag)?;
    let wcfg = crate::windowing::WindowConfig {
        lag,
        ..cfg.window.clone()
    };
    let bounds = [(0, lengths.0), (lengths.0, lengths.0 + lengths.1), (lengths.0 + lengths.1, frame.len())];
    let mut parts = Vec::with_capacity(3);
    for (a, b) in bounds {
        let track = synth.as_ref().map(|s| s.track.slice(a, b));
        parts.push(build_windows(&frame.slice(a, b), &slice_treatment(&treatment, a, b), track.as_ref(), &wcfg)?);
    }
    let test = parts.pop().unwrap();
    let val = parts.pop().unwrap();
    let train = parts.pop().unwrap();
    Ok(Prepared {
        raw,
        frame,
        stats,
        lengths,
        treatment,
        synth,
        lag,
        train,
        val,
        test,
    })
}

/// Test windows under an alternative treatment, without outcomes.
pub fn scenario_windows(cfg: &ExperimentConfig, data: &Prepared, treat: &ModulatedSeries) -> Result<Vec<WindowedSample>> {
    let wcfg = crate::windowing::WindowConfig {
        lag: data.lag,
        ..cfg.window.clone()
    };
    let a = data.lengths.0 + data.lengths.1;
    let b = data.frame.len();
    build_windows(&data.frame.slice(a, b), &slice_treatment(treat, a, b), None, &wcfg)
}

pub fn build_model(cfg: &ExperimentConfig, kind: ModelKind, data: &Prepared, seed: u64) -> Result<AnyModel> {
    let p = data.n_covariates();
    Ok(match kind {
        ModelKind::Kgcm => AnyModel::Kgcm(KgcmModel::new(cfg.kgcm_spec(p, data.outcome_index(cfg)?, seed))?),
        ModelKind::Baseline(v) => AnyModel::Baseline(BaselineModel::new(cfg.baseline_spec(v, p, seed))?),
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunResult {
    pub model: AnyModel,
    pub log: TrainLog,
    pub report: EvalReport,
    pub test_checksum: String,
}

/// Builds, trains and scores one model on prepared data. Every command and
/// protocol goes through here.
pub fn train_and_eval(cfg: &ExperimentConfig, kind: ModelKind, data: &Prepared, seed: u64) -> Result<RunResult> {
    let mut model = build_model(cfg, kind, data, seed)?;
    let log = train(&mut model, &data.train, &data.val, &cfg.train_config(seed))?;
    let report = evaluate(&model, &data.test, data.lag, seed, cfg.echo())?;
    Ok(RunResult {
        model,
        log,
        report,
        test_checksum: windows_checksum(&data.test),
    })
}

pub fn write_log_csv(path: &Path, log: &TrainLog) -> Result<()> {
    let mut w = csv::Writer::from_path(path).map_err(|e| KgcmError::Data(format!("{}: {e}", path.display())))?;
    let err = |e: csv::Error| KgcmError::Data(format!("{}: {e}", path.display()));
    w.write_record(["epoch", "l_pred", "l_kl", "l_mmd", "total", "val_mse", "alpha_kl", "beta_mmd", "mmd_skipped", "grad_norm", "mask_min", "mask_active"])
        .map_err(err)?;
    for e in &log.epochs {
        w.write_record([
            e.epoch.to_string(),
            e.l_pred.to_string(),
            e.l_kl.to_string(),
            e.l_mmd.to_string(),
            e.total.to_string(),
            e.val_mse.to_string(),
            e.alpha_kl.to_string(),
            e.beta_mmd.to_string(),
            e.mmd_skipped.to_string(),
            e.grad_norm.to_string(),
            e.mask_min.map(|v| v.to_string()).unwrap_or_default(),
            e.mask_active.map(|v| v.to_string()).unwrap_or_default(),
        ])
        .map_err(err)?;
    }
    w.flush().map_err(|e| KgcmError::io(path, e))
}

/// `ingest`: loads the series (gridded fields when configured), writes it
/// with the training-split standardization statistics and split bounds.
pub fn run_ingest(cfg: &ExperimentConfig, out: &Path) -> Result<TimeSeriesFrame> {
    ensure_dir(out)?;
    let frame = if cfg.ingest.fields.is_empty() {
        load_frame(cfg)?
    } else {
        let fields = cfg
            .ingest
            .fields
            .iter()
            .map(|(name, path)| Ok((name.clone(), GriddedField::load(path)?)))
            .collect::<Result<Vec<_>>>()?;
        spatial_average(&fields, cfg.ingest.lat_min, cfg.ingest.lat_max, cfg.ingest.weighting)?
    };
    let (a, b, c) = cfg.split.lengths(frame.len())?;
    let (_, stats) = standardize(&frame.slice(0, a), None)?;
    frame.write_csv(&out.join("series.csv"))?;
    write_json(&out.join("stats.json"), &stats)?;
    let d = frame.dates();
    let bound = |lo: usize, hi: usize| serde_json::json!({"rows": hi - lo, "first": d.get(lo), "last": if hi > lo { d.get(hi - 1) } else { None }});
    write_json(
        &out.join("splits.json"),
        &serde_json::json!({"train": bound(0, a), "val": bound(a, a + b), "test": bound(a + b, a + b + c)}),
    )?;
    Ok(frame)
}

/// `treatment`: writes the smoothed and modulated series.
pub fn run_treatment(cfg: &ExperimentConfig, out: &Path) -> Result<ModulatedSeries> {
    ensure_dir(out)?;
    let (_, frame, _, lengths) = standardized(cfg)?;
    let t = treatment_for(&frame, cfg, lengths.0, 0.0)?;
    let path = out.join("treatment.csv");
    let mut w = csv::Writer::from_path(&path).map_err(|e| KgcmError::Data(format!("{}: {e}", path.display())))?;
    let err = |e: csv::Error| KgcmError::Data(e.to_string());
    w.write_record(["date", "ssh_smooth", "v_smooth", "sigma", "ssh_treat", "group"]).map_err(err)?;
    for (i, d) in frame.dates().iter().enumerate() {
        w.write_record([
            d.to_string(),
            t.ssh_smooth[i].to_string(),
            t.v_smooth[i].to_string(),
            t.sigma[i].to_string(),
            t.ssh_treat[i].to_string(),
            t.group_label[i].to_string(),
        ])
        .map_err(err)?;
    }
    w.flush().map_err(|e| KgcmError::io(&path, e))?;
    let group1 = t.group_label.iter().filter(|&&g| g == 1).count();
    write_json(
        &out.join("treatment.json"),
        &serde_json::json!({"v0": t.v0, "rows": t.len(), "group1_rows": group1, "config": cfg.treatment}),
    )?;
    Ok(t)
}

/// `synth`: writes the counterfactual outcome file for the configured lag.
pub fn run_synth(cfg: &ExperimentConfig, out: &Path) -> Result<SynthOutput> {
    ensure_dir(out)?;
    let scfg = cfg
        .synth
        .as_ref()
        .ok_or_else(|| KgcmError::Config("synth.enabled is false".into()))?;
    let (_, frame, _, lengths) = standardized(cfg)?;
    let t = treatment_for(&frame, cfg, lengths.0, 0.0)?;
    let lag = cfg.window.lag;
    let st = synth_track(&frame, &t, cfg, lengths.0, lag)?.expect("synth enabled");
    let n = frame.len();
    let y0 = frame.column(&cfg.window.outcome)?;
    write_counterfactual_csv(
        &out.join("counterfactual.csv"),
        &frame.dates()[lag..],
        &y0[lag..],
        &t.ssh_smooth[..n - lag],
        &t.ssh_treat[..n - lag],
        &st.output,
        scfg,
    )?;
    Ok(st.output)
}

/// `train`: trains the configured model with `seed` and writes the
/// checkpoint, training log and test report.
pub fn run_train(cfg: &ExperimentConfig, out: &Path) -> Result<RunResult> {
    ensure_dir(out)?;
    let data = prepare(cfg, cfg.window.lag)?;
    let run = train_and_eval(cfg, cfg.model.kind, &data, cfg.seed)?;
    Checkpoint::new(run.model.clone(), cfg.seed, cfg.echo()).save(&out.join("checkpoint.json"))?;
    write_json(&out.join("train_log.json"), &run.log)?;
    write_log_csv(&out.join("train_log.csv"), &run.log)?;
    write_json(&out.join("report.json"), &run.report)?;
    Ok(run)
}

pub fn checkpoint_path(cfg: &ExperimentConfig, out: &Path) -> PathBuf {
    cfg.checkpoint.clone().unwrap_or_else(|| out.join("checkpoint.json"))
}

/// `eval`: scores a checkpoint on the test windows.
pub fn run_eval(cfg: &ExperimentConfig, checkpoint: &Path, out: &Path) -> Result<EvalReport> {
    ensure_dir(out)?;
    let ck = Checkpoint::load(checkpoint)?;
    let data = prepare(cfg, cfg.window.lag)?;
    if ck.model.n_covariates() != data.n_covariates() {
        return Err(KgcmError::Config(format!(
            "checkpoint expects {} covariates, data has {}",
            ck.model.n_covariates(),
            data.n_covariates()
        )));
    }
    let report = evaluate(&ck.model, &data.test, data.lag, ck.seed, cfg.echo())?;
    write_json(&out.join("eval_report.json"), &report)?;
    Ok(report)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SeedResult {
    pub seed: u64,
    pub rmse: f64,
    pub pehe: Option<f64>,
    pub pehe_zero: Option<f64>,
    pub latent_mmd2: f64,
    pub epochs: usize,
    pub best_epoch: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProtocolRow {
    pub label: String,
    pub rmse_mean: f64,
    pub rmse_sd: f64,
    pub pehe_mean: Option<f64>,
    pub pehe_sd: Option<f64>,
    pub pehe_zero_mean: Option<f64>,
    pub latent_mmd2_mean: f64,
    pub latent_mmd2_sd: f64,
    pub lag: usize,
    /// Train, validation and test windows.
    pub window_counts: [usize; 3],
    pub test_checksum: String,
    pub seeds: Vec<SeedResult>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProtocolTable {
    pub protocol: String,
    pub rows: Vec<ProtocolRow>,
}

/// Mean and sample standard deviation (0 for a single value).
pub fn mean_sd(xs: &[f64]) -> (f64, f64) {
    let n = xs.len() as f64;
    let mean = xs.iter().sum::<f64>() / n;
    if xs.len() < 2 {
        return (mean, 0.0);
    }
    let var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0);
    (mean, var.sqrt())
}

fn run_row(
    cfg: &ExperimentConfig,
    kind: ModelKind,
    data: &Prepared,
    label: &str,
    out: Option<&Path>,
) -> Result<ProtocolRow> {
    let mut seeds = Vec::with_capacity(cfg.seeds.len());
    let mut checksum = String::new();
    for &seed in &cfg.seeds {
        let run = train_and_eval(cfg, kind, data, seed)?;
        if let Some(dir) = out {
            let d = dir.join("runs").join(label).join(format!("seed{seed}"));
            ensure_dir(&d)?;
            write_json(&d.join("train_log.json"), &run.log)?;
            write_json(&d.join("report.json"), &run.report)?;
        }
        checksum = run.test_checksum;
        seeds.push(SeedResult {
            seed,
            rmse: run.report.rmse,
            pehe: run.report.pehe,
            pehe_zero: run.report.pehe_zero,
            latent_mmd2: run.report.latent_mmd2,
            epochs: run.log.epochs.len(),
            best_epoch: run.log.best_epoch,
        });
    }
    let col = |f: &dyn Fn(&SeedResult) -> Option<f64>| -> Option<Vec<f64>> { seeds.iter().map(f).collect() };
    let (rmse_mean, rmse_sd) = mean_sd(&col(&|s| Some(s.rmse)).unwrap());
    let (mmd_mean, mmd_sd) = mean_sd(&col(&|s| Some(s.latent_mmd2)).unwrap());
    let pehe = col(&|s| s.pehe).map(|v| mean_sd(&v));
    let pehe_zero = col(&|s| s.pehe_zero).map(|v| mean_sd(&v).0);
    Ok(ProtocolRow {
        label: label.to_string(),
        rmse_mean,
        rmse_sd,
        pehe_mean: pehe.map(|p| p.0),
        pehe_sd: pehe.map(|p| p.1),
        pehe_zero_mean: pehe_zero,
        latent_mmd2_mean: mmd_mean,
        latent_mmd2_sd: mmd_sd,
        lag: data.lag,
        window_counts: data.window_counts(),
        test_checksum: checksum,
        seeds,
    })
}

impl ProtocolTable {
    pub fn write_csv(&self, path: &Path) -> Result<()> {
        let mut w = csv::Writer::from_path(path).map_err(|e| KgcmError::Data(format!("{}: {e}", path.display())))?;
        let err = |e: csv::Error| KgcmError::Data(e.to_string());
        let opt = |v: Option<f64>| v.map(|x| x.to_string()).unwrap_or_default();
        w.write_record([
            "label", "lag", "rmse_mean", "rmse_sd", "pehe_mean", "pehe_sd", "pehe_zero_mean", "latent_mmd2_mean",
            "latent_mmd2_sd", "n_train", "n_val", "n_test", "seeds",
        ])
        .map_err(err)?;
        for r in &self.rows {
            let seeds: Vec<String> = r.seeds.iter().map(|s| s.seed.to_string()).collect();
            w.write_record([
                r.label.clone(),
                r.lag.to_string(),
                r.rmse_mean.to_string(),
                r.rmse_sd.to_string(),
                opt(r.pehe_mean),
                opt(r.pehe_sd),
                opt(r.pehe_zero_mean),
                r.latent_mmd2_mean.to_string(),
                r.latent_mmd2_sd.to_string(),
                r.window_counts[0].to_string(),
                r.window_counts[1].to_string(),
                r.window_counts[2].to_string(),
                seeds.join(" "),
            ])
            .map_err(err)?;
        }
        w.flush().map_err(|e| KgcmError::io(path, e))
    }

    pub fn write(&self, out: &Path) -> Result<()> {
        ensure_dir(out)?;
        write_json(&out.join(format!("{}.json", self.protocol)), self)?;
        self.write_csv(&out.join(format!("{}.csv", self.protocol)))
    }

    /// `label  rmse mean±sd  pehe mean±sd` lines.
    pub fn render(&self) -> String {
        let mut s = format!("{:<14} {:>20} {:>24}\n", self.protocol, "rmse", "pehe");
        for r in &self.rows {
            let pehe = match (r.pehe_mean, r.pehe_sd) {
                (Some(m), Some(sd)) => format!("{m:.4} ± {sd:.4}"),
                _ => "n/a".into(),
            };
            s += &format!("{:<14} {:>20} {:>24}\n", r.label, format!("{:.4} ± {:.4}", r.rmse_mean, r.rmse_sd), pehe);
        }
        s
    }
}

/// Four models at lag 1 on shared splits and seeds.
pub fn run_benchmark(cfg: &ExperimentConfig, out: Option<&Path>) -> Result<ProtocolTable> {
    let data = prepare(cfg, 1)?;
    let kinds = [
        ModelKind::Kgcm,
        ModelKind::Baseline(Variant::RTarnet),
        ModelKind::Baseline(Variant::CfRnn),
        ModelKind::Baseline(Variant::RCrn),
    ];
    let mut rows = Vec::with_capacity(4);
    for kind in kinds {
        rows.push(run_row(cfg, kind, &data, kind.name(), out)?);
    }
    if rows.iter().any(|r| r.test_checksum != rows[0].test_checksum) {
        return Err(KgcmError::Data("models were scored on different test windows".into()));
    }
    let table = ProtocolTable {
        protocol: "benchmark".into(),
        rows,
    };
    if let Some(dir) = out {
        table.write(dir)?;
    }
    Ok(table)
}

/// (MMD on/off) x (adjacency on/off) grid of the main model.
pub fn run_ablation(cfg: &ExperimentConfig, out: Option<&Path>) -> Result<ProtocolTable> {
    let data = prepare(cfg, cfg.window.lag)?;
    let beta_on = cfg.train.weights.beta_mmd.to_string();
    let cells = [
        ("mmd_on_adj_on", beta_on.as_str(), "true"),
        ("mmd_off_adj_on", "0", "true"),
        ("mmd_on_adj_off", beta_on.as_str(), "false"),
        ("mmd_off_adj_off", "0", "false"),
    ];
    let mut rows = Vec::with_capacity(4);
    for (label, beta, adj) in cells {
        let cell = cfg.with(&format!("loss.beta_mmd={beta}"))?.with(&format!("model.adjacency={adj}"))?;
        rows.push(run_row(&cell, ModelKind::Kgcm, &data, label, out)?);
    }
    let table = ProtocolTable {
        protocol: "ablation".into(),
        rows,
    };
    if let Some(dir) = out {
        table.write(dir)?;
    }
    Ok(table)
}

/// Full pipeline per lag, one row each.
pub fn run_lag_sweep(cfg: &ExperimentConfig, lags: &[usize], out: Option<&Path>) -> Result<ProtocolTable> {
    let mut rows = Vec::with_capacity(lags.len());
    for &lag in lags {
        let data = prepare(cfg, lag)?;
        rows.push(run_row(cfg, ModelKind::Kgcm, &data, &format!("lag_{lag}"), out)?);
    }
    let table = ProtocolTable {
        protocol: "lag_sweep".into(),
        rows,
    };
    if let Some(dir) = out {
        table.write(dir)?;
    }
    Ok(table)
}

/// Loads a protocol table written by [`ProtocolTable::write`].
pub fn load_table(path: &Path) -> Result<ProtocolTable> {
    read_json(path)
}
