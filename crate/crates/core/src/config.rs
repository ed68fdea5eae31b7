//! Flat `key = value` experiment configuration.
//!
//! One setting per line, dotted keys, `#` starts a comment. Lists are
//! comma-separated. Unknown keys are rejected before any work starts.
//!
//! ```text
//! data.length = 2000
//! treatment.v0 = median
//! seeds = 0, 1, 2
//! ```

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use chrono::NaiveDate;
use serde::{Deserialize, Serialize};

use crate::baselines::{BaselineSpec, Variant};
use crate::error::{KgcmError, Result};
use crate::ingest::{AreaWeighting, SplitFractions};
use crate::model::{KgcmSpec, MaskMode, MaskSettings};
use crate::objectives::{Bandwidth, LossWeights, MmdConfig};
use crate::synthetic::SynthConfig;
use crate::train::TrainConfig;
use crate::treatment::{TransitionCenter, TreatmentConfig, CORIOLIS_ARCTIC, GRAVITY, RHO_ICE, RHO_SNOW, RHO_WATER};
use crate::windowing::WindowConfig;

/// `(key, default, description)` for every accepted key.
pub const SCHEMA: &[(&str, &str, &str)] = &[
    ("data.source", "synthetic", "synthetic | csv"),
    ("data.path", "", "daily CSV with date,sit,ssh,u,v,vtot (csv source)"),
    ("data.length", "2000", "days generated by the synthetic source"),
    ("data.start", "2020-01-01", "first date of the synthetic source"),
    ("data.seed", "0", "seed of the synthetic base series"),
    ("split.train", "0.7", "train fraction"),
    ("split.val", "0.15", "validation fraction"),
    ("split.test", "0.15", "test fraction"),
    ("ingest.fields", "", "gridded inputs as name=path pairs"),
    ("ingest.lat_min", "60", "southern latitude bound"),
    ("ingest.lat_max", "90", "northern latitude bound"),
    ("ingest.weighting", "unweighted", "unweighted | coslat"),
    ("treatment.smooth_window", "7", "moving-average width in days"),
    ("treatment.a", "10", "logistic steepness"),
    ("treatment.v0", "median", "transition velocity or 'median' of training rows"),
    ("treatment.beta_mod", "0.1", "amplification strength"),
    ("knowledge.rho_w", "1024", "sea-water density"),
    ("knowledge.rho_i", "917", "ice density"),
    ("knowledge.rho_s", "320", "snow density"),
    ("knowledge.g", "9.81", "gravity"),
    ("knowledge.f", "1.4e-4", "Coriolis parameter"),
    ("synth.enabled", "true", "generate counterfactual outcomes"),
    ("synth.alpha", "2", "effect steepness"),
    ("synth.beta_eff", "0.5", "effect amplitude"),
    ("synth.noise_sd", "0.05", "outcome noise"),
    ("synth.seed", "0", "noise seed"),
    ("window.lookback", "14", "history length L"),
    ("window.lead", "1", "prediction horizon n"),
    ("window.lag", "1", "treatment lag"),
    ("window.outcome", "sit", "outcome column"),
    ("window.treatment", "ssh", "treatment column"),
    ("model.kind", "kgcm", "kgcm | r_tarnet | cf_rnn | r_crn"),
    ("model.encoder_hidden", "64", "encoder GRU width per direction"),
    ("model.latent_dim", "32", "latent size"),
    ("model.decoder_hidden", "16", "decoder GRU width"),
    ("model.mask_mode", "soft", "soft | hard"),
    ("model.mask_threshold", "0.5", "hard-mask threshold"),
    ("model.adjacency", "true", "false replaces the mask with ones"),
    ("model.l1_penalty", "0", "L1 weight on the mask (extension)"),
    ("baseline.trunk_hidden", "64", "baseline GRU width per direction"),
    ("baseline.head_hidden", "32", "baseline head width"),
    ("baseline.balance_weight", "1", "r_crn MMD weight"),
    ("baseline.tied_heads", "false", "r_tarnet heads start identical"),
    ("loss.alpha_kl", "0.01", "KL weight"),
    ("loss.beta_mmd", "1", "MMD weight"),
    ("loss.bandwidth", "median", "RBF width or 'median'"),
    ("train.lr", "1e-3", "Adam learning rate"),
    ("train.batch_size", "64", "minibatch size"),
    ("train.max_epochs", "200", "epoch cap"),
    ("train.patience", "20", "early-stop patience"),
    ("train.clip_norm", "5", "gradient-norm clip, 0 disables"),
    ("train.shuffle_seed", "0", "base seed of minibatch order"),
    ("seed", "0", "seed of single train/eval runs"),
    ("seeds", "0,1,2", "seed list of protocol runs"),
    ("protocol.lags", "3,6,9", "lags of the lag sweep"),
    ("eval.checkpoint", "", "checkpoint path (default <out>/checkpoint.json)"),
    ("plot.scenarios", "ssh,velocity", "perturbation scenarios to plot"),
    ("plot.velocity_shift", "1", "velocity perturbation in standardized units"),
];

/// Raw key-value settings, defaults filled in.
#[derive(Debug, Clone, PartialEq)]
pub struct RawConfig {
    values: BTreeMap<String, String>,
}

fn known(key: &str) -> bool {
    SCHEMA.iter().any(|(k, _, _)| *k == key)
}

fn parse_line(line: &str, lineno: usize, origin: &str) -> Result<Option<(String, String)>> {
    let body = line.split('#').next().unwrap_or("").trim();
    if body.is_empty() {
        return Ok(None);
    }
    let (k, v) = body
        .split_once('=')
        .ok_or_else(|| KgcmError::Config(format!("{origin}:{lineno}: expected key = value")))?;
    let key = k.trim().to_string();
    if !known(&key) {
        return Err(KgcmError::Config(format!("{origin}:{lineno}: unknown key '{key}'")));
    }
    Ok(Some((key, v.trim().to_string())))
}

impl Default for RawConfig {
    fn default() -> Self {
        Self {
            values: SCHEMA.iter().map(|(k, d, _)| (k.to_string(), d.to_string())).collect(),
        }
    }
}

impl RawConfig {
    pub fn parse_str(text: &str, origin: &str) -> Result<Self> {
        let mut cfg = Self::default();
        for (i, line) in text.lines().enumerate() {
            if let Some((k, v)) = parse_line(line, i + 1, origin)? {
                cfg.values.insert(k, v);
            }
        }
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| KgcmError::Config(format!("{}: {e}", path.display())))?;
        Self::parse_str(&text, &path.display().to_string())
    }

    /// Applies a `key=value` override.
    pub fn set(&mut self, assignment: &str) -> Result<()> {
        match parse_line(assignment, 1, "--set")? {
            Some((k, v)) => {
                self.values.insert(k, v);
                Ok(())
            }
            None => Err(KgcmError::Config("empty --set".into())),
        }
    }

    pub fn get(&self, key: &str) -> &str {
        self.values.get(key).map(String::as_str).unwrap_or("")
    }

    pub fn to_json(&self) -> serde_json::Value {
        serde_json::to_value(&self.values).unwrap()
    }

    /// The settings as config-file text.
    pub fn to_text(&self) -> String {
        self.values.iter().map(|(k, v)| format!("{k} = {v}\n")).collect()
    }

    fn num<T: std::str::FromStr>(&self, key: &str) -> Result<T> {
        self.get(key)
            .parse()
            .map_err(|_| KgcmError::Config(format!("{key}: cannot parse '{}'", self.get(key))))
    }

    fn flag(&self, key: &str) -> Result<bool> {
        match self.get(key) {
            "true" | "1" | "yes" | "on" => Ok(true),
            "false" | "0" | "no" | "off" => Ok(false),
            v => Err(KgcmError::Config(format!("{key}: expected a boolean, got '{v}'"))),
        }
    }

    fn list<T: std::str::FromStr>(&self, key: &str) -> Result<Vec<T>> {
        self.get(key)
            .split(',')
            .map(str::trim)
            .filter(|s| !s.is_empty())
            .map(|s| s.parse().map_err(|_| KgcmError::Config(format!("{key}: cannot parse '{s}'"))))
            .collect()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum DataSource {
    Synthetic { length: usize, start: NaiveDate, seed: u64 },
    Csv(PathBuf),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ModelKind {
    Kgcm,
    Baseline(Variant),
}

impl ModelKind {
    pub fn name(self) -> &'static str {
        match self {
            ModelKind::Kgcm => "kgcm",
            ModelKind::Baseline(v) => v.name(),
        }
    }

    pub fn parse(s: &str) -> Result<Self> {
        if s == "kgcm" {
            Ok(ModelKind::Kgcm)
        } else {
            Ok(ModelKind::Baseline(s.parse()?))
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KnowledgeConfig {
    pub rho_w: f64,
    pub rho_i: f64,
    pub rho_s: f64,
    pub g: f64,
    pub f: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IngestConfig {
    pub fields: Vec<(String, PathBuf)>,
    pub lat_min: f64,
    pub lat_max: f64,
    pub weighting: AreaWeighting,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelConfig {
    pub kind: ModelKind,
    pub encoder_hidden: usize,
    pub latent_dim: usize,
    pub decoder_hidden: usize,
    pub mask: MaskSettings,
    pub trunk_hidden: usize,
    pub head_hidden: usize,
    pub balance_weight: f64,
    pub tied_heads: bool,
}

/// Validated experiment settings.
#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentConfig {
    pub raw: RawConfig,
    pub source: DataSource,
    pub split: SplitFractions,
    pub ingest: IngestConfig,
    pub treatment: TreatmentConfig,
    pub knowledge: KnowledgeConfig,
    /// `None` in real-data mode.
    pub synth: Option<SynthConfig>,
    pub window: WindowConfig,
    pub model: ModelConfig,
    pub train: TrainConfig,
    pub shuffle_seed: u64,
    pub seed: u64,
    pub seeds: Vec<u64>,
    pub lags: Vec<usize>,
    pub checkpoint: Option<PathBuf>,
    pub scenarios: Vec<String>,
    pub velocity_shift: f64,
}

impl ExperimentConfig {
    pub fn from_raw(raw: RawConfig) -> Result<Self> {
        let source = match raw.get("data.source") {
            "synthetic" => DataSource::Synthetic {
                length: raw.num("data.length")?,
                start: NaiveDate::parse_from_str(raw.get("data.start"), "%Y-%m-%d")
                    .map_err(|_| KgcmError::Config(format!("data.start: bad date '{}'", raw.get("data.start"))))?,
                seed: raw.num("data.seed")?,
            },
            "csv" => {
                if raw.get("data.path").is_empty() {
                    return Err(KgcmError::Config("data.path is required for csv source".into()));
                }
                DataSource::Csv(PathBuf::from(raw.get("data.path")))
            }
            other => return Err(KgcmError::Config(format!("data.source: unknown '{other}'"))),
        };
        let split = SplitFractions {
            train: raw.num("split.train")?,
            val: raw.num("split.val")?,
            test: raw.num("split.test")?,
        };
        split.lengths(100)?;
        let fields = raw
            .list::<String>("ingest.fields")?
            .into_iter()
            .map(|pair| {
                pair.split_once('=')
                    .map(|(n, p)| (n.trim().to_string(), PathBuf::from(p.trim())))
                    .ok_or_else(|| KgcmError::Config(format!("ingest.fields: expected name=path, got '{pair}'")))
            })
            .collect::<Result<Vec<_>>>()?;
        let weighting = match raw.get("ingest.weighting") {
            "unweighted" => AreaWeighting::Unweighted,
            "coslat" => AreaWeighting::CosLatitude,
            w => return Err(KgcmError::Config(format!("ingest.weighting: unknown '{w}'"))),
        };
        let ingest = IngestConfig {
            fields,
            lat_min: raw.num("ingest.lat_min")?,
            lat_max: raw.num("ingest.lat_max")?,
            weighting,
        };
        let treatment = TreatmentConfig {
            smooth_window: raw.num("treatment.smooth_window")?,
            steepness: raw.num("treatment.a")?,
            transition_center: match raw.get("treatment.v0") {
                "median" => TransitionCenter::Median,
                _ => TransitionCenter::Value(raw.num("treatment.v0")?),
            },
            beta_mod: raw.num("treatment.beta_mod")?,
        };
        treatment.validate()?;
        let knowledge = KnowledgeConfig {
            rho_w: raw.num("knowledge.rho_w")?,
            rho_i: raw.num("knowledge.rho_i")?,
            rho_s: raw.num("knowledge.rho_s")?,
            g: raw.num("knowledge.g")?,
            f: raw.num("knowledge.f")?,
        };
        if [knowledge.rho_w, knowledge.rho_i, knowledge.rho_s, knowledge.g].iter().any(|v| !(*v > 0.0))
            || knowledge.f == 0.0
            || knowledge.rho_w <= knowledge.rho_i
        {
            return Err(KgcmError::Config("knowledge.*: densities and g must be > 0, f != 0, rho_w > rho_i".into()));
        }
        let synth = if raw.flag("synth.enabled")? {
            let s = SynthConfig {
                alpha: raw.num("synth.alpha")?,
                beta_eff: raw.num("synth.beta_eff")?,
                noise_sd: raw.num("synth.noise_sd")?,
                seed: raw.num("synth.seed")?,
            };
            s.validate()?;
            Some(s)
        } else {
            None
        };
        let window = WindowConfig {
            lookback: raw.num("window.lookback")?,
            lead: raw.num("window.lead")?,
            lag: raw.num("window.lag")?,
            outcome: raw.get("window.outcome").to_string(),
            treatment: raw.get("window.treatment").to_string(),
        };
        window.validate()?;
        let mask = MaskSettings {
            mode: match raw.get("model.mask_mode") {
                "soft" => MaskMode::Soft,
                "hard" => MaskMode::Hard,
                m => return Err(KgcmError::Config(format!("model.mask_mode: unknown '{m}'"))),
            },
            threshold: raw.num("model.mask_threshold")?,
            adjacency: raw.flag("model.adjacency")?,
            pinned_active: Vec::new(),
            pinned_inactive: Vec::new(),
            l1_penalty: raw.num("model.l1_penalty")?,
        };
        if !(mask.threshold > 0.0 && mask.threshold < 1.0) || !(mask.l1_penalty >= 0.0) {
            return Err(KgcmError::Config("model.mask_threshold in (0,1), model.l1_penalty >= 0".into()));
        }
        let model = ModelConfig {
            kind: ModelKind::parse(raw.get("model.kind"))?,
            encoder_hidden: raw.num("model.encoder_hidden")?,
            latent_dim: raw.num("model.latent_dim")?,
            decoder_hidden: raw.num("model.decoder_hidden")?,
            mask,
            trunk_hidden: raw.num("baseline.trunk_hidden")?,
            head_hidden: raw.num("baseline.head_hidden")?,
            balance_weight: raw.num("baseline.balance_weight")?,
            tied_heads: raw.flag("baseline.tied_heads")?,
        };
        if [model.encoder_hidden, model.latent_dim, model.decoder_hidden, model.trunk_hidden, model.head_hidden].contains(&0)
            || !(model.balance_weight >= 0.0)
        {
            return Err(KgcmError::Config("model sizes must be >= 1 and baseline.balance_weight >= 0".into()));
        }
        let clip: f64 = raw.num("train.clip_norm")?;
        let train = TrainConfig {
            lr: raw.num("train.lr")?,
            batch_size: raw.num("train.batch_size")?,
            max_epochs: raw.num("train.max_epochs")?,
            patience: raw.num("train.patience")?,
            clip_norm: if clip == 0.0 { None } else { Some(clip) },
            weights: LossWeights {
                alpha_kl: raw.num("loss.alpha_kl")?,
                beta_mmd: raw.num("loss.beta_mmd")?,
            },
            mmd: MmdConfig {
                bandwidth: match raw.get("loss.bandwidth") {
                    "median" => Bandwidth::Median,
                    _ => {
                        let s: f64 = raw.num("loss.bandwidth")?;
                        if !(s > 0.0) {
                            return Err(KgcmError::Config("loss.bandwidth must be > 0".into()));
                        }
                        Bandwidth::Fixed(s)
                    }
                },
            },
            seed: 0,
        };
        train.validate()?;
        let seeds: Vec<u64> = raw.list("seeds")?;
        if seeds.is_empty() {
            return Err(KgcmError::Config("seeds must list at least one seed".into()));
        }
        let lags: Vec<usize> = raw.list("protocol.lags")?;
        if lags.is_empty() || lags.contains(&0) {
            return Err(KgcmError::Config("protocol.lags must list lags >= 1".into()));
        }
        let scenarios: Vec<String> = raw.list("plot.scenarios")?;
        if let Some(s) = scenarios.iter().find(|s| !matches!(s.as_str(), "ssh" | "velocity")) {
            return Err(KgcmError::Config(format!("plot.scenarios: unknown scenario '{s}'")));
        }
        let checkpoint = Some(raw.get("eval.checkpoint")).filter(|s| !s.is_empty()).map(PathBuf::from);
        Ok(Self {
            source,
            split,
            ingest,
            treatment,
            knowledge,
            synth,
            window,
            model,
            train,
            shuffle_seed: raw.num("train.shuffle_seed")?,
            seed: raw.num("seed")?,
            seeds,
            lags,
            checkpoint,
            scenarios,
            velocity_shift: raw.num("plot.velocity_shift")?,
            raw,
        })
    }

    /// Loads a file (or defaults when `None`) and applies `--set` overrides.
    pub fn load(path: Option<&Path>, overrides: &[String]) -> Result<Self> {
        let mut raw = match path {
            Some(p) => RawConfig::load(p)?,
            None => RawConfig::default(),
        };
        for o in overrides {
            raw.set(o)?;
        }
        Self::from_raw(raw)
    }

    /// Defaults with overrides; handy in code.
    pub fn with_overrides(overrides: &[&str]) -> Result<Self> {
        let owned: Vec<String> = overrides.iter().map(|s| s.to_string()).collect();
        Self::load(None, &owned)
    }

    /// A copy with one more override applied.
    pub fn with(&self, assignment: &str) -> Result<Self> {
        let mut raw = self.raw.clone();
        raw.set(assignment)?;
        Self::from_raw(raw)
    }

    /// Trainer settings of a run with the given seed.
    pub fn train_config(&self, seed: u64) -> TrainConfig {
        TrainConfig {
            seed: self.shuffle_seed.wrapping_mul(0x9E37_79B9_7F4A_7C15).wrapping_add(seed),
            ..self.train.clone()
        }
    }

    pub fn kgcm_spec(&self, n_covariates: usize, outcome_index: usize, seed: u64) -> KgcmSpec {
        KgcmSpec {
            n_covariates,
            outcome_index,
            encoder_hidden: self.model.encoder_hidden,
            latent_dim: self.model.latent_dim,
            decoder_hidden: self.model.decoder_hidden,
            mask: self.model.mask.clone(),
            seed,
        }
    }

    pub fn baseline_spec(&self, variant: Variant, n_covariates: usize, seed: u64) -> BaselineSpec {
        BaselineSpec {
            variant,
            n_covariates,
            trunk_hidden: self.model.trunk_hidden,
            head_hidden: self.model.head_hidden,
            balance_weight: self.model.balance_weight,
            tied_heads: self.model.tied_heads,
            seed,
        }
    }

    pub fn echo(&self) -> serde_json::Value {
        self.raw.to_json()
    }
}

impl Default for KnowledgeConfig {
    fn default() -> Self {
        Self {
            rho_w: RHO_WATER,
            rho_i: RHO_ICE,
            rho_s: RHO_SNOW,
            g: GRAVITY,
            f: CORIOLIS_ARCTIC,
        }
    }
}
