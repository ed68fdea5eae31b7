//! Shared trainer and evaluation for every model.

use ndarray::Array2;
use rand::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::autodiff::{Tape, Var};
use crate::error::{KgcmError, Result};
use crate::model::{KgcmModel, MaskMode, Mode};
use crate::nn::{Adam, Bound, ParamStore};
use crate::objectives::{grouped_mmd2, kl_on_tape, mmd2_on_tape, pehe, rmse, EvalReport, LossWeights, MmdConfig};
use crate::windowing::{batch, WindowedSample};

/// Tape handles a model hands to the trainer.
#[derive(Debug, Clone, Copy)]
pub struct StepOutputs {
    /// `B x 1` prediction under the factual treatment.
    pub y1: Var,
    /// `B x 1` prediction under the counterfactual treatment.
    pub y2: Var,
    /// Factual-trajectory representation that the balance term acts on.
    pub repr: Var,
    /// KL term, for variational models.
    pub kl: Option<Var>,
    /// Extra scalar penalty added to the total as is.
    pub penalty: Option<Var>,
}

/// What the trainer needs from a model.
pub trait CausalModel {
    fn params(&self) -> &ParamStore;
    fn params_mut(&mut self) -> &mut ParamStore;
    fn step(&self, tape: &mut Tape, bound: &Bound, batch: &[&WindowedSample], mode: Mode) -> Result<StepOutputs>;
    /// Evaluation-mode `(y1_hat, y2_hat, factual representations)`.
    fn predict(&self, samples: &[&WindowedSample]) -> Result<(Vec<f64>, Vec<f64>, Array2<f64>)>;
    /// `(min entry, active count)` of the mask in use, when the model has one.
    fn mask_summary(&self) -> Option<(f64, usize)> {
        None
    }
    /// Loss weights actually applied, given the configured ones.
    fn loss_weights(&self, configured: &LossWeights) -> LossWeights {
        *configured
    }
}

impl CausalModel for KgcmModel {
    fn params(&self) -> &ParamStore {
        &self.params
    }

    fn params_mut(&mut self) -> &mut ParamStore {
        &mut self.params
    }

    fn step(&self, tape: &mut Tape, bound: &Bound, batch: &[&WindowedSample], mode: Mode) -> Result<StepOutputs> {
        let out = self.forward_on_tape(tape, bound, batch, mode)?;
        let b = batch.len();
        let kl = kl_on_tape(tape, out.mu, out.logvar);
        let repr = tape.slice_rows(out.z, 0, b);
        let penalty = if self.spec.mask.l1_penalty > 0.0 && self.spec.mask.adjacency {
            // mask entries are positive, so the L1 norm is the plain sum
            let s = tape.sum(out.mask);
            Some(tape.scale(s, self.spec.mask.l1_penalty))
        } else {
            None
        };
        Ok(StepOutputs {
            y1: out.y1,
            y2: out.y2,
            repr,
            kl: Some(kl),
            penalty,
        })
    }

    fn predict(&self, samples: &[&WindowedSample]) -> Result<(Vec<f64>, Vec<f64>, Array2<f64>)> {
        KgcmModel::predict(self, samples)
    }

    fn mask_summary(&self) -> Option<(f64, usize)> {
        let m = self.effective_mask();
        let min = m.iter().copied().fold(f64::INFINITY, f64::min);
        let active = self.mask(MaskMode::Hard).iter().filter(|&&v| v == 1.0).count();
        Some((min, active))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    pub lr: f64,
    pub batch_size: usize,
    pub max_epochs: usize,
    pub patience: usize,
    pub clip_norm: Option<f64>,
    pub weights: LossWeights,
    pub mmd: MmdConfig,
    /// Seeds minibatch order and reparameterization noise.
    pub seed: u64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            lr: 1e-3,
            batch_size: 64,
            max_epochs: 200,
            patience: 20,
            clip_norm: Some(5.0),
            weights: LossWeights::default(),
            mmd: MmdConfig::default(),
            seed: 0,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        self.weights.validate()?;
        if !(self.lr > 0.0) || self.batch_size == 0 || self.max_epochs == 0 || self.patience == 0 {
            return Err(KgcmError::Config("trainer needs lr > 0 and batch, epochs, patience >= 1".into()));
        }
        if let Some(c) = self.clip_norm {
            if !(c > 0.0) {
                return Err(KgcmError::Config("clip norm must be > 0".into()));
            }
        }
        Ok(())
    }
}

/// Per-epoch means over training batches.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpochLog {
    pub epoch: usize,
    pub l_pred: f64,
    pub l_kl: f64,
    pub l_mmd: f64,
    pub total: f64,
    pub val_mse: f64,
    pub alpha_kl: f64,
    pub beta_mmd: f64,
    /// Batches where one treatment group was empty (MMD skipped).
    pub mmd_skipped: usize,
    pub grad_norm: f64,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub mask_min: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub mask_active: Option<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainLog {
    pub epochs: Vec<EpochLog>,
    pub best_epoch: usize,
    pub best_val_mse: f64,
    pub stopped_early: bool,
    pub steps: usize,
}

fn column(values: Vec<f64>) -> Array2<f64> {
    let n = values.len();
    Array2::from_shape_vec((n, 1), values).unwrap()
}

/// Validation factual MSE in evaluation mode.
pub fn factual_mse<M: CausalModel>(model: &M, samples: &[&WindowedSample]) -> Result<f64> {
    let (y1, _, _) = model.predict(samples)?;
    let n = samples.len() as f64;
    Ok(y1.iter().zip(samples).map(|(p, s)| (p - s.y1).powi(2)).sum::<f64>() / n)
}

struct BatchTerms {
    l_pred: f64,
    l_kl: f64,
    l_mmd: f64,
    total: f64,
    mmd_skipped: bool,
    grads: Vec<Array2<f64>>,
}

/// Tape handles of the three unweighted loss terms for one batch.
struct TermVars {
    l_pred: Var,
    kl: Option<Var>,
    mmd: Option<Var>,
    penalty: Option<Var>,
}

fn term_vars<M: CausalModel>(
    model: &M,
    tape: &mut Tape,
    bound: &Bound,
    batch: &[&WindowedSample],
    noise_seed: u64,
    mmd: &MmdConfig,
) -> Result<TermVars> {
    let out = model.step(tape, bound, batch, Mode::Train { noise_seed })?;
    let y1 = column(batch.iter().map(|s| s.y1).collect());
    let mut l_pred = tape.mse(out.y1, y1);
    if batch.iter().all(|s| s.y2.is_some()) {
        let y2 = column(batch.iter().map(|s| s.y2.unwrap()).collect());
        let l2 = tape.mse(out.y2, y2);
        l_pred = tape.add(l_pred, l2);
    }
    let labels: Vec<u8> = batch.iter().map(|s| s.group_label).collect();
    Ok(TermVars {
        l_pred,
        kl: out.kl,
        mmd: mmd2_on_tape(tape, out.repr, &labels, mmd)?,
        penalty: out.penalty,
    })
}

fn batch_terms<M: CausalModel>(
    model: &M,
    cfg: &TrainConfig,
    batch: &[&WindowedSample],
    noise_seed: u64,
) -> Result<BatchTerms> {
    let weights = model.loss_weights(&cfg.weights);
    let mut tape = Tape::new();
    let bound = model.params().bind(&mut tape);
    let v = term_vars(model, &mut tape, &bound, batch, noise_seed, &cfg.mmd)?;
    let mut total = v.l_pred;
    let mut l_kl = 0.0;
    if let Some(kl) = v.kl {
        l_kl = tape.scalar(kl);
        let w = tape.scale(kl, weights.alpha_kl);
        total = tape.add(total, w);
    }
    let mut l_mmd = 0.0;
    let mmd_skipped = v.mmd.is_none();
    if let Some(mmd) = v.mmd {
        l_mmd = tape.scalar(mmd);
        let w = tape.scale(mmd, weights.beta_mmd);
        total = tape.add(total, w);
    }
    if let Some(pen) = v.penalty {
        total = tape.add(total, pen);
    }
    let grads = tape.backward(total);
    Ok(BatchTerms {
        l_pred: tape.scalar(v.l_pred),
        l_kl,
        l_mmd,
        total: tape.scalar(total),
        mmd_skipped,
        grads: model.params().collect_grads(&bound, &grads),
    })
}

/// One unweighted term of the training objective.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LossTerm {
    Pred,
    Kl,
    Mmd,
}

/// Value of one loss term on a batch and its gradient with respect to the
/// flattened parameters (order of [`ParamStore::flatten`]). The sampling
/// noise is fixed by `noise_seed`, so the value is a deterministic function
/// of the parameters.
pub fn term_gradient<M: CausalModel>(
    model: &M,
    batch: &[&WindowedSample],
    noise_seed: u64,
    mmd: &MmdConfig,
    term: LossTerm,
) -> Result<(f64, Vec<f64>)> {
    let mut tape = Tape::new();
    let bound = model.params().bind(&mut tape);
    let v = term_vars(model, &mut tape, &bound, batch, noise_seed, mmd)?;
    let var = match term {
        LossTerm::Pred => v.l_pred,
        LossTerm::Kl => v.kl.ok_or_else(|| KgcmError::InvalidArgument("model has no KL term".into()))?,
        LossTerm::Mmd => v.mmd.ok_or_else(|| KgcmError::InvalidArgument("batch has an empty group".into()))?,
    };
    let grads = tape.backward(var);
    let flat = model.params().collect_grads(&bound, &grads).iter().flat_map(|g| g.iter().copied()).collect();
    Ok((tape.scalar(var), flat))
}

/// Keeps glibc from returning freed tape buffers to the OS after every step.
fn tune_allocator() {
    #[cfg(all(target_os = "linux", target_env = "gnu"))]
    {
        static ONCE: std::sync::Once = std::sync::Once::new();
        ONCE.call_once(|| unsafe {
            libc::mallopt(libc::M_MMAP_THRESHOLD, 32 << 20);
            libc::mallopt(libc::M_TRIM_THRESHOLD, i32::MAX);
            libc::mallopt(libc::M_TOP_PAD, 256 << 20);
        });
    }
}

/// Minibatch training with early stopping on validation factual MSE. The
/// best parameters are restored at the end.
pub fn train<M: CausalModel>(
    model: &mut M,
    train_set: &[WindowedSample],
    val_set: &[WindowedSample],
    cfg: &TrainConfig,
) -> Result<TrainLog> {
    cfg.validate()?;
    tune_allocator();
    if train_set.is_empty() || val_set.is_empty() {
        return Err(KgcmError::Data("training and validation sets must be non-empty".into()));
    }
    let val: Vec<&WindowedSample> = val_set.iter().collect();
    let mut adam = Adam::new(model.params(), cfg.lr, cfg.clip_norm);
    let mut noise = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut log = TrainLog {
        epochs: Vec::new(),
        best_epoch: 0,
        best_val_mse: f64::INFINITY,
        stopped_early: false,
        steps: 0,
    };
    let weights = model.loss_weights(&cfg.weights);
    let mut best = model.params().clone();
    let mut since_best = 0;
    for epoch in 0..cfg.max_epochs {
        let order = batch(train_set.len(), cfg.batch_size, Some(cfg.seed.wrapping_add(epoch as u64)))?;
        let (mut sp, mut sk, mut sm, mut st, mut sg) = (0.0, 0.0, 0.0, 0.0, 0.0);
        let mut mmd_rows = 0usize;
        let mut skipped = 0;
        for idx in &order {
            let rows: Vec<&WindowedSample> = idx.iter().map(|&i| &train_set[i]).collect();
            let mut t = batch_terms(model, cfg, &rows, noise.next_u64())?;
            if !t.total.is_finite() {
                return Err(KgcmError::Divergence {
                    epoch,
                    msg: format!("non-finite loss (l_pred {}, l_kl {}, l_mmd {})", t.l_pred, t.l_kl, t.l_mmd),
                });
            }
            let norm = adam.update(model.params_mut(), &mut t.grads);
            if !norm.is_finite() {
                return Err(KgcmError::Divergence {
                    epoch,
                    msg: "non-finite gradient".into(),
                });
            }
            log.steps += 1;
            let w = rows.len() as f64;
            sp += w * t.l_pred;
            sk += w * t.l_kl;
            st += w * t.total;
            sg += norm;
            if t.mmd_skipped {
                skipped += 1;
            } else {
                sm += w * t.l_mmd;
                mmd_rows += rows.len();
            }
        }
        let n = train_set.len() as f64;
        let val_mse = factual_mse(model, &val)?;
        if !val_mse.is_finite() {
            return Err(KgcmError::Divergence {
                epoch,
                msg: "non-finite validation loss".into(),
            });
        }
        let mask = model.mask_summary();
        log.epochs.push(EpochLog {
            epoch,
            l_pred: sp / n,
            l_kl: sk / n,
            l_mmd: if mmd_rows > 0 { sm / mmd_rows as f64 } else { 0.0 },
            total: st / n,
            val_mse,
            alpha_kl: weights.alpha_kl,
            beta_mmd: weights.beta_mmd,
            mmd_skipped: skipped,
            grad_norm: sg / order.len() as f64,
            mask_min: mask.map(|m| m.0),
            mask_active: mask.map(|m| m.1),
        });
        if val_mse < log.best_val_mse {
            log.best_val_mse = val_mse;
            log.best_epoch = epoch;
            best = model.params().clone();
            since_best = 0;
        } else {
            since_best += 1;
            if since_best >= cfg.patience {
                log.stopped_early = true;
                break;
            }
        }
    }
    *model.params_mut() = best;
    Ok(log)
}

/// Scores a model on `samples`; every model goes through this function.
pub fn evaluate<M: CausalModel>(
    model: &M,
    samples: &[WindowedSample],
    lag: usize,
    seed: u64,
    config: serde_json::Value,
) -> Result<EvalReport> {
    if samples.is_empty() {
        return Err(KgcmError::Data("no evaluation samples".into()));
    }
    let refs: Vec<&WindowedSample> = samples.iter().collect();
    let (y1, y2, latents) = model.predict(&refs)?;
    let y: Vec<f64> = samples.iter().map(|s| s.y1).collect();
    let truth: Option<Vec<f64>> = samples.iter().map(|s| s.ite_true).collect();
    let (pehe_model, pehe_zero) = match truth {
        Some(tau) => {
            let tau_hat: Vec<f64> = y1.iter().zip(&y2).map(|(a, b)| a - b).collect();
            let zero = vec![0.0; tau.len()];
            (Some(pehe(&tau_hat, &tau)?), Some(pehe(&zero, &tau)?))
        }
        None => (None, None),
    };
    let labels: Vec<u8> = samples.iter().map(|s| s.group_label).collect();
    Ok(EvalReport {
        rmse: rmse(&y1, &y)?,
        pehe: pehe_model,
        pehe_zero,
        latent_mmd2: grouped_mmd2(&latents, &labels, &MmdConfig::default())?,
        n_samples: samples.len(),
        lag,
        seed,
        config,
    })
}

/// Evaluation-mode effect estimates `y1_hat - y2_hat`.
pub fn predict_effects<M: CausalModel>(model: &M, samples: &[WindowedSample]) -> Result<Vec<f64>> {
    let refs: Vec<&WindowedSample> = samples.iter().collect();
    let (y1, y2, _) = model.predict(&refs)?;
    Ok(y1.iter().zip(&y2).map(|(a, b)| a - b).collect())
}
