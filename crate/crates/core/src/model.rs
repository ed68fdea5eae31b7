//! The knowledge-guided causal VAE.
//!
//! * Encoder: single-layer bidirectional GRU over the history window with
//!   the instantaneous and lagged treatment appended as channels; two linear
//!   heads map the concatenated final states to `mu` and `logvar`.
//! * Sampling: `z = mu + exp(logvar / 2) * eps` in training, `z = mu` in
//!   evaluation. Both trajectories of a sample share `eps`.
//! * Decoder: one GRU cell per feature. Unit `i` reads
//!   `[x_prev * M[i, :], z]` for one step from a zero state, followed by a
//!   linear readout. The outcome unit's readout is the prediction.
//! * Mask: `M = logistic(logits)` (soft) or its thresholded value with a
//!   straight-through gradient (hard). Pinned entries are forced to 1 and
//!   excluded entries to 0 in both modes.
//!
//! Decoder features are `[covariates..., T_t, T_{t-lag}]`; the edges from
//! both treatment features into the outcome unit are pinned.

use ndarray::{Array2, Axis};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::autodiff::{Tape, Var};
use crate::error::{KgcmError, Result};
use crate::nn::{BiGru, Bound, GruCell, Init, Linear, ParamId, ParamStore};
use crate::windowing::{Trajectory, WindowedSample};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MaskMode {
    Soft,
    Hard,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MaskSettings {
    /// Mode used for training and for predictions.
    pub mode: MaskMode,
    pub threshold: f64,
    /// `false` replaces the mask with all ones (unconstrained decoder).
    pub adjacency: bool,
    /// Extra `(unit, feature)` pairs forced active.
    pub pinned_active: Vec<(usize, usize)>,
    /// `(unit, feature)` pairs excluded by prior knowledge.
    pub pinned_inactive: Vec<(usize, usize)>,
    /// Optional L1 penalty on the soft mask (off by default).
    pub l1_penalty: f64,
}

impl Default for MaskSettings {
    fn default() -> Self {
        Self {
            mode: MaskMode::Soft,
            threshold: 0.5,
            adjacency: true,
            pinned_active: Vec::new(),
            pinned_inactive: Vec::new(),
            l1_penalty: 0.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KgcmSpec {
    /// Covariate columns in each history row.
    pub n_covariates: usize,
    /// Index of the outcome among the covariates.
    pub outcome_index: usize,
    pub encoder_hidden: usize,
    pub latent_dim: usize,
    pub decoder_hidden: usize,
    pub mask: MaskSettings,
    pub seed: u64,
}

impl KgcmSpec {
    pub fn new(n_covariates: usize, outcome_index: usize, seed: u64) -> Self {
        Self {
            n_covariates,
            outcome_index,
            encoder_hidden: 64,
            latent_dim: 32,
            decoder_hidden: 16,
            mask: MaskSettings::default(),
            seed,
        }
    }

    /// Decoder feature count `p`: covariates plus both treatment channels.
    pub fn n_features(&self) -> usize {
        self.n_covariates + 2
    }

    pub fn treatment_index(&self) -> usize {
        self.n_covariates
    }

    pub fn lagged_treatment_index(&self) -> usize {
        self.n_covariates + 1
    }

    pub fn validate(&self) -> Result<()> {
        if self.latent_dim < 1 || self.encoder_hidden < 1 || self.decoder_hidden < 1 {
            return Err(KgcmError::Config("model sizes must be >= 1".into()));
        }
        if self.outcome_index >= self.n_covariates {
            return Err(KgcmError::Config("outcome index outside covariates".into()));
        }
        let p = self.n_features();
        let in_range = |&(i, j): &(usize, usize)| i < p && j < p;
        if !self.mask.pinned_active.iter().all(in_range) || !self.mask.pinned_inactive.iter().all(in_range) {
            return Err(KgcmError::Config("pinned mask entry outside p x p".into()));
        }
        if !(self.mask.threshold > 0.0 && self.mask.threshold < 1.0) {
            return Err(KgcmError::Config("mask threshold must lie in (0, 1)".into()));
        }
        Ok(())
    }

    /// Knowledge-pinned active edges: both treatment features into the outcome.
    pub fn pinned_active(&self) -> Array2<bool> {
        let p = self.n_features();
        let mut m = Array2::from_elem((p, p), false);
        m[[self.outcome_index, self.treatment_index()]] = true;
        m[[self.outcome_index, self.lagged_treatment_index()]] = true;
        for &(i, j) in &self.mask.pinned_active {
            m[[i, j]] = true;
        }
        m
    }

    pub fn pinned_inactive(&self) -> Array2<bool> {
        let p = self.n_features();
        let mut m = Array2::from_elem((p, p), false);
        for &(i, j) in &self.mask.pinned_inactive {
            m[[i, j]] = true;
        }
        m
    }

    /// Number of scalar parameters implied by the sizes.
    pub fn param_count(&self) -> usize {
        let p = self.n_features();
        let (he, dz, hd) = (self.encoder_hidden, self.latent_dim, self.decoder_hidden);
        let encoder = 2 * GruCell::num_params(p, he);
        let heads = 2 * (2 * he * dz + dz);
        let decoder = p * (GruCell::num_params(p + dz, hd) + hd + 1);
        encoder + heads + decoder + p * p
    }
}

/// Computes the mask values (no gradient).
///
/// Hard mode activates entries whose logistic is `>= threshold`. Pinned-active
/// entries win over logits; pinned-inactive entries are zeroed unless also
/// pinned active.
pub fn mask_from_logits(
    logits: &Array2<f64>,
    pinned_active: &Array2<bool>,
    pinned_inactive: &Array2<bool>,
    mode: MaskMode,
    threshold: f64,
) -> Array2<f64> {
    let mut m = logits.mapv(crate::autodiff::sigmoid);
    if mode == MaskMode::Hard {
        m.mapv_inplace(|v| if v >= threshold { 1.0 } else { 0.0 });
    }
    for ((idx, v), (&on, &off)) in m.indexed_iter_mut().zip(pinned_active.iter().zip(pinned_inactive)) {
        let _ = idx;
        if on {
            *v = 1.0;
        } else if off {
            *v = 0.0;
        }
    }
    m
}

/// `z = mu + exp(logvar / 2) * eps`; `eps` rows drawn from `noise_seed`.
pub fn reparameterize(mu: &Array2<f64>, logvar: &Array2<f64>, noise_seed: u64, sampling: bool) -> Array2<f64> {
    if !sampling {
        return mu.clone();
    }
    let eps = standard_normal(mu.dim(), noise_seed);
    mu + &(logvar.mapv(|v| (0.5 * v).exp()) * eps)
}

fn standard_normal(dim: (usize, usize), seed: u64) -> Array2<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    Array2::from_shape_simple_fn(dim, || StandardNormal.sample(&mut rng))
}

/// Forward-pass mode.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Mode {
    /// Sample `z` with noise drawn from the seed.
    Train { noise_seed: u64 },
    /// `z = mu`.
    Eval,
}

/// Tape handles produced by a batched forward pass.
#[derive(Debug, Clone, Copy)]
pub struct KgcmOutputs {
    /// `B x 1` factual predictions.
    pub y1: Var,
    /// `B x 1` counterfactual predictions.
    pub y2: Var,
    /// `2B x d_z`, factual rows first.
    pub mu: Var,
    pub logvar: Var,
    pub z: Var,
    /// Effective `p x p` mask.
    pub mask: Var,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KgcmModel {
    pub spec: KgcmSpec,
    pub params: ParamStore,
    encoder: BiGru,
    mu_head: Linear,
    logvar_head: Linear,
    decoder: Vec<GruCell>,
    readout: Vec<Linear>,
    logits: ParamId,
}

impl KgcmModel {
    pub fn new(spec: KgcmSpec) -> Result<Self> {
        spec.validate()?;
        let p = spec.n_features();
        let mut params = ParamStore::new();
        let mut init = Init::new(spec.seed);
        let encoder = BiGru::new(&mut params, &mut init, "encoder", p, spec.encoder_hidden);
        let enc_out = encoder.output_dim();
        let mu_head = Linear::new(&mut params, &mut init, "mu_head", enc_out, spec.latent_dim);
        let logvar_head = Linear::new(&mut params, &mut init, "logvar_head", enc_out, spec.latent_dim);
        let mut decoder = Vec::with_capacity(p);
        let mut readout = Vec::with_capacity(p);
        for i in 0..p {
            decoder.push(GruCell::new(
                &mut params,
                &mut init,
                &format!("decoder.{i}"),
                p + spec.latent_dim,
                spec.decoder_hidden,
            ));
            readout.push(Linear::new(&mut params, &mut init, &format!("readout.{i}"), spec.decoder_hidden, 1));
        }
        let logits = params.add("mask_logits", Array2::zeros((p, p)));
        Ok(Self {
            spec,
            params,
            encoder,
            mu_head,
            logvar_head,
            decoder,
            readout,
            logits,
        })
    }

    pub fn logits(&self) -> &Array2<f64> {
        self.params.get(self.logits)
    }

    pub fn logits_mut(&mut self) -> &mut Array2<f64> {
        self.params.get_mut(self.logits)
    }

    /// The mask in the given mode, or all ones when adjacency is disabled.
    pub fn mask(&self, mode: MaskMode) -> Array2<f64> {
        let p = self.spec.n_features();
        if !self.spec.mask.adjacency {
            return Array2::ones((p, p));
        }
        mask_from_logits(
            self.logits(),
            &self.spec.pinned_active(),
            &self.spec.pinned_inactive(),
            mode,
            self.spec.mask.threshold,
        )
    }

    /// The mask used for training and prediction.
    pub fn effective_mask(&self) -> Array2<f64> {
        self.mask(self.spec.mask.mode)
    }

    fn mask_on_tape(&self, tape: &mut Tape, bound: &Bound) -> Var {
        let p = self.spec.n_features();
        if !self.spec.mask.adjacency {
            return tape.leaf(Array2::ones((p, p)));
        }
        let soft = tape.sigmoid(bound.var(self.logits));
        let src = match self.spec.mask.mode {
            MaskMode::Soft => soft,
            MaskMode::Hard => {
                let th = self.spec.mask.threshold;
                let hard = tape.value(soft).mapv(|v| if v >= th { 1.0 } else { 0.0 });
                tape.straight_through(soft, hard)
            }
        };
        let on = self.spec.pinned_active();
        let off = self.spec.pinned_inactive();
        let keep = Array2::from_shape_fn((p, p), |ij| if on[ij] || off[ij] { 0.0 } else { 1.0 });
        let offset = on.mapv(|b| if b { 1.0 } else { 0.0 });
        tape.gate(src, keep, &offset)
    }

    fn encode_on_tape(&self, tape: &mut Tape, bound: &Bound, inputs: &[Array2<f64>]) -> (Var, Var) {
        // inputs: one `L x p` matrix per row of the batch
        let l = inputs[0].nrows();
        let p = inputs[0].ncols();
        let steps: Vec<Var> = (0..l)
            .map(|k| {
                let m = Array2::from_shape_fn((inputs.len(), p), |(b, c)| inputs[b][[k, c]]);
                tape.leaf(m)
            })
            .collect();
        let h = self.encoder.forward(tape, bound, &steps);
        let mu = self.mu_head.forward(tape, bound, h);
        let logvar = self.logvar_head.forward(tape, bound, h);
        (mu, logvar)
    }

    fn decode_on_tape(&self, tape: &mut Tape, bound: &Bound, z: Var, x_prev: Var, mask: Var, unit: usize) -> Var {
        let rows = tape.value(z).nrows();
        let m_i = tape.row(mask, unit);
        let gated = tape.mul_row(x_prev, m_i);
        let input = tape.concat_cols(&[gated, z]);
        let h0 = tape.leaf(Array2::zeros((rows, self.spec.decoder_hidden)));
        let h = self.decoder[unit].step(tape, bound, input, h0);
        self.readout[unit].forward(tape, bound, h)
    }

    fn check_inputs(&self, batch: &[&WindowedSample]) -> Result<()> {
        if batch.is_empty() {
            return Err(KgcmError::Shape("empty batch".into()));
        }
        for s in batch {
            if s.x_hist.ncols() != self.spec.n_covariates || s.x_prev.len() != self.spec.n_covariates {
                return Err(KgcmError::Shape(format!(
                    "sample has {} covariates, model expects {}",
                    s.x_hist.ncols(),
                    self.spec.n_covariates
                )));
            }
            if s.x_hist.iter().any(|v| !v.is_finite()) {
                return Err(KgcmError::InvalidArgument(format!("non-finite input at anchor {}", s.anchor_t)));
            }
        }
        Ok(())
    }

    /// Batched dual-trajectory forward pass sharing every parameter.
    pub fn forward_on_tape(
        &self,
        tape: &mut Tape,
        bound: &Bound,
        batch: &[&WindowedSample],
        mode: Mode,
    ) -> Result<KgcmOutputs> {
        self.check_inputs(batch)?;
        let b = batch.len();
        let mut enc_inputs = Vec::with_capacity(2 * b);
        let mut dec_rows = Vec::with_capacity(2 * b);
        for traj in [Trajectory::Factual, Trajectory::Counterfactual] {
            for s in batch {
                enc_inputs.push(s.encoder_input(traj));
                dec_rows.push(s.decoder_input(traj));
            }
        }
        let (mu, logvar) = self.encode_on_tape(tape, bound, &enc_inputs);
        let z = match mode {
            Mode::Eval => mu,
            Mode::Train { noise_seed } => {
                let eps = standard_normal((b, self.spec.latent_dim), noise_seed);
                let shared = ndarray::concatenate(Axis(0), &[eps.view(), eps.view()]).unwrap();
                let half = tape.scale(logvar, 0.5);
                let sd = tape.exp(half);
                let e = tape.leaf(shared);
                let noise = tape.mul(sd, e);
                tape.add(mu, noise)
            }
        };
        let p = self.spec.n_features();
        let x_prev = tape.leaf(Array2::from_shape_fn((2 * b, p), |(r, c)| dec_rows[r][c]));
        let mask = self.mask_on_tape(tape, bound);
        let y = self.decode_on_tape(tape, bound, z, x_prev, mask, self.spec.outcome_index);
        let y1 = tape.slice_rows(y, 0, b);
        let y2 = tape.slice_rows(y, b, 2 * b);
        Ok(KgcmOutputs { y1, y2, mu, logvar, z, mask })
    }

    /// Encodes one `L x p` input (covariates plus treatment channels).
    pub fn encode(&self, x: &Array2<f64>) -> Result<(Vec<f64>, Vec<f64>)> {
        if x.ncols() != self.spec.n_features() {
            return Err(KgcmError::Shape(format!(
                "encoder input has {} channels, expected {}",
                x.ncols(),
                self.spec.n_features()
            )));
        }
        if x.nrows() == 0 || x.iter().any(|v| !v.is_finite()) {
            return Err(KgcmError::InvalidArgument("empty or non-finite encoder input".into()));
        }
        let mut tape = Tape::new();
        let bound = self.params.bind(&mut tape);
        let (mu, lv) = self.encode_on_tape(&mut tape, &bound, std::slice::from_ref(x));
        Ok((tape.value(mu).row(0).to_vec(), tape.value(lv).row(0).to_vec()))
    }

    /// Every decoder unit's output for latent rows `z` and previous-step
    /// features `x_prev` under `mask`. Returns `rows x p`.
    pub fn decode(&self, z: &Array2<f64>, x_prev: &Array2<f64>, mask: &Array2<f64>) -> Result<Array2<f64>> {
        let p = self.spec.n_features();
        if z.ncols() != self.spec.latent_dim || x_prev.ncols() != p || z.nrows() != x_prev.nrows() || mask.dim() != (p, p) {
            return Err(KgcmError::Shape("decoder inputs inconsistent with model".into()));
        }
        let mut tape = Tape::new();
        let bound = self.params.bind(&mut tape);
        let zv = tape.leaf(z.clone());
        let xv = tape.leaf(x_prev.clone());
        let mv = tape.leaf(mask.clone());
        let mut out = Array2::zeros((z.nrows(), p));
        for unit in 0..p {
            let y = self.decode_on_tape(&mut tape, &bound, zv, xv, mv, unit);
            out.column_mut(unit).assign(&tape.value(y).column(0));
        }
        Ok(out)
    }

    /// Evaluation-mode predictions `(y1_hat, y2_hat)` and factual-trajectory
    /// latent means for a set of samples.
    pub fn predict(&self, samples: &[&WindowedSample]) -> Result<(Vec<f64>, Vec<f64>, Array2<f64>)> {
        let mut y1 = Vec::with_capacity(samples.len());
        let mut y2 = Vec::with_capacity(samples.len());
        let mut lat = Vec::with_capacity(samples.len());
        for chunk in samples.chunks(256) {
            let mut tape = Tape::new();
            let bound = self.params.bind(&mut tape);
            let out = self.forward_on_tape(&mut tape, &bound, chunk, Mode::Eval)?;
            y1.extend(tape.value(out.y1).iter().copied());
            y2.extend(tape.value(out.y2).iter().copied());
            let mu = tape.value(out.mu);
            lat.push(mu.slice(ndarray::s![0..chunk.len(), ..]).to_owned());
        }
        let views: Vec<_> = lat.iter().map(|a| a.view()).collect();
        let latents = ndarray::concatenate(Axis(0), &views).map_err(|e| KgcmError::Shape(e.to_string()))?;
        Ok((y1, y2, latents))
    }

    /// Evaluation-mode effect estimate `y_hat(T1) - y_hat(T2)`.
    pub fn predict_ite(&self, sample: &WindowedSample) -> Result<f64> {
        let (a, b, _) = self.predict(&[sample])?;
        Ok(a[0] - b[0])
    }
}
