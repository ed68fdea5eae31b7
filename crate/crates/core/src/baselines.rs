//! Recurrent baselines trained and scored through the same trainer.
//!
//! * `r_tarnet`: bidirectional GRU trunk over the covariate history, two
//!   feed-forward heads, head A under the factual treatment at the anchor and
//!   head B under the counterfactual one.
//! * `cf_rnn`: the trunk reads covariates plus both treatment channels; one
//!   head; the counterfactual prediction swaps the treatment channels.
//! * `r_crn`: `cf_rnn` plus an MMD penalty between the group-0 and group-1
//!   trunk representations.

use std::fmt;
use std::str::FromStr;

use ndarray::{s, Array2, Axis};
use serde::{Deserialize, Serialize};

use crate::autodiff::{Tape, Var};
use crate::error::{KgcmError, Result};
use crate::model::Mode;
use crate::nn::{BiGru, Bound, Init, Linear, ParamStore};
use crate::objectives::LossWeights;
use crate::train::{CausalModel, StepOutputs};
use crate::windowing::{Trajectory, WindowedSample};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Variant {
    RTarnet,
    CfRnn,
    RCrn,
}

impl Variant {
    pub const ALL: [Variant; 3] = [Variant::RTarnet, Variant::CfRnn, Variant::RCrn];

    pub fn name(self) -> &'static str {
        match self {
            Variant::RTarnet => "r_tarnet",
            Variant::CfRnn => "cf_rnn",
            Variant::RCrn => "r_crn",
        }
    }
}

impl fmt::Display for Variant {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Variant {
    type Err = KgcmError;

    fn from_str(s: &str) -> Result<Self> {
        Variant::ALL
            .into_iter()
            .find(|v| v.name() == s)
            .ok_or_else(|| KgcmError::Config(format!("unknown baseline variant '{s}'")))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BaselineSpec {
    pub variant: Variant,
    pub n_covariates: usize,
    pub trunk_hidden: usize,
    pub head_hidden: usize,
    /// MMD weight on the trunk representation; only `r_crn` uses it.
    pub balance_weight: f64,
    /// Start both `r_tarnet` heads from the same weights.
    pub tied_heads: bool,
    pub seed: u64,
}

impl BaselineSpec {
    pub fn new(variant: Variant, n_covariates: usize, seed: u64) -> Self {
        Self {
            variant,
            n_covariates,
            trunk_hidden: 64,
            head_hidden: 32,
            balance_weight: 1.0,
            tied_heads: false,
            seed,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.n_covariates == 0 || self.trunk_hidden == 0 || self.head_hidden == 0 {
            return Err(KgcmError::Config("baseline sizes must be >= 1".into()));
        }
        if !(self.balance_weight >= 0.0) {
            return Err(KgcmError::Config("balance weight must be >= 0".into()));
        }
        Ok(())
    }

    fn trunk_input(&self) -> usize {
        match self.variant {
            Variant::RTarnet => self.n_covariates,
            Variant::CfRnn | Variant::RCrn => self.n_covariates + 2,
        }
    }

    fn head_input(&self) -> usize {
        match self.variant {
            Variant::RTarnet => 2 * self.trunk_hidden + 2,
            Variant::CfRnn | Variant::RCrn => 2 * self.trunk_hidden,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
struct Head {
    hidden: Linear,
    out: Linear,
}

impl Head {
    fn new(store: &mut ParamStore, init: &mut Init, name: &str, input: usize, hidden: usize) -> Self {
        Self {
            hidden: Linear::new(store, init, &format!("{name}.hidden"), input, hidden),
            out: Linear::new(store, init, &format!("{name}.out"), hidden, 1),
        }
    }

    fn forward(&self, tape: &mut Tape, p: &Bound, x: Var) -> Var {
        let h = self.hidden.forward(tape, p, x);
        let h = tape.relu(h);
        self.out.forward(tape, p, h)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BaselineModel {
    pub spec: BaselineSpec,
    pub params: ParamStore,
    trunk: BiGru,
    heads: Vec<Head>,
}

impl BaselineModel {
    pub fn new(spec: BaselineSpec) -> Result<Self> {
        spec.validate()?;
        let mut params = ParamStore::new();
        let mut init = Init::new(spec.seed);
        let trunk = BiGru::new(&mut params, &mut init, "trunk", spec.trunk_input(), spec.trunk_hidden);
        let n_heads = if spec.variant == Variant::RTarnet { 2 } else { 1 };
        let mut heads = Vec::new();
        for k in 0..n_heads {
            heads.push(Head::new(&mut params, &mut init, &format!("head.{k}"), spec.head_input(), spec.head_hidden));
        }
        if spec.tied_heads && n_heads == 2 {
            let names = params.names().to_vec();
            for (i, name) in names.iter().enumerate() {
                if let Some(rest) = name.strip_prefix("head.1") {
                    let src = params.by_name(&format!("head.0{rest}")).unwrap().clone();
                    params.get_mut(crate::nn::ParamId(i)).assign(&src);
                }
            }
        }
        Ok(Self {
            spec,
            params,
            trunk,
            heads,
        })
    }

    fn trunk_rows(&self, rows: &[Array2<f64>], tape: &mut Tape, p: &Bound) -> Var {
        let (l, c) = rows[0].dim();
        let steps: Vec<Var> = (0..l)
            .map(|k| tape.leaf(Array2::from_shape_fn((rows.len(), c), |(b, j)| rows[b][[k, j]])))
            .collect();
        self.trunk.forward(tape, p, &steps)
    }

    fn check(&self, batch: &[&WindowedSample]) -> Result<()> {
        if batch.is_empty() {
            return Err(KgcmError::Shape("empty batch".into()));
        }
        if batch.iter().any(|s| s.x_hist.ncols() != self.spec.n_covariates) {
            return Err(KgcmError::Shape("covariate count differs from baseline spec".into()));
        }
        Ok(())
    }

    /// Returns `(y1, y2, factual representation)` on the tape.
    pub fn forward_on_tape(&self, tape: &mut Tape, p: &Bound, batch: &[&WindowedSample]) -> Result<(Var, Var, Var)> {
        self.check(batch)?;
        let b = batch.len();
        match self.spec.variant {
            Variant::RTarnet => {
                let rows: Vec<Array2<f64>> = batch.iter().map(|s| s.x_hist.clone()).collect();
                let repr = self.trunk_rows(&rows, tape, p);
                let anchor = |traj: Trajectory| {
                    Array2::from_shape_fn((b, 2), |(r, c)| {
                        let (now, lagged) = batch[r].treatments(traj);
                        if c == 0 { *now.last().unwrap() } else { *lagged.last().unwrap() }
                    })
                };
                let t1 = tape.leaf(anchor(Trajectory::Factual));
                let t2 = tape.leaf(anchor(Trajectory::Counterfactual));
                let in1 = tape.concat_cols(&[repr, t1]);
                let in2 = tape.concat_cols(&[repr, t2]);
                let y1 = self.heads[0].forward(tape, p, in1);
                let y2 = self.heads[1].forward(tape, p, in2);
                Ok((y1, y2, repr))
            }
            Variant::CfRnn | Variant::RCrn => {
                let mut rows = Vec::with_capacity(2 * b);
                for traj in [Trajectory::Factual, Trajectory::Counterfactual] {
                    rows.extend(batch.iter().map(|s| s.encoder_input(traj)));
                }
                let repr = self.trunk_rows(&rows, tape, p);
                let y = self.heads[0].forward(tape, p, repr);
                let y1 = tape.slice_rows(y, 0, b);
                let y2 = tape.slice_rows(y, b, 2 * b);
                let r1 = tape.slice_rows(repr, 0, b);
                Ok((y1, y2, r1))
            }
        }
    }

    /// `(y1_hat, y2_hat, representation)` for one sample.
    pub fn forward(&self, sample: &WindowedSample) -> Result<(f64, f64, Vec<f64>)> {
        let (a, b, r) = CausalModel::predict(self, &[sample])?;
        Ok((a[0], b[0], r.row(0).to_vec()))
    }
}

impl CausalModel for BaselineModel {
    fn params(&self) -> &ParamStore {
        &self.params
    }

    fn params_mut(&mut self) -> &mut ParamStore {
        &mut self.params
    }

    fn step(&self, tape: &mut Tape, bound: &Bound, batch: &[&WindowedSample], _mode: Mode) -> Result<StepOutputs> {
        let (y1, y2, repr) = self.forward_on_tape(tape, bound, batch)?;
        Ok(StepOutputs {
            y1,
            y2,
            repr,
            kl: None,
            penalty: None,
        })
    }

    fn predict(&self, samples: &[&WindowedSample]) -> Result<(Vec<f64>, Vec<f64>, Array2<f64>)> {
        let mut y1 = Vec::with_capacity(samples.len());
        let mut y2 = Vec::with_capacity(samples.len());
        let mut reprs = Vec::new();
        for chunk in samples.chunks(256) {
            let mut tape = Tape::new();
            let bound = self.params.bind(&mut tape);
            let (a, b, r) = self.forward_on_tape(&mut tape, &bound, chunk)?;
            y1.extend(tape.value(a).iter().copied());
            y2.extend(tape.value(b).iter().copied());
            reprs.push(tape.value(r).slice(s![.., ..]).to_owned());
        }
        let views: Vec<_> = reprs.iter().map(|a| a.view()).collect();
        let r = ndarray::concatenate(Axis(0), &views).map_err(|e| KgcmError::Shape(e.to_string()))?;
        Ok((y1, y2, r))
    }

    fn loss_weights(&self, _configured: &LossWeights) -> LossWeights {
        LossWeights {
            alpha_kl: 0.0,
            beta_mmd: if self.spec.variant == Variant::RCrn { self.spec.balance_weight } else { 0.0 },
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;
    use rand_distr::{Distribution, StandardNormal};

    fn sample(seed: u64, same_treatment: bool) -> WindowedSample {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut v = |n: usize| -> Vec<f64> { (0..n).map(|_| StandardNormal.sample(&mut rng)).collect() };
        let x = Array2::from_shape_vec((6, 3), v(18)).unwrap();
        let t1 = v(6);
        let t1l = v(6);
        let (t2, t2l) = if same_treatment { (t1.clone(), t1l.clone()) } else { (v(6), v(6)) };
        WindowedSample {
            x_prev: x.row(5).to_vec(),
            x_hist: x,
            t1_hist: t1,
            t1_lagged: t1l,
            t2_hist: t2,
            t2_lagged: t2l,
            y1: 0.0,
            y2: Some(0.0),
            ite_true: Some(0.0),
            group_label: 0,
            anchor_t: 5,
        }
    }

    fn spec(variant: Variant) -> BaselineSpec {
        let mut s = BaselineSpec::new(variant, 3, 4);
        s.trunk_hidden = 5;
        s.head_hidden = 4;
        s
    }

    #[test]
    fn identical_treatments_give_identical_outcomes() {
        let x = sample(1, true);
        for v in [Variant::CfRnn, Variant::RCrn] {
            let (a, b, _) = BaselineModel::new(spec(v)).unwrap().forward(&x).unwrap();
            assert_eq!(a.to_bits(), b.to_bits());
        }
        let mut tied = spec(Variant::RTarnet);
        tied.tied_heads = true;
        let (a, b, _) = BaselineModel::new(tied).unwrap().forward(&x).unwrap();
        assert_eq!(a.to_bits(), b.to_bits());
        let (a, b, _) = BaselineModel::new(spec(Variant::RTarnet)).unwrap().forward(&x).unwrap();
        assert_ne!(a, b);
    }

    #[test]
    fn deterministic_and_parsed() {
        let x = sample(2, false);
        for v in Variant::ALL {
            let m = BaselineModel::new(spec(v)).unwrap();
            assert_eq!(m.forward(&x).unwrap(), m.forward(&x).unwrap());
            assert_eq!(v.name().parse::<Variant>().unwrap(), v);
        }
        assert!("tarnet".parse::<Variant>().is_err());
    }

    #[test]
    fn crn_and_cfrnn_share_initialization() {
        let a = BaselineModel::new(spec(Variant::CfRnn)).unwrap();
        let b = BaselineModel::new(spec(Variant::RCrn)).unwrap();
        assert_eq!(a.params, b.params);
    }
}
