//! Supervised dual-trajectory samples from aligned daily series.
//!
//! For an anchor day `t` (0-based) a sample holds the covariate history
//! `X[t-L+1..=t]`, the instantaneous and lag-shifted histories of both
//! treatment trajectories over the same days, and the outcomes at `t + n`.
//! Trajectory 1 is the factual (smoothed, unmodulated) SSH and trajectory 2
//! the counterfactual (velocity-modulated) SSH.
//!
//! Valid anchors satisfy `t - L + 1 - lag >= 0` and `t + n <= T - 1`, giving
//! `T - n - (L + lag - 1)` samples per segment.

use ndarray::{s, Array2};
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{KgcmError, Result};
use crate::ingest::TimeSeriesFrame;
use crate::treatment::{lag_shift, ModulatedSeries};

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct WindowConfig {
    pub lookback: usize,
    pub lead: usize,
    pub lag: usize,
    pub outcome: String,
    pub treatment: String,
}

impl Default for WindowConfig {
    fn default() -> Self {
        Self {
            lookback: 14,
            lead: 1,
            lag: 1,
            outcome: "sit".into(),
            treatment: "ssh".into(),
        }
    }
}

impl WindowConfig {
    pub fn validate(&self) -> Result<()> {
        if self.lookback < 1 || self.lead < 1 || self.lag < 1 {
            return Err(KgcmError::Config(
                "window.lookback, window.lead and window.lag must be >= 1".into(),
            ));
        }
        Ok(())
    }

    /// Rows a segment needs before it yields one sample.
    pub fn min_segment_len(&self) -> usize {
        self.lookback + self.lead + self.lag
    }

    /// Number of samples for a segment of `len` rows.
    pub fn window_count(&self, len: usize) -> usize {
        len.saturating_sub(self.lead + self.lookback + self.lag - 1)
    }
}

/// Counterfactual outcomes aligned with a segment; `None` where undefined.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct OutcomeTrack {
    pub y_cf: Vec<Option<f64>>,
    /// Synthetic effect, counterfactual minus factual.
    pub tau_true: Vec<Option<f64>>,
}

impl OutcomeTrack {
    pub fn slice(&self, start: usize, end: usize) -> OutcomeTrack {
        OutcomeTrack {
            y_cf: self.y_cf[start..end].to_vec(),
            tau_true: self.tau_true[start..end].to_vec(),
        }
    }
}

/// One training instance.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WindowedSample {
    /// `L x p` covariate history, oldest row first.
    pub x_hist: Array2<f64>,
    /// Instantaneous factual treatment over the window.
    pub t1_hist: Vec<f64>,
    /// Factual treatment shifted by `lag` over the window.
    pub t1_lagged: Vec<f64>,
    pub t2_hist: Vec<f64>,
    pub t2_lagged: Vec<f64>,
    /// Covariates at the anchor day (the last history row).
    pub x_prev: Vec<f64>,
    /// Factual outcome at `anchor + lead`.
    pub y1: f64,
    /// Counterfactual outcome at `anchor + lead`, when known.
    pub y2: Option<f64>,
    /// Ground-truth effect in prediction convention `y1 - y2` without noise.
    pub ite_true: Option<f64>,
    pub group_label: u8,
    pub anchor_t: usize,
}

/// Which treatment trajectory to feed.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Trajectory {
    Factual,
    Counterfactual,
}

impl WindowedSample {
    pub fn lookback(&self) -> usize {
        self.x_hist.nrows()
    }

    pub fn treatments(&self, traj: Trajectory) -> (&[f64], &[f64]) {
        match traj {
            Trajectory::Factual => (&self.t1_hist, &self.t1_lagged),
            Trajectory::Counterfactual => (&self.t2_hist, &self.t2_lagged),
        }
    }

    /// History matrix with the two treatment channels appended: `L x (p + 2)`.
    pub fn encoder_input(&self, traj: Trajectory) -> Array2<f64> {
        let (now, lagged) = self.treatments(traj);
        let (l, p) = self.x_hist.dim();
        let mut out = Array2::zeros((l, p + 2));
        out.slice_mut(s![.., ..p]).assign(&self.x_hist);
        for k in 0..l {
            out[[k, p]] = now[k];
            out[[k, p + 1]] = lagged[k];
        }
        out
    }

    /// Previous-step decoder features `[x_prev, T_t, T_{t-lag}]`.
    pub fn decoder_input(&self, traj: Trajectory) -> Vec<f64> {
        let (now, lagged) = self.treatments(traj);
        let mut v = self.x_prev.clone();
        v.push(*now.last().unwrap());
        v.push(*lagged.last().unwrap());
        v
    }
}

/// Builds one sample per valid anchor, in increasing anchor order.
///
/// `frame`, `treat` and `y_cf` must describe the same rows. Without `y_cf`
/// the samples carry no counterfactual outcome and effect metrics are
/// unavailable downstream.
pub fn build_windows(
    frame: &TimeSeriesFrame,
    treat: &ModulatedSeries,
    y_cf: Option<&OutcomeTrack>,
    cfg: &WindowConfig,
) -> Result<Vec<WindowedSample>> {
    cfg.validate()?;
    let n = frame.len();
    if treat.len() != n || y_cf.is_some_and(|c| c.y_cf.len() != n || c.tau_true.len() != n) {
        return Err(KgcmError::Shape(format!(
            "frame has {n} rows but treatment/outcome series differ"
        )));
    }
    let count = cfg.window_count(n);
    if count == 0 {
        return Err(KgcmError::Data(format!(
            "no valid anchors: {n} rows with lookback {}, lead {}, lag {}",
            cfg.lookback, cfg.lead, cfg.lag
        )));
    }
    let y_col = frame.column(&cfg.outcome)?;
    let t1_lag = lag_shift(&treat.ssh_smooth, cfg.lag)?;
    let t2_lag = lag_shift(&treat.ssh_treat, cfg.lag)?;
    let (l, lead) = (cfg.lookback, cfg.lead);
    let first = l + cfg.lag - 1;
    let mut out = Vec::with_capacity(count);
    for t in first..n - lead {
        let lo = t + 1 - l;
        let window = lo..t + 1;
        let lagged = |series: &crate::treatment::LaggedSeries| -> Result<Vec<f64>> {
            window
                .clone()
                .map(|s| {
                    series
                        .get(s)
                        .ok_or_else(|| KgcmError::Data(format!("lag-invalid index {s}")))
                })
                .collect()
        };
        let target = t + lead;
        let (y2, ite_true) = match y_cf {
            Some(track) => {
                let y2 = track.y_cf[target].ok_or_else(|| {
                    KgcmError::Data(format!("counterfactual outcome undefined at row {target}"))
                })?;
                (Some(y2), track.tau_true[target].map(|tau| -tau))
            }
            None => (None, None),
        };
        out.push(WindowedSample {
            x_hist: frame.features().slice(s![lo..=t, ..]).to_owned(),
            t1_hist: treat.ssh_smooth[window.clone()].to_vec(),
            t1_lagged: lagged(&t1_lag)?,
            t2_hist: treat.ssh_treat[window.clone()].to_vec(),
            t2_lagged: lagged(&t2_lag)?,
            x_prev: frame.features().row(t).to_vec(),
            y1: y_col[target],
            y2,
            ite_true,
            group_label: treat.group_label[t],
            anchor_t: t,
        });
    }
    debug_assert_eq!(out.len(), count);
    Ok(out)
}

/// Partitions sample indices into batches; every index appears once.
/// `shuffle_seed = None` keeps source order.
pub fn batch(n_samples: usize, batch_size: usize, shuffle_seed: Option<u64>) -> Result<Vec<Vec<usize>>> {
    if batch_size == 0 {
        return Err(KgcmError::Config("train.batch_size must be >= 1".into()));
    }
    if n_samples == 0 {
        return Err(KgcmError::Data("no samples to batch".into()));
    }
    let mut idx: Vec<usize> = (0..n_samples).collect();
    if let Some(seed) = shuffle_seed {
        idx.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
    }
    Ok(idx.chunks(batch_size).map(<[usize]>::to_vec).collect())
}

/// SHA-256 over anchors, inputs and targets of a sample set (hex).
pub fn windows_checksum(samples: &[WindowedSample]) -> String {
    let mut h = Sha256::new();
    let mut put = |v: f64| h.update(v.to_bits().to_le_bytes());
    for smp in samples {
        put(smp.anchor_t as f64);
        smp.x_hist.iter().for_each(|&v| put(v));
        for series in [&smp.t1_hist, &smp.t1_lagged, &smp.t2_hist, &smp.t2_lagged] {
            series.iter().for_each(|&v| put(v));
        }
        put(smp.y1);
        put(smp.y2.unwrap_or(f64::NAN));
        put(smp.ite_true.unwrap_or(f64::NAN));
        put(f64::from(smp.group_label));
    }
    h.finalize().iter().map(|b| format!("{b:02x}")).collect()
}
