//! Synthetic counterfactual outcomes with a known bounded effect, plus a
//! desk-scale generator for the base daily series.
//!
//! The counterfactual outcome is
//!
//! ```text
//! y1_t = y0_t + beta_eff * tanh(alpha * (t1_t - t0_t - mu_T)) + eps_t
//! ```
//!
//! where `mu_T` is the mean treatment difference on the generation set and
//! `eps_t ~ N(0, noise_sd^2)` is drawn from a ChaCha8 stream seeded with the
//! 64-bit `seed`. The noiseless part is the ground-truth effect.

use std::path::Path;

use chrono::NaiveDate;
use ndarray::Array2;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{KgcmError, Result};
use crate::ingest::TimeSeriesFrame;
use crate::treatment::{
    geostrophic_velocity, hydrostatic_thickness, GeostrophicParams, HydrostaticParams,
    CORIOLIS_ARCTIC, GRAVITY,
};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SynthConfig {
    pub alpha: f64,
    pub beta_eff: f64,
    pub noise_sd: f64,
    pub seed: u64,
}

impl Default for SynthConfig {
    fn default() -> Self {
        Self {
            alpha: 2.0,
            beta_eff: 0.5,
            noise_sd: 0.05,
            seed: 0,
        }
    }
}

impl SynthConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.alpha > 0.0) || !self.alpha.is_finite() {
            return Err(KgcmError::Config("synth.alpha must be > 0".into()));
        }
        if !(self.noise_sd >= 0.0) || !self.noise_sd.is_finite() {
            return Err(KgcmError::Config("synth.noise_sd must be >= 0".into()));
        }
        if !self.beta_eff.is_finite() {
            return Err(KgcmError::Config("synth.beta_eff must be finite".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SynthOutput {
    pub y1: Vec<f64>,
    pub tau_true: Vec<f64>,
    pub mu_t: f64,
}

fn check_lengths(y0: &[f64], t1: &[f64], t0: &[f64]) -> Result<()> {
    if y0.len() != t1.len() || y0.len() != t0.len() {
        return Err(KgcmError::Shape(format!(
            "y0/t1/t0 lengths {}/{}/{}",
            y0.len(),
            t1.len(),
            t0.len()
        )));
    }
    Ok(())
}

/// Generates counterfactual outcomes, computing `mu_T` from this set.
pub fn gen_counterfactual(
    y0: &[f64],
    t1: &[f64],
    t0: &[f64],
    cfg: &SynthConfig,
) -> Result<SynthOutput> {
    check_lengths(y0, t1, t0)?;
    if y0.is_empty() {
        return Err(KgcmError::InvalidArgument("empty generation set".into()));
    }
    let mu_t = t1.iter().zip(t0).map(|(a, b)| a - b).sum::<f64>() / y0.len() as f64;
    gen_counterfactual_centered(y0, t1, t0, cfg, mu_t)
}

/// Same as [`gen_counterfactual`] with a frozen centering constant, used for
/// validation and test periods so every split shares the training `mu_T`.
pub fn gen_counterfactual_centered(
    y0: &[f64],
    t1: &[f64],
    t0: &[f64],
    cfg: &SynthConfig,
    mu_t: f64,
) -> Result<SynthOutput> {
    cfg.validate()?;
    check_lengths(y0, t1, t0)?;
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut y1 = Vec::with_capacity(y0.len());
    let mut tau_true = Vec::with_capacity(y0.len());
    for ((&y, &a), &b) in y0.iter().zip(t1).zip(t0) {
        let tau = cfg.beta_eff * (cfg.alpha * (a - b - mu_t)).tanh();
        let z: f64 = StandardNormal.sample(&mut rng);
        let eps = if cfg.noise_sd == 0.0 { 0.0 } else { cfg.noise_sd * z };
        tau_true.push(tau);
        y1.push(y + tau + eps);
    }
    Ok(SynthOutput { y1, tau_true, mu_t })
}

/// The noiseless effect series, the oracle target for PEHE.
pub fn ground_truth_ite(out: &SynthOutput) -> &[f64] {
    &out.tau_true
}

#[derive(Debug, Serialize)]
struct SynthMeta<'a> {
    config: &'a SynthConfig,
    mu_t: f64,
    rows: usize,
}

/// Writes `date,y0,y1,t0,t1,tau_true` and a `<path>.meta.json` sidecar.
pub fn write_counterfactual_csv(
    path: &Path,
    dates: &[NaiveDate],
    y0: &[f64],
    t0: &[f64],
    t1: &[f64],
    out: &SynthOutput,
    cfg: &SynthConfig,
) -> Result<()> {
    let n = dates.len();
    if [y0.len(), t0.len(), t1.len(), out.y1.len()].iter().any(|&l| l != n) {
        return Err(KgcmError::Shape("counterfactual columns differ in length".into()));
    }
    let mut w = csv::Writer::from_path(path)
        .map_err(|e| KgcmError::Data(format!("{}: {e}", path.display())))?;
    let csv_err = |e: csv::Error| KgcmError::Data(format!("{}: {e}", path.display()));
    w.write_record(["date", "y0", "y1", "t0", "t1", "tau_true"]).map_err(csv_err)?;
    for i in 0..n {
        w.write_record([
            dates[i].format("%Y-%m-%d").to_string(),
            y0[i].to_string(),
            out.y1[i].to_string(),
            t0[i].to_string(),
            t1[i].to_string(),
            out.tau_true[i].to_string(),
        ])
        .map_err(csv_err)?;
    }
    w.flush().map_err(|e| KgcmError::io(path, e))?;
    let meta = SynthMeta {
        config: cfg,
        mu_t: out.mu_t,
        rows: n,
    };
    let meta_path = path.with_extension("meta.json");
    std::fs::write(&meta_path, serde_json::to_string_pretty(&meta)?)
        .map_err(|e| KgcmError::io(&meta_path, e))
}

/// First-order autoregressive noise.
struct Ar1 {
    rho: f64,
    sd: f64,
    state: f64,
}

impl Ar1 {
    fn new(rho: f64, sd: f64) -> Self {
        Self { rho, sd, state: 0.0 }
    }

    fn step(&mut self, rng: &mut ChaCha8Rng) -> f64 {
        let z: f64 = StandardNormal.sample(rng);
        self.state = self.rho * self.state + self.sd * (1.0 - self.rho * self.rho).sqrt() * z;
        self.state
    }
}

/// Generates a physically flavoured daily frame `(sit, ssh, u, v, vtot)`
/// starting at `start`.
///
/// Velocities follow geostrophic balance from seasonal plus red-noise SSH
/// slopes; thickness follows the hydrostatic relation from a seasonal
/// freeboard and snow cover, with a dynamic response to the previous day's
/// SSH and drift speed.
pub fn generate_base_frame(len: usize, start: NaiveDate, seed: u64) -> Result<TimeSeriesFrame> {
    if len < 2 {
        return Err(KgcmError::InvalidArgument("need at least two days".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut ssh_noise = Ar1::new(0.97, 0.04);
    let mut dx_noise = Ar1::new(0.9, 8e-7);
    let mut dy_noise = Ar1::new(0.9, 8e-7);
    let mut fb_noise = Ar1::new(0.95, 0.01);
    let mut sit_noise = Ar1::new(0.8, 0.03);

    let mut dates = Vec::with_capacity(len);
    let mut rows = Vec::with_capacity(len * 5);
    let (mut prev_ssh, mut prev_vtot) = (0.0, 0.0);
    for k in 0..len {
        let date = start + chrono::Duration::days(k as i64);
        let phase = 2.0 * std::f64::consts::PI * (k as f64) / 365.25;
        let ssh = 0.25 * phase.sin() + ssh_noise.step(&mut rng);
        let geo = GeostrophicParams {
            g: GRAVITY,
            f: CORIOLIS_ARCTIC,
            deta_dx: 6e-7 * phase.cos() + dx_noise.step(&mut rng),
            deta_dy: 4e-7 * phase.sin() + dy_noise.step(&mut rng),
        };
        let (u, v) = geostrophic_velocity(&geo)?;
        let vtot = u.hypot(v);
        let snow = 0.15 + 0.08 * phase.cos();
        let freeboard = ssh + 0.25 + 0.06 * phase.cos() + fb_noise.step(&mut rng);
        let h_i = hydrostatic_thickness(&HydrostaticParams::with_default_densities(
            freeboard, ssh, snow,
        ))?;
        let sit = (h_i - 0.6 * prev_ssh - 2.0 * prev_vtot + sit_noise.step(&mut rng)).max(0.05);
        dates.push(date);
        rows.extend_from_slice(&[sit, ssh, u, v, vtot]);
        prev_ssh = ssh;
        prev_vtot = vtot;
    }
    let features = Array2::from_shape_vec((len, 5), rows)
        .map_err(|e| KgcmError::Shape(e.to_string()))?;
    TimeSeriesFrame::new(
        dates,
        crate::ingest::DEFAULT_SCHEMA.iter().map(|s| s.to_string()).collect(),
        features,
    )
}

#[cfg(test)]
mod tests {
    use super::*;

    fn cfg(alpha: f64, beta: f64, sd: f64, seed: u64) -> SynthConfig {
        SynthConfig {
            alpha,
            beta_eff: beta,
            noise_sd: sd,
            seed,
        }
    }

    #[test]
    fn equal_treatments_leave_outcome() {
        let y0 = [0.1, -0.4, 2.0];
        let t = [1.0, 2.0, 3.0];
        let out = gen_counterfactual(&y0, &t, &t, &cfg(2.0, 0.5, 0.0, 1)).unwrap();
        assert_eq!(out.mu_t, 0.0);
        assert_eq!(out.y1, y0.to_vec());
    }

    #[test]
    fn single_point_tanh_one() {
        let out =
            gen_counterfactual_centered(&[0.0], &[1.5], &[0.5], &cfg(1.0, 1.0, 0.0, 0), 0.0)
                .unwrap();
        assert!((out.y1[0] - 0.7615941559557649).abs() < 1e-12);
        assert_eq!(ground_truth_ite(&out), &[out.y1[0]]);
    }

    #[test]
    fn seed_changes_only_noise() {
        let y0 = vec![0.0; 50];
        let t1: Vec<f64> = (0..50).map(|i| (i as f64 * 0.3).sin()).collect();
        let t0 = vec![0.0; 50];
        let a = gen_counterfactual(&y0, &t1, &t0, &cfg(2.0, 0.5, 0.05, 1)).unwrap();
        let a2 = gen_counterfactual(&y0, &t1, &t0, &cfg(2.0, 0.5, 0.05, 1)).unwrap();
        let b = gen_counterfactual(&y0, &t1, &t0, &cfg(2.0, 0.5, 0.05, 2)).unwrap();
        assert_eq!(a, a2);
        assert_eq!(a.tau_true, b.tau_true);
        assert_ne!(a.y1, b.y1);
        for (i, tau) in a.tau_true.iter().enumerate() {
            assert!(tau.abs() <= 0.5);
            assert!((a.y1[i] - tau).abs() < 0.5, "noise far too large");
        }
    }

    #[test]
    fn zero_magnitude_zero_effect() {
        let out = gen_counterfactual(&[1.0, 2.0], &[3.0, -1.0], &[0.0, 0.0], &cfg(2.0, 0.0, 0.0, 0))
            .unwrap();
        assert!(out.tau_true.iter().all(|&t| t == 0.0));
    }

    #[test]
    fn centering_and_odd_symmetry() {
        let t1: Vec<f64> = (0..20).map(|i| i as f64 * 0.1).collect();
        let t0 = vec![0.0; 20];
        let y0 = vec![0.0; 20];
        let out = gen_counterfactual(&y0, &t1, &t0, &cfg(2.0, 0.5, 0.0, 0)).unwrap();
        // differences are symmetric about their mean, so the effect sums to zero
        assert!(out.tau_true.iter().sum::<f64>().abs() < 1e-12);
        let swapped = gen_counterfactual(&y0, &t0, &t1, &cfg(2.0, 0.5, 0.0, 0)).unwrap();
        assert_eq!(swapped.mu_t, -out.mu_t);
        for i in 0..20 {
            assert!((swapped.tau_true[i] + out.tau_true[i]).abs() < 1e-12);
        }
    }

    #[test]
    fn rejects_bad_input() {
        assert!(gen_counterfactual(&[1.0], &[1.0, 2.0], &[1.0], &SynthConfig::default()).is_err());
        assert!(gen_counterfactual(&[1.0], &[1.0], &[1.0], &cfg(0.0, 1.0, 0.0, 0)).is_err());
        assert!(gen_counterfactual(&[1.0], &[1.0], &[1.0], &cfg(1.0, 1.0, -1.0, 0)).is_err());
    }

    #[test]
    fn base_frame_is_valid_and_deterministic() {
        let start = NaiveDate::from_ymd_opt(2020, 1, 1).unwrap();
        let a = generate_base_frame(400, start, 7).unwrap();
        let b = generate_base_frame(400, start, 7).unwrap();
        assert_eq!(a, b);
        assert_eq!(a.len(), 400);
        let sit = a.column("sit").unwrap();
        assert!(sit.iter().all(|&s| s > 0.0 && s < 10.0));
        let vtot = a.column("vtot").unwrap();
        let mean_v = vtot.iter().sum::<f64>() / 400.0;
        assert!(mean_v > 0.005 && mean_v < 0.5, "{mean_v}");
    }

    #[test]
    fn csv_with_sidecar() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("cf.csv");
        let d0 = NaiveDate::from_ymd_opt(2020, 1, 1).unwrap();
        let dates = vec![d0, d0.succ_opt().unwrap()];
        let c = SynthConfig::default();
        let out = gen_counterfactual(&[0.0, 1.0], &[1.0, 1.0], &[0.0, 0.5], &c).unwrap();
        write_counterfactual_csv(&p, &dates, &[0.0, 1.0], &[0.0, 0.5], &[1.0, 1.0], &out, &c)
            .unwrap();
        let text = std::fs::read_to_string(&p).unwrap();
        assert!(text.starts_with("date,y0,y1,t0,t1,tau_true\n2020-01-01,"));
        let meta: serde_json::Value =
            serde_json::from_str(&std::fs::read_to_string(dir.path().join("cf.meta.json")).unwrap())
                .unwrap();
        assert_eq!(meta["mu_t"], serde_json::json!(0.75));
    }
}
