//! Physically guided treatment signal and physical diagnostics.
//!
//! The treatment is the smoothed sea-surface height amplified by a sigmoid of
//! the smoothed total velocity:
//!
//! ```text
//! sigma_t     = 1 / (1 + exp(-a (v_smooth_t - v0)))
//! ssh_treat_t = (1 + beta_mod * sigma_t) * ssh_smooth_t
//! ```
//!
//! Samples are grouped for latent balancing by `sigma_t >= 0.5`, i.e. whether
//! the smoothed velocity sits at or above the transition center.

use serde::{Deserialize, Serialize};

use crate::error::{KgcmError, Result};

/// Sigmoid transition center: a fixed velocity or the training-split median.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TransitionCenter {
    Value(f64),
    Median,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TreatmentConfig {
    pub smooth_window: usize,
    pub steepness: f64,
    pub transition_center: TransitionCenter,
    pub beta_mod: f64,
}

impl Default for TreatmentConfig {
    fn default() -> Self {
        Self {
            smooth_window: 7,
            steepness: 10.0,
            transition_center: TransitionCenter::Median,
            beta_mod: 0.1,
        }
    }
}

impl TreatmentConfig {
    pub fn validate(&self) -> Result<()> {
        if self.smooth_window < 1 {
            return Err(KgcmError::Config("treatment.smooth_window must be >= 1".into()));
        }
        if !(self.steepness > 0.0) || !self.steepness.is_finite() {
            return Err(KgcmError::Config("treatment.a must be > 0".into()));
        }
        if !(self.beta_mod >= 0.0) || !self.beta_mod.is_finite() {
            return Err(KgcmError::Config("treatment.beta_mod must be >= 0".into()));
        }
        if let TransitionCenter::Value(v) = self.transition_center {
            if !v.is_finite() {
                return Err(KgcmError::Config("treatment.v0 must be finite".into()));
            }
        }
        Ok(())
    }
}

/// Outputs of the modulation scheme, aligned with the source series.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModulatedSeries {
    pub ssh_smooth: Vec<f64>,
    pub v_smooth: Vec<f64>,
    pub sigma: Vec<f64>,
    pub ssh_treat: Vec<f64>,
    pub group_label: Vec<u8>,
    /// Resolved transition center.
    pub v0: f64,
}

impl ModulatedSeries {
    pub fn len(&self) -> usize {
        self.sigma.len()
    }

    pub fn is_empty(&self) -> bool {
        self.sigma.is_empty()
    }
}

/// Centered moving average of width `window`. Near the edges the window is
/// truncated to the samples that exist (no padding), so `[1,2,3,4,5]` with
/// width 3 gives `[1.5, 2, 3, 4, 4.5]`. Even widths put the extra sample on
/// the right.
pub fn smooth(series: &[f64], window: usize) -> Result<Vec<f64>> {
    if window == 0 || window > series.len() {
        return Err(KgcmError::InvalidArgument(format!(
            "smoothing window {window} outside 1..={}",
            series.len()
        )));
    }
    let n = series.len();
    let left = (window - 1) / 2;
    let right = window - 1 - left;
    let out = (0..n)
        .map(|t| {
            let lo = t.saturating_sub(left);
            let hi = (t + right).min(n - 1);
            let s: f64 = series[lo..=hi].iter().sum();
            s / (hi - lo + 1) as f64
        })
        .collect();
    Ok(out)
}

/// Numerically stable logistic function.
pub fn logistic(x: f64) -> f64 {
    // both tails clamped so the value stays inside (0, 1)
    if x >= 0.0 {
        (1.0 / (1.0 + (-x).exp())).min(1.0 - f64::EPSILON / 2.0)
    } else {
        let e = x.exp();
        (e / (1.0 + e)).max(f64::MIN_POSITIVE)
    }
}

/// Elementwise `1 / (1 + exp(-a (v - v0)))`.
pub fn modulation_factor(v_smooth: &[f64], a: f64, v0: f64) -> Result<Vec<f64>> {
    if !(a > 0.0) {
        return Err(KgcmError::InvalidArgument(format!("steepness must be > 0, got {a}")));
    }
    if !v0.is_finite() {
        return Err(KgcmError::InvalidArgument("non-finite transition center".into()));
    }
    v_smooth
        .iter()
        .map(|&v| {
            if v.is_finite() {
                Ok(logistic(a * (v - v0)))
            } else {
                Err(KgcmError::InvalidArgument("non-finite velocity".into()))
            }
        })
        .collect()
}

/// Elementwise `(1 + beta_mod * sigma) * ssh_smooth`.
pub fn modulate(ssh_smooth: &[f64], sigma: &[f64], beta_mod: f64) -> Result<Vec<f64>> {
    if ssh_smooth.len() != sigma.len() {
        return Err(KgcmError::Shape(format!(
            "ssh has {} values, sigma {}",
            ssh_smooth.len(),
            sigma.len()
        )));
    }
    if !(beta_mod >= 0.0) {
        return Err(KgcmError::InvalidArgument("beta_mod must be >= 0".into()));
    }
    Ok(ssh_smooth
        .iter()
        .zip(sigma)
        .map(|(&s, &g)| (1.0 + beta_mod * g) * s)
        .collect())
}

pub fn median(values: &[f64]) -> Option<f64> {
    if values.is_empty() {
        return None;
    }
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    let m = v.len() / 2;
    Some(if v.len() % 2 == 1 {
        v[m]
    } else {
        0.5 * (v[m - 1] + v[m])
    })
}

/// Runs the full scheme on aligned SSH and total-velocity series.
///
/// `train_len` is the number of leading rows that belong to the training
/// split; a `Median` transition center is resolved on those rows only.
pub fn build_treatment(
    ssh: &[f64],
    vtot: &[f64],
    train_len: usize,
    cfg: &TreatmentConfig,
) -> Result<ModulatedSeries> {
    cfg.validate()?;
    if ssh.len() != vtot.len() {
        return Err(KgcmError::Shape("ssh and vtot lengths differ".into()));
    }
    let ssh_smooth = smooth(ssh, cfg.smooth_window)?;
    let v_smooth = smooth(vtot, cfg.smooth_window)?;
    let v0 = match cfg.transition_center {
        TransitionCenter::Value(v) => v,
        TransitionCenter::Median => median(&v_smooth[..train_len.min(v_smooth.len())])
            .ok_or_else(|| KgcmError::Data("empty training split for median v0".into()))?,
    };
    let sigma = modulation_factor(&v_smooth, cfg.steepness, v0)?;
    let ssh_treat = modulate(&ssh_smooth, &sigma, cfg.beta_mod)?;
    let group_label = sigma.iter().map(|&s| u8::from(s >= 0.5)).collect();
    Ok(ModulatedSeries {
        ssh_smooth,
        v_smooth,
        sigma,
        ssh_treat,
        group_label,
        v0,
    })
}

/// A series shifted forward by `lag` steps; the first `lag` positions have no value.
#[derive(Debug, Clone, PartialEq)]
pub struct LaggedSeries {
    values: Vec<f64>,
    lag: usize,
}

impl LaggedSeries {
    pub fn lag(&self) -> usize {
        self.lag
    }

    pub fn len(&self) -> usize {
        self.values.len() + self.lag
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// `input[t - lag]`, or `None` inside the invalid prefix.
    pub fn get(&self, t: usize) -> Option<f64> {
        t.checked_sub(self.lag).and_then(|s| self.values.get(s).copied())
    }

    /// The valid region, i.e. positions `lag..len`.
    pub fn valid(&self) -> &[f64] {
        &self.values
    }

    /// Shifts an already lagged series by `extra` further steps.
    pub fn shift(&self, extra: usize) -> Result<LaggedSeries> {
        if extra == 0 || extra >= self.values.len() {
            return Err(KgcmError::InvalidArgument(format!(
                "lag {extra} outside 1..{}",
                self.values.len()
            )));
        }
        Ok(LaggedSeries {
            values: self.values[..self.values.len() - extra].to_vec(),
            lag: self.lag + extra,
        })
    }
}

/// `output[t] = input[t - lag]`; positions `0..lag` are invalid.
pub fn lag_shift(series: &[f64], lag: usize) -> Result<LaggedSeries> {
    if lag == 0 || lag >= series.len() {
        return Err(KgcmError::InvalidArgument(format!(
            "lag {lag} outside 1..{}",
            series.len()
        )));
    }
    Ok(LaggedSeries {
        values: series[..series.len() - lag].to_vec(),
        lag,
    })
}

/// Inputs of the hydrostatic thickness relation.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct HydrostaticParams {
    /// Total freeboard (ice plus snow) [m].
    pub h_ice: f64,
    /// Sea surface height [m].
    pub h_ssh: f64,
    /// Snow depth [m].
    pub h_s: f64,
    pub rho_w: f64,
    pub rho_i: f64,
    pub rho_s: f64,
}

pub const RHO_WATER: f64 = 1024.0;
pub const RHO_ICE: f64 = 917.0;
pub const RHO_SNOW: f64 = 320.0;

impl HydrostaticParams {
    pub fn with_default_densities(h_ice: f64, h_ssh: f64, h_s: f64) -> Self {
        Self {
            h_ice,
            h_ssh,
            h_s,
            rho_w: RHO_WATER,
            rho_i: RHO_ICE,
            rho_s: RHO_SNOW,
        }
    }
}

/// Sea-ice thickness from freeboard, SSH and snow depth under hydrostatic
/// equilibrium.
pub fn hydrostatic_thickness(p: &HydrostaticParams) -> Result<f64> {
    let d = p.rho_w - p.rho_i;
    if d == 0.0 {
        return Err(KgcmError::InvalidArgument("rho_w equals rho_i".into()));
    }
    if !(p.rho_w > p.rho_i && p.rho_i > 0.0 && p.rho_w > p.rho_s && p.rho_s > 0.0) {
        return Err(KgcmError::InvalidArgument(format!(
            "densities must satisfy rho_w > rho_i > 0 and rho_w > rho_s > 0 (got {}, {}, {})",
            p.rho_w, p.rho_i, p.rho_s
        )));
    }
    if p.h_s < 0.0 {
        return Err(KgcmError::InvalidArgument("negative snow depth".into()));
    }
    Ok((p.h_ice - p.h_ssh) * (p.rho_w / d) - p.h_s * ((p.rho_w - p.rho_s) / d))
}

/// Inputs of the geostrophic surface-velocity relation.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GeostrophicParams {
    pub g: f64,
    pub f: f64,
    pub deta_dx: f64,
    pub deta_dy: f64,
}

pub const GRAVITY: f64 = 9.81;
/// Coriolis parameter near 75N.
pub const CORIOLIS_ARCTIC: f64 = 1.4e-4;

/// Geostrophic `(u, v)`: `u = -(g/f) d(eta)/dy`, `v = (g/f) d(eta)/dx`.
pub fn geostrophic_velocity(p: &GeostrophicParams) -> Result<(f64, f64)> {
    if p.f == 0.0 {
        return Err(KgcmError::InvalidArgument("Coriolis parameter is zero".into()));
    }
    let k = p.g / p.f;
    Ok((-k * p.deta_dy, k * p.deta_dx))
}
