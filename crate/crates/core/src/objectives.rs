//! Loss terms, evaluation metrics and finite-difference gradient checking.
//!
//! Plain-slice versions of each loss live here for evaluation and testing;
//! the `*_on_tape` variants build the same quantities on an autodiff tape for
//! training.

use ndarray::Array2;
use rand::seq::index::sample;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::autodiff::{rbf_gram, Tape, Var};
use crate::error::{KgcmError, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LossWeights {
    pub alpha_kl: f64,
    pub beta_mmd: f64,
}

impl Default for LossWeights {
    fn default() -> Self {
        Self {
            alpha_kl: 0.01,
            beta_mmd: 1.0,
        }
    }
}

impl LossWeights {
    pub fn validate(&self) -> Result<()> {
        if !(self.alpha_kl >= 0.0 && self.beta_mmd >= 0.0) {
            return Err(KgcmError::Config("loss weights must be >= 0".into()));
        }
        Ok(())
    }
}

/// RBF bandwidth: fixed, or the median heuristic on the pooled points.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Bandwidth {
    Fixed(f64),
    Median,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MmdConfig {
    pub bandwidth: Bandwidth,
}

impl Default for MmdConfig {
    fn default() -> Self {
        Self {
            bandwidth: Bandwidth::Median,
        }
    }
}

fn nonempty_same_len(a: &[f64], b: &[f64]) -> Result<()> {
    if a.len() != b.len() {
        return Err(KgcmError::Shape(format!("lengths {} and {}", a.len(), b.len())));
    }
    if a.is_empty() {
        return Err(KgcmError::InvalidArgument("empty input".into()));
    }
    Ok(())
}

/// `(1/N) sum (y_hat - y)^2`.
pub fn mse_loss(y_hat: &[f64], y: &[f64]) -> Result<f64> {
    nonempty_same_len(y_hat, y)?;
    Ok(y_hat.iter().zip(y).map(|(a, b)| (a - b) * (a - b)).sum::<f64>() / y.len() as f64)
}

pub fn rmse(y_hat: &[f64], y: &[f64]) -> Result<f64> {
    mse_loss(y_hat, y).map(f64::sqrt)
}

/// Mean squared difference between estimated and true effects (no root).
pub fn pehe(tau_hat: &[f64], tau: &[f64]) -> Result<f64> {
    mse_loss(tau_hat, tau)
}

/// KL divergence of `N(mu, exp(logvar))` from `N(0, I)`, summed over latent
/// dimensions and averaged over the rows of a batch.
pub fn kl_loss(mu: &Array2<f64>, logvar: &Array2<f64>) -> Result<f64> {
    if mu.dim() != logvar.dim() {
        return Err(KgcmError::Shape("mu and logvar differ in shape".into()));
    }
    if mu.iter().chain(logvar.iter()).any(|v| !v.is_finite()) {
        return Err(KgcmError::InvalidArgument("non-finite latent statistics".into()));
    }
    let s: f64 = mu
        .iter()
        .zip(logvar)
        .map(|(m, lv)| 1.0 + lv - m * m - lv.exp())
        .sum();
    Ok(-0.5 * s / mu.nrows().max(1) as f64)
}

/// `exp(-|x - y|^2 / (2 sigma^2))`.
pub fn rbf_kernel(x: &[f64], y: &[f64], sigma: f64) -> Result<f64> {
    if x.len() != y.len() {
        return Err(KgcmError::Shape("kernel arguments differ in dimension".into()));
    }
    if !(sigma > 0.0) {
        return Err(KgcmError::InvalidArgument(format!("bandwidth must be > 0, got {sigma}")));
    }
    let d2: f64 = x.iter().zip(y).map(|(a, b)| (a - b) * (a - b)).sum();
    Ok((-d2 / (2.0 * sigma * sigma)).exp())
}

/// `sqrt(median pairwise squared distance / 2)`, falling back to 1 when the
/// median is zero.
pub fn median_bandwidth(points: &Array2<f64>) -> Result<f64> {
    Ok(median_bandwidth_pairs(points)?.0)
}

/// Median bandwidth plus the pairs that set it: `(a, b, c)` with
/// `sigma^2 = sum c * |x_a - x_b|^2`. No pairs on the degenerate fallback.
pub fn median_bandwidth_pairs(points: &Array2<f64>) -> Result<(f64, Vec<(usize, usize, f64)>)> {
    let n = points.nrows();
    if n < 2 {
        return Err(KgcmError::InvalidArgument("median bandwidth needs >= 2 points".into()));
    }
    let mut d2 = Vec::with_capacity(n * (n - 1) / 2);
    for i in 0..n {
        for j in 0..i {
            let v: f64 = points.row(i).iter().zip(points.row(j)).map(|(a, b)| (a - b) * (a - b)).sum();
            d2.push((v, i, j));
        }
    }
    d2.sort_by(|a, b| a.0.total_cmp(&b.0));
    let m = d2.len() / 2;
    let picked: Vec<(usize, usize, f64)> = if d2.len() % 2 == 1 {
        vec![(d2[m].1, d2[m].2, 0.5)]
    } else {
        vec![(d2[m - 1].1, d2[m - 1].2, 0.25), (d2[m].1, d2[m].2, 0.25)]
    };
    let med = if d2.len() % 2 == 1 { d2[m].0 } else { 0.5 * (d2[m - 1].0 + d2[m].0) };
    Ok(if med > 0.0 { ((med / 2.0).sqrt(), picked) } else { (1.0, Vec::new()) })
}

fn resolve_bandwidth(cfg: &MmdConfig, pooled: &Array2<f64>) -> Result<f64> {
    match cfg.bandwidth {
        Bandwidth::Fixed(s) if s > 0.0 => Ok(s),
        Bandwidth::Fixed(s) => Err(KgcmError::InvalidArgument(format!("bandwidth must be > 0, got {s}"))),
        Bandwidth::Median if pooled.nrows() < 2 => Ok(1.0),
        Bandwidth::Median => median_bandwidth(pooled),
    }
}

/// Signed V-statistic weights: `1/|P|` for `labels == 0`, `-1/|Q|` for 1.
/// `None` when either group is empty.
pub fn group_weights(labels: &[u8]) -> Option<Vec<f64>> {
    let n1 = labels.iter().filter(|&&l| l == 1).count();
    let n0 = labels.len() - n1;
    if n0 == 0 || n1 == 0 {
        return None;
    }
    Some(
        labels
            .iter()
            .map(|&l| if l == 1 { -1.0 / n1 as f64 } else { 1.0 / n0 as f64 })
            .collect(),
    )
}

/// Biased MMD^2 between row sets `p` and `q`.
///
/// An empty group yields `Ok(0.0)`; callers that need to count such batches
/// check [`group_weights`] first.
pub fn mmd2(p: &Array2<f64>, q: &Array2<f64>, cfg: &MmdConfig) -> Result<f64> {
    if p.nrows() == 0 || q.nrows() == 0 {
        return Ok(0.0);
    }
    if p.ncols() != q.ncols() {
        return Err(KgcmError::Shape("MMD groups differ in dimension".into()));
    }
    let pooled = ndarray::concatenate(ndarray::Axis(0), &[p.view(), q.view()])
        .map_err(|e| KgcmError::Shape(e.to_string()))?;
    let sigma = resolve_bandwidth(cfg, &pooled)?;
    let k = rbf_gram(&pooled, sigma);
    let (np, nq) = (p.nrows(), q.nrows());
    let mut kpp = 0.0;
    let mut kqq = 0.0;
    let mut kpq = 0.0;
    for i in 0..np + nq {
        for j in 0..np + nq {
            match (i < np, j < np) {
                (true, true) => kpp += k[[i, j]],
                (false, false) => kqq += k[[i, j]],
                (true, false) => kpq += k[[i, j]],
                (false, true) => {}
            }
        }
    }
    let v = kpp / (np * np) as f64 + kqq / (nq * nq) as f64 - 2.0 * kpq / (np * nq) as f64;
    Ok(v.max(0.0))
}

/// Latent MMD^2 between the label-0 and label-1 rows of `z`.
pub fn grouped_mmd2(z: &Array2<f64>, labels: &[u8], cfg: &MmdConfig) -> Result<f64> {
    let pick = |want: u8| {
        let rows: Vec<usize> = (0..labels.len()).filter(|&i| labels[i] == want).collect();
        z.select(ndarray::Axis(0), &rows)
    };
    mmd2(&pick(0), &pick(1), cfg)
}

/// `l_pred + alpha_kl * l_kl + beta_mmd * l_mmd`.
pub fn total_loss(l_pred: f64, l_kl: f64, l_mmd: f64, w: &LossWeights) -> f64 {
    l_pred + w.alpha_kl * l_kl + w.beta_mmd * l_mmd
}

/// KL term on a tape (same reduction as [`kl_loss`]).
pub fn kl_on_tape(tape: &mut Tape, mu: Var, logvar: Var) -> Var {
    let rows = tape.value(mu).nrows().max(1) as f64;
    let one_plus = tape.add_scalar(logvar, 1.0);
    let mu2 = tape.square(mu);
    let var = tape.exp(logvar);
    let a = tape.sub(one_plus, mu2);
    let b = tape.sub(a, var);
    let s = tape.sum(b);
    tape.scale(s, -0.5 / rows)
}

/// Grouped MMD^2 on a tape. A median bandwidth is differentiated through,
/// so the loss stays scale free. `None` if a group is empty.
pub fn mmd2_on_tape(tape: &mut Tape, z: Var, labels: &[u8], cfg: &MmdConfig) -> Result<Option<Var>> {
    let Some(weights) = group_weights(labels) else {
        return Ok(None);
    };
    let (sigma, width) = match cfg.bandwidth {
        Bandwidth::Median if tape.value(z).nrows() >= 2 => median_bandwidth_pairs(tape.value(z))?,
        _ => (resolve_bandwidth(cfg, tape.value(z))?, Vec::new()),
    };
    Ok(Some(tape.mmd2_adaptive(z, weights, sigma, width)))
}

/// Per-run evaluation summary.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub rmse: f64,
    /// Absent in real-data mode (no ground-truth effects).
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub pehe: Option<f64>,
    /// PEHE of the constant-zero effect predictor on the same samples.
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub pehe_zero: Option<f64>,
    pub latent_mmd2: f64,
    pub n_samples: usize,
    pub lag: usize,
    pub seed: u64,
    pub config: serde_json::Value,
}

/// Outcome of a finite-difference gradient check.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GradCheckReport {
    pub coords: Vec<usize>,
    pub analytic: Vec<f64>,
    pub numeric: Vec<f64>,
    pub max_rel_error: f64,
    pub passed: bool,
}

/// Central-difference step.
pub const FD_STEP: f64 = 1e-5;
/// Lower bound of the relative-error denominator, so coordinates whose true
/// gradient is zero are judged on absolute error.
pub const REL_ERROR_FLOOR: f64 = 1e-6;

/// Compares `analytic` against central finite differences of `loss` at
/// `probe_count` seeded coordinates of `params`. Relative error is
/// `|a - n| / max(|a|, |n|, REL_ERROR_FLOOR)`.
pub fn grad_check(
    loss: impl Fn(&[f64]) -> f64,
    params: &[f64],
    analytic: &[f64],
    probe_count: usize,
    seed: u64,
    tol: f64,
) -> Result<GradCheckReport> {
    if params.len() != analytic.len() {
        return Err(KgcmError::Shape("gradient and parameter lengths differ".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut coords = sample(&mut rng, params.len(), probe_count.min(params.len())).into_vec();
    coords.sort_unstable();
    let mut x = params.to_vec();
    let mut numeric = Vec::with_capacity(coords.len());
    let mut max_rel: f64 = 0.0;
    for &c in &coords {
        let orig = x[c];
        x[c] = orig + FD_STEP;
        let up = loss(&x);
        x[c] = orig - FD_STEP;
        let down = loss(&x);
        x[c] = orig;
        if !up.is_finite() || !down.is_finite() {
            return Err(KgcmError::InvalidArgument(format!("non-finite loss probing coordinate {c}")));
        }
        let n = (up - down) / (2.0 * FD_STEP);
        let a = analytic[c];
        let rel = (a - n).abs() / a.abs().max(n.abs()).max(REL_ERROR_FLOOR);
        max_rel = max_rel.max(rel);
        numeric.push(n);
    }
    Ok(GradCheckReport {
        analytic: coords.iter().map(|&c| analytic[c]).collect(),
        coords,
        numeric,
        max_rel_error: max_rel,
        passed: max_rel < tol,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::array;

    #[test]
    fn mse_and_rmse() {
        assert_eq!(mse_loss(&[1.0, 2.0], &[1.0, 2.0]).unwrap(), 0.0);
        assert_eq!(mse_loss(&[1.0, -1.0], &[0.0, 0.0]).unwrap(), 1.0);
        let (a, b) = ([0.3, -1.2, 2.0], [0.1, 0.4, 1.0]);
        let c = 3.0;
        let sa: Vec<f64> = a.iter().map(|v| v * c).collect();
        let sb: Vec<f64> = b.iter().map(|v| v * c).collect();
        let lhs = mse_loss(&sa, &sb).unwrap();
        assert!((lhs - c * c * mse_loss(&a, &b).unwrap()).abs() < 1e-12);
        assert_eq!(rmse(&[3.0, 4.0, 0.0, 0.0], &[0.0; 4]).unwrap(), 2.5);
        assert!(mse_loss(&[], &[]).is_err());
        assert!(mse_loss(&[1.0], &[1.0, 2.0]).is_err());
    }

    #[test]
    fn kl_examples() {
        assert_eq!(kl_loss(&array![[0.0, 0.0]], &array![[0.0, 0.0]]).unwrap(), 0.0);
        assert_eq!(kl_loss(&array![[1.0]], &array![[0.0]]).unwrap(), 0.5);
        let v = kl_loss(&array![[0.0]], &array![[4f64.ln()]]).unwrap();
        assert!((v - 0.8068528194400547).abs() < 1e-12);
        assert!(kl_loss(&array![[f64::NAN]], &array![[0.0]]).is_err());
    }

    #[test]
    fn kernel_examples() {
        assert_eq!(rbf_kernel(&[1.0, 2.0], &[1.0, 2.0], 0.3).unwrap(), 1.0);
        let k = rbf_kernel(&[0.0, 0.0], &[0.6, 0.8], 1.0).unwrap();
        assert!((k - (-0.5f64).exp()).abs() < 1e-15);
        assert_eq!(
            rbf_kernel(&[0.1, 0.7], &[1.0, -0.2], 0.5).unwrap(),
            rbf_kernel(&[1.0, -0.2], &[0.1, 0.7], 0.5).unwrap()
        );
        assert!(rbf_kernel(&[0.0], &[1.0], 0.0).is_err());
    }

    #[test]
    fn bandwidth_examples() {
        let two = array![[0.0, 0.0], [1.0, 0.0]];
        assert!((median_bandwidth(&two).unwrap() - 0.5f64.sqrt()).abs() < 1e-15);
        assert_eq!(median_bandwidth(&array![[1.0], [1.0], [1.0]]).unwrap(), 1.0);
        let pts = array![[0.0, 1.0], [2.0, -1.0], [0.5, 0.5]];
        let scaled = &pts * 3.0;
        let (a, b) = (median_bandwidth(&pts).unwrap(), median_bandwidth(&scaled).unwrap());
        assert!((b - 3.0 * a).abs() < 1e-12);
        assert!(median_bandwidth(&array![[1.0]]).is_err());
    }

    #[test]
    fn mmd_examples() {
        let fixed = MmdConfig { bandwidth: Bandwidth::Fixed(1.0) };
        let p = array![[0.0], [1.0], [0.3]];
        let perm = array![[0.3], [0.0], [1.0]];
        assert!(mmd2(&p, &perm, &fixed).unwrap().abs() < 1e-12);
        let v = mmd2(&array![[0.0]], &array![[1.0]], &fixed).unwrap();
        assert!((v - (2.0 - 2.0 * (-0.5f64).exp())).abs() < 1e-12);
        let q = array![[2.0], [0.5]];
        assert_eq!(mmd2(&p, &q, &fixed).unwrap(), mmd2(&q, &p, &fixed).unwrap());
        assert_eq!(mmd2(&p, &Array2::zeros((0, 1)), &fixed).unwrap(), 0.0);
    }

    #[test]
    fn weighted_form_equals_three_term_form() {
        let z = array![[0.1, 0.2], [0.5, -0.3], [1.0, 1.0], [-0.2, 0.4], [0.0, 0.9]];
        let labels = [0, 1, 1, 0, 1];
        let cfg = MmdConfig { bandwidth: Bandwidth::Fixed(0.7) };
        let direct = grouped_mmd2(&z, &labels, &cfg).unwrap();
        let mut t = Tape::new();
        let v = t.leaf(z.clone());
        let m = mmd2_on_tape(&mut t, v, &labels, &cfg).unwrap().unwrap();
        assert!((t.scalar(m) - direct).abs() < 1e-14);
        assert!(mmd2_on_tape(&mut t, v, &[1, 1, 1, 1, 1], &cfg).unwrap().is_none());
    }

    #[test]
    fn total_loss_examples() {
        let w0 = LossWeights { alpha_kl: 0.0, beta_mmd: 0.0 };
        assert_eq!(total_loss(1.5, 9.0, 9.0, &w0), 1.5);
        let w1 = LossWeights { alpha_kl: 1.0, beta_mmd: 1.0 };
        assert_eq!(total_loss(1.0, 2.0, 3.0, &w1), 6.0);
        assert!(total_loss(1.0, 2.5, 3.0, &w1) > total_loss(1.0, 2.0, 3.0, &w1));
    }

    #[test]
    fn pehe_examples() {
        assert_eq!(pehe(&[0.2, 0.3], &[0.2, 0.3]).unwrap(), 0.0);
        assert_eq!(pehe(&[1.0, -1.0], &[0.0, 0.0]).unwrap(), 1.0);
    }

    #[test]
    fn kl_tape_matches_plain() {
        let mu = array![[0.3, -0.2], [1.0, 0.1]];
        let lv = array![[0.1, -0.5], [0.2, 0.0]];
        let mut t = Tape::new();
        let (m, l) = (t.leaf(mu.clone()), t.leaf(lv.clone()));
        let k = kl_on_tape(&mut t, m, l);
        assert!((t.scalar(k) - kl_loss(&mu, &lv).unwrap()).abs() < 1e-14);
    }

    #[test]
    fn grad_check_quadratic() {
        let x = vec![0.3, -1.2, 2.0, 0.7];
        let f = |v: &[f64]| v.iter().enumerate().map(|(i, a)| (i as f64 + 1.0) * a * a).sum::<f64>();
        let g: Vec<f64> = x.iter().enumerate().map(|(i, a)| 2.0 * (i as f64 + 1.0) * a).collect();
        let r = grad_check(f, &x, &g, 4, 0, 1e-8).unwrap();
        assert!(r.passed, "{r:?}");
        let wrong: Vec<f64> = g.iter().map(|v| v * 1.01).collect();
        assert!(!grad_check(f, &x, &wrong, 4, 0, 1e-4).unwrap().passed);
    }
}
