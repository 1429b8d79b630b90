//! Diagonal-covariance Gaussian mixtures fitted by EM, plus the z-score
//! standardizer applied to observations before any fitting.

use super::SequenceError;
use crate::kmeans;
use crate::seed;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

const MAX_ITERS: usize = 100;
const REL_TOL: f64 = 1e-6;
/// Responsibility mass below which a component keeps its old parameters.
const ZERO_MASS: f64 = 1e-12;
/// Multiplier on the per-dimension global data variance giving the floor.
const FLOOR_RATIO: f64 = 1e-4;
/// Absolute lower bound on the variance floor for constant dimensions.
const FLOOR_MIN: f64 = 1e-10;

/// A diagonal-covariance Gaussian.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Gaussian {
    pub mean: Vec<f64>,
    pub variances: Vec<f64>,
}

impl Gaussian {
    /// Log density at `x`.
    pub fn log_density(&self, x: &[f64]) -> f64 {
        debug_assert_eq!(x.len(), self.mean.len());
        let mut acc = 0.0;
        for ((m, v), xi) in self.mean.iter().zip(&self.variances).zip(x) {
            let d = xi - m;
            acc += (2.0 * std::f64::consts::PI * v).ln() + d * d / v;
        }
        -0.5 * acc
    }
}

/// A mixture of diagonal Gaussians; weights sum to one.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GaussianMixture {
    pub weights: Vec<f64>,
    pub components: Vec<Gaussian>,
}

impl GaussianMixture {
    pub fn dim(&self) -> usize {
        self.components[0].mean.len()
    }

    /// Log density at `x`, summed over components in log space.
    pub fn log_density(&self, x: &[f64]) -> f64 {
        let terms: Vec<f64> = self
            .weights
            .iter()
            .zip(&self.components)
            .map(|(w, c)| w.ln() + c.log_density(x))
            .collect();
        log_sum_exp(&terms)
    }
}

/// log(sum(exp(values))) with the usual max shift; -inf for all -inf input.
pub(crate) fn log_sum_exp(values: &[f64]) -> f64 {
    let max = values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if !max.is_finite() {
        return max;
    }
    let sum: f64 = values.iter().map(|v| (v - max).exp()).sum();
    max + sum.ln()
}

/// A fitted mixture along with the EM log-likelihood trace, one entry per
/// iteration, non-decreasing.
#[derive(Debug, Clone)]
pub struct GmmFit {
    pub mixture: GaussianMixture,
    pub loglik_trace: Vec<f64>,
}

/// Per-dimension variance floor: a small fraction of the global data
/// variance, bounded away from zero for constant dimensions.
pub(crate) fn variance_floor(data: &[Vec<f64>]) -> Vec<f64> {
    let dim = data[0].len();
    let n = data.len() as f64;
    let mut mean = vec![0.0; dim];
    for row in data {
        for (m, v) in mean.iter_mut().zip(row) {
            *m += v;
        }
    }
    for m in mean.iter_mut() {
        *m /= n;
    }
    let mut var = vec![0.0; dim];
    for row in data {
        for ((acc, m), v) in var.iter_mut().zip(&mean).zip(row) {
            let d = v - m;
            *acc += d * d;
        }
    }
    var.iter().map(|s| (FLOOR_RATIO * s / n).max(FLOOR_MIN)).collect()
}

/// Fits a `k`-component mixture by EM from a k-means initialization. The
/// variance floor is computed once from `data` and never revisited, so the
/// floored M-step is still the exact constrained maximizer and the
/// log-likelihood trace is monotone.
pub fn gmm_fit(data: &[Vec<f64>], k: usize, seed_value: u64) -> Result<GmmFit, SequenceError> {
    if data.is_empty() || data.len() < k {
        return Err(SequenceError::InsufficientData { needed: k, got: data.len() });
    }
    let floor = variance_floor(data);
    let mut rng = seed::stream_rng(seed_value, 0x6d6d);
    fit_with_floor(data, k, &floor, &mut rng)
}

/// EM with a caller-fixed variance floor; shared with Baum-Welch, which
/// floors all states against the same global statistics.
pub(crate) fn fit_with_floor(
    data: &[Vec<f64>],
    k: usize,
    floor: &[f64],
    rng: &mut ChaCha8Rng,
) -> Result<GmmFit, SequenceError> {
    if data.is_empty() || data.len() < k {
        return Err(SequenceError::InsufficientData { needed: k, got: data.len() });
    }
    let dim = data[0].len();
    for row in data {
        if row.len() != dim {
            return Err(SequenceError::DimensionMismatch { expected: dim, got: row.len() });
        }
    }
    let n = data.len();

    // Initialization: k-means centroids as means, per-cluster variances,
    // lightly smoothed weights so no component starts dead.
    let subset: Vec<usize> = (0..n).collect();
    let km = kmeans::fit(data, &subset, k, rng);
    let global_floor_var: Vec<f64> = floor.iter().map(|f| (f / FLOOR_RATIO).max(1.0)).collect();
    let mut components = Vec::with_capacity(k);
    let mut weights = Vec::with_capacity(k);
    for c in 0..k {
        let members: Vec<usize> = (0..n).filter(|&i| km.assignments[i] == c).collect();
        let variances = if members.is_empty() {
            global_floor_var.clone()
        } else {
            let mut var = vec![0.0; dim];
            for &i in &members {
                for ((acc, m), v) in var.iter_mut().zip(&km.centroids[c]).zip(&data[i]) {
                    let d = v - m;
                    *acc += d * d;
                }
            }
            var.iter()
                .zip(floor)
                .map(|(s, f)| (s / members.len() as f64).max(*f))
                .collect()
        };
        components.push(Gaussian { mean: km.centroids[c].clone(), variances });
        weights.push((members.len() as f64 + 1.0) / (n as f64 + k as f64));
    }
    let mut mixture = GaussianMixture { weights, components };

    let mut trace = Vec::new();
    let mut responsibilities = vec![vec![0.0; k]; n];
    for _ in 0..MAX_ITERS {
        // E step.
        let mut loglik = 0.0;
        for (t, x) in data.iter().enumerate() {
            let terms: Vec<f64> = mixture
                .weights
                .iter()
                .zip(&mixture.components)
                .map(|(w, c)| w.ln() + c.log_density(x))
                .collect();
            let lse = log_sum_exp(&terms);
            loglik += lse;
            for (r, term) in responsibilities[t].iter_mut().zip(&terms) {
                *r = (term - lse).exp();
            }
        }
        let converged = trace
            .last()
            .map(|prev: &f64| (loglik - prev).abs() <= REL_TOL * prev.abs().max(1e-12))
            .unwrap_or(false);
        trace.push(loglik);
        if converged {
            break;
        }

        // M step; components with vanishing mass keep their parameters.
        for c in 0..k {
            let mass: f64 = responsibilities.iter().map(|r| r[c]).sum();
            mixture.weights[c] = mass / n as f64;
            if mass <= ZERO_MASS {
                continue;
            }
            let mut mean = vec![0.0; dim];
            for (r, x) in responsibilities.iter().zip(data) {
                for (m, v) in mean.iter_mut().zip(x) {
                    *m += r[c] * v;
                }
            }
            for m in mean.iter_mut() {
                *m /= mass;
            }
            let mut var = vec![0.0; dim];
            for (r, x) in responsibilities.iter().zip(data) {
                for ((acc, m), v) in var.iter_mut().zip(&mean).zip(x) {
                    let d = v - m;
                    *acc += r[c] * d * d;
                }
            }
            let variances: Vec<f64> =
                var.iter().zip(floor).map(|(s, f)| (s / mass).max(*f)).collect();
            mixture.components[c] = Gaussian { mean, variances };
        }
    }
    Ok(GmmFit { mixture, loglik_trace: trace })
}

/// Per-dimension z-score transform fitted on training data. Dimensions with
/// vanishing spread keep scale one so constant features pass through.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Standardizer {
    pub means: Vec<f64>,
    pub stds: Vec<f64>,
}

impl Standardizer {
    pub fn fit(data: &[Vec<f64>]) -> Standardizer {
        assert!(!data.is_empty(), "standardizer needs at least one observation");
        let dim = data[0].len();
        let n = data.len() as f64;
        let mut means = vec![0.0; dim];
        for row in data {
            for (m, v) in means.iter_mut().zip(row) {
                *m += v;
            }
        }
        for m in means.iter_mut() {
            *m /= n;
        }
        let mut stds = vec![0.0; dim];
        for row in data {
            for ((s, m), v) in stds.iter_mut().zip(&means).zip(row) {
                let d = v - m;
                *s += d * d;
            }
        }
        for s in stds.iter_mut() {
            *s = (*s / n).sqrt();
            if *s < 1e-12 {
                *s = 1.0;
            }
        }
        Standardizer { means, stds }
    }

    pub fn transform(&self, x: &[f64]) -> Vec<f64> {
        x.iter().zip(&self.means).zip(&self.stds).map(|((v, m), s)| (v - m) / s).collect()
    }

    pub fn transform_all(&self, data: &[Vec<f64>]) -> Vec<Vec<f64>> {
        data.iter().map(|x| self.transform(x)).collect()
    }
}
