//! Elementary per-activity HMMs trained by Baum-Welch, their composition
//! into one flat decodable chain, and the Viterbi / forward-backward
//! recursions. All recursions run in log space or with per-step scaling, so
//! long sequences neither underflow nor overflow.

use super::gmm::{self, GaussianMixture};
use super::SequenceError;
use crate::seed;
use serde::{Deserialize, Serialize};

/// Baum-Welch iteration cap.
pub const BW_MAX_ITERS: usize = 100;
/// Baum-Welch relative log-likelihood gain below which training stops.
pub const BW_REL_TOL: f64 = 1e-5;
/// Default self-transition probability used to initialize elementary chains.
pub const DEFAULT_LOOP_INIT: f64 = 0.9;
/// Default within-activity mass retained when flattening the hierarchy.
pub const DEFAULT_STAY: f64 = 0.95;
/// Posterior mass below which a row or component keeps its old parameters.
const ZERO_MASS: f64 = 1e-12;

/// One activity's lower-level chain: `m` states with GMM emissions.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ElementaryHmm {
    /// Row-stochastic `m x m` state transition matrix.
    pub transitions: Vec<Vec<f64>>,
    /// Initial state distribution, length `m`.
    pub initial: Vec<f64>,
    /// One emission mixture per state.
    pub emissions: Vec<GaussianMixture>,
}

impl ElementaryHmm {
    pub fn state_count(&self) -> usize {
        self.initial.len()
    }

    pub fn dim(&self) -> usize {
        self.emissions[0].dim()
    }
}

/// A trained elementary chain plus its per-iteration log-likelihood trace.
#[derive(Debug, Clone)]
pub struct BaumWelchOutcome {
    pub hmm: ElementaryHmm,
    pub loglik_trace: Vec<f64>,
}

/// An elementary chain labeled with the activity it models.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ActivityModel {
    pub label: String,
    pub hmm: ElementaryHmm,
}

/// The fixed upper-level chain over activities: a row-stochastic matrix set
/// a priori plus a uniform initial activity distribution.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ActivityTransitions {
    pub matrix: Vec<Vec<f64>>,
    pub initial: Vec<f64>,
}

impl ActivityTransitions {
    /// Uniform transitions and initial distribution over `n` activities.
    pub fn uniform(n: usize) -> Self {
        assert!(n >= 1);
        ActivityTransitions {
            matrix: vec![vec![1.0 / n as f64; n]; n],
            initial: vec![1.0 / n as f64; n],
        }
    }

    /// Wraps a caller-supplied matrix, validating stochasticity; the initial
    /// distribution is always uniform.
    pub fn new(matrix: Vec<Vec<f64>>) -> Result<Self, SequenceError> {
        let n = matrix.len();
        if n == 0 {
            return Err(SequenceError::InvalidModel("empty activity matrix".into()));
        }
        for row in &matrix {
            if row.len() != n {
                return Err(SequenceError::InvalidModel("activity matrix not square".into()));
            }
            let sum: f64 = row.iter().sum();
            if (sum - 1.0).abs() > 1e-9 || row.iter().any(|&v| v < 0.0) {
                return Err(SequenceError::InvalidModel(format!(
                    "activity matrix row sums to {}, expected 1",
                    sum
                )));
            }
        }
        Ok(ActivityTransitions { matrix, initial: vec![1.0 / n as f64; n] })
    }
}

/// The flattened hierarchy: one state per (activity, elementary state) pair.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CompositeHmm {
    pub transitions: Vec<Vec<f64>>,
    pub initial: Vec<f64>,
    pub emissions: Vec<GaussianMixture>,
    /// Activity labels, indexed by activity.
    pub labels: Vec<String>,
    /// Composite state -> (activity index, elementary state index).
    pub state_map: Vec<(usize, usize)>,
}

impl CompositeHmm {
    pub fn state_count(&self) -> usize {
        self.initial.len()
    }

    pub fn dim(&self) -> usize {
        self.emissions[0].dim()
    }

    /// Activity index of a composite state.
    pub fn activity_of(&self, state: usize) -> usize {
        self.state_map[state].0
    }
}

/// A decoded activity timeline: one label per observation segment.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DecodedTimeline {
    pub labels: Vec<String>,
    /// Decoded composite state indices, parallel to `labels`.
    pub states: Vec<usize>,
    /// Log probability of the decoded path.
    pub log_probability: f64,
}

/// Posterior state marginals and the two independently scaled total
/// log-likelihoods; they agree up to numerical error.
#[derive(Debug, Clone, PartialEq)]
pub struct ForwardBackward {
    /// Per-segment posterior over composite states; each row sums to one.
    pub posteriors: Vec<Vec<f64>>,
    pub forward_loglik: f64,
    pub backward_loglik: f64,
}

impl ForwardBackward {
    pub fn log_likelihood(&self) -> f64 {
        self.forward_loglik
    }
}

/// Log emission matrix `logb[t][i]`, validating dimensions.
fn emission_log_matrix(
    emissions: &[GaussianMixture],
    observations: &[Vec<f64>],
) -> Result<Vec<Vec<f64>>, SequenceError> {
    let dim = emissions[0].dim();
    let mut logb = Vec::with_capacity(observations.len());
    for obs in observations {
        if obs.len() != dim {
            return Err(SequenceError::DimensionMismatch { expected: dim, got: obs.len() });
        }
        logb.push(emissions.iter().map(|e| e.log_density(obs)).collect());
    }
    Ok(logb)
}

/// Per-step max shift of the log emissions: `shifted[t][i] = exp(logb[t][i]
/// - shifts[t])` is in (0, 1] with at least one entry equal to 1.
fn shift_rows(logb: &[Vec<f64>]) -> (Vec<f64>, Vec<Vec<f64>>) {
    let shifts: Vec<f64> = logb
        .iter()
        .map(|row| row.iter().copied().fold(f64::NEG_INFINITY, f64::max))
        .collect();
    let shifted = logb
        .iter()
        .zip(&shifts)
        .map(|(row, m)| row.iter().map(|v| (v - m).exp()).collect())
        .collect();
    (shifts, shifted)
}

/// Scaled forward recursion. Returns per-step normalized forward variables
/// and the normalizers; the total log-likelihood is the sum of the log
/// normalizers plus the emission shifts.
fn forward_pass(
    transitions: &[Vec<f64>],
    initial: &[f64],
    shifted: &[Vec<f64>],
) -> (Vec<Vec<f64>>, Vec<f64>) {
    let n = initial.len();
    let t_len = shifted.len();
    let mut alphas = vec![vec![0.0; n]; t_len];
    let mut scales = vec![0.0; t_len];
    for i in 0..n {
        alphas[0][i] = initial[i] * shifted[0][i];
    }
    scales[0] = alphas[0].iter().sum();
    for v in alphas[0].iter_mut() {
        *v /= scales[0];
    }
    for t in 1..t_len {
        for j in 0..n {
            let mut acc = 0.0;
            for i in 0..n {
                acc += alphas[t - 1][i] * transitions[i][j];
            }
            alphas[t][j] = acc * shifted[t][j];
        }
        scales[t] = alphas[t].iter().sum();
        for v in alphas[t].iter_mut() {
            *v /= scales[t];
        }
    }
    (alphas, scales)
}

fn forward_loglik(scales: &[f64], shifts: &[f64]) -> f64 {
    scales.iter().map(|s| s.ln()).sum::<f64>() + shifts.iter().sum::<f64>()
}

/// Viterbi over a precomputed log emission matrix; ties at every maximum go
/// to the lowest state index.
pub(crate) fn viterbi_on_log_emissions(
    transitions: &[Vec<f64>],
    initial: &[f64],
    logb: &[Vec<f64>],
) -> (Vec<usize>, f64) {
    let n = initial.len();
    let t_len = logb.len();
    let log_a: Vec<Vec<f64>> =
        transitions.iter().map(|row| row.iter().map(|v| v.ln()).collect()).collect();
    let mut delta: Vec<f64> = (0..n).map(|i| initial[i].ln() + logb[0][i]).collect();
    let mut back = vec![vec![0usize; n]; t_len];
    for t in 1..t_len {
        let mut next = vec![f64::NEG_INFINITY; n];
        for j in 0..n {
            let mut best = f64::NEG_INFINITY;
            let mut best_i = 0;
            for i in 0..n {
                let cand = delta[i] + log_a[i][j];
                if cand > best {
                    best = cand;
                    best_i = i;
                }
            }
            next[j] = best + logb[t][j];
            back[t][j] = best_i;
        }
        delta = next;
    }
    let mut best_state = 0;
    let mut best = f64::NEG_INFINITY;
    for (i, &v) in delta.iter().enumerate() {
        if v > best {
            best = v;
            best_state = i;
        }
    }
    let mut states = vec![0usize; t_len];
    states[t_len - 1] = best_state;
    for t in (1..t_len).rev() {
        states[t - 1] = back[t][states[t]];
    }
    (states, best)
}

/// Decodes the maximum a posteriori composite state path and maps it to
/// activity labels.
pub fn viterbi(
    composite: &CompositeHmm,
    observations: &[Vec<f64>],
) -> Result<DecodedTimeline, SequenceError> {
    if observations.is_empty() {
        return Err(SequenceError::EmptyObservations);
    }
    let logb = emission_log_matrix(&composite.emissions, observations)?;
    let (states, log_probability) =
        viterbi_on_log_emissions(&composite.transitions, &composite.initial, &logb);
    let labels =
        states.iter().map(|&s| composite.labels[composite.activity_of(s)].clone()).collect();
    Ok(DecodedTimeline { labels, states, log_probability })
}

/// Scaled forward-backward over composite states. The backward pass uses its
/// own normalizers, independent of the forward pass, so the two returned
/// log-likelihoods are a genuine cross-check of each other.
pub fn forward_backward(
    composite: &CompositeHmm,
    observations: &[Vec<f64>],
) -> Result<ForwardBackward, SequenceError> {
    if observations.is_empty() {
        return Err(SequenceError::EmptyObservations);
    }
    let logb = emission_log_matrix(&composite.emissions, observations)?;
    let (shifts, shifted) = shift_rows(&logb);
    let n = composite.state_count();
    let t_len = observations.len();
    let (alphas, scales) = forward_pass(&composite.transitions, &composite.initial, &shifted);
    let fwd_ll = forward_loglik(&scales, &shifts);

    // Independently scaled backward recursion: beta_hat rows are normalized
    // to sum one and the discarded scale is accumulated in log_k.
    let mut betas = vec![vec![0.0; n]; t_len];
    let mut log_k = (n as f64).ln();
    for v in betas[t_len - 1].iter_mut() {
        *v = 1.0 / n as f64;
    }
    for t in (0..t_len - 1).rev() {
        let mut row = vec![0.0; n];
        for (i, slot) in row.iter_mut().enumerate() {
            let mut acc = 0.0;
            for j in 0..n {
                acc += composite.transitions[i][j] * shifted[t + 1][j] * betas[t + 1][j];
            }
            *slot = acc;
        }
        let d: f64 = row.iter().sum();
        for v in row.iter_mut() {
            *v /= d;
        }
        betas[t] = row;
        log_k += d.ln() + shifts[t + 1];
    }
    let head: f64 = (0..n)
        .map(|i| composite.initial[i] * shifted[0][i] * betas[0][i])
        .sum();
    let bwd_ll = shifts[0] + head.ln() + log_k;

    // Posteriors: the per-step scale factors of both recursions cancel in
    // the normalization.
    let mut posteriors = vec![vec![0.0; n]; t_len];
    for t in 0..t_len {
        let mut sum = 0.0;
        for i in 0..n {
            posteriors[t][i] = alphas[t][i] * betas[t][i];
            sum += posteriors[t][i];
        }
        for v in posteriors[t].iter_mut() {
            *v /= sum;
        }
    }
    Ok(ForwardBackward { posteriors, forward_loglik: fwd_ll, backward_loglik: bwd_ll })
}

/// Trains one activity's elementary chain with Baum-Welch.
///
/// Initialization: self-transitions at `loop_init` with the remaining mass
/// uniform, uniform initial distribution, and per-state mixtures fitted on
/// contiguous time chunks pooled across sequences. The variance floor is
/// computed once from all observations and shared by every state, so EM
/// stays monotone. Stops after [`BW_MAX_ITERS`] iterations or when the
/// relative log-likelihood gain drops below [`BW_REL_TOL`].
pub fn baum_welch(
    sequences: &[Vec<Vec<f64>>],
    m: usize,
    k: usize,
    loop_init: f64,
    seed_value: u64,
) -> Result<BaumWelchOutcome, SequenceError> {
    assert!(m >= 1, "need at least one state");
    assert!(k >= 1, "need at least one mixture component");
    assert!(loop_init > 0.0 && loop_init <= 1.0, "loop_init must be in (0, 1]");
    let sequences: Vec<&Vec<Vec<f64>>> = sequences.iter().filter(|s| !s.is_empty()).collect();
    let total: usize = sequences.iter().map(|s| s.len()).sum();
    if sequences.is_empty() || total < m * k {
        return Err(SequenceError::InsufficientData { needed: m * k, got: total });
    }
    let dim = sequences[0][0].len();
    let mut pooled: Vec<Vec<f64>> = Vec::with_capacity(total);
    for seq in &sequences {
        for obs in seq.iter() {
            if obs.len() != dim {
                return Err(SequenceError::DimensionMismatch { expected: dim, got: obs.len() });
            }
            pooled.push(obs.clone());
        }
    }
    let floor = gmm::variance_floor(&pooled);

    // Initial transition matrix and initial distribution.
    let mut transitions = vec![vec![0.0; m]; m];
    for (i, row) in transitions.iter_mut().enumerate() {
        for (j, v) in row.iter_mut().enumerate() {
            *v = if i == j {
                if m == 1 {
                    1.0
                } else {
                    loop_init
                }
            } else {
                (1.0 - loop_init) / (m as f64 - 1.0)
            };
        }
    }
    let initial = vec![1.0 / m as f64; m];

    // Initial emissions: pool each state's time chunk across sequences.
    let mut emissions = Vec::with_capacity(m);
    for s in 0..m {
        let mut pool: Vec<Vec<f64>> = Vec::new();
        for seq in &sequences {
            let t0 = s * seq.len() / m;
            let t1 = (s + 1) * seq.len() / m;
            for obs in &seq[t0..t1] {
                pool.push(obs.clone());
            }
        }
        if pool.len() < k {
            pool = pooled.clone();
        }
        let mut rng = seed::stream_rng(seed_value, 0x6877 + s as u64);
        emissions.push(gmm::fit_with_floor(&pool, k, &floor, &mut rng)?.mixture);
    }
    let mut hmm = ElementaryHmm { transitions, initial, emissions };

    let mut trace: Vec<f64> = Vec::new();
    for _ in 0..BW_MAX_ITERS {
        let mut total_ll = 0.0;
        let mut pi_acc = vec![0.0; m];
        let mut trans_num = vec![vec![0.0; m]; m];
        let mut trans_den = vec![0.0; m];
        let mut comp_mass = vec![vec![0.0; k]; m];
        let mut comp_sx = vec![vec![vec![0.0; dim]; k]; m];
        let mut comp_sx2 = vec![vec![vec![0.0; dim]; k]; m];

        for seq in &sequences {
            let t_len = seq.len();
            let logb = emission_log_matrix(&hmm.emissions, seq)?;
            let (shifts, shifted) = shift_rows(&logb);
            let (alphas, scales) = forward_pass(&hmm.transitions, &hmm.initial, &shifted);
            total_ll += forward_loglik(&scales, &shifts);

            // Backward, normalized per step; scale factors cancel in the
            // posterior ratios below.
            let mut betas = vec![vec![0.0; m]; t_len];
            for v in betas[t_len - 1].iter_mut() {
                *v = 1.0 / m as f64;
            }
            for t in (0..t_len - 1).rev() {
                let mut row = vec![0.0; m];
                for (i, slot) in row.iter_mut().enumerate() {
                    let mut acc = 0.0;
                    for j in 0..m {
                        acc += hmm.transitions[i][j] * shifted[t + 1][j] * betas[t + 1][j];
                    }
                    *slot = acc;
                }
                let d: f64 = row.iter().sum();
                for v in row.iter_mut() {
                    *v /= d;
                }
                betas[t] = row;
            }

            for t in 0..t_len {
                // State posteriors.
                let mut gamma = vec![0.0; m];
                let mut gsum = 0.0;
                for i in 0..m {
                    gamma[i] = alphas[t][i] * betas[t][i];
                    gsum += gamma[i];
                }
                for g in gamma.iter_mut() {
                    *g /= gsum;
                }
                if t == 0 {
                    for (acc, g) in pi_acc.iter_mut().zip(&gamma) {
                        *acc += g;
                    }
                }
                if t + 1 < t_len {
                    // Pairwise posteriors, normalized jointly over (i, j).
                    let mut xi = vec![vec![0.0; m]; m];
                    let mut xsum = 0.0;
                    for i in 0..m {
                        for j in 0..m {
                            let v = alphas[t][i]
                                * hmm.transitions[i][j]
                                * shifted[t + 1][j]
                                * betas[t + 1][j];
                            xi[i][j] = v;
                            xsum += v;
                        }
                    }
                    for (num_row, xi_row) in trans_num.iter_mut().zip(&xi) {
                        for (num, v) in num_row.iter_mut().zip(xi_row) {
                            *num += v / xsum;
                        }
                    }
                    for (den, g) in trans_den.iter_mut().zip(&gamma) {
                        *den += g;
                    }
                }
                // Component-level responsibilities within each state.
                for i in 0..m {
                    if gamma[i] <= ZERO_MASS {
                        continue;
                    }
                    let terms: Vec<f64> = hmm.emissions[i]
                        .weights
                        .iter()
                        .zip(&hmm.emissions[i].components)
                        .map(|(w, c)| w.ln() + c.log_density(&seq[t]))
                        .collect();
                    let lse = gmm::log_sum_exp(&terms);
                    for c in 0..k {
                        let r = gamma[i] * (terms[c] - lse).exp();
                        comp_mass[i][c] += r;
                        for d in 0..dim {
                            let x = seq[t][d];
                            comp_sx[i][c][d] += r * x;
                            comp_sx2[i][c][d] += r * x * x;
                        }
                    }
                }
            }
        }

        let converged = trace
            .last()
            .map(|prev: &f64| (total_ll - prev).abs() <= BW_REL_TOL * prev.abs().max(1e-12))
            .unwrap_or(false);
        trace.push(total_ll);
        if converged {
            break;
        }

        // M step.
        let pi_total: f64 = pi_acc.iter().sum();
        for (p, acc) in hmm.initial.iter_mut().zip(&pi_acc) {
            *p = acc / pi_total;
        }
        for i in 0..m {
            if trans_den[i] > ZERO_MASS {
                let row_sum: f64 = trans_num[i].iter().sum();
                for (a, num) in hmm.transitions[i].iter_mut().zip(&trans_num[i]) {
                    *a = num / row_sum;
                }
            }
        }
        for i in 0..m {
            let state_mass: f64 = comp_mass[i].iter().sum();
            if state_mass <= ZERO_MASS {
                continue;
            }
            for c in 0..k {
                hmm.emissions[i].weights[c] = comp_mass[i][c] / state_mass;
                if comp_mass[i][c] <= ZERO_MASS {
                    continue;
                }
                let mass = comp_mass[i][c];
                let mean: Vec<f64> = comp_sx[i][c].iter().map(|s| s / mass).collect();
                let variances: Vec<f64> = comp_sx2[i][c]
                    .iter()
                    .zip(&mean)
                    .zip(&floor)
                    .map(|((s2, mu), f)| (s2 / mass - mu * mu).max(*f))
                    .collect();
                hmm.emissions[i].components[c] = gmm::Gaussian { mean, variances };
            }
        }
    }
    Ok(BaumWelchOutcome { hmm, loglik_trace: trace })
}

/// Flattens per-activity chains under the fixed activity matrix into one
/// composite chain.
///
/// Within an activity the elementary transitions keep `stay` of the mass;
/// the remaining mass leaves toward other activities in proportion to the
/// activity matrix and enters them through their learned initial
/// distributions. The activity matrix's own diagonal is absorbed into
/// `stay`, so each row is renormalized by the mass that remains.
pub fn flatten(
    activities: &[ActivityModel],
    act: &ActivityTransitions,
    stay: f64,
) -> Result<CompositeHmm, SequenceError> {
    assert!(stay > 0.0 && stay < 1.0, "stay must be in (0, 1)");
    let n_act = activities.len();
    if n_act == 0 {
        return Err(SequenceError::InvalidModel("no activity models".into()));
    }
    if act.matrix.len() != n_act {
        return Err(SequenceError::InvalidModel(format!(
            "activity matrix is {}x{} but there are {} activities",
            act.matrix.len(),
            act.matrix.first().map(|r| r.len()).unwrap_or(0),
            n_act
        )));
    }
    let dim = activities[0].hmm.dim();
    for a in activities {
        if a.hmm.dim() != dim {
            return Err(SequenceError::DimensionMismatch { expected: dim, got: a.hmm.dim() });
        }
    }
    let offsets: Vec<usize> = activities
        .iter()
        .scan(0usize, |acc, a| {
            let start = *acc;
            *acc += a.hmm.state_count();
            Some(start)
        })
        .collect();
    let total: usize = activities.iter().map(|a| a.hmm.state_count()).sum();

    let mut transitions = vec![vec![0.0; total]; total];
    let mut initial = vec![0.0; total];
    let mut emissions = Vec::with_capacity(total);
    let mut state_map = Vec::with_capacity(total);
    for (a, model) in activities.iter().enumerate() {
        let ma = model.hmm.state_count();
        for i in 0..ma {
            let row = offsets[a] + i;
            for j in 0..ma {
                transitions[row][offsets[a] + j] = stay * model.hmm.transitions[i][j];
            }
            for (ap, target) in activities.iter().enumerate() {
                if ap == a {
                    continue;
                }
                for j in 0..target.hmm.state_count() {
                    transitions[row][offsets[ap] + j] =
                        (1.0 - stay) * act.matrix[a][ap] * target.hmm.initial[j];
                }
            }
            let row_sum: f64 = transitions[row].iter().sum();
            for v in transitions[row].iter_mut() {
                *v /= row_sum;
            }
            initial[row] = act.initial[a] * model.hmm.initial[i];
            emissions.push(model.hmm.emissions[i].clone());
            state_map.push((a, i));
        }
    }
    Ok(CompositeHmm {
        transitions,
        initial,
        emissions,
        labels: activities.iter().map(|a| a.label.clone()).collect(),
        state_map,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sequence::gmm::{gmm_fit, Gaussian};
    use approx::assert_relative_eq;
    use rand::prelude::*;
    use rand_chacha::ChaCha8Rng;

    fn normal(rng: &mut ChaCha8Rng) -> f64 {
        let u1: f64 = rng.gen_range(1e-12..1.0);
        let u2: f64 = rng.gen_range(0.0..1.0);
        (-2.0 * u1.ln()).sqrt() * (2.0 * std::f64::consts::PI * u2).cos()
    }

    fn stochastic_row(rng: &mut ChaCha8Rng, n: usize) -> Vec<f64> {
        let mut row: Vec<f64> = (0..n).map(|_| rng.gen_range(0.2..1.0)).collect();
        let sum: f64 = row.iter().sum();
        for v in row.iter_mut() {
            *v /= sum;
        }
        row
    }

    /// A random composite model with one activity per state and unit-variance
    /// scalar emissions.
    fn random_composite(rng: &mut ChaCha8Rng, n: usize) -> CompositeHmm {
        let transitions: Vec<Vec<f64>> = (0..n).map(|_| stochastic_row(rng, n)).collect();
        let initial = stochastic_row(rng, n);
        let emissions = (0..n)
            .map(|_| GaussianMixture {
                weights: vec![1.0],
                components: vec![Gaussian {
                    mean: vec![rng.gen_range(-3.0..3.0)],
                    variances: vec![rng.gen_range(0.5..2.0)],
                }],
            })
            .collect();
        CompositeHmm {
            transitions,
            initial,
            emissions,
            labels: (0..n).map(|i| format!("s{}", i)).collect(),
            state_map: (0..n).map(|i| (i, 0)).collect(),
        }
    }

    /// Oracle: path probability by direct multiplication.
    fn path_probability(model: &CompositeHmm, path: &[usize], obs: &[Vec<f64>]) -> f64 {
        let mut p = model.initial[path[0]] * model.emissions[path[0]].log_density(&obs[0]).exp();
        for t in 1..path.len() {
            p *= model.transitions[path[t - 1]][path[t]]
                * model.emissions[path[t]].log_density(&obs[t]).exp();
        }
        p
    }

    /// Oracle: enumerate all n^t paths in lexicographic order.
    fn enumerate_paths(n: usize, t: usize) -> Vec<Vec<usize>> {
        let mut paths = Vec::with_capacity(n.pow(t as u32));
        let mut current = vec![0usize; t];
        loop {
            paths.push(current.clone());
            let mut pos = t;
            while pos > 0 {
                pos -= 1;
                current[pos] += 1;
                if current[pos] < n {
                    break;
                }
                current[pos] = 0;
                if pos == 0 {
                    return paths;
                }
            }
        }
    }

    #[test]
    fn baum_welch_with_one_state_reduces_to_gmm_fit() {
        let mut rng = ChaCha8Rng::seed_from_u64(60);
        let seq: Vec<Vec<f64>> = (0..50).map(|_| vec![normal(&mut rng) * 2.0 + 1.0]).collect();
        let outcome = baum_welch(&[seq.clone()], 1, 1, 0.9, 5).unwrap();
        assert_eq!(outcome.hmm.transitions, vec![vec![1.0]]);
        assert_eq!(outcome.hmm.initial, vec![1.0]);
        let gmm = gmm_fit(&seq, 1, 5).unwrap();
        let bw_comp = &outcome.hmm.emissions[0].components[0];
        let gm_comp = &gmm.mixture.components[0];
        assert_relative_eq!(bw_comp.mean[0], gm_comp.mean[0], epsilon = 1e-9);
        assert_relative_eq!(bw_comp.variances[0], gm_comp.variances[0], epsilon = 1e-9);
    }

    fn alternating_sequences(rng: &mut ChaCha8Rng, n_seq: usize, block: usize, reps: usize) -> Vec<Vec<Vec<f64>>> {
        (0..n_seq)
            .map(|_| {
                let mut seq = Vec::new();
                for r in 0..reps {
                    let mean = if r % 2 == 0 { 0.0 } else { 5.0 };
                    for _ in 0..block {
                        seq.push(vec![mean + normal(rng)]);
                    }
                }
                seq
            })
            .collect()
    }

    #[test]
    fn baum_welch_trace_is_monotone_and_rows_stochastic() {
        let mut rng = ChaCha8Rng::seed_from_u64(61);
        let sequences = alternating_sequences(&mut rng, 3, 5, 8);
        let outcome = baum_welch(&sequences, 2, 1, 0.9, 11).unwrap();
        assert!(outcome.loglik_trace.len() >= 2);
        for w in outcome.loglik_trace.windows(2) {
            assert!(w[1] >= w[0] - 1e-8, "trace decreased: {} -> {}", w[0], w[1]);
        }
        for row in &outcome.hmm.transitions {
            let sum: f64 = row.iter().sum();
            assert_relative_eq!(sum, 1.0, epsilon = 1e-9);
            assert!(row.iter().all(|&v| v >= 0.0));
        }
        let pi_sum: f64 = outcome.hmm.initial.iter().sum();
        assert_relative_eq!(pi_sum, 1.0, epsilon = 1e-9);
        for e in &outcome.hmm.emissions {
            let wsum: f64 = e.weights.iter().sum();
            assert_relative_eq!(wsum, 1.0, epsilon = 1e-9);
        }
    }

    #[test]
    fn two_state_chain_recovers_the_emission_means() {
        let mut rng = ChaCha8Rng::seed_from_u64(62);

        // Grid oracle: for a short prefix, brute-force the data likelihood
        // over a grid of mean pairs by summing every state path; the grid
        // optimum must sit at (0, 5).
        let oracle_seq: Vec<Vec<f64>> = {
            let mut seq = Vec::new();
            for r in 0..4 {
                let mean = if r % 2 == 0 { 0.0 } else { 5.0 };
                for _ in 0..3 {
                    seq.push(vec![mean + 0.3 * normal(&mut rng)]);
                }
            }
            seq
        };
        let grid: Vec<f64> = vec![-2.0, -1.0, 0.0, 1.0, 2.0];
        let grid2: Vec<f64> = vec![3.0, 4.0, 5.0, 6.0, 7.0];
        let mut best = (f64::NEG_INFINITY, 0.0, 0.0);
        for &mu1 in &grid {
            for &mu2 in &grid2 {
                let g = |mu: f64, x: f64| {
                    (-0.5 * (x - mu) * (x - mu)).exp() / (2.0 * std::f64::consts::PI).sqrt()
                };
                let mut total = 0.0;
                for path in enumerate_paths(2, oracle_seq.len()) {
                    let means = [mu1, mu2];
                    let mut p = 0.5 * g(means[path[0]], oracle_seq[0][0]);
                    for t in 1..path.len() {
                        let a = if path[t - 1] == path[t] { 0.9 } else { 0.1 };
                        p *= a * g(means[path[t]], oracle_seq[t][0]);
                    }
                    total += p;
                }
                if total.ln() > best.0 {
                    best = (total.ln(), mu1, mu2);
                }
            }
        }
        assert_eq!((best.1, best.2), (0.0, 5.0));

        // Baum-Welch on longer data must land in the same neighborhood.
        let sequences = alternating_sequences(&mut rng, 4, 5, 8);
        let outcome = baum_welch(&sequences, 2, 1, 0.9, 13).unwrap();
        let mut means: Vec<f64> =
            outcome.hmm.emissions.iter().map(|e| e.components[0].mean[0]).collect();
        means.sort_by(|a, b| a.partial_cmp(b).unwrap());
        assert!((means[0] - 0.0).abs() < 0.5, "low mean {}", means[0]);
        assert!((means[1] - 5.0).abs() < 0.5, "high mean {}", means[1]);
    }

    #[test]
    fn baum_welch_needs_enough_observations() {
        let seq = vec![vec![0.0], vec![1.0], vec![2.0]];
        assert!(matches!(
            baum_welch(&[seq], 2, 2, 0.9, 0),
            Err(SequenceError::InsufficientData { needed: 4, got: 3 })
        ));
    }

    #[test]
    fn learned_variances_respect_the_floor() {
        let mut rng = ChaCha8Rng::seed_from_u64(63);
        let sequences = alternating_sequences(&mut rng, 2, 4, 6);
        let pooled: Vec<Vec<f64>> = sequences.iter().flatten().cloned().collect();
        let floor = gmm::variance_floor(&pooled);
        let outcome = baum_welch(&sequences, 3, 2, 0.9, 17).unwrap();
        for e in &outcome.hmm.emissions {
            for c in &e.components {
                for (v, f) in c.variances.iter().zip(&floor) {
                    assert!(v >= f, "variance {} below floor {}", v, f);
                }
            }
        }
    }

    #[test]
    fn viterbi_matches_exhaustive_enumeration() {
        let mut rng = ChaCha8Rng::seed_from_u64(64);
        for _ in 0..40 {
            let n = rng.gen_range(2..=4);
            let t = rng.gen_range(1..=8);
            let model = random_composite(&mut rng, n);
            let obs: Vec<Vec<f64>> = (0..t).map(|_| vec![rng.gen_range(-4.0..4.0)]).collect();
            let decoded = viterbi(&model, &obs).unwrap();

            let mut best_path = Vec::new();
            let mut best_p = f64::NEG_INFINITY;
            let mut runner_up = f64::NEG_INFINITY;
            for path in enumerate_paths(n, t) {
                let p = path_probability(&model, &path, &obs).ln();
                if p > best_p {
                    runner_up = best_p;
                    best_p = p;
                    best_path = path;
                } else if p > runner_up {
                    runner_up = p;
                }
            }
            assert_relative_eq!(decoded.log_probability, best_p, epsilon = 1e-9);
            if best_p - runner_up > 1e-9 {
                assert_eq!(decoded.states, best_path);
            }
        }
    }

    #[test]
    fn uniform_model_decodes_the_lowest_state() {
        let n = 3;
        let emission = GaussianMixture {
            weights: vec![1.0],
            components: vec![Gaussian { mean: vec![0.0], variances: vec![1.0] }],
        };
        let model = CompositeHmm {
            transitions: vec![vec![1.0 / n as f64; n]; n],
            initial: vec![1.0 / n as f64; n],
            emissions: vec![emission; n],
            labels: (0..n).map(|i| format!("s{}", i)).collect(),
            state_map: (0..n).map(|i| (i, 0)).collect(),
        };
        let obs: Vec<Vec<f64>> = (0..6).map(|i| vec![i as f64 * 0.3]).collect();
        let decoded = viterbi(&model, &obs).unwrap();
        assert_eq!(decoded.states, vec![0; 6]);
    }

    #[test]
    fn scaling_one_step_leaves_the_path_unchanged() {
        let mut rng = ChaCha8Rng::seed_from_u64(65);
        for _ in 0..20 {
            let n = rng.gen_range(2..=4);
            let t = rng.gen_range(2..=8);
            let model = random_composite(&mut rng, n);
            let obs: Vec<Vec<f64>> = (0..t).map(|_| vec![rng.gen_range(-4.0..4.0)]).collect();
            let logb: Vec<Vec<f64>> = obs
                .iter()
                .map(|o| model.emissions.iter().map(|e| e.log_density(o)).collect())
                .collect();
            let (base, _) = viterbi_on_log_emissions(&model.transitions, &model.initial, &logb);
            let mut scaled = logb.clone();
            let step = rng.gen_range(0..t);
            let factor = rng.gen_range(-30.0..30.0);
            for v in scaled[step].iter_mut() {
                *v += factor;
            }
            let (after, _) = viterbi_on_log_emissions(&model.transitions, &model.initial, &scaled);
            assert_eq!(base, after);
        }
    }

    #[test]
    fn decoding_stays_in_the_generating_activity() {
        let near = ActivityModel {
            label: "near".into(),
            hmm: ElementaryHmm {
                transitions: vec![vec![1.0]],
                initial: vec![1.0],
                emissions: vec![GaussianMixture {
                    weights: vec![1.0],
                    components: vec![Gaussian { mean: vec![0.0], variances: vec![1.0] }],
                }],
            },
        };
        let mut far = near.clone();
        far.label = "far".into();
        far.hmm.emissions[0].components[0].mean = vec![100.0];
        let composite =
            flatten(&[near, far], &ActivityTransitions::uniform(2), 0.95).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(66);
        let obs: Vec<Vec<f64>> = (0..12).map(|_| vec![normal(&mut rng)]).collect();
        let decoded = viterbi(&composite, &obs).unwrap();
        assert!(decoded.labels.iter().all(|l| l == "near"));
        let fb = forward_backward(&composite, &obs).unwrap();
        for row in &fb.posteriors {
            assert!(row[0] > 0.99, "posterior {} not dominated by the near state", row[0]);
        }
    }

    #[test]
    fn single_observation_posterior_is_initial_times_likelihood() {
        let mut rng = ChaCha8Rng::seed_from_u64(67);
        let model = random_composite(&mut rng, 3);
        let obs = vec![vec![0.7]];
        let fb = forward_backward(&model, &obs).unwrap();
        let raw: Vec<f64> = (0..3)
            .map(|i| model.initial[i] * model.emissions[i].log_density(&obs[0]).exp())
            .collect();
        let sum: f64 = raw.iter().sum();
        for (got, want) in fb.posteriors[0].iter().zip(&raw) {
            assert_relative_eq!(*got, want / sum, epsilon = 1e-12);
        }
        assert_relative_eq!(fb.forward_loglik, sum.ln(), epsilon = 1e-12);
        assert_relative_eq!(fb.backward_loglik, sum.ln(), epsilon = 1e-12);
    }

    #[test]
    fn posteriors_match_exhaustive_enumeration() {
        let mut rng = ChaCha8Rng::seed_from_u64(68);
        let model = random_composite(&mut rng, 3);
        let obs: Vec<Vec<f64>> = (0..5).map(|_| vec![rng.gen_range(-3.0..3.0)]).collect();
        let fb = forward_backward(&model, &obs).unwrap();

        let mut marginal = vec![vec![0.0; 3]; 5];
        let mut total = 0.0;
        for path in enumerate_paths(3, 5) {
            let p = path_probability(&model, &path, &obs);
            total += p;
            for (t, &s) in path.iter().enumerate() {
                marginal[t][s] += p;
            }
        }
        assert_relative_eq!(fb.forward_loglik, total.ln(), epsilon = 1e-9);
        for t in 0..5 {
            let row_sum: f64 = fb.posteriors[t].iter().sum();
            assert_relative_eq!(row_sum, 1.0, epsilon = 1e-9);
            for s in 0..3 {
                assert_relative_eq!(fb.posteriors[t][s], marginal[t][s] / total, epsilon = 1e-9);
            }
        }
    }

    #[test]
    fn forward_and_backward_likelihoods_agree() {
        let mut rng = ChaCha8Rng::seed_from_u64(69);
        for _ in 0..20 {
            let n = rng.gen_range(2..=5);
            let t = rng.gen_range(1..=50);
            let model = random_composite(&mut rng, n);
            let obs: Vec<Vec<f64>> = (0..t).map(|_| vec![rng.gen_range(-5.0..5.0)]).collect();
            let fb = forward_backward(&model, &obs).unwrap();
            assert!(
                (fb.forward_loglik - fb.backward_loglik).abs() <= 1e-8,
                "forward {} vs backward {}",
                fb.forward_loglik,
                fb.backward_loglik
            );
        }
    }

    #[test]
    fn flatten_two_singleton_activities_has_the_closed_form() {
        let make = |label: &str, mean: f64| ActivityModel {
            label: label.into(),
            hmm: ElementaryHmm {
                transitions: vec![vec![1.0]],
                initial: vec![1.0],
                emissions: vec![GaussianMixture {
                    weights: vec![1.0],
                    components: vec![Gaussian { mean: vec![mean], variances: vec![1.0] }],
                }],
            },
        };
        let stay = 0.95;
        let composite = flatten(
            &[make("a", 0.0), make("b", 1.0)],
            &ActivityTransitions::uniform(2),
            stay,
        )
        .unwrap();
        let denom = stay + 0.5 * (1.0 - stay);
        for i in 0..2 {
            assert_relative_eq!(composite.transitions[i][i], stay / denom, epsilon = 1e-15);
            assert_relative_eq!(
                composite.transitions[i][1 - i],
                0.5 * (1.0 - stay) / denom,
                epsilon = 1e-15
            );
            assert_relative_eq!(composite.initial[i], 0.5, epsilon = 1e-15);
        }
    }

    #[test]
    fn flatten_rows_are_stochastic_for_random_models() {
        let mut rng = ChaCha8Rng::seed_from_u64(70);
        for _ in 0..20 {
            let n_act = rng.gen_range(2..=4);
            let activities: Vec<ActivityModel> = (0..n_act)
                .map(|a| {
                    let m = rng.gen_range(1..=3);
                    ActivityModel {
                        label: format!("a{}", a),
                        hmm: ElementaryHmm {
                            transitions: (0..m).map(|_| stochastic_row(&mut rng, m)).collect(),
                            initial: stochastic_row(&mut rng, m),
                            emissions: (0..m)
                                .map(|_| GaussianMixture {
                                    weights: vec![1.0],
                                    components: vec![Gaussian {
                                        mean: vec![rng.gen_range(-2.0..2.0)],
                                        variances: vec![1.0],
                                    }],
                                })
                                .collect(),
                        },
                    }
                })
                .collect();
            let act_matrix: Vec<Vec<f64>> =
                (0..n_act).map(|_| stochastic_row(&mut rng, n_act)).collect();
            let act = ActivityTransitions::new(act_matrix).unwrap();
            let composite = flatten(&activities, &act, 0.9).unwrap();
            for row in &composite.transitions {
                let sum: f64 = row.iter().sum();
                assert!((sum - 1.0).abs() <= 1e-9);
                assert!(row.iter().all(|&v| v >= 0.0));
            }
            let init_sum: f64 = composite.initial.iter().sum();
            assert!((init_sum - 1.0).abs() <= 1e-9);
            // The state map is a bijection onto (activity, state) pairs.
            let mut seen = std::collections::HashSet::new();
            for &pair in &composite.state_map {
                assert!(seen.insert(pair));
            }
            assert_eq!(seen.len(), composite.state_count());
        }
    }

    #[test]
    fn flatten_matches_a_hand_assembled_six_state_matrix() {
        // All inputs are dyadic and the activity matrix has a zero diagonal,
        // so every row sum is exactly 1 and equality is exact.
        let gaussian = |mean: f64| GaussianMixture {
            weights: vec![1.0],
            components: vec![Gaussian { mean: vec![mean], variances: vec![1.0] }],
        };
        let act_a = ActivityModel {
            label: "a".into(),
            hmm: ElementaryHmm {
                transitions: vec![vec![0.75, 0.25], vec![0.5, 0.5]],
                initial: vec![0.5, 0.5],
                emissions: vec![gaussian(0.0), gaussian(1.0)],
            },
        };
        let act_b = ActivityModel {
            label: "b".into(),
            hmm: ElementaryHmm {
                transitions: vec![vec![0.25, 0.75], vec![0.625, 0.375]],
                initial: vec![0.25, 0.75],
                emissions: vec![gaussian(2.0), gaussian(3.0)],
            },
        };
        let act_c = ActivityModel {
            label: "c".into(),
            hmm: ElementaryHmm {
                transitions: vec![vec![0.875, 0.125], vec![0.375, 0.625]],
                initial: vec![0.125, 0.875],
                emissions: vec![gaussian(4.0), gaussian(5.0)],
            },
        };
        let act = ActivityTransitions::new(vec![
            vec![0.0, 0.5, 0.5],
            vec![0.25, 0.0, 0.75],
            vec![0.5, 0.5, 0.0],
        ])
        .unwrap();
        let stay = 0.5;
        let composite = flatten(&[act_a, act_b, act_c], &act, stay).unwrap();

        // Oracle: the same matrix assembled entry by entry from the block
        // formula, written out with explicit constants.
        let pi = [[0.5, 0.5], [0.25, 0.75], [0.125, 0.875]];
        let elem = [
            [[0.75, 0.25], [0.5, 0.5]],
            [[0.25, 0.75], [0.625, 0.375]],
            [[0.875, 0.125], [0.375, 0.625]],
        ];
        let act_m = [[0.0, 0.5, 0.5], [0.25, 0.0, 0.75], [0.5, 0.5, 0.0]];
        let mut expected = vec![vec![0.0; 6]; 6];
        for a in 0..3 {
            for i in 0..2 {
                let row = 2 * a + i;
                for j in 0..2 {
                    expected[row][2 * a + j] = 0.5 * elem[a][i][j];
                }
                for ap in 0..3 {
                    if ap == a {
                        continue;
                    }
                    for j in 0..2 {
                        expected[row][2 * ap + j] = (1.0 - stay) * act_m[a][ap] * pi[ap][j];
                    }
                }
            }
        }
        assert_eq!(composite.transitions, expected);
        let expected_initial: Vec<f64> = (0..6)
            .map(|s| (1.0f64 / 3.0) * pi[s / 2][s % 2])
            .collect();
        assert_eq!(composite.initial, expected_initial);
        assert_eq!(composite.state_map, vec![(0, 0), (0, 1), (1, 0), (1, 1), (2, 0), (2, 1)]);
    }

    #[test]
    fn flatten_rejects_mismatched_dimensions() {
        let a = ActivityModel {
            label: "a".into(),
            hmm: ElementaryHmm {
                transitions: vec![vec![1.0]],
                initial: vec![1.0],
                emissions: vec![GaussianMixture {
                    weights: vec![1.0],
                    components: vec![Gaussian { mean: vec![0.0], variances: vec![1.0] }],
                }],
            },
        };
        let mut b = a.clone();
        b.label = "b".into();
        b.hmm.emissions[0].components[0] =
            Gaussian { mean: vec![0.0, 0.0], variances: vec![1.0, 1.0] };
        assert!(matches!(
            flatten(&[a, b], &ActivityTransitions::uniform(2), 0.95),
            Err(SequenceError::DimensionMismatch { expected: 1, got: 2 })
        ));
    }

    #[test]
    fn decode_errors_are_reported() {
        let mut rng = ChaCha8Rng::seed_from_u64(71);
        let model = random_composite(&mut rng, 2);
        assert!(matches!(viterbi(&model, &[]), Err(SequenceError::EmptyObservations)));
        assert!(matches!(
            viterbi(&model, &[vec![0.0, 1.0]]),
            Err(SequenceError::DimensionMismatch { expected: 1, got: 2 })
        ));
    }
}
