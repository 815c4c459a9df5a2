//! Exact inference over the trellis.
//!
//! The forward pass normalizes every alpha row to sum to one. Emission
//! densities are evaluated in log space and shifted by their per-step maximum
//! before exponentiation, so Gaussian steps far from every state mean cannot
//! underflow. The per-step normalizer (shift included) is kept as a log value:
//! `log_scales[t] = ln P(O_t | O_0..O_{t-1})` and the log-likelihood is their
//! sum.

use ndarray::{Array2, Array3};

use crate::error::{HmmError, Result};
use crate::model::{Emission, HmmModel, ObservationSequence};

const LN_2PI: f64 = 1.837_877_066_409_345_5;

/// Scaled trellis produced by [`forward`] / [`forward_backward`].
#[derive(Debug, Clone, PartialEq)]
pub struct TrellisResult {
    pub log_likelihood: f64,
    /// `τ × n`, each row sums to one.
    pub scaled_alpha: Array2<f64>,
    /// `τ × n`; present after a backward pass.
    pub scaled_beta: Option<Array2<f64>>,
    /// Log of each step's normalizer. `log_likelihood == log_scales.sum()`.
    pub log_scales: Vec<f64>,
}

/// EM sufficient statistics of one sequence.
#[derive(Debug, Clone, PartialEq)]
pub struct PosteriorStats {
    /// `gamma[[t, j]] = P(X_t = j | O)`.
    pub gamma: Array2<f64>,
    /// `xi[[t, i, j]] = P(X_t = i, X_{t+1} = j | O)`, shape `(τ-1) × n × n`.
    pub xi: Array3<f64>,
}

/// Density (Gaussian) or probability mass (discrete) of `value` in `state`.
pub fn emission_density(model: &HmmModel, state: usize, value: Observation) -> Result<f64> {
    Ok(log_emission(model, state, value)?.exp())
}

/// A single observation, borrowed from a sequence or given directly.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Observation {
    Value(f64),
    Symbol(usize),
}

fn log_emission(model: &HmmModel, state: usize, value: Observation) -> Result<f64> {
    if state >= model.n_states() {
        return Err(HmmError::InvalidObservation(format!(
            "state {state} outside [0, {})",
            model.n_states()
        )));
    }
    match (model.emission(), value) {
        (Emission::Gaussian { means, variances }, Observation::Value(x)) => {
            Ok(gaussian_log_density(x, means[state], variances[state]))
        }
        (Emission::Discrete { obs }, Observation::Symbol(k)) => {
            if k >= obs.ncols() {
                return Err(HmmError::InvalidObservation(format!(
                    "symbol {k} outside [0, {})",
                    obs.ncols()
                )));
            }
            Ok(obs[[state, k]].ln())
        }
        (e, v) => Err(HmmError::TypeMismatch {
            model: e.kind().name(),
            sequence: match v {
                Observation::Value(_) => "gaussian",
                Observation::Symbol(_) => "discrete",
            },
        }),
    }
}

#[inline]
fn gaussian_log_density(x: f64, mean: f64, var: f64) -> f64 {
    let d = x - mean;
    -0.5 * (LN_2PI + var.ln() + d * d / var)
}

/// `τ × n` matrix of log emission densities.
pub fn log_emission_matrix(model: &HmmModel, seq: &ObservationSequence) -> Result<Array2<f64>> {
    seq.check_against(model)?;
    let n = model.n_states();
    let tau = seq.len();
    let mut out = Array2::zeros((tau, n));
    match (model.emission(), seq) {
        (Emission::Gaussian { means, variances }, ObservationSequence::Continuous(xs)) => {
            let log_norm: Vec<f64> = variances.iter().map(|v| -0.5 * (LN_2PI + v.ln())).collect();
            for (t, &x) in xs.iter().enumerate() {
                for j in 0..n {
                    let d = x - means[j];
                    out[[t, j]] = log_norm[j] - 0.5 * d * d / variances[j];
                }
            }
        }
        (Emission::Discrete { obs }, ObservationSequence::Discrete(ks)) => {
            let log_obs = obs.mapv(f64::ln);
            for (t, &k) in ks.iter().enumerate() {
                for j in 0..n {
                    out[[t, j]] = log_obs[[j, k]];
                }
            }
        }
        _ => unreachable!("check_against verified the emission kind"),
    }
    Ok(out)
}

fn forward_from_log_emissions(model: &HmmModel, log_b: &Array2<f64>) -> Result<TrellisResult> {
    let (tau, n) = log_b.dim();
    let pi = model.pi();
    let trans = model.trans().as_slice().expect("standard layout");
    let log_b = log_b.as_slice().expect("standard layout");
    let mut alpha = vec![0.0; tau * n];
    let mut log_scales = Vec::with_capacity(tau);
    let mut pred = vec![0.0; n];

    for t in 0..tau {
        let row = &log_b[t * n..(t + 1) * n];
        let shift = row.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        if shift == f64::NEG_INFINITY {
            return Err(HmmError::ImpossibleSequence { step: t });
        }
        let (done, rest) = alpha.split_at_mut(t * n);
        let cur = &mut rest[..n];
        if t == 0 {
            pred.iter_mut().zip(pi.iter()).for_each(|(p, &v)| *p = v);
        } else {
            pred.fill(0.0);
            for (i, &a) in done[(t - 1) * n..].iter().enumerate() {
                if a == 0.0 {
                    continue;
                }
                for (p, &tr) in pred.iter_mut().zip(&trans[i * n..(i + 1) * n]) {
                    *p += a * tr;
                }
            }
        }
        let mut sum = 0.0;
        for ((c, &p), &lb) in cur.iter_mut().zip(&pred).zip(row) {
            *c = p * (lb - shift).exp();
            sum += *c;
        }
        if !(sum > 0.0 && sum.is_finite()) {
            return Err(HmmError::ImpossibleSequence { step: t });
        }
        let inv = 1.0 / sum;
        cur.iter_mut().for_each(|v| *v *= inv);
        log_scales.push(shift + sum.ln());
    }

    Ok(TrellisResult {
        log_likelihood: log_scales.iter().sum(),
        scaled_alpha: Array2::from_shape_vec((tau, n), alpha).expect("τ × n"),
        scaled_beta: None,
        log_scales,
    })
}

/// `exp(log_b[t, j] - log_scales[t])`, the per-step emission weights shared by
/// the backward pass and the transition posteriors.
fn scaled_emissions(log_b: &Array2<f64>, log_scales: &[f64]) -> Vec<f64> {
    let n = log_b.ncols();
    let log_b = log_b.as_slice().expect("standard layout");
    log_b
        .iter()
        .enumerate()
        .map(|(k, &lb)| (lb - log_scales[k / n]).exp())
        .collect()
}

fn backward_from_scaled(model: &HmmModel, scaled_b: &[f64], tau: usize) -> Array2<f64> {
    let n = model.n_states();
    let trans = model.trans().as_slice().expect("standard layout");
    let mut beta = vec![0.0; tau * n];
    beta[(tau - 1) * n..].fill(1.0);
    let mut weighted = vec![0.0; n];
    for t in (0..tau - 1).rev() {
        let (head, tail) = beta.split_at_mut((t + 1) * n);
        for ((w, &b), &e) in weighted
            .iter_mut()
            .zip(&tail[..n])
            .zip(&scaled_b[(t + 1) * n..(t + 2) * n])
        {
            *w = e * b;
        }
        for (i, out) in head[t * n..].iter_mut().enumerate() {
            *out = trans[i * n..(i + 1) * n]
                .iter()
                .zip(&weighted)
                .map(|(a, w)| a * w)
                .sum();
        }
    }
    Array2::from_shape_vec((tau, n), beta).expect("τ × n")
}

fn backward_from_log_emissions(model: &HmmModel, log_b: &Array2<f64>, log_scales: &[f64]) -> Result<Array2<f64>> {
    let tau = log_b.nrows();
    if log_scales.len() != tau {
        return Err(HmmError::LengthMismatch {
            expected: tau,
            got: log_scales.len(),
        });
    }
    Ok(backward_from_scaled(model, &scaled_emissions(log_b, log_scales), tau))
}

/// Scaled forward pass. `scaled_beta` is left empty.
pub fn forward(model: &HmmModel, seq: &ObservationSequence) -> Result<TrellisResult> {
    let log_b = log_emission_matrix(model, seq)?;
    forward_from_log_emissions(model, &log_b)
}

/// Scaled backward pass using the log normalizers from [`forward`] on the
/// same `(model, seq)`. The last row is all ones.
pub fn backward(model: &HmmModel, seq: &ObservationSequence, log_scales: &[f64]) -> Result<Array2<f64>> {
    let log_b = log_emission_matrix(model, seq)?;
    backward_from_log_emissions(model, &log_b, log_scales)
}

/// Forward and backward passes over one emission evaluation.
pub fn forward_backward(model: &HmmModel, seq: &ObservationSequence) -> Result<TrellisResult> {
    let log_b = log_emission_matrix(model, seq)?;
    let mut trellis = forward_from_log_emissions(model, &log_b)?;
    trellis.scaled_beta = Some(backward_from_log_emissions(model, &log_b, &trellis.log_scales)?);
    Ok(trellis)
}

/// `ln P(O | θ)`. Returns `-inf` when the sequence is impossible under the
/// model (discrete emissions with zero probability along every path).
pub fn log_likelihood(model: &HmmModel, seq: &ObservationSequence) -> Result<f64> {
    match forward(model, seq) {
        Ok(t) => Ok(t.log_likelihood),
        Err(HmmError::ImpossibleSequence { .. }) => Ok(f64::NEG_INFINITY),
        Err(e) => Err(e),
    }
}

/// State and transition posteriors.
pub fn posteriors(model: &HmmModel, seq: &ObservationSequence) -> Result<PosteriorStats> {
    let log_b = log_emission_matrix(model, seq)?;
    let trellis = forward_from_log_emissions(model, &log_b)?;
    let (tau, n) = log_b.dim();
    let scaled_b = scaled_emissions(&log_b, &trellis.log_scales);
    let beta = backward_from_scaled(model, &scaled_b, tau);
    let gamma = gamma_from(&trellis.scaled_alpha, &beta);
    let mut xi = Array3::zeros((tau.saturating_sub(1), n, n));
    for_each_transition(model, &trellis.scaled_alpha, &beta, &scaled_b, |t, i, row| {
        xi.slice_mut(ndarray::s![t, i, ..])
            .iter_mut()
            .zip(row)
            .for_each(|(x, &v)| *x = v);
    });
    Ok(PosteriorStats { gamma, xi })
}

/// Calls `visit(t, i, row)` with `row[j] = xi[t, i, j]` for every `t < τ-1`
/// and every `i` with nonzero forward mass.
fn for_each_transition(
    model: &HmmModel,
    alpha: &Array2<f64>,
    beta: &Array2<f64>,
    scaled_b: &[f64],
    mut visit: impl FnMut(usize, usize, &[f64]),
) {
    let (tau, n) = alpha.dim();
    let trans = model.trans().as_slice().expect("standard layout");
    let alpha = alpha.as_slice().expect("standard layout");
    let beta = beta.as_slice().expect("standard layout");
    let mut weighted = vec![0.0; n];
    let mut row = vec![0.0; n];
    for t in 0..tau.saturating_sub(1) {
        let next = (t + 1) * n..(t + 2) * n;
        for ((w, &e), &b) in weighted.iter_mut().zip(&scaled_b[next.clone()]).zip(&beta[next]) {
            *w = e * b;
        }
        for (i, &a) in alpha[t * n..(t + 1) * n].iter().enumerate() {
            if a == 0.0 {
                continue;
            }
            for ((r, &tr), &w) in row.iter_mut().zip(&trans[i * n..(i + 1) * n]).zip(&weighted) {
                *r = a * tr * w;
            }
            visit(t, i, &row);
        }
    }
}

fn gamma_from(alpha: &Array2<f64>, beta: &Array2<f64>) -> Array2<f64> {
    let mut gamma = alpha * beta;
    for mut row in gamma.rows_mut() {
        let s: f64 = row.sum();
        row.mapv_inplace(|v| v / s);
    }
    gamma
}

/// Per-sequence quantities needed by one Baum-Welch iteration, without
/// materializing the full `(τ-1) × n × n` transition tensor.
#[derive(Debug, Clone)]
pub(crate) struct ExpectedCounts {
    pub log_likelihood: f64,
    pub gamma: Array2<f64>,
    /// `Σ_t xi[t]`.
    pub xi_sum: Array2<f64>,
}

pub(crate) fn expected_counts(model: &HmmModel, seq: &ObservationSequence) -> Result<ExpectedCounts> {
    let log_b = log_emission_matrix(model, seq)?;
    let trellis = forward_from_log_emissions(model, &log_b)?;
    let (tau, n) = log_b.dim();
    let scaled_b = scaled_emissions(&log_b, &trellis.log_scales);
    let beta = backward_from_scaled(model, &scaled_b, tau);
    let gamma = gamma_from(&trellis.scaled_alpha, &beta);
    let mut xi_sum = vec![0.0; n * n];
    for_each_transition(model, &trellis.scaled_alpha, &beta, &scaled_b, |_, i, row| {
        for (acc, &v) in xi_sum[i * n..(i + 1) * n].iter_mut().zip(row) {
            *acc += v;
        }
    });
    Ok(ExpectedCounts {
        log_likelihood: trellis.log_likelihood,
        gamma,
        xi_sum: Array2::from_shape_vec((n, n), xi_sum).expect("n × n"),
    })
}

/// Most probable state path and its log joint probability `ln P(O, X | θ)`.
/// Ties resolve to the lowest state index.
pub fn viterbi(model: &HmmModel, seq: &ObservationSequence) -> Result<(Vec<usize>, f64)> {
    let log_b = log_emission_matrix(model, seq)?;
    let (tau, n) = log_b.dim();
    let log_pi = model.pi().mapv(f64::ln);
    let log_trans = model.trans().mapv(f64::ln);

    let mut delta: Vec<f64> = (0..n).map(|j| log_pi[j] + log_b[[0, j]]).collect();
    let mut next = vec![0.0; n];
    let mut back = Array2::<usize>::zeros((tau, n));
    for t in 1..tau {
        for j in 0..n {
            let mut best = f64::NEG_INFINITY;
            let mut arg = 0;
            for i in 0..n {
                let v = delta[i] + log_trans[[i, j]];
                if v > best {
                    best = v;
                    arg = i;
                }
            }
            next[j] = best + log_b[[t, j]];
            back[[t, j]] = arg;
        }
        std::mem::swap(&mut delta, &mut next);
    }

    let mut best = f64::NEG_INFINITY;
    let mut last = 0;
    for (j, &v) in delta.iter().enumerate() {
        if v > best {
            best = v;
            last = j;
        }
    }
    if best == f64::NEG_INFINITY {
        return Err(HmmError::ImpossibleSequence { step: tau - 1 });
    }
    let mut path = vec![0; tau];
    path[tau - 1] = last;
    for t in (1..tau).rev() {
        path[t - 1] = back[[t, path[t]]];
    }
    Ok((path, best))
}
