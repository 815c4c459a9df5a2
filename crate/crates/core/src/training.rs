//! Baum-Welch training.
//!
//! The E-step runs forward-backward on every sequence (in parallel), the
//! M-step is the closed-form constrained maximizer: normalized expected
//! counts for the initial distribution, transitions and discrete emissions,
//! and occupancy-weighted moments for Gaussian emissions.

use std::collections::BTreeSet;

use ndarray::{Array1, Array2};
use rand::SeedableRng;
use rand_chacha::ChaCha20Rng;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{HmmError, Result};
use crate::inference::{expected_counts, PosteriorStats};
use crate::model::{Emission, EmissionKind, HmmModel, ObservationSequence, DEFAULT_VARIANCE_FLOOR};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum InitScheme {
    /// Random |N(0,1)| rows for π and P; emission means ~ N(0,1), unit variances.
    PaperRandom,
    /// Uniform π and P; emission centres at evenly spaced quantiles of the data.
    DataQuantile,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainingConfig {
    pub n_states: usize,
    pub max_iterations: usize,
    pub rel_tolerance: f64,
    pub seed: u64,
    pub init_scheme: InitScheme,
    pub variance_floor: f64,
}

impl Default for TrainingConfig {
    fn default() -> Self {
        TrainingConfig {
            n_states: 17,
            max_iterations: 500,
            rel_tolerance: 1e-6,
            seed: 0,
            init_scheme: InitScheme::DataQuantile,
            variance_floor: DEFAULT_VARIANCE_FLOOR,
        }
    }
}

impl TrainingConfig {
    pub fn validate(&self) -> Result<()> {
        if self.n_states == 0 {
            return Err(HmmError::InvalidConfig("n_states must be positive".into()));
        }
        if self.max_iterations == 0 {
            return Err(HmmError::InvalidConfig("max_iterations must be positive".into()));
        }
        if !(self.rel_tolerance > 0.0 && self.rel_tolerance < 1.0) {
            return Err(HmmError::InvalidConfig("rel_tolerance must lie in (0, 1)".into()));
        }
        if !(self.variance_floor > 0.0 && self.variance_floor.is_finite()) {
            return Err(HmmError::InvalidConfig("variance_floor must be positive".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainingReport {
    /// Number of M-steps applied.
    pub iterations_run: usize,
    pub converged: bool,
    /// Total log-likelihood of the data under the model before each M-step,
    /// plus the returned model's value as the last entry.
    pub loglik_trace: Vec<f64>,
    pub final_loglik: f64,
    /// States that had zero occupancy in some M-step and kept their parameters.
    #[serde(default)]
    pub starved_states: Vec<usize>,
}

impl TrainingReport {
    /// `iteration,loglik` rows.
    pub fn trace_csv(&self) -> String {
        let mut s = String::from("iteration,loglik\n");
        for (i, ll) in self.loglik_trace.iter().enumerate() {
            s.push_str(&format!("{i},{ll}\n"));
        }
        s
    }

    /// Largest decrease between consecutive trace entries (0 if monotone).
    pub fn worst_decrease(&self) -> f64 {
        self.loglik_trace.windows(2).map(|w| w[0] - w[1]).fold(0.0, f64::max)
    }
}

/// Emission family of a model to be initialized.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum EmissionFamily {
    Gaussian,
    Discrete { n_symbols: usize },
}

impl EmissionFamily {
    /// Gaussian for real-valued data, discrete over `max symbol + 1` otherwise.
    pub fn infer(data: &[ObservationSequence]) -> Result<Self> {
        let first = data.first().ok_or(HmmError::EmptyTrainingSet { label: None })?;
        let kind = first.kind();
        if let Some(other) = data.iter().find(|s| s.kind() != kind) {
            return Err(HmmError::TypeMismatch {
                model: kind.name(),
                sequence: other.kind().name(),
            });
        }
        Ok(match kind {
            EmissionKind::Gaussian => EmissionFamily::Gaussian,
            EmissionKind::Discrete => {
                let max = data
                    .iter()
                    .filter_map(|s| match s {
                        ObservationSequence::Discrete(v) => v.iter().max().copied(),
                        _ => None,
                    })
                    .max()
                    .unwrap_or(0);
                EmissionFamily::Discrete { n_symbols: max + 1 }
            }
        })
    }
}

fn abs_normal_simplex(rng: &mut ChaCha20Rng, n: usize) -> Array1<f64> {
    loop {
        let raw: Array1<f64> = Array1::from_shape_fn(n, |_| {
            let z: f64 = StandardNormal.sample(&mut *rng);
            z.abs()
        });
        let s = raw.sum();
        if s > 0.0 && s.is_finite() {
            return raw.mapv(|v| v / s);
        }
    }
}

/// Type-7 (linear interpolation) quantile of sorted data.
fn quantile_sorted(sorted: &[f64], p: f64) -> f64 {
    let pos = p * (sorted.len() - 1) as f64;
    let lo = pos.floor() as usize;
    let hi = (lo + 1).min(sorted.len() - 1);
    let frac = pos - lo as f64;
    sorted[lo] + frac * (sorted[hi] - sorted[lo])
}

/// Builds the starting model for Baum-Welch. Deterministic in `config.seed`.
pub fn initialize_model(
    config: &TrainingConfig,
    family: EmissionFamily,
    data: &[ObservationSequence],
) -> Result<HmmModel> {
    config.validate()?;
    let n = config.n_states;
    if let EmissionFamily::Discrete { n_symbols: 0 } = family {
        return Err(HmmError::InvalidConfig("n_symbols must be positive".into()));
    }
    match config.init_scheme {
        InitScheme::PaperRandom => {
            let mut rng = ChaCha20Rng::seed_from_u64(config.seed);
            let pi = abs_normal_simplex(&mut rng, n);
            let mut trans = Array2::zeros((n, n));
            for i in 0..n {
                trans.row_mut(i).assign(&abs_normal_simplex(&mut rng, n));
            }
            let emission = match family {
                EmissionFamily::Gaussian => Emission::Gaussian {
                    means: Array1::from_shape_fn(n, |_| StandardNormal.sample(&mut rng)),
                    variances: Array1::from_elem(n, 1f64.max(config.variance_floor)),
                },
                EmissionFamily::Discrete { n_symbols } => {
                    let mut obs = Array2::zeros((n, n_symbols));
                    for j in 0..n {
                        obs.row_mut(j).assign(&abs_normal_simplex(&mut rng, n_symbols));
                    }
                    Emission::Discrete { obs }
                }
            };
            HmmModel::new(pi, trans, emission)
        }
        InitScheme::DataQuantile => {
            if data.iter().all(|s| s.is_empty()) {
                return Err(HmmError::EmptyTrainingSet { label: None });
            }
            let pi = Array1::from_elem(n, 1.0 / n as f64);
            let trans = Array2::from_elem((n, n), 1.0 / n as f64);
            let levels: Vec<f64> = (0..n).map(|j| (j as f64 + 0.5) / n as f64).collect();
            let emission = match family {
                EmissionFamily::Gaussian => {
                    let mut pooled = Vec::new();
                    for s in data {
                        match s {
                            ObservationSequence::Continuous(v) => pooled.extend_from_slice(v),
                            ObservationSequence::Discrete(_) => {
                                return Err(HmmError::TypeMismatch {
                                    model: "gaussian",
                                    sequence: "discrete",
                                })
                            }
                        }
                    }
                    pooled.sort_by(f64::total_cmp);
                    let m = pooled.iter().sum::<f64>() / pooled.len() as f64;
                    let var = pooled.iter().map(|x| (x - m) * (x - m)).sum::<f64>() / pooled.len() as f64;
                    Emission::Gaussian {
                        means: levels.iter().map(|&p| quantile_sorted(&pooled, p)).collect(),
                        variances: Array1::from_elem(n, var.max(config.variance_floor)),
                    }
                }
                EmissionFamily::Discrete { n_symbols } => {
                    let mut pooled = Vec::new();
                    for s in data {
                        match s {
                            ObservationSequence::Discrete(v) => pooled.extend_from_slice(v),
                            ObservationSequence::Continuous(_) => {
                                return Err(HmmError::TypeMismatch {
                                    model: "discrete",
                                    sequence: "gaussian",
                                })
                            }
                        }
                    }
                    if let Some(&k) = pooled.iter().find(|&&k| k >= n_symbols) {
                        return Err(HmmError::InvalidObservation(format!(
                            "symbol {k} outside [0, {n_symbols})"
                        )));
                    }
                    pooled.sort_unstable();
                    let mut freq = vec![0.0; n_symbols];
                    for &k in &pooled {
                        freq[k] += 1.0 / pooled.len() as f64;
                    }
                    // Half the pooled histogram, half a point mass on the state's quantile symbol.
                    let mut obs = Array2::zeros((n, n_symbols));
                    for (j, &p) in levels.iter().enumerate() {
                        let q = pooled[((p * pooled.len() as f64) as usize).min(pooled.len() - 1)];
                        for k in 0..n_symbols {
                            obs[[j, k]] = 0.5 * freq[k] + if k == q { 0.5 } else { 0.0 };
                        }
                        let s: f64 = obs.row(j).sum();
                        obs.row_mut(j).mapv_inplace(|v| v / s);
                    }
                    Emission::Discrete { obs }
                }
            };
            HmmModel::new(pi, trans, emission)
        }
    }
}

/// Result of one M-step.
#[derive(Debug, Clone, PartialEq)]
pub struct Reestimation {
    pub model: HmmModel,
    /// States with zero occupancy whose parameters were carried over.
    pub starved: Vec<usize>,
}

impl Reestimation {
    pub fn starved_error(&self) -> Option<HmmError> {
        self.starved.first().map(|&state| HmmError::StateStarved { state })
    }
}

fn normalize_row(row: &mut [f64]) {
    let s: f64 = row.iter().sum();
    row.iter_mut().for_each(|v| *v /= s);
}

/// Pooled M-step over `(gamma, Σ_t xi[t], sequence)` triples.
fn m_step<'a>(
    current: &HmmModel,
    stats: impl Iterator<Item = (&'a Array2<f64>, Array2<f64>, &'a ObservationSequence)> + Clone,
    variance_floor: f64,
) -> Result<Reestimation> {
    let n = current.n_states();
    let mut starved = BTreeSet::new();

    let mut pi_acc = vec![0.0; n];
    let mut trans_num = Array2::<f64>::zeros((n, n));
    let mut trans_den = vec![0.0; n];
    let mut occupancy = vec![0.0; n];
    let mut any = false;

    for (gamma, xi_sum, seq) in stats.clone() {
        any = true;
        let (tau, gn) = gamma.dim();
        if gn != n || xi_sum.dim() != (n, n) || tau != seq.len() || tau == 0 {
            return Err(HmmError::LengthMismatch { expected: n, got: gn });
        }
        for j in 0..n {
            pi_acc[j] += gamma[[0, j]];
            let col = gamma.column(j);
            let total: f64 = col.sum();
            occupancy[j] += total;
            trans_den[j] += total - gamma[[tau - 1, j]];
        }
        trans_num += &xi_sum;
    }
    if !any {
        return Err(HmmError::EmptyTrainingSet { label: None });
    }

    normalize_row(&mut pi_acc);
    let pi = Array1::from(pi_acc);

    let mut trans = current.trans().clone();
    for i in 0..n {
        if trans_den[i] > 0.0 && trans_num.row(i).sum() > 0.0 {
            let mut row: Vec<f64> = trans_num.row(i).iter().map(|v| v / trans_den[i]).collect();
            normalize_row(&mut row);
            trans.row_mut(i).assign(&Array1::from(row));
        } else {
            starved.insert(i);
        }
    }

    let emission = match current.emission() {
        Emission::Gaussian { means, variances } => {
            let mut new_means = means.clone();
            let mut new_vars = variances.clone();
            let mut weighted = vec![0.0; n];
            for (gamma, _, seq) in stats.clone() {
                let ObservationSequence::Continuous(xs) = seq else {
                    return Err(HmmError::TypeMismatch {
                        model: "gaussian",
                        sequence: "discrete",
                    });
                };
                for (t, &x) in xs.iter().enumerate() {
                    for j in 0..n {
                        weighted[j] += gamma[[t, j]] * x;
                    }
                }
            }
            let live: Vec<bool> = (0..n)
                .map(|j| occupancy[j] > 0.0 && (weighted[j] / occupancy[j]).is_finite())
                .collect();
            for j in 0..n {
                if live[j] {
                    new_means[j] = weighted[j] / occupancy[j];
                } else {
                    starved.insert(j);
                }
            }
            let mut sq = vec![0.0; n];
            for (gamma, _, seq) in stats {
                let ObservationSequence::Continuous(xs) = seq else {
                    unreachable!()
                };
                for (t, &x) in xs.iter().enumerate() {
                    for j in 0..n {
                        let d = x - new_means[j];
                        sq[j] += gamma[[t, j]] * d * d;
                    }
                }
            }
            for j in 0..n {
                if live[j] {
                    new_vars[j] = (sq[j] / occupancy[j]).max(variance_floor);
                }
            }
            Emission::Gaussian {
                means: new_means,
                variances: new_vars,
            }
        }
        Emission::Discrete { obs } => {
            let k = obs.ncols();
            let mut counts = Array2::<f64>::zeros((n, k));
            for (gamma, _, seq) in stats {
                let ObservationSequence::Discrete(ks) = seq else {
                    return Err(HmmError::TypeMismatch {
                        model: "discrete",
                        sequence: "gaussian",
                    });
                };
                for (t, &sym) in ks.iter().enumerate() {
                    for j in 0..n {
                        counts[[j, sym]] += gamma[[t, j]];
                    }
                }
            }
            let mut new_obs = obs.clone();
            for j in 0..n {
                if occupancy[j] > 0.0 && counts.row(j).sum() > 0.0 {
                    let mut row: Vec<f64> = counts.row(j).iter().map(|c| c / occupancy[j]).collect();
                    normalize_row(&mut row);
                    new_obs.row_mut(j).assign(&Array1::from(row));
                } else {
                    starved.insert(j);
                }
            }
            Emission::Discrete { obs: new_obs }
        }
    };

    Ok(Reestimation {
        model: HmmModel::new(pi, trans, emission)?,
        starved: starved.into_iter().collect(),
    })
}

/// Closed-form re-estimation from full posterior bundles, pooled across
/// sequences. Zero-occupancy states keep `current`'s parameters and are
/// listed in [`Reestimation::starved`].
pub fn reestimate(
    current: &HmmModel,
    bundles: &[(PosteriorStats, ObservationSequence)],
    variance_floor: f64,
) -> Result<Reestimation> {
    if bundles.is_empty() {
        return Err(HmmError::EmptyTrainingSet { label: None });
    }
    for (post, seq) in bundles {
        seq.check_against(current)?;
        let expected = seq.len().saturating_sub(1);
        if post.xi.dim().0 != expected {
            return Err(HmmError::LengthMismatch {
                expected,
                got: post.xi.dim().0,
            });
        }
    }
    let stats = bundles.iter().map(|(post, seq)| {
        let xi_sum = post.xi.sum_axis(ndarray::Axis(0));
        (&post.gamma, xi_sum, seq)
    });
    m_step(current, stats, variance_floor)
}

/// Runs EM from `init` until the relative improvement
/// `|Δℓ| / (1 + |ℓ|)` drops below `config.rel_tolerance` or
/// `config.max_iterations` M-steps have been applied.
pub fn baum_welch(
    init: &HmmModel,
    data: &[ObservationSequence],
    config: &TrainingConfig,
) -> Result<(HmmModel, TrainingReport)> {
    config.validate()?;
    if data.is_empty() {
        return Err(HmmError::EmptyTrainingSet { label: None });
    }
    for seq in data {
        seq.check_against(init)?;
        if seq.len() < 2 {
            return Err(HmmError::SequenceTooShort { len: seq.len(), min: 2 });
        }
    }

    let mut model = init.clone();
    let mut trace: Vec<f64> = Vec::new();
    let mut iterations = 0;
    let mut converged = false;
    let mut starved = BTreeSet::new();

    loop {
        let counts = data
            .par_iter()
            .map(|seq| expected_counts(&model, seq))
            .collect::<Result<Vec<_>>>()?;
        // fixed summation order keeps the result independent of scheduling
        let ll: f64 = counts.iter().map(|c| c.log_likelihood).sum();
        if let Some(&prev) = trace.last() {
            trace.push(ll);
            if ll < prev - 1e-8 {
                log::warn!("log-likelihood decreased by {} at iteration {iterations}", prev - ll);
            }
            if (ll - prev).abs() / (1.0 + ll.abs()) < config.rel_tolerance {
                converged = true;
                break;
            }
        } else {
            trace.push(ll);
        }
        if iterations == config.max_iterations {
            break;
        }
        let stats = counts
            .iter()
            .zip(data)
            .map(|(c, seq)| (&c.gamma, c.xi_sum.clone(), seq));
        let r = m_step(&model, stats, config.variance_floor)?;
        if !r.starved.is_empty() {
            log::debug!("iteration {iterations}: starved states {:?}", r.starved);
        }
        starved.extend(r.starved);
        model = r.model;
        iterations += 1;
    }

    let final_loglik = *trace.last().expect("at least one E-step");
    Ok((
        model,
        TrainingReport {
            iterations_run: iterations,
            converged,
            loglik_trace: trace,
            final_loglik,
            starved_states: starved.into_iter().collect(),
        },
    ))
}

/// [`initialize_model`] followed by [`baum_welch`].
pub fn train(data: &[ObservationSequence], config: &TrainingConfig) -> Result<(HmmModel, TrainingReport)> {
    let family = EmissionFamily::infer(data)?;
    let init = initialize_model(config, family, data)?;
    baum_welch(&init, data, config)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::enumeration::for_each_path;
    use crate::inference::{log_likelihood, posteriors};
    use crate::synthetic::sample_sequence;
    use ndarray::Array3;

    fn cfg(n_states: usize) -> TrainingConfig {
        TrainingConfig {
            n_states,
            ..TrainingConfig::default()
        }
    }

    #[test]
    fn config_validation() {
        assert!(TrainingConfig::default().validate().is_ok());
        assert!(cfg(0).validate().is_err());
        assert!(TrainingConfig {
            rel_tolerance: 1.0,
            ..cfg(2)
        }
        .validate()
        .is_err());
        assert!(TrainingConfig {
            max_iterations: 0,
            ..cfg(2)
        }
        .validate()
        .is_err());
    }

    #[test]
    fn abs_normal_init_has_17_valid_states() {
        let c = TrainingConfig {
            init_scheme: InitScheme::PaperRandom,
            seed: 42,
            ..TrainingConfig::default()
        };
        let m = initialize_model(&c, EmissionFamily::Gaussian, &[]).unwrap();
        assert_eq!(m.n_states(), 17);
        assert!((m.pi().sum() - 1.0).abs() <= 1e-12);
        for row in m.trans().rows() {
            assert!((row.sum() - 1.0).abs() <= 1e-12);
        }
        match m.emission() {
            Emission::Gaussian { variances, .. } => assert!(variances.iter().all(|&v| v == 1.0)),
            _ => unreachable!(),
        }
        assert_eq!(initialize_model(&c, EmissionFamily::Gaussian, &[]).unwrap(), m);
        let other = initialize_model(&TrainingConfig { seed: 43, ..c.clone() }, EmissionFamily::Gaussian, &[]).unwrap();
        assert_ne!(other, m);
        let d = initialize_model(&c, EmissionFamily::Discrete { n_symbols: 5 }, &[]).unwrap();
        assert_eq!(d.n_symbols(), Some(5));
    }

    #[test]
    fn quantile_init_splits_bimodal_data() {
        let mut v = vec![-10.0; 50];
        v.extend(vec![10.0; 50]);
        let m = initialize_model(&cfg(2), EmissionFamily::Gaussian, &[v.into()]).unwrap();
        match m.emission() {
            Emission::Gaussian { means, variances } => {
                assert!((means[0] + 10.0).abs() < 1e-12);
                assert!((means[1] - 10.0).abs() < 1e-12);
                assert!((variances[0] - 100.0).abs() < 1e-9);
            }
            _ => unreachable!(),
        }
        assert_eq!(
            initialize_model(&cfg(2), EmissionFamily::Gaussian, &[]),
            Err(HmmError::EmptyTrainingSet { label: None })
        );
    }

    #[test]
    fn quantile_init_discrete() {
        let data = vec![ObservationSequence::Discrete(vec![0, 0, 1, 2, 2, 2])];
        let fam = EmissionFamily::infer(&data).unwrap();
        assert_eq!(fam, EmissionFamily::Discrete { n_symbols: 3 });
        let m = initialize_model(&cfg(2), fam, &data).unwrap();
        let Emission::Discrete { obs } = m.emission() else {
            unreachable!()
        };
        assert!(obs[[0, 0]] > obs[[1, 0]]);
        assert!(obs[[1, 2]] > obs[[0, 2]]);
    }

    #[test]
    fn reestimate_concentrated_and_uniform_gamma() {
        let m = HmmModel::gaussian(vec![0.5, 0.5], vec![vec![0.5, 0.5]; 2], vec![0.0, 1.0], vec![1.0, 1.0]).unwrap();
        let xs = vec![1.0, 4.0, -2.0, 7.0];
        let mean = xs.iter().sum::<f64>() / 4.0;

        let mut gamma = Array2::zeros((4, 2));
        gamma.column_mut(0).fill(1.0);
        let mut xi = Array3::zeros((3, 2, 2));
        for t in 0..3 {
            xi[[t, 0, 0]] = 1.0;
        }
        let seq: ObservationSequence = xs.clone().into();
        let r = reestimate(&m, &[(PosteriorStats { gamma, xi }, seq.clone())], 1e-6).unwrap();
        let Emission::Gaussian { means, variances } = r.model.emission() else {
            unreachable!()
        };
        assert!((means[0] - mean).abs() < 1e-12);
        // state 1 never occupied: previous parameters kept and reported
        assert_eq!(means[1], 1.0);
        assert_eq!(variances[1], 1.0);
        assert_eq!(r.starved, vec![1]);
        assert_eq!(r.starved_error(), Some(HmmError::StateStarved { state: 1 }));

        let gamma = Array2::from_elem((4, 2), 0.5);
        let xi = Array3::from_elem((3, 2, 2), 0.25);
        let r = reestimate(&m, &[(PosteriorStats { gamma, xi }, seq)], 1e-6).unwrap();
        let Emission::Gaussian { means, .. } = r.model.emission() else {
            unreachable!()
        };
        assert!((means[0] - mean).abs() < 1e-12 && (means[1] - mean).abs() < 1e-12);
        assert!(r.starved.is_empty());
    }

    #[test]
    fn variance_is_floored() {
        let m = HmmModel::gaussian(vec![1.0], vec![vec![1.0]], vec![0.0], vec![1.0]).unwrap();
        let seq: ObservationSequence = vec![3.0, 3.0, 3.0].into();
        let post = posteriors(&m, &seq).unwrap();
        let r = reestimate(&m, &[(post, seq)], 1e-6).unwrap();
        let Emission::Gaussian { variances, .. } = r.model.emission() else {
            unreachable!()
        };
        assert_eq!(variances[0], 1e-6);
    }

    /// One EM step on a discrete 2-state model against closed-form updates
    /// built from path-enumeration posteriors.
    #[test]
    fn one_iteration_matches_enumeration_oracle() {
        let m = HmmModel::discrete(
            vec![0.6, 0.4],
            vec![vec![0.7, 0.3], vec![0.25, 0.75]],
            vec![vec![0.8, 0.2], vec![0.35, 0.65]],
        )
        .unwrap();
        let seq: ObservationSequence = vec![0usize, 1, 1].into();
        let ks = [0usize, 1, 1];

        let mut total = 0.0;
        let mut g = [[0.0; 2]; 3];
        let mut x = [[[0.0; 2]; 2]; 2];
        for_each_path(&m, &seq, |p, w| {
            total += w;
            for t in 0..3 {
                g[t][p[t]] += w;
            }
            for t in 0..2 {
                x[t][p[t]][p[t + 1]] += w;
            }
        })
        .unwrap();
        for row in g.iter_mut() {
            row.iter_mut().for_each(|v| *v /= total);
        }
        for mat in x.iter_mut() {
            for row in mat.iter_mut() {
                row.iter_mut().for_each(|v| *v /= total);
            }
        }
        let exp_pi = [g[0][0], g[0][1]];
        let mut exp_trans = [[0.0; 2]; 2];
        let mut exp_obs = [[0.0; 2]; 2];
        for i in 0..2 {
            let den = g[0][i] + g[1][i];
            for j in 0..2 {
                exp_trans[i][j] = (x[0][i][j] + x[1][i][j]) / den;
            }
            let occ = g[0][i] + g[1][i] + g[2][i];
            for k in 0..2 {
                exp_obs[i][k] = (0..3).filter(|&t| ks[t] == k).map(|t| g[t][i]).sum::<f64>() / occ;
            }
        }

        let (trained, report) = baum_welch(
            &m,
            &[seq],
            &TrainingConfig {
                n_states: 2,
                max_iterations: 1,
                ..TrainingConfig::default()
            },
        )
        .unwrap();
        assert_eq!(report.iterations_run, 1);
        let Emission::Discrete { obs } = trained.emission() else {
            unreachable!()
        };
        for i in 0..2 {
            assert!((trained.pi()[i] - exp_pi[i]).abs() < 1e-12);
            for j in 0..2 {
                assert!((trained.trans()[[i, j]] - exp_trans[i][j]).abs() < 1e-12);
                assert!((obs[[i, j]] - exp_obs[i][j]).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn em_is_monotone_and_recovers_means() {
        let truth = HmmModel::gaussian(
            vec![0.5, 0.5],
            vec![vec![0.9, 0.1], vec![0.1, 0.9]],
            vec![0.0, 10.0],
            vec![1.0, 1.0],
        )
        .unwrap();
        let data: Vec<_> = (0..50).map(|i| sample_sequence(&truth, 200, 1000 + i).0).collect();
        let (m, report) = train(&data, &cfg(2)).unwrap();
        assert!(report.worst_decrease() <= 1e-8);
        assert!(report.converged);
        let Emission::Gaussian { means, .. } = m.emission() else {
            unreachable!()
        };
        let (lo, hi) = if means[0] < means[1] {
            (means[0], means[1])
        } else {
            (means[1], means[0])
        };
        assert!(lo.abs() < 0.5 && (hi - 10.0).abs() < 0.5);
        let before: f64 = data.iter().map(|s| log_likelihood(&truth, s).unwrap()).sum();
        assert!(report.final_loglik >= before - 1.0);
    }

    #[test]
    fn training_errors() {
        let m = HmmModel::gaussian(vec![1.0], vec![vec![1.0]], vec![0.0], vec![1.0]).unwrap();
        assert_eq!(
            baum_welch(&m, &[vec![1.0].into()], &cfg(1)).unwrap_err(),
            HmmError::SequenceTooShort { len: 1, min: 2 }
        );
        assert_eq!(
            baum_welch(&m, &[], &cfg(1)).unwrap_err(),
            HmmError::EmptyTrainingSet { label: None }
        );
        assert!(matches!(
            baum_welch(&m, &[vec![1usize, 0].into()], &cfg(1)),
            Err(HmmError::TypeMismatch { .. })
        ));
    }

    #[test]
    fn permuting_initial_states_permutes_result() {
        let truth = HmmModel::gaussian(
            vec![0.3, 0.3, 0.4],
            vec![vec![0.8, 0.1, 0.1], vec![0.1, 0.8, 0.1], vec![0.2, 0.2, 0.6]],
            vec![-4.0, 0.0, 5.0],
            vec![1.0, 2.0, 1.0],
        )
        .unwrap();
        let data: Vec<_> = (0..6).map(|i| sample_sequence(&truth, 80, i).0).collect();
        let c = TrainingConfig {
            n_states: 3,
            max_iterations: 15,
            ..TrainingConfig::default()
        };
        let init = initialize_model(
            &TrainingConfig {
                init_scheme: InitScheme::PaperRandom,
                ..c.clone()
            },
            EmissionFamily::Gaussian,
            &[],
        )
        .unwrap();
        let perm = [2, 0, 1];
        let (a, ra) = baum_welch(&init, &data, &c).unwrap();
        let (b, rb) = baum_welch(&init.permuted(&perm).unwrap(), &data, &c).unwrap();
        assert_eq!(ra.iterations_run, rb.iterations_run);
        let ap = a.permuted(&perm).unwrap();
        for (x, y) in ap.trans().iter().zip(b.trans().iter()) {
            assert!((x - y).abs() < 1e-9);
        }
        let (Emission::Gaussian { means: ma, .. }, Emission::Gaussian { means: mb, .. }) =
            (ap.emission(), b.emission())
        else {
            unreachable!()
        };
        for (x, y) in ma.iter().zip(mb.iter()) {
            assert!((x - y).abs() < 1e-9);
        }
    }

    #[test]
    fn deterministic_training() {
        let truth = HmmModel::gaussian(
            vec![0.5, 0.5],
            vec![vec![0.9, 0.1], vec![0.2, 0.8]],
            vec![0.0, 3.0],
            vec![1.0, 1.0],
        )
        .unwrap();
        let data: Vec<_> = (0..8).map(|i| sample_sequence(&truth, 100, i).0).collect();
        let c = cfg(4);
        assert_eq!(train(&data, &c).unwrap(), train(&data, &c).unwrap());
    }

    #[test]
    fn report_csv() {
        let r = TrainingReport {
            iterations_run: 1,
            converged: false,
            loglik_trace: vec![-3.5, -2.25],
            final_loglik: -2.25,
            starved_states: vec![],
        };
        assert_eq!(r.trace_csv(), "iteration,loglik\n0,-3.5\n1,-2.25\n");
        assert_eq!(r.worst_decrease(), 0.0);
    }
}
