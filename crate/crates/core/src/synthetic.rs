//! Generative sampling from models and construction of well-separated
//! multi-class model banks.
//!
//! All randomness comes from ChaCha20 ([`RNG_ALGORITHM`]); per-sequence seeds
//! are derived from a base seed with SplitMix64 so every sample is
//! reproducible on its own.

use indexmap::IndexMap;
use ndarray::{Array1, Array2};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha20Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::classifier::{ClassLabel, ModelBank, CANONICAL_LABELS};
use crate::error::{HmmError, Result};
use crate::model::{Emission, HmmModel, ObservationSequence};
use crate::preprocessing;

/// Name of the pseudorandom generator, recorded in run manifests.
pub const RNG_ALGORITHM: &str = "ChaCha20 (rand_chacha 0.9), seeds derived by SplitMix64";

pub type SimRng = ChaCha20Rng;

pub fn rng_from_seed(seed: u64) -> SimRng {
    ChaCha20Rng::seed_from_u64(seed)
}

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Mixes `base` with a path of stream indices into an independent seed.
pub fn derive_seed(base: u64, path: &[u64]) -> u64 {
    path.iter()
        .fold(splitmix64(base), |acc, &p| splitmix64(acc ^ splitmix64(p)))
}

/// Draws an index from a probability vector.
pub(crate) fn categorical<R: Rng + ?Sized>(rng: &mut R, probs: impl IntoIterator<Item = f64>) -> usize {
    let u: f64 = rng.random();
    let mut acc = 0.0;
    let mut last_positive = 0;
    for (i, p) in probs.into_iter().enumerate() {
        if p > 0.0 {
            last_positive = i;
        }
        acc += p;
        if u < acc {
            return i;
        }
    }
    last_positive
}

/// Samples `length` observations and the hidden path that produced them.
pub fn sample_sequence(model: &HmmModel, length: usize, seed: u64) -> (ObservationSequence, Vec<usize>) {
    let mut rng = rng_from_seed(seed);
    let mut path = Vec::with_capacity(length);
    let mut state = 0;
    for t in 0..length {
        state = if t == 0 {
            categorical(&mut rng, model.pi().iter().copied())
        } else {
            categorical(&mut rng, model.trans().row(state).iter().copied())
        };
        path.push(state);
    }
    let seq = match model.emission() {
        Emission::Gaussian { means, variances } => ObservationSequence::Continuous(
            path.iter()
                .map(|&s| {
                    let z: f64 = StandardNormal.sample(&mut rng);
                    means[s] + variances[s].sqrt() * z
                })
                .collect(),
        ),
        Emission::Discrete { obs } => ObservationSequence::Discrete(
            path.iter()
                .map(|&s| categorical(&mut rng, obs.row(s).iter().copied()))
                .collect(),
        ),
    };
    (seq, path)
}

fn random_simplex<R: Rng + ?Sized>(rng: &mut R, n: usize) -> Array1<f64> {
    let raw: Vec<f64> = (0..n)
        .map(|_| {
            let z: f64 = StandardNormal.sample(rng);
            z.abs() + 0.05
        })
        .collect();
    let s: f64 = raw.iter().sum();
    Array1::from_iter(raw.into_iter().map(|v| v / s))
}

/// A random valid model with reasonably spread parameters. Discrete when
/// `n_symbols` is given, Gaussian otherwise.
pub fn random_model<R: Rng + ?Sized>(rng: &mut R, n_states: usize, n_symbols: Option<usize>) -> HmmModel {
    let pi = random_simplex(rng, n_states);
    let mut trans = Array2::zeros((n_states, n_states));
    for i in 0..n_states {
        trans.row_mut(i).assign(&random_simplex(rng, n_states));
    }
    let emission = match n_symbols {
        Some(k) => {
            let mut obs = Array2::zeros((n_states, k));
            for j in 0..n_states {
                obs.row_mut(j).assign(&random_simplex(rng, k));
            }
            Emission::Discrete { obs }
        }
        None => Emission::Gaussian {
            means: Array1::from_shape_fn(n_states, |_| {
                let z: f64 = StandardNormal.sample(&mut *rng);
                2.0 * z
            }),
            variances: Array1::from_shape_fn(n_states, |_| rng.random_range(0.5..2.0)),
        },
    };
    HmmModel::new(pi, trans, emission).expect("random model is valid by construction")
}

/// Parameters of a bank of well-separated Gaussian generators.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SyntheticSpec {
    pub n_classes: usize,
    pub n_states: usize,
    /// Offset between consecutive classes' emission mean grids.
    pub separation: f64,
    pub self_transition: f64,
    pub seed: u64,
}

impl Default for SyntheticSpec {
    fn default() -> Self {
        SyntheticSpec {
            n_classes: 4,
            n_states: 4,
            separation: 12.0,
            self_transition: 0.9,
            seed: 0,
        }
    }
}

impl SyntheticSpec {
    pub fn validate(&self) -> Result<()> {
        if self.n_classes == 0 || self.n_states == 0 {
            return Err(HmmError::InvalidConfig(
                "n_classes and n_states must be positive".into(),
            ));
        }
        if !(self.separation.is_finite() && self.separation > 0.0) {
            return Err(HmmError::InvalidConfig("separation must be positive".into()));
        }
        if !(self.self_transition > 0.0 && self.self_transition < 1.0) {
            return Err(HmmError::InvalidConfig("self_transition must lie in (0, 1)".into()));
        }
        Ok(())
    }

    /// Class names: the four canonical stages when they suffice, else `class_<c>`.
    pub fn labels(&self) -> Vec<ClassLabel> {
        (0..self.n_classes)
            .map(|c| {
                let name = if self.n_classes <= CANONICAL_LABELS.len() {
                    CANONICAL_LABELS[c].to_string()
                } else {
                    format!("class_{c}")
                };
                ClassLabel::new(name).expect("nonempty label")
            })
            .collect()
    }
}

/// Ground-truth generators: class `c` has state means evenly spaced over
/// `[c·separation, c·separation + 1]`, unit variances, a uniform initial
/// distribution and `self_transition` on the diagonal.
pub fn make_separated_bank(spec: &SyntheticSpec) -> Result<ModelBank> {
    spec.validate()?;
    let n = spec.n_states;
    let off = if n > 1 {
        (1.0 - spec.self_transition) / (n - 1) as f64
    } else {
        0.0
    };
    let trans = Array2::from_shape_fn((n, n), |(i, j)| {
        if n == 1 {
            1.0
        } else if i == j {
            spec.self_transition
        } else {
            off
        }
    });
    let pi = Array1::from_elem(n, 1.0 / n as f64);
    let entries = spec
        .labels()
        .into_iter()
        .enumerate()
        .map(|(c, label)| {
            let base = c as f64 * spec.separation;
            let means = Array1::from_shape_fn(n, |j| {
                if n == 1 {
                    base + 0.5
                } else {
                    base + j as f64 / (n - 1) as f64
                }
            });
            let model = HmmModel::new(
                pi.clone(),
                trans.clone(),
                Emission::Gaussian {
                    means,
                    variances: Array1::ones(n),
                },
            )?;
            Ok((label, model))
        })
        .collect::<Result<Vec<_>>>()?;
    ModelBank::new(entries)
}

/// Draws `per_class` sequences of `length` from every generator in `bank`.
/// `stream` separates independent draws (e.g. train vs test) under one seed.
/// With `profile` set, each sequence is z-scored and cumulated.
pub fn sample_dataset(
    bank: &ModelBank,
    per_class: usize,
    length: usize,
    seed: u64,
    stream: u64,
    profile: bool,
) -> Result<IndexMap<ClassLabel, Vec<ObservationSequence>>> {
    let mut out = IndexMap::new();
    for (c, (label, model)) in bank.iter().enumerate() {
        let seqs = (0..per_class)
            .map(|i| {
                let s = derive_seed(seed, &[stream, c as u64, i as u64]);
                let (seq, _) = sample_sequence(model, length, s);
                if profile {
                    match &seq {
                        ObservationSequence::Continuous(v) => preprocessing::fluctuation_profile(v),
                        ObservationSequence::Discrete(_) => Err(HmmError::InvalidConfig(
                            "profile transform needs real-valued sequences".into(),
                        )),
                    }
                } else {
                    Ok(seq)
                }
            })
            .collect::<Result<Vec<_>>>()?;
        out.insert(label.clone(), seqs);
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn deterministic_single_symbol() {
        let m = HmmModel::discrete(vec![1.0], vec![vec![1.0]], vec![vec![1.0]]).unwrap();
        let (seq, path) = sample_sequence(&m, 20, 9);
        assert_eq!(seq, ObservationSequence::Discrete(vec![0; 20]));
        assert_eq!(path, vec![0; 20]);
    }

    #[test]
    fn cycle_model_alternates() {
        let m = HmmModel::gaussian(
            vec![1.0, 0.0],
            vec![vec![0.0, 1.0], vec![1.0, 0.0]],
            vec![0.0, 5.0],
            vec![1.0, 1.0],
        )
        .unwrap();
        let (_, path) = sample_sequence(&m, 9, 1);
        assert_eq!(path, vec![0, 1, 0, 1, 0, 1, 0, 1, 0]);
    }

    /// Stationary distribution by solving `s P = s`, `Σ s = 1` (2 states).
    fn stationary_2x2(p: [[f64; 2]; 2]) -> [f64; 2] {
        // s0 * p01 = s1 * p10
        let s0 = p[1][0] / (p[0][1] + p[1][0]);
        [s0, 1.0 - s0]
    }

    #[test]
    fn occupancy_matches_stationary_distribution() {
        let p = [[0.9, 0.1], [0.1, 0.9]];
        let m = HmmModel::gaussian(
            vec![0.5, 0.5],
            p.iter().map(|r| r.to_vec()).collect(),
            vec![0.0, 10.0],
            vec![1.0, 1.0],
        )
        .unwrap();
        let (_, path) = sample_sequence(&m, 100_000, 2024);
        let occ0 = path.iter().filter(|&&s| s == 0).count() as f64 / path.len() as f64;
        assert!((occ0 - stationary_2x2(p)[0]).abs() < 0.02, "occupancy {occ0}");
    }

    #[test]
    fn emission_means_converge_per_state() {
        let m = HmmModel::gaussian(
            vec![0.5, 0.5],
            vec![vec![0.8, 0.2], vec![0.3, 0.7]],
            vec![-3.0, 4.0],
            vec![1.0, 4.0],
        )
        .unwrap();
        let (seq, path) = sample_sequence(&m, 60_000, 77);
        let ObservationSequence::Continuous(xs) = seq else {
            unreachable!()
        };
        for (s, (mean, sd)) in [(-3.0, 1.0), (4.0, 2.0)].into_iter().enumerate() {
            let vals: Vec<f64> = xs.iter().zip(&path).filter(|(_, &p)| p == s).map(|(x, _)| *x).collect();
            assert!(vals.len() >= 10_000);
            let emp = vals.iter().sum::<f64>() / vals.len() as f64;
            assert!((emp - mean).abs() < 3.0 * sd / (vals.len() as f64).sqrt());
        }
    }

    #[test]
    fn seeds_are_reproducible_and_distinct() {
        let m = HmmModel::gaussian(vec![1.0], vec![vec![1.0]], vec![0.0], vec![1.0]).unwrap();
        assert_eq!(sample_sequence(&m, 50, 3), sample_sequence(&m, 50, 3));
        assert_ne!(sample_sequence(&m, 50, 3).0, sample_sequence(&m, 50, 4).0);
        assert_ne!(derive_seed(1, &[0, 1]), derive_seed(1, &[1, 0]));
    }

    #[test]
    fn separated_bank_layout() {
        let spec = SyntheticSpec::default();
        let bank = make_separated_bank(&spec).unwrap();
        assert_eq!(bank.len(), 4);
        let ranges: Vec<(f64, f64)> = bank
            .iter()
            .map(|(_, m)| match m.emission() {
                Emission::Gaussian { means, .. } => (means[0], means[spec.n_states - 1]),
                _ => unreachable!(),
            })
            .collect();
        for w in ranges.windows(2) {
            assert!(w[1].0 - w[0].1 >= 11.0);
        }
        assert_eq!(bank.labels()[3].as_str(), "GradeIII");
        let (_, m0) = bank.iter().next().unwrap();
        assert_eq!(m0.trans()[[0, 0]], 0.9);
        assert!((m0.trans()[[0, 1]] - 0.1 / 3.0).abs() < 1e-15);

        let one = make_separated_bank(&SyntheticSpec {
            n_classes: 1,
            ..spec.clone()
        })
        .unwrap();
        assert_eq!(one.len(), 1);
        assert_eq!(make_separated_bank(&spec).unwrap(), bank);
        assert!(make_separated_bank(&SyntheticSpec {
            self_transition: 1.0,
            ..spec
        })
        .is_err());
    }

    #[test]
    fn many_classes_get_generic_labels() {
        let spec = SyntheticSpec {
            n_classes: 6,
            ..SyntheticSpec::default()
        };
        let labels = spec.labels();
        assert_eq!(labels[5].as_str(), "class_5");
    }
}
