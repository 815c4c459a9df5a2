//! Hidden-Markov-model classification of fluctuation time series.
//!
//! The pipeline turns 2-D scalar images into 1-D series (row-major unfolding,
//! z-scoring, cumulative summation, windowing), trains one HMM per class with
//! Baum-Welch, and labels unseen series by the class whose model gives the
//! highest log-likelihood.
//!
//! ```
//! use hmmclass::{log_likelihood, HmmModel, ObservationSequence};
//!
//! let model = HmmModel::gaussian(
//!     vec![0.5, 0.5],
//!     vec![vec![0.9, 0.1], vec![0.1, 0.9]],
//!     vec![0.0, 10.0],
//!     vec![1.0, 1.0],
//! )
//! .unwrap();
//! let seq: ObservationSequence = vec![0.1, -0.3, 9.8, 10.4].into();
//! assert!(log_likelihood(&model, &seq).unwrap().is_finite());
//! ```

#![allow(clippy::needless_range_loop)]

pub mod classifier;
pub mod cli;
pub mod enumeration;
pub mod error;
pub mod inference;
pub mod io;
pub mod model;
pub mod preprocessing;
pub mod synthetic;
pub mod training;

#[cfg(test)]
mod testutil;

pub use classifier::{classify, evaluate, train_bank, ClassLabel, ClassificationResult, ConfusionMatrix, ModelBank};
pub use enumeration::brute_force_likelihood;
pub use error::{HmmError, Result};
pub use inference::{
    backward, emission_density, forward, forward_backward, log_likelihood, posteriors, viterbi, Observation,
    PosteriorStats, TrellisResult,
};
pub use model::{Emission, EmissionKind, HmmModel, ObservationSequence};
pub use preprocessing::{cumulative_sum, preprocess, unfold_horizontal, window, zscore, ImageGrid, WindowingConfig};
pub use training::{baum_welch, initialize_model, reestimate, InitScheme, TrainingConfig, TrainingReport};
