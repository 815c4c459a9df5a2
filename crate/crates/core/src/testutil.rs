use rand::Rng;

use crate::model::{HmmModel, ObservationSequence};
use crate::synthetic;

pub fn random_model<R: Rng>(rng: &mut R, n: usize, symbols: Option<usize>) -> HmmModel {
    synthetic::random_model(rng, n, symbols)
}

pub fn random_sequence<R: Rng>(rng: &mut R, model: &HmmModel, len: usize) -> ObservationSequence {
    synthetic::sample_sequence(model, len, rng.random()).0
}
