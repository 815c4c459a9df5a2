//! Exhaustive enumeration of hidden-state paths. Exponential in `τ`; used as
//! an independent check on the dynamic-programming routines.

use crate::error::{HmmError, Result};
use crate::inference::{emission_density, Observation};
use crate::model::{HmmModel, ObservationSequence};

/// Upper bound on the number of enumerated paths.
pub const MAX_PATHS: u64 = 10_000_000;

/// Calls `visit(path, joint)` for every state path, where
/// `joint = π(x_0)·∏ o_{x_t}(O_t)·∏ p_{x_t x_{t+1}}` in probability space.
pub fn for_each_path<F>(model: &HmmModel, seq: &ObservationSequence, mut visit: F) -> Result<()>
where
    F: FnMut(&[usize], f64),
{
    seq.check_against(model)?;
    let n = model.n_states();
    let tau = seq.len();
    let paths = (n as f64).powi(tau as i32);
    if paths > MAX_PATHS as f64 {
        return Err(HmmError::InstanceTooLarge {
            paths,
            limit: MAX_PATHS,
        });
    }

    let mut dens = vec![vec![0.0; n]; tau];
    for (t, row) in dens.iter_mut().enumerate() {
        let o = match seq {
            ObservationSequence::Continuous(v) => Observation::Value(v[t]),
            ObservationSequence::Discrete(v) => Observation::Symbol(v[t]),
        };
        for (j, d) in row.iter_mut().enumerate() {
            *d = emission_density(model, j, o)?;
        }
    }

    let pi = model.pi();
    let trans = model.trans();
    let mut path = vec![0usize; tau];
    loop {
        let mut p = pi[path[0]] * dens[0][path[0]];
        for t in 1..tau {
            p *= trans[[path[t - 1], path[t]]] * dens[t][path[t]];
        }
        visit(&path, p);

        // odometer increment, last position fastest
        let mut pos = tau;
        loop {
            if pos == 0 {
                return Ok(());
            }
            pos -= 1;
            path[pos] += 1;
            if path[pos] < n {
                break;
            }
            path[pos] = 0;
        }
    }
}

/// `P(O | θ)` as the explicit sum over all `n^τ` state paths.
pub fn brute_force_likelihood(model: &HmmModel, seq: &ObservationSequence) -> Result<f64> {
    let mut total = 0.0;
    for_each_path(model, seq, |_, p| total += p)?;
    Ok(total)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn uniform_discrete_is_one_sixteenth() {
        let m = HmmModel::discrete(
            vec![0.5, 0.5],
            vec![vec![0.5, 0.5], vec![0.5, 0.5]],
            vec![vec![0.5, 0.5], vec![0.5, 0.5]],
        )
        .unwrap();
        let p = brute_force_likelihood(&m, &vec![1usize, 0, 0, 1].into()).unwrap();
        assert!((p - 0.0625).abs() < 1e-15);
    }

    #[test]
    fn single_path_equals_forward() {
        let m = HmmModel::gaussian(vec![1.0], vec![vec![1.0]], vec![0.0], vec![1.0]).unwrap();
        let seq: ObservationSequence = vec![0.0, 0.0, 0.0].into();
        let brute = brute_force_likelihood(&m, &seq).unwrap();
        let fwd = crate::inference::log_likelihood(&m, &seq).unwrap().exp();
        assert!((brute - fwd).abs() <= 1e-15 * fwd);
    }

    #[test]
    fn visits_every_path_once() {
        let m = HmmModel::discrete(vec![0.2, 0.3, 0.5], vec![vec![0.2, 0.3, 0.5]; 3], vec![vec![1.0]; 3]).unwrap();
        let mut count = 0;
        let mut total = 0.0;
        for_each_path(&m, &vec![0usize; 4].into(), |_, p| {
            count += 1;
            total += p;
        })
        .unwrap();
        assert_eq!(count, 81);
        assert!((total - 1.0).abs() < 1e-12);
    }

    #[test]
    fn guards_large_instances() {
        let m = HmmModel::gaussian(vec![0.5, 0.5], vec![vec![0.5, 0.5]; 2], vec![0.0, 1.0], vec![1.0, 1.0]).unwrap();
        let err = brute_force_likelihood(&m, &vec![0.0; 24].into()).unwrap_err();
        assert!(matches!(err, HmmError::InstanceTooLarge { .. }));
    }
}
