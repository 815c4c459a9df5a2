//! Model and observation types: the triple (transition matrix, emission
//! model, initial distribution) plus the sequences it is evaluated on.

use ndarray::{Array1, Array2};
use serde::{Deserialize, Serialize};

use crate::error::{HmmError, Result};

/// Tolerance for probability rows summing to one.
pub const STOCHASTIC_TOLERANCE: f64 = 1e-12;

/// Default lower bound on Gaussian emission variances.
pub const DEFAULT_VARIANCE_FLOOR: f64 = 1e-6;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum EmissionKind {
    Discrete,
    Gaussian,
}

impl EmissionKind {
    pub fn name(self) -> &'static str {
        match self {
            EmissionKind::Discrete => "discrete",
            EmissionKind::Gaussian => "gaussian",
        }
    }
}

impl std::fmt::Display for EmissionKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

/// Per-state emission distributions.
#[derive(Debug, Clone, PartialEq)]
pub enum Emission {
    /// `obs[[j, k]]` is the probability that state `j` emits symbol `k`.
    Discrete { obs: Array2<f64> },
    /// One univariate normal per state.
    Gaussian { means: Array1<f64>, variances: Array1<f64> },
}

impl Emission {
    pub fn kind(&self) -> EmissionKind {
        match self {
            Emission::Discrete { .. } => EmissionKind::Discrete,
            Emission::Gaussian { .. } => EmissionKind::Gaussian,
        }
    }

    fn n_states(&self) -> usize {
        match self {
            Emission::Discrete { obs } => obs.nrows(),
            Emission::Gaussian { means, .. } => means.len(),
        }
    }
}

/// A hidden Markov model with validated stochastic parameters.
///
/// Construct through [`HmmModel::new`]; the fields are read-only afterwards so
/// every model in circulation satisfies the row-stochastic invariants.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "ModelDoc", into = "ModelDoc")]
pub struct HmmModel {
    pi: Array1<f64>,
    trans: Array2<f64>,
    emission: Emission,
}

impl HmmModel {
    pub fn new(pi: Array1<f64>, trans: Array2<f64>, emission: Emission) -> Result<Self> {
        let model = HmmModel {
            pi,
            // row-major storage is assumed by the trellis loops
            trans: trans.as_standard_layout().into_owned(),
            emission,
        };
        model.validate()?;
        Ok(model)
    }

    /// Convenience constructor from nested vectors.
    pub fn from_vecs(pi: Vec<f64>, trans: Vec<Vec<f64>>, emission: Emission) -> Result<Self> {
        let trans = rows_to_array(&trans, "trans")?;
        Self::new(Array1::from(pi), trans, emission)
    }

    pub fn gaussian(pi: Vec<f64>, trans: Vec<Vec<f64>>, means: Vec<f64>, variances: Vec<f64>) -> Result<Self> {
        Self::from_vecs(
            pi,
            trans,
            Emission::Gaussian {
                means: Array1::from(means),
                variances: Array1::from(variances),
            },
        )
    }

    pub fn discrete(pi: Vec<f64>, trans: Vec<Vec<f64>>, obs: Vec<Vec<f64>>) -> Result<Self> {
        let obs = rows_to_array(&obs, "obs")?;
        Self::from_vecs(pi, trans, Emission::Discrete { obs })
    }

    pub fn n_states(&self) -> usize {
        self.pi.len()
    }

    pub fn pi(&self) -> &Array1<f64> {
        &self.pi
    }

    pub fn trans(&self) -> &Array2<f64> {
        &self.trans
    }

    pub fn emission(&self) -> &Emission {
        &self.emission
    }

    pub fn emission_kind(&self) -> EmissionKind {
        self.emission.kind()
    }

    /// Number of symbols for discrete emissions, `None` for Gaussian.
    pub fn n_symbols(&self) -> Option<usize> {
        match &self.emission {
            Emission::Discrete { obs } => Some(obs.ncols()),
            Emission::Gaussian { .. } => None,
        }
    }

    /// Returns a copy with states relabelled: new state `k` is old state `perm[k]`.
    pub fn permuted(&self, perm: &[usize]) -> Result<Self> {
        let n = self.n_states();
        let mut seen = vec![false; n];
        if perm.len() != n || perm.iter().any(|&p| p >= n || std::mem::replace(&mut seen[p], true)) {
            return Err(HmmError::InvalidModel(format!(
                "{perm:?} is not a permutation of 0..{n}"
            )));
        }
        let pi = Array1::from_shape_fn(n, |k| self.pi[perm[k]]);
        let trans = Array2::from_shape_fn((n, n), |(a, b)| self.trans[[perm[a], perm[b]]]);
        let emission = match &self.emission {
            Emission::Discrete { obs } => Emission::Discrete {
                obs: Array2::from_shape_fn(obs.dim(), |(a, k)| obs[[perm[a], k]]),
            },
            Emission::Gaussian { means, variances } => Emission::Gaussian {
                means: Array1::from_shape_fn(n, |k| means[perm[k]]),
                variances: Array1::from_shape_fn(n, |k| variances[perm[k]]),
            },
        };
        HmmModel::new(pi, trans, emission)
    }

    pub fn validate(&self) -> Result<()> {
        let n = self.pi.len();
        if n == 0 {
            return Err(HmmError::InvalidModel("model needs at least one state".into()));
        }
        check_distribution(self.pi.iter().copied(), "pi")?;
        if self.trans.dim() != (n, n) {
            return Err(HmmError::InvalidModel(format!(
                "trans is {:?}, expected ({n}, {n})",
                self.trans.dim()
            )));
        }
        for (i, row) in self.trans.rows().into_iter().enumerate() {
            check_distribution(row.iter().copied(), &format!("trans row {i}"))?;
        }
        if self.emission.n_states() != n {
            return Err(HmmError::InvalidModel(format!(
                "emission describes {} states, model has {n}",
                self.emission.n_states()
            )));
        }
        match &self.emission {
            Emission::Discrete { obs } => {
                if obs.ncols() == 0 {
                    return Err(HmmError::InvalidModel(
                        "discrete emission needs at least one symbol".into(),
                    ));
                }
                for (j, row) in obs.rows().into_iter().enumerate() {
                    check_distribution(row.iter().copied(), &format!("obs row {j}"))?;
                }
            }
            Emission::Gaussian { means, variances } => {
                if variances.len() != n {
                    return Err(HmmError::InvalidModel(format!(
                        "{} variances for {n} states",
                        variances.len()
                    )));
                }
                if let Some(m) = means.iter().find(|m| !m.is_finite()) {
                    return Err(HmmError::InvalidModel(format!("non-finite mean {m}")));
                }
                if let Some(v) = variances.iter().find(|v| !(v.is_finite() && **v > 0.0)) {
                    return Err(HmmError::InvalidModel(format!(
                        "variance {v} must be positive and finite"
                    )));
                }
            }
        }
        Ok(())
    }
}

fn check_distribution(values: impl Iterator<Item = f64>, what: &str) -> Result<()> {
    let mut sum = 0.0;
    for v in values {
        if !(0.0..=1.0).contains(&v) {
            return Err(HmmError::InvalidModel(format!("{what}: entry {v} outside [0, 1]")));
        }
        sum += v;
    }
    if (sum - 1.0).abs() > STOCHASTIC_TOLERANCE {
        return Err(HmmError::InvalidModel(format!("{what} sums to {sum}, expected 1")));
    }
    Ok(())
}

pub(crate) fn rows_to_array(rows: &[Vec<f64>], what: &str) -> Result<Array2<f64>> {
    let ncols = rows.first().map_or(0, Vec::len);
    if rows.iter().any(|r| r.len() != ncols) {
        return Err(HmmError::InvalidModel(format!("{what} is ragged")));
    }
    let flat: Vec<f64> = rows.iter().flatten().copied().collect();
    Array2::from_shape_vec((rows.len(), ncols), flat).map_err(|e| HmmError::InvalidModel(format!("{what}: {e}")))
}

fn array_to_rows(a: &Array2<f64>) -> Vec<Vec<f64>> {
    a.rows().into_iter().map(|r| r.to_vec()).collect()
}

/// An observed sequence: real values for Gaussian models, symbol indices for
/// discrete ones.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", content = "values", rename_all = "lowercase")]
pub enum ObservationSequence {
    #[serde(rename = "gaussian")]
    Continuous(Vec<f64>),
    Discrete(Vec<usize>),
}

impl ObservationSequence {
    pub fn len(&self) -> usize {
        match self {
            ObservationSequence::Continuous(v) => v.len(),
            ObservationSequence::Discrete(v) => v.len(),
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// The emission family this sequence can be scored under.
    pub fn kind(&self) -> EmissionKind {
        match self {
            ObservationSequence::Continuous(_) => EmissionKind::Gaussian,
            ObservationSequence::Discrete(_) => EmissionKind::Discrete,
        }
    }

    /// Checks that the sequence is nonempty and scoreable under `model`.
    pub fn check_against(&self, model: &HmmModel) -> Result<()> {
        if self.kind() != model.emission_kind() {
            return Err(HmmError::TypeMismatch {
                model: model.emission_kind().name(),
                sequence: self.kind().name(),
            });
        }
        if self.is_empty() {
            return Err(HmmError::EmptySequence);
        }
        match self {
            ObservationSequence::Continuous(v) => {
                if let Some((t, x)) = v.iter().enumerate().find(|(_, x)| !x.is_finite()) {
                    return Err(HmmError::InvalidObservation(format!("non-finite value {x} at t={t}")));
                }
            }
            ObservationSequence::Discrete(v) => {
                let n_symbols = model.n_symbols().unwrap_or(0);
                if let Some((t, k)) = v.iter().enumerate().find(|(_, &k)| k >= n_symbols) {
                    return Err(HmmError::InvalidObservation(format!(
                        "symbol {k} at t={t} outside [0, {n_symbols})"
                    )));
                }
            }
        }
        Ok(())
    }

    /// Contiguous subsequence `[start, start + len)`.
    pub fn slice(&self, start: usize, len: usize) -> ObservationSequence {
        match self {
            ObservationSequence::Continuous(v) => ObservationSequence::Continuous(v[start..start + len].to_vec()),
            ObservationSequence::Discrete(v) => ObservationSequence::Discrete(v[start..start + len].to_vec()),
        }
    }
}

impl From<Vec<f64>> for ObservationSequence {
    fn from(v: Vec<f64>) -> Self {
        ObservationSequence::Continuous(v)
    }
}

impl From<Vec<usize>> for ObservationSequence {
    fn from(v: Vec<usize>) -> Self {
        ObservationSequence::Discrete(v)
    }
}

// On-disk layout of a model.

#[derive(Serialize, Deserialize)]
struct ModelDoc {
    n_states: usize,
    pi: Vec<f64>,
    trans: Vec<Vec<f64>>,
    emission: EmissionDoc,
}

#[derive(Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
enum EmissionDoc {
    Discrete { n_symbols: usize, obs: Vec<Vec<f64>> },
    Gaussian { means: Vec<f64>, variances: Vec<f64> },
}

impl From<HmmModel> for ModelDoc {
    fn from(m: HmmModel) -> Self {
        let emission = match &m.emission {
            Emission::Discrete { obs } => EmissionDoc::Discrete {
                n_symbols: obs.ncols(),
                obs: array_to_rows(obs),
            },
            Emission::Gaussian { means, variances } => EmissionDoc::Gaussian {
                means: means.to_vec(),
                variances: variances.to_vec(),
            },
        };
        ModelDoc {
            n_states: m.n_states(),
            pi: m.pi.to_vec(),
            trans: array_to_rows(&m.trans),
            emission,
        }
    }
}

impl TryFrom<ModelDoc> for HmmModel {
    type Error = HmmError;

    fn try_from(doc: ModelDoc) -> Result<Self> {
        if doc.pi.len() != doc.n_states {
            return Err(HmmError::InvalidModel(format!(
                "n_states is {} but pi has {} entries",
                doc.n_states,
                doc.pi.len()
            )));
        }
        let emission = match doc.emission {
            EmissionDoc::Discrete { n_symbols, obs } => {
                let obs = rows_to_array(&obs, "obs")?;
                if obs.ncols() != n_symbols {
                    return Err(HmmError::InvalidModel(format!(
                        "n_symbols is {n_symbols} but obs has {} columns",
                        obs.ncols()
                    )));
                }
                Emission::Discrete { obs }
            }
            EmissionDoc::Gaussian { means, variances } => Emission::Gaussian {
                means: Array1::from(means),
                variances: Array1::from(variances),
            },
        };
        HmmModel::from_vecs(doc.pi, doc.trans, emission)
    }
}
