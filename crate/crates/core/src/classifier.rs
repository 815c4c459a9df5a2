//! One model per class; prediction by maximum log-likelihood.

use indexmap::IndexMap;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{HmmError, Result};
use crate::inference::log_likelihood;
use crate::model::{EmissionKind, HmmModel, ObservationSequence};
use crate::training::{baum_welch, initialize_model, EmissionFamily, TrainingConfig, TrainingReport};

/// Stage names used for the four-class tissue study.
pub const CANONICAL_LABELS: [&str; 4] = ["Normal", "GradeI", "GradeII", "GradeIII"];

#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(try_from = "String", into = "String")]
pub struct ClassLabel(String);

impl ClassLabel {
    pub fn new(name: impl Into<String>) -> Result<Self> {
        let name = name.into();
        if name.is_empty() {
            return Err(HmmError::InvalidConfig("class label must be nonempty".into()));
        }
        Ok(ClassLabel(name))
    }

    pub fn as_str(&self) -> &str {
        &self.0
    }
}

impl TryFrom<String> for ClassLabel {
    type Error = HmmError;
    fn try_from(s: String) -> Result<Self> {
        ClassLabel::new(s)
    }
}

impl From<ClassLabel> for String {
    fn from(l: ClassLabel) -> String {
        l.0
    }
}

impl std::fmt::Display for ClassLabel {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(&self.0)
    }
}

/// Ordered label → model map. Order is significant: it fixes tie-breaks and
/// confusion-matrix layout.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "BankDoc", into = "BankDoc")]
pub struct ModelBank {
    entries: Vec<(ClassLabel, HmmModel)>,
}

impl ModelBank {
    pub fn new(entries: Vec<(ClassLabel, HmmModel)>) -> Result<Self> {
        let first = entries
            .first()
            .ok_or_else(|| HmmError::InvalidConfig("model bank needs at least one entry".into()))?;
        let kind = first.1.emission_kind();
        for (i, (label, model)) in entries.iter().enumerate() {
            if entries[..i].iter().any(|(l, _)| l == label) {
                return Err(HmmError::DuplicateLabel(label.to_string()));
            }
            if model.emission_kind() != kind {
                return Err(HmmError::TypeMismatch {
                    model: kind.name(),
                    sequence: model.emission_kind().name(),
                });
            }
        }
        Ok(ModelBank { entries })
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn emission_kind(&self) -> EmissionKind {
        self.entries[0].1.emission_kind()
    }

    pub fn labels(&self) -> Vec<ClassLabel> {
        self.entries.iter().map(|(l, _)| l.clone()).collect()
    }

    pub fn get(&self, label: &ClassLabel) -> Option<&HmmModel> {
        self.entries.iter().find(|(l, _)| l == label).map(|(_, m)| m)
    }

    pub fn position(&self, label: &ClassLabel) -> Option<usize> {
        self.entries.iter().position(|(l, _)| l == label)
    }

    pub fn iter(&self) -> impl Iterator<Item = (&ClassLabel, &HmmModel)> {
        self.entries.iter().map(|(l, m)| (l, m))
    }
}

#[derive(Serialize, Deserialize)]
struct BankEntry {
    label: ClassLabel,
    model: HmmModel,
}

#[derive(Serialize, Deserialize)]
struct BankDoc {
    models: Vec<BankEntry>,
}

impl From<ModelBank> for BankDoc {
    fn from(b: ModelBank) -> Self {
        BankDoc {
            models: b
                .entries
                .into_iter()
                .map(|(label, model)| BankEntry { label, model })
                .collect(),
        }
    }
}

impl TryFrom<BankDoc> for ModelBank {
    type Error = HmmError;
    fn try_from(doc: BankDoc) -> Result<Self> {
        ModelBank::new(doc.models.into_iter().map(|e| (e.label, e.model)).collect())
    }
}

/// FNV-1a over the label bytes; stable across platforms and releases.
pub fn label_hash(label: &ClassLabel) -> u64 {
    label.as_str().bytes().fold(0xcbf2_9ce4_8422_2325u64, |h, b| {
        (h ^ u64::from(b)).wrapping_mul(0x0100_0000_01b3)
    })
}

/// Per-class training seed: `seed + fnv1a(label)` (wrapping).
pub fn label_seed(seed: u64, label: &ClassLabel) -> u64 {
    seed.wrapping_add(label_hash(label))
}

pub type LabelledData = IndexMap<ClassLabel, Vec<ObservationSequence>>;

/// Trains one model per class with per-class seeds from [`label_seed`].
pub fn train_bank(
    labelled: &LabelledData,
    config: &TrainingConfig,
) -> Result<(ModelBank, IndexMap<ClassLabel, TrainingReport>)> {
    train_bank_with_seeds(labelled, config, |label| label_seed(config.seed, label))
}

/// As [`train_bank`] with an explicit per-class seed function.
pub fn train_bank_with_seeds(
    labelled: &LabelledData,
    config: &TrainingConfig,
    seed_for: impl Fn(&ClassLabel) -> u64,
) -> Result<(ModelBank, IndexMap<ClassLabel, TrainingReport>)> {
    config.validate()?;
    if labelled.is_empty() {
        return Err(HmmError::EmptyTrainingSet { label: None });
    }
    for (label, seqs) in labelled {
        if seqs.is_empty() {
            return Err(HmmError::EmptyTrainingSet {
                label: Some(label.to_string()),
            });
        }
    }
    // One emission family for the whole bank (discrete banks share an alphabet).
    let all: Vec<ObservationSequence> = labelled.values().flatten().cloned().collect();
    let family = EmissionFamily::infer(&all)?;

    let mut entries = Vec::with_capacity(labelled.len());
    let mut reports = IndexMap::new();
    for (label, seqs) in labelled {
        let class_config = TrainingConfig {
            seed: seed_for(label),
            ..config.clone()
        };
        let init = initialize_model(&class_config, family, seqs)?;
        let (model, report) = baum_welch(&init, seqs, &class_config)?;
        log::info!(
            "class {label}: {} iterations, converged={}, loglik={}",
            report.iterations_run,
            report.converged,
            report.final_loglik
        );
        entries.push((label.clone(), model));
        reports.insert(label.clone(), report);
    }
    Ok((ModelBank::new(entries)?, reports))
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ClassificationResult {
    pub scores: IndexMap<ClassLabel, f64>,
    pub predicted: ClassLabel,
}

/// Scores `seq` under every model and picks the maximum; the first label in
/// bank order wins ties. Models under which the sequence is impossible score
/// `-inf`.
pub fn classify(bank: &ModelBank, seq: &ObservationSequence) -> Result<ClassificationResult> {
    let mut scores = IndexMap::with_capacity(bank.len());
    let mut best: Option<(&ClassLabel, f64)> = None;
    for (label, model) in bank.iter() {
        let s = log_likelihood(model, seq)?;
        scores.insert(label.clone(), s);
        if s > f64::NEG_INFINITY && best.is_none_or(|(_, b)| s > b) {
            best = Some((label, s));
        }
    }
    let (predicted, _) = best.ok_or(HmmError::Unclassifiable)?;
    Ok(ClassificationResult {
        predicted: predicted.clone(),
        scores,
    })
}

/// Row = true class, column = predicted class, both in bank order.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConfusionMatrix {
    pub labels: Vec<ClassLabel>,
    pub counts: Vec<Vec<u64>>,
    pub percentages: Vec<Vec<f64>>,
}

impl ConfusionMatrix {
    pub fn from_counts(labels: Vec<ClassLabel>, counts: Vec<Vec<u64>>) -> Self {
        let percentages = counts
            .iter()
            .map(|row| {
                let total: u64 = row.iter().sum();
                row.iter()
                    .map(|&c| {
                        if total == 0 {
                            0.0
                        } else {
                            100.0 * c as f64 / total as f64
                        }
                    })
                    .collect()
            })
            .collect();
        ConfusionMatrix {
            labels,
            counts,
            percentages,
        }
    }

    /// Diagonal percentage for row `i`.
    pub fn accuracy(&self, i: usize) -> f64 {
        self.percentages[i][i]
    }

    /// Header of labels, then one row of percentages per true label.
    pub fn to_csv(&self) -> String {
        let mut s = String::from("true\\predicted");
        for l in &self.labels {
            s.push(',');
            s.push_str(l.as_str());
        }
        s.push('\n');
        for (l, row) in self.labels.iter().zip(&self.percentages) {
            s.push_str(l.as_str());
            for p in row {
                s.push_str(&format!(",{p}"));
            }
            s.push('\n');
        }
        s
    }

    /// Same layout as [`to_csv`](Self::to_csv) with raw counts.
    pub fn counts_csv(&self) -> String {
        let mut s = String::from("true\\predicted");
        for l in &self.labels {
            s.push(',');
            s.push_str(l.as_str());
        }
        s.push('\n');
        for (l, row) in self.labels.iter().zip(&self.counts) {
            s.push_str(l.as_str());
            for c in row {
                s.push_str(&format!(",{c}"));
            }
            s.push('\n');
        }
        s
    }

    /// Three whitespace-separated columns `true_index pred_index percentage`,
    /// blocks separated by blank lines, ready for `splot ... with boxes`.
    pub fn to_gnuplot(&self) -> String {
        let mut s = String::from("# true_index pred_index percentage\n");
        for (i, l) in self.labels.iter().enumerate() {
            s.push_str(&format!("# {i} = {l}\n"));
        }
        for (i, row) in self.percentages.iter().enumerate() {
            for (j, p) in row.iter().enumerate() {
                s.push_str(&format!("{i} {j} {p}\n"));
            }
            s.push('\n');
        }
        s
    }
}

/// Classifies every test sequence and tabulates predictions per true class.
/// All test sequences must have the same length.
pub fn evaluate(bank: &ModelBank, test_data: &LabelledData) -> Result<ConfusionMatrix> {
    let labels = bank.labels();
    let mut rows = Vec::new();
    for label in test_data.keys() {
        let row = bank
            .position(label)
            .ok_or_else(|| HmmError::UnknownLabel(label.to_string()))?;
        rows.push(row);
    }
    if test_data.values().all(Vec::is_empty) {
        return Err(HmmError::EmptyTestSet);
    }
    let mut lengths = test_data.values().flatten().map(ObservationSequence::len);
    if let Some(first) = lengths.next() {
        if let Some(other) = lengths.find(|&l| l != first) {
            return Err(HmmError::MixedLengths { first, other });
        }
    }

    let mut counts = vec![vec![0u64; labels.len()]; labels.len()];
    for (row, seqs) in rows.into_iter().zip(test_data.values()) {
        let predictions = seqs
            .par_iter()
            .map(|seq| classify(bank, seq).map(|r| bank.position(&r.predicted).expect("label from bank")))
            .collect::<Result<Vec<_>>>()?;
        for col in predictions {
            counts[row][col] += 1;
        }
    }
    Ok(ConfusionMatrix::from_counts(labels, counts))
}
