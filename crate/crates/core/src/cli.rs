//! Command-line driver. Every subcommand writes into its own `--out`
//! directory and finishes by writing `manifest.json` there.
//!
//! Exit codes: 0 success, 2 usage or input error, 1 internal failure.

use std::ffi::OsString;
use std::fs;
use std::path::{Path, PathBuf};
use std::time::Instant;

use clap::{Parser, Subcommand, ValueEnum};
use indexmap::IndexMap;
use serde::{Deserialize, Serialize};
use serde_json::json;

use crate::classifier::{classify, evaluate, train_bank, ClassLabel, LabelledData, ModelBank};
use crate::error::HmmError;
use crate::io::{self, InputError};
use crate::model::{EmissionKind, ObservationSequence};
use crate::preprocessing::{self, WindowingConfig};
use crate::synthetic::{self, SyntheticSpec, RNG_ALGORITHM};
use crate::training::{InitScheme, TrainingConfig};

#[derive(Debug, Parser)]
#[command(
    name = "hmmclass",
    version,
    about = "HMM-based multiclass classification of fluctuation time series"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Clone, Copy, ValueEnum, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum InitArg {
    Paper,
    Quantile,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum EmissionArg {
    Gaussian,
    Discrete,
}

impl From<EmissionArg> for EmissionKind {
    fn from(e: EmissionArg) -> Self {
        match e {
            EmissionArg::Gaussian => EmissionKind::Gaussian,
            EmissionArg::Discrete => EmissionKind::Discrete,
        }
    }
}

#[derive(Debug, clap::Args, Serialize)]
pub struct WindowArgs {
    /// Cut each series into windows of this many points.
    #[arg(long)]
    pub window: Option<usize>,
    /// Offset between window starts (defaults to the window length).
    #[arg(long)]
    pub stride: Option<usize>,
}

impl WindowArgs {
    fn config(&self) -> Option<WindowingConfig> {
        self.window.map(|w| WindowingConfig {
            window_length: w,
            stride: self.stride.unwrap_or(w),
        })
    }
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Images (CSV or PGM) to windowed fluctuation-profile series.
    Preprocess {
        #[arg(long)]
        out: PathBuf,
        #[arg(long, default_value_t = 1000)]
        window: usize,
        #[arg(long)]
        stride: Option<usize>,
        #[arg(required = true)]
        images: Vec<PathBuf>,
    },
    /// Train one model per label directory.
    Train {
        /// Directory with one subdirectory of series CSVs per label.
        #[arg(long)]
        data: PathBuf,
        #[arg(long)]
        out: PathBuf,
        #[arg(long, default_value_t = 17, value_parser = clap::value_parser!(u64).range(1..))]
        states: u64,
        #[arg(long, default_value_t = 500, value_parser = clap::value_parser!(u64).range(1..))]
        max_iters: u64,
        #[arg(long, default_value_t = 1e-6)]
        tol: f64,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, value_enum, default_value_t = InitArg::Quantile)]
        init: InitArg,
        #[arg(long, value_enum, default_value_t = EmissionArg::Gaussian)]
        emission: EmissionArg,
        #[command(flatten)]
        windows: WindowArgs,
    },
    /// Score series files under every model in a bank.
    Classify {
        #[arg(long)]
        bank: PathBuf,
        #[arg(long)]
        out: PathBuf,
        /// Expected emission kind; must match the bank.
        #[arg(long, value_enum)]
        emission: Option<EmissionArg>,
        #[arg(required = true)]
        files: Vec<PathBuf>,
    },
    /// Confusion matrix of a bank on labelled test directories.
    Evaluate {
        #[arg(long)]
        bank: PathBuf,
        #[arg(long)]
        data: PathBuf,
        #[arg(long)]
        out: PathBuf,
        #[arg(long, value_enum)]
        emission: Option<EmissionArg>,
        #[command(flatten)]
        windows: WindowArgs,
    },
    /// Sample train/test datasets from a bank of separated generators.
    Synth {
        #[arg(long)]
        out: PathBuf,
        #[arg(long, default_value_t = 4)]
        classes: usize,
        #[arg(long, default_value_t = 4)]
        states: usize,
        #[arg(long, default_value_t = 12.0)]
        separation: f64,
        #[arg(long, default_value_t = 0.9)]
        self_transition: f64,
        #[arg(long, default_value_t = 40)]
        train_per_class: usize,
        #[arg(long, default_value_t = 100)]
        test_per_class: usize,
        #[arg(long, default_value_t = 500)]
        length: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// z-score and cumulate every sampled sequence.
        #[arg(long)]
        profile: bool,
    },
}

#[derive(Debug)]
pub enum CliError {
    Input(String),
    Internal(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Input(_) => 2,
            CliError::Internal(_) => 1,
        }
    }
}

impl std::fmt::Display for CliError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            CliError::Input(m) | CliError::Internal(m) => f.write_str(m),
        }
    }
}

impl From<HmmError> for CliError {
    fn from(e: HmmError) -> Self {
        CliError::Input(e.to_string())
    }
}

impl From<InputError> for CliError {
    fn from(e: InputError) -> Self {
        CliError::Input(e.to_string())
    }
}

fn write_err(path: &Path, e: std::io::Error) -> CliError {
    CliError::Internal(format!("{}: cannot write: {e}", path.display()))
}

/// Record of one run, sufficient to reproduce it.
#[derive(Debug, Serialize, Deserialize)]
pub struct RunManifest {
    pub command: String,
    pub config: serde_json::Value,
    pub inputs: Vec<String>,
    pub outputs: Vec<String>,
    pub seed: Option<u64>,
    pub rng: String,
    pub duration_seconds: f64,
    pub version: String,
    #[serde(default, skip_serializing_if = "serde_json::Value::is_null")]
    pub details: serde_json::Value,
}

struct Outputs {
    dir: PathBuf,
    written: Vec<String>,
}

impl Outputs {
    fn new(dir: &Path) -> Result<Self, CliError> {
        fs::create_dir_all(dir).map_err(|e| write_err(dir, e))?;
        Ok(Outputs {
            dir: dir.to_path_buf(),
            written: Vec::new(),
        })
    }

    fn write(&mut self, rel: impl AsRef<Path>, contents: &[u8]) -> Result<(), CliError> {
        let path = self.dir.join(rel.as_ref());
        io::write_atomic(&path, contents).map_err(|e| write_err(&path, e))?;
        self.written.push(rel.as_ref().display().to_string());
        Ok(())
    }

    fn write_json<T: Serialize>(&mut self, rel: &str, value: &T) -> Result<(), CliError> {
        let mut s = serde_json::to_string_pretty(value).map_err(|e| CliError::Internal(e.to_string()))?;
        s.push('\n');
        self.write(rel, s.as_bytes())
    }
}

struct RunInfo {
    command: &'static str,
    config: serde_json::Value,
    inputs: Vec<String>,
    seed: Option<u64>,
    details: serde_json::Value,
}

fn finish(out: Outputs, info: RunInfo, started: Instant) -> Result<(), CliError> {
    let manifest = RunManifest {
        command: info.command.to_string(),
        config: info.config,
        inputs: info.inputs,
        outputs: out.written.clone(),
        seed: info.seed,
        rng: RNG_ALGORITHM.to_string(),
        duration_seconds: started.elapsed().as_secs_f64(),
        version: env!("CARGO_PKG_VERSION").to_string(),
        details: info.details,
    };
    let path = out.dir.join("manifest.json");
    io::write_json(&path, &manifest).map_err(|e| write_err(&path, e))
}

fn display(p: &Path) -> String {
    p.display().to_string()
}

fn read_sequence(path: &Path, kind: EmissionKind) -> Result<ObservationSequence, CliError> {
    Ok(match kind {
        EmissionKind::Gaussian => ObservationSequence::Continuous(io::read_series(path)?),
        EmissionKind::Discrete => ObservationSequence::Discrete(io::read_symbols(path)?),
    })
}

fn sorted_entries(dir: &Path) -> Result<Vec<PathBuf>, CliError> {
    let rd = fs::read_dir(dir).map_err(|e| CliError::Input(format!("{}: {e}", dir.display())))?;
    let mut entries: Vec<PathBuf> = rd
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| {
            p.file_name()
                .and_then(|n| n.to_str())
                .is_some_and(|n| !n.starts_with('.'))
        })
        .collect();
    entries.sort();
    Ok(entries)
}

/// Reads `dir/<label>/*.csv`, labels sorted by name.
fn load_labelled(
    dir: &Path,
    kind: EmissionKind,
    windows: Option<&WindowingConfig>,
    inputs: &mut Vec<String>,
) -> Result<LabelledData, CliError> {
    let mut data = LabelledData::new();
    for sub in sorted_entries(dir)?.into_iter().filter(|p| p.is_dir()) {
        let name = sub.file_name().and_then(|n| n.to_str()).unwrap_or_default().to_string();
        let label = ClassLabel::new(name)?;
        let mut seqs = Vec::new();
        for file in sorted_entries(&sub)?
            .into_iter()
            .filter(|p| p.is_file() && p.extension().is_some_and(|e| e == "csv"))
        {
            let seq = read_sequence(&file, kind)?;
            inputs.push(display(&file));
            match windows {
                Some(w) => seqs.extend(
                    preprocessing::window(&seq, w).map_err(|e| CliError::Input(format!("{}: {e}", file.display())))?,
                ),
                None => seqs.push(seq),
            }
        }
        if seqs.is_empty() {
            return Err(CliError::Input(format!(
                "{}: label directory '{label}' contains no series",
                sub.display()
            )));
        }
        data.insert(label, seqs);
    }
    if data.is_empty() {
        return Err(CliError::Input(format!(
            "{}: no label directories found",
            dir.display()
        )));
    }
    Ok(data)
}

fn load_bank(path: &Path, expected: Option<EmissionArg>) -> Result<ModelBank, CliError> {
    let bank: ModelBank = io::read_json(path)?;
    if let Some(e) = expected {
        let want: EmissionKind = e.into();
        if want != bank.emission_kind() {
            return Err(HmmError::TypeMismatch {
                model: bank.emission_kind().name(),
                sequence: want.name(),
            }
            .into());
        }
    }
    Ok(bank)
}

fn safe_name(label: &ClassLabel) -> String {
    label
        .as_str()
        .chars()
        .map(|c| {
            if c.is_alphanumeric() || c == '-' || c == '_' || c == '.' {
                c
            } else {
                '_'
            }
        })
        .collect()
}

pub fn execute(cli: Cli) -> Result<(), CliError> {
    let started = Instant::now();
    match cli.command {
        Command::Preprocess {
            out,
            window,
            stride,
            images,
        } => {
            let config = WindowingConfig {
                window_length: window,
                stride: stride.unwrap_or(window),
            };
            config.validate()?;
            let mut stems = std::collections::HashSet::new();
            for img in &images {
                let stem = img.file_stem().and_then(|s| s.to_str()).unwrap_or("image").to_string();
                if !stems.insert(stem.clone()) {
                    return Err(CliError::Input(format!("duplicate input name '{stem}'")));
                }
            }
            let mut outputs = Outputs::new(&out)?;
            let mut per_image = IndexMap::new();
            for img in &images {
                let grid = io::read_image(img)?;
                let windows = preprocessing::preprocess(&grid, &config)
                    .map_err(|e| CliError::Input(format!("{}: {e}", img.display())))?;
                let stem = img.file_stem().and_then(|s| s.to_str()).unwrap_or("image");
                for (i, w) in windows.iter().enumerate() {
                    outputs.write(format!("{stem}_w{i:05}.csv"), io::sequence_to_csv(w).as_bytes())?;
                }
                per_image.insert(display(img), windows.len());
            }
            finish(
                outputs,
                RunInfo {
                    command: "preprocess",
                    config: serde_json::to_value(config).expect("serializable"),
                    inputs: images.iter().map(|p| display(p)).collect(),
                    seed: None,
                    details: json!({ "windows": per_image }),
                },
                started,
            )
        }
        Command::Train {
            data,
            out,
            states,
            max_iters,
            tol,
            seed,
            init,
            emission,
            windows,
        } => {
            let config = TrainingConfig {
                n_states: states as usize,
                max_iterations: max_iters as usize,
                rel_tolerance: tol,
                seed,
                init_scheme: match init {
                    InitArg::Paper => InitScheme::PaperRandom,
                    InitArg::Quantile => InitScheme::DataQuantile,
                },
                ..TrainingConfig::default()
            };
            config.validate()?;
            let wcfg = windows.config();
            if let Some(w) = &wcfg {
                w.validate()?;
            }
            let mut inputs = Vec::new();
            let labelled = load_labelled(&data, emission.into(), wcfg.as_ref(), &mut inputs)?;
            let (bank, reports) = train_bank(&labelled, &config)?;
            let mut outputs = Outputs::new(&out)?;
            outputs.write_json("bank.json", &bank)?;
            for (label, report) in &reports {
                let name = safe_name(label);
                outputs.write(format!("reports/{name}.csv"), report.trace_csv().as_bytes())?;
                outputs.write_json(&format!("reports/{name}.json"), report)?;
            }
            finish(
                outputs,
                RunInfo {
                    command: "train",
                    config: json!({ "training": config, "emission": emission, "windowing": wcfg }),
                    inputs,
                    seed: Some(seed),
                    details: json!({
                        "sequences": labelled.iter().map(|(l, s)| (l.to_string(), s.len())).collect::<IndexMap<_, _>>(),
                        "per_class_seeds": "seed + FNV-1a(label), wrapping",
                    }),
                },
                started,
            )
        }
        Command::Classify {
            bank,
            out,
            emission,
            files,
        } => {
            let models = load_bank(&bank, emission)?;
            let kind = models.emission_kind();
            let mut csv = String::from("file");
            for l in models.labels() {
                csv.push(',');
                csv.push_str(l.as_str());
            }
            csv.push_str(",predicted\n");
            for file in &files {
                let seq = read_sequence(file, kind)?;
                let r = classify(&models, &seq).map_err(|e| CliError::Input(format!("{}: {e}", file.display())))?;
                csv.push_str(&display(file));
                for s in r.scores.values() {
                    csv.push_str(&format!(",{s}"));
                }
                csv.push_str(&format!(",{}\n", r.predicted));
            }
            let mut outputs = Outputs::new(&out)?;
            outputs.write("scores.csv", csv.as_bytes())?;
            let mut inputs = vec![display(&bank)];
            inputs.extend(files.iter().map(|p| display(p)));
            finish(
                outputs,
                RunInfo {
                    command: "classify",
                    config: json!({ "emission": kind }),
                    inputs,
                    seed: None,
                    details: serde_json::Value::Null,
                },
                started,
            )
        }
        Command::Evaluate {
            bank,
            data,
            out,
            emission,
            windows,
        } => {
            let models = load_bank(&bank, emission)?;
            let wcfg = windows.config();
            if let Some(w) = &wcfg {
                w.validate()?;
            }
            let mut inputs = vec![display(&bank)];
            let test = load_labelled(&data, models.emission_kind(), wcfg.as_ref(), &mut inputs)?;
            let cm = evaluate(&models, &test)?;
            let mut outputs = Outputs::new(&out)?;
            outputs.write("confusion.csv", cm.to_csv().as_bytes())?;
            outputs.write("confusion_counts.csv", cm.counts_csv().as_bytes())?;
            outputs.write_json("confusion.json", &cm)?;
            outputs.write("confusion.dat", cm.to_gnuplot().as_bytes())?;
            finish(
                outputs,
                RunInfo {
                    command: "evaluate",
                    config: json!({ "windowing": wcfg }),
                    inputs,
                    seed: None,
                    details: serde_json::Value::Null,
                },
                started,
            )
        }
        Command::Synth {
            out,
            classes,
            states,
            separation,
            self_transition,
            train_per_class,
            test_per_class,
            length,
            seed,
            profile,
        } => {
            let spec = SyntheticSpec {
                n_classes: classes,
                n_states: states,
                separation,
                self_transition,
                seed,
            };
            if length < 2 {
                return Err(CliError::Input("--length must be at least 2".into()));
            }
            let generators = synthetic::make_separated_bank(&spec)?;
            let mut outputs = Outputs::new(&out)?;
            outputs.write_json("generators.json", &generators)?;
            let mut counts = IndexMap::new();
            for (split, stream, per_class) in [("train", 0u64, train_per_class), ("test", 1, test_per_class)] {
                let data = synthetic::sample_dataset(&generators, per_class, length, seed, stream, profile)?;
                let mut split_counts = IndexMap::new();
                for (label, seqs) in &data {
                    for (i, s) in seqs.iter().enumerate() {
                        outputs.write(
                            format!("{split}/{}/seq_{i:05}.csv", safe_name(label)),
                            io::sequence_to_csv(s).as_bytes(),
                        )?;
                    }
                    split_counts.insert(label.to_string(), seqs.len());
                }
                counts.insert(split, split_counts);
            }
            finish(
                outputs,
                RunInfo {
                    command: "synth",
                    config: json!({ "length": length, "profile": profile }),
                    inputs: Vec::new(),
                    seed: Some(seed),
                    details: json!({ "spec": spec, "seed": seed, "counts": counts }),
                },
                started,
            )
        }
    }
}

/// Parses `args` (including the program name) and runs; returns the exit code.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return e.exit_code();
        }
    };
    match execute(cli) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn flag_validation_exit_codes() {
        assert_eq!(
            run(["hmmclass", "train", "--data", "x", "--out", "y", "--states", "0"]),
            2
        );
        assert_eq!(run(["hmmclass", "bogus"]), 2);
        assert_eq!(run(["hmmclass", "--help"]), 0);
    }

    #[test]
    fn window_args() {
        let w = WindowArgs {
            window: Some(10),
            stride: None,
        };
        assert_eq!(w.config(), Some(WindowingConfig::non_overlapping(10)));
        assert_eq!(
            WindowArgs {
                window: None,
                stride: Some(3)
            }
            .config(),
            None
        );
    }

    #[test]
    fn label_file_names_are_sanitized() {
        assert_eq!(safe_name(&ClassLabel::new("a/b c").unwrap()), "a_b_c");
    }
}
