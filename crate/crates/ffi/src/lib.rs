//! C ABI over `hmmclass`.
//!
//! Models and banks are opaque heap handles created by `*_from_json` or
//! training calls and released with the matching `*_free`. Every fallible
//! call returns an [`HmcStatus`]; on failure a message is available from
//! [`hmc_last_error_message`] on the same thread. Panics never cross the
//! boundary; they surface as `HMC_STATUS_INTERNAL`.

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::ptr;
use std::slice;

use hmmclass::training::{EmissionFamily, InitScheme, TrainingConfig};
use hmmclass::{HmmError, HmmModel, ModelBank, ObservationSequence};

/// Status codes returned by every fallible function.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum HmcStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidArgument = 2,
    InvalidModel = 3,
    InvalidObservation = 4,
    TypeMismatch = 5,
    EmptySequence = 6,
    LengthMismatch = 7,
    ImpossibleSequence = 8,
    DegenerateVariance = 9,
    SequenceTooShort = 10,
    EmptyTrainingSet = 11,
    Unclassifiable = 12,
    Parse = 13,
    Internal = 99,
}

impl From<&HmmError> for HmcStatus {
    fn from(e: &HmmError) -> Self {
        match e {
            HmmError::InvalidModel(_) => HmcStatus::InvalidModel,
            HmmError::InvalidObservation(_) => HmcStatus::InvalidObservation,
            HmmError::TypeMismatch { .. } => HmcStatus::TypeMismatch,
            HmmError::EmptySequence => HmcStatus::EmptySequence,
            HmmError::LengthMismatch { .. } | HmmError::MixedLengths { .. } => HmcStatus::LengthMismatch,
            HmmError::ImpossibleSequence { .. } => HmcStatus::ImpossibleSequence,
            HmmError::DegenerateVariance => HmcStatus::DegenerateVariance,
            HmmError::SequenceTooShort { .. } => HmcStatus::SequenceTooShort,
            HmmError::EmptyTrainingSet { .. } | HmmError::EmptyTestSet => HmcStatus::EmptyTrainingSet,
            HmmError::Unclassifiable => HmcStatus::Unclassifiable,
            _ => HmcStatus::InvalidArgument,
        }
    }
}

/// Initialization scheme for [`HmcTrainingConfig`].
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum HmcInitScheme {
    DataQuantile = 0,
    PaperRandom = 1,
}

/// Plain-data mirror of the training configuration.
#[repr(C)]
#[derive(Debug, Clone, Copy)]
pub struct HmcTrainingConfig {
    pub n_states: usize,
    pub max_iterations: usize,
    pub rel_tolerance: f64,
    pub seed: u64,
    pub init_scheme: HmcInitScheme,
    pub variance_floor: f64,
}

impl From<HmcTrainingConfig> for TrainingConfig {
    fn from(c: HmcTrainingConfig) -> Self {
        TrainingConfig {
            n_states: c.n_states,
            max_iterations: c.max_iterations,
            rel_tolerance: c.rel_tolerance,
            seed: c.seed,
            init_scheme: match c.init_scheme {
                HmcInitScheme::DataQuantile => InitScheme::DataQuantile,
                HmcInitScheme::PaperRandom => InitScheme::PaperRandom,
            },
            variance_floor: c.variance_floor,
        }
    }
}

/// Opaque model handle.
pub struct HmcModel {
    inner: HmmModel,
}

/// Opaque model-bank handle.
pub struct HmcBank {
    inner: ModelBank,
    labels: Vec<CString>,
}

struct Failure(HmcStatus, String);

impl From<HmmError> for Failure {
    fn from(e: HmmError) -> Self {
        Failure(HmcStatus::from(&e), e.to_string())
    }
}

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_last_error(msg: &str) {
    let c = CString::new(msg.replace('\0', " ")).expect("nul bytes removed");
    LAST_ERROR.with(|e| *e.borrow_mut() = Some(c));
}

fn guard(f: impl FnOnce() -> Result<(), Failure>) -> HmcStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => {
            LAST_ERROR.with(|e| *e.borrow_mut() = None);
            HmcStatus::Ok
        }
        Ok(Err(Failure(status, msg))) => {
            set_last_error(&msg);
            status
        }
        Err(_) => {
            set_last_error("internal panic");
            HmcStatus::Internal
        }
    }
}

fn null(what: &str) -> Failure {
    Failure(HmcStatus::NullPointer, format!("{what} is NULL"))
}

unsafe fn reals<'a>(ptr: *const f64, len: usize) -> Result<&'a [f64], Failure> {
    if len == 0 {
        return Ok(&[]);
    }
    if ptr.is_null() {
        return Err(null("values"));
    }
    Ok(slice::from_raw_parts(ptr, len))
}

unsafe fn text<'a>(ptr: *const c_char) -> Result<&'a str, Failure> {
    if ptr.is_null() {
        return Err(null("string"));
    }
    CStr::from_ptr(ptr)
        .to_str()
        .map_err(|e| Failure(HmcStatus::Parse, format!("invalid UTF-8: {e}")))
}

unsafe fn model_ref<'a>(m: *const HmcModel) -> Result<&'a HmmModel, Failure> {
    m.as_ref().map(|m| &m.inner).ok_or_else(|| null("model"))
}

unsafe fn bank_ref<'a>(b: *const HmcBank) -> Result<&'a HmcBank, Failure> {
    b.as_ref().ok_or_else(|| null("bank"))
}

fn json_out(json: String, out: *mut *mut c_char) -> Result<(), Failure> {
    if out.is_null() {
        return Err(null("out"));
    }
    let c = CString::new(json).map_err(|e| Failure(HmcStatus::Internal, e.to_string()))?;
    unsafe { *out = c.into_raw() };
    Ok(())
}

/// Library version as a static NUL-terminated string.
#[no_mangle]
pub extern "C" fn hmc_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}

/// Message for the last failed call on this thread, or NULL. The pointer is
/// valid until the next library call on the same thread.
#[no_mangle]
pub extern "C" fn hmc_last_error_message() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ref().map_or(ptr::null(), |c| c.as_ptr()))
}

/// Frees a string returned by a `*_to_json` function.
///
/// # Safety
/// `s` must be NULL or a pointer obtained from this library and not yet freed.
#[no_mangle]
pub unsafe extern "C" fn hmc_string_free(s: *mut c_char) {
    if !s.is_null() {
        drop(CString::from_raw(s));
    }
}

/// Default training configuration (17 states, quantile initialization).
#[no_mangle]
pub extern "C" fn hmc_training_config_default() -> HmcTrainingConfig {
    let d = TrainingConfig::default();
    HmcTrainingConfig {
        n_states: d.n_states,
        max_iterations: d.max_iterations,
        rel_tolerance: d.rel_tolerance,
        seed: d.seed,
        init_scheme: HmcInitScheme::DataQuantile,
        variance_floor: d.variance_floor,
    }
}

/// Parses a model from its JSON document.
///
/// # Safety
/// `json` must be a NUL-terminated string; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn hmc_model_from_json(json: *const c_char, out: *mut *mut HmcModel) -> HmcStatus {
    guard(|| {
        if out.is_null() {
            return Err(null("out"));
        }
        let model: HmmModel =
            serde_json::from_str(text(json)?).map_err(|e| Failure(HmcStatus::Parse, e.to_string()))?;
        *out = Box::into_raw(Box::new(HmcModel { inner: model }));
        Ok(())
    })
}

/// Serializes a model; free the result with [`hmc_string_free`].
///
/// # Safety
/// `model` must be a live handle; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn hmc_model_to_json(model: *const HmcModel, out: *mut *mut c_char) -> HmcStatus {
    guard(|| {
        let m = model_ref(model)?;
        json_out(
            serde_json::to_string(m).map_err(|e| Failure(HmcStatus::Internal, e.to_string()))?,
            out,
        )
    })
}

/// # Safety
/// `model` must be NULL or a handle from this library, freed at most once.
#[no_mangle]
pub unsafe extern "C" fn hmc_model_free(model: *mut HmcModel) {
    if !model.is_null() {
        drop(Box::from_raw(model));
    }
}

/// Number of hidden states, or 0 for a NULL handle.
///
/// # Safety
/// `model` must be NULL or a live handle.
#[no_mangle]
pub unsafe extern "C" fn hmc_model_n_states(model: *const HmcModel) -> usize {
    model.as_ref().map_or(0, |m| m.inner.n_states())
}

/// Log-likelihood of a real-valued sequence (Gaussian models). Writes
/// `-INFINITY` for impossible sequences.
///
/// # Safety
/// `values` must point to `len` doubles; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn hmc_model_log_likelihood(
    model: *const HmcModel,
    values: *const f64,
    len: usize,
    out: *mut f64,
) -> HmcStatus {
    guard(|| {
        let m = model_ref(model)?;
        let seq = ObservationSequence::Continuous(reals(values, len)?.to_vec());
        let ll = hmmclass::log_likelihood(m, &seq)?;
        *out.as_mut().ok_or_else(|| null("out"))? = ll;
        Ok(())
    })
}

/// Log-likelihood of a symbol sequence (discrete models).
///
/// # Safety
/// `symbols` must point to `len` values; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn hmc_model_log_likelihood_symbols(
    model: *const HmcModel,
    symbols: *const usize,
    len: usize,
    out: *mut f64,
) -> HmcStatus {
    guard(|| {
        let m = model_ref(model)?;
        let syms = if len == 0 {
            Vec::new()
        } else if symbols.is_null() {
            return Err(null("symbols"));
        } else {
            slice::from_raw_parts(symbols, len).to_vec()
        };
        let ll = hmmclass::log_likelihood(m, &ObservationSequence::Discrete(syms))?;
        *out.as_mut().ok_or_else(|| null("out"))? = ll;
        Ok(())
    })
}

/// Most probable state path of a real-valued sequence.
///
/// # Safety
/// `values` must point to `len` doubles, `path_out` to `len` writable
/// `size_t`; `log_joint_out` may be NULL.
#[no_mangle]
pub unsafe extern "C" fn hmc_model_viterbi(
    model: *const HmcModel,
    values: *const f64,
    len: usize,
    path_out: *mut usize,
    log_joint_out: *mut f64,
) -> HmcStatus {
    guard(|| {
        let m = model_ref(model)?;
        let seq = ObservationSequence::Continuous(reals(values, len)?.to_vec());
        let (path, lj) = hmmclass::viterbi(m, &seq)?;
        if path_out.is_null() {
            return Err(null("path_out"));
        }
        slice::from_raw_parts_mut(path_out, len).copy_from_slice(&path);
        if let Some(o) = log_joint_out.as_mut() {
            *o = lj;
        }
        Ok(())
    })
}

/// State posteriors, written row-major into `gamma_out` (`len × n_states`).
///
/// # Safety
/// `values` must point to `len` doubles and `gamma_out` to
/// `len * n_states` writable doubles.
#[no_mangle]
pub unsafe extern "C" fn hmc_model_posteriors(
    model: *const HmcModel,
    values: *const f64,
    len: usize,
    gamma_out: *mut f64,
) -> HmcStatus {
    guard(|| {
        let m = model_ref(model)?;
        let seq = ObservationSequence::Continuous(reals(values, len)?.to_vec());
        let post = hmmclass::posteriors(m, &seq)?;
        if gamma_out.is_null() {
            return Err(null("gamma_out"));
        }
        let out = slice::from_raw_parts_mut(gamma_out, len * m.n_states());
        for (o, g) in out.iter_mut().zip(post.gamma.iter()) {
            *o = *g;
        }
        Ok(())
    })
}

/// Row-major unfolding, z-scoring and cumulative sum of a `rows × cols`
/// image; writes `rows * cols` values.
///
/// # Safety
/// `pixels` must point to `rows * cols` doubles and `out` to as many
/// writable doubles.
#[no_mangle]
pub unsafe extern "C" fn hmc_fluctuation_profile(
    pixels: *const f64,
    rows: usize,
    cols: usize,
    out: *mut f64,
) -> HmcStatus {
    guard(|| {
        let n = rows
            .checked_mul(cols)
            .ok_or_else(|| Failure(HmcStatus::InvalidArgument, "image too large".into()))?;
        let grid = hmmclass::ImageGrid::new(rows, cols, reals(pixels, n)?.to_vec())?;
        let profile = hmmclass::preprocessing::fluctuation_profile(&hmmclass::unfold_horizontal(&grid))?;
        let ObservationSequence::Continuous(v) = profile else {
            unreachable!()
        };
        if out.is_null() {
            return Err(null("out"));
        }
        slice::from_raw_parts_mut(out, n).copy_from_slice(&v);
        Ok(())
    })
}

/// Trains a Gaussian model on `n_seqs` sequences; `seqs[i]` has `lens[i]`
/// values. `config` may be NULL for defaults; `final_loglik` may be NULL.
///
/// # Safety
/// `seqs` and `lens` must point to `n_seqs` entries each, and every
/// `seqs[i]` to `lens[i]` doubles.
#[no_mangle]
pub unsafe extern "C" fn hmc_train_gaussian(
    seqs: *const *const f64,
    lens: *const usize,
    n_seqs: usize,
    config: *const HmcTrainingConfig,
    out: *mut *mut HmcModel,
    final_loglik: *mut f64,
) -> HmcStatus {
    guard(|| {
        if out.is_null() {
            return Err(null("out"));
        }
        if n_seqs > 0 && (seqs.is_null() || lens.is_null()) {
            return Err(null("seqs"));
        }
        let cfg: TrainingConfig = config
            .as_ref()
            .copied()
            .unwrap_or_else(|| hmc_training_config_default())
            .into();
        let data = (0..n_seqs)
            .map(|i| {
                Ok(ObservationSequence::Continuous(
                    reals(*seqs.add(i), *lens.add(i))?.to_vec(),
                ))
            })
            .collect::<Result<Vec<_>, Failure>>()?;
        let init = hmmclass::initialize_model(&cfg, EmissionFamily::Gaussian, &data)?;
        let (model, report) = hmmclass::baum_welch(&init, &data, &cfg)?;
        if let Some(f) = final_loglik.as_mut() {
            *f = report.final_loglik;
        }
        *out = Box::into_raw(Box::new(HmcModel { inner: model }));
        Ok(())
    })
}

/// Parses a model bank from its JSON document.
///
/// # Safety
/// `json` must be a NUL-terminated string; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn hmc_bank_from_json(json: *const c_char, out: *mut *mut HmcBank) -> HmcStatus {
    guard(|| {
        if out.is_null() {
            return Err(null("out"));
        }
        let bank: ModelBank =
            serde_json::from_str(text(json)?).map_err(|e| Failure(HmcStatus::Parse, e.to_string()))?;
        let labels = bank
            .labels()
            .iter()
            .map(|l| CString::new(l.as_str()).map_err(|e| Failure(HmcStatus::Parse, e.to_string())))
            .collect::<Result<Vec<_>, _>>()?;
        *out = Box::into_raw(Box::new(HmcBank { inner: bank, labels }));
        Ok(())
    })
}

/// # Safety
/// `bank` must be a live handle; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn hmc_bank_to_json(bank: *const HmcBank, out: *mut *mut c_char) -> HmcStatus {
    guard(|| {
        let b = bank_ref(bank)?;
        json_out(
            serde_json::to_string(&b.inner).map_err(|e| Failure(HmcStatus::Internal, e.to_string()))?,
            out,
        )
    })
}

/// # Safety
/// `bank` must be NULL or a handle from this library, freed at most once.
#[no_mangle]
pub unsafe extern "C" fn hmc_bank_free(bank: *mut HmcBank) {
    if !bank.is_null() {
        drop(Box::from_raw(bank));
    }
}

/// Number of classes, or 0 for a NULL handle.
///
/// # Safety
/// `bank` must be NULL or a live handle.
#[no_mangle]
pub unsafe extern "C" fn hmc_bank_len(bank: *const HmcBank) -> usize {
    bank.as_ref().map_or(0, |b| b.inner.len())
}

/// Label of class `index`, owned by the bank; NULL if out of range.
///
/// # Safety
/// `bank` must be NULL or a live handle.
#[no_mangle]
pub unsafe extern "C" fn hmc_bank_label(bank: *const HmcBank, index: usize) -> *const c_char {
    bank.as_ref()
        .and_then(|b| b.labels.get(index))
        .map_or(ptr::null(), |c| c.as_ptr())
}

/// Classifies a real-valued sequence. Writes the index of the predicted
/// class and, if `scores_out` is non-NULL, `hmc_bank_len(bank)` per-class
/// log-likelihoods in bank order.
///
/// # Safety
/// `values` must point to `len` doubles; `predicted` must be writable;
/// `scores_out` must be NULL or hold `hmc_bank_len(bank)` doubles.
#[no_mangle]
pub unsafe extern "C" fn hmc_bank_classify(
    bank: *const HmcBank,
    values: *const f64,
    len: usize,
    predicted: *mut usize,
    scores_out: *mut f64,
) -> HmcStatus {
    guard(|| {
        let b = bank_ref(bank)?;
        let seq = ObservationSequence::Continuous(reals(values, len)?.to_vec());
        let r = hmmclass::classify(&b.inner, &seq)?;
        *predicted.as_mut().ok_or_else(|| null("predicted"))? =
            b.inner.position(&r.predicted).expect("label from bank");
        if !scores_out.is_null() {
            let out = slice::from_raw_parts_mut(scores_out, b.inner.len());
            for (o, s) in out.iter_mut().zip(r.scores.values()) {
                *o = *s;
            }
        }
        Ok(())
    })
}
