use std::ffi::{CStr, CString};
use std::ptr;

use hmmclass::{HmmModel, ModelBank, ObservationSequence};
use hmmclass_ffi::*;

fn two_state() -> HmmModel {
    HmmModel::gaussian(
        vec![0.6, 0.4],
        vec![vec![0.9, 0.1], vec![0.2, 0.8]],
        vec![0.0, 5.0],
        vec![1.0, 2.0],
    )
    .unwrap()
}

fn load(model: &HmmModel) -> *mut HmcModel {
    let json = CString::new(serde_json::to_string(model).unwrap()).unwrap();
    let mut h = ptr::null_mut();
    assert_eq!(unsafe { hmc_model_from_json(json.as_ptr(), &mut h) }, HmcStatus::Ok);
    h
}

fn last_error() -> String {
    let p = hmc_last_error_message();
    assert!(!p.is_null());
    unsafe { CStr::from_ptr(p) }.to_string_lossy().into_owned()
}

#[test]
fn likelihood_matches_library() {
    let model = two_state();
    let xs = [0.1, 4.2, 5.5, -0.3, 0.7];
    let h = load(&model);
    let mut ll = 0.0;
    let st = unsafe { hmc_model_log_likelihood(h, xs.as_ptr(), xs.len(), &mut ll) };
    assert_eq!(st, HmcStatus::Ok);
    let want = hmmclass::log_likelihood(&model, &ObservationSequence::Continuous(xs.to_vec())).unwrap();
    assert_eq!(ll.to_bits(), want.to_bits());
    assert_eq!(unsafe { hmc_model_n_states(h) }, 2);

    let mut path = [usize::MAX; 5];
    let mut lj = 0.0;
    assert_eq!(
        unsafe { hmc_model_viterbi(h, xs.as_ptr(), xs.len(), path.as_mut_ptr(), &mut lj) },
        HmcStatus::Ok
    );
    assert_eq!(path, [0, 1, 1, 0, 0]);
    assert!(lj <= ll);

    let mut gamma = [0.0; 10];
    assert_eq!(
        unsafe { hmc_model_posteriors(h, xs.as_ptr(), xs.len(), gamma.as_mut_ptr()) },
        HmcStatus::Ok
    );
    for row in gamma.chunks(2) {
        assert!((row[0] + row[1] - 1.0).abs() < 1e-12);
    }
    unsafe { hmc_model_free(h) };
}

#[test]
fn errors_are_reported() {
    let h = load(&two_state());
    let mut ll = 0.0;
    let st = unsafe { hmc_model_log_likelihood(h, ptr::null(), 0, &mut ll) };
    assert_eq!(st, HmcStatus::EmptySequence);
    assert!(!last_error().is_empty());

    let st = unsafe { hmc_model_log_likelihood_symbols(h, [0usize, 1].as_ptr(), 2, &mut ll) };
    assert_eq!(st, HmcStatus::TypeMismatch);

    let st = unsafe { hmc_model_log_likelihood(ptr::null(), [1.0].as_ptr(), 1, &mut ll) };
    assert_eq!(st, HmcStatus::NullPointer);

    let bad = CString::new("{\"n_states\": 2").unwrap();
    let mut m = ptr::null_mut();
    assert_eq!(unsafe { hmc_model_from_json(bad.as_ptr(), &mut m) }, HmcStatus::Parse);
    assert!(m.is_null());

    let mut out = [0.0; 4];
    let flat = [3.0; 4];
    assert_eq!(
        unsafe { hmc_fluctuation_profile(flat.as_ptr(), 2, 2, out.as_mut_ptr()) },
        HmcStatus::DegenerateVariance
    );

    assert_eq!(
        unsafe { hmc_model_log_likelihood(h, [1.0].as_ptr(), 1, &mut ll) },
        HmcStatus::Ok
    );
    assert!(hmc_last_error_message().is_null());
    unsafe { hmc_model_free(h) };
}

#[test]
fn json_round_trip_through_handles() {
    let h = load(&two_state());
    let mut s = ptr::null_mut();
    assert_eq!(unsafe { hmc_model_to_json(h, &mut s) }, HmcStatus::Ok);
    let text = unsafe { CStr::from_ptr(s) }.to_str().unwrap().to_owned();
    unsafe { hmc_string_free(s) };
    let back: HmmModel = serde_json::from_str(&text).unwrap();
    assert_eq!(back, two_state());
    unsafe { hmc_model_free(h) };
}

#[test]
fn profile_is_cumulative_zscore() {
    let px = [1.0, 2.0, 3.0, 4.0, 5.0, 6.0];
    let mut out = [0.0; 6];
    assert_eq!(
        unsafe { hmc_fluctuation_profile(px.as_ptr(), 2, 3, out.as_mut_ptr()) },
        HmcStatus::Ok
    );
    let grid = hmmclass::ImageGrid::new(2, 3, px.to_vec()).unwrap();
    let z = hmmclass::zscore(&hmmclass::unfold_horizontal(&grid)).unwrap();
    let ObservationSequence::Continuous(want) = hmmclass::cumulative_sum(&z).unwrap() else {
        panic!()
    };
    assert_eq!(out.to_vec(), want);
    assert!(out[5].abs() < 1e-12);
}

#[test]
fn train_and_classify() {
    let a = two_state();
    let b = HmmModel::gaussian(
        vec![0.5, 0.5],
        vec![vec![0.5, 0.5], vec![0.5, 0.5]],
        vec![20.0, 30.0],
        vec![1.0, 1.0],
    )
    .unwrap();
    let seqs: Vec<Vec<f64>> = (0..4)
        .map(|i| match hmmclass::synthetic::sample_sequence(&a, 150, i).0 {
            ObservationSequence::Continuous(v) => v,
            _ => unreachable!(),
        })
        .collect();
    let ptrs: Vec<*const f64> = seqs.iter().map(|s| s.as_ptr()).collect();
    let lens: Vec<usize> = seqs.iter().map(Vec::len).collect();
    let mut cfg = hmc_training_config_default();
    assert_eq!(cfg.n_states, 17);
    cfg.n_states = 2;
    cfg.max_iterations = 50;
    let mut trained = ptr::null_mut();
    let mut fl = f64::NAN;
    let st = unsafe { hmc_train_gaussian(ptrs.as_ptr(), lens.as_ptr(), seqs.len(), &cfg, &mut trained, &mut fl) };
    assert_eq!(st, HmcStatus::Ok, "{}", last_error());
    assert!(fl.is_finite());
    assert_eq!(unsafe { hmc_model_n_states(trained) }, 2);
    unsafe { hmc_model_free(trained) };

    let bank = ModelBank::new(vec![
        (hmmclass::ClassLabel::new("low").unwrap(), a),
        (hmmclass::ClassLabel::new("high").unwrap(), b),
    ])
    .unwrap();
    let json = CString::new(serde_json::to_string(&bank).unwrap()).unwrap();
    let mut hb = ptr::null_mut();
    assert_eq!(unsafe { hmc_bank_from_json(json.as_ptr(), &mut hb) }, HmcStatus::Ok);
    assert_eq!(unsafe { hmc_bank_len(hb) }, 2);
    let label = unsafe { CStr::from_ptr(hmc_bank_label(hb, 1)) };
    assert_eq!(label.to_str().unwrap(), "high");
    assert!(unsafe { hmc_bank_label(hb, 2) }.is_null());

    let mut pred = usize::MAX;
    let mut scores = [0.0; 2];
    let xs = [21.0, 29.0, 30.5];
    assert_eq!(
        unsafe { hmc_bank_classify(hb, xs.as_ptr(), xs.len(), &mut pred, scores.as_mut_ptr()) },
        HmcStatus::Ok
    );
    assert_eq!(pred, 1);
    assert!(scores[1] > scores[0]);
    unsafe { hmc_bank_free(hb) };
}

#[test]
fn version_is_crate_version() {
    let v = unsafe { CStr::from_ptr(hmc_version()) };
    assert_eq!(v.to_str().unwrap(), env!("CARGO_PKG_VERSION"));
}
