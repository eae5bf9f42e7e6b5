use std::ffi::{CStr, CString};
use std::path::Path;
use std::process::Command;
use std::ptr;

use cloudcast_ffi::*;

fn last_error() -> String {
    unsafe { CStr::from_ptr(cc_last_error_message()) }.to_string_lossy().into_owned()
}

fn synthetic(vx: f64) -> *mut CcSequence {
    let mut seq = ptr::null_mut();
    let st = unsafe { cc_synthetic_translation(CcField::BandlimitedNoise, 64, 64, 24, vx, 0.0, 3, &mut seq) };
    assert_eq!(st, CcStatus::Ok, "{}", last_error());
    seq
}

#[test]
fn version_is_nul_terminated() {
    let v = unsafe { CStr::from_ptr(cc_version()) };
    assert_eq!(v.to_str().unwrap(), env!("CARGO_PKG_VERSION"));
}

#[test]
fn thresholds_through_the_abi() {
    let mut t = CcThresholds::default();
    assert_eq!(unsafe { cc_height_thresholds(252.0, 273.0, 283.0, 210.0, &mut t) }, CcStatus::Ok);
    // Same linear combinations evaluated independently.
    assert!((t.very_high - (0.4 * 252.0 + 0.6 * 210.0 - 5.0)).abs() < 1e-9);
    assert!((t.high - (0.5 * 252.0 - 0.2 * 273.0 + 178.0)).abs() < 1e-9);
    assert!((t.medium - (0.8 * 283.0 + 0.2 * 273.0 - 8.0)).abs() < 1e-9);
    assert!((t.low - (1.2 * 283.0 - 0.2 * 273.0 - 5.0)).abs() < 1e-9);
    assert_eq!(unsafe { cc_height_thresholds(f64::NAN, 0.0, 0.0, 0.0, &mut t) }, CcStatus::InvalidArgument);
}

#[test]
fn skill_score_and_null_handling() {
    let mut v = 0.0;
    assert_eq!(unsafe { cc_brier_skill_score(0.16, 0.18, &mut v) }, CcStatus::Ok);
    assert!((v - (1.0 - 0.16 / 0.18)).abs() < 1e-12);
    assert_eq!(unsafe { cc_brier_skill_score(0.1, 0.0, &mut v) }, CcStatus::InvalidArgument);
    assert!(!last_error().is_empty());
    assert_eq!(unsafe { cc_brier_skill_score(0.1, 0.2, ptr::null_mut()) }, CcStatus::NullPointer);
    let mut dims = (0, 0, 0);
    assert_eq!(
        unsafe { cc_sequence_dims(ptr::null(), &mut dims.0, &mut dims.1, &mut dims.2) },
        CcStatus::NullPointer
    );
    unsafe {
        cc_sequence_free(ptr::null_mut());
        cc_forecast_free(ptr::null_mut());
    }
}

#[test]
fn sequence_round_trip_from_labels() {
    let labels: Vec<u8> = (0..2 * 2 * 3).map(|i| (i % 4) as u8).collect();
    let stamps = [1_491_051_600i64, 1_491_052_500];
    let mut seq = ptr::null_mut();
    let st = unsafe { cc_sequence_from_labels(2, 2, 3, labels.as_ptr(), stamps.as_ptr(), false, &mut seq) };
    assert_eq!(st, CcStatus::Ok, "{}", last_error());
    let (mut t, mut h, mut w) = (0, 0, 0);
    assert_eq!(unsafe { cc_sequence_dims(seq, &mut t, &mut h, &mut w) }, CcStatus::Ok);
    assert_eq!((t, h, w), (2, 2, 3));
    let mut back = vec![0u8; 12];
    assert_eq!(unsafe { cc_sequence_labels(seq, back.as_mut_ptr(), back.len()) }, CcStatus::Ok);
    assert_eq!(back, labels);
    let mut ts = [0i64; 2];
    assert_eq!(unsafe { cc_sequence_timestamps(seq, ts.as_mut_ptr(), 2) }, CcStatus::Ok);
    assert_eq!(ts, stamps);
    let mut small = [0u8; 4];
    assert_eq!(unsafe { cc_sequence_labels(seq, small.as_mut_ptr(), 4) }, CcStatus::InvalidArgument);

    let dir = tempfile::tempdir().unwrap();
    let npy = CString::new(dir.path().join("s.npy").to_str().unwrap()).unwrap();
    let meta = CString::new(dir.path().join("s.json").to_str().unwrap()).unwrap();
    assert_eq!(unsafe { cc_sequence_save(seq, npy.as_ptr(), meta.as_ptr()) }, CcStatus::Ok);
    let mut loaded = ptr::null_mut();
    assert_eq!(unsafe { cc_sequence_load(npy.as_ptr(), meta.as_ptr(), &mut loaded) }, CcStatus::Ok);
    let mut again = vec![0u8; 12];
    assert_eq!(unsafe { cc_sequence_labels(loaded, again.as_mut_ptr(), 12) }, CcStatus::Ok);
    assert_eq!(again, labels);
    unsafe {
        cc_sequence_free(seq);
        cc_sequence_free(loaded);
    }
}

#[test]
fn invalid_inputs_map_to_codes() {
    let labels = [0u8, 12];
    let stamps = [0i64];
    let mut seq = ptr::null_mut();
    let st = unsafe { cc_sequence_from_labels(1, 1, 2, labels.as_ptr(), stamps.as_ptr(), true, &mut seq) };
    assert_eq!(st, CcStatus::InvalidLabel);
    assert!(seq.is_null());
    let missing = CString::new("/nonexistent/x.npy").unwrap();
    let st = unsafe { cc_sequence_load(missing.as_ptr(), missing.as_ptr(), &mut seq) };
    assert_eq!(st, CcStatus::Io);
    let mut reduced = ptr::null_mut();
    let four = synthetic(0.0);
    assert_eq!(unsafe { cc_sequence_reduce(four, &mut reduced) }, CcStatus::InvalidArgument);
    unsafe { cc_sequence_free(four) };
}

#[test]
fn forecast_and_evaluate() {
    let seq = synthetic(2.0);
    let mut params = std::mem::MaybeUninit::<CcTvL1Params>::uninit();
    assert_eq!(unsafe { cc_tvl1_default_params(params.as_mut_ptr()) }, CcStatus::Ok);
    let params = unsafe { params.assume_init() };
    assert_eq!(params.warps, 5);

    let (mut tv, mut pe) = (ptr::null_mut(), ptr::null_mut());
    assert_eq!(unsafe { cc_forecast_tvl1(seq, 4, &params, 16, &mut tv) }, CcStatus::Ok, "{}", last_error());
    assert_eq!(unsafe { cc_forecast_persistence(seq, 4, 16, &mut pe) }, CcStatus::Ok);
    let (mut s, mut h, mut w) = (0, 0, 0);
    assert_eq!(unsafe { cc_forecast_dims(tv, &mut s, &mut h, &mut w) }, CcStatus::Ok);
    assert_eq!((s, h, w), (16, 64, 64));

    let mut m = std::mem::MaybeUninit::<CcMetrics>::uninit();
    assert_eq!(unsafe { cc_evaluate(tv, seq, pe, m.as_mut_ptr()) }, CcStatus::Ok, "{}", last_error());
    let tv_m = unsafe { m.assume_init() };
    assert_eq!(unsafe { cc_evaluate(pe, seq, ptr::null(), m.as_mut_ptr()) }, CcStatus::Ok);
    let pe_m = unsafe { m.assume_init() };
    assert!(tv_m.mean_accuracy > pe_m.mean_accuracy);
    assert!(tv_m.brier_skill_score > 0.0);
    assert!(pe_m.brier_skill_score.is_nan());
    assert_eq!(tv_m.steps, 16);
    assert_eq!(tv_m.classes, 4);
    assert!(tv_m.per_class_accuracy[4].is_nan());

    // Origin 0 has no previous frame; origin 20 runs past the observed sequence.
    let mut bad = ptr::null_mut();
    assert_eq!(unsafe { cc_forecast_tvl1(seq, 0, ptr::null(), 16, &mut bad) }, CcStatus::InvalidArgument);
    let mut late = ptr::null_mut();
    assert_eq!(unsafe { cc_forecast_persistence(seq, 20, 16, &mut late) }, CcStatus::Ok);
    assert_eq!(unsafe { cc_evaluate(late, seq, ptr::null(), m.as_mut_ptr()) }, CcStatus::Timestamps);
    unsafe {
        cc_forecast_free(tv);
        cc_forecast_free(pe);
        cc_forecast_free(late);
        cc_sequence_free(seq);
    }
}

#[test]
fn header_compiles_as_c() {
    let header_dir = Path::new(env!("CARGO_MANIFEST_DIR")).join("include");
    assert!(header_dir.join("cloudcast.h").exists());
    let dir = tempfile::tempdir().unwrap();
    let src = dir.path().join("use.c");
    std::fs::write(
        &src,
        r#"#include "cloudcast.h"
int main(void) {
    CcSequence *seq = NULL;
    CcTvL1Params p;
    CcMetrics m;
    CcStatus st = cc_tvl1_default_params(&p);
    (void)m;
    cc_sequence_free(seq);
    return st == CC_STATUS_OK ? 0 : 1;
}
"#,
    )
    .unwrap();
    let compiler = std::env::var("CC").unwrap_or_else(|_| "cc".into());
    match Command::new(&compiler)
        .args(["-std=c99", "-Wall", "-Werror", "-fsyntax-only", "-I"])
        .arg(&header_dir)
        .arg(&src)
        .output()
    {
        Ok(out) => assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr)),
        Err(e) => eprintln!("skipping C compile check, no {compiler}: {e}"),
    }
}
