use std::ffi::{CStr, CString};
use std::path::PathBuf;
use std::process::Command;
use std::ptr;

use tsclass_ffi::*;

fn last_code() -> Option<String> {
    let p = tsc_last_error_code();
    (!p.is_null()).then(|| unsafe { CStr::from_ptr(p) }.to_str().unwrap().to_owned())
}

fn take_string(p: *mut std::ffi::c_char) -> String {
    assert!(!p.is_null());
    let s = unsafe { CStr::from_ptr(p) }.to_str().unwrap().to_owned();
    unsafe { tsc_string_free(p) };
    s
}

#[test]
fn version_is_static_and_nonempty() {
    let v = unsafe { CStr::from_ptr(tsc_version()) }.to_str().unwrap();
    assert_eq!(v, env!("CARGO_PKG_VERSION"));
}

#[test]
fn null_arguments_are_reported_not_dereferenced() {
    let st = unsafe { tsc_frame_synthetic(ptr::null(), 10, 2, 0, ptr::null_mut()) };
    assert_eq!(st, TscStatus::NullPointer);
    assert_eq!(last_code().as_deref(), Some("NULL_POINTER"));
    assert_eq!(unsafe { tsc_frame_len(ptr::null()) }, 0);
    assert!(unsafe { tsc_config_hash(ptr::null()) }.is_null());
    unsafe {
        tsc_frame_free(ptr::null_mut());
        tsc_model_free(ptr::null_mut());
        tsc_config_free(ptr::null_mut());
        tsc_string_free(ptr::null_mut());
    }
}

#[test]
fn success_clears_last_error() {
    let mut cfg = ptr::null_mut();
    let bad = CString::new("no equals sign").unwrap();
    assert_eq!(unsafe { tsc_config_parse(bad.as_ptr(), &mut cfg) }, TscStatus::Config);
    assert!(last_code().is_some());
    assert!(!tsc_last_error_message().is_null());
    assert_eq!(unsafe { tsc_config_new(&mut cfg) }, TscStatus::Ok);
    assert!(last_code().is_none());
    unsafe { tsc_config_free(cfg) };
}

#[test]
fn csv_errors_map_to_data_status() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("bad.csv");
    std::fs::write(&path, "date,close\n1,100\n2,abc\n3,101\n").unwrap();
    let p = CString::new(path.to_str().unwrap()).unwrap();
    let mut frame = ptr::null_mut();
    assert_eq!(unsafe { tsc_frame_load_csv(p.as_ptr(), ptr::null(), &mut frame) }, TscStatus::Data);
    assert_eq!(last_code().as_deref(), Some("UNPARSABLE_CELL"));
    assert!(frame.is_null());
}

#[test]
fn labels_and_backtest_through_the_c_surface() {
    let r: Vec<f64> = (0..9).map(|i| i as f64 / 100.0 - 0.04).collect();
    let mut labels = vec![9i8; r.len()];
    let (mut lo, mut hi) = (0.0, 0.0);
    let st = unsafe { tsc_label_by_quantiles(r.as_ptr(), r.len(), 0.33, 0.67, labels.as_mut_ptr(), &mut lo, &mut hi) };
    assert_eq!(st, TscStatus::Ok);
    assert!(lo < hi);
    assert!(labels.iter().all(|l| (-1..=1).contains(l)));
    assert_eq!(labels[0], -1);
    assert_eq!(labels[8], 1);

    let market = [0.1, -0.1, 0.1];
    let sig = [1i8, -1, 1];
    let mut curve = [0.0; 3];
    let (mut fs, mut fm) = (0.0, 0.0);
    let st = unsafe { tsc_backtest(market.as_ptr(), sig.as_ptr(), 3, 0, curve.as_mut_ptr(), &mut fs, &mut fm) };
    assert_eq!(st, TscStatus::Ok);
    assert_eq!(curve[2], fs);
    assert!(fs > fm);
}

#[test]
fn model_fit_predict_and_json_round_trip() {
    let mut frame = ptr::null_mut();
    let kind = CString::new("planted_signal").unwrap();
    assert_eq!(unsafe { tsc_frame_synthetic(kind.as_ptr(), 400, 3, 5, &mut frame) }, TscStatus::Ok);
    let n = unsafe { tsc_frame_len(frame) };
    assert_eq!(n, 400);
    let mut rets = vec![0.0; n];
    assert_eq!(unsafe { tsc_frame_returns(frame, rets.as_mut_ptr()) }, TscStatus::Ok);
    unsafe { tsc_frame_free(frame) };

    // lagged returns as features, sign of the next return as label
    let rows = n - 3;
    let mut x = Vec::with_capacity(rows * 2);
    let mut y = Vec::with_capacity(rows);
    for t in 1..n - 2 {
        x.push(rets[t]);
        x.push(rets[t - 1]);
        y.push(if rets[t + 1] > 0.0 { 1i8 } else { -1 });
    }
    let rows = y.len();
    let fam = CString::new("decision_tree").unwrap();
    let params = CString::new(r#"{"max_depth": 3}"#).unwrap();
    let mut model = ptr::null_mut();
    let st = unsafe { tsc_model_fit(fam.as_ptr(), params.as_ptr(), x.as_ptr(), rows, 2, y.as_ptr(), 1, &mut model) };
    assert_eq!(st, TscStatus::Ok, "{:?}", last_code());
    let mut pred = vec![0i8; rows];
    assert_eq!(unsafe { tsc_model_predict(model, x.as_ptr(), rows, 2, pred.as_mut_ptr()) }, TscStatus::Ok);

    let mut json = ptr::null_mut();
    assert_eq!(unsafe { tsc_model_to_json(model, &mut json) }, TscStatus::Ok);
    let text = take_string(json);
    let c = CString::new(text).unwrap();
    let mut back = ptr::null_mut();
    assert_eq!(unsafe { tsc_model_from_json(c.as_ptr(), &mut back) }, TscStatus::Ok);
    let mut pred2 = vec![0i8; rows];
    assert_eq!(unsafe { tsc_model_predict(back, x.as_ptr(), rows, 2, pred2.as_mut_ptr()) }, TscStatus::Ok);
    assert_eq!(pred, pred2);
    unsafe {
        tsc_model_free(model);
        tsc_model_free(back);
    }

    let bad = CString::new("no_such_family").unwrap();
    let mut m = ptr::null_mut();
    let st = unsafe { tsc_model_fit(bad.as_ptr(), ptr::null(), x.as_ptr(), rows, 2, y.as_ptr(), 1, &mut m) };
    assert_eq!(st, TscStatus::Config);
}

#[test]
fn config_hash_ignores_output_settings_and_scenario_runs() {
    let dir = tempfile::tempdir().unwrap();
    let text = format!(
        "families=gaussian_nb\nn_splits=3\nout={}\n[data]\nstart=0\nlen=all\n",
        dir.path().display()
    );
    let t = CString::new(text).unwrap();
    let mut cfg = ptr::null_mut();
    assert_eq!(unsafe { tsc_config_parse(t.as_ptr(), &mut cfg) }, TscStatus::Ok, "{:?}", last_code());
    let h1 = take_string(unsafe { tsc_config_hash(cfg) });
    let (k, v) = (CString::new("format").unwrap(), CString::new("json").unwrap());
    assert_eq!(unsafe { tsc_config_set(cfg, k.as_ptr(), v.as_ptr()) }, TscStatus::Ok, "{:?}", last_code());
    assert_eq!(take_string(unsafe { tsc_config_hash(cfg) }), h1);

    let mut frame = ptr::null_mut();
    let kind = CString::new("planted_signal").unwrap();
    assert_eq!(unsafe { tsc_frame_synthetic(kind.as_ptr(), 300, 3, 2, &mut frame) }, TscStatus::Ok);
    let mut manifest = ptr::null_mut();
    let st = unsafe { tsc_run_scenario(cfg, frame, &mut manifest) };
    assert_eq!(st, TscStatus::Ok, "{:?}", last_code());
    let m: serde_json::Value = serde_json::from_str(&take_string(manifest)).unwrap();
    assert!(m.is_object());
    assert!(dir.path().join("manifest.json").exists());
    unsafe {
        tsc_frame_free(frame);
        tsc_config_free(cfg);
    }
}

fn static_lib() -> Option<PathBuf> {
    let tmp = PathBuf::from(env!("CARGO_TARGET_TMPDIR"));
    let lib = tmp.parent()?.join(if cfg!(debug_assertions) { "debug" } else { "release" }).join("libtsclass_ffi.a");
    lib.exists().then_some(lib)
}

#[test]
fn header_compiles_and_links_from_c() {
    let header_dir = PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("include");
    assert!(header_dir.join("tsclass.h").exists());
    let Some(lib) = static_lib() else {
        eprintln!("static library not built; skipping C link");
        return;
    };
    if Command::new("cc").arg("--version").output().is_err() {
        eprintln!("no C compiler; skipping C link");
        return;
    }
    let dir = tempfile::tempdir().unwrap();
    let src = dir.path().join("main.c");
    std::fs::write(
        &src,
        r#"#include <stdio.h>
#include <string.h>
#include "tsclass.h"
int main(void) {
    TscFrame *f = NULL;
    if (tsc_frame_synthetic("random_walk", 50, 2, 7, &f) != TSC_STATUS_OK) return 1;
    if (tsc_frame_len(f) != 50) return 2;
    tsc_frame_free(f);
    if (tsc_frame_synthetic("bogus", 50, 2, 7, &f) == TSC_STATUS_OK) return 3;
    if (tsc_last_error_code() == NULL) return 4;
    printf("%s\n", tsc_version());
    return 0;
}
"#,
    )
    .unwrap();
    let exe = dir.path().join("main");
    let out = Command::new("cc")
        .arg(&src)
        .arg("-I")
        .arg(&header_dir)
        .arg(&lib)
        .args(["-lpthread", "-ldl", "-lm", "-o"])
        .arg(&exe)
        .output()
        .unwrap();
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let run = Command::new(&exe).output().unwrap();
    assert!(run.status.success(), "exit {:?}", run.status.code());
    assert_eq!(String::from_utf8_lossy(&run.stdout).trim(), env!("CARGO_PKG_VERSION"));
}
