use std::ffi::{CStr, CString};
use std::path::PathBuf;
use std::process::Command;
use std::ptr;

use bwml_ffi::*;

fn last_error() -> String {
    let p = bw_last_error();
    assert!(!p.is_null());
    unsafe { CStr::from_ptr(p) }.to_string_lossy().into_owned()
}

fn table(names: &[&str], cols: &[Vec<f64>]) -> *mut BwData {
    let owned: Vec<CString> = names.iter().map(|n| CString::new(*n).unwrap()).collect();
    let ptrs: Vec<_> = owned.iter().map(|c| c.as_ptr()).collect();
    let flat: Vec<f64> = cols.concat();
    let mut out = ptr::null_mut();
    let st = unsafe { bw_data_from_columns(ptrs.as_ptr(), flat.as_ptr(), cols[0].len(), cols.len(), &mut out) };
    assert_eq!(st, BwStatus::Ok, "{}", last_error());
    out
}

#[test]
fn table_round_trip_with_missing_cells() {
    let d = table(&["a", "b"], &[vec![1.0, f64::NAN, 3.0], vec![4.0, 5.0, 6.0]]);
    let (mut r, mut c, mut miss) = (0, 0, 0);
    unsafe {
        assert_eq!(bw_data_shape(d, &mut r, &mut c), BwStatus::Ok);
        assert_eq!(bw_data_missing_count(d, &mut miss), BwStatus::Ok);
        let mut v = 0.0;
        assert_eq!(bw_data_get(d, 1, 0, &mut v), BwStatus::Ok);
        assert!(v.is_nan());
        assert_eq!(bw_data_get(d, 2, 1, &mut v), BwStatus::Ok);
        assert_eq!(v, 6.0);
        assert_eq!(bw_data_get(d, 3, 0, &mut v), BwStatus::Usage);
        let mut idx = 9;
        let name = CString::new("b").unwrap();
        assert_eq!(bw_data_column_index(d, name.as_ptr(), &mut idx), BwStatus::Ok);
        assert_eq!(idx, 1);
        bw_data_free(d);
    }
    assert_eq!((r, c, miss), (3, 2, 1));
}

#[test]
fn null_handles_are_reported() {
    let mut r = 0;
    let mut c = 0;
    let st = unsafe { bw_data_shape(ptr::null(), &mut r, &mut c) };
    assert_eq!(st, BwStatus::NullPointer);
    assert!(last_error().contains("data"));
    unsafe {
        bw_data_free(ptr::null_mut());
        bw_model_free(ptr::null_mut());
    }
}

#[test]
fn error_classes_map_to_status_codes() {
    let missing = CString::new("/nonexistent/table.csv").unwrap();
    let mut out = ptr::null_mut();
    assert_eq!(unsafe { bw_data_load_csv(missing.as_ptr(), &mut out) }, BwStatus::Data);
    assert!(out.is_null());

    let d = table(&["x", "y"], &[vec![1.0, 2.0, 3.0, 4.0], vec![2.0, 4.0, 6.0, 8.0]]);
    let target = CString::new("y").unwrap();
    let bad = CString::new("no_such_family").unwrap();
    let mut m = ptr::null_mut();
    assert_eq!(unsafe { bw_model_train(d, target.as_ptr(), bad.as_ptr(), 0, &mut m) }, BwStatus::Usage);
    assert!(last_error().contains("no_such_family"));
    unsafe { bw_data_free(d) };
}

#[test]
fn train_predict_save_load() {
    let x: Vec<f64> = (0..40).map(f64::from).collect();
    let z: Vec<f64> = (0..40).map(|i| f64::from((i * 7) % 11)).collect();
    let y: Vec<f64> = x.iter().zip(&z).map(|(a, b)| 3.0 * a - 2.0 * b + 10.0).collect();
    let d = table(&["x", "z", "y"], &[x, z, y.clone()]);
    let target = CString::new("y").unwrap();
    let fam = CString::new("ols").unwrap();
    let mut m = ptr::null_mut();
    unsafe {
        assert_eq!(bw_model_train(d, target.as_ptr(), fam.as_ptr(), 0, &mut m), BwStatus::Ok, "{}", last_error());
        let mut k = 0;
        assert_eq!(bw_model_n_features(m, &mut k), BwStatus::Ok);
        assert_eq!(k, 2);
        let mut pred = vec![0.0; 40];
        assert_eq!(bw_model_predict(m, d, pred.as_mut_ptr(), 40), BwStatus::Ok);
        for (p, t) in pred.iter().zip(&y) {
            assert!((p - t).abs() < 1e-8);
        }
        assert_eq!(bw_model_predict(m, d, pred.as_mut_ptr(), 39), BwStatus::Usage);

        let dir = tempfile::tempdir().unwrap();
        let path = CString::new(dir.path().join("m.json").to_str().unwrap()).unwrap();
        assert_eq!(bw_model_save(m, path.as_ptr()), BwStatus::Ok);
        let mut m2 = ptr::null_mut();
        assert_eq!(bw_model_load(path.as_ptr(), &mut m2), BwStatus::Ok);
        let mut pred2 = vec![0.0; 40];
        assert_eq!(bw_model_predict(m2, d, pred2.as_mut_ptr(), 40), BwStatus::Ok);
        assert_eq!(pred, pred2);
        bw_model_free(m);
        bw_model_free(m2);
        bw_data_free(d);
    }
}

#[test]
fn synth_then_impute_completes_every_cell() {
    let mut d = ptr::null_mut();
    unsafe {
        assert_eq!(bw_synth_cohort(200, 4, 150.0, &mut d), BwStatus::Ok, "{}", last_error());
        let mut miss = 0;
        bw_data_missing_count(d, &mut miss);
        assert!(miss > 0);
        let mut done = ptr::null_mut();
        assert_eq!(bw_impute(d, 1, &mut done), BwStatus::Ok, "{}", last_error());
        bw_data_missing_count(done, &mut miss);
        assert_eq!(miss, 0);
        bw_data_free(d);
        bw_data_free(done);
    }
}

#[test]
fn version_is_package_version() {
    let v = unsafe { CStr::from_ptr(bw_version()) };
    assert_eq!(v.to_str().unwrap(), env!("CARGO_PKG_VERSION"));
}

const C_PROGRAM: &str = r#"
#include <math.h>
#include <stdio.h>
#include "bwml.h"

int main(void) {
    const char *names[] = {"x", "y"};
    double values[] = {1, 2, 3, 4, 5, 6, 3, 5, 7, 9, 11, 13};
    BwData *d = NULL;
    if (bw_data_from_columns(names, values, 6, 2, &d) != BW_STATUS_OK) return 10;
    BwModel *m = NULL;
    if (bw_model_train(d, "y", "ols", 0, &m) != BW_STATUS_OK) return 11;
    double pred[6];
    if (bw_model_predict(m, d, pred, 6) != BW_STATUS_OK) return 12;
    for (int i = 0; i < 6; i++)
        if (fabs(pred[i] - values[6 + i]) > 1e-8) return 13;
    if (bw_data_shape(NULL, NULL, NULL) != BW_STATUS_NULL_POINTER) return 14;
    if (bw_last_error() == NULL) return 15;
    bw_model_free(m);
    bw_data_free(d);
    printf("ok\n");
    return 0;
}
"#;

/// Compile a C client against the generated header and the static library.
#[test]
fn c_client_links_against_header() {
    let root = PathBuf::from(env!("CARGO_MANIFEST_DIR"));
    let header = root.join("include/bwml.h");
    assert!(header.exists(), "header not generated");
    // target/<profile>/deps/<test-binary> -> target/<profile>
    let exe = std::env::current_exe().unwrap();
    let profile_dir = exe.parent().unwrap().parent().unwrap();
    let lib = profile_dir.join("libbwml_ffi.a");
    if !lib.exists() || Command::new("cc").arg("--version").output().is_err() {
        eprintln!("skipping: static library or C compiler unavailable");
        return;
    }
    let dir = tempfile::tempdir().unwrap();
    let src = dir.path().join("client.c");
    std::fs::write(&src, C_PROGRAM).unwrap();
    let bin = dir.path().join("client");
    let status = Command::new("cc")
        .arg(&src)
        .arg("-I")
        .arg(root.join("include"))
        .arg(&lib)
        .args(["-lpthread", "-ldl", "-lm", "-o"])
        .arg(&bin)
        .status()
        .unwrap();
    assert!(status.success(), "C client failed to build");
    let out = Command::new(&bin).output().unwrap();
    assert!(out.status.success(), "C client exited with {:?}", out.status.code());
    assert_eq!(String::from_utf8_lossy(&out.stdout).trim(), "ok");
}
