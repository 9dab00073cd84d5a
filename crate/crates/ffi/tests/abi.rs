use std::ffi::{CStr, CString};
use std::ptr;

use mixclass_ffi::*;

fn instance() -> *mut MixclassInstance {
    let nnz = [2usize, 2];
    let idx = [0usize, 2, 1, 2];
    let val = [0.6, 0.8, -0.8, 0.6];
    let mut out = ptr::null_mut();
    let s = unsafe { mixclass_instance_new(6, 2, nnz.as_ptr(), idx.as_ptr(), val.as_ptr(), 0.0, &mut out) };
    assert_eq!(s, MixclassStatus::Ok);
    out
}

#[test]
fn counts_match_exact_oracle() {
    let inst = instance();
    assert_eq!(unsafe { mixclass_instance_dim(inst) }, 6);
    assert_eq!(unsafe { mixclass_instance_components(inst) }, 2);
    let mut oracle = ptr::null_mut();
    assert_eq!(unsafe { mixclass_oracle_new(inst, 0, true, &mut oracle) }, MixclassStatus::Ok);
    let v = [1.0, 0.0, 0.0, 0.0, 0.0, 0.0];
    let mut c = MixclassCounts::default();
    assert_eq!(unsafe { mixclass_oracle_counts(oracle, v.as_ptr(), 6, 10, &mut c) }, MixclassStatus::Ok);
    assert_eq!(c, MixclassCounts { pos: 1, neg: 0, zero: 1, nonzero: 1 });
    let s = unsafe { mixclass_oracle_counts(oracle, v.as_ptr(), 5, 10, &mut c) };
    assert_eq!(s, MixclassStatus::InvalidArgument);
    let msg = unsafe { CStr::from_ptr(mixclass_last_error()) }.to_str().unwrap();
    assert!(msg.contains("dimension"), "{msg}");
    unsafe {
        mixclass_oracle_free(oracle);
        mixclass_instance_free(inst);
    }
}

#[test]
fn support_and_recovery_round_trip() {
    let inst = instance();
    let mut oracle = ptr::null_mut();
    assert_eq!(unsafe { mixclass_oracle_new(inst, 7, false, &mut oracle) }, MixclassStatus::Ok);
    let mut bits = [0u8; 12];
    assert_eq!(unsafe { mixclass_support_recover(oracle, 2, 0.6, 1, bits.as_mut_ptr(), 12) }, MixclassStatus::Ok);
    assert_eq!(bits, [1, 0, 0, 1, 1, 1, 0, 0, 0, 0, 0, 0]);

    let mut res = ptr::null_mut();
    let s = unsafe { mixclass_recover(oracle, MixclassAlgorithm::TwoStage, 2, 0.6, 0.2, 3, &mut res) };
    assert_eq!(s, MixclassStatus::Ok);
    assert_eq!(unsafe { mixclass_result_components(res) }, 2);
    assert!(unsafe { mixclass_result_queries(res) } > 0);
    assert!(unsafe { mixclass_oracle_calls(oracle) } >= unsafe { mixclass_result_queries(res) });
    let mut est = [0.0; 6];
    let mut rep = usize::MAX;
    assert_eq!(unsafe { mixclass_result_estimate(res, 0, est.as_mut_ptr(), 6, &mut rep) }, MixclassStatus::Ok);
    assert_eq!(rep, 0);
    assert!((est[0] - 0.6).abs() < 0.2 && (est[2] - 0.8).abs() < 0.2, "{est:?}");
    assert_eq!(
        unsafe { mixclass_result_estimate(res, 5, est.as_mut_ptr(), 6, ptr::null_mut()) },
        MixclassStatus::InvalidArgument
    );
    unsafe {
        mixclass_result_free(res);
        mixclass_oracle_free(oracle);
        mixclass_instance_free(inst);
    }
}

#[test]
fn instance_file_errors_surface() {
    let dir = std::env::temp_dir().join(format!("mixclass-ffi-{}", std::process::id()));
    std::fs::create_dir_all(&dir).unwrap();
    let path = dir.join("bad.txt");
    std::fs::write(&path, "4 1 0\n2 0:1 9:1\n").unwrap();
    let c = CString::new(path.to_str().unwrap()).unwrap();
    let mut out = ptr::null_mut();
    assert_eq!(unsafe { mixclass_instance_read(c.as_ptr(), &mut out) }, MixclassStatus::InvalidArgument);
    assert!(out.is_null());
    std::fs::write(&path, "4 1 0\n2 0:1 3:1\n").unwrap();
    assert_eq!(unsafe { mixclass_instance_read(c.as_ptr(), &mut out) }, MixclassStatus::Ok);
    unsafe { mixclass_instance_free(out) };
    std::fs::remove_dir_all(dir).unwrap();
}

#[test]
fn header_declares_every_export() {
    let header = include_str!("../include/mixclass.h");
    let src = include_str!("../src/lib.rs");
    let exports: Vec<&str> = src
        .lines()
        .filter_map(|l| l.split("extern \"C\" fn ").nth(1))
        .map(|rest| &rest[..rest.find('(').unwrap()])
        .collect();
    assert!(exports.len() >= 15);
    for name in exports {
        assert!(header.contains(&format!("{name}(")), "{name} missing from header");
    }
    let v = unsafe { CStr::from_ptr(mixclass_version()) };
    assert_eq!(v.to_str().unwrap(), env!("CARGO_PKG_VERSION"));
}
