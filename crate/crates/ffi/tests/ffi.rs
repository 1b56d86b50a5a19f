use std::ffi::{c_char, CStr, CString};
use std::ptr;

use isospec_ffi::*;
use serde_json::Value;

fn take_string(s: *mut c_char) -> String {
    assert!(!s.is_null());
    let out = unsafe { CStr::from_ptr(s) }.to_str().unwrap().to_owned();
    unsafe { iso_string_free(s) };
    out
}

fn last_error() -> String {
    unsafe { CStr::from_ptr(iso_last_error_message()) }
        .to_str()
        .unwrap()
        .to_owned()
}

fn random(seed: u64) -> *mut IsoJMap {
    let mut h = ptr::null_mut();
    assert_eq!(unsafe { iso_jmap_random(seed, 3, &mut h) }, IsoStatus::Ok);
    h
}

/// A fixed unitary: a permutation with phases.
fn unitary3() -> Vec<f64> {
    let s = std::f64::consts::FRAC_1_SQRT_2;
    vec![
        0.0, 0.0, s, s, 0.0, 0.0, //
        0.0, 0.0, 0.0, 0.0, 0.0, 1.0, //
        -1.0, 0.0, 0.0, 0.0, 0.0, 0.0,
    ]
}

#[test]
fn json_round_trip_through_handles() {
    let h = random(1);
    let mut text = ptr::null_mut();
    assert_eq!(unsafe { iso_jmap_to_json(h, &mut text) }, IsoStatus::Ok);
    let first = take_string(text);
    let c = CString::new(first.clone()).unwrap();
    let mut back = ptr::null_mut();
    assert_eq!(unsafe { iso_jmap_from_json(c.as_ptr(), &mut back) }, IsoStatus::Ok);
    let mut text = ptr::null_mut();
    assert_eq!(unsafe { iso_jmap_to_json(back, &mut text) }, IsoStatus::Ok);
    assert_eq!(take_string(text), first);
    let mut m = 0;
    assert_eq!(unsafe { iso_jmap_dim(back, &mut m) }, IsoStatus::Ok);
    assert_eq!(m, 3);
    unsafe {
        iso_jmap_free(h);
        iso_jmap_free(back);
    }
}

#[test]
fn errors_carry_status_and_message() {
    let mut h = ptr::null_mut();
    let bad = CString::new(r#"{"m": 3, "j1": 5, "j2": []}"#).unwrap();
    assert_eq!(unsafe { iso_jmap_from_json(bad.as_ptr(), &mut h) }, IsoStatus::Schema);
    assert!(last_error().contains("j1"));
    assert!(h.is_null());

    assert_eq!(unsafe { iso_jmap_from_json(ptr::null(), &mut h) }, IsoStatus::NullPointer);
    let mut flag = false;
    assert_eq!(unsafe { iso_is_generic(ptr::null(), &mut flag) }, IsoStatus::NullPointer);

    let invalid = [0xffu8, 0xfe, 0];
    assert_eq!(
        unsafe { iso_jmap_from_json(invalid.as_ptr().cast(), &mut h) },
        IsoStatus::InvalidUtf8
    );

    let mut g = [0.0; 4];
    let mut area = 0.0;
    assert_eq!(
        unsafe { iso_orbit_stratum(4, 1, 1, 0.8, 0.8, g.as_mut_ptr(), &mut area) },
        IsoStatus::InvalidArgument
    );
    assert!(last_error().contains("a^2 + b^2"));

    let j = random(2);
    let not_unitary = [1.0; 18];
    let mut out = ptr::null_mut();
    assert_eq!(
        unsafe { iso_jmap_conjugate(j, not_unitary.as_ptr(), &mut out) },
        IsoStatus::InvalidArgument
    );
    unsafe { iso_jmap_free(j) };
    unsafe { iso_jmap_free(ptr::null_mut()) };
    unsafe { iso_string_free(ptr::null_mut()) };
}

#[test]
fn invariants_and_certificates() {
    let j = random(3);
    let other = random(4);
    let a = unitary3();
    let mut conj = ptr::null_mut();
    assert_eq!(unsafe { iso_jmap_conjugate(j, a.as_ptr(), &mut conj) }, IsoStatus::Ok);

    let mut iso = false;
    assert_eq!(unsafe { iso_is_isospectral_pair(j, conj, 1e-8, &mut iso) }, IsoStatus::Ok);
    assert!(iso);
    assert_eq!(unsafe { iso_is_isospectral_pair(j, other, 1e-8, &mut iso) }, IsoStatus::Ok);
    assert!(!iso);

    let (mut t1, mut t2) = (0.0, 0.0);
    unsafe {
        iso_trace_invariant(j, &mut t1);
        iso_trace_invariant(conj, &mut t2);
    }
    assert!((t1 - t2).abs() < 1e-10 * t1.abs());

    let mut generic = false;
    assert_eq!(unsafe { iso_is_generic(j, &mut generic) }, IsoStatus::Ok);
    assert!(generic);

    let mut text = ptr::null_mut();
    let mut ineq = true;
    assert_eq!(unsafe { iso_certify(j, conj, &mut text, &mut ineq) }, IsoStatus::Ok);
    assert!(!ineq);
    let cert: Value = serde_json::from_str(&take_string(text)).unwrap();
    assert_eq!(cert["outcome"], "Inconclusive");
    assert_eq!(unsafe { iso_certify(j, other, ptr::null_mut(), &mut ineq) }, IsoStatus::Ok);
    assert!(ineq);

    unsafe {
        iso_jmap_free(j);
        iso_jmap_free(conj);
        iso_jmap_free(other);
    }
}

#[test]
fn orbit_geometry() {
    let mut g = [0.0; 4];
    let mut area = 0.0;
    assert_eq!(
        unsafe { iso_orbit_stratum(4, 1, 1, 0.5, 0.5, g.as_mut_ptr(), &mut area) },
        IsoStatus::Ok
    );
    assert!((area - std::f64::consts::PI.powi(2) / 2f64.sqrt()).abs() < 1e-10);
    assert_eq!(g, [0.1875, -0.0625, -0.0625, 0.1875]);
    let mut angle = 0.0;
    assert_eq!(unsafe { iso_orbit_angle(4, 1, 1, 0.5, &mut angle) }, IsoStatus::Ok);
    assert!((angle - (-1.0f64 / 3.0).acos()).abs() < 1e-12);
}

#[test]
fn verify_and_generate() {
    let j = random(5);
    let a = unitary3();
    let mut conj = ptr::null_mut();
    unsafe { iso_jmap_conjugate(j, a.as_ptr(), &mut conj) };
    let cfg = CString::new(r#"{"samples": 10, "mu_range": 1}"#).unwrap();
    let mut report = ptr::null_mut();
    let mut passed = false;
    assert_eq!(
        unsafe { iso_verify_pair(j, conj, cfg.as_ptr(), &mut report, &mut passed) },
        IsoStatus::Ok
    );
    assert!(passed);
    let report: Value = serde_json::from_str(&take_string(report)).unwrap();
    assert_eq!(report["metadata"]["samples"], 10);

    let bad_cfg = CString::new(r#"{"samples": "many"}"#).unwrap();
    let mut report = ptr::null_mut();
    assert_eq!(
        unsafe { iso_verify_pair(j, conj, bad_cfg.as_ptr(), &mut report, ptr::null_mut()) },
        IsoStatus::Schema
    );

    let mut fam = ptr::null_mut();
    assert_eq!(unsafe { iso_generate_family(11, 3, 2, 0.1, &mut fam) }, IsoStatus::Ok);
    let fam: Value = serde_json::from_str(&take_string(fam)).unwrap();
    assert_eq!(fam["members"].as_array().unwrap().len(), 3);
    let member = CString::new(fam["members"][2].to_string()).unwrap();
    let mut h = ptr::null_mut();
    assert_eq!(unsafe { iso_jmap_from_json(member.as_ptr(), &mut h) }, IsoStatus::Ok);

    let mut out = ptr::null_mut();
    assert_eq!(
        unsafe { iso_generate_family(11, 2, 2, 0.1, &mut out) },
        IsoStatus::InvalidArgument
    );
    unsafe {
        iso_jmap_free(j);
        iso_jmap_free(conj);
        iso_jmap_free(h);
    }
}

#[test]
fn version_is_package_version() {
    let v = unsafe { CStr::from_ptr(iso_version()) }.to_str().unwrap();
    assert_eq!(v, env!("CARGO_PKG_VERSION"));
}

#[test]
fn header_declares_every_export() {
    let header = std::fs::read_to_string(concat!(env!("CARGO_MANIFEST_DIR"), "/include/isospec.h")).unwrap();
    let source = std::fs::read_to_string(concat!(env!("CARGO_MANIFEST_DIR"), "/src/lib.rs")).unwrap();
    let exports: Vec<&str> = source
        .lines()
        .filter_map(|l| l.split("extern \"C\" fn ").nth(1))
        .map(|rest| rest.split('(').next().unwrap())
        .collect();
    assert!(exports.len() >= 15);
    for name in exports {
        assert!(header.contains(&format!("{name}(")), "{name} missing from header");
    }
    assert!(header.contains("typedef struct IsoJMap IsoJMap;"));
}
