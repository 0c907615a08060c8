use std::ffi::{CStr, CString};
use std::ptr;

use diffharm_ffi::*;

fn last_error() -> String {
    let p = dh_last_error();
    assert!(!p.is_null());
    unsafe { CStr::from_ptr(p) }.to_string_lossy().into_owned()
}

fn filter(order: u32) -> *mut DhFilter {
    let mut h = ptr::null_mut();
    assert_eq!(unsafe { dh_filter_new(order, &mut h) }, DhStatus::Ok);
    h
}

fn circle(n: usize, m: usize) -> *mut DhSystem {
    let mut s = ptr::null_mut();
    assert_eq!(unsafe { dh_system_circle_new(n, m, &mut s) }, DhStatus::Ok);
    s
}

fn directed(n: usize) -> Vec<f64> {
    // Weighted directed cycle plus a few chords.
    let mut w = vec![0.0; n * n];
    for i in 0..n {
        w[i * n + (i + 1) % n] = 1.0 + 0.1 * i as f64;
        w[i * n + (i + 3) % n] = 0.5;
    }
    w
}

#[test]
fn version_is_crate_version() {
    let v = unsafe { CStr::from_ptr(dh_version()) }.to_str().unwrap();
    assert_eq!(v, env!("CARGO_PKG_VERSION"));
}

#[test]
fn filter_values_match_closed_form() {
    let h = filter(1);
    // Order 1: 1 - 3t^2 + 2t^3 with t = 2u - 1 on [1/2, 1].
    for &u in &[0.0, 0.25, 0.5, 0.6, 0.75, 0.9, 1.0, 1.5] {
        let mut v = f64::NAN;
        assert_eq!(unsafe { dh_filter_eval(h, u, &mut v) }, DhStatus::Ok);
        let expected = if u <= 0.5 {
            1.0
        } else if u >= 1.0 {
            0.0
        } else {
            let t = 2.0 * u - 1.0;
            1.0 - 3.0 * t * t + 2.0 * t * t * t
        };
        assert!((v - expected).abs() < 1e-14, "u = {u}: {v} vs {expected}");
    }
    unsafe { dh_filter_free(h) };
}

#[test]
fn bad_arguments_report_status_and_message() {
    let mut h = ptr::null_mut();
    assert_eq!(unsafe { dh_filter_new(0, &mut h) }, DhStatus::InvalidArgument);
    assert!(h.is_null());
    assert!(!last_error().is_empty());

    let f = filter(2);
    let mut v = 0.0;
    assert_eq!(unsafe { dh_filter_eval(f, f64::NAN, &mut v) }, DhStatus::InvalidArgument);
    assert_eq!(unsafe { dh_filter_eval(f, 0.3, ptr::null_mut()) }, DhStatus::NullPointer);
    assert!(last_error().contains("out_value"));
    assert_eq!(unsafe { dh_filter_eval(ptr::null(), 0.3, &mut v) }, DhStatus::NullPointer);
    unsafe { dh_filter_free(f) };
    unsafe { dh_filter_free(ptr::null_mut()) };
}

#[test]
fn circle_eigenvalues_and_length_checks() {
    let s = circle(32, 4);
    let (mut n, mut k) = (0usize, 0usize);
    assert_eq!(unsafe { dh_system_dims(s, &mut n, &mut k) }, DhStatus::Ok);
    assert_eq!((n, k), (32, 9));
    let mut ev = vec![0.0; k];
    assert_eq!(unsafe { dh_system_eigenvalues(s, ev.as_mut_ptr(), k) }, DhStatus::Ok);
    assert_eq!(ev, vec![0.0, 1.0, 1.0, 2.0, 2.0, 3.0, 3.0, 4.0, 4.0]);
    assert_eq!(unsafe { dh_system_eigenvalues(s, ev.as_mut_ptr(), k - 1) }, DhStatus::LengthMismatch);
    unsafe { dh_system_free(s) };

    let mut bad = ptr::null_mut();
    assert_eq!(unsafe { dh_system_circle_new(8, 4, &mut bad) }, DhStatus::InvalidArgument);
}

#[test]
fn sigma_reproduces_low_frequencies() {
    let s = circle(64, 16);
    let h = filter(3);
    let f: Vec<f64> = (0..64).map(|i| (2.0 * std::f64::consts::PI * i as f64 / 64.0).cos()).collect();
    let mut re = vec![0.0; 64];
    let mut im = vec![0.0; 64];
    let st = unsafe { dh_system_sigma(s, h, 8.0, f.as_ptr(), ptr::null(), 64, re.as_mut_ptr(), im.as_mut_ptr()) };
    assert_eq!(st, DhStatus::Ok);
    for i in 0..64 {
        assert!((re[i] - f[i]).abs() < 1e-12);
        assert!(im[i].abs() < 1e-12);
    }
    let st = unsafe { dh_system_sigma(s, h, 8.0, f.as_ptr(), ptr::null(), 63, re.as_mut_ptr(), ptr::null_mut()) };
    assert_eq!(st, DhStatus::LengthMismatch);
    unsafe {
        dh_filter_free(h);
        dh_system_free(s);
    }
}

#[test]
fn system_json_round_trip() {
    let s = circle(16, 3);
    let mut json = ptr::null_mut();
    assert_eq!(unsafe { dh_system_to_json(s, &mut json) }, DhStatus::Ok);
    let mut back = ptr::null_mut();
    assert_eq!(unsafe { dh_system_from_json(json, &mut back) }, DhStatus::Ok);
    let mut json2 = ptr::null_mut();
    assert_eq!(unsafe { dh_system_to_json(back, &mut json2) }, DhStatus::Ok);
    let (a, b) = unsafe { (CStr::from_ptr(json), CStr::from_ptr(json2)) };
    assert_eq!(a, b);
    unsafe {
        dh_string_free(json);
        dh_string_free(json2);
        dh_system_free(s);
        dh_system_free(back);
    }

    let garbage = CString::new("{not json").unwrap();
    let mut out = ptr::null_mut();
    assert_eq!(unsafe { dh_system_from_json(garbage.as_ptr(), &mut out) }, DhStatus::Parse);
    assert_eq!(unsafe { dh_system_from_json(ptr::null(), &mut out) }, DhStatus::NullPointer);
}

#[test]
fn directed_pair_and_frame_check() {
    let n = 12;
    let w = directed(n);
    let mut p = ptr::null_mut();
    assert_eq!(unsafe { dh_pair_from_matrix(w.as_ptr(), n, n, &mut p) }, DhStatus::Ok);
    let mut degenerate = true;
    assert_eq!(unsafe { dh_pair_is_degenerate(p, 1e-8, &mut degenerate) }, DhStatus::Ok);
    assert!(!degenerate);

    let h = filter(2);
    let f: Vec<f64> = (0..n).map(|i| (i as f64 * 0.7).sin() + 0.2).collect();
    let mut c = DhFrameCheck::default();
    assert_eq!(unsafe { dh_pair_frame_check(p, h, f.as_ptr(), ptr::null(), n, &mut c) }, DhStatus::Ok);
    assert!(c.lower_ok && c.upper_ok, "{c:?}");
    assert!((c.energy - c.full_energy).abs() <= 1e-10 * c.full_energy.max(1.0));

    let mut re = vec![0.0; n];
    let st = unsafe { dh_pair_sigma(p, h, 1e6, f.as_ptr(), ptr::null(), n, re.as_mut_ptr(), ptr::null_mut()) };
    assert_eq!(st, DhStatus::Ok);
    unsafe {
        dh_filter_free(h);
        dh_pair_free(p);
    }
}

#[test]
fn symmetric_matrix_gives_degenerate_pair() {
    // Weighted path Laplacian plus the identity: symmetric, PSD, simple spectrum.
    let n = 6;
    let mut w = vec![0.0; n * n];
    for i in 0..n {
        w[i * n + i] = 1.0;
    }
    for i in 0..n - 1 {
        let c = 1.0 + 0.3 * i as f64;
        w[i * n + i] += c;
        w[(i + 1) * n + i + 1] += c;
        w[i * n + i + 1] = -c;
        w[(i + 1) * n + i] = -c;
    }
    let mut p = ptr::null_mut();
    assert_eq!(unsafe { dh_pair_from_matrix(w.as_ptr(), n, n, &mut p) }, DhStatus::Ok);
    let mut degenerate = false;
    assert_eq!(unsafe { dh_pair_is_degenerate(p, 1e-8, &mut degenerate) }, DhStatus::Ok);
    assert!(degenerate);
    unsafe { dh_pair_free(p) };
}

#[test]
fn polar_factors_multiply_back() {
    let n = 7;
    let w = directed(n);
    let mut pm = vec![0.0; n * n];
    let mut um = vec![0.0; n * n];
    let mut rank = 0;
    let st = unsafe { dh_polar_decompose(w.as_ptr(), n, pm.as_mut_ptr(), um.as_mut_ptr(), &mut rank) };
    assert_eq!(st, DhStatus::Ok);
    assert_eq!(rank, n);
    for i in 0..n {
        for j in 0..n {
            let pu: f64 = (0..n).map(|k| pm[i * n + k] * um[k * n + j]).sum();
            let uut: f64 = (0..n).map(|k| um[i * n + k] * um[j * n + k]).sum();
            assert!((pu - w[i * n + j]).abs() < 1e-12);
            assert!((uut - if i == j { 1.0 } else { 0.0 }).abs() < 1e-12);
            assert!((pm[i * n + j] - pm[j * n + i]).abs() < 1e-12);
        }
    }
}

#[test]
fn jacobi_legendre_case() {
    // Orthonormal Legendre: p_1 = sqrt(3/2) x, p_2 = sqrt(5/2) (3x^2 - 1) / 2.
    for &x in &[-0.9, -0.3, 0.0, 0.4, 1.0] {
        let (mut p1, mut p2) = (0.0, 0.0);
        assert_eq!(unsafe { dh_jacobi_eval(0.0, 0.0, 1, x, &mut p1) }, DhStatus::Ok);
        assert_eq!(unsafe { dh_jacobi_eval(0.0, 0.0, 2, x, &mut p2) }, DhStatus::Ok);
        assert!((p1 - 1.5f64.sqrt() * x).abs() < 1e-14);
        assert!((p2 - 2.5f64.sqrt() * (3.0 * x * x - 1.0) / 2.0).abs() < 1e-14);
    }
    let mut v = 0.0;
    assert_eq!(unsafe { dh_jacobi_eval(-1.5, 0.0, 1, 0.0, &mut v) }, DhStatus::InvalidArgument);
}

#[test]
fn header_declares_every_export() {
    let header = include_str!("../include/diffharm.h");
    let src = include_str!("../src/lib.rs");
    for line in src.lines() {
        if let Some(rest) = line.split("extern \"C\" fn ").nth(1) {
            let name = rest.split('(').next().unwrap();
            assert!(header.contains(&format!("{name}(")), "{name} missing from header");
        }
    }
    assert!(header.contains("typedef struct DhSystem DhSystem;"));
}
