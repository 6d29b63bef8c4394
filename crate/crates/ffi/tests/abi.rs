use std::ffi::{CStr, CString};
use std::ptr;

use berglab_ffi::*;

fn last_error() -> String {
    let p = bl_last_error();
    assert!(!p.is_null());
    unsafe { CStr::from_ptr(p) }.to_string_lossy().into_owned()
}

fn weight(alpha: f64) -> *mut BlWeight {
    let mut w = ptr::null_mut();
    assert_eq!(unsafe { bl_weight_standard(alpha, &mut w) }, BlStatus::Ok);
    w
}

fn dirac(m: f64) -> *mut BlMeasure {
    let mut mu = ptr::null_mut();
    let (re, im) = (0.0, 0.0);
    assert_eq!(unsafe { bl_measure_atomic(&re, &im, &m, 1, &mut mu) }, BlStatus::Ok);
    mu
}

#[test]
fn version_is_the_crate_version() {
    let v = unsafe { CStr::from_ptr(bl_version()) };
    assert_eq!(v.to_str().unwrap(), env!("CARGO_PKG_VERSION"));
}

#[test]
fn weight_values_and_moments() {
    let w = weight(1.0);
    let (mut v, mut m) = (0.0, 0.0);
    unsafe {
        assert_eq!(bl_weight_eval(w, 0.5, &mut v), BlStatus::Ok);
        assert_eq!(bl_weight_moment(w, 1.0, &mut m), BlStatus::Ok);
        bl_weight_free(w);
    }
    assert!((v - 2.0 * 0.75).abs() < 1e-14);
    // ∫ r · 2(1-r²) dr = 1/2.
    assert!((m - 0.5).abs() < 1e-12);
}

#[test]
fn bad_arguments_set_status_and_message() {
    let mut w = ptr::null_mut();
    assert_eq!(unsafe { bl_weight_standard(-2.0, &mut w) }, BlStatus::InvalidArgument);
    assert!(w.is_null());
    assert!(!last_error().is_empty());

    assert_eq!(unsafe { bl_weight_standard(0.0, ptr::null_mut()) }, BlStatus::NullPointer);
    assert!(last_error().contains("out"));

    let mut v = 0.0;
    assert_eq!(unsafe { bl_weight_eval(ptr::null(), 0.5, &mut v) }, BlStatus::NullPointer);

    let w = weight(0.0);
    assert_eq!(unsafe { bl_weight_eval(w, 1.5, &mut v) }, BlStatus::Domain);
    let mut mu = ptr::null_mut();
    let (re, im, m) = (1.5, 0.0, 1.0);
    assert_eq!(unsafe { bl_measure_atomic(&re, &im, &m, 1, &mut mu) }, BlStatus::Domain);
    unsafe { bl_weight_free(w) };
}

#[test]
fn free_accepts_null() {
    unsafe {
        bl_weight_free(ptr::null_mut());
        bl_measure_free(ptr::null_mut());
        bl_toeplitz_free(ptr::null_mut());
    }
}

#[test]
fn measures_from_json_and_mass() {
    let json = CString::new(r#"{"type": "radial", "weight": {"type": "standard", "alpha": 2}}"#).unwrap();
    let mut mu = ptr::null_mut();
    let mut mass = 0.0;
    unsafe {
        assert_eq!(bl_measure_from_json(json.as_ptr(), &mut mu), BlStatus::Ok);
        assert_eq!(bl_measure_total_mass(mu, &mut mass), BlStatus::Ok);
        bl_measure_free(mu);
    }
    assert!((mass - 1.0).abs() < 1e-10, "{mass}");

    let bad = CString::new(r#"{"type": "density", "name": "nope", "a": 1}"#).unwrap();
    assert_eq!(unsafe { bl_measure_from_json(bad.as_ptr(), &mut mu) }, BlStatus::Config);

    let mut empty = ptr::null_mut();
    unsafe {
        assert_eq!(bl_measure_atomic(ptr::null(), ptr::null(), ptr::null(), 0, &mut empty), BlStatus::Ok);
        assert_eq!(bl_measure_total_mass(empty, &mut mass), BlStatus::Ok);
        bl_measure_free(empty);
    }
    assert_eq!(mass, 0.0);
}

#[test]
fn kernel_matches_closed_form() {
    let w = weight(1.0);
    let (z, xi) = ((0.3, -0.2), (0.5, 0.4));
    let (mut re, mut im) = (0.0, 0.0);
    let status = unsafe { bl_kernel_eval(w, 256, z.0, z.1, xi.0, xi.1, &mut re, &mut im) };
    assert_eq!(status, BlStatus::Ok);
    // (1 - z̄ξ)^{-3}, expanded by hand.
    let (xr, xi_) = (z.0 * xi.0 + z.1 * xi.1, z.0 * xi.1 - z.1 * xi.0);
    let (ar, ai) = (1.0 - xr, -xi_);
    let (sr, si) = (ar * ar - ai * ai, 2.0 * ar * ai);
    let (cr, ci) = (sr * ar - si * ai, sr * ai + si * ar);
    let d = cr * cr + ci * ci;
    assert!((re - cr / d).abs() < 1e-10 && (im + ci / d).abs() < 1e-10, "{re} {im}");

    let status = unsafe { bl_kernel_eval(w, 4, 0.95, 0.0, 0.95, 0.0, &mut re, &mut im) };
    assert_eq!(status, BlStatus::Accuracy);
    unsafe { bl_weight_free(w) };
}

#[test]
fn point_mass_operator() {
    let (w, mu) = (weight(0.0), dirac(2.5));
    let mut op = ptr::null_mut();
    let mut norm = 0.0;
    let mut re = vec![0.0; 9];
    let mut im = vec![0.0; 9];
    unsafe {
        assert_eq!(bl_toeplitz_new(mu, w, &mut op), BlStatus::Ok);
        assert_eq!(bl_toeplitz_norm_22(op, 16, &mut norm), BlStatus::Ok);
        assert_eq!(bl_toeplitz_matrix(op, 3, re.as_mut_ptr(), im.as_mut_ptr()), BlStatus::Ok);
        bl_toeplitz_free(op);
        bl_measure_free(mu);
        bl_weight_free(w);
    }
    assert!((norm - 2.5).abs() < 1e-9);
    // Only e_0 sees the origin.
    let expected = [2.5, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0];
    for (a, b) in re.iter().zip(expected) {
        assert!((a - b).abs() < 1e-9);
    }
    assert!(im.iter().all(|x| x.abs() < 1e-12));
}

#[test]
fn carleson_quantities_of_a_point_mass() {
    let (w, mu) = (weight(0.0), dirac(4.0));
    let (mut e, mut m0) = (0.0, 0.0);
    unsafe {
        assert_eq!(bl_embedding_norm(w, 2.0, mu, 2.0, 200, 7, &mut e), BlStatus::Ok);
        assert_eq!(bl_m0_sup(mu, w, 2.0, 2.0, 1.0, 4, &mut m0), BlStatus::Ok);
        assert_eq!(bl_m0_sup(mu, w, 3.0, 2.0, 1.0, 4, &mut m0), BlStatus::InvalidArgument);
        bl_measure_free(mu);
        bl_weight_free(w);
    }
    assert!((e - 2.0).abs() < 0.04, "{e}");
    assert!(m0 > 0.0);
}

#[test]
fn header_declares_every_entry_point() {
    let header = std::fs::read_to_string(concat!(env!("CARGO_MANIFEST_DIR"), "/include/berglab.h")).unwrap();
    for name in [
        "bl_version",
        "bl_last_error",
        "bl_weight_standard",
        "bl_weight_power",
        "bl_weight_eval",
        "bl_weight_moment",
        "bl_weight_free",
        "bl_measure_atomic",
        "bl_measure_radial",
        "bl_measure_from_json",
        "bl_measure_total_mass",
        "bl_measure_free",
        "bl_kernel_eval",
        "bl_toeplitz_new",
        "bl_toeplitz_free",
        "bl_toeplitz_norm_22",
        "bl_toeplitz_matrix",
        "bl_embedding_norm",
        "bl_m0_sup",
        "typedef struct BlWeight BlWeight",
        "BL_STATUS_PANIC",
    ] {
        assert!(header.contains(name), "missing {name}");
    }
}
