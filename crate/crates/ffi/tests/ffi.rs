use std::ffi::{c_char, CStr};
use std::ptr;

use noisereg_ffi::*;

fn last_error() -> String {
    let mut buf = [0 as c_char; 256];
    let n = unsafe { nr_last_error_message(buf.as_mut_ptr(), buf.len()) };
    assert!(n > 0);
    unsafe { CStr::from_ptr(buf.as_ptr()) }.to_string_lossy().into_owned()
}

fn model(d: usize) -> *mut NrModel {
    let mut h = ptr::null_mut();
    assert_eq!(unsafe { nr_model_new(d, 2.0, 1.0, 1.0, 1.0, &mut h) }, NrStatus::Ok);
    assert!(!h.is_null());
    h
}

#[test]
fn version_is_a_c_string() {
    let v = unsafe { CStr::from_ptr(nr_version()) };
    assert_eq!(v.to_str().unwrap(), env!("CARGO_PKG_VERSION"));
}

#[test]
fn inadmissible_parameters_name_eta() {
    let mut h = ptr::null_mut();
    let s = unsafe { nr_model_new(2, 3.0, 0.5, 1.0, 1.0, &mut h) };
    assert_eq!(s, NrStatus::InvalidParams);
    assert!(h.is_null());
    assert!(last_error().contains("eta"));
}

#[test]
fn sigma_times_dphi_is_identity_through_the_c_api() {
    let h = model(2);
    let x = [3.0, 4.0];
    let mut s = [0.0; 4];
    assert_eq!(unsafe { nr_model_sigma(h, x.as_ptr(), 2, s.as_mut_ptr()) }, NrStatus::Ok);
    // σ = |x|²(I − 2x̂x̂ᵀ) at |x| = 5
    let expected = [25.0 * (1.0 - 2.0 * 0.36), -25.0 * 2.0 * 0.48, -25.0 * 2.0 * 0.48, 25.0 * (1.0 - 2.0 * 0.64)];
    for (a, b) in s.iter().zip(expected) {
        assert!((a - b).abs() < 1e-12, "{s:?}");
    }
    let mut drift = [0.0; 2];
    assert_eq!(unsafe { nr_model_ito_drift(h, x.as_ptr(), 2, drift.as_mut_ptr()) }, NrStatus::Ok);
    // no correction for d = 2, η = 1
    assert!((drift[0] - 15.0).abs() < 1e-9 && (drift[1] - 20.0).abs() < 1e-9);
    unsafe { nr_model_free(h) };
}

#[test]
fn phi_round_trip_and_domain_error() {
    let x = [0.3, -2.0, 1.1];
    let mut y = [0.0; 3];
    let mut back = [0.0; 3];
    unsafe {
        assert_eq!(nr_phi(1.5, x.as_ptr(), 3, y.as_mut_ptr()), NrStatus::Ok);
        assert_eq!(nr_phi_inv(1.5, y.as_ptr(), 3, back.as_mut_ptr()), NrStatus::Ok);
    }
    for (a, b) in x.iter().zip(back) {
        assert!((a - b).abs() < 1e-12);
    }
    let zero = [0.0; 3];
    assert_eq!(unsafe { nr_phi(1.0, zero.as_ptr(), 3, y.as_mut_ptr()) }, NrStatus::Domain);
}

#[test]
fn null_and_dimension_errors() {
    let h = model(2);
    let x = [1.0, 2.0, 3.0];
    let mut out = [0.0; 9];
    unsafe {
        assert_eq!(nr_model_sigma(ptr::null(), x.as_ptr(), 2, out.as_mut_ptr()), NrStatus::NullPointer);
        assert_eq!(nr_model_sigma(h, x.as_ptr(), 3, out.as_mut_ptr()), NrStatus::InvalidArgument);
        assert!(last_error().contains("dimension"));
        assert_eq!(nr_model_ito_drift(h, x.as_ptr(), 2, ptr::null_mut()), NrStatus::NullPointer);
        assert_eq!(nr_model_dim(h), 2);
        nr_model_free(h);
        nr_model_free(ptr::null_mut());
    }
}

#[test]
fn blowup_time_and_negativity_radius() {
    assert_eq!(nr_power_blowup_time(1.0, 2.0, 1.0), 1.0);
    let h = model(2);
    let mut r = 0.0;
    assert_eq!(unsafe { nr_negativity_radius(h, 0.5, &mut r) }, NrStatus::Ok);
    // root of 4 log r = r
    assert!((r - 8.6131).abs() < 0.02);
    assert_eq!(unsafe { nr_negativity_radius(h, 1.5, &mut r) }, NrStatus::InvalidParams);
    unsafe { nr_model_free(h) };
}

#[test]
fn noise_free_control_explodes() {
    let mut h = ptr::null_mut();
    let cfg = c"seed = 1\n[model]\nd = 2\nm = 2.0\neta = 1.0\nc_growth = 1.0\nkappa = 1.0\nr_switch = 1.0\nlambda_floor = 1.0\nx_max = 1e8\neps_zero = 1e-4\nnoise_scale = 0.0\n[drift]\nkind = \"power\"\n[scheme]\nscheme = \"ode_adaptive\"\ndt0 = 1e-3\nt_end = 1.0\n[ensemble]\nn_paths = 4\nx0 = [3.0, 0.0]\n[lyapunov]\nalpha = 0.5\ngamma = 1.5\nt_horizon = 1.0\nscan_points = 10\n[zero_avoidance]\nn_paths = 1\ny0_radius = 0.5\nt_end = 1.0\ndt0 = 1e-3\neps_zero = 1e-4\n[refinement]\nx0 = [3.0, 0.0]\ndt0 = 1e-3\nlevels = 2\nn_paths = 2\nt_end = 0.1\nexit_radius = 1e3\nseed = 1\n[ergodicity]\nscheme = \"hybrid_tamed_y\"\nn_paths = 2\nrerun_n_paths = 4\nx0_a = [5.0, 0.0]\nx0_b = [0.1, 0.0]\ncheckpoints = [1.0]\nalpha = 0.5\n[counterexample]\nb = \"1+z^2\"\nsigma = \"1+z^2\"\nfeller_b = \"1+z^2\"\nx0 = 0.0\nn_paths = 1\ndt = 1e-3\ncheckpoints = [1.0]\n";
    assert_eq!(unsafe { nr_model_from_config(cfg.as_ptr(), &mut h) }, NrStatus::Ok, "{}", last_error());
    let x0 = [3.0, 0.0];
    let mut f = NrFraction::default();
    let s = unsafe { nr_explosion_probability(h, NrScheme::OdeAdaptive, 1e-3, 1.0, x0.as_ptr(), 2, 4, 7, &mut f) };
    assert_eq!(s, NrStatus::Ok);
    assert_eq!((f.count, f.n, f.estimate, f.hi), (4, 4, 1.0, 1.0));
    unsafe { nr_model_free(h) };

    let bad = c"seed = 1\n[model]\nbogus = 1\n";
    assert_eq!(unsafe { nr_model_from_config(bad.as_ptr(), &mut h) }, NrStatus::InvalidParams);
    assert!(h.is_null());
    assert!(last_error().contains("bogus"));
}

#[test]
fn criterion_runs_through_the_c_api() {
    let mut passed = false;
    assert_eq!(unsafe { nr_run_criterion(1, 3, &mut passed) }, NrStatus::Ok);
    assert!(passed);
    assert_eq!(unsafe { nr_run_criterion(99, 3, &mut passed) }, NrStatus::InvalidParams);
}

#[test]
fn header_declares_the_exported_symbols() {
    let header = include_str!("../include/noisereg.h");
    for sym in [
        "nr_version", "nr_last_error_message", "nr_model_new", "nr_model_from_config", "nr_model_free",
        "nr_model_dim", "nr_model_sigma", "nr_model_ito_drift", "nr_phi", "nr_phi_inv", "nr_power_blowup_time",
        "nr_negativity_radius", "nr_explosion_probability", "nr_run_criterion",
    ] {
        assert!(header.contains(&format!("{sym}(")), "{sym} missing from header");
    }
    assert!(header.contains("typedef struct NrModel NrModel;"));
}

#[test]
fn c_program_links_against_the_static_library() {
    let Some(cc) = ["cc", "gcc", "clang"]
        .into_iter()
        .find(|c| std::process::Command::new(c).arg("--version").output().is_ok())
    else {
        eprintln!("no C compiler found; skipping");
        return;
    };
    let manifest = std::path::Path::new(env!("CARGO_MANIFEST_DIR"));
    // target/<profile>/deps/<test binary>
    let profile_dir = std::env::current_exe().unwrap().parent().unwrap().parent().unwrap().to_path_buf();
    let lib = profile_dir.join("libnoisereg_ffi.a");
    if !lib.exists() {
        eprintln!("static library not built at {}; skipping", lib.display());
        return;
    }
    let dir = tempfile::tempdir().unwrap();
    let exe = dir.path().join("smoke");
    let status = std::process::Command::new(cc)
        .arg(manifest.join("tests/c/smoke.c"))
        .arg("-I")
        .arg(manifest.join("include"))
        .arg(&lib)
        .args(["-lpthread", "-ldl", "-lm", "-o"])
        .arg(&exe)
        .status()
        .unwrap();
    assert!(status.success());
    let out = std::process::Command::new(&exe).output().unwrap();
    assert!(out.status.success(), "exit {:?}", out.status.code());
    let text = String::from_utf8_lossy(&out.stdout);
    assert!(text.starts_with(env!("CARGO_PKG_VERSION")) && text.contains("eta"), "{text}");
}
