use std::ffi::{CStr, CString};
use std::path::PathBuf;
use std::process::Command;
use std::ptr;

use pinnscape_ffi::*;

fn last_error() -> String {
    let p = ps_last_error_message();
    assert!(!p.is_null());
    unsafe { CStr::from_ptr(p) }.to_string_lossy().into_owned()
}

fn objective(kind: PsObjectiveKind, width: usize) -> *mut PsObjective {
    let mut obj = ptr::null_mut();
    assert_eq!(unsafe { ps_objective_new(kind, width, &mut obj) }, PsStatus::Ok);
    obj
}

#[test]
fn objective_round_trip() {
    let obj = objective(PsObjectiveKind::Pinn1d, 20);
    let n = unsafe { ps_objective_param_count(obj) };
    assert_eq!(n, 480);
    let mut params = vec![0.0; n];
    let mut grad = vec![0.0; n];
    let (mut loss, mut loss2) = (0.0, 0.0);
    unsafe {
        assert_eq!(ps_objective_init_params(obj, 3, 1.0, params.as_mut_ptr(), n), PsStatus::Ok);
        assert_eq!(ps_objective_evaluate(obj, params.as_ptr(), n, &mut loss), PsStatus::Ok);
        assert_eq!(ps_objective_gradient(obj, params.as_ptr(), n, &mut loss2, grad.as_mut_ptr()), PsStatus::Ok);
    }
    assert_eq!(loss, loss2);
    assert!(loss > 0.0 && grad.iter().any(|g| *g != 0.0));

    // directional derivative against a central difference
    let h = 1e-6;
    let mut plus = params.clone();
    let mut minus = params.clone();
    plus[7] += h;
    minus[7] -= h;
    let (mut lp, mut lm) = (0.0, 0.0);
    unsafe {
        ps_objective_evaluate(obj, plus.as_ptr(), n, &mut lp);
        ps_objective_evaluate(obj, minus.as_ptr(), n, &mut lm);
    }
    assert!(((lp - lm) / (2.0 * h) - grad[7]).abs() < 1e-5 * grad[7].abs().max(1.0));

    let mut hv = vec![0.0; n];
    let mut e = vec![0.0; n];
    e[7] = 1.0;
    unsafe {
        assert_eq!(ps_objective_hvp(obj, params.as_ptr(), e.as_ptr(), n, hv.as_mut_ptr()), PsStatus::Ok);
        ps_objective_free(obj);
    }
    assert!(hv[7] != 0.0);
}

#[test]
fn training_through_the_abi() {
    let obj = objective(PsObjectiveKind::Drm1d, 6);
    let n = unsafe { ps_objective_param_count(obj) };
    let mut init = vec![0.0; n];
    let mut traj = ptr::null_mut();
    let opt = PsOptimizer { kind: PsOptimizerKind::Adam, learning_rate: 1e-2, epochs: 50, seed: 0 };
    unsafe {
        ps_objective_init_params(obj, 1, 1.0, init.as_mut_ptr(), n);
        assert_eq!(ps_train(obj, init.as_ptr(), n, opt, &mut traj), PsStatus::Ok);
        let count = ps_trajectory_loss_count(traj);
        assert_eq!(count, 51);
        let mut losses = vec![0.0; count];
        assert_eq!(ps_trajectory_losses(traj, losses.as_mut_ptr(), count), PsStatus::Ok);
        assert!(losses[50] < losses[0]);
        let mut fin = vec![0.0; n];
        assert_eq!(ps_trajectory_final_params(traj, fin.as_mut_ptr(), n), PsStatus::Ok);
        let mut l = 0.0;
        ps_objective_evaluate(obj, fin.as_ptr(), n, &mut l);
        assert_eq!(l, losses[50]);
        ps_trajectory_free(traj);
        ps_objective_free(obj);
    }
}

#[test]
fn errors_are_reported_with_codes_and_messages() {
    let mut obj = ptr::null_mut();
    unsafe {
        assert_eq!(ps_objective_new(PsObjectiveKind::Drm2d, 0, &mut obj), PsStatus::InvalidArgument);
        assert!(last_error().contains("width"));
        assert_eq!(ps_objective_evaluate(ptr::null(), ptr::null(), 0, ptr::null_mut()), PsStatus::NullPointer);
    }
    let obj = objective(PsObjectiveKind::Drm2d, 4);
    let mut loss = 0.0;
    let short = [0.0; 3];
    unsafe {
        assert_eq!(ps_objective_evaluate(obj, short.as_ptr(), 3, &mut loss), PsStatus::InvalidArgument);
        assert!(last_error().contains("length 3"));

        // a huge displacement inverts the material
        let n = ps_objective_param_count(obj);
        let mut p = vec![0.0; n];
        ps_objective_init_params(obj, 0, 50.0, p.as_mut_ptr(), n);
        let status = ps_objective_evaluate(obj, p.as_ptr(), n, &mut loss);
        assert_eq!(status, PsStatus::NonFinite, "{}", last_error());

        let mut cfg = ptr::null_mut();
        let bad = CString::new(r#"{"problem": "elliptic1d"}"#).unwrap();
        assert_eq!(ps_config_from_json(bad.as_ptr(), &mut cfg), PsStatus::Config);
        assert!(cfg.is_null());
        ps_objective_free(obj);
        ps_objective_free(ptr::null_mut());
    }
    assert!(ps_last_error_message().is_null() || !last_error().is_empty());
}

#[test]
fn run_experiment_writes_a_run_directory() {
    let dir = tempfile::tempdir().unwrap();
    let json = CString::new(r#"{"problem": "elliptic1d", "objective": "pinn", "network": {"width": 4}, "optimizer": {"kind": "adam", "learning_rate": 0.01, "epochs": 20}}"#).unwrap();
    let root = CString::new(dir.path().to_str().unwrap()).unwrap();
    let sub = CString::new("train").unwrap();
    let mut cfg = ptr::null_mut();
    unsafe {
        assert_eq!(ps_config_from_json(json.as_ptr(), &mut cfg), PsStatus::Ok);
        assert_eq!(ps_config_set_seed(cfg, 11), PsStatus::Ok);
        let mut needed = 0usize;
        let status = ps_run_experiment(cfg, sub.as_ptr(), root.as_ptr(), ptr::null_mut(), 0, &mut needed);
        assert_eq!(status, PsStatus::BufferTooSmall);
        let mut buf = vec![0 as std::ffi::c_char; needed];
        assert_eq!(ps_run_experiment(cfg, sub.as_ptr(), root.as_ptr(), buf.as_mut_ptr(), buf.len(), ptr::null_mut()), PsStatus::Ok);
        let path = PathBuf::from(CStr::from_ptr(buf.as_ptr()).to_str().unwrap());
        assert!(path.ends_with("train-pinn1d-s11"));
        assert!(path.join("manifest.json").exists());

        let unknown = CString::new("landscape").unwrap();
        assert_eq!(ps_run_experiment(cfg, unknown.as_ptr(), root.as_ptr(), buf.as_mut_ptr(), buf.len(), ptr::null_mut()), PsStatus::InvalidArgument);
        ps_config_free(cfg);
    }
}

#[test]
fn header_declares_the_exported_functions() {
    let header = std::fs::read_to_string(concat!(env!("CARGO_MANIFEST_DIR"), "/include/pinnscape.h")).unwrap();
    for name in [
        "ps_last_error_message",
        "ps_objective_new",
        "ps_objective_free",
        "ps_objective_gradient",
        "ps_objective_hvp",
        "ps_train",
        "ps_trajectory_losses",
        "ps_config_from_json",
        "ps_run_experiment",
        "typedef struct PsObjective PsObjective",
        "PS_STATUS_NON_FINITE = 4",
    ] {
        assert!(header.contains(name), "{name} missing from header");
    }
}

/// Compiles and runs a C program against the header and the static library.
#[test]
fn c_program_links_against_the_static_library() {
    let exe = std::env::current_exe().unwrap();
    let profile_dir = exe.parent().and_then(|d| d.parent()).unwrap();
    let lib = profile_dir.join("libpinnscape_ffi.a");
    assert!(lib.exists(), "static library not found at {}", lib.display());
    let dir = tempfile::tempdir().unwrap();
    let src = dir.path().join("smoke.c");
    std::fs::write(
        &src,
        r#"
#include <stdio.h>
#include "pinnscape.h"
int main(void) {
    PsObjective *obj = NULL;
    if (ps_objective_new(PS_OBJECTIVE_KIND_PINN1D, 20, &obj) != PS_STATUS_OK) return 1;
    size_t n = ps_objective_param_count(obj);
    double p[480], g[480], loss = 0.0;
    if (n != 480) return 2;
    if (ps_objective_init_params(obj, 0, 1.0, p, n) != PS_STATUS_OK) return 3;
    if (ps_objective_gradient(obj, p, n, &loss, g) != PS_STATUS_OK) return 4;
    if (ps_objective_new(PS_OBJECTIVE_KIND_DRM1D, 0, NULL) != PS_STATUS_INVALID_ARGUMENT) return 5;
    if (ps_last_error_message() == NULL) return 6;
    printf("%zu %.17g\n", n, loss);
    ps_objective_free(obj);
    return 0;
}
"#,
    )
    .unwrap();
    let bin = dir.path().join("smoke");
    let status = Command::new("cc")
        .arg(&src)
        .arg("-I")
        .arg(concat!(env!("CARGO_MANIFEST_DIR"), "/include"))
        .arg(&lib)
        .args(["-lpthread", "-ldl", "-lm", "-o"])
        .arg(&bin)
        .status()
        .expect("C compiler");
    assert!(status.success());
    let out = Command::new(&bin).output().unwrap();
    assert!(out.status.success(), "exit {:?}", out.status);
    let text = String::from_utf8(out.stdout).unwrap();
    assert!(text.starts_with("480 "), "{text}");
}
