use std::ffi::{CStr, CString};
use std::path::PathBuf;
use std::process::Command;
use std::ptr;

use lightgrating_ffi::*;

const QUICK: &str = "[source]\nnodes = 2\n[velocity]\nnodes = 2\n[vertical]\nnodes = 2\n";

fn last_error() -> String {
    let p = lg_last_error_message();
    assert!(!p.is_null());
    unsafe { CStr::from_ptr(p) }.to_string_lossy().into_owned()
}

fn parse(text: &str) -> Result<*mut LgConfig, LgStatus> {
    let text = CString::new(text).unwrap();
    let mut cfg = ptr::null_mut();
    match unsafe { lg_config_parse(text.as_ptr(), &mut cfg) } {
        LgStatus::Ok => Ok(cfg),
        s => Err(s),
    }
}

#[test]
fn simulate_through_handles() {
    let cfg = parse(QUICK).unwrap();
    unsafe {
        assert_eq!(lg_config_set_threads(cfg, 1), LgStatus::Ok);
        let mut pattern = ptr::null_mut();
        assert_eq!(lg_simulate(cfg, &mut pattern), LgStatus::Ok);
        let n = lg_pattern_len(pattern);
        assert_eq!(n, 121);
        let mut x = vec![0.0; n];
        let mut y = vec![0.0; n];
        assert_eq!(
            lg_pattern_copy(pattern, x.as_mut_ptr(), y.as_mut_ptr(), n),
            LgStatus::Ok
        );
        assert_eq!(x[n / 2], 0.0);
        assert!((y.iter().sum::<f64>() - 1.0).abs() < 1e-12);
        assert!(lg_pattern_captured_probability(pattern) > 0.99);
        assert_eq!(
            lg_pattern_copy(pattern, x.as_mut_ptr(), ptr::null_mut(), n - 1),
            LgStatus::BufferTooSmall
        );
        lg_pattern_free(pattern);
        lg_config_free(cfg);
    }
}

#[test]
fn configuration_errors_carry_messages() {
    assert_eq!(
        parse("[grating]\npower_w = -1\n").unwrap_err(),
        LgStatus::Config
    );
    let msg = last_error();
    assert!(
        msg.contains("grating.power_w") && msg.contains("line 2"),
        "{msg}"
    );

    let cfg = lg_config_default();
    unsafe {
        assert_eq!(lg_config_set_power(cfg, f64::NAN), LgStatus::Config);
        assert_eq!(lg_config_set_power(cfg, 11.712), LgStatus::Ok);
        let (mut re, mut im) = (0.0, 0.0);
        assert_eq!(lg_compute_phi(cfg, 120.0, &mut re, &mut im), LgStatus::Ok);
        assert!((re - 2.4048).abs() < 1e-3);
        assert_eq!(
            lg_compute_phi(cfg, -1.0, &mut re, &mut im),
            LgStatus::Config
        );
        lg_config_free(cfg);
        assert_eq!(
            lg_config_set_power(ptr::null_mut(), 1.0),
            LgStatus::NullArgument
        );
        assert_eq!(lg_pattern_len(ptr::null()), 0);
        lg_config_free(ptr::null_mut());
        lg_pattern_free(ptr::null_mut());
    }
    let bad = [0xffu8, 0xfe, 0];
    let mut cfg = ptr::null_mut();
    assert_eq!(
        unsafe { lg_config_parse(bad.as_ptr().cast(), &mut cfg) },
        LgStatus::InvalidUtf8
    );
}

#[test]
fn digest_is_stable_hex() {
    let a = parse("").unwrap();
    let b = lg_config_default();
    unsafe {
        let (mut da, mut db) = (ptr::null_mut(), ptr::null_mut());
        assert_eq!(lg_config_digest(a, &mut da), LgStatus::Ok);
        assert_eq!(lg_config_digest(b, &mut db), LgStatus::Ok);
        let sa = CStr::from_ptr(da).to_str().unwrap().to_owned();
        assert_eq!(sa, CStr::from_ptr(db).to_str().unwrap());
        assert_eq!(sa.len(), 64);
        assert!(sa.chars().all(|c| c.is_ascii_hexdigit()));
        lg_string_free(da);
        lg_string_free(db);
        lg_config_free(a);
        lg_config_free(b);
    }
}

#[test]
fn spectrum_and_bessel() {
    let mut out = vec![0.0; 41];
    unsafe {
        assert_eq!(
            lg_order_spectrum(1.0, 0.0, 20, 1e-10, out.as_mut_ptr(), out.len()),
            LgStatus::Ok
        );
        let mut j1 = 0.0;
        assert_eq!(lg_bessel_j(1, 1.0, &mut j1), LgStatus::Ok);
        assert!((out[22] - j1 * j1).abs() < 1e-12);
        assert!((out.iter().sum::<f64>() - 1.0).abs() < 1e-12);
        assert_eq!(
            lg_order_spectrum(1.0, 0.0, 10, 1e-10, out.as_mut_ptr(), 20),
            LgStatus::BufferTooSmall
        );
        assert_eq!(
            lg_order_spectrum(1.0, -0.1, 10, 1e-10, out.as_mut_ptr(), 21),
            LgStatus::Config
        );
        assert_eq!(lg_bessel_j(0, 1e6, &mut j1), LgStatus::Config);
    }
}

#[test]
fn header_declares_the_api() {
    let header = std::fs::read_to_string(concat!(
        env!("CARGO_MANIFEST_DIR"),
        "/include/lightgrating.h"
    ))
    .unwrap();
    for name in [
        "typedef struct LgConfig LgConfig;",
        "typedef struct LgPattern LgPattern;",
        "LG_STATUS_OK = 0",
        "lg_config_parse(",
        "lg_simulate(",
        "lg_pattern_copy(",
        "lg_last_error_message(",
        "lg_order_spectrum(",
    ] {
        assert!(header.contains(name), "missing {name}");
    }
}

fn static_library() -> Option<PathBuf> {
    let exe = std::env::current_exe().ok()?;
    let dir = exe.parent()?.parent()?;
    let lib = dir.join("liblightgrating_ffi.a");
    lib.exists().then_some(lib)
}

/// Compiles and runs a small C program against the generated header and
/// the static library, when a C compiler is available.
#[test]
fn c_program_links_and_runs() {
    let (Some(lib), Ok(cc)) = (static_library(), which_cc()) else {
        eprintln!("skipping: no C compiler or static library");
        return;
    };
    let dir = tempfile::TempDir::new().unwrap();
    let src = dir.path().join("smoke.c");
    std::fs::write(
        &src,
        r#"#include <stdio.h>
#include "lightgrating.h"
int main(void) {
    LgConfig *cfg = NULL;
    if (lg_config_parse("[grating]\npower_w = -3\n", &cfg) != LG_STATUS_CONFIG) return 1;
    if (lg_last_error_message() == NULL) return 2;
    double j = 0.0;
    if (lg_bessel_j(0, 2.404825557695773, &j) != LG_STATUS_OK || j > 1e-12 || j < -1e-12) return 3;
    cfg = lg_config_default();
    double re = 0.0, im = 0.0;
    if (lg_compute_phi(cfg, 120.0, &re, &im) != LG_STATUS_OK) return 4;
    lg_config_free(cfg);
    printf("%.4f %.4f\n", re, im);
    return 0;
}
"#,
    )
    .unwrap();
    let exe = dir.path().join("smoke");
    let status = Command::new(cc)
        .arg(&src)
        .arg(format!(
            "-I{}",
            concat!(env!("CARGO_MANIFEST_DIR"), "/include")
        ))
        .arg(&lib)
        .args(["-lpthread", "-ldl", "-lm", "-o"])
        .arg(&exe)
        .status()
        .unwrap();
    assert!(status.success());
    let out = Command::new(&exe).output().unwrap();
    assert!(out.status.success(), "exit {:?}", out.status.code());
    assert_eq!(
        String::from_utf8(out.stdout).unwrap().trim(),
        "1.9506 0.1545"
    );
}

fn which_cc() -> Result<&'static str, ()> {
    ["cc", "gcc", "clang"]
        .into_iter()
        .find(|c| {
            Command::new(c)
                .arg("--version")
                .output()
                .is_ok_and(|o| o.status.success())
        })
        .ok_or(())
}
