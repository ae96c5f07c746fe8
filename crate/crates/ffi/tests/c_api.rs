use std::ffi::{CStr, CString};
use std::process::Command;
use std::ptr;

use sponge_ffi::*;

fn cstr(s: &str) -> CString {
    CString::new(s).unwrap()
}

fn take(p: *mut std::ffi::c_char) -> String {
    let s = unsafe { CStr::from_ptr(p) }.to_str().unwrap().to_string();
    unsafe { sponge_string_free(p) };
    s
}

fn last_error() -> String {
    unsafe { CStr::from_ptr(sponge_last_error()) }.to_str().unwrap().to_string()
}

fn open(dir: &std::path::Path) -> *mut SpongeBundle {
    let mut h = ptr::null_mut();
    let d = cstr(dir.to_str().unwrap());
    assert_eq!(unsafe { sponge_bundle_open(d.as_ptr(), &mut h) }, SpongeStatus::Ok);
    h
}

#[test]
fn build_open_verify_export_probe() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = cstr(r#"{"mode": "r4", "claim_samples": 5000, "shsep_samples": 2000}"#);
    let out = cstr(dir.path().to_str().unwrap());
    assert_eq!(unsafe { sponge_build(cfg.as_ptr(), out.as_ptr()) }, SpongeStatus::Ok);
    let h = open(dir.path());
    assert_eq!(unsafe { sponge_bundle_stage_count(h) }, 2);

    let (mut cells, mut verts, mut dim) = (0, 0, 0);
    assert_eq!(unsafe { sponge_bundle_stage_info(h, 1, &mut cells, &mut verts, &mut dim) }, SpongeStatus::Ok);
    assert_eq!((cells, dim), (417, 4));
    assert_eq!(unsafe { sponge_bundle_stage_info(h, 9, &mut cells, &mut verts, &mut dim) }, SpongeStatus::MissingStage);
    assert!(last_error().contains("stage 9"));

    let mut report = ptr::null_mut();
    let mut failures = 99;
    assert_eq!(unsafe { sponge_verify(h, &mut report, &mut failures) }, SpongeStatus::Ok);
    let report = take(report);
    assert_eq!(failures, 0);
    assert_eq!(report.lines().count(), 1 + 34 + 1);

    let mut mesh = ptr::null_mut();
    let fmt = cstr("off");
    assert_eq!(unsafe { sponge_export(h, 1, fmt.as_ptr(), ptr::null(), &mut mesh) }, SpongeStatus::Ok);
    assert!(take(mesh).starts_with("nOFF\n4\n"));
    let proj = [0usize, 1, 2];
    assert_eq!(unsafe { sponge_export(h, 1, fmt.as_ptr(), proj.as_ptr(), &mut mesh) }, SpongeStatus::Ok);
    assert!(take(mesh).starts_with("OFF"));
    let bad = cstr("stl");
    assert_eq!(unsafe { sponge_export(h, 1, bad.as_ptr(), ptr::null(), &mut mesh) }, SpongeStatus::UnknownFormat);

    let spec = cstr(r#"{"depth": 0, "map": {"kind": "flat"}}"#);
    let mut probe = ptr::null_mut();
    assert_eq!(unsafe { sponge_probe(h, spec.as_ptr(), &mut probe) }, SpongeStatus::Ok);
    let probe = take(probe);
    let summary: serde_json::Value = serde_json::from_str(probe.lines().last().unwrap()).unwrap();
    assert_eq!(summary["inconclusive"], 0);
    assert!(summary["holes"].as_u64().unwrap() > 0);
    unsafe { sponge_bundle_free(h) };
}

#[test]
fn errors_map_to_status_codes() {
    let dir = tempfile::tempdir().unwrap();
    let out = cstr(dir.path().to_str().unwrap());
    assert_eq!(unsafe { sponge_build(ptr::null(), out.as_ptr()) }, SpongeStatus::NullPointer);
    let cfg = cstr(r#"{"mode": "r4", "k": 3}"#);
    assert_eq!(unsafe { sponge_build(cfg.as_ptr(), out.as_ptr()) }, SpongeStatus::Config);
    assert!(last_error().contains("k = 2"), "{}", last_error());
    let cfg = cstr(r#"{"bogus": true}"#);
    assert_eq!(unsafe { sponge_build(cfg.as_ptr(), out.as_ptr()) }, SpongeStatus::Json);

    let mut h = ptr::null_mut();
    assert_eq!(unsafe { sponge_bundle_open(out.as_ptr(), &mut h) }, SpongeStatus::Io);
    assert!(h.is_null());
    assert_eq!(unsafe { sponge_bundle_stage_count(h) }, 0);
    let mut s = ptr::null_mut();
    let mut n = 0;
    assert_eq!(unsafe { sponge_verify(h, &mut s, &mut n) }, SpongeStatus::NullPointer);
    unsafe { sponge_bundle_free(ptr::null_mut()) };
    unsafe { sponge_string_free(ptr::null_mut()) };
}

#[test]
fn tampered_bundle_reports_failures() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = cstr(r#"{"mode": "hilbert"}"#);
    let out = cstr(dir.path().to_str().unwrap());
    assert_eq!(unsafe { sponge_build(cfg.as_ptr(), out.as_ptr()) }, SpongeStatus::Ok);
    let file = dir.path().join("stage-1.json");
    let text = std::fs::read_to_string(&file).unwrap();
    std::fs::write(&file, text.replacen("\"weight_exp\":1", "\"weight_exp\":2", 1)).unwrap();
    let h = open(dir.path());
    let mut report = ptr::null_mut();
    let mut failures = 0;
    assert_eq!(unsafe { sponge_verify(h, &mut report, &mut failures) }, SpongeStatus::VerifyFailed);
    let report = take(report);
    assert!(failures >= 2);
    assert!(report.contains(r#""id":"cli_export.determinism","module":"cli_export""#));
    unsafe { sponge_bundle_free(h) };
}

#[test]
fn header_compiles_as_c() {
    let header = concat!(env!("CARGO_MANIFEST_DIR"), "/include/sponge.h");
    let dir = tempfile::tempdir().unwrap();
    let src = dir.path().join("use.c");
    std::fs::write(
        &src,
        format!(
            "#include \"{header}\"\nint main(void) {{ SpongeBundle *h = 0; size_t n = sponge_bundle_stage_count(h); \
             return (int)n + (sponge_last_error() == 0) + SPONGE_STATUS_OK; }}\n"
        ),
    )
    .unwrap();
    let Ok(out) = Command::new("cc").args(["-std=c99", "-Wall", "-Werror", "-fsyntax-only"]).arg(&src).output() else {
        eprintln!("no C compiler, skipped");
        return;
    };
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
}

#[test]
fn c_program_links_and_runs() {
    // target/<profile>/deps/c_api-* → target/<profile>/libsponge_ffi.a
    let exe = std::env::current_exe().unwrap();
    let lib = exe.parent().and_then(|d| d.parent()).unwrap().join("libsponge_ffi.a");
    if !lib.exists() {
        eprintln!("no static library at {}, skipped", lib.display());
        return;
    }
    let include = concat!(env!("CARGO_MANIFEST_DIR"), "/include");
    let dir = tempfile::tempdir().unwrap();
    let src = dir.path().join("main.c");
    std::fs::write(
        &src,
        r##"#include <stdio.h>
#include <string.h>
#include "sponge.h"
int main(int argc, char **argv) {
    if (sponge_build("{\"mode\": \"hilbert\", \"max_stage\": 2}", argv[1]) != SPONGE_STATUS_OK) return 10;
    SpongeBundle *h = NULL;
    if (sponge_bundle_open(argv[1], &h) != SPONGE_STATUS_OK) return 11;
    size_t cells, verts, dim;
    if (sponge_bundle_stage_info(h, 2, &cells, &verts, &dim) != SPONGE_STATUS_OK) return 12;
    char *mesh = NULL;
    if (sponge_export(h, 2, "obj", NULL, &mesh) != SPONGE_STATUS_OK) return 13;
    int ok = strstr(mesh, "# dimension 6") != NULL;
    sponge_string_free(mesh);
    if (sponge_export(h, 7, "obj", NULL, &mesh) != SPONGE_STATUS_MISSING_STAGE) return 14;
    printf("%zu %zu %zu %s\n", sponge_bundle_stage_count(h), cells, dim, sponge_last_error());
    sponge_bundle_free(h);
    return ok ? 0 : 15;
}
"##,
    )
    .unwrap();
    let bin = dir.path().join("main");
    let Ok(cc) = Command::new("cc")
        .arg(&src)
        .arg(format!("-I{include}"))
        .arg(&lib)
        .args(["-lpthread", "-ldl", "-lm", "-o"])
        .arg(&bin)
        .output()
    else {
        eprintln!("no C compiler, skipped");
        return;
    };
    assert!(cc.status.success(), "{}", String::from_utf8_lossy(&cc.stderr));
    let run = Command::new(&bin).arg(dir.path().join("bundle")).output().unwrap();
    assert!(run.status.success(), "exit {:?}", run.status.code());
    assert_eq!(String::from_utf8_lossy(&run.stdout).trim(), "3 1089 6 stage 7 is not in the bundle");
}
