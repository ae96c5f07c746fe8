use std::path::Path;
use std::process::{Command, Output};

use sponge_core::cli::{read_mesh, Mesh, MeshFormat};

fn sponge(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_sponge")).args(args).output().unwrap()
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

fn report_lines(text: &str) -> Vec<serde_json::Value> {
    text.lines().map(|l| serde_json::from_str(l).unwrap()).collect()
}

#[test]
fn build_verify_report_is_complete_and_reproducible() {
    let dir = tempfile::tempdir().unwrap();
    let bundle = dir.path().join("b");
    let out = sponge(&["build", "--mode", "hilbert", "--max-stage", "2", "--out", s(&bundle)]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let (r1, r2) = (dir.path().join("r1.jsonl"), dir.path().join("r2.jsonl"));
    assert!(sponge(&["verify", s(&bundle), "--report", s(&r1)]).status.success());
    assert!(sponge(&["verify", s(&bundle), "--report", s(&r2)]).status.success());
    let text = std::fs::read_to_string(&r1).unwrap();
    assert_eq!(text, std::fs::read_to_string(&r2).unwrap());

    let lines = report_lines(&text);
    assert_eq!(lines[0]["kind"], "provenance");
    assert_eq!(lines.last().unwrap()["kind"], "summary");
    assert_eq!(lines.last().unwrap()["fail"], 0);
    let certs: Vec<_> = lines.iter().filter(|l| l["kind"] == "certificate").collect();
    for id in sponge_core::cli::INVARIANTS {
        assert_eq!(certs.iter().filter(|c| c["id"] == id).count(), 1, "{id}");
    }
    for c in &certs {
        assert!(["PASS", "N/A", "INFO"].contains(&c["status"].as_str().unwrap()), "{c}");
        assert!(!c["anchor"].as_str().unwrap().is_empty());
    }
}

#[test]
fn config_file_and_flags_merge() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("cfg.json");
    std::fs::write(&cfg, r#"{"mode": "rk", "k": 3, "seed": 3}"#).unwrap();
    let bundle = dir.path().join("b");
    let out = sponge(&["build", "--config", s(&cfg), "--seed", "9", "--out", s(&bundle)]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let m: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(bundle.join("manifest.json")).unwrap()).unwrap();
    assert_eq!((m["config"]["k"].as_u64(), m["config"]["seed"].as_u64()), (Some(3), Some(9)));
    assert_eq!(m["stages"][1]["ambient_dim"], 5);

    let bad = sponge(&["build", "--mode", "r4", "--k", "3", "--out", s(&dir.path().join("x"))]);
    assert_eq!(bad.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&bad.stderr).contains("k = 2"));
    std::fs::write(&cfg, r#"{"mdoe": "r4"}"#).unwrap();
    assert_eq!(sponge(&["build", "--config", s(&cfg), "--out", s(&dir.path().join("y"))]).status.code(), Some(2));
}

#[test]
fn tampered_stage_file_fails_verification() {
    let dir = tempfile::tempdir().unwrap();
    let bundle = dir.path().join("b");
    assert!(sponge(&["build", "--mode", "r4", "--out", s(&bundle)]).status.success());
    let file = bundle.join("stage-1.json");
    let text = std::fs::read_to_string(&file).unwrap();
    std::fs::write(&file, text.replacen("\"weight_exp\":1", "\"weight_exp\":0", 1)).unwrap();
    let out = sponge(&["verify", s(&bundle)]);
    assert_eq!(out.status.code(), Some(1));
    let lines = report_lines(&String::from_utf8(out.stdout).unwrap());
    let status = |id: &str| lines.iter().find(|l| l["id"] == id).unwrap()["status"].as_str().unwrap().to_string();
    assert_eq!(status("complex_core.mass"), "FAIL");
    assert_eq!(status("cli_export.determinism"), "FAIL");
    assert_eq!(status("cli_export.completeness"), "PASS");

    std::fs::write(&file, "{ not json").unwrap();
    let out = sponge(&["verify", s(&bundle)]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("corrupt bundle"));
}

#[test]
fn export_round_trips_through_the_reader() {
    let dir = tempfile::tempdir().unwrap();
    let bundle = dir.path().join("b");
    assert!(sponge(&["build", "--mode", "hilbert", "--max-stage", "2", "--refine", "1", "--out", s(&bundle)]).status.success());
    let b = sponge_core::cli::read_bundle(&bundle).unwrap();
    for (fmt, parse) in [("off", MeshFormat::Off), ("obj", MeshFormat::Obj)] {
        let path = dir.path().join(format!("m.{fmt}"));
        let out = sponge(&["export", s(&bundle), "--stage", "2", "--format", fmt, "--out", s(&path)]);
        assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
        let mesh: Mesh = read_mesh(&std::fs::read_to_string(&path).unwrap(), parse).unwrap();
        let st = &b.stage(2).unwrap().stage;
        assert_eq!(mesh.dim, 6);
        assert_eq!(mesh.vertices.len(), st.vertex_count());
        let flat: Vec<f64> = mesh.vertices.concat();
        assert_eq!(flat, st.coords, "{fmt} coordinates must round-trip exactly");
        // two triangles per square, minus triangles shared by both sheets
        // where all three corners sit on a collapsed boundary
        let cells: Vec<std::collections::BTreeSet<u32>> = st.cell_vertices.iter().map(|c| c.iter().copied().collect()).collect();
        let mut distinct = std::collections::BTreeSet::new();
        for f in &mesh.faces {
            assert!(cells.iter().any(|c| f.iter().all(|v| c.contains(v))), "{f:?} is not inside a cell");
            let mut key = *f;
            key.sort();
            assert!(distinct.insert(key), "duplicate face {f:?}");
        }
        assert!(mesh.faces.len() <= 2 * st.cell_count() && mesh.faces.len() >= 2 * st.cell_count() - 8);
    }
    let out = sponge(&["export", s(&bundle), "--stage", "2", "--project", "0,1,4"]);
    assert!(String::from_utf8_lossy(&out.stdout).starts_with("OFF\n"));
    assert_eq!(sponge(&["export", s(&bundle), "--stage", "5"]).status.code(), Some(2));
    assert_eq!(sponge(&["export", s(&bundle), "--format", "ply"]).status.code(), Some(2));
}

#[test]
fn probe_reports_holes_and_contradictions() {
    let dir = tempfile::tempdir().unwrap();
    let bundle = dir.path().join("b");
    assert!(sponge(&["build", "--mode", "hilbert", "--max-stage", "2", "--out", s(&bundle)]).status.success());
    let spec = dir.path().join("flat.json");
    std::fs::write(&spec, r#"{"name": "half", "depth": 1, "cells": "5x1,20x0", "map": {"kind": "tilt", "slope": 0.5}}"#).unwrap();
    let out_path = dir.path().join("p.jsonl");
    let out = sponge(&["probe", s(&bundle), s(&spec), "--out", s(&out_path)]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let lines = report_lines(&std::fs::read_to_string(&out_path).unwrap());
    assert_eq!(lines.len(), 3);
    let summary = lines.last().unwrap();
    assert_eq!(summary["surface"], "half");
    assert_eq!(summary["inconclusive"], 0);
    assert_eq!(summary["divergence"]["passed"], true);

    std::fs::write(&spec, r#"{"depth": 0, "map": {"kind": "single_sheet"}}"#).unwrap();
    let out = sponge(&["probe", s(&bundle), s(&spec)]);
    let summary: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
    assert!(summary["contradictions"].as_u64().unwrap() > 0);

    std::fs::write(&spec, r#"{"depth": 1, "cells": "3x1", "map": {"kind": "flat"}}"#).unwrap();
    let out = sponge(&["probe", s(&bundle), s(&spec)]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("resolution mismatch"));
}
