//! Bundle layout: a directory with `manifest.json` and one `stage-<j>.json`
//! per built stage. The manifest records the config, its SHA-256, and for each
//! stage the file name, SHA-256, cell, vertex and ambient counts.

use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use super::{CliError, Mode, RunConfig};
use crate::embedding_hilbert::{build_stage_hilbert, HilbertStage};
use crate::embedding_r4::{build_stage_one, TowerStage};
use crate::embedding_rk::build_stage_rk;
use crate::stage::Stage;

pub const BUNDLE_FORMAT: &str = "sponge-bundle/1";

/// One built stage of any tower.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct StageRecord {
    pub mode: Mode,
    pub j: u32,
    pub k: usize,
    pub ambient_dim: usize,
    /// δ_j, 0 at stage 0.
    pub delta: f64,
    pub plane: Option<(usize, usize)>,
    pub affine_n: Option<u32>,
    pub stage: Stage,
}

impl StageRecord {
    pub fn hilbert(&self, cfg: &RunConfig) -> HilbertStage {
        HilbertStage { n: self.j, ambient_dim: self.ambient_dim, schedule: cfg.schedule(), stage: self.stage.clone() }
    }

    pub fn tower(&self, cfg: &RunConfig) -> TowerStage {
        TowerStage {
            j: self.j,
            k: self.k,
            schedule: cfg.schedule(),
            plane: self.plane,
            affine_n: self.affine_n,
            stage: self.stage.clone(),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct StageEntry {
    pub j: u32,
    pub file: String,
    pub sha256: String,
    pub cells: usize,
    pub vertices: usize,
    pub ambient_dim: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub format: String,
    pub config: RunConfig,
    pub config_sha256: String,
    pub stages: Vec<StageEntry>,
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    Sha256::digest(bytes).iter().map(|b| format!("{b:02x}")).collect()
}

pub fn config_hash(cfg: &RunConfig) -> String {
    sha256_hex(&serde_json::to_vec(cfg).expect("config serializes"))
}

/// Build every stage 0..=max_stage of the configured tower.
pub fn build_stages(cfg: &RunConfig) -> Result<Vec<StageRecord>, CliError> {
    cfg.validate()?;
    let schedule = cfg.schedule();
    let mut out = Vec::new();
    for j in 0..=cfg.max_stage {
        let delta = if j == 0 { 0.0 } else { schedule.delta(j as u64) };
        let rec = match cfg.mode {
            Mode::Hilbert => {
                let h = build_stage_hilbert(j, &schedule, cfg.refine, cfg.cell_ceiling)?;
                let plane = (j > 0).then_some((0, 1));
                StageRecord { mode: cfg.mode, j, k: 2, ambient_dim: h.ambient_dim, delta, plane, affine_n: None, stage: h.stage }
            }
            Mode::R4 | Mode::Rk => {
                let t = match (cfg.mode, j) {
                    (Mode::R4, 0) => TowerStage::zero(2, &schedule),
                    (Mode::R4, 1) => build_stage_one(2, &schedule, cfg.n_cap, cfg.cell_ceiling)?.0,
                    _ => build_stage_rk(j, cfg.k, &schedule, cfg.n_cap, cfg.cell_ceiling)?,
                };
                StageRecord {
                    mode: cfg.mode,
                    j,
                    k: t.k,
                    ambient_dim: t.ambient_dim(),
                    delta,
                    plane: t.plane,
                    affine_n: t.affine_n,
                    stage: t.stage,
                }
            }
        };
        out.push(rec);
    }
    Ok(out)
}

/// Serialized stage files and the manifest, without touching the disk.
pub fn encode_bundle(cfg: &RunConfig, stages: &[StageRecord]) -> Result<(Manifest, Vec<(String, Vec<u8>)>), CliError> {
    let mut files = Vec::new();
    let mut entries = Vec::new();
    for rec in stages {
        let mut bytes = serde_json::to_vec(rec)?;
        bytes.push(b'\n');
        let file = format!("stage-{}.json", rec.j);
        entries.push(StageEntry {
            j: rec.j,
            file: file.clone(),
            sha256: sha256_hex(&bytes),
            cells: rec.stage.cell_count(),
            vertices: rec.stage.vertex_count(),
            ambient_dim: rec.ambient_dim,
        });
        files.push((file, bytes));
    }
    let manifest =
        Manifest { format: BUNDLE_FORMAT.into(), config: cfg.clone(), config_sha256: config_hash(cfg), stages: entries };
    Ok((manifest, files))
}

/// Build the configured tower and write the bundle into `dir`.
pub fn cmd_build(cfg: &RunConfig, dir: &Path) -> Result<Manifest, CliError> {
    let stages = build_stages(cfg)?;
    let (manifest, files) = encode_bundle(cfg, &stages)?;
    fs::create_dir_all(dir)?;
    for (name, bytes) in &files {
        fs::write(dir.join(name), bytes)?;
    }
    let mut m = serde_json::to_vec_pretty(&manifest)?;
    m.push(b'\n');
    fs::write(dir.join("manifest.json"), m)?;
    Ok(manifest)
}

/// A bundle read back from disk. `hash_ok[i]` tells whether stage file i
/// still matches its manifest hash.
#[derive(Clone, Debug)]
pub struct Bundle {
    pub manifest: Manifest,
    pub stages: Vec<StageRecord>,
    pub hash_ok: Vec<bool>,
}

impl Bundle {
    pub fn config(&self) -> &RunConfig {
        &self.manifest.config
    }

    pub fn stage(&self, j: u32) -> Result<&StageRecord, CliError> {
        self.stages.iter().find(|s| s.j == j).ok_or(CliError::MissingStage(j))
    }
}

pub fn read_bundle(dir: &Path) -> Result<Bundle, CliError> {
    let text = fs::read(dir.join("manifest.json"))?;
    let manifest: Manifest = serde_json::from_slice(&text).map_err(|e| CliError::Corrupt(format!("manifest: {e}")))?;
    if manifest.format != BUNDLE_FORMAT {
        return Err(CliError::Corrupt(format!("format {:?}", manifest.format)));
    }
    manifest.config.validate()?;
    let mut stages = Vec::new();
    let mut hash_ok = Vec::new();
    for e in &manifest.stages {
        let bytes = fs::read(dir.join(&e.file))?;
        hash_ok.push(sha256_hex(&bytes) == e.sha256);
        let rec: StageRecord = serde_json::from_slice(&bytes).map_err(|err| CliError::Corrupt(format!("{}: {err}", e.file)))?;
        if rec.j != e.j || rec.stage.coords.len() != rec.stage.vertex_count() * rec.ambient_dim {
            return Err(CliError::Corrupt(format!("{}: inconsistent stage record", e.file)));
        }
        stages.push(rec);
    }
    Ok(Bundle { manifest, stages, hash_ok })
}
