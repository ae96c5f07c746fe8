//! Run configuration, artifact bundles, verification reports, probe runs and
//! mesh export behind the `sponge` binary.

pub mod bundle;
pub mod mesh;
pub mod probe_run;
pub mod report;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::embedding_r4::TowerError;
use crate::prober::ProbeError;
use crate::schedule::{DeltaSchedule, ScheduleKind};
use crate::stage::StageError;

pub use bundle::*;
pub use mesh::*;
pub use probe_run::*;
pub use report::*;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("invalid config: {0}")]
    Config(String),
    #[error("corrupt bundle: {0}")]
    Corrupt(String),
    #[error("stage {0} is not in the bundle")]
    MissingStage(u32),
    #[error("unknown mesh format {0:?} (expected off or obj)")]
    UnknownFormat(String),
    #[error("surface spec: {0}")]
    Surface(String),
    #[error(transparent)]
    Stage(#[from] StageError),
    #[error(transparent)]
    Tower(#[from] TowerError),
    #[error(transparent)]
    Probe(#[from] ProbeError),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum Mode {
    Hilbert,
    R4,
    Rk,
}

/// Everything a build, verify or probe run depends on. Fixed config and seed
/// give byte-identical bundles and reports.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub mode: Mode,
    pub k: usize,
    pub max_stage: u32,
    /// Defaults to the mode's schedule: hilbert for the Hilbert tower, r4 otherwise.
    pub schedule: Option<ScheduleKind>,
    /// Extra plain subdivisions of Hilbert stages.
    pub refine: u32,
    /// Prober constant c; the formula value is used when absent.
    pub c: Option<f64>,
    /// G in the k_j recursion.
    pub g: u32,
    /// Least acceptable realized hole fraction γ.
    pub gamma_floor: f64,
    /// σ = 2^e is searched over e in this range.
    pub sigma_exponents: (i32, i32),
    pub claim_samples: usize,
    pub shsep_samples: usize,
    /// Largest affine subdivision level tried for Ψ.
    pub n_cap: u32,
    pub cell_ceiling: usize,
    pub ring_depth: u32,
    pub seed: u64,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            mode: Mode::Hilbert,
            k: 2,
            max_stage: 1,
            schedule: None,
            refine: 0,
            c: None,
            g: 10,
            gamma_floor: 0.01,
            sigma_exponents: (-40, 10),
            claim_samples: 20_000,
            shsep_samples: 10_000,
            n_cap: 4,
            cell_ceiling: 1_000_000,
            ring_depth: 2,
            seed: 7,
        }
    }
}

impl RunConfig {
    pub fn schedule(&self) -> DeltaSchedule {
        DeltaSchedule::of_kind(self.schedule.unwrap_or(match self.mode {
            Mode::Hilbert => ScheduleKind::Hilbert,
            Mode::R4 | Mode::Rk => ScheduleKind::R4,
        }))
    }

    pub fn validate(&self) -> Result<(), CliError> {
        let bad = |m: &str| Err(CliError::Config(m.to_string()));
        if self.k < 2 {
            return bad("k must be at least 2");
        }
        if matches!(self.mode, Mode::Hilbert | Mode::R4) && self.k != 2 {
            return bad("hilbert and r4 towers have k = 2");
        }
        if self.cell_ceiling == 0 || self.claim_samples == 0 || self.shsep_samples == 0 || self.n_cap == 0 {
            return bad("ceilings and sample counts must be positive");
        }
        if self.sigma_exponents.0 > self.sigma_exponents.1 {
            return bad("empty σ exponent range");
        }
        if self.ring_depth < 2 {
            return bad("ring depth must be at least 2");
        }
        if !(self.gamma_floor >= 0.0 && self.gamma_floor < 1.0) {
            return bad("gamma floor must lie in [0, 1)");
        }
        if let Some(c) = self.c {
            if !(c > 0.0 && c.is_finite()) {
                return bad("c must be positive");
            }
        }
        Ok(())
    }

    pub fn from_json(text: &str) -> Result<Self, CliError> {
        let cfg: RunConfig = serde_json::from_str(text)?;
        cfg.validate()?;
        Ok(cfg)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn config_defaults_and_validation() {
        let cfg = RunConfig::from_json(r#"{"mode": "rk", "k": 3}"#).unwrap();
        assert_eq!((cfg.max_stage, cfg.schedule()), (1, DeltaSchedule::r4()));
        assert_eq!(RunConfig::default().schedule(), DeltaSchedule::hilbert());
        assert!(matches!(RunConfig::from_json(r#"{"mode": "r4", "k": 3}"#), Err(CliError::Config(_))));
        assert!(matches!(RunConfig::from_json(r#"{"cell_ceiling": 0}"#), Err(CliError::Config(_))));
        assert!(matches!(RunConfig::from_json(r#"{"bogus": 1}"#), Err(CliError::Json(_))));
    }
}
