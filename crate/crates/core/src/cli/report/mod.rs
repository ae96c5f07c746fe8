//! Verification report: one certificate line per module invariant, as JSON
//! lines between a provenance header and a summary footer.

mod base;
mod tower;

use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{encode_bundle, read_bundle, build_stages, Bundle, CliError};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum Status {
    #[serde(rename = "PASS")]
    Pass,
    #[serde(rename = "FAIL")]
    Fail,
    /// The invariant belongs to a tower other than the bundle's.
    #[serde(rename = "N/A")]
    NotApplicable,
    /// Report-only quantity.
    #[serde(rename = "INFO")]
    Info,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Certificate {
    pub id: String,
    pub module: String,
    pub anchor: String,
    pub bound: String,
    pub measured: String,
    pub status: Status,
    pub detail: String,
}

impl Certificate {
    pub fn new(id: &str, anchor: &str, bound: impl Into<String>, measured: impl Into<String>, ok: bool) -> Self {
        Certificate {
            id: id.to_string(),
            module: id.split('.').next().unwrap_or(id).to_string(),
            anchor: anchor.to_string(),
            bound: bound.into(),
            measured: measured.into(),
            status: if ok { Status::Pass } else { Status::Fail },
            detail: String::new(),
        }
    }

    pub fn not_applicable(id: &str, anchor: &str, why: &str) -> Self {
        Certificate { status: Status::NotApplicable, detail: why.to_string(), ..Self::new(id, anchor, "", "", true) }
    }

    pub fn info(id: &str, anchor: &str, measured: impl Into<String>) -> Self {
        Certificate { status: Status::Info, ..Self::new(id, anchor, "report only", measured, true) }
    }

    pub fn with_detail(mut self, detail: impl Into<String>) -> Self {
        self.detail = detail.into();
        self
    }

    /// A certificate whose computation itself failed.
    pub fn error(id: &str, anchor: &str, err: impl std::fmt::Display) -> Self {
        Self::new(id, anchor, "", "error", false).with_detail(err.to_string())
    }
}

/// Invariant ids, one per listed module invariant, in report order.
pub const INVARIANTS: [&str; 32] = [
    "complex_core.mass",
    "complex_core.children",
    "complex_core.subdivide",
    "complex_core.rings",
    "branched_cover.halving",
    "branched_cover.deck",
    "branched_cover.commutation",
    "branched_cover.shsep",
    "deformation_maps.h_lipschitz",
    "deformation_maps.fiber_gap",
    "deformation_maps.continuity",
    "deformation_maps.affine",
    "embedding_hilbert.diagram",
    "embedding_hilbert.orthogonality",
    "embedding_hilbert.cauchy",
    "embedding_r4.composition",
    "embedding_r4.drift",
    "embedding_r4.embedding",
    "embedding_r4.nontriviality",
    "embedding_rk.fiber_constancy",
    "embedding_rk.verbatim",
    "embedding_rk.doubling",
    "currents.mass",
    "currents.linearity",
    "currents.flip",
    "currents.boundary",
    "prober.total",
    "prober.hole_measure",
    "prober.cumulative",
    "prober.chain",
    "cli_export.determinism",
    "cli_export.completeness",
];

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct StageCount {
    pub j: u32,
    pub cells: usize,
    pub vertices: usize,
    pub ambient_dim: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Provenance {
    pub format: String,
    pub config_sha256: String,
    pub stages: Vec<StageCount>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct VerificationReport {
    pub provenance: Provenance,
    pub certificates: Vec<Certificate>,
}

#[derive(Serialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
enum Line<'a> {
    Provenance(&'a Provenance),
    Certificate(&'a Certificate),
    Summary { pass: usize, fail: usize, not_applicable: usize, info: usize },
}

impl VerificationReport {
    pub fn count(&self, s: Status) -> usize {
        self.certificates.iter().filter(|c| c.status == s).count()
    }

    pub fn failed(&self) -> bool {
        self.count(Status::Fail) > 0
    }

    pub fn get(&self, id: &str) -> Option<&Certificate> {
        self.certificates.iter().find(|c| c.id == id)
    }

    pub fn to_jsonl(&self) -> String {
        let mut lines = vec![serde_json::to_string(&Line::Provenance(&self.provenance)).unwrap()];
        lines.extend(self.certificates.iter().map(|c| serde_json::to_string(&Line::Certificate(c)).unwrap()));
        lines.push(
            serde_json::to_string(&Line::Summary {
                pass: self.count(Status::Pass),
                fail: self.count(Status::Fail),
                not_applicable: self.count(Status::NotApplicable),
                info: self.count(Status::Info),
            })
            .unwrap(),
        );
        lines.join("\n") + "\n"
    }
}

/// Run every certificate against a bundle.
pub fn verify_bundle(bundle: &Bundle) -> VerificationReport {
    let cfg = bundle.config();
    let mut certs = Vec::new();
    certs.extend(base::complex_checks(bundle));
    certs.extend(base::cover_checks(bundle));
    certs.extend(base::deformation_checks(cfg));
    certs.extend(tower::hilbert_checks(bundle));
    certs.extend(tower::r4_checks(bundle));
    certs.extend(base::current_checks(bundle));
    certs.extend(tower::prober_checks(bundle));
    certs.push(determinism(bundle));
    let listed: Vec<&str> = certs.iter().map(|c| c.id.as_str()).filter(|id| INVARIANTS.contains(id)).collect();
    let missing: Vec<&str> = INVARIANTS.iter().copied().filter(|id| listed.iter().filter(|l| *l == id).count() != 1).collect();
    certs.push(
        Certificate::new(
            "cli_export.completeness",
            "report completeness",
            format!("{} invariants once each", INVARIANTS.len()),
            format!("{}", listed.len() + 1),
            missing.iter().all(|m| *m == "cli_export.completeness"),
        )
        .with_detail(format!("{} certificates in total", certs.len() + 1)),
    );
    // report order follows the invariant list, extra certificates after their module
    let rank = |c: &Certificate| {
        INVARIANTS.iter().position(|i| *i == c.id).map_or_else(
            || {
                let last = INVARIANTS.iter().rposition(|i| i.starts_with(&format!("{}.", c.module)));
                (last.unwrap_or(INVARIANTS.len()), 1)
            },
            |p| (p, 0),
        )
    };
    certs.sort_by_key(rank);
    VerificationReport {
        provenance: Provenance {
            format: bundle.manifest.format.clone(),
            config_sha256: bundle.manifest.config_sha256.clone(),
            stages: bundle
                .manifest
                .stages
                .iter()
                .map(|e| StageCount { j: e.j, cells: e.cells, vertices: e.vertices, ambient_dim: e.ambient_dim })
                .collect(),
        },
        certificates: certs,
    }
}

/// Rebuild from the manifest config and compare stage hashes with the
/// manifest and with the files on disk.
fn determinism(bundle: &Bundle) -> Certificate {
    let id = "cli_export.determinism";
    let anchor = "determinism";
    let rebuilt = match build_stages(bundle.config()).and_then(|s| encode_bundle(bundle.config(), &s)) {
        Ok((m, _)) => m,
        Err(e) => return Certificate::error(id, anchor, e),
    };
    let same_manifest = rebuilt.stages == bundle.manifest.stages && rebuilt.config_sha256 == bundle.manifest.config_sha256;
    let files_ok = bundle.hash_ok.iter().all(|b| *b);
    let bad: Vec<u32> = bundle.manifest.stages.iter().zip(&bundle.hash_ok).filter(|(_, ok)| !**ok).map(|(e, _)| e.j).collect();
    Certificate::new(id, anchor, "rebuilt hashes = manifest = files", format!("manifest {same_manifest}, files {files_ok}"), same_manifest && files_ok)
        .with_detail(if bad.is_empty() { String::new() } else { format!("stage files changed: {bad:?}") })
}

/// Read a bundle, verify it and write the JSON-lines report.
pub fn cmd_verify(dir: &Path, out: Option<&Path>) -> Result<VerificationReport, CliError> {
    let bundle = read_bundle(dir)?;
    let report = verify_bundle(&bundle);
    if let Some(path) = out {
        std::fs::write(path, report.to_jsonl())?;
    }
    Ok(report)
}
