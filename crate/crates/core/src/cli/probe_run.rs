//! Surface spec files and probe runs over a bundle.
//!
//! A spec is JSON: `depth`, an optional run-length-encoded indicator `cells`
//! over the 25^depth base cells in row-major order (y outer, x inner), written
//! as comma-separated `<count>x<0|1>` runs (absent means every cell), and a
//! `map`: `{"kind": "flat"}`, `{"kind": "tilt", "slope": s}`,
//! `{"kind": "single_sheet"}`, or `{"kind": "table", "values": [...]}` with one
//! row of fiber coordinates per lattice vertex at `depth` (row-major, y outer),
//! interpolated linearly on Kuhn triangles.

use std::collections::BTreeSet;
use std::path::Path;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use super::{Bundle, CliError, Mode, RunConfig, StageRecord};
use crate::numeric::pow5;
use crate::schedule::DeltaSchedule;
use crate::prober::{
    cumulative_bound, divergence_check, hilbert_glip_fiber, probe_stage, DivergenceCertificate, Domain, ProbeCertificate,
    ProbeConfig, ProbeSurface, RingOutcome, StageData,
};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum MapSpec {
    Flat,
    Tilt { slope: f64 },
    SingleSheet,
    Table { values: Vec<Vec<f64>> },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SurfaceSpec {
    #[serde(default)]
    pub name: Option<String>,
    pub depth: u32,
    #[serde(default)]
    pub cells: Option<String>,
    pub map: MapSpec,
}

/// Decode `<count>x<bit>` runs into the set of marked cell corners.
pub fn decode_rle(rle: &str, depth: u32) -> Result<BTreeSet<Vec<u64>>, CliError> {
    let m = pow5(depth);
    let mut set = BTreeSet::new();
    let mut pos = 0u64;
    for run in rle.split(',').map(str::trim).filter(|r| !r.is_empty()) {
        let (count, bit) = run.split_once('x').ok_or_else(|| CliError::Surface(format!("bad run {run:?}")))?;
        let count: u64 = count.parse().map_err(|_| CliError::Surface(format!("bad count in {run:?}")))?;
        let on = match bit {
            "0" => false,
            "1" => true,
            _ => return Err(CliError::Surface(format!("bad bit in {run:?}"))),
        };
        if on {
            for i in pos..(pos + count).min(m * m) {
                set.insert(vec![i % m, i / m]);
            }
        }
        pos += count;
    }
    if pos != m * m {
        return Err(CliError::Surface(format!("resolution mismatch: {pos} cells encoded, depth {depth} has {}", m * m)));
    }
    Ok(set)
}

pub fn encode_rle(set: &BTreeSet<Vec<u64>>, depth: u32) -> String {
    let m = pow5(depth);
    let mut runs: Vec<(u64, bool)> = Vec::new();
    for i in 0..m * m {
        let on = set.contains(&vec![i % m, i / m]);
        match runs.last_mut() {
            Some((n, b)) if *b == on => *n += 1,
            _ => runs.push((1, on)),
        }
    }
    runs.iter().map(|(n, b)| format!("{n}x{}", *b as u8)).collect::<Vec<_>>().join(",")
}

/// Piecewise-linear graph over the depth lattice from a vertex table, with its
/// exact fiber Lipschitz constant (largest gradient operator norm over the
/// Kuhn triangles).
fn table_surface(values: Vec<Vec<f64>>, depth: u32, ambient_dim: usize) -> Result<(crate::prober::SurfaceMap, f64), CliError> {
    let m = pow5(depth) as usize;
    let fiber = ambient_dim - 2;
    if values.len() != (m + 1) * (m + 1) || values.iter().any(|r| r.len() != fiber || r.iter().any(|v| !v.is_finite())) {
        return Err(CliError::Surface(format!(
            "resolution mismatch: table needs {} rows of {fiber} finite values",
            (m + 1) * (m + 1)
        )));
    }
    let at = move |i: usize, j: usize| j * (m + 1) + i;
    let mut lip: f64 = 0.0;
    for j in 0..m {
        for i in 0..m {
            // lower triangle uses (i,j),(i+1,j),(i+1,j+1); upper (i,j),(i,j+1),(i+1,j+1)
            for (dx, dy) in [((at(i + 1, j), at(i, j)), (at(i + 1, j + 1), at(i + 1, j))), ((at(i + 1, j + 1), at(i, j + 1)), (at(i, j + 1), at(i, j)))] {
                let g = nalgebra::DMatrix::from_fn(fiber, 2, |r, c| {
                    let (a, b) = if c == 0 { dx } else { dy };
                    (values[a][r] - values[b][r]) * m as f64
                });
                lip = lip.max(crate::numeric::operator_norm(&g));
            }
        }
    }
    let map = Arc::new(move |x: &[f64]| {
        let fx = (x[0] * m as f64).clamp(0.0, m as f64);
        let fy = (x[1] * m as f64).clamp(0.0, m as f64);
        let (i, j) = ((fx.floor() as usize).min(m - 1), (fy.floor() as usize).min(m - 1));
        let (s, t) = (fx - i as f64, fy - j as f64);
        let (w, corners) = if s >= t {
            ([1.0 - s, s - t, t], [at(i, j), at(i + 1, j), at(i + 1, j + 1)])
        } else {
            ([1.0 - t, t - s, s], [at(i, j), at(i, j + 1), at(i + 1, j + 1)])
        };
        let mut out = vec![0.0; fiber + 2];
        out[..2].copy_from_slice(&x[..2]);
        for (wk, ck) in w.iter().zip(corners) {
            for r in 0..fiber {
                out[2 + r] += wk * values[ck][r];
            }
        }
        out
    });
    Ok((map, lip))
}

/// Constants the prober needs for a bundled stage.
pub fn stage_constants(rec: &StageRecord, cfg: &RunConfig) -> (f64, f64) {
    match rec.mode {
        Mode::Hilbert => {
            let f = hilbert_glip_fiber(&cfg.schedule(), rec.j);
            ((1.0 + f * f).sqrt(), f)
        }
        Mode::R4 | Mode::Rk => (rec.stage.piece_singular_range().0, rec.stage.fiber_lipschitz()),
    }
}

pub fn stage_data<'a>(rec: &'a StageRecord, cfg: &RunConfig) -> StageData<'a> {
    let (glip_f, glip_fiber) = stage_constants(rec, cfg);
    StageData { stage: &rec.stage, n: rec.j, delta: rec.delta, glip_f, glip_fiber, affine_n: rec.affine_n.unwrap_or(0) }
}

/// Realize a spec as a surface over `rec`'s ambient space.
pub fn build_surface(spec: &SurfaceSpec, rec: &StageRecord, cfg: &RunConfig) -> Result<ProbeSurface, CliError> {
    let d = rec.ambient_dim;
    let mut s = match &spec.map {
        MapSpec::Flat => ProbeSurface::flat(d),
        MapSpec::Tilt { slope } => ProbeSurface::tilt(*slope, d),
        MapSpec::SingleSheet => ProbeSurface::single_sheet(&rec.stage, stage_constants(rec, cfg).1),
        MapSpec::Table { values } => {
            let (map, lip) = table_surface(values.clone(), spec.depth, d)?;
            ProbeSurface {
                name: "table".into(),
                map,
                fiber_lipschitz: lip,
                lipschitz: (1.0 + lip * lip).sqrt(),
                ..ProbeSurface::flat(d)
            }
        }
    };
    s.domain = match &spec.cells {
        None => Domain::Full,
        Some(rle) => {
            let cells = decode_rle(rle, spec.depth)?;
            if cells.is_empty() {
                Domain::Empty
            } else {
                Domain::Cells { depth: spec.depth, cells }
            }
        }
    };
    if let Some(n) = &spec.name {
        s.name = n.clone();
    }
    Ok(s)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ProbeSummary {
    pub surface: String,
    pub stages: Vec<u32>,
    pub holes: usize,
    pub contradictions: usize,
    pub inconclusive: usize,
    pub hole_measure_total: f64,
    pub gamma: Option<f64>,
    pub cumulative: Option<f64>,
    pub divergence: DivergenceCertificate,
}

/// Probe every stage j ≥ 1 of the bundle with the spec's surface (rebuilt per
/// stage so its dimension matches), carrying holes forward.
pub fn cmd_probe(bundle: &Bundle, spec: &SurfaceSpec) -> Result<(Vec<ProbeCertificate>, ProbeSummary), CliError> {
    let cfg = bundle.config();
    let pcfg = ProbeConfig { ring_depth: cfg.ring_depth, g: cfg.g, c: cfg.c, ..ProbeConfig::default() };
    let mut certs: Vec<ProbeCertificate> = Vec::new();
    let mut holes = Vec::new();
    let recs: Vec<&StageRecord> = bundle.stages.iter().filter(|r| r.j >= 1).collect();
    for rec in &recs {
        let surface = build_surface(spec, rec, cfg)?;
        let c = probe_stage(&surface, &stage_data(rec, cfg), &holes, &pcfg)?;
        holes.extend(c.holes());
        certs.push(c);
    }
    let gamma = certs.iter().filter_map(|c| c.gamma).reduce(f64::min);
    let cumulative = gamma.map(|g| cumulative_bound(certs.len(), g.min(0.999), cfg.g, &cfg.schedule()));
    if let (Some(cb), Some(last)) = (&cumulative, certs.last_mut()) {
        last.cumulative = Some(cb.clone());
    }
    let outcomes = || certs.iter().flat_map(|c| c.squares.iter().flat_map(|s| &s.rings));
    let summary = ProbeSummary {
        surface: certs.first().map_or_else(|| spec.name.clone().unwrap_or_default(), |c| c.surface.clone()),
        stages: recs.iter().map(|r| r.j).collect(),
        holes: holes.len(),
        contradictions: outcomes().filter(|o| matches!(o, RingOutcome::Contradiction(_))).count(),
        inconclusive: outcomes().filter(|o| matches!(o, RingOutcome::Inconclusive { .. })).count(),
        hole_measure_total: certs.iter().map(|c| c.hole_measure_total).sum(),
        gamma,
        cumulative: cumulative.map(|c| c.value()),
        // the divergence arithmetic is about the Hilbert schedule whatever the tower
        divergence: divergence_check(&DeltaSchedule::hilbert(), cfg.g, 5),
    };
    Ok((certs, summary))
}

/// Certificates (one JSON line per stage) followed by the summary line.
pub fn probe_jsonl(certs: &[ProbeCertificate], summary: &ProbeSummary) -> Result<String, CliError> {
    let mut out = String::new();
    for c in certs {
        out += &serde_json::to_string(c)?;
        out.push('\n');
    }
    out += &serde_json::to_string(summary)?;
    out.push('\n');
    Ok(out)
}

pub fn write_probe_output(path: &Path, certs: &[ProbeCertificate], summary: &ProbeSummary) -> Result<(), CliError> {
    std::fs::write(path, probe_jsonl(certs, summary)?)?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rle_round_trip() {
        let set = BTreeSet::from([vec![0, 0], vec![1, 0], vec![4, 4], vec![2, 3]]);
        let rle = encode_rle(&set, 1);
        assert_eq!(rle, "2x1,15x0,1x1,6x0,1x1");
        assert_eq!(decode_rle(&rle, 1).unwrap(), set);
        assert!(matches!(decode_rle("24x1", 1), Err(CliError::Surface(_))));
        assert!(decode_rle("25x2", 1).is_err());
    }

    #[test]
    fn table_surface_is_linear_on_triangles() {
        // φ = (x + 2y, 0) sampled at depth 1 vertices
        let values: Vec<Vec<f64>> =
            (0..36).map(|i| vec![(i % 6) as f64 / 5.0 + 2.0 * (i / 6) as f64 / 5.0, 0.0]).collect();
        let (map, lip) = table_surface(values, 1, 4).unwrap();
        assert!((lip - 5f64.sqrt()).abs() < 1e-12);
        let y = map(&[0.33, 0.71]);
        assert!((y[2] - (0.33 + 1.42)).abs() < 1e-12 && y[3] == 0.0);
        assert!(table_surface(vec![vec![0.0, 0.0]; 35], 1, 4).is_err());
    }
}
