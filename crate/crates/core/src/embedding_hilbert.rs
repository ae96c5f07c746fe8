//! The tower F_n: X_n → ℝ^{2n+2}: every square of generation g-1 is covered
//! and deformed by Ψ with amplitude δ_g in the fresh coordinates 2g+1, 2g+2.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::branched_cover::{CoverSite, Deformation, Frame};
use crate::complex_core::{annulus_mirror, child_role, digit_tuples, subdivide, CellRecord, CoverStep, Role, StageComplex};
use crate::numeric::{dist, pow5};
use crate::schedule::DeltaSchedule;
use crate::stage::{eval_lattice, Stage, StageError, VertexKey};

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct HilbertStage {
    pub n: u32,
    pub ambient_dim: usize,
    pub schedule: DeltaSchedule,
    pub stage: Stage,
}

/// Add a site covering `cell` and push its children (annulus children once
/// per sheet, one weight halving each).
pub fn cover_one(
    sites: &mut Vec<CoverSite>,
    cells: &mut Vec<CellRecord>,
    cell: &CellRecord,
    plane: (usize, usize),
    delta: f64,
    frame: Frame,
    deformation: Deformation,
) {
    let id = sites.len() as u32;
    let mut context: Vec<(u32, bool)> =
        cell.address.branch_word.iter().filter_map(|s| s.sheet.map(|b| (s.site, b))).collect();
    context.sort();
    sites.push(CoverSite {
        id,
        depth: cell.address.depth,
        corner: cell.address.corner.clone(),
        plane,
        delta,
        frame,
        deformation,
        context,
    });
    for d in &digit_tuples(cell.address.k()) {
        let role = child_role(d, plane);
        let mut child = cell.address.child(d);
        let sheets: &[Option<bool>] = if role == Role::Annulus { &[Some(false), Some(true)] } else { &[None] };
        for &sheet in sheets {
            child.branch_word.truncate(cell.address.branch_word.len());
            child.branch_word.push(CoverStep { site: id, sheet });
            cells.push(CellRecord {
                address: child.clone(),
                weight_exp: cell.weight_exp + sheet.is_some() as u32,
                role,
                residual: false,
                mirror: if role == Role::Annulus { annulus_mirror(d, plane) } else { 0 },
            });
        }
    }
}

/// Cover every cell of the current generation once.
pub fn cover_all(
    complex: &StageComplex,
    plane: (usize, usize),
    delta: f64,
    frame: Frame,
    deformation: Deformation,
    ceiling: usize,
) -> Result<StageComplex, StageError> {
    let k = complex.k;
    let per = (5usize.pow(k as u32)) * 33 / 25;
    let count = complex.cells.len() * per;
    if count > ceiling {
        return Err(StageError::ResourceLimit { count, ceiling });
    }
    let mut sites = complex.sites.clone();
    let mut cells = Vec::with_capacity(count);
    for cell in &complex.cells {
        cover_one(&mut sites, &mut cells, cell, plane, delta, frame.clone(), deformation);
    }
    Ok(StageComplex { k, generation: complex.generation + 1, cells, sites })
}

/// Subdivide every cell `times` more levels, keeping sheets and weights.
pub fn refine_cells(complex: &StageComplex, times: u32, ceiling: usize) -> Result<StageComplex, StageError> {
    if times == 0 {
        return Ok(complex.clone());
    }
    let count = complex.cells.len() * 5usize.pow(complex.k as u32 * times);
    if count > ceiling {
        return Err(StageError::ResourceLimit { count, ceiling });
    }
    let mut cells = Vec::with_capacity(count);
    for c in &complex.cells {
        for a in subdivide(&c.address, times).expect("times ≥ 1") {
            cells.push(CellRecord { address: a, ..c.clone() });
        }
    }
    Ok(StageComplex { cells, ..complex.clone() })
}

pub fn build_complex_hilbert(n: u32, schedule: &DeltaSchedule, ceiling: usize) -> Result<StageComplex, StageError> {
    let mut complex = StageComplex::unit(2);
    for g in 1..=n {
        let frame = Frame::Coords(2 * g as usize, 2 * g as usize + 1);
        complex = cover_all(&complex, (0, 1), schedule.delta(g as u64), frame, Deformation::Exact, ceiling)?;
    }
    Ok(complex)
}

/// Stage n of the tower. The mesh cells are the generation-n cells
/// subdivided `refine` more times; at refine = 0 every lattice point of the
/// newest annuli sits on an annulus boundary, so the newest deformation is
/// invisible at vertices.
pub fn build_stage_hilbert(n: u32, schedule: &DeltaSchedule, refine: u32, ceiling: usize) -> Result<HilbertStage, StageError> {
    let complex = refine_cells(&build_complex_hilbert(n, schedule, ceiling)?, refine, ceiling)?;
    let ambient_dim = 2 * n as usize + 2;
    Ok(HilbertStage { n, ambient_dim, schedule: *schedule, stage: Stage::assemble(complex, ambient_dim) })
}

/// Coordinate truncation P_i applied to the vertex coordinates of a stage.
pub fn project_hilbert(hi: &HilbertStage, i: u32) -> Result<Vec<f64>, StageError> {
    if i > hi.n {
        return Err(StageError::StageMissing { requested: i, built: hi.n });
    }
    let keep = 2 * i as usize + 2;
    Ok(hi.stage.coords.chunks(hi.ambient_dim).flat_map(|c| c[..keep].to_vec()).collect())
}

/// Outcome of comparing P_i ∘ F_j with F_i ∘ π_{j,i} at every vertex of stage j.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DiagramReport {
    pub i: u32,
    pub j: u32,
    pub vertices: usize,
    pub max_error: f64,
    pub mismatches: usize,
}

/// Vertex-exact diagram check. Sites of stage i keep their ids in stage j, so
/// π_{j,i} acts on lifts by dropping the younger sites.
pub fn diagram_check(lower: &HilbertStage, upper: &HilbertStage) -> DiagramReport {
    let dim_i = lower.ambient_dim;
    let n_sites = lower.stage.complex.sites.len() as u32;
    let res = upper.stage.resolution;
    let mut max_error: f64 = 0.0;
    let mut mismatches = 0;
    let projected = project_hilbert(upper, lower.n).expect("i ≤ j");
    for (vi, key) in upper.stage.vertices.iter().enumerate() {
        let down = VertexKey { coords: key.coords.clone(), lift: key.lift.iter().copied().filter(|(s, _)| *s < n_sites).collect() };
        let fi = eval_lattice(&lower.stage.complex.sites, &down, res, 2, dim_i);
        let pj = &projected[vi * dim_i..(vi + 1) * dim_i];
        if fi.as_slice() != pj {
            mismatches += 1;
            max_error = max_error.max(dist(&fi, pj));
        }
    }
    DiagramReport { i: lower.n, j: upper.n, vertices: upper.stage.vertices.len(), max_error, mismatches }
}

/// max over vertices of ‖F_n − F_{n-1}∘π‖, and the constant C in C·δ_n·5^{-n}.
pub fn sup_move(hi: &HilbertStage) -> (f64, f64) {
    if hi.n == 0 {
        return (0.0, 0.0);
    }
    let (a, b) = (2 * hi.n as usize, 2 * hi.n as usize + 1);
    let m = hi
        .stage
        .coords
        .chunks(hi.ambient_dim)
        .map(|c| (c[a] * c[a] + c[b] * c[b]).sqrt())
        .fold(0.0, f64::max);
    let scale = hi.schedule.delta(hi.n as u64) / pow5(hi.n) as f64;
    (m, m / scale)
}

/// Injectivity degradation: min over sampled base points and pairs of lifts of
/// ‖F(p̃₁) − F(p̃₂)‖ / d(p̃₁, p̃₂), with d the path length through the
/// collapsed boundary of the first site where the lifts differ.
pub fn injectivity_ratio(stage: &Stage, samples: usize, seed: u64) -> Option<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut best: Option<f64> = None;
    for _ in 0..samples {
        let x: Vec<f64> = (0..stage.k()).map(|_| rng.gen_range(0.0..1.0)).collect();
        let lifts = stage.lifts_at(&x);
        for a in 0..lifts.len() {
            for b in (a + 1)..lifts.len() {
                let (la, lb) = (&lifts[a], &lifts[b]);
                let Some(&(sid, _)) = la.iter().zip(lb.iter()).find(|(p, q)| p != q).map(|(p, _)| p) else {
                    continue;
                };
                let site = &stage.complex.sites[sid as usize];
                let (xi, eta, _) = site.local_plane(&x);
                let linf = (5.0 * xi - 2.5).abs().max((5.0 * eta - 2.5).abs());
                let gap = (linf - 0.5).min(1.5 - linf) * site.side() / 5.0;
                let d = 2.0 * gap;
                let fa = stage.eval_point(&x, la);
                let fb = stage.eval_point(&x, lb);
                let r = dist(&fa, &fb) / d;
                best = Some(best.map_or(r, |v: f64| v.min(r)));
            }
        }
    }
    best
}
