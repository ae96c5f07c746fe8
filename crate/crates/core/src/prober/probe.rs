//! Ring-by-ring hole search over the newest squares of a stage, and the
//! sheet-tracking walk when a surface meets every cell of a ring.

use std::collections::BTreeMap;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::arith::{choose_c, compute_in, cumulative_bound, CumulativeBound};
use super::surface::{Patch, ProbeSurface};
use crate::branched_cover::{chi, crosses_cut, lift_angle, polar, CoverSite};
use crate::complex_core::{partition_annuli, CellAddress, ComplexError};
use crate::deformation_maps::{fiber_gap_lower, phi_unit, sample_psi_lipschitz, PsiParameters};
use crate::numeric::{dist, norm, pow5};
use crate::schedule::DeltaSchedule;
use crate::stage::{Lift, Stage};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ProbeError {
    #[error("surface map returned {got} coordinates at {at:?}, expected {expected} finite values")]
    Evaluation { at: Vec<f64>, got: usize, expected: usize },
    #[error("surface lives in dimension {surface}, stage in {stage}")]
    DimensionMismatch { surface: usize, stage: usize },
    #[error("rings need a planar base, got k = {0}")]
    NotPlanar(usize),
    #[error(transparent)]
    Complex(#[from] ComplexError),
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ProbeConfig {
    /// Ring cells sit this many levels below the square.
    pub ring_depth: u32,
    /// Sample grids per cell side, tried in order until a cell is decided.
    pub grids: Vec<usize>,
    /// A sample within hit_tol·(1 + |Φ(x)|) of the stage image is a hit.
    /// Kept far below the fiber scale δ·5^{-n} of the flattest tower.
    pub hit_tol: f64,
    /// Grid used to locate the witness pair near the jump edge.
    pub witness_grid: usize,
    /// G in the k_j recursion.
    pub g: u32,
    /// Overrides the formula value of c.
    pub c: Option<f64>,
}

impl Default for ProbeConfig {
    fn default() -> Self {
        ProbeConfig { ring_depth: 2, grids: vec![4, 8, 16, 32, 64], hit_tol: 1e-14, witness_grid: 64, g: 10, c: None }
    }
}

/// A stage together with the constants the probe needs.
#[derive(Clone, Copy, Debug)]
pub struct StageData<'a> {
    pub stage: &'a Stage,
    /// Generation n of the newest squares' deformation.
    pub n: u32,
    pub delta: f64,
    pub glip_f: f64,
    /// Lipschitz constant of F − (x, 0), on each sheet.
    pub glip_fiber: f64,
    /// Affine level N of the ℝ⁴ construction, 0 for the Hilbert tower.
    pub affine_n: u32,
}

/// Fiber Lipschitz bound for a Hilbert stage. Generations deform orthogonal
/// coordinate pairs, so |DF v|² = |v|² + Σ_g |DΨ_g v|² and the fiber part is
/// bounded by (Σ L_g²)^½ with L_g the sampled Lipschitz constant of Ψ at δ_g
/// plus 5%. glip F is then (1 + that²)^½.
pub fn hilbert_glip_fiber(schedule: &DeltaSchedule, n: u32) -> f64 {
    let s: f64 = (1..=n as u64)
        .map(|g| {
            let l = sample_psi_lipschitz(&PsiParameters { delta: schedule.delta(g), i: 0 }, 20_000, g);
            (1.05 * l).powi(2)
        })
        .sum();
    s.sqrt()
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub enum CellHit {
    Hit { x: [f64; 2], lift: Lift, distance: f64 },
    /// Certified: every domain point of the cell stays `margin` away.
    Miss { min_distance: f64, margin: f64, grid: usize },
    Undecided { min_distance: f64, bound: f64 },
}

fn eval_surface(surface: &ProbeSurface, x: &[f64]) -> Result<Vec<f64>, ProbeError> {
    let y = (surface.map)(x);
    if y.len() != surface.ambient_dim || y.iter().any(|v| !v.is_finite()) {
        return Err(ProbeError::Evaluation { at: x.to_vec(), got: y.len(), expected: surface.ambient_dim });
    }
    Ok(y)
}

fn grid_points(p: &Patch, m: usize) -> impl Iterator<Item = [f64; 2]> + '_ {
    (0..m * m).map(move |i| {
        let (a, b) = ((i % m) as f64 + 0.5, (i / m) as f64 + 0.5);
        [p.lo[0] + a * p.side / m as f64, p.lo[1] + b * p.side / m as f64]
    })
}

/// Closest stage point over `x`: (distance, lift).
fn nearest_lift(stage: &Stage, phi: &[f64], x: &[f64]) -> (f64, Lift) {
    stage
        .lifts_at(x)
        .into_iter()
        .map(|l| (dist(phi, &stage.eval_point(x, &l)), l))
        .min_by(|a, b| a.0.total_cmp(&b.0))
        .expect("every base point has a lift")
}

/// Decide whether the surface meets the stage image over a cell. Surface and
/// stage are graphs over the base, so Φ − F only has fiber components and is
/// (Lip φ + glip fiber)-Lipschitz on a sheet. A miss is certified when
/// min distance − that·ρ > 0 on every patch, ρ the covering radius of the
/// sample grid.
pub fn test_cell(surface: &ProbeSurface, data: &StageData, cell: &CellAddress, cfg: &ProbeConfig) -> Result<CellHit, ProbeError> {
    let patches = surface.domain.patches(cell);
    if patches.is_empty() {
        return Ok(CellHit::Miss { min_distance: f64::INFINITY, margin: f64::INFINITY, grid: 0 });
    }
    let lip = surface.fiber_lipschitz + data.glip_fiber;
    let mut last = (f64::INFINITY, 0.0);
    for &m in &cfg.grids {
        let mut margin = f64::INFINITY;
        let mut overall = f64::INFINITY;
        for p in &patches {
            let rho = p.side * std::f64::consts::SQRT_2 / (2 * m) as f64;
            let mut pmin = f64::INFINITY;
            for x in grid_points(p, m) {
                let phi = eval_surface(surface, &x)?;
                let (d, lift) = nearest_lift(data.stage, &phi, &x);
                if d <= cfg.hit_tol * (1.0 + norm(&phi)) {
                    return Ok(CellHit::Hit { x, lift, distance: d });
                }
                pmin = pmin.min(d);
            }
            margin = margin.min(pmin - lip * rho);
            overall = overall.min(pmin);
        }
        if margin > 0.0 {
            return Ok(CellHit::Miss { min_distance: overall, margin, grid: m });
        }
        last = (overall, overall - margin);
    }
    Ok(CellHit::Undecided { min_distance: last.0, bound: last.1 })
}

/// One step of the walk between consecutive ring cells.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct WalkStep {
    pub from: usize,
    pub to: usize,
    pub base_step: f64,
    /// |φ(p_α) − φ(p_{α+1})|.
    pub fiber_step: f64,
    /// Lip φ·|p_α − p_{α+1}|.
    pub lipschitz_bound: f64,
    pub crosses_cut: bool,
    /// Sheet bit of the square's site at p_{α+1} equals the continuation of
    /// the bit at p_α.
    pub continued: bool,
    /// (Lip φ + glip fiber)·|Δp| is below the fiber gap at p_α, so a
    /// Lipschitz surface has to stay on the continued sheet.
    pub sheet_forced: bool,
}

/// A pair of hit points straddling the edge where the walk leaves the
/// continued sheet.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Witness {
    pub square: CellAddress,
    pub site: u32,
    pub jump_step: usize,
    pub p: [f64; 2],
    pub q: [f64; 2],
    pub lift_p: Lift,
    pub lift_q: Lift,
    pub base_distance: f64,
    /// 5^{-depth-3} for a square of the given depth.
    pub base_limit: f64,
    /// Lifted angles in half-turns, in [0, 4).
    pub t_p: f64,
    pub t_q: f64,
    pub chi_p: bool,
    pub chi_q: bool,
    /// |φ(p) − φ(q)|.
    pub jump: f64,
    /// Lip φ·|p − q|.
    pub lipschitz_bound: f64,
    /// |F(p, b) − F(p, ¬b)| from the stage, and the closed form when the
    /// site is not interpolated.
    pub fiber_gap: f64,
    pub fiber_gap_closed: Option<f64>,
    pub glip_fiber: f64,
}

impl Witness {
    pub fn circular_gap(&self) -> f64 {
        let d = (self.t_p - self.t_q).abs();
        d.min(4.0 - d)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Contradiction {
    pub steps: Vec<WalkStep>,
    pub witness: Witness,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub enum RingOutcome {
    Hole { index: usize, cell: CellAddress, min_distance: f64, margin: f64 },
    /// Every missed cell lies inside a hole of an earlier stage.
    AlreadyHoled { missed: usize },
    Contradiction(Box<Contradiction>),
    /// Sampling could not decide some cell, or no witness pair was found.
    Inconclusive { reason: String },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SquareReport {
    pub square: CellAddress,
    pub rings: Vec<RingOutcome>,
    pub hole_measure: f64,
    /// hole_measure/(δ_n·|Q|) when every ring holes.
    pub gamma: Option<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ProbeConstants {
    pub c: f64,
    pub i_n: i64,
    pub g: u32,
    pub ring_depth: u32,
    pub lipschitz: f64,
    pub fiber_lipschitz: f64,
    pub glip_f: f64,
    pub glip_fiber: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ProbeCertificate {
    pub surface: String,
    pub n: u32,
    pub delta: f64,
    pub squares: Vec<SquareReport>,
    pub hole_measure_total: f64,
    /// Least γ over squares whose rings all holed.
    pub gamma: Option<f64>,
    pub constants: ProbeConstants,
    /// Sampled Lipschitz ratios of Φ and φ.
    pub sampled_lipschitz: (f64, f64),
    pub lipschitz_violated: bool,
    pub cumulative: Option<CumulativeBound>,
}

impl ProbeCertificate {
    pub fn holes(&self) -> Vec<CellAddress> {
        self.squares
            .iter()
            .flat_map(|s| &s.rings)
            .filter_map(|r| match r {
                RingOutcome::Hole { cell, .. } => Some(cell.clone()),
                _ => None,
            })
            .collect()
    }

    pub fn contradictions(&self) -> Vec<&Contradiction> {
        self.squares
            .iter()
            .flat_map(|s| &s.rings)
            .filter_map(|r| match r {
                RingOutcome::Contradiction(c) => Some(c.as_ref()),
                _ => None,
            })
            .collect()
    }
}

/// Base squares of the deepest sites.
pub fn newest_squares(stage: &Stage) -> Vec<CellAddress> {
    let Some(depth) = stage.complex.sites.iter().map(|s| s.depth).max() else {
        return Vec::new();
    };
    let mut seen = BTreeMap::new();
    for s in stage.complex.sites.iter().filter(|s| s.depth == depth) {
        seen.entry(s.corner.clone()).or_insert(CellAddress { root_id: 0, depth, corner: s.corner.clone(), branch_word: Vec::new() });
    }
    seen.into_values().collect()
}

fn annulus_coords(site: &CoverSite, x: &[f64]) -> [f64; 2] {
    let (xi, eta, _) = site.local_plane(x);
    [5.0 * xi - 2.5, 5.0 * eta - 2.5]
}

/// The lift entry for the site over `square`, if the lift passes through one.
fn square_entry(stage: &Stage, square: &CellAddress, lift: &Lift) -> Option<(u32, bool)> {
    lift.iter().copied().find(|(sid, _)| {
        let s = &stage.complex.sites[*sid as usize];
        s.depth == square.depth && s.corner == square.corner
    })
}

fn flip(lift: &Lift, sid: u32) -> Lift {
    lift.iter().map(|&(s, b)| if s == sid { (s, !b) } else { (s, b) }).collect()
}

/// Hits of the surface on a sample grid of a cell.
fn grid_hits(surface: &ProbeSurface, data: &StageData, cell: &CellAddress, m: usize, tol: f64) -> Result<Vec<([f64; 2], Lift)>, ProbeError> {
    let mut out = Vec::new();
    for p in surface.domain.patches(cell) {
        for x in grid_points(&p, m) {
            let phi = eval_surface(surface, &x)?;
            let (d, lift) = nearest_lift(data.stage, &phi, &x);
            if d <= tol * (1.0 + norm(&phi)) {
                out.push((x, lift));
            }
        }
    }
    Ok(out)
}

fn build_witness(
    surface: &ProbeSurface,
    data: &StageData,
    square: &CellAddress,
    cells: (&CellAddress, &CellAddress),
    jump_step: usize,
    cfg: &ProbeConfig,
) -> Result<Option<Witness>, ProbeError> {
    let a = grid_hits(surface, data, cells.0, cfg.witness_grid, cfg.hit_tol)?;
    let b = grid_hits(surface, data, cells.1, cfg.witness_grid, cfg.hit_tol)?;
    let mut best: Option<(f64, usize, usize)> = None;
    for (i, (p, _)) in a.iter().enumerate() {
        for (j, (q, _)) in b.iter().enumerate() {
            let d = dist(p, q);
            if best.is_none_or(|(bd, _, _)| d < bd) {
                best = Some((d, i, j));
            }
        }
    }
    let Some((base_distance, i, j)) = best else { return Ok(None) };
    let ((p, lift_p), (q, lift_q)) = (a[i].clone(), b[j].clone());
    let (Some((sid, bp)), Some((_, bq))) = (square_entry(data.stage, square, &lift_p), square_entry(data.stage, square, &lift_q)) else {
        return Ok(None);
    };
    let site = &data.stage.complex.sites[sid as usize];
    let (up, uq) = (annulus_coords(site, &p), annulus_coords(site, &q));
    let (Ok((rp, tp)), Ok((_, tq))) = (polar(up[0], up[1]), polar(uq[0], uq[1])) else {
        return Ok(None);
    };
    let (t_p, t_q) = (lift_angle(tp, bp), lift_angle(tq, bq));
    let fp = data.stage.eval_point(&p, &lift_p);
    let fiber_gap = dist(&fp, &data.stage.eval_point(&p, &flip(&lift_p, sid)));
    let fiber_gap_closed = match site.deformation {
        crate::branched_cover::Deformation::Exact => {
            fiber_gap_lower(tp, site.delta).ok().map(|g| site.side() / 5.0 * phi_unit(&rp) * g)
        }
        _ => None,
    };
    Ok(Some(Witness {
        square: square.clone(),
        site: sid,
        jump_step,
        p,
        q,
        lift_p,
        lift_q,
        base_distance,
        base_limit: 1.0 / pow5(square.depth + 3) as f64,
        t_p,
        t_q,
        chi_p: chi(&t_p),
        chi_q: chi(&t_q),
        jump: dist(&eval_surface(surface, &p)?[2..], &eval_surface(surface, &q)?[2..]),
        lipschitz_bound: surface.fiber_lipschitz * base_distance,
        fiber_gap,
        fiber_gap_closed,
        glip_fiber: data.glip_fiber,
    }))
}

/// Re-check a witness against the stage and the surface. Returns the list of
/// failed conditions; empty means the witness stands.
pub fn verify_witness(w: &Witness, surface: &ProbeSurface, stage: &Stage) -> Vec<String> {
    let mut bad = Vec::new();
    let mut check = |ok: bool, what: &str| {
        if !ok {
            bad.push(what.to_string());
        }
    };
    let base = dist(&w.p, &w.q);
    check((base - w.base_distance).abs() <= 1e-15, "base distance");
    check(base <= w.base_limit, "base distance within 5^{-depth-3}");
    let (fp, fq) = (stage.eval_point(&w.p, &w.lift_p), stage.eval_point(&w.q, &w.lift_q));
    let (sp, sq) = ((surface.map)(&w.p), (surface.map)(&w.q));
    check(dist(&fp, &sp) <= 1e-12 * (1.0 + norm(&sp)), "p is a hit");
    check(dist(&fq, &sq) <= 1e-12 * (1.0 + norm(&sq)), "q is a hit");
    let jump = dist(&sp[2..], &sq[2..]);
    check(jump > surface.fiber_lipschitz * base, "jump exceeds Lip φ·|p − q|");
    let gap = dist(&fp, &stage.eval_point(&w.p, &flip(&w.lift_p, w.site)));
    check(jump >= gap - w.glip_fiber * base, "jump at least the fiber gap less glip fiber·|p − q|");
    if let Some(g) = w.fiber_gap_closed {
        check((g - gap).abs() <= 1e-12, "closed-form fiber gap");
    }
    check(w.circular_gap() >= 1.0, "lifted angles a half-turn apart");
    let site = &stage.complex.sites[w.site as usize];
    let crossing = crosses_cut(annulus_coords(site, &w.p), annulus_coords(site, &w.q));
    check((w.chi_p == w.chi_q) == crossing, "χ labels agree exactly across the cut");
    bad
}

/// Probe one ring. `earlier` holds holes from coarser stages.
pub fn probe_annulus(
    surface: &ProbeSurface,
    data: &StageData,
    square: &CellAddress,
    ring: &[CellAddress],
    earlier: &[CellAddress],
    cfg: &ProbeConfig,
) -> Result<RingOutcome, ProbeError> {
    let mut hits = Vec::with_capacity(ring.len());
    let (mut missed, mut undecided) = (0, 0);
    for (index, cell) in ring.iter().enumerate() {
        match test_cell(surface, data, cell, cfg)? {
            CellHit::Miss { min_distance, margin, .. } => {
                if earlier.iter().any(|h| cell.base_within(h)) {
                    missed += 1;
                } else {
                    return Ok(RingOutcome::Hole { index, cell: cell.clone(), min_distance, margin });
                }
            }
            CellHit::Undecided { .. } => undecided += 1,
            CellHit::Hit { x, lift, .. } => hits.push((x, lift)),
        }
    }
    if missed > 0 {
        return Ok(RingOutcome::AlreadyHoled { missed });
    }
    if undecided > 0 {
        return Ok(RingOutcome::Inconclusive { reason: format!("{undecided} undecided cells") });
    }
    let Some(sid) = hits.iter().find_map(|(_, l)| square_entry(data.stage, square, l).map(|e| e.0)) else {
        return Ok(RingOutcome::Inconclusive { reason: "no hit on the square's cover".into() });
    };
    let site = &data.stage.complex.sites[sid as usize];
    let lip = surface.fiber_lipschitz + data.glip_fiber;
    let t = hits.len();
    let mut steps = Vec::with_capacity(t);
    for a in 0..t {
        let b = (a + 1) % t;
        let ((p, lp), (q, lq)) = (&hits[a], &hits[b]);
        let (fp, fq) = (eval_surface(surface, p)?, eval_surface(surface, q)?);
        let base_step = dist(p, q);
        let cross = crosses_cut(annulus_coords(site, p), annulus_coords(site, q));
        let bits = (square_entry(data.stage, square, lp), square_entry(data.stage, square, lq));
        let continued = matches!(bits, (Some((_, x)), Some((_, y))) if (x ^ cross) == y);
        let gap = match bits.0 {
            Some((s, _)) => dist(&data.stage.eval_point(p, lp), &data.stage.eval_point(p, &flip(lp, s))),
            None => 0.0,
        };
        steps.push(WalkStep {
            from: a,
            to: b,
            base_step,
            fiber_step: dist(&fp[2..], &fq[2..]),
            lipschitz_bound: surface.fiber_lipschitz * base_step,
            crosses_cut: cross,
            continued,
            sheet_forced: lip * base_step < gap,
        });
    }
    let Some(jump_step) = steps.iter().position(|s| !s.continued) else {
        return Ok(RingOutcome::Inconclusive { reason: "walk stayed on one continued sheet".into() });
    };
    let cells = (&ring[jump_step], &ring[(jump_step + 1) % t]);
    match build_witness(surface, data, square, cells, jump_step, cfg)? {
        Some(witness) if verify_witness(&witness, surface, data.stage).is_empty() => {
            Ok(RingOutcome::Contradiction(Box::new(Contradiction { steps, witness })))
        }
        Some(witness) => Ok(RingOutcome::Inconclusive {
            reason: format!("witness failed: {:?}", verify_witness(&witness, surface, data.stage)),
        }),
        None => Ok(RingOutcome::Inconclusive { reason: "no witness pair".into() }),
    }
}

/// Probe every ring of every newest square. Rings run in parallel; results
/// keep square and ring order.
pub fn probe_stage(
    surface: &ProbeSurface,
    data: &StageData,
    earlier: &[CellAddress],
    cfg: &ProbeConfig,
) -> Result<ProbeCertificate, ProbeError> {
    if data.stage.k() != 2 {
        return Err(ProbeError::NotPlanar(data.stage.k()));
    }
    if surface.ambient_dim != data.stage.ambient_dim {
        return Err(ProbeError::DimensionMismatch { surface: surface.ambient_dim, stage: data.stage.ambient_dim });
    }
    let squares = newest_squares(data.stage);
    let jobs: Vec<(usize, Vec<CellAddress>)> = squares
        .iter()
        .enumerate()
        .map(|(i, q)| Ok(partition_annuli(q, cfg.ring_depth)?.into_iter().map(move |r| (i, r.cells))))
        .collect::<Result<Vec<_>, ProbeError>>()?
        .into_iter()
        .flatten()
        .collect();
    let outcomes: Vec<RingOutcome> = jobs
        .par_iter()
        .map(|(i, cells)| probe_annulus(surface, data, &squares[*i], cells, earlier, cfg))
        .collect::<Result<_, _>>()?;
    let mut reports: Vec<SquareReport> =
        squares.iter().map(|q| SquareReport { square: q.clone(), rings: Vec::new(), hole_measure: 0.0, gamma: None }).collect();
    for ((i, _), o) in jobs.iter().zip(outcomes) {
        if let RingOutcome::Hole { cell, .. } = &o {
            reports[*i].hole_measure += 1.0 / (pow5(cell.depth) as f64).powi(2);
        }
        reports[*i].rings.push(o);
    }
    for r in &mut reports {
        if r.rings.iter().all(|o| matches!(o, RingOutcome::Hole { .. })) {
            let area = 1.0 / (pow5(r.square.depth) as f64).powi(2);
            r.gamma = Some(r.hole_measure / (data.delta * area));
        }
    }
    let gamma = reports.iter().filter_map(|r| r.gamma).reduce(f64::min);
    let c = cfg.c.unwrap_or_else(|| choose_c(surface.lipschitz, data.glip_f));
    let sampled = surface.sampled_lipschitz(2000, 7);
    Ok(ProbeCertificate {
        surface: surface.name.clone(),
        n: data.n,
        delta: data.delta,
        hole_measure_total: reports.iter().map(|r| r.hole_measure).sum(),
        squares: reports,
        gamma,
        constants: ProbeConstants {
            c,
            i_n: compute_in(data.n, c, data.delta, data.affine_n),
            g: cfg.g,
            ring_depth: cfg.ring_depth,
            lipschitz: surface.lipschitz,
            fiber_lipschitz: surface.fiber_lipschitz,
            glip_f: data.glip_f,
            glip_fiber: data.glip_fiber,
        },
        sampled_lipschitz: sampled,
        lipschitz_violated: sampled.0 > surface.lipschitz * (1.0 + 1e-12)
            || sampled.1 > surface.fiber_lipschitz * (1.0 + 1e-12),
        cumulative: None,
    })
}

/// Probe stages in order, feeding each stage the holes found so far, and
/// attach the cumulative product with the least realized γ.
pub fn probe_tower(
    surface: &ProbeSurface,
    stages: &[StageData],
    schedule: &DeltaSchedule,
    cfg: &ProbeConfig,
) -> Result<Vec<ProbeCertificate>, ProbeError> {
    let mut holes = Vec::new();
    let mut certs = Vec::new();
    for data in stages {
        let cert = probe_stage(surface, data, &holes, cfg)?;
        holes.extend(cert.holes());
        certs.push(cert);
    }
    let gamma = certs.iter().filter_map(|c| c.gamma).reduce(f64::min);
    if let (Some(g), Some(last)) = (gamma, certs.last_mut()) {
        last.cumulative = Some(cumulative_bound(stages.len(), g.min(0.999), cfg.g, schedule));
    }
    Ok(certs)
}
