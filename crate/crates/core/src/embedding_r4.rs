//! The tower F_j: X_j → ℝ^{k+2} with a fixed ambient space. Stage j+1 covers
//! the maximal adapted cells of stage j and deforms each one by Φ in the
//! plane orthogonal to the tangent plane of its parent piece.

use std::collections::{BTreeMap, HashMap, HashSet};

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{One, Zero};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::branched_cover::{Deformation, Frame};
use crate::complex_core::{digit_tuples, CellAddress, CellRecord, Role, StageComplex};
use crate::deformation_maps::{search_affine_n, AffineApproximation, DeformError, PsiParameters};
use crate::embedding_hilbert::{cover_all, cover_one};
use crate::embedding_rk::plane_for_stage;
use crate::numeric::{dist, pow5};
use crate::radn::{stage_pieces, Piece, RadialNeighborhood, RadnError};
use crate::schedule::DeltaSchedule;
use crate::stage::{eval_lattice, Stage, StageError, VertexKey};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum TowerError {
    #[error(transparent)]
    Stage(#[from] StageError),
    #[error(transparent)]
    Deform(#[from] DeformError),
    #[error(transparent)]
    Radn(#[from] RadnError),
    #[error("dimension k = {0} is below 2")]
    DimensionTooSmall(usize),
    #[error("no adapted cell within {ceiling} subdivisions of stage {j}")]
    NoAdaptedCell { j: u32, ceiling: u32 },
    #[error("{bound}: measured {measured} against limit {limit}")]
    BoundViolated { bound: &'static str, measured: f64, limit: f64 },
    #[error("stage {requested} requested; builds stop at stage {supported}")]
    StageTooDeep { requested: u32, supported: u32 },
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct TowerStage {
    pub j: u32,
    pub k: usize,
    pub schedule: DeltaSchedule,
    /// Coordinate plane of the newest sites.
    pub plane: Option<(usize, usize)>,
    /// Subdivision level of the newest affine approximation of Ψ.
    pub affine_n: Option<u32>,
    pub stage: Stage,
}

impl TowerStage {
    pub fn zero(k: usize, schedule: &DeltaSchedule) -> TowerStage {
        TowerStage {
            j: 0,
            k,
            schedule: *schedule,
            plane: None,
            affine_n: None,
            stage: Stage::assemble(StageComplex::unit(k), k + 2),
        }
    }

    pub fn ambient_dim(&self) -> usize {
        self.k + 2
    }
}

/// Subdivide the cells selected by `pick` `times` more times.
pub fn refine_where(
    complex: &StageComplex,
    times: u32,
    pick: impl Fn(&CellRecord) -> bool,
    ceiling: usize,
) -> Result<StageComplex, StageError> {
    let per = 5usize.pow(complex.k as u32 * times);
    let count: usize = complex.cells.iter().map(|c| if pick(c) { per } else { 1 }).sum();
    if count > ceiling {
        return Err(StageError::ResourceLimit { count, ceiling });
    }
    let mut cells = Vec::with_capacity(count);
    for c in &complex.cells {
        if pick(c) && times > 0 {
            for a in crate::complex_core::subdivide(&c.address, times).expect("times ≥ 1") {
                cells.push(CellRecord { address: a, ..c.clone() });
            }
        } else {
            cells.push(c.clone());
        }
    }
    Ok(StageComplex { cells, ..complex.clone() })
}

/// Stage 1 from the unit cube: F₁ = F₀∘π + Φ_{δ₁} ⊗ (e_{k+1} ⊕ e_{k+2}), with Φ
/// the certified affine approximation of Ψ. Annulus cells are refined to the
/// approximation's grid.
pub fn build_stage_one(
    k: usize,
    schedule: &DeltaSchedule,
    n_cap: u32,
    ceiling: usize,
) -> Result<(TowerStage, AffineApproximation), TowerError> {
    let delta = schedule.delta(1);
    let approx = search_affine_n(&PsiParameters { delta, i: 0 }, n_cap)?;
    let n = approx.n;
    let plane = plane_for_stage(0, k)?;
    let covered = cover_all(&StageComplex::unit(k), plane, delta, Frame::Coords(k, k + 1), Deformation::Interpolated { n }, ceiling)?;
    let complex = refine_where(&covered, n, |c| c.role == Role::Annulus, ceiling)?;
    let stage = Stage::assemble(complex, k + 2);
    Ok((TowerStage { j: 1, k, schedule: *schedule, plane: Some(plane), affine_n: Some(n), stage }, approx))
}

/// Per-stage certificate of the Lipschitz interval and the sup-move bound.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct StageBounds {
    pub j: u32,
    pub glip: f64,
    pub glip_interval: (f64, f64),
    pub min_singular: f64,
    pub sup_move: f64,
    pub sup_move_limit: f64,
    pub direction_count: usize,
}

/// Values of F_{j-1} ∘ π at the vertices of stage j: younger sites dropped.
pub fn lower_values(lower_sites: usize, upper: &Stage) -> Vec<f64> {
    let sites = &upper.complex.sites[..lower_sites];
    let d = upper.ambient_dim;
    let res = upper.resolution;
    upper
        .vertices
        .iter()
        .flat_map(|key| {
            let down = VertexKey { coords: key.coords.clone(), lift: key.lift.iter().copied().filter(|(s, _)| (*s as usize) < lower_sites).collect() };
            eval_lattice(sites, &down, res, upper.k(), d)
        })
        .collect()
}

/// Number of distinct linear tangent planes of the affine pieces, keyed by
/// their orthogonal projectors rounded to 1e-9.
pub fn direction_count(pieces: &[Piece]) -> usize {
    let mut set: HashSet<Vec<i64>> = HashSet::new();
    for p in pieces {
        let proj = &p.edges * &p.pinv;
        set.insert(proj.iter().map(|x| (x * 1e9).round() as i64).collect());
    }
    set.len()
}

/// Certify glip F_j ∈ [(1+Σδ²)^½/16, 23(1+Σδ²)^½] over affine pieces and
/// the per-step move ‖F_j − F_{j-1}∘π‖ ≤ 56·5^{-(j-1)}·δ_j at vertices.
pub fn certify_stage(tower: &TowerStage, lower_sites: usize) -> Result<StageBounds, TowerError> {
    let s = (1.0 + tower.schedule.partial_sum_sq(tower.j as u64)).sqrt();
    let interval = (s / 16.0, 23.0 * s);
    let (glip, min_singular) = tower.stage.piece_singular_range();
    if glip < interval.0 || glip > interval.1 {
        return Err(TowerError::BoundViolated { bound: "Lipschitz interval", measured: glip, limit: interval.1 });
    }
    let d = tower.ambient_dim();
    let (sup_move, sup_move_limit) = if tower.j == 0 {
        (0.0, 0.0)
    } else {
        let lower = lower_values(lower_sites, &tower.stage);
        let m = tower.stage.coords.chunks(d).zip(lower.chunks(d)).map(|(a, b)| dist(a, b)).fold(0.0, f64::max);
        (m, 56.0 * tower.schedule.delta(tower.j as u64) / pow5(tower.j - 1) as f64)
    };
    if sup_move > sup_move_limit && tower.j > 0 {
        return Err(TowerError::BoundViolated { bound: "sup-move", measured: sup_move, limit: sup_move_limit });
    }
    Ok(StageBounds {
        j: tower.j,
        glip,
        glip_interval: interval,
        min_singular,
        sup_move,
        sup_move_limit,
        direction_count: direction_count(&stage_pieces(&tower.stage)),
    })
}

/// ε_j = 2^{-j}.
pub fn epsilon(j: u32) -> f64 {
    2f64.powi(-(j as i32))
}

/// Run the schedule precondition, then search σ_j for stage j.
pub fn certify_claim_j(
    tower: &TowerStage,
    samples: usize,
    seed: u64,
    e_range: (i32, i32),
) -> Result<(RadialNeighborhood, crate::radn::ClaimCertificate), TowerError> {
    if !tower.schedule.claim_condition_holds() {
        return Err(RadnError::ScheduleRefused(tower.schedule.claim_condition_lhs()).into());
    }
    Ok(crate::radn::find_sigma(&tower.stage, tower.j, epsilon(tower.j), samples, seed, e_range)?)
}

/// Vertex comparison of P_j ∘ F_{j+1} with F_j ∘ π_{j+1,j}.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TowerDiagram {
    pub j: u32,
    pub vertices: usize,
    pub mismatches: usize,
    /// Interior vertices where P_j is undefined.
    pub undefined: usize,
    /// Vertices over ∂[0,1]^k where P_j is undefined. The tube radius
    /// vanishes at the piece boundary while fiber-constant sites for k ≥ 3
    /// reach the cube faces, so these are expected there.
    pub undefined_on_boundary: usize,
    pub max_error: f64,
}

pub fn diagram_check_tower(lower: &TowerStage, upper: &TowerStage, radn: &RadialNeighborhood) -> TowerDiagram {
    let d = upper.ambient_dim();
    let expect = lower_values(lower.stage.complex.sites.len(), &upper.stage);
    let top = pow5(upper.stage.resolution);
    let mut rep = TowerDiagram {
        j: lower.j,
        vertices: upper.stage.vertices.len(),
        mismatches: 0,
        undefined: 0,
        undefined_on_boundary: 0,
        max_error: 0.0,
    };
    for ((v, e), key) in upper.stage.coords.chunks(d).zip(expect.chunks(d)).zip(&upper.stage.vertices) {
        match radn.project(v) {
            Ok(p) => {
                if p.as_slice() != e {
                    rep.mismatches += 1;
                    rep.max_error = rep.max_error.max(dist(&p, e));
                }
            }
            Err(_) if key.coords.iter().any(|c| *c == 0 || *c == top) => rep.undefined_on_boundary += 1,
            Err(_) => rep.undefined += 1,
        }
    }
    rep
}

/// Sampled ratio of the composite P_0 ∘ … ∘ P_{m-1} on members of the top
/// neighbourhood, against the product of (1+ε_t).
pub fn composite_ratio(radns: &[RadialNeighborhood], samples: usize, seed: u64) -> (f64, f64) {
    use rand::Rng;
    let top = radns.last().expect("at least one neighbourhood");
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let bound: f64 = radns.iter().map(|r| 1.0 + epsilon(r.j)).product();
    let apply = |mut p: Vec<f64>| -> Option<Vec<f64>> {
        for r in radns.iter().rev() {
            p = r.project(&p).ok()?;
        }
        Some(p)
    };
    let n = top.pieces.len() as u32;
    let mut worst: f64 = 0.0;
    for _ in 0..samples {
        let a = rng.gen_range(0..n);
        let nb = &top.neighbors[a as usize];
        let b = if nb.is_empty() || rng.gen_bool(0.5) { rng.gen_range(0..n) } else { nb[rng.gen_range(0..nb.len())] };
        let (p, _) = top.sample_member(a, &mut rng);
        let (q, _) = top.sample_member(b, &mut rng);
        let (Some(pp), Some(pq)) = (apply(p.clone()), apply(q.clone())) else { continue };
        let dd = dist(&p, &q);
        if dd > 0.0 {
            worst = worst.max(dist(&pp, &pq) / dd);
        }
    }
    (worst, bound)
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct AdaptedCell {
    pub address: CellAddress,
    pub parent_cell: u32,
    pub piece: u32,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AdaptedSubdivision {
    pub j: u32,
    pub adapted: Vec<AdaptedCell>,
    /// Cells left undeformed at the depth ceiling, with their parent cell.
    pub residual: Vec<(CellAddress, u32)>,
    pub depth_histogram: BTreeMap<u32, usize>,
}

/// 2·inradius of the unit Kuhn k-simplex is 2/(2+(k−1)√2); checks
/// q ≤ that bound exactly.
fn within_simplex_ratio(q: &BigRational, k: usize) -> bool {
    let two = BigRational::from_integer(BigInt::from(2));
    let lhs_free = &two - &two * q;
    if lhs_free < BigRational::zero() {
        return false;
    }
    let km1 = BigRational::from_integer(BigInt::from(k as i64 - 1));
    &two * &km1 * &km1 * q * q <= &lhs_free * &lhs_free
}

/// Size clause of the adapted predicate: inradius(Q) ≤ δ·inradius(PAR),
/// for a subcell t levels below its parent cell.
pub fn size_clause(t: u32, delta: &BigRational, whole_cell: bool, k: usize) -> bool {
    let q = BigRational::new(BigInt::one(), BigInt::from(pow5(t))) / delta;
    if whole_cell {
        q <= BigRational::one()
    } else {
        within_simplex_ratio(&q, k)
    }
}

/// Local integer coordinates of a subcell corner relative to its stage cell.
fn sub_corner_local(cell: &CellAddress, sub: &CellAddress, idx: usize) -> Vec<u64> {
    let t = sub.depth - cell.depth;
    let scale = pow5(t);
    (0..cell.k()).map(|a| sub.corner[a] + ((idx >> a) & 1) as u64 - cell.corner[a] * scale).collect()
}

/// Piece-local coordinates of a base point given by integer offsets s ∈ [0, m]^k.
fn piece_coords(piece: &Piece, cell_mirror: u32, path_axes: &[usize], s: &[u64], m: u64) -> Option<Vec<f64>> {
    let k = s.len();
    if piece.whole_cell {
        return Some(s.iter().map(|x| *x as f64 / m as f64).collect());
    }
    let sm: Vec<u64> = (0..k).map(|a| if (cell_mirror >> a) & 1 == 1 { m - s[a] } else { s[a] }).collect();
    // inside iff s along the path axes is non-increasing
    for w in path_axes.windows(2) {
        if sm[w[0]] < sm[w[1]] {
            return None;
        }
    }
    Some(
        (0..k)
            .map(|i| {
                let next = if i + 1 < k { sm[path_axes[i + 1]] } else { 0 };
                (sm[path_axes[i]] - next) as f64 / m as f64
            })
            .collect(),
    )
}

fn path_axes(piece: &Piece, stage: &Stage, cell: usize) -> Vec<usize> {
    let cv = &stage.cell_vertices[cell];
    let idx: Vec<usize> = piece.vertices.iter().map(|v| cv.iter().position(|w| w == v).expect("piece corner")).collect();
    idx.windows(2).map(|w| (w[0] ^ w[1]).trailing_zeros() as usize).collect()
}

enum Outcome {
    Adapted(AdaptedCell),
    Residual(CellAddress),
}

/// Maximal adapted cells of every stage cell, breadth-first to
/// `depth_ceiling` levels below it. Subcells straddling piece boundaries or
/// too close to them stay residual at the coarsest level possible.
pub fn adapt_subdivide(
    tower: &TowerStage,
    radn: &RadialNeighborhood,
    delta: &BigRational,
    depth_ceiling: u32,
    cell_ceiling: usize,
) -> Result<AdaptedSubdivision, TowerError> {
    let stage = &tower.stage;
    let k = stage.k();
    let mut by_cell: HashMap<usize, Vec<u32>> = HashMap::new();
    for (pi, p) in radn.pieces.iter().enumerate() {
        by_cell.entry(p.cell).or_default().push(pi as u32);
    }
    // smallest depth satisfying the size clause, per piece
    let t_of = |whole: bool| (1..=depth_ceiling).find(|t| size_clause(*t, delta, whole, k));
    let mut estimate = 0usize;
    for pieces in by_cell.values() {
        if let Some(t) = pieces.iter().filter_map(|p| t_of(radn.pieces[*p as usize].whole_cell)).min() {
            estimate = estimate.saturating_add(5usize.saturating_pow(k as u32 * t));
        }
    }
    if estimate > cell_ceiling {
        return Err(StageError::ResourceLimit { count: estimate, ceiling: cell_ceiling }.into());
    }
    let delta_f = crate::numeric::rat_to_f64(delta);
    let mut out = AdaptedSubdivision { j: tower.j, adapted: Vec::new(), residual: Vec::new(), depth_histogram: BTreeMap::new() };
    for (ci, rec) in stage.complex.cells.iter().enumerate() {
        let pieces = &by_cell[&ci];
        if pieces.iter().all(|p| t_of(radn.pieces[*p as usize].whole_cell).is_none()) {
            out.residual.push((rec.address.clone(), ci as u32));
            continue;
        }
        let axes: Vec<Vec<usize>> = pieces.iter().map(|p| path_axes(&radn.pieces[*p as usize], stage, ci)).collect();
        let mut results = Vec::new();
        adapt_rec(&rec.address, &rec.address, rec.mirror, ci as u32, pieces, &axes, radn, delta, delta_f, depth_ceiling, &t_of, &mut results);
        for r in results {
            match r {
                Outcome::Adapted(a) => {
                    *out.depth_histogram.entry(a.address.depth - rec.address.depth).or_default() += 1;
                    out.adapted.push(a);
                }
                Outcome::Residual(c) => out.residual.push((c, ci as u32)),
            }
        }
    }
    if out.adapted.is_empty() {
        return Err(TowerError::NoAdaptedCell { j: tower.j, ceiling: depth_ceiling });
    }
    Ok(out)
}

/// Containment clause: the 23δ·diam F(Q)-neighbourhood of F(Q) lies in the
/// tube of the parent piece. Feet of that neighbourhood stay ρ-close to F(Q),
/// so their boundary distance is at least the corner minimum minus ρ.
fn containment_clause(piece: &Piece, corners: &[Vec<f64>], sigma: f64, delta: f64) -> bool {
    let pts: Vec<Vec<f64>> = corners.iter().map(|c| piece.point(&nalgebra::DVector::from_column_slice(c))).collect();
    let mut diam: f64 = 0.0;
    for a in 0..pts.len() {
        for b in (a + 1)..pts.len() {
            diam = diam.max(dist(&pts[a], &pts[b]));
        }
    }
    let rho = 23.0 * delta * diam;
    let dmin = corners
        .iter()
        .map(|c| piece.boundary_distance(&nalgebra::DVector::from_column_slice(c)))
        .fold(f64::INFINITY, f64::min)
        - rho;
    dmin > 0.0 && 46.0 * piece.diam * (-sigma / dmin).exp() >= rho
}

#[allow(clippy::too_many_arguments)]
fn adapt_rec(
    cell: &CellAddress,
    sub: &CellAddress,
    mirror: u32,
    ci: u32,
    pieces: &[u32],
    axes: &[Vec<usize>],
    radn: &RadialNeighborhood,
    delta: &BigRational,
    delta_f: f64,
    ceiling: u32,
    t_of: &dyn Fn(bool) -> Option<u32>,
    out: &mut Vec<Outcome>,
) {
    let k = cell.k();
    let t = sub.depth - cell.depth;
    let m = pow5(t);
    if t >= 1 {
        for (pi, ax) in pieces.iter().zip(axes) {
            let piece = &radn.pieces[*pi as usize];
            if !t_of(piece.whole_cell).is_some_and(|tb| t >= tb) || !size_clause(t, delta, piece.whole_cell, k) {
                continue;
            }
            let corners: Option<Vec<Vec<f64>>> =
                (0..(1usize << k)).map(|idx| piece_coords(piece, mirror, ax, &sub_corner_local(cell, sub, idx), m)).collect();
            if let Some(corners) = corners {
                if containment_clause(piece, &corners, radn.sigma, delta_f) {
                    out.push(Outcome::Adapted(AdaptedCell { address: sub.clone(), parent_cell: ci, piece: *pi }));
                    return;
                }
            }
        }
    }
    if t == ceiling {
        out.push(Outcome::Residual(sub.clone()));
        return;
    }
    let start = out.len();
    for d in digit_tuples(k) {
        adapt_rec(cell, &sub.child(&d), mirror, ci, pieces, axes, radn, delta, delta_f, ceiling, t_of, out);
    }
    if out[start..].iter().all(|o| matches!(o, Outcome::Residual(_))) {
        out.truncate(start);
        out.push(Outcome::Residual(sub.clone()));
    }
}

/// Generic step: cover each adapted cell with a site of amplitude δ in the
/// normal plane of its parent piece; residual cells stay as they are.
pub fn build_stage_next(
    lower: &TowerStage,
    radn: &RadialNeighborhood,
    sub: &AdaptedSubdivision,
    delta: f64,
    n: u32,
    ceiling: usize,
) -> Result<TowerStage, TowerError> {
    let k = lower.k;
    let plane = plane_for_stage(lower.j as u64, k)?;
    let complex = &lower.stage.complex;
    let per = 5usize.pow(k as u32) * 2 * 5usize.pow(k as u32 * n);
    let count = sub.residual.len() + sub.adapted.len() * per;
    if count > ceiling {
        return Err(StageError::ResourceLimit { count, ceiling }.into());
    }
    let mut sites = complex.sites.clone();
    let mut cells = Vec::with_capacity(count);
    for (addr, parent) in &sub.residual {
        let p = &complex.cells[*parent as usize];
        cells.push(CellRecord { address: addr.clone(), residual: true, ..p.clone() });
    }
    let first_new = cells.len();
    for a in &sub.adapted {
        let p = &complex.cells[a.parent_cell as usize];
        let piece = &radn.pieces[a.piece as usize];
        let frame = Frame::Vectors(piece.normals.column(0).iter().copied().collect(), piece.normals.column(1).iter().copied().collect());
        let rec = CellRecord { address: a.address.clone(), ..p.clone() };
        cover_one(&mut sites, &mut cells, &rec, plane, delta, frame, Deformation::Interpolated { n });
    }
    let mut complex = StageComplex { k, generation: complex.generation + 1, cells, sites };
    // refine the new annulus cells to the approximation grid
    let tail = complex.cells.split_off(first_new);
    let refined = refine_where(&StageComplex { cells: tail, ..complex.clone() }, n, |c| c.role == Role::Annulus, ceiling)?;
    complex.cells.extend(refined.cells);
    let stage = Stage::assemble(complex, k + 2);
    Ok(TowerStage { j: lower.j + 1, k, schedule: lower.schedule, plane: Some(plane), affine_n: Some(n), stage })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::stage::site_value_lattice;

    fn one() -> TowerStage {
        build_stage_one(2, &DeltaSchedule::r4(), 4, 1_000_000).unwrap().0
    }

    #[test]
    fn stage_one_adds_the_deformation_in_fresh_coordinates() {
        let t = one();
        let st = &t.stage;
        assert_eq!(t.affine_n, Some(1));
        // 17 coarse cells plus 16 annulus cells × 25
        assert_eq!(st.cell_count(), 17 + 16 * 25);
        let site = &st.complex.sites[0];
        for (i, key) in st.vertices.iter().enumerate() {
            let v = st.vertex(i as u32);
            let base: Vec<f64> = key.coords.iter().map(|c| *c as f64 / 25.0).collect();
            assert_eq!(&v[..2], base.as_slice());
            let bit = key.lift.first().map(|(_, b)| *b);
            let psi = if bit.is_some() { site_value_lattice(site, &key.coords, st.resolution, bit) } else { [0.0, 0.0] };
            assert_eq!(&v[2..], &psi[..]);
        }
    }

    #[test]
    fn stage_bounds_hold() {
        let t = one();
        let b = certify_stage(&t, 0).unwrap();
        assert!(b.glip >= b.glip_interval.0 && b.glip <= b.glip_interval.1);
        assert!(b.sup_move > 0.0 && b.sup_move <= b.sup_move_limit);
        assert!(b.direction_count > 1 && b.direction_count <= 2 * 16 * 25 + 1);
        let z = certify_stage(&TowerStage::zero(2, &DeltaSchedule::r4()), 0).unwrap();
        assert_eq!((z.glip, z.direction_count), (1.0, 1));
    }

    #[test]
    fn claim_is_refused_for_the_slow_schedule() {
        let t = TowerStage::zero(2, &DeltaSchedule::hilbert());
        assert!(matches!(certify_claim_j(&t, 10, 1, (-1, 1)), Err(TowerError::Radn(RadnError::ScheduleRefused(_)))));
    }

    #[test]
    fn claim_one_and_diagram() {
        let zero = TowerStage::zero(2, &DeltaSchedule::r4());
        let t = one();
        let (r0, c0) = certify_claim_j(&zero, 20_000, 3, (-40, 10)).unwrap();
        let (r1, c1) = certify_claim_j(&t, 100_000, 3, (-40, 10)).unwrap();
        assert!(c0.passed && c1.passed);
        assert!(c1.worst_ratio() <= 1.0 + epsilon(1));
        assert!(c1.max_drift <= 20.0);
        let d = diagram_check_tower(&zero, &t, &r0);
        assert_eq!((d.mismatches, d.undefined), (0, 0));
        let (ratio, bound) = composite_ratio(&[r0, r1], 5000, 9);
        assert!(ratio <= bound);
    }

    #[test]
    fn size_clause_matches_float_oracle() {
        for k in 2..6 {
            let c = 2.0 / (2.0 + (k as f64 - 1.0) * 2f64.sqrt());
            for den in [3i64, 7, 11, 40, 1000] {
                let delta = BigRational::new(BigInt::one(), BigInt::from(den));
                for t in 1..6 {
                    let q = den as f64 / 5f64.powi(t as i32);
                    assert_eq!(size_clause(t, &delta, false, k), q <= c, "k={k} den={den} t={t}");
                    assert_eq!(size_clause(t, &delta, true, k), q <= 1.0);
                }
            }
        }
    }

    fn generic_step() -> (TowerStage, RadialNeighborhood, AdaptedSubdivision, TowerStage) {
        let h = DeltaSchedule::hilbert();
        let zero = TowerStage::zero(2, &h);
        let (r0, _) = crate::radn::find_sigma(&zero.stage, 0, 1.0, 20_000, 7, (-40, 10)).unwrap();
        let sub = adapt_subdivide(&zero, &r0, &h.delta_exact(1), 2, 1_000_000).unwrap();
        let next = build_stage_next(&zero, &r0, &sub, h.delta(1), 1, 1_000_000).unwrap();
        (zero, r0, sub, next)
    }

    #[test]
    fn generic_step_from_the_flat_square() {
        let (zero, r0, sub, next) = generic_step();
        // oracle: depth-2 cells whose corners keep 23δ·diam + margin from the boundary
        let rho = 23.0 / 11.0 * 2f64.sqrt() / 25.0;
        let rows = (0..25).filter(|i| (*i as f64) / 25.0 > rho && 1.0 - (*i as f64 + 1.0) / 25.0 > rho).count();
        assert_eq!(sub.adapted.len(), rows * rows);
        assert_eq!(sub.depth_histogram.get(&2), Some(&(rows * rows)));
        // disjoint interiors and full coverage: volumes add to 1, no nesting
        let mut all: Vec<&CellAddress> = sub.adapted.iter().map(|a| &a.address).chain(sub.residual.iter().map(|r| &r.0)).collect();
        let vol: BigRational = all.iter().map(|a| a.volume()).sum();
        assert_eq!(vol, BigRational::one());
        all.sort_by_key(|a| (a.depth, a.corner.clone()));
        for a in &all {
            for b in &all {
                if a.depth < b.depth {
                    assert_ne!(b.ancestor_corner(a.depth), a.corner);
                }
            }
        }
        for a in &sub.adapted {
            let t = a.address.depth;
            assert!(size_clause(t, &BigRational::new(BigInt::one(), BigInt::from(11)), true, 2));
        }
        let b = certify_stage(&next, 0).unwrap();
        let (one_h, _) = build_stage_one(2, &DeltaSchedule::hilbert(), 4, 1_000_000).unwrap();
        assert_eq!(b.direction_count, certify_stage(&one_h, 0).unwrap().direction_count);
        let d = diagram_check_tower(&zero, &next, &r0);
        assert_eq!((d.mismatches, d.undefined), (0, 0));
        assert_eq!(next.stage.complex.total_mass(), BigRational::one());
    }

    #[test]
    fn deeper_stages_stop_with_explicit_errors() {
        let t = one();
        let r1 = RadialNeighborhood::build(&t.stage, 1, 0.5);
        let delta = DeltaSchedule::r4().delta_exact(2);
        assert_eq!(adapt_subdivide(&t, &r1, &delta, 8, 1_000_000).unwrap_err(), TowerError::NoAdaptedCell { j: 1, ceiling: 8 });
        let err = adapt_subdivide(&t, &r1, &delta, 14, 1_000_000).unwrap_err();
        assert!(matches!(err, TowerError::Stage(StageError::ResourceLimit { .. })), "{err:?}");
    }
}
