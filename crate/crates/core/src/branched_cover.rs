//! Double covers of middle annuli: cover sites, the cut σ, the ring chart
//! (r, T) with T = θ/π, vertex lifting with collapsed boundary fibers, and the
//! sheet-separation check.

use num_rational::Ratio;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::complex_core::{check_plane, classify_children, AnnulusDecomposition, CellAddress, ComplexError};
use crate::numeric::{frac, max_s, pow5, Scalar};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum CoverError {
    #[error("point lies on the cut σ; its angle is undefined without a side")]
    OnCut,
    #[error("point is outside the open annulus")]
    NotInAnnulus,
    #[error("edge does not join the two boundary components of the annulus")]
    BadCut,
    #[error(transparent)]
    Complex(#[from] ComplexError),
}

/// Directions carrying a cover site's deformation in the ambient space.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub enum Frame {
    /// Two ambient coordinate axes.
    Coords(usize, usize),
    /// Two orthonormal ambient vectors.
    Vectors(Vec<f64>, Vec<f64>),
}

impl Frame {
    pub fn add_scaled(&self, out: &mut [f64], w: [f64; 2]) {
        match self {
            Frame::Coords(a, b) => {
                out[*a] += w[0];
                out[*b] += w[1];
            }
            Frame::Vectors(e1, e2) => {
                for (o, (x, y)) in out.iter_mut().zip(e1.iter().zip(e2)) {
                    *o += w[0] * x + w[1] * y;
                }
            }
        }
    }
}

/// How a site's deformation is realized: the closed form Ψ, or its
/// vertex interpolant on the N-fold subdivision of the annulus cells.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum Deformation {
    Exact,
    Interpolated { n: u32 },
}

/// One covered cell: the square (or cube) whose middle annulus, taken in
/// `plane`, is replaced by a double cover and deformed by amplitude `delta`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CoverSite {
    pub id: u32,
    pub depth: u32,
    pub corner: Vec<u64>,
    pub plane: (usize, usize),
    pub delta: f64,
    pub frame: Frame,
    pub deformation: Deformation,
    /// Sheet choices of earlier sites that this site lives on.
    pub context: Vec<(u32, bool)>,
}

/// Position of a lattice point relative to a site's annulus.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum PointStatus {
    /// Outside the site's closed cell.
    Outside,
    /// Inside the cell but in the central or outer part (closed).
    Flat,
    /// On the inner or outer boundary of the annulus: both fibers coincide.
    Boundary,
    /// Relative interior of the cut σ.
    OnCut,
    /// Open annulus off the cut.
    Interior,
}

/// Exact annulus coordinates of a lattice point: (u, v) = (nu, nv) / den in
/// units of the annulus cell side, centred on the site cell.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct SitePoint {
    pub nu: i128,
    pub nv: i128,
    pub den: i128,
    pub status: PointStatus,
}

impl CoverSite {
    pub fn k(&self) -> usize {
        self.corner.len()
    }

    pub fn side(&self) -> f64 {
        1.0 / pow5(self.depth) as f64
    }

    /// Locate a lattice point given at resolution 5^-res (res ≥ depth + 1).
    pub fn locate(&self, coords: &[u64], res: u32) -> SitePoint {
        let scale = pow5(res - self.depth) as i128;
        let mut inside = true;
        for (x, c) in coords.iter().zip(&self.corner) {
            let local = *x as i128 - (*c as i128) * scale;
            if local < 0 || local > scale {
                inside = false;
            }
        }
        let la = coords[self.plane.0] as i128 - self.corner[self.plane.0] as i128 * scale;
        let lb = coords[self.plane.1] as i128 - self.corner[self.plane.1] as i128 * scale;
        let (nu, nv, den) = (10 * la - 5 * scale, 10 * lb - 5 * scale, 2 * scale);
        let status = if !inside { PointStatus::Outside } else { classify_uv(nu, nv, den) };
        SitePoint { nu, nv, den, status }
    }

    /// Normalized plane coordinates (ξ, η) ∈ [0,1]² of a real point, plus
    /// whether it lies in the closed site cell.
    pub fn local_plane(&self, x: &[f64]) -> (f64, f64, bool) {
        let scale = pow5(self.depth) as f64;
        let inside = x.iter().zip(&self.corner).all(|(xi, c)| {
            let l = xi * scale - *c as f64;
            (0.0..=1.0).contains(&l)
        });
        let xi = x[self.plane.0] * scale - self.corner[self.plane.0] as f64;
        let eta = x[self.plane.1] * scale - self.corner[self.plane.1] as f64;
        (xi, eta, inside)
    }

    /// Whether `cell` (deeper than the site) lies in the annulus child just
    /// below the cut, whose vertices on σ see the angle 2π from below.
    pub fn cell_below_cut(&self, cell: &CellAddress) -> bool {
        if cell.depth <= self.depth {
            return false;
        }
        let c = cell.ancestor_corner(self.depth + 1);
        c[self.plane.0] == 5 * self.corner[self.plane.0] + 3 && c[self.plane.1] == 5 * self.corner[self.plane.1] + 1
    }
}

/// Classify normalized annulus coordinates (given as numerators over `den`).
pub fn classify_uv(nu: i128, nv: i128, den: i128) -> PointStatus {
    let linf = nu.abs().max(nv.abs());
    // ring is 1/2 ≤ L∞ ≤ 3/2
    if 2 * linf < den || 2 * linf > 3 * den {
        PointStatus::Flat
    } else if 2 * linf == den || 2 * linf == 3 * den {
        PointStatus::Boundary
    } else if 2 * nv == -den && 2 * nu > den && 2 * nu < 3 * den {
        PointStatus::OnCut
    } else {
        PointStatus::Interior
    }
}

/// Canonical sheet bit of a vertex seen from a cell carrying sheet `bit`:
/// fibers collapse on the annulus boundary, and on σ the bit is the one of
/// the sheet that leaves σ at angle 0⁺.
pub fn canonical_bit(status: PointStatus, bit: Option<bool>, cell_below_cut: bool) -> Option<bool> {
    match (status, bit) {
        (PointStatus::Interior, b) => b,
        (PointStatus::OnCut, Some(b)) => Some(b ^ cell_below_cut),
        _ => None,
    }
}

/// Ring chart on the annulus around the unit-side central square:
/// (u, v) with 1/2 ≤ ‖(u,v)‖∞ ≤ 3/2 ↦ (r, T), r ∈ [0,1] the offset from the
/// inner boundary, T ∈ [0,2) the angle in half-turns, 0 on σ from above.
pub fn polar<S: Scalar>(u: S, v: S) -> Result<(S, S), CoverError> {
    let half: S = frac(1, 2);
    let three_half: S = frac(3, 2);
    let quarter: S = frac(1, 4);
    let linf = max_s(u.abs(), v.abs());
    if linf < half || linf > three_half {
        return Err(CoverError::NotInAnnulus);
    }
    let nhalf = -half.clone();
    if v == nhalf && u > half && u <= three_half {
        return Err(CoverError::OnCut);
    }
    let corner = |a: S, b: S, base: S, num: S| -> (S, S) {
        let r = max_s(a.clone(), b.clone());
        let s = a + b;
        let t = if s.is_zero() { base.clone() + frac::<S>(1, 8) } else { base + quarter.clone() * num / s };
        (r, t)
    };
    let out = if u >= half && v > nhalf && v <= half {
        (u - half.clone(), quarter.clone() * (v + half.clone()))
    } else if u >= half && v > half {
        let (a, b) = (u - half.clone(), v - half.clone());
        corner(a, b.clone(), quarter.clone(), b)
    } else if u > nhalf && u < half && v >= half {
        (v - half.clone(), frac::<S>(1, 2) + quarter.clone() * (half.clone() - u))
    } else if u <= nhalf && v >= half {
        let (a, b) = (nhalf.clone() - u, v - half.clone());
        corner(a.clone(), b, frac(3, 4), a)
    } else if u <= nhalf && v > nhalf && v < half {
        (nhalf.clone() - u, S::one() + quarter.clone() * (half.clone() - v))
    } else if u <= nhalf && v <= nhalf {
        let (a, b) = (nhalf.clone() - u, nhalf.clone() - v);
        corner(a, b.clone(), frac(5, 4), b)
    } else if u > nhalf && u < half && v <= nhalf {
        (nhalf.clone() - v, frac::<S>(3, 2) + quarter.clone() * (u + half.clone()))
    } else {
        // u ≥ 1/2, v ≤ -1/2 (off σ)
        let (a, b) = (u - half.clone(), nhalf.clone() - v);
        corner(a.clone(), b, frac(7, 4), a)
    };
    Ok(out)
}

/// Exact chart at a lattice point; `OnCut` points take T = 0 (the 0⁺ side).
pub fn polar_exact(p: &SitePoint) -> Result<(Ratio<i128>, Ratio<i128>), CoverError> {
    let u = Ratio::new(p.nu, p.den);
    let v = Ratio::new(p.nv, p.den);
    match p.status {
        PointStatus::OnCut => Ok((u - Ratio::new(1, 2), Ratio::new(0, 1))),
        PointStatus::Outside | PointStatus::Flat => Err(CoverError::NotInAnnulus),
        _ => polar(u, v),
    }
}

/// Lifted angle in half-turns on sheet `bit`: T + 2·bit ∈ [0, 4).
pub fn lift_angle<S: Scalar>(t: S, bit: bool) -> S {
    if bit {
        t + frac::<S>(2, 1)
    } else {
        t
    }
}

/// Sheet indicator χ of a lifted angle: 1 on (2, 4).
pub fn chi<S: Scalar>(t_lift: &S) -> bool {
    *t_lift > frac::<S>(2, 1)
}

/// An edge of the grid one level below the covered cell.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct GridEdge {
    pub depth: u32,
    pub start: Vec<u64>,
    pub axis: usize,
}

/// The default cut of a covered cell: the edge from (3,2) to (4,2) in child units.
pub fn default_cut(cell: &CellAddress, plane: (usize, usize)) -> GridEdge {
    let mut start = cell.corner_at(cell.depth + 1);
    start[plane.0] += 3;
    start[plane.1] += 2;
    GridEdge { depth: cell.depth + 1, start, axis: plane.0 }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BranchedCoverRecord {
    pub decomposition: AnnulusDecomposition,
    pub sigma: GridEdge,
    /// Covered cells with sheet bit; each carries half of its base weight.
    pub sheets: Vec<(CellAddress, bool)>,
    pub weight_halvings: u32,
    /// Base lattice points (child resolution) where the two fibers are glued.
    pub glued: Vec<Vec<u64>>,
}

fn is_boundary_vertex(rel: &[i64]) -> bool {
    // child units: annulus is [1,4]² minus (2,3)²
    let linf2 = rel.iter().map(|x| (2 * x - 5).abs()).max().unwrap();
    linf2 == 1 || linf2 == 3
}

pub fn build_double_cover(dec: &AnnulusDecomposition, sigma: &GridEdge) -> Result<BranchedCoverRecord, CoverError> {
    let (a, b) = dec.plane;
    let base = dec.parent.corner_at(dec.parent.depth + 1);
    if sigma.depth != dec.parent.depth + 1 || (sigma.axis != a && sigma.axis != b) {
        return Err(CoverError::BadCut);
    }
    let rel_of = |p: &[u64]| -> Vec<i64> { vec![p[a] as i64 - base[a] as i64, p[b] as i64 - base[b] as i64] };
    let s0 = rel_of(&sigma.start);
    let mut s1_full = sigma.start.clone();
    s1_full[sigma.axis] += 1;
    let s1 = rel_of(&s1_full);
    let ends = |p: &[i64]| (2 * p[0] - 5).abs().max((2 * p[1] - 5).abs());
    let (e0, e1) = (ends(&s0), ends(&s1));
    if !((e0 == 1 && e1 == 3) || (e0 == 3 && e1 == 1)) {
        return Err(CoverError::BadCut);
    }
    let sheets = dec.annulus.iter().flat_map(|c| [(c.clone(), false), (c.clone(), true)]).collect();
    let mut glued = Vec::new();
    for i in 0..=5i64 {
        for j in 0..=5i64 {
            if is_boundary_vertex(&[i, j]) {
                let mut p = base.clone();
                p[a] += i as u64;
                p[b] += j as u64;
                glued.push(p);
            }
        }
    }
    Ok(BranchedCoverRecord { decomposition: dec.clone(), sigma: sigma.clone(), sheets, weight_halvings: 1, glued })
}

/// Cover over the plane shadow of a k-cube.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LiftedCoverRecord {
    pub base: CellAddress,
    pub plane: (usize, usize),
    pub shadow: CellAddress,
    pub cover: BranchedCoverRecord,
}

impl LiftedCoverRecord {
    /// Projection of a k-dimensional lattice point onto the shadow square.
    pub fn project(&self, p: &[u64]) -> Vec<u64> {
        vec![p[self.plane.0], p[self.plane.1]]
    }

    fn site(&self, cell: &CellAddress, plane: (usize, usize)) -> CoverSite {
        CoverSite {
            id: 0,
            depth: cell.depth,
            corner: cell.corner.clone(),
            plane,
            delta: 0.0,
            frame: Frame::Coords(0, 1),
            deformation: Deformation::Exact,
            context: Vec::new(),
        }
    }

    /// Checks π̃_Q ∘ p̃j = pj ∘ π̃ on every lifted vertex of the annulus cells
    /// one level below the base, comparing canonical lifted vertex keys.
    pub fn check_commutation(&self) -> bool {
        let k_site = self.site(&self.base, self.plane);
        let q_site = self.site(&self.shadow, (0, 1));
        let res = self.base.depth + 1;
        let k = self.base.k();
        let dec = classify_children(&self.base, self.plane).expect("valid plane");
        for cell in &dec.annulus {
            for bit in [false, true] {
                for corner in 0..(1usize << k) {
                    let v: Vec<u64> = (0..k).map(|d| cell.corner[d] + ((corner >> d) & 1) as u64).collect();
                    let pk = k_site.locate(&v, res);
                    let lifted_k = canonical_bit(pk.status, Some(bit), k_site.cell_below_cut(cell));
                    let shadow_cell = CellAddress {
                        root_id: 0,
                        depth: cell.depth,
                        corner: self.project(&cell.corner),
                        branch_word: Vec::new(),
                    };
                    let pv = self.project(&v);
                    let pq = q_site.locate(&pv, res);
                    let lifted_q = canonical_bit(pq.status, Some(bit), q_site.cell_below_cut(&shadow_cell));
                    if lifted_k != lifted_q || pk.nu != pq.nu || pk.nv != pq.nv {
                        return false;
                    }
                }
            }
        }
        true
    }
}

pub fn lift_cover(cell: &CellAddress, plane: (usize, usize)) -> Result<LiftedCoverRecord, CoverError> {
    check_plane(cell.k(), plane)?;
    let shadow = CellAddress {
        root_id: cell.root_id,
        depth: cell.depth,
        corner: vec![cell.corner[plane.0], cell.corner[plane.1]],
        branch_word: Vec::new(),
    };
    let dec = classify_children(&shadow, (0, 1))?;
    let cover = build_double_cover(&dec, &default_cut(&shadow, (0, 1)))?;
    Ok(LiftedCoverRecord { base: cell.clone(), plane, shadow, cover })
}

/// One (ShSep) violation: nearby lifted points over opposite sides of the
/// base angle yet on the same sheet.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ShSepViolation {
    pub p: [f64; 2],
    pub q: [f64; 2],
    pub bit_p: bool,
    pub bit_q: bool,
    pub distance: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ShSepCertificate {
    pub tested: usize,
    pub skipped: usize,
    pub violations: Vec<ShSepViolation>,
}

/// Whether the straight segment between two base points (annulus units)
/// crosses the cut line v = -1/2, 1/2 < u < 3/2.
pub fn crosses_cut(p: [f64; 2], q: [f64; 2]) -> bool {
    let (fp, fq) = (p[1] + 0.5, q[1] + 0.5);
    if (fp > 0.0) == (fq > 0.0) || fp == fq {
        return false;
    }
    let t = fp / (fp - fq);
    let u = p[0] + t * (q[0] - p[0]);
    u > 0.5 && u < 1.5
}

fn boundary_gap(p: [f64; 2]) -> f64 {
    let linf = p[0].abs().max(p[1].abs());
    (linf - 0.5).min(1.5 - linf)
}

/// Distance in the cover between lifted points, in annulus units: the direct
/// distance when the segment's cut crossings match the sheet change, else a
/// path through the collapsed boundary.
pub fn lifted_distance(p: [f64; 2], bp: bool, q: [f64; 2], bq: bool) -> f64 {
    let direct = ((p[0] - q[0]).powi(2) + (p[1] - q[1]).powi(2)).sqrt();
    if (bp ^ crosses_cut(p, q)) == bq {
        direct
    } else {
        boundary_gap(p) + boundary_gap(q)
    }
}

/// Samples lifted pairs over the annulus of a generation-`i` square. Distances
/// are in absolute units (annulus cell side 5^{-i-1}).
pub fn check_shsep(i: u32, samples: usize, seed: u64) -> ShSepCertificate {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let unit = 1.0 / pow5(i + 1) as f64;
    // threshold 5^{-i-3} in annulus units
    let reach = 1.0 / 25.0;
    let mut cert = ShSepCertificate { tested: 0, skipped: 0, violations: Vec::new() };
    let mut attempts = 0usize;
    while cert.tested < samples && attempts < samples * 50 {
        attempts += 1;
        let p: [f64; 2] = if attempts % 2 == 0 {
            // straddle the cut
            [rng.gen_range(0.5..1.5), -0.5 + rng.gen_range(-reach..reach)]
        } else {
            [rng.gen_range(-1.5..1.5), rng.gen_range(-1.5..1.5)]
        };
        let ang = rng.gen_range(0.0..std::f64::consts::TAU);
        let len = rng.gen_range(0.0..reach);
        let q = [p[0] + len * ang.cos(), p[1] + len * ang.sin()];
        if boundary_gap(p) < reach || boundary_gap(q) < reach {
            cert.skipped += 1;
            continue;
        }
        let (Ok((_, tp)), Ok((_, tq))) = (polar(p[0], p[1]), polar(q[0], q[1])) else {
            cert.skipped += 1;
            continue;
        };
        let bp: bool = rng.gen();
        let bq: bool = rng.gen();
        let d = lifted_distance(p, bp, q, bq);
        if d > reach || (tp - tq).abs() < 1.0 {
            cert.skipped += 1;
            continue;
        }
        cert.tested += 1;
        if chi(&lift_angle(tp, bp)) == chi(&lift_angle(tq, bq)) {
            cert.violations.push(ShSepViolation {
                p: [p[0] * unit, p[1] * unit],
                q: [q[0] * unit, q[1] * unit],
                bit_p: bp,
                bit_q: bq,
                distance: d * unit,
            });
        }
    }
    cert
}

#[cfg(test)]
mod tests {
    use super::*;
    use num_rational::BigRational;

    fn r(n: i64, d: i64) -> BigRational {
        crate::numeric::rat(n, d)
    }

    #[test]
    fn chart_is_continuous_between_cells() {
        // sample boundaries between neighbouring cells; the chart values must agree
        let pts = [
            (r(1, 1), r(1, 2)),
            (r(1, 2), r(1, 1)),
            (r(-1, 2), r(1, 1)),
            (r(-1, 1), r(1, 2)),
            (r(-1, 1), r(-1, 2)),
            (r(-1, 2), r(-1, 1)),
            (r(1, 2), r(-1, 1)),
        ];
        let expected_t = [r(1, 4), r(1, 2), r(3, 4), r(1, 1), r(5, 4), r(3, 2), r(7, 4)];
        for ((u, v), t) in pts.iter().zip(expected_t) {
            let (rr, tt) = polar(u.clone(), v.clone()).unwrap();
            assert_eq!(tt, t);
            assert_eq!(rr, r(1, 2));
        }
    }

    #[test]
    fn chart_endpoints_and_cut() {
        assert_eq!(polar(r(1, 2), r(0, 1)).unwrap().0, r(0, 1));
        assert_eq!(polar(r(3, 2), r(0, 1)).unwrap().0, r(1, 1));
        assert_eq!(polar(r(1, 1), r(-1, 2)), Err(CoverError::OnCut));
        assert_eq!(polar(r(0, 1), r(0, 1)), Err(CoverError::NotInAnnulus));
        // just past σ on the lower sheet the angle is slightly above 0
        let (_, t) = polar(1.0, -0.5 + 1e-9).unwrap();
        assert!(t > 0.0 && t < 1e-8);
        let (_, t) = polar(1.0, -0.5 - 1e-9).unwrap();
        assert!(t < 2.0 && t > 2.0 - 1e-8);
        // fiber partner is shifted by exactly 2π (two half-turns)
        let (_, t) = polar(r(1, 1), r(1, 3)).unwrap();
        assert_eq!(lift_angle(t.clone(), true) - lift_angle(t, false), r(2, 1));
    }

    #[test]
    fn classify_lattice_points() {
        assert_eq!(classify_uv(0, 0, 2), PointStatus::Flat);
        assert_eq!(classify_uv(1, 0, 2), PointStatus::Boundary);
        assert_eq!(classify_uv(2, -1, 2), PointStatus::OnCut);
        assert_eq!(classify_uv(2, 0, 2), PointStatus::Interior);
        assert_eq!(classify_uv(3, -1, 2), PointStatus::Boundary);
    }

    #[test]
    fn double_cover_halves_and_glues() {
        let root = CellAddress::root(2);
        let dec = classify_children(&root, (0, 1)).unwrap();
        let cut = default_cut(&root, (0, 1));
        let rec = build_double_cover(&dec, &cut).unwrap();
        assert_eq!(rec.sheets.len(), 16);
        // mass: 8 cells of 1/25, each split into two halves
        let before = BigRational::new(8.into(), 25.into());
        let after = rec.sheets.iter().fold(BigRational::from_integer(0.into()), |acc, (c, _)| {
            acc + c.volume() * BigRational::new(1.into(), 2.into())
        });
        assert_eq!(before, after);
        // enumeration oracle: annulus-cell vertices on ∂Q_a
        let mut verts = std::collections::BTreeSet::new();
        for c in &dec.annulus {
            for dx in 0..2 {
                for dy in 0..2 {
                    let v = [c.corner[0] as i64 + dx, c.corner[1] as i64 + dy];
                    let l = (2 * v[0] - 5).abs().max((2 * v[1] - 5).abs());
                    if l == 1 || l == 3 {
                        verts.insert(v);
                    }
                }
            }
        }
        assert_eq!(rec.glued.len(), verts.len());
        assert_eq!(verts.len(), 16);
        let bad = GridEdge { depth: 1, start: vec![2, 2], axis: 0 };
        assert_eq!(build_double_cover(&dec, &bad), Err(CoverError::BadCut));
    }

    #[test]
    fn lifted_cover_commutes() {
        let two = lift_cover(&CellAddress::root(2), (0, 1)).unwrap();
        assert!(two.check_commutation());
        for plane in [(0, 1), (0, 2), (1, 2)] {
            let rec = lift_cover(&CellAddress::root(3), plane).unwrap();
            assert!(rec.check_commutation());
            // sheets over the 3-cube annulus: 8 shadow cells × 5 fibre cells × 2
            let dec = classify_children(&CellAddress::root(3), plane).unwrap();
            assert_eq!(2 * dec.annulus.len(), 80);
        }
        assert!(lift_cover(&CellAddress::root(3), (2, 1)).is_err());
    }

    #[test]
    fn cut_side_flips_bit() {
        let site = CoverSite {
            id: 0,
            depth: 0,
            corner: vec![0, 0],
            plane: (0, 1),
            delta: 0.1,
            frame: Frame::Coords(2, 3),
            deformation: Deformation::Exact,
            context: vec![],
        };
        let p = site.locate(&[17, 10], 2);
        assert_eq!(p.status, PointStatus::OnCut);
        let below = CellAddress { root_id: 0, depth: 2, corner: vec![16, 9], branch_word: vec![] };
        let above = CellAddress { root_id: 0, depth: 2, corner: vec![16, 10], branch_word: vec![] };
        assert!(site.cell_below_cut(&below));
        assert!(!site.cell_below_cut(&above));
        assert_eq!(canonical_bit(p.status, Some(false), true), Some(true));
        assert_eq!(canonical_bit(p.status, Some(false), false), Some(false));
    }

    #[test]
    fn shsep_holds_on_standard_cover() {
        let cert = check_shsep(0, 10_000, 7);
        assert_eq!(cert.tested, 10_000);
        assert!(cert.violations.is_empty());
    }

    #[test]
    fn adversarial_pair_across_cut() {
        let h = 1.0 / 50.0;
        let p = [1.0, -0.5 + h / 2.0];
        let q = [1.0, -0.5 - h / 2.0];
        let bq = false ^ crosses_cut(p, q);
        assert!(bq);
        assert!(lifted_distance(p, false, q, bq) <= 1.0 / 25.0);
        let (_, tp) = polar(p[0], p[1]).unwrap();
        let (_, tq) = polar(q[0], q[1]).unwrap();
        assert!((tp - tq).abs() >= 1.0);
        assert_ne!(chi(&lift_angle(tp, false)), chi(&lift_angle(tq, bq)));
    }
}
