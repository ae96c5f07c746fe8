//! Radial-basis neighbourhoods of a stage image: tubes over affine pieces
//! with radius 46·diam F(Q)·exp(−σ/dist(x, F(∂Q))), the nearest-chart
//! projection P, and sampled certificates for its Lipschitz constant.

use std::collections::HashMap;

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::complex_core::kuhn_simplices;
use crate::numeric::{dist, norm, pow5};
use crate::stage::Stage;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum RadnError {
    #[error("point is not in the neighbourhood")]
    NotMember,
    #[error("point lies in the tubes of {0} pieces with different feet")]
    Ambiguous(usize),
    #[error("ε must be positive, got {0}")]
    NonPositiveEpsilon(f64),
    #[error("no σ = 2^e with e in [{0}, {1}] certifies")]
    BudgetExhausted(i32, i32),
    #[error("schedule condition fails: left side {0} ≥ 1/8")]
    ScheduleRefused(f64),
}

/// An affine piece of the stage image: a whole cell when the embedding is
/// affine on it, otherwise one Kuhn simplex.
#[derive(Clone, Debug)]
pub struct Piece {
    pub cell: usize,
    pub whole_cell: bool,
    /// Stage vertex ids of the piece corners (simplex path or all cube corners).
    pub vertices: Vec<u32>,
    pub origin: Vec<f64>,
    /// Ambient × k edge matrix.
    pub edges: DMatrix<f64>,
    /// k × ambient left inverse (Gram⁻¹ Eᵀ).
    pub pinv: DMatrix<f64>,
    /// Ambient × (ambient − k) orthonormal normal basis.
    pub normals: DMatrix<f64>,
    pub diam: f64,
    /// Gradient norms of the facet functions (for in-plane distances).
    facet_grad: Vec<f64>,
    /// Sine of the largest angle between normal space and the base plane.
    pub tilt: f64,
}

impl Piece {
    fn new(stage: &Stage, cell: usize, corners: &[usize], whole_cell: bool) -> Piece {
        let d = stage.ambient_dim;
        let k = stage.k();
        let cv = &stage.cell_vertices[cell];
        let vertices: Vec<u32> = corners.iter().map(|c| cv[*c]).collect();
        let origin = stage.vertex(vertices[0]).to_vec();
        let mut edges = DMatrix::zeros(d, k);
        if whole_cell {
            for a in 0..k {
                let v = stage.vertex(cv[corners[0] ^ (1 << a)]);
                for r in 0..d {
                    edges[(r, a)] = v[r] - origin[r];
                }
            }
        } else {
            for (col, vid) in vertices[1..].iter().enumerate() {
                let v = stage.vertex(*vid);
                for r in 0..d {
                    edges[(r, col)] = v[r] - origin[r];
                }
            }
        }
        let gram = edges.transpose() * &edges;
        let pinv = gram.try_inverse().expect("nondegenerate piece") * edges.transpose();
        let mut facet_grad: Vec<f64> = (0..k).map(|i| pinv.row(i).norm()).collect();
        if !whole_cell {
            let mut sum = DVector::zeros(d);
            for i in 0..k {
                sum += pinv.row(i).transpose();
            }
            facet_grad.push(sum.norm());
        }
        // normal basis by Gram–Schmidt of the tangent columns followed by the
        // standard basis, fresh coordinates first so flat pieces get exact axes
        let mut basis: Vec<DVector<f64>> = Vec::new();
        for a in 0..k {
            let mut v = edges.column(a).into_owned();
            for b in &basis {
                let c = b.dot(&v);
                v -= b * c;
            }
            basis.push(v.normalize());
        }
        let mut normals_v = Vec::new();
        for e in (k..d).chain(0..k) {
            if normals_v.len() == d - k {
                break;
            }
            let mut v = DVector::zeros(d);
            v[e] = 1.0;
            for b in basis.iter().chain(normals_v.iter()) {
                let c = b.dot(&v);
                v -= b * c;
            }
            if v.norm() > 1e-6 {
                normals_v.push(v.normalize());
            }
        }
        let normals = DMatrix::from_columns(&normals_v);
        let tilt = if d > k { crate::numeric::operator_norm(&normals.rows(0, k).into_owned()) } else { 0.0 };
        let pts: Vec<&[f64]> = if whole_cell {
            cv.iter().map(|v| stage.vertex(*v)).collect()
        } else {
            vertices.iter().map(|v| stage.vertex(*v)).collect()
        };
        let mut diam: f64 = 0.0;
        for a in 0..pts.len() {
            for b in (a + 1)..pts.len() {
                diam = diam.max(dist(pts[a], pts[b]));
            }
        }
        Piece { cell, whole_cell, vertices, origin, edges, pinv, normals, diam, facet_grad, tilt }
    }

    /// Local coordinates of the orthogonal foot of p.
    pub fn local(&self, p: &[f64]) -> DVector<f64> {
        let diff = DVector::from_iterator(p.len(), p.iter().zip(&self.origin).map(|(a, b)| a - b));
        &self.pinv * diff
    }

    pub fn point(&self, c: &DVector<f64>) -> Vec<f64> {
        let v = &self.edges * c;
        self.origin.iter().zip(v.iter()).map(|(o, e)| o + e).collect()
    }

    /// Signed in-plane distance from the foot with local coords c to the
    /// piece boundary (negative outside).
    pub fn boundary_distance(&self, c: &DVector<f64>) -> f64 {
        let k = c.len();
        let mut best = f64::INFINITY;
        for i in 0..k {
            best = best.min(c[i] / self.facet_grad[i]);
            if self.whole_cell {
                best = best.min((1.0 - c[i]) / self.facet_grad[i]);
            }
        }
        if !self.whole_cell {
            best = best.min((1.0 - c.sum()) / self.facet_grad[k]);
        }
        best
    }

    /// Tube radius at the foot with local coordinates c.
    pub fn radius(&self, c: &DVector<f64>, sigma: f64) -> f64 {
        let d = self.boundary_distance(c);
        if d <= 0.0 {
            0.0
        } else {
            46.0 * self.diam * (-sigma / d).exp()
        }
    }

    /// Largest possible tube radius over the piece.
    pub fn max_radius(&self, sigma: f64) -> f64 {
        let inr = 1.0 / self.facet_grad.iter().cloned().fold(0.0, f64::max);
        46.0 * self.diam * (-sigma / inr).exp()
    }
}

/// Split a stage into maximal affine pieces.
pub fn stage_pieces(stage: &Stage) -> Vec<Piece> {
    let k = stage.k();
    let mut out = Vec::new();
    for (ci, cell) in stage.complex.cells.iter().enumerate() {
        let cv = &stage.cell_vertices[ci];
        let o = stage.vertex(cv[0]);
        let side = 1.0 / pow5(cell.address.depth) as f64;
        let affine = (0..cv.len()).all(|idx| {
            let v = stage.vertex(cv[idx]);
            (0..stage.ambient_dim).all(|r| {
                let mut pred = o[r];
                for a in 0..k {
                    if (idx >> a) & 1 == 1 {
                        pred += stage.vertex(cv[1 << a])[r] - o[r];
                    }
                }
                (v[r] - pred).abs() <= 1e-12 * side
            })
        });
        if affine {
            out.push(Piece::new(stage, ci, &[0], true));
        } else {
            for s in kuhn_simplices(k, cell.mirror) {
                out.push(Piece::new(stage, ci, &s, false));
            }
        }
    }
    out
}

#[derive(Clone, Debug)]
pub struct RadialNeighborhood {
    pub j: u32,
    pub sigma: f64,
    pub k: usize,
    pub ambient_dim: usize,
    pub pieces: Vec<Piece>,
    grid_n: usize,
    grid: HashMap<Vec<usize>, Vec<u32>>,
    /// Pieces sharing a vertex, per piece.
    pub neighbors: Vec<Vec<u32>>,
}

impl RadialNeighborhood {
    pub fn build(stage: &Stage, j: u32, sigma: f64) -> RadialNeighborhood {
        Self::from_pieces(stage_pieces(stage), stage.k(), stage.ambient_dim, stage.resolution, j, sigma)
    }

    pub fn from_pieces(pieces: Vec<Piece>, k: usize, ambient_dim: usize, res: u32, j: u32, sigma: f64) -> Self {
        let mut grid_n = pow5(res) as usize;
        while grid_n.pow(k as u32) > 1_000_000 {
            grid_n /= 5;
        }
        let grid_n = grid_n.max(1);
        let mut grid: HashMap<Vec<usize>, Vec<u32>> = HashMap::new();
        let mut by_vertex: HashMap<u32, Vec<u32>> = HashMap::new();
        for (pi, p) in pieces.iter().enumerate() {
            let margin = p.max_radius(sigma) * p.tilt;
            let mut lo = vec![f64::INFINITY; k];
            let mut hi = vec![f64::NEG_INFINITY; k];
            let corners: Vec<Vec<f64>> = if p.whole_cell {
                (0..(1usize << k))
                    .map(|idx| {
                        let c = DVector::from_iterator(k, (0..k).map(|a| ((idx >> a) & 1) as f64));
                        p.point(&c)
                    })
                    .collect()
            } else {
                let mut v = vec![p.origin.clone()];
                for a in 0..k {
                    let mut c = DVector::zeros(k);
                    c[a] = 1.0;
                    v.push(p.point(&c));
                }
                v
            };
            for c in &corners {
                for a in 0..k {
                    lo[a] = lo[a].min(c[a] - margin);
                    hi[a] = hi[a].max(c[a] + margin);
                }
            }
            let cell_lo: Vec<usize> = lo.iter().map(|x| ((x * grid_n as f64).floor().max(0.0) as usize).min(grid_n - 1)).collect();
            let cell_hi: Vec<usize> = hi.iter().map(|x| ((x * grid_n as f64).floor().max(0.0) as usize).min(grid_n - 1)).collect();
            let mut idx = cell_lo.clone();
            loop {
                grid.entry(idx.clone()).or_default().push(pi as u32);
                let mut a = 0;
                loop {
                    if a == k {
                        break;
                    }
                    if idx[a] < cell_hi[a] {
                        idx[a] += 1;
                        break;
                    }
                    idx[a] = cell_lo[a];
                    a += 1;
                }
                if a == k {
                    break;
                }
            }
            for v in &p.vertices {
                by_vertex.entry(*v).or_default().push(pi as u32);
            }
        }
        let mut neighbors = vec![Vec::new(); pieces.len()];
        let mut keys: Vec<_> = by_vertex.keys().copied().collect();
        keys.sort();
        for v in keys {
            let list = &by_vertex[&v];
            for &a in list {
                for &b in list {
                    if a != b {
                        neighbors[a as usize].push(b);
                    }
                }
            }
        }
        for n in &mut neighbors {
            n.sort();
            n.dedup();
        }
        RadialNeighborhood { j, sigma, k, ambient_dim, pieces, grid_n, grid, neighbors }
    }

    pub fn candidates(&self, p: &[f64]) -> &[u32] {
        let key: Vec<usize> =
            p[..self.k].iter().map(|x| ((x * self.grid_n as f64).floor().max(0.0) as usize).min(self.grid_n - 1)).collect();
        self.grid.get(&key).map(|v| v.as_slice()).unwrap_or(&[])
    }

    /// Member pieces of p with their feet.
    pub fn memberships(&self, p: &[f64]) -> Vec<(u32, Vec<f64>)> {
        let mut out = Vec::new();
        for &pi in self.candidates(p) {
            let piece = &self.pieces[pi as usize];
            let c = piece.local(p);
            let scale = 1e-12;
            if piece.boundary_distance(&c) < -scale * piece.diam {
                continue;
            }
            let x = piece.point(&c);
            let y = dist(p, &x);
            let r = piece.radius(&c, self.sigma);
            // float slack for points on the surface itself, which P fixes
            let slack = 1e-14 * (1.0 + norm(&x));
            if y <= slack {
                out.push((pi, p.to_vec()));
            } else if y <= r * (1.0 + 1e-12) {
                out.push((pi, x));
            }
        }
        out
    }

    /// P(p): the foot on the unique piece whose tube contains p.
    pub fn project(&self, p: &[f64]) -> Result<Vec<f64>, RadnError> {
        self.project_piece(p).map(|(x, _)| x)
    }

    /// P(p) together with one piece realizing it.
    pub fn project_piece(&self, p: &[f64]) -> Result<(Vec<f64>, u32), RadnError> {
        let m = self.memberships(p);
        let Some((piece, first)) = m.first() else {
            return Err(RadnError::NotMember);
        };
        let scale = 1e-12 * (1.0 + norm(first));
        if m.iter().any(|(_, x)| dist(x, first) > scale) {
            return Err(RadnError::Ambiguous(m.len()));
        }
        Ok((first.clone(), *piece))
    }

    pub fn contains(&self, p: &[f64]) -> bool {
        self.project(p).is_ok()
    }

    /// A random member point of a piece: (p, foot).
    pub fn sample_member(&self, piece: u32, rng: &mut impl Rng) -> (Vec<f64>, Vec<f64>) {
        let pc = &self.pieces[piece as usize];
        let k = self.k;
        let c = if pc.whole_cell {
            DVector::from_iterator(k, (0..k).map(|_| rng.gen_range(0.0..1.0)))
        } else {
            let mut cuts: Vec<f64> = (0..k).map(|_| rng.gen_range(0.0..1.0)).collect();
            cuts.sort_by(|a, b| a.partial_cmp(b).unwrap());
            let mut prev = 0.0;
            let mut lam = Vec::with_capacity(k);
            for cpt in cuts {
                lam.push(cpt - prev);
                prev = cpt;
            }
            // lam[0] goes to the origin; local coords are the remaining weights
            let mut w = lam[1..].to_vec();
            w.push(1.0 - prev);
            DVector::from_vec(w)
        };
        let x = pc.point(&c);
        let r = pc.radius(&c, self.sigma);
        let nd = pc.normals.ncols();
        let mut p = x.clone();
        // draw the same numbers whatever the radius, so runs at different σ
        // see the same directions
        let g = DVector::from_iterator(nd, (0..nd).map(|_| rng.gen_range(-1.0..1.0)));
        let u: f64 = rng.gen_range(0.0..1.0);
        if nd > 0 && r > 0.0 {
            let dir = &pc.normals * g;
            let len = dir.norm();
            if len > 0.0 {
                let t = u * r / len;
                for (pi, di) in p.iter_mut().zip(dir.iter()) {
                    *pi += t * di;
                }
            }
        }
        (p, x)
    }
}

/// Outcome of one (Claim j) sampling run.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ClaimCertificate {
    pub j: u32,
    pub sigma: f64,
    pub epsilon: f64,
    pub samples: usize,
    /// Largest ratio per stratum: same piece, adjacent pieces, distant pieces.
    pub max_ratio: [f64; 3],
    pub max_drift: f64,
    pub drift_bound: f64,
    /// Sampled points whose projection was undefined or not their foot.
    pub ill_defined: usize,
    pub passed: bool,
}

impl ClaimCertificate {
    pub fn worst_ratio(&self) -> f64 {
        self.max_ratio.iter().cloned().fold(0.0, f64::max)
    }
}

/// Samples stratified pairs of members and checks P is (1+ε)-Lipschitz on
/// them, that P returns the foot, and the drift bound 100·5^-j. Stops at the
/// first failure when `early_exit`.
pub fn sample_claim(radn: &RadialNeighborhood, epsilon: f64, samples: usize, seed: u64, early_exit: bool) -> ClaimCertificate {
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ radn.j as u64);
    let drift_bound = 100.0 / pow5(radn.j) as f64;
    let mut cert = ClaimCertificate {
        j: radn.j,
        sigma: radn.sigma,
        epsilon,
        samples: 0,
        max_ratio: [0.0; 3],
        max_drift: 0.0,
        drift_bound,
        ill_defined: 0,
        passed: true,
    };
    let n = radn.pieces.len() as u32;
    for s in 0..samples {
        let stratum = s % 3;
        let a = rng.gen_range(0..n);
        let b = match stratum {
            0 => a,
            1 => {
                let nb = &radn.neighbors[a as usize];
                if nb.is_empty() {
                    a
                } else {
                    nb[rng.gen_range(0..nb.len())]
                }
            }
            _ => rng.gen_range(0..n),
        };
        let (p, xp) = radn.sample_member(a, &mut rng);
        let (q, xq) = radn.sample_member(b, &mut rng);
        cert.samples += 1;
        let (pp, pq) = match (radn.project(&p), radn.project(&q)) {
            (Ok(u), Ok(v)) => (u, v),
            _ => {
                cert.ill_defined += 1;
                cert.passed = false;
                if early_exit {
                    return cert;
                }
                continue;
            }
        };
        let tol = 1e-9 * (1.0 + norm(&xp));
        if dist(&pp, &xp) > tol || dist(&pq, &xq) > tol {
            cert.ill_defined += 1;
            cert.passed = false;
            if early_exit {
                return cert;
            }
        }
        cert.max_drift = cert.max_drift.max(dist(&pp, &p)).max(dist(&pq, &q));
        let d = dist(&p, &q);
        if d > 0.0 {
            let r = dist(&pp, &pq) / d;
            cert.max_ratio[stratum] = cert.max_ratio[stratum].max(r);
            if r > 1.0 + epsilon {
                cert.passed = false;
                if early_exit {
                    return cert;
                }
            }
        }
    }
    if cert.max_drift > drift_bound {
        cert.passed = false;
    }
    cert
}

/// Smallest σ = 2^e, e from `e_min` upward to `e_max`, whose certificate passes.
pub fn find_sigma(
    stage: &Stage,
    j: u32,
    epsilon: f64,
    samples: usize,
    seed: u64,
    e_range: (i32, i32),
) -> Result<(RadialNeighborhood, ClaimCertificate), RadnError> {
    if epsilon <= 0.0 {
        return Err(RadnError::NonPositiveEpsilon(epsilon));
    }
    let pieces = stage_pieces(stage);
    for e in e_range.0..=e_range.1 {
        let sigma = 2f64.powi(e);
        let radn = RadialNeighborhood::from_pieces(pieces.clone(), stage.k(), stage.ambient_dim, stage.resolution, j, sigma);
        // cheap screen before the full run
        if !sample_claim(&radn, epsilon, samples.min(3000), seed, true).passed {
            continue;
        }
        let cert = sample_claim(&radn, epsilon, samples, seed, true);
        if cert.passed {
            return Ok((radn, cert));
        }
    }
    Err(RadnError::BudgetExhausted(e_range.0, e_range.1))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::embedding_r4::{build_stage_one, TowerStage};
    use crate::schedule::DeltaSchedule;

    fn stage_one() -> Stage {
        build_stage_one(2, &DeltaSchedule::r4(), 4, 1_000_000).unwrap().0.stage
    }

    #[test]
    fn surface_points_are_fixed() {
        let st = stage_one();
        let r = RadialNeighborhood::build(&st, 1, 0.5);
        for v in (0..st.vertex_count() as u32).step_by(7) {
            let p = st.vertex(v).to_vec();
            assert_eq!(r.project(&p).unwrap(), p);
        }
    }

    #[test]
    fn offsets_over_the_boundary_are_outside() {
        let zero = TowerStage::zero(2, &DeltaSchedule::r4()).stage;
        let r = RadialNeighborhood::build(&zero, 0, 1e-3);
        assert_eq!(r.project(&[0.5, 0.0, 0.1, 0.0]), Err(RadnError::NotMember));
        assert_eq!(r.project(&[1.0, 0.3, 0.0, -0.01]), Err(RadnError::NotMember));
        // interior shared vertex of stage 1 pieces, pushed off the surface
        let st = stage_one();
        let r1 = RadialNeighborhood::build(&st, 1, 0.5);
        let v = st.vertices.iter().position(|k| k.coords == vec![10, 10]).unwrap();
        let mut p = st.vertex(v as u32).to_vec();
        p[2] += 1e-3;
        assert_eq!(r1.project(&p), Err(RadnError::NotMember));
    }

    #[test]
    fn half_radius_offset_is_member() {
        let zero = TowerStage::zero(2, &DeltaSchedule::r4()).stage;
        let r = RadialNeighborhood::build(&zero, 0, 0.25);
        let piece = &r.pieces[0];
        let c = DVector::from_vec(vec![0.3, 0.6]);
        let phi = piece.radius(&c, r.sigma);
        // oracle: boundary distance 0.3, diam √2
        let expect = 46.0 * 2f64.sqrt() * (-0.25f64 / 0.3).exp();
        assert!((phi - expect).abs() < 1e-12 * expect);
        let p = [0.3, 0.6, phi / 2.0 * 0.6, phi / 2.0 * 0.8];
        assert_eq!(r.project(&p).unwrap(), vec![0.3, 0.6, 0.0, 0.0]);
        let q = [0.3, 0.6, phi * 1.01, 0.0];
        assert!(r.project(&q).is_err());
    }

    #[test]
    fn same_piece_pairs_contract() {
        let st = stage_one();
        let r = RadialNeighborhood::build(&st, 1, 0.5);
        let c = sample_claim(&r, 0.5, 3000, 11, false);
        assert!(c.passed, "{c:?}");
        assert!(c.max_ratio[0] <= 1.0 + 1e-12);
    }

    #[test]
    fn zero_epsilon_is_rejected() {
        let st = stage_one();
        assert_eq!(find_sigma(&st, 1, 0.0, 10, 1, (-2, 2)).unwrap_err(), RadnError::NonPositiveEpsilon(0.0));
    }

    #[test]
    fn doubling_sigma_keeps_margin() {
        let st = stage_one();
        let mut prev: Option<f64> = None;
        for e in -1..3 {
            let r = RadialNeighborhood::build(&st, 1, 2f64.powi(e));
            let c = sample_claim(&r, 0.5, 6000, 5, false);
            assert!(c.passed);
            let margin = 1.5 - c.worst_ratio();
            if let Some(m) = prev {
                assert!(margin >= m - 1e-9, "σ=2^{e}: {margin} < {m}");
            }
            prev = Some(margin);
        }
    }

    #[test]
    fn tiny_sigma_fails() {
        // tubes of neighbouring pieces overlap: projection is ambiguous
        let st = stage_one();
        let r = RadialNeighborhood::build(&st, 1, 2f64.powi(-40));
        assert!(!sample_claim(&r, 0.5, 300, 1, true).passed);
    }

    #[test]
    fn flat_pieces_have_axis_normals() {
        let zero = TowerStage::zero(3, &DeltaSchedule::r4()).stage;
        let p = &stage_pieces(&zero)[0];
        assert!(p.whole_cell);
        assert_eq!(p.normals.column(0).as_slice(), &[0.0, 0.0, 0.0, 1.0, 0.0]);
        assert_eq!(p.normals.column(1).as_slice(), &[0.0, 0.0, 0.0, 0.0, 1.0]);
        assert_eq!(p.tilt, 0.0);
    }
}
