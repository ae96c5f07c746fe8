//! Lifted stage meshes: vertex identification across sheets, the embedding
//! F_n at vertices and arbitrary lifted points, and piecewise-linear access.

use std::collections::HashMap;
use std::sync::OnceLock;

use nalgebra::DMatrix;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::branched_cover::{canonical_bit, CoverSite, Deformation, PointStatus};
use crate::complex_core::{kuhn_simplices, CellAddress, CellRecord, StageComplex};
use crate::deformation_maps::{psi_at, psi_point};
use crate::numeric::{operator_norm, pow5};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum StageError {
    #[error("cell count {count} exceeds the ceiling {ceiling}")]
    ResourceLimit { count: usize, ceiling: usize },
    #[error("stage {requested} not available (built through {built})")]
    StageMissing { requested: u32, built: u32 },
    #[error("no cell contains the lifted point")]
    NotFound,
}

/// Sheet choices (site id, bit) of a lifted point, sorted by site id.
pub type Lift = Vec<(u32, bool)>;

#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct VertexKey {
    pub coords: Vec<u64>,
    pub lift: Lift,
}

/// Canonical lift of a cell corner given at resolution `res`.
pub fn vertex_lift(sites: &[CoverSite], cell: &CellAddress, coords: &[u64], res: u32) -> Lift {
    let mut lift = Vec::new();
    for step in &cell.branch_word {
        if let Some(b) = step.sheet {
            let site = &sites[step.site as usize];
            let p = site.locate(coords, res);
            if let Some(c) = canonical_bit(p.status, Some(b), site.cell_below_cut(cell)) {
                lift.push((step.site, c));
            }
        }
    }
    lift.sort();
    lift
}

/// 2D Kuhn interpolation weights in a unit square at local (s, t), with the
/// x axis optionally mirrored. Returns three (corner index, weight) pairs;
/// corner index bit 0 is the x offset, bit 1 the y offset.
pub fn kuhn_weights_2d(s: f64, t: f64, mirror: bool) -> [(usize, f64); 3] {
    let m = if mirror { 1 } else { 0 };
    let s = if mirror { 1.0 - s } else { s };
    if s >= t {
        [(m, 1.0 - s), (1 ^ m, s - t), (3 ^ m, t)]
    } else {
        [(m, 1.0 - t), (2 ^ m, t - s), (3 ^ m, s)]
    }
}

fn plane_mirror(site: &CoverSite, fine: [u64; 2], fine_res: u32) -> bool {
    let shift = pow5(fine_res - site.depth - 1);
    let da = fine[0] / shift - 5 * site.corner[site.plane.0];
    let db = fine[1] / shift - 5 * site.corner[site.plane.1];
    matches!((da, db), (1, 3) | (3, 1))
}

fn fine_cell_below_cut(site: &CoverSite, fine: [u64; 2], fine_res: u32) -> bool {
    let shift = pow5(fine_res - site.depth - 1);
    fine[0] / shift == 5 * site.corner[site.plane.0] + 3 && fine[1] / shift == 5 * site.corner[site.plane.1] + 1
}

/// Ψ (or its interpolant) at a fine-grid corner of a site, in plane coordinates.
fn grid_value(site: &CoverSite, corner: [u64; 2], fine_res: u32, cell_bit: bool, below: bool) -> [f64; 2] {
    let mut full = site.corner.iter().map(|c| c * pow5(fine_res - site.depth)).collect::<Vec<_>>();
    full[site.plane.0] = corner[0];
    full[site.plane.1] = corner[1];
    let p = site.locate(&full, fine_res);
    psi_at(&p, canonical_bit(p.status, Some(cell_bit), below), site.delta, site.side() / 5.0)
}

/// Interpolated deformation at plane point given as fine-grid cell plus
/// local offsets in [0,1]², using the sheet bit of that fine cell.
fn interpolate_in_fine_cell(site: &CoverSite, fine: [u64; 2], fine_res: u32, st: (f64, f64), cell_bit: bool) -> [f64; 2] {
    let mirror = plane_mirror(site, fine, fine_res);
    let below = fine_cell_below_cut(site, fine, fine_res);
    let mut out = [0.0; 2];
    for (idx, w) in kuhn_weights_2d(st.0, st.1, mirror) {
        if w == 0.0 {
            continue;
        }
        let c = [fine[0] + (idx & 1) as u64, fine[1] + ((idx >> 1) & 1) as u64];
        let v = grid_value(site, c, fine_res, cell_bit, below);
        out[0] += w * v[0];
        out[1] += w * v[1];
    }
    out
}

/// Contribution of a site at a lattice point with canonical sheet bit.
pub fn site_value_lattice(site: &CoverSite, coords: &[u64], res: u32, bit: Option<bool>) -> [f64; 2] {
    let p = site.locate(coords, res);
    if !matches!(p.status, PointStatus::Interior | PointStatus::OnCut) {
        return [0.0, 0.0];
    }
    let width = site.side() / 5.0;
    match site.deformation {
        Deformation::Exact => psi_at(&p, bit, site.delta, width),
        Deformation::Interpolated { n } => {
            let fine_res = site.depth + 1 + n;
            if res <= fine_res {
                return psi_at(&p, bit, site.delta, width);
            }
            let scale = pow5(res - fine_res);
            let (a, b) = (coords[site.plane.0], coords[site.plane.1]);
            let fine = [a / scale, b / scale];
            let st = ((a % scale) as f64 / scale as f64, (b % scale) as f64 / scale as f64);
            // a point on σ sits on the bottom edge of the fine cell above σ,
            // whose bit is the canonical one
            interpolate_in_fine_cell(site, fine, fine_res, st, bit.expect("annulus point needs a bit"))
        }
    }
}

/// Contribution of a site at a real point on sheet `bit`.
pub fn site_value_point(site: &CoverSite, x: &[f64], bit: bool) -> [f64; 2] {
    let (xi, eta, inside) = site.local_plane(x);
    if !inside {
        return [0.0, 0.0];
    }
    let width = site.side() / 5.0;
    let (u, v) = (5.0 * xi - 2.5, 5.0 * eta - 2.5);
    let linf = u.abs().max(v.abs());
    if !(0.5..=1.5).contains(&linf) {
        return [0.0, 0.0];
    }
    match site.deformation {
        Deformation::Exact => psi_point(u, v, bit, site.delta, width),
        Deformation::Interpolated { n } => {
            let fine_res = site.depth + 1 + n;
            let m = pow5(1 + n) as f64;
            let fa = xi * m;
            let fb = eta * m;
            let ia = (fa.floor() as i64).clamp(0, m as i64 - 1) as u64;
            let ib = (fb.floor() as i64).clamp(0, m as i64 - 1) as u64;
            let base = [site.corner[site.plane.0] * pow5(1 + n), site.corner[site.plane.1] * pow5(1 + n)];
            let st = ((fa - ia as f64).clamp(0.0, 1.0), (fb - ib as f64).clamp(0.0, 1.0));
            interpolate_in_fine_cell(site, [base[0] + ia, base[1] + ib], fine_res, st, bit)
        }
    }
}

/// Lookup tables built on first use.
#[derive(Clone, Debug, Default)]
pub struct StageIndex {
    sites: HashMap<(u32, Vec<u64>, Lift), u32>,
    cells: HashMap<(u32, Vec<u64>, Lift), usize>,
}

/// A built stage: complex, canonical vertices and their ambient coordinates.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct Stage {
    pub complex: StageComplex,
    pub ambient_dim: usize,
    pub resolution: u32,
    pub vertices: Vec<VertexKey>,
    /// `ambient_dim` coordinates per vertex.
    pub coords: Vec<f64>,
    /// Corner vertex indices per cell; bit d of the corner index is the
    /// offset along axis d.
    pub cell_vertices: Vec<Vec<u32>>,
    #[serde(skip)]
    index: OnceLock<StageIndex>,
}

impl PartialEq for Stage {
    fn eq(&self, other: &Self) -> bool {
        self.complex == other.complex
            && self.ambient_dim == other.ambient_dim
            && self.vertices == other.vertices
            && self.coords == other.coords
            && self.cell_vertices == other.cell_vertices
    }
}

pub fn corner_offsets(k: usize, idx: usize) -> Vec<u64> {
    (0..k).map(|d| ((idx >> d) & 1) as u64).collect()
}

/// The sheet bits of a cell (its own lift).
pub fn cell_lift(cell: &CellRecord) -> Lift {
    let mut l: Lift = cell.address.branch_word.iter().filter_map(|s| s.sheet.map(|b| (s.site, b))).collect();
    l.sort();
    l
}

impl Stage {
    /// Identify vertices and evaluate F = F_0 + Σ (site value) ⊗ frame.
    pub fn assemble(complex: StageComplex, ambient_dim: usize) -> Stage {
        let k = complex.k;
        let res = complex.max_depth();
        let mut ids: HashMap<VertexKey, u32> = HashMap::new();
        let mut vertices = Vec::new();
        let mut cell_vertices = Vec::with_capacity(complex.cells.len());
        for cell in &complex.cells {
            let base = cell.address.corner_at(res);
            let scale = pow5(res - cell.address.depth);
            let mut cv = Vec::with_capacity(1 << k);
            for idx in 0..(1usize << k) {
                let coords: Vec<u64> = base.iter().zip(corner_offsets(k, idx)).map(|(b, o)| b + o * scale).collect();
                let lift = vertex_lift(&complex.sites, &cell.address, &coords, res);
                let key = VertexKey { coords, lift };
                let id = *ids.entry(key.clone()).or_insert_with(|| {
                    vertices.push(key);
                    (vertices.len() - 1) as u32
                });
                cv.push(id);
            }
            cell_vertices.push(cv);
        }
        let coords: Vec<f64> = vertices
            .par_iter()
            .flat_map_iter(|key| eval_lattice(&complex.sites, key, res, k, ambient_dim))
            .collect();
        Stage { complex, ambient_dim, resolution: res, vertices, coords, cell_vertices, index: OnceLock::new() }
    }

    pub fn k(&self) -> usize {
        self.complex.k
    }

    pub fn vertex(&self, i: u32) -> &[f64] {
        let d = self.ambient_dim;
        &self.coords[i as usize * d..(i as usize + 1) * d]
    }

    pub fn vertex_base(&self, i: u32) -> Vec<f64> {
        let s = pow5(self.resolution) as f64;
        self.vertices[i as usize].coords.iter().map(|c| *c as f64 / s).collect()
    }

    fn index(&self) -> &StageIndex {
        self.index.get_or_init(|| {
            let mut idx = StageIndex::default();
            for s in &self.complex.sites {
                let mut ctx = s.context.clone();
                ctx.sort();
                idx.sites.insert((s.depth, s.corner.clone(), ctx), s.id);
            }
            for (i, c) in self.complex.cells.iter().enumerate() {
                idx.cells.insert((c.address.depth, c.address.corner.clone(), cell_lift(c)), i);
            }
            idx
        })
    }

    /// All lifts of a base point (points on annulus boundaries or cuts are
    /// not expected here).
    pub fn lifts_at(&self, x: &[f64]) -> Vec<Lift> {
        let idx = self.index();
        let mut out = Vec::new();
        let mut stack: Vec<(Lift, u32)> = vec![(Vec::new(), 0)];
        while let Some((ctx, start)) = stack.pop() {
            let mut branched = false;
            for d in start..=self.resolution {
                let m = pow5(d) as f64;
                let corner: Vec<u64> = x.iter().map(|xi| ((xi * m).floor() as i64).clamp(0, m as i64 - 1) as u64).collect();
                if let Some(&sid) = idx.sites.get(&(d, corner, ctx.clone())) {
                    let site = &self.complex.sites[sid as usize];
                    let (xi, eta, _) = site.local_plane(x);
                    let linf = (5.0 * xi - 2.5).abs().max((5.0 * eta - 2.5).abs());
                    if linf > 0.5 && linf < 1.5 {
                        for b in [true, false] {
                            let mut next = ctx.clone();
                            next.push((sid, b));
                            next.sort();
                            stack.push((next, d + 1));
                        }
                        branched = true;
                        break;
                    }
                }
            }
            if !branched {
                out.push(ctx);
            }
        }
        out.sort();
        out
    }

    /// F at a lifted real point.
    pub fn eval_point(&self, x: &[f64], lift: &[(u32, bool)]) -> Vec<f64> {
        let mut out = vec![0.0; self.ambient_dim];
        out[..self.k()].copy_from_slice(x);
        for &(sid, b) in lift {
            let site = &self.complex.sites[sid as usize];
            let w = site_value_point(site, x, b);
            site.frame.add_scaled(&mut out, w);
        }
        out
    }

    /// Cell containing a lifted real point.
    pub fn locate_cell(&self, x: &[f64], lift: &[(u32, bool)]) -> Option<usize> {
        let idx = self.index();
        let key_lift: Lift = lift.to_vec();
        for d in 0..=self.resolution {
            let m = pow5(d) as f64;
            let corner: Vec<u64> = x.iter().map(|xi| ((xi * m).floor() as i64).clamp(0, m as i64 - 1) as u64).collect();
            if let Some(&c) = idx.cells.get(&(d, corner, key_lift.clone())) {
                return Some(c);
            }
        }
        None
    }

    /// Kuhn simplex of a cell containing a real point: corner indices and
    /// barycentric weights.
    pub fn simplex_weights(&self, cell: usize, x: &[f64]) -> Vec<(usize, f64)> {
        let rec = &self.complex.cells[cell];
        let k = self.k();
        let m = pow5(rec.address.depth) as f64;
        let mut y: Vec<f64> =
            (0..k).map(|d| (x[d] * m - rec.address.corner[d] as f64).clamp(0.0, 1.0)).collect();
        for (d, yd) in y.iter_mut().enumerate() {
            if (rec.mirror >> d) & 1 == 1 {
                *yd = 1.0 - *yd;
            }
        }
        let mut order: Vec<usize> = (0..k).collect();
        order.sort_by(|a, b| y[*b].partial_cmp(&y[*a]).unwrap().then(a.cmp(b)));
        let mut out = Vec::with_capacity(k + 1);
        let mut v = 0usize;
        let mut prev = 1.0;
        for &axis in &order {
            out.push((v ^ rec.mirror as usize, prev - y[axis]));
            prev = y[axis];
            v |= 1 << axis;
        }
        out.push((v ^ rec.mirror as usize, prev));
        out
    }

    /// Piecewise-linear interpolation of the vertex coordinates in a cell.
    pub fn pl_eval(&self, cell: usize, x: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; self.ambient_dim];
        for (corner, w) in self.simplex_weights(cell, x) {
            let v = self.vertex(self.cell_vertices[cell][corner]);
            for (o, c) in out.iter_mut().zip(v) {
                *o += w * c;
            }
        }
        out
    }

    /// Jacobian (ambient × k) of the affine piece on a Kuhn simplex given as
    /// a corner path.
    pub fn simplex_jacobian(&self, cell: usize, simplex: &[usize]) -> DMatrix<f64> {
        let k = self.k();
        let h = 1.0 / pow5(self.complex.cells[cell].address.depth) as f64;
        let mut j = DMatrix::zeros(self.ambient_dim, k);
        for w in simplex.windows(2) {
            let diff = w[0] ^ w[1];
            let axis = diff.trailing_zeros() as usize;
            let sign = if w[1] & diff != 0 { 1.0 } else { -1.0 };
            let a = self.vertex(self.cell_vertices[cell][w[0]]);
            let b = self.vertex(self.cell_vertices[cell][w[1]]);
            for r in 0..self.ambient_dim {
                j[(r, axis)] = sign * (b[r] - a[r]) / h;
            }
        }
        j
    }

    /// Largest and smallest singular values over all affine pieces.
    pub fn piece_singular_range(&self) -> (f64, f64) {
        let k = self.k();
        (0..self.cell_count())
            .into_par_iter()
            .map(|c| {
                let mut hi: f64 = 0.0;
                let mut lo = f64::INFINITY;
                for s in kuhn_simplices(k, self.complex.cells[c].mirror) {
                    let sv = self.simplex_jacobian(c, &s).singular_values();
                    hi = hi.max(sv.max());
                    lo = lo.min(sv.min());
                }
                (hi, lo)
            })
            .reduce(|| (0.0, f64::INFINITY), |a, b| (a.0.max(b.0), a.1.min(b.1)))
    }

    /// Largest operator norm of the fiber rows (coordinates k..) over all
    /// affine pieces: the Lipschitz constant of F − (x, 0).
    pub fn fiber_lipschitz(&self) -> f64 {
        let k = self.k();
        (0..self.cell_count())
            .into_par_iter()
            .map(|c| {
                kuhn_simplices(k, self.complex.cells[c].mirror)
                    .iter()
                    .map(|s| operator_norm(&self.simplex_jacobian(c, s).rows(k, self.ambient_dim - k).into_owned()))
                    .fold(0.0, f64::max)
            })
            .reduce(|| 0.0, f64::max)
    }

    pub fn cell_count(&self) -> usize {
        self.complex.cells.len()
    }

    pub fn vertex_count(&self) -> usize {
        self.vertices.len()
    }
}

/// F at a canonical lattice vertex.
pub fn eval_lattice(sites: &[CoverSite], key: &VertexKey, res: u32, k: usize, ambient_dim: usize) -> Vec<f64> {
    let s = pow5(res) as f64;
    let mut out = vec![0.0; ambient_dim];
    for d in 0..k {
        out[d] = key.coords[d] as f64 / s;
    }
    for &(sid, b) in &key.lift {
        let site = &sites[sid as usize];
        let w = site_value_lattice(site, &key.coords, res, Some(b));
        site.frame.add_scaled(&mut out, w);
    }
    out
}
