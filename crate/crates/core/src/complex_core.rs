//! 5-adic cube complexes: addresses, subdivision, the central/outer/annulus
//! split of a subdivided cell, and concentric rings inside the inner annulus.

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{One, Zero};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::branched_cover::CoverSite;
use crate::numeric::pow5;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum ComplexError {
    #[error("subdivision count must be at least 1, got {0}")]
    ZeroSubdivision(u32),
    #[error("plane ({0},{1}) is not a pair of distinct axes below {2}")]
    BadPlane(usize, usize, usize),
    #[error("grandchildren missing: {missing} annulus cells have no subdivision")]
    GrandchildrenMissing { missing: usize },
    #[error("depth {0} below the parent is too shallow to form a ring (need at least 2)")]
    RingDepthTooSmall(u32),
    #[error("rings are defined for square cells only (k = {0})")]
    NotPlanar(usize),
}

/// One cover event on the path to a cell. `sheet` is `None` when the cell
/// lies in the central or outer part of the covered cell.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct CoverStep {
    pub site: u32,
    pub sheet: Option<bool>,
}

/// A cell of a 5-adic complex. The digit path is stored implicitly through the
/// integer south-west corner at resolution 5^-depth.
#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct CellAddress {
    pub root_id: u32,
    pub depth: u32,
    pub corner: Vec<u64>,
    pub branch_word: Vec<CoverStep>,
}

impl CellAddress {
    pub fn root(k: usize) -> Self {
        CellAddress { root_id: 0, depth: 0, corner: vec![0; k], branch_word: Vec::new() }
    }

    pub fn k(&self) -> usize {
        self.corner.len()
    }

    /// Child digits per level, most significant first.
    pub fn digits(&self) -> Vec<Vec<u8>> {
        (0..self.depth)
            .map(|level| {
                let shift = pow5(self.depth - level - 1);
                self.corner.iter().map(|c| ((c / shift) % 5) as u8).collect()
            })
            .collect()
    }

    pub fn last_digit(&self) -> Option<Vec<u8>> {
        (self.depth > 0).then(|| self.corner.iter().map(|c| (c % 5) as u8).collect())
    }

    pub fn side(&self) -> BigRational {
        BigRational::new(BigInt::one(), BigInt::from(pow5(self.depth)))
    }

    pub fn volume(&self) -> BigRational {
        let d = BigInt::from(pow5(self.depth)).pow(self.k() as u32);
        BigRational::new(BigInt::one(), d)
    }

    pub fn child(&self, digit: &[u8]) -> Self {
        CellAddress {
            root_id: self.root_id,
            depth: self.depth + 1,
            corner: self.corner.iter().zip(digit).map(|(c, d)| 5 * c + *d as u64).collect(),
            branch_word: self.branch_word.clone(),
        }
    }

    /// Ancestor at a shallower depth (branch word kept as is).
    pub fn ancestor_corner(&self, depth: u32) -> Vec<u64> {
        let shift = pow5(self.depth - depth);
        self.corner.iter().map(|c| c / shift).collect()
    }

    /// Corner at a finer resolution.
    pub fn corner_at(&self, depth: u32) -> Vec<u64> {
        let scale = pow5(depth - self.depth);
        self.corner.iter().map(|c| c * scale).collect()
    }

    /// Whether this cell's closure lies inside `other`'s base cell.
    pub fn base_within(&self, other: &CellAddress) -> bool {
        self.depth >= other.depth && self.ancestor_corner(other.depth) == other.corner
    }
}

/// All digit tuples of length k in lexicographic order.
pub fn digit_tuples(k: usize) -> Vec<Vec<u8>> {
    let mut out = vec![Vec::new()];
    for _ in 0..k {
        out = out
            .into_iter()
            .flat_map(|t| {
                (0..5u8).map(move |d| {
                    let mut t = t.clone();
                    t.push(d);
                    t
                })
            })
            .collect();
    }
    out
}

pub fn subdivide(cell: &CellAddress, times: u32) -> Result<Vec<CellAddress>, ComplexError> {
    if times == 0 {
        return Err(ComplexError::ZeroSubdivision(times));
    }
    let tuples = digit_tuples(cell.k());
    let mut level = vec![cell.clone()];
    for _ in 0..times {
        level = level.iter().flat_map(|c| tuples.iter().map(move |d| c.child(d))).collect();
    }
    Ok(level)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Role {
    Central,
    Outer,
    Annulus,
    Plain,
}

/// Role of a child digit with respect to the plane `(a, b)`.
pub fn child_role(digit: &[u8], plane: (usize, usize)) -> Role {
    let (x, y) = (digit[plane.0], digit[plane.1]);
    if x == 2 && y == 2 {
        Role::Central
    } else if x == 0 || x == 4 || y == 0 || y == 4 {
        Role::Outer
    } else {
        Role::Annulus
    }
}

pub fn check_plane(k: usize, plane: (usize, usize)) -> Result<(), ComplexError> {
    if plane.0 < plane.1 && plane.1 < k {
        Ok(())
    } else {
        Err(ComplexError::BadPlane(plane.0, plane.1, k))
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct AnnulusDecomposition {
    pub parent: CellAddress,
    pub plane: (usize, usize),
    pub central: Vec<CellAddress>,
    pub outer: Vec<CellAddress>,
    pub annulus: Vec<CellAddress>,
}

pub fn classify_children(
    cell: &CellAddress,
    plane: (usize, usize),
) -> Result<AnnulusDecomposition, ComplexError> {
    check_plane(cell.k(), plane)?;
    let mut dec = AnnulusDecomposition {
        parent: cell.clone(),
        plane,
        central: Vec::new(),
        outer: Vec::new(),
        annulus: Vec::new(),
    };
    for d in digit_tuples(cell.k()) {
        let child = cell.child(&d);
        match child_role(&d, plane) {
            Role::Central => dec.central.push(child),
            Role::Outer => dec.outer.push(child),
            _ => dec.annulus.push(child),
        }
    }
    Ok(dec)
}

/// Plane coordinates of a cell at its own depth, relative to an ancestor
/// square at `anc_depth`, in units of the cell side.
fn plane_offset(cell: &CellAddress, anc: &CellAddress, plane: (usize, usize)) -> (i64, i64) {
    let base = anc.corner_at(cell.depth);
    (
        cell.corner[plane.0] as i64 - base[plane.0] as i64,
        cell.corner[plane.1] as i64 - base[plane.1] as i64,
    )
}

/// Grandchildren (depth parent+2) of the annulus cells that stay at least one
/// grandchild side away from the boundary of the annulus.
pub fn inner_annulus(
    dec: &AnnulusDecomposition,
    grandchildren: &[CellAddress],
) -> Result<Vec<CellAddress>, ComplexError> {
    let per_cell = 5usize.pow(dec.parent.k() as u32);
    let missing = dec
        .annulus
        .iter()
        .filter(|a| grandchildren.iter().filter(|g| g.depth == a.depth + 1 && g.base_within(a)).count() < per_cell)
        .count();
    if missing > 0 {
        return Err(ComplexError::GrandchildrenMissing { missing });
    }
    Ok(grandchildren
        .iter()
        .filter(|g| {
            g.depth == dec.parent.depth + 2 && dec.annulus.iter().any(|a| g.base_within(a)) && {
                // grandchild index range over the parent: [5, 20) in each plane axis
                let (x, y) = plane_offset(g, &dec.parent, dec.plane);
                let outer_ok = (6..19).contains(&x) && (6..19).contains(&y);
                let inner_ok = !((9..16).contains(&x) && (9..16).contains(&y));
                outer_ok && inner_ok
            }
        })
        .cloned()
        .collect())
}

/// Kuhn simplices of the unit k-cube as lists of corner indices (bit d of an
/// index is the offset along axis d). Axes in `mirror` are reflected first, so
/// for k = 2 a mirror on axis 0 turns the SW-NE diagonal into NW-SE.
pub fn kuhn_simplices(k: usize, mirror: u32) -> Vec<Vec<usize>> {
    fn perms(items: Vec<usize>) -> Vec<Vec<usize>> {
        if items.len() <= 1 {
            return vec![items];
        }
        let mut out = Vec::new();
        for i in 0..items.len() {
            let mut rest = items.clone();
            let head = rest.remove(i);
            for mut p in perms(rest) {
                p.insert(0, head);
                out.push(p);
            }
        }
        out
    }
    perms((0..k).collect())
        .into_iter()
        .map(|order| {
            let mut v = 0usize;
            let mut simplex = vec![v ^ mirror as usize];
            for axis in order {
                v |= 1 << axis;
                simplex.push(v ^ mirror as usize);
            }
            simplex
        })
        .collect()
}

/// Mirror mask for a cell inside the annulus child `digit` of a cover in
/// `plane`: the NW and SE corner children use the anti-diagonal, so the ring
/// offset is affine on every simplex.
pub fn annulus_mirror(digit: &[u8], plane: (usize, usize)) -> u32 {
    match (digit[plane.0], digit[plane.1]) {
        (1, 3) | (3, 1) => 1 << plane.0,
        _ => 0,
    }
}

/// A closed ring of cells inside the inner annulus, ordered anticlockwise
/// starting at the cell just above the cut.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Ring {
    pub radius: u64,
    pub cells: Vec<CellAddress>,
}

/// Concentric L∞ rings of cells at `depth_rel` levels below the square `parent`,
/// restricted to its inner annulus.
pub fn partition_annuli(parent: &CellAddress, depth_rel: u32) -> Result<Vec<Ring>, ComplexError> {
    if parent.k() != 2 {
        return Err(ComplexError::NotPlanar(parent.k()));
    }
    if depth_rel < 2 {
        return Err(ComplexError::RingDepthTooSmall(depth_rel));
    }
    let m = pow5(depth_rel) as i64;
    let c = (m - 1) / 2;
    let h = (m / 5 - 1) / 2;
    let margin = m / 25;
    let lo = h + margin + 1;
    let hi = (3 * m / 5 - 1) / 2 - margin;
    let depth = parent.depth + depth_rel;
    let base = parent.corner_at(depth);
    let make = |i: i64, j: i64| CellAddress {
        root_id: parent.root_id,
        depth,
        corner: vec![base[0] + i as u64, base[1] + j as u64],
        branch_word: parent.branch_word.clone(),
    };
    let mut rings = Vec::new();
    for rho in lo..=hi {
        let (e, n, w, s) = (c + rho, c + rho, c - rho, c - rho);
        let mut cells = Vec::with_capacity(8 * rho as usize);
        for j in (c - h)..n {
            cells.push(make(e, j));
        }
        for i in ((w + 1)..=e).rev() {
            cells.push(make(i, n));
        }
        for j in ((s + 1)..=n).rev() {
            cells.push(make(w, j));
        }
        for i in w..e {
            cells.push(make(i, s));
        }
        for j in s..(c - h) {
            cells.push(make(e, j));
        }
        rings.push(Ring { radius: rho as u64, cells });
    }
    Ok(rings)
}

/// Per-cell record of a stage complex.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct CellRecord {
    pub address: CellAddress,
    /// Measure weight is 2^-weight_exp.
    pub weight_exp: u32,
    pub role: Role,
    /// Cell belongs to the undeformed band next to the previous skeleton.
    pub residual: bool,
    /// Axes reflected before the Kuhn triangulation (see `kuhn_simplices`).
    pub mirror: u32,
}

impl CellRecord {
    pub fn weight(&self) -> BigRational {
        BigRational::new(BigInt::one(), BigInt::one() << self.weight_exp as usize)
    }
}

/// The finite complex X_n: top-dimensional cells with sheet words and the
/// cover sites that created them.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct StageComplex {
    pub k: usize,
    pub generation: u32,
    pub cells: Vec<CellRecord>,
    pub sites: Vec<CoverSite>,
}

impl StageComplex {
    pub fn unit(k: usize) -> Self {
        StageComplex {
            k,
            generation: 0,
            cells: vec![CellRecord {
                address: CellAddress::root(k),
                weight_exp: 0,
                role: Role::Plain,
                residual: false,
                mirror: 0,
            }],
            sites: Vec::new(),
        }
    }

    pub fn total_mass(&self) -> BigRational {
        self.cells.iter().fold(BigRational::zero(), |acc, c| acc + c.weight() * c.address.volume())
    }

    pub fn max_depth(&self) -> u32 {
        self.cells.iter().map(|c| c.address.depth).max().unwrap_or(0)
    }

    /// Sum of sheet weights over every base cell of the finest grid; each entry
    /// is exactly 1 when the cells tile every sheet of the base once.
    pub fn base_coverage(&self) -> std::collections::BTreeMap<Vec<u64>, BigRational> {
        let m = self.max_depth();
        let mut cover = std::collections::BTreeMap::new();
        for c in &self.cells {
            let scale = pow5(m - c.address.depth);
            let corner = c.address.corner_at(m);
            let count = (scale as usize).pow(self.k as u32);
            for idx in 0..count {
                let mut rem = idx;
                let key: Vec<u64> = corner
                    .iter()
                    .map(|x| {
                        let off = (rem % scale as usize) as u64;
                        rem /= scale as usize;
                        x + off
                    })
                    .collect();
                *cover.entry(key).or_insert_with(BigRational::zero) += c.weight();
            }
        }
        cover
    }
}
