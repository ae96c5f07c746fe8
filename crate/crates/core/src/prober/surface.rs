//! Test surfaces: Lipschitz graphs x ↦ (x, φ(x)) over a cell-resolution
//! domain in the unit square, into the ambient space of a stage.

use std::collections::BTreeSet;
use std::fmt;
use std::sync::Arc;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::complex_core::CellAddress;
use crate::numeric::{dist, pow5};
use crate::stage::Stage;

/// Domain of a surface, given as an indicator on cells of one depth.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum Domain {
    Full,
    Empty,
    Cells { depth: u32, cells: BTreeSet<Vec<u64>> },
}

/// An axis-aligned square of the domain, by lower corner and side.
#[derive(Clone, Debug, PartialEq)]
pub struct Patch {
    pub lo: [f64; 2],
    pub side: f64,
}

impl Domain {
    /// Squares partitioning (domain ∩ base cell of `cell`) up to measure zero.
    pub fn patches(&self, cell: &CellAddress) -> Vec<Patch> {
        let whole = || {
            let m = pow5(cell.depth) as f64;
            vec![Patch { lo: [cell.corner[0] as f64 / m, cell.corner[1] as f64 / m], side: 1.0 / m }]
        };
        match self {
            Domain::Full => whole(),
            Domain::Empty => Vec::new(),
            Domain::Cells { depth, cells } if *depth <= cell.depth => {
                if cells.contains(&cell.ancestor_corner(*depth)) {
                    whole()
                } else {
                    Vec::new()
                }
            }
            Domain::Cells { depth, cells } => {
                let m = pow5(*depth) as f64;
                let scale = pow5(depth - cell.depth);
                cells
                    .iter()
                    .filter(|c| c.iter().zip(&cell.corner).all(|(x, y)| x / scale == *y))
                    .map(|c| Patch { lo: [c[0] as f64 / m, c[1] as f64 / m], side: 1.0 / m })
                    .collect()
            }
        }
    }

    pub fn contains(&self, x: &[f64]) -> bool {
        match self {
            Domain::Full => true,
            Domain::Empty => false,
            Domain::Cells { depth, cells } => {
                let m = pow5(*depth) as f64;
                let corner: Vec<u64> = x.iter().map(|v| ((v * m).floor() as i64).clamp(0, m as i64 - 1) as u64).collect();
                cells.contains(&corner)
            }
        }
    }
}

pub type SurfaceMap = Arc<dyn Fn(&[f64]) -> Vec<f64> + Send + Sync>;

#[derive(Clone)]
pub struct ProbeSurface {
    pub name: String,
    pub domain: Domain,
    pub map: SurfaceMap,
    /// Declared Lipschitz constant C of x ↦ (x, φ(x)).
    pub lipschitz: f64,
    /// Declared Lipschitz constant of φ alone; at most (C² − 1)^½.
    pub fiber_lipschitz: f64,
    pub bilipschitz: Option<f64>,
    pub ambient_dim: usize,
}

impl fmt::Debug for ProbeSurface {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("ProbeSurface")
            .field("name", &self.name)
            .field("domain", &self.domain)
            .field("lipschitz", &self.lipschitz)
            .field("ambient_dim", &self.ambient_dim)
            .finish()
    }
}

impl ProbeSurface {
    /// Inclusion of the base plane.
    pub fn flat(ambient_dim: usize) -> Self {
        ProbeSurface {
            name: "flat".into(),
            domain: Domain::Full,
            map: Arc::new(move |x: &[f64]| {
                let mut out = vec![0.0; ambient_dim];
                out[..2].copy_from_slice(&x[..2]);
                out
            }),
            lipschitz: 1.0,
            fiber_lipschitz: 0.0,
            bilipschitz: Some(1.0),
            ambient_dim,
        }
    }

    /// (x, y) ↦ (x, y, s(x − ½), 0, …).
    pub fn tilt(slope: f64, ambient_dim: usize) -> Self {
        let c = (1.0 + slope * slope).sqrt();
        ProbeSurface {
            name: format!("tilt-{slope}"),
            domain: Domain::Full,
            map: Arc::new(move |x: &[f64]| {
                let mut out = vec![0.0; ambient_dim];
                out[..2].copy_from_slice(&x[..2]);
                out[2] = slope * (x[0] - 0.5);
                out
            }),
            lipschitz: c,
            fiber_lipschitz: slope.abs(),
            bilipschitz: Some(c),
            ambient_dim,
        }
    }

    pub fn empty(ambient_dim: usize) -> Self {
        ProbeSurface { name: "empty".into(), domain: Domain::Empty, ..Self::flat(ambient_dim) }
    }

    /// The stage map restricted to one sheet: at each base point the
    /// lexicographically least lift. Declared with the stage fiber Lipschitz
    /// bound, which holds away from the cuts.
    pub fn single_sheet(stage: &Stage, glip_fiber: f64) -> Self {
        let stage = Arc::new(stage.clone());
        let ambient_dim = stage.ambient_dim;
        ProbeSurface {
            name: "single-sheet".into(),
            domain: Domain::Full,
            map: Arc::new(move |x: &[f64]| {
                let lifts = stage.lifts_at(x);
                stage.eval_point(x, &lifts[0])
            }),
            lipschitz: (1.0 + glip_fiber * glip_fiber).sqrt(),
            fiber_lipschitz: glip_fiber,
            bilipschitz: None,
            ambient_dim,
        }
    }

    /// Flat inclusion, the three tilts and the single-sheet surface.
    pub fn battery(stage: &Stage, glip_fiber: f64) -> Vec<ProbeSurface> {
        let d = stage.ambient_dim;
        let mut out = vec![Self::flat(d)];
        out.extend([0.25, 0.5, 1.0].map(|s| Self::tilt(s, d)));
        out.push(Self::single_sheet(stage, glip_fiber));
        out
    }

    /// Largest |Φ(x) − Φ(y)|/|x − y| and |φ(x) − φ(y)|/|x − y| over random
    /// domain pairs.
    pub fn sampled_lipschitz(&self, pairs: usize, seed: u64) -> (f64, f64) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let (mut worst, mut fiber): (f64, f64) = (0.0, 0.0);
        for _ in 0..pairs {
            let x = [rng.gen::<f64>(), rng.gen::<f64>()];
            let y = [rng.gen::<f64>(), rng.gen::<f64>()];
            if !self.domain.contains(&x) || !self.domain.contains(&y) || x == y {
                continue;
            }
            let (a, b) = ((self.map)(&x), (self.map)(&y));
            worst = worst.max(dist(&a, &b) / dist(&x, &y));
            fiber = fiber.max(dist(&a[2..], &b[2..]) / dist(&x, &y));
        }
        (worst, fiber)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn patches_follow_the_indicator() {
        let cell = CellAddress { root_id: 0, depth: 1, corner: vec![2, 3], branch_word: vec![] };
        assert_eq!(Domain::Full.patches(&cell).len(), 1);
        assert!(Domain::Empty.patches(&cell).is_empty());
        let coarse = Domain::Cells { depth: 0, cells: BTreeSet::from([vec![0, 0]]) };
        assert_eq!(coarse.patches(&cell)[0].side, 0.2);
        let fine = Domain::Cells { depth: 2, cells: BTreeSet::from([vec![10, 15], vec![14, 19], vec![15, 15]]) };
        let p = fine.patches(&cell);
        assert_eq!(p.len(), 2);
        assert!((p[1].lo[0] - 14.0 / 25.0).abs() < 1e-15);
        assert!(fine.contains(&[0.41, 0.61]) && !fine.contains(&[0.7, 0.61]));
    }

    #[test]
    fn declared_constants_hold() {
        for s in [ProbeSurface::flat(4), ProbeSurface::tilt(0.5, 4), ProbeSurface::tilt(1.0, 6)] {
            let (c, f) = s.sampled_lipschitz(500, 1);
            assert!(c <= s.lipschitz * (1.0 + 1e-12) && f <= s.fiber_lipschitz * (1.0 + 1e-12), "{}", s.name);
            assert!(s.fiber_lipschitz <= (s.lipschitz.powi(2) - 1.0).sqrt() * (1.0 + 1e-12));
        }
        assert_eq!(ProbeSurface::empty(4).sampled_lipschitz(100, 1), (0.0, 0.0));
    }
}
