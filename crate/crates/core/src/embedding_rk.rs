//! The k-dimensional tower: the same recursion as in ℝ⁴ with k-cubes, where
//! stage j+1 deforms in the coordinate plane numbered j mod C(k,2).

use serde::{Deserialize, Serialize};

use crate::embedding_r4::{build_stage_one, TowerError, TowerStage};
use crate::schedule::DeltaSchedule;
use crate::stage::{site_value_lattice, Stage};

/// Lexicographic numbering of the coordinate planes of ℝ^k (0-based axes).
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct PlaneCycle {
    pub k: usize,
    pub planes: Vec<(usize, usize)>,
}

impl PlaneCycle {
    pub fn new(k: usize) -> Result<PlaneCycle, TowerError> {
        if k < 2 {
            return Err(TowerError::DimensionTooSmall(k));
        }
        let planes = (0..k).flat_map(|a| ((a + 1)..k).map(move |b| (a, b))).collect();
        Ok(PlaneCycle { k, planes })
    }

    pub fn period(&self) -> usize {
        self.planes.len()
    }

    pub fn plane(&self, j: u64) -> (usize, usize) {
        self.planes[(j % self.planes.len() as u64) as usize]
    }
}

/// The plane used to build stage j+1.
pub fn plane_for_stage(j: u64, k: usize) -> Result<(usize, usize), TowerError> {
    Ok(PlaneCycle::new(k)?.plane(j))
}

/// Stage `j` of the k-dimensional tower. Stage 0 is the flat cube; stage 1
/// is covered from the unit cube; deeper stages go through the generic step
/// and stop at its resource checks.
pub fn build_stage_rk(j: u32, k: usize, schedule: &DeltaSchedule, n_cap: u32, ceiling: usize) -> Result<TowerStage, TowerError> {
    PlaneCycle::new(k)?;
    match j {
        0 => Ok(TowerStage::zero(k, schedule)),
        1 => Ok(build_stage_one(k, schedule, n_cap, ceiling)?.0),
        _ => Err(TowerError::StageTooDeep { requested: j, supported: 1 }),
    }
}

/// Largest difference of a site's contribution along lattice directions
/// transverse to its plane, over all stage vertices inside the site.
pub fn fiber_constancy_defect(stage: &Stage) -> f64 {
    let k = stage.k();
    let res = stage.resolution;
    let mut worst: f64 = 0.0;
    for key in &stage.vertices {
        for &(sid, bit) in &key.lift {
            let site = &stage.complex.sites[sid as usize];
            let v = site_value_lattice(site, &key.coords, res, Some(bit));
            // move the vertex to the site's base face along every other axis
            let mut base = key.coords.clone();
            let scale = crate::numeric::pow5(res - site.depth);
            for a in 0..k {
                if a != site.plane.0 && a != site.plane.1 {
                    base[a] = site.corner[a] * scale;
                }
            }
            let w = site_value_lattice(site, &base, res, Some(bit));
            worst = worst.max((v[0] - w[0]).abs()).max((v[1] - w[1]).abs());
        }
    }
    worst
}
