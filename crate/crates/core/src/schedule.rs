//! Deformation amplitude schedules δ_n = 1/(a + n).

use num_rational::BigRational;
use serde::{Deserialize, Serialize};

use crate::numeric::rat;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum ScheduleKind {
    Hilbert,
    R4,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct DeltaSchedule {
    pub kind: ScheduleKind,
    pub offset: u64,
}

impl DeltaSchedule {
    pub fn hilbert() -> Self {
        DeltaSchedule { kind: ScheduleKind::Hilbert, offset: 10 }
    }

    pub fn r4() -> Self {
        DeltaSchedule { kind: ScheduleKind::R4, offset: 1_000_000_000 }
    }

    pub fn of_kind(kind: ScheduleKind) -> Self {
        match kind {
            ScheduleKind::Hilbert => Self::hilbert(),
            ScheduleKind::R4 => Self::r4(),
        }
    }

    pub fn delta(&self, n: u64) -> f64 {
        1.0 / (self.offset + n) as f64
    }

    pub fn delta_exact(&self, n: u64) -> BigRational {
        rat(1, (self.offset + n) as i64)
    }

    pub fn partial_sum(&self, n: u64) -> f64 {
        (1..=n).map(|m| self.delta(m)).sum()
    }

    pub fn partial_sum_sq(&self, n: u64) -> f64 {
        (1..=n).map(|m| self.delta(m).powi(2)).sum()
    }

    pub fn partial_sum_sq_exact(&self, n: u64) -> BigRational {
        (1..=n).fold(rat(0, 1), |acc, m| {
            let d = self.delta_exact(m);
            acc + d.clone() * d
        })
    }

    /// Exact bounds on the full series Σ_{n≥1} δ_n²: 1/(a+1) ≤ Σ ≤ 1/a.
    pub fn sum_sq_bounds(&self) -> (BigRational, BigRational) {
        (rat(1, self.offset as i64 + 1), rat(1, self.offset as i64))
    }

    /// Left side of the (Claim j) schedule condition, 4·10³(1+Σδ²)^{1/2}Σδ²,
    /// evaluated at the upper bound of Σδ².
    pub fn claim_condition_lhs(&self) -> f64 {
        let s = 1.0 / self.offset as f64;
        4.0e3 * (1.0 + s).sqrt() * s
    }

    pub fn claim_condition_holds(&self) -> bool {
        self.claim_condition_lhs() < 0.125
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn tail_bounds_bracket_partial_sums() {
        let s = DeltaSchedule::hilbert();
        let (lo, hi) = s.sum_sq_bounds();
        let p = s.partial_sum_sq_exact(2000);
        assert!(p < hi);
        // the missing tail Σ_{n>2000} is below 1/(2010)
        assert!(p + rat(1, 2010) > lo);
    }

    #[test]
    fn claim_condition_by_schedule() {
        assert!(DeltaSchedule::r4().claim_condition_holds());
        assert!(DeltaSchedule::r4().claim_condition_lhs() < 1e-5);
        let h = DeltaSchedule::hilbert();
        assert!(!h.claim_condition_holds());
        // oracle: direct partial sum already exceeds the threshold
        let partial = h.partial_sum_sq(10_000);
        assert!(4.0e3 * (1.0 + partial).sqrt() * partial > 0.125);
    }

    #[test]
    fn partial_sums_grow_without_bound() {
        let s = DeltaSchedule::hilbert();
        assert!(s.partial_sum(10_000) > s.partial_sum(1_000) + 2.0);
    }
}
