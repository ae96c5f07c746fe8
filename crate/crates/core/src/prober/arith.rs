//! Scalar bookkeeping of the hole argument: ring depth, the constant c, the
//! k_j recursion and the divergence of Σ δ_{k_j}.

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{One, Zero};
use serde::{Deserialize, Serialize};

use crate::numeric::rat_to_f64;
use crate::schedule::DeltaSchedule;

/// i_n = ⌈−log₅(5^{-e}·c·δ_n)⌉ with e = n+2 (Hilbert, `affine_n` = 0) or
/// e = n+N+5 (ℝ⁴ and ℝ^{k+2} towers with affine level N).
pub fn compute_in(n: u32, c: f64, delta_n: f64, affine_n: u32) -> i64 {
    let e = if affine_n == 0 { n as i64 + 2 } else { (n + affine_n) as i64 + 5 };
    // −log₅(5^{-e} x) = e − log₅ x
    let x = c * delta_n;
    let mut i = e + (-(x.ln() / 5f64.ln())).ceil() as i64;
    // settle the ceiling against float error: 5^{-i} ≤ 5^{-e} x < 5^{-i+1}
    let ok_low = |i: i64| (-(i - e) as f64 * 5f64.ln()).exp() <= x * (1.0 + 1e-15);
    while !ok_low(i) {
        i += 1;
    }
    while ok_low(i - 1) {
        i -= 1;
    }
    i
}

/// c = 10^{-6}/(C + glip F).
pub fn choose_c(lip_c: f64, glip_f: f64) -> f64 {
    1e-6 / (lip_c + glip_f)
}

/// ℝ^{k+2} variant: half the threshold at which
/// 16(√k·C + glip F)·c < 5^{-3}/(2·glip F₀).
pub fn choose_c_rk(k: usize, lip_c: f64, glip_f: f64, glip_f0: f64) -> f64 {
    0.5 * 5f64.powi(-3) / (32.0 * glip_f0 * ((k as f64).sqrt() * lip_c + glip_f))
}

/// ⌊G·log₁₀ x⌋ for an integer x ≥ 1 and integer G, exactly: the largest m
/// with 10^m ≤ x^G.
pub fn floor_g_log10(x: u64, g: u32) -> u64 {
    let xg = BigInt::from(x).pow(g);
    let mut m = (g as f64 * (x as f64).log10()).floor().max(0.0) as u32;
    let ten = BigInt::from(10);
    while ten.pow(m + 1) <= xg {
        m += 1;
    }
    while m > 0 && ten.pow(m) > xg {
        m -= 1;
    }
    m as u64
}

/// k₁ = 1, k_{j+1} = k_j + ⌊G log₁₀(1/δ_{k_j})⌋ for δ_n = 1/(a+n), up to `limit`.
pub fn k_sequence(schedule: &DeltaSchedule, g: u32, limit: u64) -> Vec<u64> {
    let mut out = vec![1u64];
    loop {
        let k = *out.last().unwrap();
        let step = floor_g_log10(schedule.offset + k, g).max(1);
        let next = k + step;
        if next >= limit {
            break;
        }
        out.push(next);
    }
    out
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CumulativeBound {
    pub gamma: f64,
    pub g: u32,
    pub k: Vec<u64>,
    /// Running products after each stage.
    pub partial_products: Vec<f64>,
}

impl CumulativeBound {
    pub fn value(&self) -> f64 {
        *self.partial_products.last().unwrap_or(&1.0)
    }
}

/// Π_j (1 − γ δ_{k_j}) over the first `stages` factors.
pub fn cumulative_bound(stages: usize, gamma: f64, g: u32, schedule: &DeltaSchedule) -> CumulativeBound {
    let mut k = vec![1u64];
    while k.len() < stages {
        let last = *k.last().unwrap();
        k.push(last + floor_g_log10(schedule.offset + last, g).max(1));
    }
    k.truncate(stages);
    let mut acc = 1.0;
    let partial_products = k
        .iter()
        .map(|kj| {
            acc *= 1.0 - gamma * schedule.delta(*kj);
            acc
        })
        .collect();
    CumulativeBound { gamma, g, k, partial_products }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BlockCheck {
    pub t: u32,
    pub terms: usize,
    /// Exact lower bound of Σ δ_{k_i} over 10^t ≤ k_i < 10^{t+1}, as a float.
    pub sum_lower: f64,
    pub bound: f64,
    pub max_spacing: u64,
    pub spacing_limit: u64,
    pub passed: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DivergenceCertificate {
    /// Σ_{j=100}^{1000} 1/j, exact, as a float.
    pub harmonic_block: f64,
    pub harmonic_ok: bool,
    pub blocks: Vec<BlockCheck>,
    pub total_lower: f64,
    pub total_bound: f64,
    pub passed: bool,
}

/// Exact dyadic lower bound ⌊2^64/(a+k)⌋/2^64 of δ_k, as a numerator.
fn dyadic_floor(a: u64, k: u64) -> u128 {
    (1u128 << 64) / (a + k) as u128
}

/// Verify the harmonic block and the per-decade bounds
/// Σ_{10^t ≤ k_i < 10^{t+1}} δ_{k_i} ≥ 1/(42(t+1)) for t = 2..=blocks.
pub fn divergence_check(schedule: &DeltaSchedule, g: u32, blocks: u32) -> DivergenceCertificate {
    let mut h = BigRational::zero();
    for j in 100..=1000u32 {
        h += BigRational::new(BigInt::one(), BigInt::from(j));
    }
    let sixteenth = BigRational::new(BigInt::one(), BigInt::from(16));
    let harmonic_ok = h >= sixteenth;
    let ks = k_sequence(schedule, g, 10u64.pow(blocks + 1));
    let mut out = Vec::new();
    let mut total = BigRational::zero();
    let mut total_bound = BigRational::zero();
    for t in 2..=blocks {
        let (lo, hi) = (10u64.pow(t), 10u64.pow(t + 1));
        let inside: Vec<u64> = ks.iter().copied().filter(|k| *k >= lo && *k < hi).collect();
        let num: u128 = inside.iter().map(|k| dyadic_floor(schedule.offset, *k)).sum();
        let sum = BigRational::new(BigInt::from(num), BigInt::one() << 64);
        let bound = BigRational::new(BigInt::one(), BigInt::from(42 * (t as u64 + 1)));
        let max_spacing = inside.windows(2).map(|w| w[1] - w[0]).max().unwrap_or(0);
        let spacing_limit = 23 * (t as u64 + 1);
        let passed = sum >= bound && max_spacing <= spacing_limit;
        out.push(BlockCheck {
            t,
            terms: inside.len(),
            sum_lower: rat_to_f64(&sum),
            bound: rat_to_f64(&bound),
            max_spacing,
            spacing_limit,
            passed,
        });
        total += sum;
        total_bound += bound;
    }
    let passed = harmonic_ok && out.iter().all(|b| b.passed) && total >= total_bound;
    DivergenceCertificate {
        harmonic_block: rat_to_f64(&h),
        harmonic_ok,
        blocks: out,
        total_lower: rat_to_f64(&total),
        total_bound: rat_to_f64(&total_bound),
        passed,
    }
}
