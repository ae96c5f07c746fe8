//! Small numeric helpers shared by the exact (rational) and floating paths.

use nalgebra::DMatrix;
use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{FromPrimitive, Num, Signed, ToPrimitive};

/// Field-like scalar used by the closed-form deformation pieces so the same
/// formula runs on `f64` and on `BigRational`.
pub trait Scalar: Clone + PartialOrd + Num + Signed + FromPrimitive + std::fmt::Debug {}

impl<T> Scalar for T where T: Clone + PartialOrd + Num + Signed + FromPrimitive + std::fmt::Debug {}

/// `n / d` in any scalar.
pub fn frac<S: Scalar>(n: i64, d: i64) -> S {
    S::from_i64(n).expect("i64 fits") / S::from_i64(d).expect("i64 fits")
}

pub fn max_s<S: Scalar>(a: S, b: S) -> S {
    if a >= b {
        a
    } else {
        b
    }
}

pub fn min_s<S: Scalar>(a: S, b: S) -> S {
    if a <= b {
        a
    } else {
        b
    }
}

pub fn pow5(e: u32) -> u64 {
    5u64.checked_pow(e).expect("5^e overflows u64")
}

pub fn pow5_i128(e: u32) -> i128 {
    5i128.checked_pow(e).expect("5^e overflows i128")
}

pub fn rat(n: i64, d: i64) -> BigRational {
    BigRational::new(BigInt::from(n), BigInt::from(d))
}

pub fn rat_to_f64(r: &BigRational) -> f64 {
    r.to_f64().unwrap_or(f64::NAN)
}

/// Largest singular value of a dense matrix.
pub fn operator_norm(m: &DMatrix<f64>) -> f64 {
    if m.is_empty() {
        return 0.0;
    }
    m.clone().singular_values().max()
}

/// Smallest singular value (the co-Lipschitz constant of an injective linear map).
pub fn min_singular_value(m: &DMatrix<f64>) -> f64 {
    if m.is_empty() {
        return 0.0;
    }
    m.clone().singular_values().min()
}

pub fn norm(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}

pub fn dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum::<f64>().sqrt()
}
