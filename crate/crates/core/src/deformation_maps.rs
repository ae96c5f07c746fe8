//! The helper profiles h1, h2, the radial cut-off φ, the annulus deformation Ψ
//! and its certified piecewise-affine interpolant Φ.
//!
//! Angles are in half-turns (T = θ/π) so every breakpoint is an integer.

use num_rational::{BigRational, Ratio};
use num_traits::ToPrimitive;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::branched_cover::{
    canonical_bit, classify_uv, lift_angle, polar, polar_exact, CoverSite, Deformation, Frame, PointStatus, SitePoint,
};
use crate::complex_core::{annulus_mirror, kuhn_simplices, CellAddress};
use crate::numeric::{frac, pow5, Scalar};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum DeformError {
    #[error("angle {0} half-turns outside [0, {1}]")]
    AngleOutOfRange(f64, f64),
    #[error("radius {0} outside [0, {1}]")]
    RadiusOutOfRange(f64, f64),
    #[error("subdivision depth must be at least 1")]
    ZeroDepth,
    #[error("{bound} violated: measured {measured:e}, limit {limit:e}")]
    BoundViolated { bound: &'static str, measured: f64, limit: f64 },
    #[error("no subdivision depth up to {0} certifies the affine approximation")]
    SearchExhausted(u32),
}

fn check_angle<S: Scalar>(t: &S, hi: i64) -> Result<(), DeformError> {
    if *t < S::zero() || *t > frac::<S>(hi, 1) {
        let v = format!("{t:?}").parse::<f64>().unwrap_or(f64::NAN);
        return Err(DeformError::AngleOutOfRange(v, hi as f64));
    }
    Ok(())
}

/// h1(θ) = (δ/2π)(2π − |θ − 2π|), with θ = πT, T ∈ [0, 4].
pub fn h1<S: Scalar>(t: &S, delta: &S) -> Result<S, DeformError> {
    check_angle(t, 4)?;
    let dev = (t.clone() - frac::<S>(2, 1)).abs();
    Ok(delta.clone() * (S::one() - dev / frac::<S>(2, 1)))
}

/// h2: −δT on [0,1], δ(T−2) on [1,3], δ(4−T) on [3,4].
pub fn h2<S: Scalar>(t: &S, delta: &S) -> Result<S, DeformError> {
    check_angle(t, 4)?;
    let one = S::one();
    let three = frac::<S>(3, 1);
    Ok(if *t <= one {
        -(delta.clone() * t.clone())
    } else if *t <= three {
        delta.clone() * (t.clone() - frac::<S>(2, 1))
    } else {
        delta.clone() * (frac::<S>(4, 1) - t.clone())
    })
}

/// Breakpoints of h1 and h2 in half-turns.
pub const H_BREAKPOINTS: [i64; 5] = [0, 1, 2, 3, 4];

/// Slopes of (h1, h2) per half-turn on each interval between breakpoints.
/// Per radian they are these values divided by π.
pub fn h_slopes<S: Scalar>(delta: &S) -> Vec<(S, S)> {
    H_BREAKPOINTS
        .windows(2)
        .map(|w| {
            let (a, b) = (frac::<S>(w[0], 1), frac::<S>(w[1], 1));
            let d = b.clone() - a.clone();
            let s1 = (h1(&b, delta).unwrap() - h1(&a, delta).unwrap()) / d.clone();
            let s2 = (h2(&b, delta).unwrap() - h2(&a, delta).unwrap()) / d;
            (s1, s2)
        })
        .collect()
}

pub fn h1_radians(theta: f64, delta: f64) -> Result<f64, DeformError> {
    h1(&(theta / std::f64::consts::PI), &delta)
}

pub fn h2_radians(theta: f64, delta: f64) -> Result<f64, DeformError> {
    h2(&(theta / std::f64::consts::PI), &delta)
}

/// Cut-off in units of the annulus width: 5r on [0,1/5], 1 on [1/5,4/5],
/// 5(1−r) on [4/5,1].
pub fn phi_unit<S: Scalar>(r: &S) -> S {
    let fifth = frac::<S>(1, 5);
    let four_fifths = frac::<S>(4, 5);
    let five = frac::<S>(5, 1);
    if *r <= fifth {
        five * r.clone()
    } else if *r <= four_fifths {
        S::one()
    } else {
        five * (S::one() - r.clone())
    }
}

/// φ(r) for a generation-i square: annulus width 5^{-i-1}.
pub fn phi_cutoff(r: &BigRational, i: u32) -> Result<BigRational, DeformError> {
    let width = BigRational::new(1.into(), pow5(i + 1).into());
    if *r < BigRational::from_integer(0.into()) || *r > width {
        return Err(DeformError::RadiusOutOfRange(r.to_f64().unwrap_or(f64::NAN), width.to_f64().unwrap()));
    }
    Ok(width.clone() * phi_unit(&(r / width)))
}

/// Squared fiber gap ‖h(T) − h(T+2)‖² for T ∈ [0, 2].
pub fn fiber_gap_sq<S: Scalar>(t: &S, delta: &S) -> Result<S, DeformError> {
    check_angle(t, 2)?;
    let t2 = t.clone() + frac::<S>(2, 1);
    let a = h1(t, delta)? - h1(&t2, delta)?;
    let b = h2(t, delta)? - h2(&t2, delta)?;
    Ok(a.clone() * a + b.clone() * b)
}

pub fn fiber_gap_lower(t: f64, delta: f64) -> Result<f64, DeformError> {
    Ok(fiber_gap_sq(&t, &delta)?.sqrt())
}

/// Exact minimum of the squared fiber gap over T ∈ [0, 2]. The gap vector is
/// affine between breakpoints, so on each piece the squared norm is a
/// parabola whose minimum is at its vertex or an endpoint.
pub fn fiber_gap_min_sq<S: Scalar>(delta: &S) -> S {
    let mut best: Option<S> = None;
    for w in [0i64, 1, 2].windows(2) {
        let (lo, hi) = (frac::<S>(w[0], 1), frac::<S>(w[1], 1));
        let f0 = fiber_gap_sq(&lo, delta).unwrap();
        let f1 = fiber_gap_sq(&hi, delta).unwrap();
        let mid = (lo.clone() + hi.clone()) / frac::<S>(2, 1);
        let fm = fiber_gap_sq(&mid, delta).unwrap();
        // parabola through (0,f0), (1/2,fm), (1,f1) in the local variable
        let two = frac::<S>(2, 1);
        let a = two.clone() * (f0.clone() + f1.clone() - two.clone() * fm.clone());
        let b = frac::<S>(4, 1) * fm - frac::<S>(3, 1) * f0.clone() - f1.clone();
        let mut cand = vec![f0.clone(), f1];
        if a > S::zero() {
            let x = -b.clone() / (two * a.clone());
            if x > S::zero() && x < S::one() {
                cand.push(f0 + b * x.clone() + a * x.clone() * x);
            }
        }
        for c in cand {
            best = Some(match best {
                Some(bv) if bv <= c => bv,
                _ => c,
            });
        }
    }
    best.unwrap()
}

/// Ψ in absolute units from the chart values: width·φ(r)·(h1, h2)(T_lift).
pub fn psi_value<S: Scalar>(r_unit: &S, t_lift: &S, delta: &S, width: &S) -> [S; 2] {
    let amp = width.clone() * phi_unit(r_unit);
    [amp.clone() * h1(t_lift, delta).unwrap(), amp * h2(t_lift, delta).unwrap()]
}

/// Ψ at a lattice point of a site; `bit` is the canonical sheet bit.
pub fn psi_at(p: &SitePoint, bit: Option<bool>, delta: f64, width: f64) -> [f64; 2] {
    match (p.status, bit) {
        (PointStatus::Interior | PointStatus::OnCut, Some(b)) => {
            let (r, t) = polar_exact(p).expect("annulus point");
            let t = lift_angle(t, b);
            let rf = r.to_f64().unwrap();
            let tf = t.to_f64().unwrap();
            psi_value(&rf, &tf, &delta, &width)
        }
        _ => [0.0, 0.0],
    }
}

/// Exact Ψ at a rational point in annulus units.
pub fn psi_exact(u: &BigRational, v: &BigRational, bit: bool, delta: &BigRational, width: &BigRational) -> [BigRational; 2] {
    match polar(u.clone(), v.clone()) {
        Ok((r, t)) => psi_value(&r, &lift_angle(t, bit), delta, width),
        Err(_) => [BigRational::from_integer(0.into()), BigRational::from_integer(0.into())],
    }
}

/// Ψ at a real point given in annulus units; points off the open annulus map
/// to 0 and the cut takes the 0⁺ side.
pub fn psi_point(u: f64, v: f64, bit: bool, delta: f64, width: f64) -> [f64; 2] {
    match polar(u, v) {
        Ok((r, t)) => psi_value(&r, &lift_angle(t, bit), &delta, &width),
        Err(crate::branched_cover::CoverError::OnCut) => {
            psi_value(&(u - 0.5), &lift_angle(0.0, bit), &delta, &width)
        }
        Err(_) => [0.0, 0.0],
    }
}

/// Parameters of Ψ over a generation-i square.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct PsiParameters {
    pub delta: f64,
    pub i: u32,
}

impl PsiParameters {
    pub fn side(&self) -> f64 {
        1.0 / pow5(self.i) as f64
    }

    pub fn width(&self) -> f64 {
        self.side() / 5.0
    }

    /// Ψ at a point of the square [0, side]² on sheet `bit`.
    pub fn eval(&self, x: [f64; 2], bit: bool) -> [f64; 2] {
        let w = self.width();
        let u = x[0] / w - 2.5;
        let v = x[1] / w - 2.5;
        psi_point(u, v, bit, self.delta, w)
    }

    pub fn site(&self) -> CoverSite {
        CoverSite {
            id: 0,
            depth: self.i,
            corner: vec![0, 0],
            plane: (0, 1),
            delta: self.delta,
            frame: Frame::Coords(0, 1),
            deformation: Deformation::Exact,
            context: Vec::new(),
        }
    }
}

/// Sampled Lipschitz constant of Ψ over lifted pairs: local pairs continued
/// along the segment (the sheet flips when it crosses the cut).
pub fn sample_psi_lipschitz(params: &PsiParameters, pairs: usize, seed: u64) -> f64 {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let w = params.width();
    let mut best: f64 = 0.0;
    for n in 0..pairs {
        let p = [rng.gen_range(-1.5..1.5), rng.gen_range(-1.5..1.5)];
        let scale = 10f64.powi(-(1 + (n % 5) as i32));
        let ang = rng.gen_range(0.0..std::f64::consts::TAU);
        let q = [p[0] + scale * ang.cos(), p[1] + scale * ang.sin()];
        let bp: bool = rng.gen();
        let bq = bp ^ crate::branched_cover::crosses_cut(p, q);
        let a = psi_point(p[0], p[1], bp, params.delta, w);
        let b = psi_point(q[0], q[1], bq, params.delta, w);
        let num = ((a[0] - b[0]).powi(2) + (a[1] - b[1]).powi(2)).sqrt();
        let den = w * ((p[0] - q[0]).powi(2) + (p[1] - q[1]).powi(2)).sqrt();
        if den > 0.0 {
            best = best.max(num / den);
        }
    }
    best
}

/// Largest and smallest singular values of a 2×2 matrix [[a, b], [c, d]].
pub fn singular_values_2x2(m: [[f64; 2]; 2]) -> (f64, f64) {
    let [[a, b], [c, d]] = m;
    let s = a * a + b * b + c * c + d * d;
    let e = ((a * a + b * b - c * c - d * d).powi(2) + 4.0 * (a * c + b * d).powi(2)).sqrt();
    (((s + e) / 2.0).sqrt(), ((s - e) / 2.0).max(0.0).sqrt())
}

/// Minimum of ‖D(λ)‖² − ℓ(λ)² over the triangle with vertex data (D_i, ℓ_i),
/// D affine vector-valued and ℓ affine.
pub fn min_gap_on_triangle(d: [[f64; 2]; 3], l: [f64; 3]) -> f64 {
    let e1 = [d[1][0] - d[0][0], d[1][1] - d[0][1]];
    let e2 = [d[2][0] - d[0][0], d[2][1] - d[0][1]];
    let (m1, m2) = (l[1] - l[0], l[2] - l[0]);
    let dot = |a: [f64; 2], b: [f64; 2]| a[0] * b[0] + a[1] * b[1];
    // f(s,t) = c + 2 g·(s,t) + (s,t) H (s,t)ᵀ
    let c = dot(d[0], d[0]) - l[0] * l[0];
    let g = [dot(d[0], e1) - l[0] * m1, dot(d[0], e2) - l[0] * m2];
    let h = [[dot(e1, e1) - m1 * m1, dot(e1, e2) - m1 * m2], [dot(e1, e2) - m1 * m2, dot(e2, e2) - m2 * m2]];
    let f = |s: f64, t: f64| c + 2.0 * (g[0] * s + g[1] * t) + h[0][0] * s * s + 2.0 * h[0][1] * s * t + h[1][1] * t * t;
    let mut best = f(0.0, 0.0).min(f(1.0, 0.0)).min(f(0.0, 1.0));
    // edges: parametrize P(τ) = A + τ(B − A)
    let edges = [((0.0, 0.0), (1.0, 0.0)), ((0.0, 0.0), (0.0, 1.0)), ((1.0, 0.0), (0.0, 1.0))];
    for ((s0, t0), (s1, t1)) in edges {
        let (ds, dt) = (s1 - s0, t1 - t0);
        let qa = h[0][0] * ds * ds + 2.0 * h[0][1] * ds * dt + h[1][1] * dt * dt;
        let qb = 2.0 * (g[0] * ds + g[1] * dt) + 2.0 * (h[0][0] * s0 * ds + h[0][1] * (s0 * dt + t0 * ds) + h[1][1] * t0 * dt);
        if qa > 0.0 {
            let tau = -qb / (2.0 * qa);
            if tau > 0.0 && tau < 1.0 {
                best = best.min(f(s0 + tau * ds, t0 + tau * dt));
            }
        }
    }
    let det = h[0][0] * h[1][1] - h[0][1] * h[0][1];
    if det > 0.0 && h[0][0] > 0.0 {
        let s = (-g[0] * h[1][1] + g[1] * h[0][1]) / det;
        let t = (-g[1] * h[0][0] + g[0] * h[0][1]) / det;
        if s > 0.0 && t > 0.0 && s + t < 1.0 {
            best = best.min(f(s, t));
        }
    }
    best
}

/// Constants verified for one affine approximation.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CertifiedBounds {
    /// Largest operator norm over affine pieces.
    pub glip: f64,
    /// Smallest over pieces of min ‖ΔΦ‖ / ((δ/3)φ(r)) where φ > 0.
    pub separation_ratio: f64,
    pub sup_norm: f64,
    pub sup_limit: f64,
    /// Largest |Φ − Ψ| at cell midpoints.
    pub midpoint_error: f64,
}

/// One affine piece: a triangle of the N-fold subdivision on one sheet.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AffineChart {
    pub vertices: [[f64; 2]; 3],
    pub sheet: bool,
    pub values: [[f64; 2]; 3],
    pub jacobian: [[f64; 2]; 2],
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AffineApproximation {
    pub params: PsiParameters,
    pub n: u32,
    pub charts: Vec<AffineChart>,
    pub bounds: CertifiedBounds,
}

/// Canonical Ψ at the corners of a fine cell (res = i+1+N) on sheet `bit`.
fn cell_corner_values(site: &CoverSite, cell: &CellAddress, bit: bool, width: f64) -> [[f64; 2]; 4] {
    let below = site.cell_below_cut(cell);
    let mut out = [[0.0; 2]; 4];
    for (idx, o) in out.iter_mut().enumerate() {
        let v = [cell.corner[0] + (idx & 1) as u64, cell.corner[1] + ((idx >> 1) & 1) as u64];
        let p = site.locate(&v, cell.depth);
        *o = psi_at(&p, canonical_bit(p.status, Some(bit), below), site.delta, width);
    }
    out
}

fn unit_radius(p: &SitePoint) -> f64 {
    match p.status {
        PointStatus::Interior | PointStatus::OnCut | PointStatus::Boundary => {
            polar_exact(p).map(|(r, _)| r.to_f64().unwrap()).unwrap_or(0.0)
        }
        _ => 0.0,
    }
}

/// Affine charts on the annulus cells of the N-fold subdivision.
pub fn build_affine_approx(params: &PsiParameters, n: u32) -> Result<AffineApproximation, DeformError> {
    if n == 0 {
        return Err(DeformError::ZeroDepth);
    }
    let site = params.site();
    let res = params.i + 1 + n;
    let m = pow5(1 + n);
    let step = params.side() / m as f64;
    let width = params.width();
    let delta = params.delta;
    let mut charts = Vec::new();
    let mut glip: f64 = 0.0;
    let mut sep_ratio = f64::INFINITY;
    let mut sep_min = f64::INFINITY;
    let mut sup: f64 = 0.0;
    let mut mid_err: f64 = 0.0;
    for x in 0..m {
        for y in 0..m {
            // annulus membership from the cell centre
            let status = classify_uv(10 * (2 * x as i128 + 1) - 5 * m as i128 * 2, 10 * (2 * y as i128 + 1) - 5 * m as i128 * 2, 4 * m as i128);
            if status != PointStatus::Interior && status != PointStatus::OnCut {
                continue;
            }
            let cell = CellAddress { root_id: 0, depth: res, corner: vec![x, y], branch_word: Vec::new() };
            let parent_digit = cell.ancestor_corner(params.i + 1);
            let mirror = annulus_mirror(&[parent_digit[0] as u8, parent_digit[1] as u8], (0, 1));
            let radii: Vec<f64> = (0..4)
                .map(|idx| unit_radius(&site.locate(&[x + (idx & 1) as u64, y + ((idx >> 1) & 1) as u64], res)))
                .collect();
            let vals = [cell_corner_values(&site, &cell, false, width), cell_corner_values(&site, &cell, true, width)];
            for simplex in kuhn_simplices(2, mirror) {
                let pos = |idx: usize| [(x + (idx & 1) as u64) as f64 * step, (y + ((idx >> 1) & 1) as u64) as f64 * step];
                let verts = [pos(simplex[0]), pos(simplex[1]), pos(simplex[2])];
                let e1 = [verts[1][0] - verts[0][0], verts[1][1] - verts[0][1]];
                let e2 = [verts[2][0] - verts[0][0], verts[2][1] - verts[0][1]];
                let det = e1[0] * e2[1] - e1[1] * e2[0];
                for (sheet, sv) in vals.iter().enumerate() {
                    let values = [sv[simplex[0]], sv[simplex[1]], sv[simplex[2]]];
                    let f1 = [values[1][0] - values[0][0], values[1][1] - values[0][1]];
                    let f2 = [values[2][0] - values[0][0], values[2][1] - values[0][1]];
                    // J = [f1 f2] · [e1 e2]^{-1}
                    let inv = [[e2[1] / det, -e2[0] / det], [-e1[1] / det, e1[0] / det]];
                    let jac = [
                        [f1[0] * inv[0][0] + f2[0] * inv[1][0], f1[0] * inv[0][1] + f2[0] * inv[1][1]],
                        [f1[1] * inv[0][0] + f2[1] * inv[1][0], f1[1] * inv[0][1] + f2[1] * inv[1][1]],
                    ];
                    let (smax, _) = singular_values_2x2(jac);
                    glip = glip.max(smax);
                    for v in &values {
                        sup = sup.max((v[0] * v[0] + v[1] * v[1]).sqrt());
                    }
                    charts.push(AffineChart { vertices: verts, sheet: sheet == 1, values, jacobian: jac });
                }
                let d: [[f64; 2]; 3] = std::array::from_fn(|j| {
                    let a = vals[0][simplex[j]];
                    let b = vals[1][simplex[j]];
                    [a[0] - b[0], a[1] - b[1]]
                });
                let l: [f64; 3] = std::array::from_fn(|j| delta / 3.0 * width * phi_unit(&radii[simplex[j]]));
                sep_min = sep_min.min(min_gap_on_triangle(d, l));
                for j in 0..3 {
                    if l[j] > 0.0 {
                        sep_ratio = sep_ratio.min((d[j][0].powi(2) + d[j][1].powi(2)).sqrt() / l[j]);
                    }
                }
            }
            // midpoint error on both sheets
            let cu = ((2 * x + 1) as f64 / (2 * m) as f64) * 5.0 - 2.5;
            let cv = ((2 * y + 1) as f64 / (2 * m) as f64) * 5.0 - 2.5;
            for bit in [false, true] {
                let exact = psi_point(cu, cv, bit, delta, width);
                let sv = &vals[bit as usize];
                let simplex = &kuhn_simplices(2, mirror)[0];
                // the centre lies on the shared diagonal: average of its two ends
                let a = sv[simplex[0]];
                let b = sv[simplex[2]];
                let approx = [(a[0] + b[0]) / 2.0, (a[1] + b[1]) / 2.0];
                mid_err = mid_err.max(((exact[0] - approx[0]).powi(2) + (exact[1] - approx[1]).powi(2)).sqrt());
            }
        }
    }
    let diam = params.side() * std::f64::consts::SQRT_2;
    let bounds = CertifiedBounds {
        glip,
        separation_ratio: sep_ratio,
        sup_norm: sup,
        sup_limit: 2.0 * delta * diam,
        midpoint_error: mid_err,
    };
    if glip > 23.0 * delta {
        return Err(DeformError::BoundViolated { bound: "affine Lipschitz upper", measured: glip, limit: 23.0 * delta });
    }
    if glip < delta / 16.0 {
        return Err(DeformError::BoundViolated { bound: "affine Lipschitz lower", measured: glip, limit: delta / 16.0 });
    }
    // scale-free tolerance for rounding in the quadratic's evaluation
    let tol = 1e-12 * (delta * width).powi(2);
    if sep_min < -tol {
        return Err(DeformError::BoundViolated { bound: "fiber separation", measured: sep_min, limit: 0.0 });
    }
    if sup > bounds.sup_limit {
        return Err(DeformError::BoundViolated { bound: "sup norm", measured: sup, limit: bounds.sup_limit });
    }
    Ok(AffineApproximation { params: *params, n, charts, bounds })
}

/// Smallest N ≤ cap whose approximation certifies.
pub fn search_affine_n(params: &PsiParameters, cap: u32) -> Result<AffineApproximation, DeformError> {
    for n in 1..=cap {
        if let Ok(a) = build_affine_approx(params, n) {
            return Ok(a);
        }
    }
    Err(DeformError::SearchExhausted(cap))
}

/// Exact rational point of the annulus in annulus units, used by separation
/// oracles.
pub fn rational_annulus_point(rng: &mut impl Rng, den: i128) -> (Ratio<i128>, Ratio<i128>) {
    loop {
        let u = Ratio::new(rng.gen_range(-3 * den..=3 * den), 2 * den);
        let v = Ratio::new(rng.gen_range(-3 * den..=3 * den), 2 * den);
        if polar(u, v).is_ok() {
            return (u, v);
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::numeric::rat;
    use num_traits::Signed;

    #[test]
    fn helper_breakpoints_are_exact() {
        let d = rat(1, 11);
        assert_eq!(h1(&rat(0, 1), &d).unwrap(), rat(0, 1));
        assert_eq!(h1(&rat(2, 1), &d).unwrap(), rat(1, 11));
        assert_eq!(h1(&rat(1, 1), &d).unwrap(), rat(1, 22));
        assert_eq!(h2(&rat(1, 1), &d).unwrap(), -rat(1, 11));
        assert_eq!(h2(&rat(3, 1), &d).unwrap(), rat(1, 11));
        assert_eq!(h2(&rat(2, 1), &d).unwrap(), rat(0, 1));
        assert_eq!(h2(&rat(4, 1), &d).unwrap(), rat(0, 1));
        assert!(h1(&rat(9, 2), &d).is_err());
        assert!(h2(&rat(-1, 2), &d).is_err());
    }

    #[test]
    fn slopes_give_exact_lipschitz() {
        let d = rat(1, 11);
        let slopes = h_slopes(&d);
        let m1 = slopes.iter().map(|s| s.0.abs()).max().unwrap();
        let m2 = slopes.iter().map(|s| s.1.abs()).max().unwrap();
        // per half-turn: δ/2 and δ, i.e. δ/(2π) and δ/π per radian
        assert_eq!(m1, rat(1, 22));
        assert_eq!(m2, rat(1, 11));
    }

    #[test]
    fn cutoff_breakpoints() {
        for i in 0..3 {
            let w = rat(1, pow5(i + 1) as i64);
            assert_eq!(phi_cutoff(&rat(0, 1), i).unwrap(), rat(0, 1));
            assert_eq!(phi_cutoff(&(w.clone() / rat(5, 1)), i).unwrap(), w.clone());
            assert_eq!(phi_cutoff(&w, i).unwrap(), rat(0, 1));
            assert!(phi_cutoff(&(w * rat(2, 1)), i).is_err());
        }
        let slopes: Vec<BigRational> = [(0, 1), (1, 5), (4, 5), (1, 1)]
            .windows(2)
            .map(|w| {
                let (a, b) = (rat(w[0].0, w[0].1), rat(w[1].0, w[1].1));
                (phi_unit(&b) - phi_unit(&a)) / (b - a)
            })
            .collect();
        assert_eq!(slopes.iter().map(|s| s.abs()).max().unwrap(), rat(5, 1));
    }

    #[test]
    fn fiber_gap_examples() {
        let d = rat(1, 11);
        assert_eq!(fiber_gap_sq(&rat(0, 1), &d).unwrap(), d.clone() * d.clone());
        assert_eq!(fiber_gap_sq(&rat(1, 1), &d).unwrap(), rat(4, 1) * d.clone() * d.clone());
        let min = fiber_gap_min_sq(&d);
        assert_eq!(min, rat(4, 5) * d.clone() * d.clone());
        assert!(min >= d.clone() * d / rat(4, 1));
    }

    #[test]
    fn psi_vanishes_off_annulus_and_is_continuous_across_cut() {
        let d = rat(1, 11);
        let w = rat(1, 5);
        let z = psi_exact(&rat(0, 1), &rat(0, 1), false, &d, &w);
        assert_eq!(z, [rat(0, 1), rat(0, 1)]);
        // approach σ from above on sheet 0 and from below on sheet 1: same value
        let eps = rat(1, 1_000_000);
        let above = psi_exact(&rat(1, 1), &(rat(-1, 2) + eps.clone()), false, &d, &w);
        let below = psi_exact(&rat(1, 1), &(rat(-1, 2) - eps), true, &d, &w);
        let gap = (above[0].clone() - below[0].clone()).abs() + (above[1].clone() - below[1].clone()).abs();
        assert!(gap < rat(1, 1_000_000));
    }

    #[test]
    fn affine_approx_rejects_zero_depth() {
        let p = PsiParameters { delta: 1.0 / 11.0, i: 0 };
        assert_eq!(build_affine_approx(&p, 0).unwrap_err(), DeformError::ZeroDepth);
    }

    #[test]
    fn triangle_gap_minimum_finds_interior() {
        // D rotates through zero inside the triangle; ℓ = 0
        let d = [[1.0, 0.0], [-1.0, 0.0], [0.0, 1.0]];
        let m = min_gap_on_triangle(d, [0.0; 3]);
        assert!(m.abs() < 1e-12);
        let m = min_gap_on_triangle([[1.0, 0.0], [1.0, 0.0], [1.0, 0.0]], [0.5; 3]);
        assert!((m - 0.75).abs() < 1e-12);
    }
}
