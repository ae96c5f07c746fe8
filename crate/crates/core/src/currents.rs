//! Stage currents: every cell carries its orientation sign and dyadic weight.
//! Evaluation pulls sampled forms back through the stage embedding.

use std::collections::HashMap;
use std::sync::Arc;

use nalgebra::DMatrix;
use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::One;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::complex_core::kuhn_simplices;
use crate::numeric::{dist, pow5};
use crate::radn::RadialNeighborhood;
use crate::stage::{vertex_lift, Lift, Stage};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum CurrentError {
    #[error("form of degree {form} against a current of dimension {current}")]
    DegreeMismatch { form: usize, current: usize },
    #[error("sign vector has {got} entries for {cells} cells")]
    ShapeMismatch { got: usize, cells: usize },
}

/// A k-current on a stage: oriented cells with weights 2^-weight_exp.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct StageCurrent {
    pub k: usize,
    pub signs: Vec<i8>,
}

impl StageCurrent {
    pub fn of(stage: &Stage) -> StageCurrent {
        StageCurrent { k: stage.k(), signs: vec![1; stage.cell_count()] }
    }

    pub fn flipped(&self) -> StageCurrent {
        StageCurrent { k: self.k, signs: self.signs.iter().map(|s| -s).collect() }
    }

    fn check(&self, stage: &Stage) -> Result<(), CurrentError> {
        if self.signs.len() != stage.cell_count() {
            return Err(CurrentError::ShapeMismatch { got: self.signs.len(), cells: stage.cell_count() });
        }
        Ok(())
    }
}

/// Mass = Σ weight·volume, exact.
pub fn mass(stage: &Stage) -> BigRational {
    stage.complex.total_mass()
}

pub type ScalarFn = Arc<dyn Fn(&[f64]) -> f64 + Send + Sync>;
pub type GradFn = Arc<dyn Fn(&[f64]) -> Vec<f64> + Send + Sync>;
/// A map with its derivative (rows: output coordinates).
pub type MapFn = Arc<dyn Fn(&[f64]) -> (Vec<f64>, DMatrix<f64>) + Send + Sync>;

/// The form f dg₁∧…∧dg_k given by callables, with gradients of the g's.
#[derive(Clone)]
pub struct SampledForm {
    pub name: String,
    pub f: ScalarFn,
    pub g: Vec<ScalarFn>,
    pub dg: Vec<GradFn>,
    /// Declared Lipschitz budget of f and the g's (reported, not enforced).
    pub lipschitz_budget: f64,
    /// Polynomial degree of f·det(Dg) along affine pieces, when known.
    pub poly_degree: Option<u32>,
}

impl std::fmt::Debug for SampledForm {
    fn fmt(&self, fm: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        fm.debug_struct("SampledForm").field("name", &self.name).field("degree", &self.g.len()).finish()
    }
}

fn linear_fn(a: Vec<f64>) -> (ScalarFn, GradFn) {
    let a2 = a.clone();
    (
        Arc::new(move |x: &[f64]| a.iter().zip(x).map(|(c, v)| c * v).sum()),
        Arc::new(move |x: &[f64]| {
            let mut g = a2.clone();
            g.resize(x.len(), 0.0);
            g
        }),
    )
}

impl SampledForm {
    /// f dg₁∧…∧dg_k with f = c + ⟨b, x⟩ and linear g_i = ⟨a_i, x⟩.
    pub fn affine(name: &str, c: f64, b: Vec<f64>, a: Vec<Vec<f64>>) -> SampledForm {
        let norm2 = |v: &[f64]| v.iter().map(|x| x * x).sum::<f64>().sqrt();
        let budget = a.iter().map(|v| norm2(v)).fold(norm2(&b), f64::max);
        let deg = if b.iter().all(|v| *v == 0.0) { 0 } else { 1 };
        let (g, dg): (Vec<_>, Vec<_>) = a.into_iter().map(linear_fn).unzip();
        SampledForm {
            name: name.into(),
            f: Arc::new(move |x: &[f64]| c + b.iter().zip(x).map(|(u, v)| u * v).sum::<f64>()),
            g,
            dg,
            lipschitz_budget: budget,
            poly_degree: Some(deg),
        }
    }

    /// dx_{a₁}∧…∧dx_{a_k} on ℝ^dim.
    pub fn coordinates(axes: &[usize], dim: usize) -> SampledForm {
        let a = axes
            .iter()
            .map(|i| {
                let mut v = vec![0.0; dim];
                v[*i] = 1.0;
                v
            })
            .collect();
        SampledForm::affine(&format!("dx{axes:?}"), 1.0, vec![], a)
    }

    pub fn degree(&self) -> usize {
        self.g.len()
    }

    /// ω ∘ P: f∘P d(g₁∘P)∧…, gradients by the chain rule.
    pub fn pullback(&self, map: MapFn, linear: bool) -> SampledForm {
        let f = self.f.clone();
        let m1 = map.clone();
        let g = self
            .g
            .iter()
            .map(|gi| {
                let gi = gi.clone();
                let m = map.clone();
                Arc::new(move |x: &[f64]| gi(&m(x).0)) as ScalarFn
            })
            .collect();
        let dg = self
            .dg
            .iter()
            .map(|di| {
                let di = di.clone();
                let m = map.clone();
                Arc::new(move |x: &[f64]| {
                    let (y, d) = m(x);
                    let grad = nalgebra::DVector::from_vec(di(&y));
                    (d.transpose() * grad).iter().copied().collect()
                }) as GradFn
            })
            .collect();
        SampledForm {
            name: format!("{}∘P", self.name),
            f: Arc::new(move |x: &[f64]| f(&m1(x).0)),
            g,
            dg,
            lipschitz_budget: self.lipschitz_budget,
            poly_degree: if linear { self.poly_degree } else { None },
        }
    }

    /// Largest sampled Lipschitz ratio of f and the g's on [lo, hi]^dim.
    pub fn sampled_lipschitz(&self, dim: usize, lo: f64, hi: f64, pairs: usize, seed: u64) -> f64 {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut worst: f64 = 0.0;
        for _ in 0..pairs {
            let p: Vec<f64> = (0..dim).map(|_| rng.gen_range(lo..hi)).collect();
            let q: Vec<f64> = (0..dim).map(|_| rng.gen_range(lo..hi)).collect();
            let d = dist(&p, &q);
            if d == 0.0 {
                continue;
            }
            worst = worst.max(((self.f)(&p) - (self.f)(&q)).abs() / d);
            for g in &self.g {
                worst = worst.max((g(&p) - g(&q)).abs() / d);
            }
        }
        worst
    }
}

/// Grundmann–Möller rule of degree 2s+1 on the n-simplex: (weight, barycentric
/// point) with weights summing to 1.
pub fn grundmann_moller(n: usize, s: usize) -> Vec<(f64, Vec<f64>)> {
    let d = 2 * s + 1;
    let fact = |m: usize| (1..=m).fold(1.0f64, |a, b| a * b as f64);
    let mut out = Vec::new();
    for i in 0..=s {
        let den = (d + n - 2 * i) as f64;
        let w = (-1f64).powi(i as i32) * 2f64.powi(-(2 * s as i32)) * den.powi(d as i32) / (fact(i) * fact(d + n - i)) * fact(n);
        for beta in compositions(s - i, n + 1) {
            out.push((w, beta.iter().map(|b| (2 * b + 1) as f64 / den).collect()));
        }
    }
    out
}

/// All vectors of `parts` nonnegative integers summing to `total`.
fn compositions(total: usize, parts: usize) -> Vec<Vec<usize>> {
    if parts == 1 {
        return vec![vec![total]];
    }
    let mut out = Vec::new();
    for first in 0..=total {
        for mut rest in compositions(total - first, parts - 1) {
            rest.insert(0, first);
            out.push(rest);
        }
    }
    out
}

/// Value of a current on a form, with the quadrature error estimate.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Evaluation {
    pub value: f64,
    pub error: f64,
}

/// Σ sign·weight·∫ f∘F det(Dg∘F·DF) over the Kuhn simplices of every cell.
pub fn eval_current(current: &StageCurrent, form: &SampledForm, stage: &Stage) -> Result<Evaluation, CurrentError> {
    let k = stage.k();
    if form.degree() != current.k || current.k != k {
        return Err(CurrentError::DegreeMismatch { form: form.degree(), current: current.k });
    }
    current.check(stage)?;
    let (rule, coarse) = match form.poly_degree {
        Some(p) => (grundmann_moller(k, (p as usize).div_ceil(2)), None),
        None => (grundmann_moller(k, 3), Some(grundmann_moller(k, 2))),
    };
    let kfact = (1..=k).fold(1.0f64, |a, b| a * b as f64);
    let d = stage.ambient_dim;
    let per_cell: Vec<(f64, f64)> = (0..stage.cell_count())
        .into_par_iter()
        .map(|ci| {
            let cell = &stage.complex.cells[ci];
            let h = 1.0 / pow5(cell.address.depth) as f64;
            let vol = h.powi(k as i32) / kfact;
            let weight = current.signs[ci] as f64 * 2f64.powi(-(cell.weight_exp as i32));
            let mut fine_sum = 0.0;
            let mut coarse_sum = 0.0;
            for simplex in kuhn_simplices(k, cell.mirror) {
                let jac = stage.simplex_jacobian(ci, &simplex);
                let pts: Vec<&[f64]> = simplex.iter().map(|c| stage.vertex(stage.cell_vertices[ci][*c])).collect();
                let integrand = |lam: &[f64]| {
                    let x: Vec<f64> = (0..d).map(|r| lam.iter().zip(&pts).map(|(l, p)| l * p[r]).sum()).collect();
                    let mut g = DMatrix::zeros(k, d);
                    for (row, dg) in form.dg.iter().enumerate() {
                        for (c, v) in dg(&x).into_iter().enumerate() {
                            g[(row, c)] = v;
                        }
                    }
                    (form.f)(&x) * (g * &jac).determinant()
                };
                fine_sum += vol * rule.iter().map(|(w, lam)| w * integrand(lam)).sum::<f64>();
                if let Some(c) = &coarse {
                    coarse_sum += vol * c.iter().map(|(w, lam)| w * integrand(lam)).sum::<f64>();
                }
            }
            let err = if coarse.is_some() { (fine_sum - coarse_sum).abs() } else { 0.0 };
            (weight * fine_sum, weight.abs() * err)
        })
        .collect();
    // fixed-order reduction keeps sums bit-reproducible
    let mut value = 0.0;
    let mut error = 0.0;
    for (v, e) in per_cell {
        value += v;
        error += e;
    }
    Ok(Evaluation { value, error })
}

/// Boundary mass after cancelling facets shared with opposite orientation.
/// Facets are split to the finest lattice and keyed by axis, lower corner
/// and the canonical lift of an interior point, so gluings along annulus
/// boundaries and across σ cancel.
pub fn boundary_mass(current: &StageCurrent, stage: &Stage) -> Result<BigRational, CurrentError> {
    current.check(stage)?;
    let k = stage.k();
    let res = stage.resolution;
    let max_w = stage.complex.cells.iter().map(|c| c.weight_exp).max().unwrap_or(0);
    let mut coef: HashMap<(usize, Vec<u64>, Lift), i128> = HashMap::new();
    for (ci, cell) in stage.complex.cells.iter().enumerate() {
        let m = pow5(res - cell.address.depth);
        let base = cell.address.corner_at(res);
        let w = current.signs[ci] as i128 * (1i128 << (max_w - cell.weight_exp));
        for axis in 0..k {
            let sign_axis = if axis % 2 == 0 { 1 } else { -1 };
            for hi in [false, true] {
                let c = w * sign_axis * if hi { 1 } else { -1 };
                let others: Vec<usize> = (0..k).filter(|a| *a != axis).collect();
                let count = (m as usize).pow(others.len() as u32);
                for idx in 0..count {
                    let mut corner = base.clone();
                    corner[axis] += if hi { m } else { 0 };
                    let mut rest = idx;
                    for a in &others {
                        corner[*a] += (rest % m as usize) as u64;
                        rest /= m as usize;
                    }
                    let probe: Vec<u64> =
                        (0..k).map(|a| if a == axis { 5 * corner[a] } else { 5 * corner[a] + 2 }).collect();
                    let lift = vertex_lift(&stage.complex.sites, &cell.address, &probe, res + 1);
                    *coef.entry((axis, corner, lift)).or_default() += c;
                }
            }
        }
    }
    let total: i128 = coef.values().map(|c| c.abs()).sum();
    let facet = BigRational::new(BigInt::one(), BigInt::from(pow5(res)).pow(k as u32 - 1));
    Ok(BigRational::new(BigInt::from(total), BigInt::one() << max_w) * facet)
}

/// The default battery: dx∧dy, x dx∧dy, a sheared pair, an affine weight and
/// a nonpolynomial form. On ambient dimension ≥ 4 a form mixing the third
/// and fourth coordinates is added.
pub fn form_battery(dim: usize) -> Vec<SampledForm> {
    let e = |i: usize| {
        let mut v = vec![0.0; dim];
        v[i] = 1.0;
        v
    };
    let mut out = vec![
        SampledForm::coordinates(&[0, 1], dim),
        SampledForm::affine("x dx∧dy", 0.0, e(0), vec![e(0), e(1)]),
        SampledForm::affine("shear", 1.0, vec![], vec![vec![1.0, 0.5].into_iter().chain(vec![0.0; dim - 2]).collect(), e(1)]),
        SampledForm::affine("(1+x+2y) dy∧dx", 1.0, vec![1.0, 2.0].into_iter().chain(vec![0.0; dim - 2]).collect(), vec![e(1), e(0)]),
    ];
    out.push(SampledForm {
        name: "exp(x) dx∧d(sin y)".into(),
        f: Arc::new(|x: &[f64]| x[0].exp()),
        g: vec![Arc::new(|x: &[f64]| x[0]), Arc::new(|x: &[f64]| x[1].sin())],
        dg: vec![
            Arc::new(move |x: &[f64]| {
                let mut v = vec![0.0; x.len()];
                v[0] = 1.0;
                v
            }),
            Arc::new(move |x: &[f64]| {
                let mut v = vec![0.0; x.len()];
                v[1] = x[1].cos();
                v
            }),
        ],
        lipschitz_budget: std::f64::consts::E,
        poly_degree: None,
    });
    if dim >= 4 {
        let mut a = e(0);
        a[2] = 1.0;
        let mut b = e(1);
        b[3] = 1.0;
        out.push(SampledForm::affine("d(x+z)∧d(y+w)", 1.0, vec![], vec![a, b]));
    }
    out
}

/// Coordinate truncation to the first `keep` coordinates.
pub fn truncation(dim: usize, keep: usize) -> MapFn {
    let mut d = DMatrix::zeros(keep, dim);
    for i in 0..keep {
        d[(i, i)] = 1.0;
    }
    Arc::new(move |x: &[f64]| (x[..keep].to_vec(), d.clone()))
}

/// The composite P_i ∘ … ∘ P_{j-1} through radial neighbourhoods (innermost
/// last in the slice), with derivative the product of tangent projectors.
/// Points outside a neighbourhood map to NaN.
pub fn radn_projection(radns: Vec<RadialNeighborhood>) -> MapFn {
    let radns = Arc::new(radns);
    Arc::new(move |x: &[f64]| {
        let d = x.len();
        let mut p = x.to_vec();
        let mut der = DMatrix::identity(d, d);
        for r in radns.iter().rev() {
            match r.project_piece(&p) {
                Ok((y, piece)) => {
                    let pc = &r.pieces[piece as usize];
                    der = (&pc.edges * &pc.pinv) * der;
                    p = y;
                }
                Err(_) => return (vec![f64::NAN; d], der),
            }
        }
        (p, der)
    })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PushforwardEntry {
    pub form: String,
    pub lower: f64,
    pub upper: f64,
    pub difference: f64,
    pub quadrature_error: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PushforwardCertificate {
    pub i: u32,
    pub j: u32,
    pub tolerance: f64,
    pub entries: Vec<PushforwardEntry>,
    pub passed: bool,
}

/// Compare N_i(ω) with N_j(ω∘P_{j,i}) over a battery of forms on the lower
/// ambient space.
#[allow(clippy::too_many_arguments)]
pub fn pushforward_check(
    i: u32,
    j: u32,
    lower: &Stage,
    upper: &Stage,
    projection: MapFn,
    linear: bool,
    forms: &[SampledForm],
    tolerance: f64,
) -> Result<PushforwardCertificate, CurrentError> {
    let nl = StageCurrent::of(lower);
    let nu = StageCurrent::of(upper);
    let mut entries = Vec::new();
    let mut passed = true;
    for form in forms {
        let a = eval_current(&nl, form, lower)?;
        let b = if i == j && lower.ambient_dim == upper.ambient_dim {
            eval_current(&nu, form, upper)?
        } else {
            eval_current(&nu, &form.pullback(projection.clone(), linear), upper)?
        };
        let diff = (a.value - b.value).abs();
        if diff.is_nan() || diff > tolerance {
            passed = false;
        }
        entries.push(PushforwardEntry {
            form: form.name.clone(),
            lower: a.value,
            upper: b.value,
            difference: diff,
            quadrature_error: a.error + b.error,
        });
    }
    Ok(PushforwardCertificate { i, j, tolerance, entries, passed })
}

/// Exact mass check helper: mass equals one.
pub fn unit_mass(stage: &Stage) -> bool {
    mass(stage) == BigRational::one()
}


#[cfg(test)]
mod tests {
    use super::*;
    use crate::complex_core::StageComplex;
    use crate::embedding_hilbert::{build_stage_hilbert, refine_cells};
    use crate::schedule::DeltaSchedule;

    fn fact(n: u32) -> f64 {
        (1..=n).fold(1.0, |a, b| a * b as f64)
    }

    #[test]
    fn grundmann_moller_integrates_monomials() {
        for s in 0..4 {
            let rule = grundmann_moller(2, s);
            let deg = 2 * s as u32 + 1;
            for a in 0..=deg {
                for b in 0..=(deg - a) {
                    // mean of x^a y^b over the unit triangle: 2·a!b!/(a+b+2)!
                    let exact = 2.0 * fact(a) * fact(b) / fact(a + b + 2);
                    let q: f64 = rule.iter().map(|(w, l)| w * l[1].powi(a as i32) * l[2].powi(b as i32)).sum();
                    assert!((q - exact).abs() < 1e-13, "s={s} a={a} b={b}");
                }
            }
        }
        let rule = grundmann_moller(3, 2);
        let exact = 6.0 * fact(2) * fact(1) * fact(1) / fact(7);
        let q: f64 = rule.iter().map(|(w, l)| w * l[1] * l[1] * l[2] * l[3]).sum();
        assert!((q - exact).abs() < 1e-14);
    }

    fn unit(k: usize) -> Stage {
        Stage::assemble(StageComplex::unit(k), k + 2)
    }

    #[test]
    fn unit_square_evaluates_to_one_exactly() {
        let st = unit(2);
        let v = eval_current(&StageCurrent::of(&st), &SampledForm::coordinates(&[0, 1], 4), &st).unwrap();
        assert_eq!(v.value, 1.0);
        let swapped = eval_current(&StageCurrent::of(&st), &SampledForm::coordinates(&[1, 0], 4), &st).unwrap();
        assert_eq!(swapped.value, -1.0);
        let cube = unit(3);
        let v3 = eval_current(&StageCurrent::of(&cube), &SampledForm::coordinates(&[0, 1, 2], 5), &cube).unwrap();
        // six simplices of volume 1/6 round once
        assert!((v3.value - 1.0).abs() <= 2.0 * f64::EPSILON);
    }

    #[test]
    fn repeated_function_gives_zero_and_degree_is_checked() {
        let st = build_stage_hilbert(1, &DeltaSchedule::hilbert(), 1, 100_000).unwrap().stage;
        let f = SampledForm::coordinates(&[0, 0], 4);
        assert_eq!(eval_current(&StageCurrent::of(&st), &f, &st).unwrap().value, 0.0);
        let one = SampledForm::affine("dx", 1.0, vec![], vec![vec![1.0, 0.0, 0.0, 0.0]]);
        assert_eq!(eval_current(&StageCurrent::of(&st), &one, &st).unwrap_err(), CurrentError::DegreeMismatch { form: 1, current: 2 });
    }

    #[test]
    fn orientation_flip_and_linearity() {
        let st = build_stage_hilbert(1, &DeltaSchedule::hilbert(), 1, 100_000).unwrap().stage;
        let n = StageCurrent::of(&st);
        for form in form_battery(4) {
            let a = eval_current(&n, &form, &st).unwrap().value;
            let b = eval_current(&n.flipped(), &form, &st).unwrap().value;
            assert_eq!(a, -b);
        }
        let a = vec![vec![1.0, 0.0, 0.3, 0.0], vec![0.0, 1.0, 0.0, 0.2]];
        let w1 = SampledForm::affine("w1", 1.0, vec![], a.clone());
        let w2 = SampledForm::affine("w2", 0.0, vec![0.5, -1.0, 2.0, 0.0], a.clone());
        let w12 = SampledForm::affine("w1+w2", 1.0, vec![0.5, -1.0, 2.0, 0.0], a);
        let v1 = eval_current(&n, &w1, &st).unwrap().value;
        let v2 = eval_current(&n, &w2, &st).unwrap().value;
        let v12 = eval_current(&n, &w12, &st).unwrap().value;
        assert!((v1 + v2 - v12).abs() < 1e-12);
    }

    #[test]
    fn masses() {
        let s = DeltaSchedule::hilbert();
        for n in 0..3 {
            let st = build_stage_hilbert(n, &s, 0, 100_000).unwrap().stage;
            assert!(unit_mass(&st));
        }
    }

    #[test]
    fn boundary_masses() {
        let sq = unit(2);
        assert_eq!(boundary_mass(&StageCurrent::of(&sq), &sq).unwrap(), BigRational::from_integer(4.into()));
        let cube = unit(3);
        assert_eq!(boundary_mass(&StageCurrent::of(&cube), &cube).unwrap(), BigRational::from_integer(6.into()));
        // plain subdivision telescopes
        let fine = Stage::assemble(refine_cells(&StageComplex::unit(2), 2, 1000).unwrap(), 4);
        assert_eq!(boundary_mass(&StageCurrent::of(&fine), &fine).unwrap(), BigRational::from_integer(4.into()));
        // a covered annulus: sheets cancel along σ and glue to the core along
        // both annulus boundaries, leaving the outer square
        for _ in 0..2 {
            let st = build_stage_hilbert(1, &DeltaSchedule::hilbert(), 1, 100_000).unwrap().stage;
            assert_eq!(boundary_mass(&StageCurrent::of(&st), &st).unwrap(), BigRational::from_integer(4.into()));
        }
        // dropping one sheet exposes σ on the other, plus both annulus rims
        let st = build_stage_hilbert(1, &DeltaSchedule::hilbert(), 0, 100_000).unwrap().stage;
        let mut n = StageCurrent::of(&st);
        for (i, c) in st.complex.cells.iter().enumerate() {
            if c.address.branch_word.last().and_then(|s| s.sheet) == Some(true) {
                n.signs[i] = 0;
            }
        }
        // oracle: outer square 4; inner rim 4/5 and outer rim 12/5 at net
        // weight 1/2; both sides of σ (length 1/5) at weight 1/2
        let got = boundary_mass(&n, &st).unwrap();
        let rims = BigRational::new(4.into(), 5.into()) * BigRational::new(1.into(), 2.into())
            + BigRational::new(12.into(), 5.into()) * BigRational::new(1.into(), 2.into());
        let cut = BigRational::new(1.into(), 5.into());
        assert_eq!(got, BigRational::from_integer(4.into()) + rims + cut);
    }

    #[test]
    fn pushforward_same_stage_is_identical() {
        let st = build_stage_hilbert(1, &DeltaSchedule::hilbert(), 1, 100_000).unwrap().stage;
        let c = pushforward_check(1, 1, &st, &st, truncation(4, 4), true, &form_battery(4), 0.0).unwrap();
        assert!(c.passed);
        assert!(c.entries.iter().all(|e| e.difference == 0.0));
    }

    #[test]
    fn battery_budgets_hold_on_samples() {
        for f in form_battery(4) {
            assert!(f.sampled_lipschitz(4, 0.0, 1.0, 2000, 3) <= f.lipschitz_budget * (1.0 + 1e-9), "{}", f.name);
        }
    }
}
