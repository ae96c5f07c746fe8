//! Certificates for the complex, cover, deformation and current modules.

use num_rational::{BigRational, Ratio};
use num_traits::{Signed, Zero};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::Certificate;
use crate::branched_cover::{check_shsep, lift_angle, lift_cover, polar};
use crate::cli::{Bundle, RunConfig};
use crate::complex_core::{classify_children, partition_annuli, subdivide, CellAddress, StageComplex};
use crate::currents::{boundary_mass, eval_current, mass, SampledForm, StageCurrent};
use crate::deformation_maps::{
    build_affine_approx, fiber_gap_lower, fiber_gap_min_sq, h_slopes, psi_value, rational_annulus_point, search_affine_n,
    PsiParameters,
};
use crate::embedding_hilbert::refine_cells;
use crate::numeric::{pow5, rat, rat_to_f64};
use crate::stage::Stage;

fn planes(k: usize) -> Vec<(usize, usize)> {
    (0..k).flat_map(|a| (a + 1..k).map(move |b| (a, b))).collect()
}

pub(super) fn complex_checks(bundle: &Bundle) -> Vec<Certificate> {
    let k = bundle.config().k;
    let mut out = Vec::new();
    let masses: Vec<BigRational> = bundle.stages.iter().map(|s| s.stage.complex.total_mass()).collect();
    let one = rat(1, 1);
    out.push(Certificate::new(
        "complex_core.mass",
        "mass conservation",
        "Σ weight·volume = 1 exactly",
        masses.iter().map(|m| m.to_string()).collect::<Vec<_>>().join(", "),
        masses.iter().all(|m| *m == one),
    ));

    let scale = pow5(k as u32 - 2) as usize;
    let mut counts = Vec::new();
    let mut cells = vec![CellAddress::root(k)];
    cells.extend(bundle.stages.iter().flat_map(|s| &s.stage.complex.sites).map(|site| CellAddress {
        root_id: 0,
        depth: site.depth,
        corner: site.corner.clone(),
        branch_word: Vec::new(),
    }));
    for cell in &cells {
        for plane in planes(k) {
            if let Ok(d) = classify_children(cell, plane) {
                counts.push((d.central.len(), d.outer.len(), d.annulus.len()));
            }
        }
    }
    let expect = (scale, 16 * scale, 8 * scale);
    out.push(Certificate::new(
        "complex_core.children",
        "central, outer, annulus",
        format!("{expect:?}"),
        format!("{} decompositions", counts.len()),
        !counts.is_empty() && counts.iter().all(|c| *c == expect),
    ));

    let root = CellAddress::root(k);
    let composes = [(1, 1), (1, 2), (2, 1)].iter().all(|&(a, b)| {
        let mut direct = subdivide(&root, a + b).unwrap_or_default();
        let mut nested: Vec<CellAddress> =
            subdivide(&root, a).unwrap_or_default().iter().flat_map(|c| subdivide(c, b).unwrap_or_default()).collect();
        direct.sort();
        nested.sort();
        !direct.is_empty() && direct == nested
    });
    out.push(Certificate::new("complex_core.subdivide", "5-adic subdivision", "subdivide(a+b) = subdivide(b)∘subdivide(a)", format!("{composes}"), composes));

    let mut rings = 0;
    let mut simple = true;
    for depth in [2, 3] {
        for ring in partition_annuli(&CellAddress::root(2), depth).unwrap_or_default() {
            rings += 1;
            let n = ring.cells.len();
            let distinct: std::collections::BTreeSet<_> = ring.cells.iter().map(|c| &c.corner).collect();
            let adjacent = (0..n).all(|i| {
                let (a, b) = (&ring.cells[i].corner, &ring.cells[(i + 1) % n].corner);
                a[0].abs_diff(b[0]) + a[1].abs_diff(b[1]) == 1
            });
            simple &= distinct.len() == n && adjacent && n >= 4;
        }
    }
    out.push(Certificate::new("complex_core.rings", "annulus ring", "simple edge cycles", format!("{rings} rings"), simple && rings > 0));
    out
}

pub(super) fn cover_checks(bundle: &Bundle) -> Vec<Certificate> {
    let cfg = bundle.config();
    let mut out = Vec::new();
    // weight exponent = number of sheet choices along the branch word
    let halving = bundle.stages.iter().flat_map(|s| &s.stage.complex.cells).all(|c| {
        c.weight_exp as usize == c.address.branch_word.iter().filter(|s| s.sheet.is_some()).count()
    });
    let unit = bundle.stages.iter().all(|s| s.stage.complex.total_mass() == rat(1, 1));
    out.push(Certificate::new(
        "branched_cover.halving",
        "measure halving",
        "weight halves per sheet choice; mass 1",
        format!("halving {halving}, mass {unit}"),
        halving && unit,
    ));

    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut deck_ok = true;
    for _ in 0..2000 {
        let (u, v) = rational_annulus_point(&mut rng, 997);
        let Ok((r, t)) = polar(u, v) else { continue };
        for b in [false, true] {
            let (a, s) = (lift_angle(t, b), lift_angle(t, !b));
            let back = lift_angle(t, !!b);
            deck_ok &= (a - s).abs() == Ratio::from_integer(2) && back == a && polar(u, v) == Ok((r, t));
        }
    }
    out.push(Certificate::new("branched_cover.deck", "deck transformation", "involution, r fixed, θ shifted by 2π", format!("{deck_ok}"), deck_ok));

    let k = cfg.k;
    let comm: Vec<bool> = planes(k).iter().map(|p| lift_cover(&CellAddress::root(k), *p).map(|r| r.check_commutation()).unwrap_or(false)).collect();
    out.push(Certificate::new(
        "branched_cover.commutation",
        "lifted cover commutation",
        "vertex-exact",
        format!("{}/{} planes", comm.iter().filter(|b| **b).count(), comm.len()),
        comm.iter().all(|b| *b),
    ));

    let certs: Vec<_> = [1, 2].iter().map(|i| (i, check_shsep(*i, cfg.shsep_samples, cfg.seed + *i as u64))).collect();
    let tested: usize = certs.iter().map(|c| c.1.tested).sum();
    let violations: usize = certs.iter().map(|c| c.1.violations.len()).sum();
    out.push(
        Certificate::new(
            "branched_cover.shsep",
            "(ShSep)",
            format!("0 violations, ≥ {} pairs per cover", cfg.shsep_samples),
            format!("{violations} violations"),
            violations == 0 && certs.iter().all(|c| c.1.tested >= cfg.shsep_samples),
        )
        .with_detail(format!("{tested} pairs over generations 1 and 2")),
    );
    out
}

pub(super) fn deformation_checks(cfg: &RunConfig) -> Vec<Certificate> {
    let schedule = cfg.schedule();
    let delta = schedule.delta_exact(1);
    let df = schedule.delta(1);
    let mut out = Vec::new();

    let slopes = h_slopes(&delta);
    let m1 = slopes.iter().map(|s| s.0.abs()).max().unwrap();
    let m2 = slopes.iter().map(|s| s.1.abs()).max().unwrap();
    // slopes are per half-turn; per radian they are δ/2π and δ/π
    let ok = m1 == &delta / rat(2, 1) && m2 == delta;
    out.push(Certificate::new(
        "deformation_maps.h_lipschitz",
        "h1, h2 Lipschitz",
        "δ/2, δ per half-turn, exactly",
        format!("{m1}, {m2} with δ = {delta}"),
        ok,
    ));

    let min_sq = fiber_gap_min_sq(&delta);
    let exact = min_sq >= &delta * &delta / rat(4, 1);
    let grid = (0..=100_000).map(|i| fiber_gap_lower(2.0 * i as f64 / 100_000.0, df).unwrap_or(0.0)).fold(f64::INFINITY, f64::min);
    out.push(Certificate::new(
        "deformation_maps.fiber_gap",
        "HlowBound",
        "min gap ≥ δ/2",
        format!("exact min² = {min_sq}, grid min = {grid:e}"),
        exact && grid >= df / 2.0 - 1e-12,
    ));

    // Ψ agrees across σ (0⁺ on one sheet meets 2⁻ on the other) and vanishes
    // on both annulus boundaries, exactly
    let width = rat(1, 5);
    let mut cont = true;
    for i in 1..=40 {
        let r = rat(i, 40);
        for b in [false, true] {
            let above = psi_value(&r, &lift_angle(rat(0, 1), b), &delta, &width);
            let below = psi_value(&r, &lift_angle(rat(2, 1), !b), &delta, &width);
            cont &= above == below;
        }
        for t in [rat(i, 20)] {
            for b in [false, true] {
                let ta = lift_angle(t.clone(), b);
                cont &= psi_value(&rat(0, 1), &ta, &delta, &width).iter().all(Zero::is_zero);
                cont &= psi_value(&rat(1, 1), &ta, &delta, &width).iter().all(Zero::is_zero);
            }
        }
    }
    out.push(Certificate::new("deformation_maps.continuity", "Ψ continuity", "exact across σ and at annulus boundaries", format!("{cont}"), cont));

    let params = PsiParameters { delta: df, i: 0 };
    let cert = match search_affine_n(&params, cfg.n_cap) {
        Ok(a) => {
            let b = &a.bounds;
            let interval = b.glip >= df / 16.0 && b.glip <= 23.0 * df;
            let next = build_affine_approx(&params, a.n + 1).map(|n| n.bounds.midpoint_error);
            let monotone = next.as_ref().is_ok_and(|e| *e <= b.midpoint_error);
            Certificate::new(
                "deformation_maps.affine",
                "piecewise affine approximation",
                "glip ∈ [δ/16, 23δ]; midpoint error non-increasing in N",
                format!("N = {}, glip/δ = {:.4}, midpoint error {:e} → {:e}", a.n, b.glip / df, b.midpoint_error, next.unwrap_or(f64::NAN)),
                interval && monotone,
            )
        }
        Err(e) => Certificate::error("deformation_maps.affine", "piecewise affine approximation", e),
    };
    out.push(cert);
    out
}

fn top_forms(k: usize, dim: usize) -> (SampledForm, SampledForm, SampledForm) {
    let axes: Vec<Vec<f64>> = (0..k).map(|a| (0..dim).map(|i| (i == a) as u8 as f64).collect()).collect();
    let mut x = vec![0.0; dim];
    x[0] = 1.0;
    (
        SampledForm::affine("dx", 1.0, vec![0.0; dim], axes.clone()),
        SampledForm::affine("x dx", 0.0, x.clone(), axes.clone()),
        SampledForm::affine("(1+x) dx", 1.0, x, axes),
    )
}

pub(super) fn current_checks(bundle: &Bundle) -> Vec<Certificate> {
    let k = bundle.config().k;
    let mut out = Vec::new();
    let masses: Vec<BigRational> = bundle.stages.iter().map(|s| mass(&s.stage)).collect();
    out.push(Certificate::new(
        "currents.mass",
        "unit mass",
        "= 1 exactly",
        masses.iter().map(|m| m.to_string()).collect::<Vec<_>>().join(", "),
        masses.iter().all(|m| *m == rat(1, 1)),
    ));

    let mut lin_err: f64 = 0.0;
    let mut lin_ok = true;
    let mut flip_ok = true;
    for s in &bundle.stages {
        let (a, b, sum) = top_forms(k, s.ambient_dim);
        let cur = StageCurrent::of(&s.stage);
        match (eval_current(&cur, &a, &s.stage), eval_current(&cur, &b, &s.stage), eval_current(&cur, &sum, &s.stage)) {
            (Ok(ea), Ok(eb), Ok(es)) => {
                let d = (es.value - ea.value - eb.value).abs();
                lin_err = lin_err.max(d);
                lin_ok &= d <= ea.error + eb.error + es.error + 1e-12;
                let fl = eval_current(&cur.flipped(), &sum, &s.stage).map(|e| e.value);
                flip_ok &= fl.is_ok_and(|v| v == -es.value);
            }
            _ => {
                lin_ok = false;
                flip_ok = false;
            }
        }
    }
    out.push(Certificate::new("currents.linearity", "linearity", "|T(ω₁+ω₂) − Tω₁ − Tω₂| ≤ quadrature error", format!("{lin_err:e}"), lin_ok));
    out.push(Certificate::new("currents.flip", "orientation", "T̄(ω) = −T(ω) exactly", format!("{flip_ok}"), flip_ok));

    let unit = Stage::assemble(StageComplex::unit(k), k);
    let sub = refine_cells(&StageComplex::unit(k), 1, 1 << 20).map(|c| Stage::assemble(c, k));
    let expect = rat(2 * k as i64, 1);
    let b0 = boundary_mass(&StageCurrent::of(&unit), &unit);
    let b1 = sub.as_ref().map_err(|e| e.to_string()).and_then(|s| boundary_mass(&StageCurrent::of(s), s).map_err(|e| e.to_string()));
    let staged: Vec<String> = bundle
        .stages
        .iter()
        .map(|s| boundary_mass(&StageCurrent::of(&s.stage), &s.stage).map_or_else(|e| e.to_string(), |m| format!("{:.6}", rat_to_f64(&m))))
        .collect();
    let ok = b0.as_ref().is_ok_and(|m| *m == expect) && b1.as_ref().is_ok_and(|m| *m == expect) && staged.iter().all(|s| s.parse::<f64>().is_ok_and(f64::is_finite));
    out.push(
        Certificate::new("currents.boundary", "boundary mass", format!("= {expect} at stage 0 and after plain subdivision; finite"), format!("stages: {}", staged.join(", ")), ok)
            .with_detail(format!("stage 0 {:?}, subdivided {:?}", b0.map(|m| m.to_string()), b1.map(|m| m.to_string()))),
    );
    out
}
