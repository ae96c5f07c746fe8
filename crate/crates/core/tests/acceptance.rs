//! One line per acceptance criterion. Runs as a plain binary so the lines are
//! printed whether or not the run passes; exits nonzero if any criterion fails.

use std::process::ExitCode;
use std::time::Instant;

use num_bigint::BigInt;
use num_rational::{BigRational, Ratio};
use num_traits::{One, Signed};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use sponge_core::branched_cover::{check_shsep, polar};
use sponge_core::cli::{build_stages, cmd_build, encode_bundle, Mode, RunConfig};
use sponge_core::currents::{
    boundary_mass, eval_current, form_battery, mass, pushforward_check, radn_projection, truncation, SampledForm,
    StageCurrent,
};
use sponge_core::deformation_maps::{
    fiber_gap_lower, fiber_gap_min_sq, fiber_gap_sq, h1, h2, h_slopes, phi_cutoff, phi_unit, psi_exact,
    rational_annulus_point, sample_psi_lipschitz, search_affine_n, PsiParameters,
};
use sponge_core::embedding_hilbert::{build_stage_hilbert, diagram_check, HilbertStage};
use sponge_core::embedding_r4::{
    build_stage_one, certify_claim_j, certify_stage, diagram_check_tower, epsilon, TowerStage,
};
use sponge_core::embedding_rk::build_stage_rk;
use sponge_core::numeric::pow5;
use sponge_core::prober::{
    divergence_check, hilbert_glip_fiber, probe_stage, verify_witness, ProbeConfig, ProbeSurface, RingOutcome, StageData,
};
use sponge_core::schedule::DeltaSchedule;
use sponge_core::stage::Stage;

type Outcome = Result<String, String>;

fn rat(n: i64, d: i64) -> BigRational {
    BigRational::new(n.into(), d.into())
}

fn big(r: Ratio<i128>) -> BigRational {
    BigRational::new(BigInt::from(*r.numer()), BigInt::from(*r.denom()))
}

fn ensure(ok: bool, msg: impl FnOnce() -> String) -> Result<(), String> {
    if ok {
        Ok(())
    } else {
        Err(msg())
    }
}

struct Towers {
    hilbert: Vec<HilbertStage>,
    r4: Vec<TowerStage>,
    rk: Vec<TowerStage>,
}

fn towers() -> Towers {
    let h = DeltaSchedule::hilbert();
    let r = DeltaSchedule::r4();
    Towers {
        hilbert: (0..=2).map(|n| build_stage_hilbert(n, &h, 0, 1_000_000).unwrap()).collect(),
        r4: vec![TowerStage::zero(2, &r), build_stage_one(2, &r, 4, 1_000_000).unwrap().0],
        rk: (0..=1).map(|j| build_stage_rk(j, 3, &r, 4, 1_000_000).unwrap()).collect(),
    }
}

/// h1, h2, φ at their breakpoints, and the Lipschitz constants from per-piece slopes.
fn closed_forms() -> Outcome {
    let d = rat(1, 11);
    let cases = [
        (h1(&rat(0, 1), &d), rat(0, 1)),
        (h1(&rat(2, 1), &d), d.clone()),
        (h1(&rat(1, 1), &d), &d / rat(2, 1)),
        (h2(&rat(1, 1), &d), -d.clone()),
        (h2(&rat(3, 1), &d), d.clone()),
        (h2(&rat(2, 1), &d), rat(0, 1)),
        (h2(&rat(0, 1), &d), rat(0, 1)),
        (h2(&rat(4, 1), &d), rat(0, 1)),
    ];
    for (i, (got, want)) in cases.iter().enumerate() {
        ensure(got.as_ref().is_ok_and(|g| g == want), || format!("h breakpoint {i}: {got:?} ≠ {want}"))?;
    }
    // slopes are per half-turn: δ/2 and δ there are δ/2π and δ/π per radian
    let slopes = h_slopes(&d);
    let m1 = slopes.iter().map(|s| s.0.abs()).max().unwrap();
    let m2 = slopes.iter().map(|s| s.1.abs()).max().unwrap();
    ensure(m1 == &d / rat(2, 1) && m2 == d, || format!("h slopes {m1}, {m2}"))?;
    for i in 0..3u32 {
        let w = rat(1, pow5(i + 1) as i64);
        let bps = [rat(0, 1), &w / rat(5, 1), &w * rat(4, 5), w.clone()];
        let vals: Vec<BigRational> = bps.iter().map(|r| phi_cutoff(r, i).unwrap()).collect();
        ensure(vals == [rat(0, 1), w.clone(), w.clone(), rat(0, 1)], || format!("φ breakpoints at i={i}: {vals:?}"))?;
        let lip = bps.windows(2).zip(vals.windows(2)).map(|(r, v)| ((&v[1] - &v[0]) / (&r[1] - &r[0])).abs()).max().unwrap();
        ensure(lip == rat(5, 1), || format!("φ Lipschitz {lip} at i={i}"))?;
        ensure(phi_cutoff(&(&w * rat(6, 5)), i).is_err(), || "φ accepted r outside its range".into())?;
    }
    Ok("h1, h2 at 8 breakpoints, φ at 4 breakpoints × 3 generations; slopes δ/2π, δ/π, 5".into())
}

/// Exact breakpoint minimum of the fiber gap, confirmed on a 10⁵ grid.
fn fiber_gap() -> Outcome {
    let mut worst = f64::INFINITY;
    for d in [rat(1, 11), rat(1, 1_000_000_001)] {
        let min = fiber_gap_min_sq(&d);
        ensure(min >= &d * &d / rat(4, 1), || format!("exact min² {min} below (δ/2)²"))?;
        for t in 0..=2 {
            let g = fiber_gap_sq(&rat(t, 1), &d).unwrap();
            ensure(g >= &d * &d / rat(4, 1), || format!("breakpoint T={t}: gap² {g}"))?;
        }
        let df = num_traits::ToPrimitive::to_f64(&d).unwrap();
        for i in 0..=100_000 {
            let g = fiber_gap_lower(2.0 * i as f64 / 100_000.0, df).unwrap();
            ensure(g >= df / 2.0 - 1e-12, || format!("grid point {i}: gap {g:e} < δ/2"))?;
            worst = worst.min(g / df);
        }
    }
    Ok(format!("exact minimum ≥ δ/2 at two δ; grid min gap/δ = {worst:.6}"))
}

/// Fiber separation (exact), sup bound and sampled Lipschitz constant of Ψ.
fn psi_bounds() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let d = rat(1, 11);
    let w = rat(1, 5);
    for n in 0..10_000 {
        let (u, v) = rational_annulus_point(&mut rng, 97);
        let (u, v) = (big(u), big(v));
        let (r, _) = polar(u.clone(), v.clone()).unwrap();
        let a = psi_exact(&u, &v, false, &d, &w);
        let b = psi_exact(&u, &v, true, &d, &w);
        let gap = (&a[0] - &b[0]).pow(2) + (&a[1] - &b[1]).pow(2);
        let need = &d / rat(2, 1) * &w * phi_unit(&r);
        ensure(gap >= &need * &need, || format!("pair {n}: gap² {gap} < {}", &need * &need))?;
    }
    let mut lips = Vec::new();
    for (delta, i) in [(1.0 / 11.0, 0u32), (1.0 / 12.0, 1), (1e-9, 0)] {
        let p = PsiParameters { delta, i };
        let diam = p.side() * 2f64.sqrt();
        for _ in 0..20_000 {
            let x = [rng.gen::<f64>() * p.side(), rng.gen::<f64>() * p.side()];
            let y = p.eval(x, rng.gen());
            ensure(y[0].hypot(y[1]) <= delta * diam, || format!("‖Ψ({x:?})‖ above δ·diam Q"))?;
        }
        let l = sample_psi_lipschitz(&p, 100_000, 5);
        ensure(l >= delta && l <= 7.0 * delta * 1.05, || format!("sampled Lipschitz {:.4}δ at δ={delta}", l / delta))?;
        lips.push(format!("{:.3}δ", l / delta));
    }
    Ok(format!("10⁴ exact fiber pairs; sup ≤ δ·diam Q; sampled glip Ψ = {}", lips.join(", ")))
}

/// Per-piece operator norms, separation and sup bound of the affine approximation.
fn affine() -> Outcome {
    let mut found = Vec::new();
    for (delta, i) in [(1.0 / 11.0, 0u32), (1.0 / 12.0, 1), (1.0 / (1e9 + 1.0), 0)] {
        let a = search_affine_n(&PsiParameters { delta, i }, 4).map_err(|e| format!("δ={delta}: {e}"))?;
        let b = &a.bounds;
        ensure(b.glip >= delta / 16.0 && b.glip <= 23.0 * delta, || format!("glip {:.4}δ", b.glip / delta))?;
        ensure(b.separation_ratio >= 1.0, || format!("separation ratio {}", b.separation_ratio))?;
        ensure(b.sup_norm <= b.sup_limit, || format!("sup {:e} > {:e}", b.sup_norm, b.sup_limit))?;
        found.push(format!("N={} glip={:.3}δ", a.n, b.glip / delta));
    }
    Ok(found.join("; "))
}

fn diagrams(t: &Towers) -> Outcome {
    let h = &t.hilbert;
    let mut checked = 0;
    for i in 0..h.len() {
        for j in i + 1..h.len() {
            let r = diagram_check(&h[i], &h[j]);
            ensure(r.mismatches == 0, || format!("Hilbert {i}→{j}: {} mismatches", r.mismatches))?;
            checked += r.vertices;
        }
    }
    let mut boundary = 0;
    for (name, tw) in [("ℝ⁴", &t.r4), ("ℝ⁵", &t.rk)] {
        let (radn, _) = certify_claim_j(&tw[0], 20_000, 3, (-40, 10)).map_err(|e| e.to_string())?;
        let d = diagram_check_tower(&tw[0], &tw[1], &radn);
        ensure(d.mismatches == 0 && d.undefined == 0, || format!("{name}: {d:?}"))?;
        checked += d.vertices;
        boundary += d.undefined_on_boundary;
    }
    Ok(format!("{checked} vertices exact in all three towers ({boundary} ℝ⁵ cube-face vertices outside the tube)"))
}

fn currents(t: &Towers) -> Outcome {
    let stages: Vec<&Stage> =
        t.hilbert.iter().map(|h| &h.stage).chain(t.r4.iter().map(|s| &s.stage)).chain(t.rk.iter().map(|s| &s.stage)).collect();
    for (i, s) in stages.iter().enumerate() {
        ensure(mass(s).is_one(), || format!("stage {i}: mass {}", mass(s)))?;
    }
    let s0 = &t.hilbert[0].stage;
    let area = eval_current(&StageCurrent::of(s0), &SampledForm::coordinates(&[0, 1], 2), s0).map_err(|e| e.to_string())?;
    ensure(area.value == 1.0, || format!("dx∧dy at stage 0 = {}", area.value))?;
    let b0 = boundary_mass(&StageCurrent::of(s0), s0).map_err(|e| e.to_string())?;
    ensure(b0 == rat(4, 1), || format!("boundary mass {b0}"))?;

    let mut worst: f64 = 0.0;
    for h in &t.hilbert[1..] {
        let c = pushforward_check(0, h.n, s0, &h.stage, truncation(h.ambient_dim, 2), true, &form_battery(2), 1e-6)
            .map_err(|e| e.to_string())?;
        ensure(c.passed, || format!("Hilbert pushforward 0←{}: {:?}", h.n, c.entries))?;
        worst = c.entries.iter().map(|e| e.difference).fold(worst, f64::max);
    }
    for tw in [&t.r4, &t.rk] {
        let (radn, _) = certify_claim_j(&tw[0], 20_000, 3, (-40, 10)).map_err(|e| e.to_string())?;
        let dim = tw[0].ambient_dim();
        let forms = if tw[0].k == 2 { form_battery(dim) } else { vec![SampledForm::coordinates(&[0, 1, 2], dim)] };
        let c = pushforward_check(0, 1, &tw[0].stage, &tw[1].stage, radn_projection(vec![radn]), false, &forms, 1e-6)
            .map_err(|e| e.to_string())?;
        ensure(c.passed, || format!("k={} pushforward: {:?}", tw[0].k, c.entries))?;
        worst = c.entries.iter().map(|e| e.difference).fold(worst, f64::max);
    }
    Ok(format!("mass 1 at {} stages; dx∧dy = 1; ∂-mass 4; pushforward max error {worst:.2e}", stages.len()))
}

fn shsep() -> Outcome {
    let mut parts = Vec::new();
    for i in [1, 2] {
        let c = check_shsep(i, 10_000, 100 + i as u64);
        ensure(c.tested >= 10_000 && c.violations.is_empty(), || {
            format!("generation {i}: {} tested, {} violations", c.tested, c.violations.len())
        })?;
        parts.push(format!("{} pairs at stage {i}", c.tested));
    }
    Ok(format!("0 violations; {}", parts.join(", ")))
}

fn claim(t: &Towers) -> Outcome {
    let schedule = DeltaSchedule::r4();
    let lhs = schedule.claim_condition_lhs();
    ensure(lhs < 0.125, || format!("precondition left side {lhs}"))?;
    let mut parts = vec![format!("precondition {lhs:.3e} < 1/8")];
    for s in &t.r4 {
        let (_, c) = certify_claim_j(s, 100_000, 17, (-40, 10)).map_err(|e| format!("stage {}: {e}", s.j))?;
        ensure(c.samples >= 100_000 && c.worst_ratio() <= 1.0 + epsilon(s.j), || format!("stage {}: ratio {}", s.j, c.worst_ratio()))?;
        ensure(c.max_drift <= 100.0 / pow5(s.j) as f64, || format!("stage {}: drift {}", s.j, c.max_drift))?;
        ensure(c.ill_defined == 0, || format!("stage {}: {} ill-defined members", s.j, c.ill_defined))?;
        parts.push(format!("j={} σ={:.3e} ratio {:.6} drift {:.3e}", s.j, c.sigma, c.worst_ratio(), c.max_drift));
    }
    Ok(parts.join("; "))
}

fn lipschitz_interval(t: &Towers) -> Outcome {
    let mut parts = Vec::new();
    for tw in [&t.r4, &t.rk] {
        for j in 1..tw.len() {
            let b = certify_stage(&tw[j], tw[j - 1].stage.complex.sites.len()).map_err(|e| format!("k={} j={j}: {e}", tw[j].k))?;
            ensure(b.sup_move <= b.sup_move_limit, || format!("sup-move {} > {}", b.sup_move, b.sup_move_limit))?;
            parts.push(format!("k={} j={j}: glip {:.6} ∈ [{:.4}, {:.2}], sup-move {:.2e}", tw[j].k, b.glip, b.glip_interval.0, b.glip_interval.1, b.sup_move));
        }
    }
    Ok(parts.join("; "))
}

fn prober(t: &Towers) -> Outcome {
    let schedule = DeltaSchedule::hilbert();
    let cfg = ProbeConfig::default();
    let mut gammas = Vec::new();
    let mut witnesses = 0;
    for h in &t.hilbert[1..] {
        let glip_fiber = hilbert_glip_fiber(&schedule, h.n);
        let data = StageData {
            stage: &h.stage,
            n: h.n,
            delta: schedule.delta(h.n as u64),
            glip_f: (1.0 + glip_fiber * glip_fiber).sqrt(),
            glip_fiber,
            affine_n: 0,
        };
        let flat = ProbeSurface::flat(h.ambient_dim);
        let c = probe_stage(&flat, &data, &[], &cfg).map_err(|e| e.to_string())?;
        let rings: Vec<_> = c.squares.iter().flat_map(|s| &s.rings).collect();
        ensure(rings.iter().all(|o| matches!(o, RingOutcome::Hole { .. })), || format!("stage {}: a ring without a hole", h.n))?;
        gammas.push(c.gamma.filter(|g| *g > 0.0).ok_or(format!("stage {}: no γ", h.n))?);

        let single = ProbeSurface::single_sheet(&h.stage, glip_fiber);
        let c = probe_stage(&single, &data, &[], &cfg).map_err(|e| e.to_string())?;
        let contradictions = c.contradictions();
        ensure(!contradictions.is_empty(), || format!("stage {}: single sheet gave no contradiction", h.n))?;
        for w in contradictions {
            let bad = verify_witness(&w.witness, &single, &h.stage);
            ensure(bad.is_empty(), || format!("stage {}: witness rejected: {bad:?}", h.n))?;
            witnesses += 1;
        }
    }
    let (lo, hi) = gammas.iter().fold((f64::INFINITY, 0.0f64), |(a, b), g| (a.min(*g), b.max(*g)));
    ensure(hi <= 2.0 * lo, || format!("γ unstable: {gammas:?}"))?;

    let div = divergence_check(&schedule, 10, 5);
    ensure(div.harmonic_ok && div.harmonic_block >= 1.0 / 16.0, || format!("harmonic block {}", div.harmonic_block))?;
    ensure(div.blocks.len() == 4 && div.blocks.iter().all(|b| b.passed), || format!("blocks {:?}", div.blocks))?;
    Ok(format!(
        "flat holes every ring; γ = {}; {witnesses} verified witnesses; harmonic block {:.4} ≥ 1/16; decades t=2..5 ≥ 1/(42(t+1))",
        gammas.iter().map(|g| format!("{g:.4}")).collect::<Vec<_>>().join(", "),
        div.harmonic_block
    ))
}

fn determinism() -> Outcome {
    let configs = [
        RunConfig { mode: Mode::Hilbert, max_stage: 2, ..RunConfig::default() },
        RunConfig { mode: Mode::R4, ..RunConfig::default() },
        RunConfig { mode: Mode::Rk, k: 3, ..RunConfig::default() },
    ];
    let mut files = 0;
    for cfg in &configs {
        let a = tempfile::tempdir().map_err(|e| e.to_string())?;
        let b = tempfile::tempdir().map_err(|e| e.to_string())?;
        cmd_build(cfg, a.path()).map_err(|e| e.to_string())?;
        cmd_build(cfg, b.path()).map_err(|e| e.to_string())?;
        let (_, encoded) = encode_bundle(cfg, &build_stages(cfg).map_err(|e| e.to_string())?).map_err(|e| e.to_string())?;
        for (name, bytes) in encoded.iter().map(|(n, b)| (n.clone(), b.clone())).chain([("manifest.json".to_string(), Vec::new())]) {
            let fa = std::fs::read(a.path().join(&name)).map_err(|e| e.to_string())?;
            let fb = std::fs::read(b.path().join(&name)).map_err(|e| e.to_string())?;
            ensure(fa == fb, || format!("{:?} {name} differs between builds", cfg.mode))?;
            ensure(bytes.is_empty() || fa == bytes, || format!("{:?} {name} differs from the in-memory encoding", cfg.mode))?;
            files += 1;
        }
    }
    Ok(format!("{files} files byte-identical across two builds of three towers"))
}

fn main() -> ExitCode {
    let start = Instant::now();
    let t = towers();
    let criteria: Vec<(&str, Box<dyn Fn() -> Outcome + '_>)> = vec![
        ("closed-form exactness", Box::new(closed_forms)),
        ("fiber gap lower bound", Box::new(fiber_gap)),
        ("separation, sup and Lipschitz of Ψ", Box::new(psi_bounds)),
        ("piecewise-affine certification", Box::new(affine)),
        ("diagram exactness", Box::new(|| diagrams(&t))),
        ("mass and currents", Box::new(|| currents(&t))),
        ("sheet separation", Box::new(shsep)),
        ("radial neighbourhood projection", Box::new(|| claim(&t))),
        ("Lipschitz interval of the towers", Box::new(|| lipschitz_interval(&t))),
        ("prober", Box::new(|| prober(&t))),
        ("determinism", Box::new(determinism)),
    ];
    let mut failed = 0;
    for (i, (name, run)) in criteria.iter().enumerate() {
        let t0 = Instant::now();
        let (tag, text) = match run() {
            Ok(m) => ("PASS", m),
            Err(e) => {
                failed += 1;
                ("FAIL", e)
            }
        };
        println!("[{tag}] {:>2}. {name}: {text} ({:.1}s)", i + 1, t0.elapsed().as_secs_f64());
    }
    println!("acceptance: {} of {} criteria pass in {:.1}s", criteria.len() - failed, criteria.len(), start.elapsed().as_secs_f64());
    if failed > 0 {
        ExitCode::FAILURE
    } else {
        ExitCode::SUCCESS
    }
}
