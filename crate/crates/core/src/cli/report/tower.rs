//! Certificates for the three towers and the prober.

use num_traits::One;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::Certificate;
use crate::cli::{stage_data, Bundle, Mode, StageRecord};
use crate::currents::{form_battery, pushforward_check, radn_projection, SampledForm};
use crate::embedding_hilbert::{diagram_check, injectivity_ratio, sup_move};
use crate::embedding_r4::{certify_claim_j, certify_stage, composite_ratio, diagram_check_tower};
use crate::embedding_rk::fiber_constancy_defect;
use crate::numeric::pow5;
use crate::prober::{
    cumulative_bound, divergence_check, probe_stage, verify_witness, ProbeCertificate, ProbeConfig,
    ProbeSurface, RingOutcome,
};
use crate::complex_core::CellAddress;
use crate::radn::{ClaimCertificate, RadialNeighborhood};
use crate::schedule::DeltaSchedule;

const HILBERT_IDS: [(&str, &str); 3] = [
    ("embedding_hilbert.diagram", "commuting diagram"),
    ("embedding_hilbert.orthogonality", "orthogonal increments"),
    ("embedding_hilbert.cauchy", "Cauchy bound"),
];
const R4_IDS: [(&str, &str); 4] = [
    ("embedding_r4.composition", "composite projection"),
    ("embedding_r4.drift", "projection drift"),
    ("embedding_r4.embedding", "injectivity"),
    ("embedding_r4.nontriviality", "pushforward"),
];
const RK_IDS: [(&str, &str); 3] = [
    ("embedding_rk.fiber_constancy", "fiber constancy"),
    ("embedding_rk.verbatim", "generic step"),
    ("embedding_rk.doubling", "cell growth"),
];
const PROBER_IDS: [(&str, &str); 4] = [
    ("prober.total", "total outcome"),
    ("prober.hole_measure", "hole measure"),
    ("prober.cumulative", "cumulative bound"),
    ("prober.chain", "walk chain"),
];

fn not_applicable(ids: &[(&str, &str)], why: &str) -> Vec<Certificate> {
    ids.iter().map(|(id, anchor)| Certificate::not_applicable(id, anchor, why)).collect()
}

pub(super) fn hilbert_checks(bundle: &Bundle) -> Vec<Certificate> {
    let cfg = bundle.config();
    if cfg.mode != Mode::Hilbert {
        return not_applicable(&HILBERT_IDS, "bundle is not a Hilbert tower");
    }
    let hs: Vec<_> = bundle.stages.iter().map(|r| r.hilbert(cfg)).collect();
    let mut out = Vec::new();

    let reports: Vec<_> = hs.iter().enumerate().flat_map(|(a, lo)| hs[a + 1..].iter().map(move |up| diagram_check(lo, up))).collect();
    let mismatches: usize = reports.iter().map(|r| r.mismatches).sum();
    out.push(
        Certificate::new("embedding_hilbert.diagram", HILBERT_IDS[0].1, "0 vertex mismatches", format!("{mismatches}"), mismatches == 0)
            .with_detail(format!("{} stage pairs, {} vertices", reports.len(), reports.iter().map(|r| r.vertices).sum::<usize>())),
    );

    // F_j − F_{j-1}∘π lives in the two coordinates added at stage j
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut worst: f64 = 0.0;
    let mut points = 0;
    for w in hs.windows(2) {
        let (lo, up) = (&w[0], &w[1]);
        let old = lo.stage.complex.sites.len() as u32;
        for _ in 0..500 {
            let x = [rng.gen::<f64>(), rng.gen::<f64>()];
            for lift in up.stage.lifts_at(&x) {
                let f = up.stage.eval_point(&x, &lift);
                let down: Vec<_> = lift.iter().copied().filter(|(s, _)| *s < old).collect();
                let g = lo.stage.eval_point(&x, &down);
                worst = g.iter().zip(&f).map(|(a, b)| (a - b).abs()).fold(worst, f64::max);
                points += 1;
            }
        }
    }
    out.push(
        Certificate::new(
            "embedding_hilbert.orthogonality",
            HILBERT_IDS[1].1,
            "old coordinates unchanged (≤ 1e-12)",
            format!("{worst:e}"),
            worst <= 1e-12,
        )
        .with_detail(format!("{points} lifted sample points")),
    );

    // Ψ_n vanishes at the generation-n lattice, so the move is measured at
    // points of the newest sites with the closed form
    let mut c: f64 = 0.0;
    for w in hs.windows(2) {
        let (lo, up) = (&w[0], &w[1]);
        let (a, b) = (2 * up.n as usize, 2 * up.n as usize + 1);
        let mut m: f64 = 0.0;
        for site in &up.stage.complex.sites[lo.stage.complex.sites.len()..] {
            let lo_corner: Vec<f64> = site.corner.iter().map(|v| *v as f64 * site.side()).collect();
            for _ in 0..64 {
                let x = [lo_corner[0] + rng.gen::<f64>() * site.side(), lo_corner[1] + rng.gen::<f64>() * site.side()];
                for lift in up.stage.lifts_at(&x) {
                    let f = up.stage.eval_point(&x, &lift);
                    m = m.max(f[a].hypot(f[b]));
                }
            }
        }
        c = c.max(m / (up.schedule.delta(up.n as u64) / pow5(up.n) as f64));
    }
    let at_vertices = hs.iter().map(|h| sup_move(h).1).fold(0.0, f64::max);
    out.push(
        Certificate::new(
            "embedding_hilbert.cauchy",
            HILBERT_IDS[2].1,
            "‖F_n − F_{n-1}∘π‖ ≤ 56·δ_n·5^{-n}",
            format!("constant {c:.4}"),
            c > 0.0 && c <= 56.0,
        )
        .with_detail(format!("at stage vertices {at_vertices:.4}")),
    );
    out
}

/// Claim certificates for every stage of a tower bundle, stage 0 included.
fn claims(bundle: &Bundle) -> Result<Vec<(RadialNeighborhood, ClaimCertificate)>, String> {
    let cfg = bundle.config();
    bundle
        .stages
        .iter()
        .map(|r| certify_claim_j(&r.tower(cfg), cfg.claim_samples, cfg.seed + r.j as u64, cfg.sigma_exponents).map_err(|e| format!("stage {}: {e}", r.j)))
        .collect()
}

fn top_forms(rec: &StageRecord) -> Vec<SampledForm> {
    let d = rec.ambient_dim;
    if rec.k == 2 {
        return form_battery(d);
    }
    let axes: Vec<Vec<f64>> = (0..rec.k).map(|a| (0..d).map(|i| (i == a) as u8 as f64).collect()).collect();
    let mut x = vec![0.0; d];
    x[0] = 1.0;
    vec![SampledForm::coordinates(&(0..rec.k).collect::<Vec<_>>(), d), SampledForm::affine("(1+x) top", 1.0, x, axes)]
}

pub(super) fn r4_checks(bundle: &Bundle) -> Vec<Certificate> {
    let cfg = bundle.config();
    if cfg.mode == Mode::Hilbert {
        let mut out = not_applicable(&R4_IDS, "bundle is a Hilbert tower");
        out.extend(not_applicable(&RK_IDS, "bundle is a Hilbert tower"));
        return out;
    }
    let claims = match claims(bundle) {
        Ok(c) => c,
        Err(e) => {
            let mut out: Vec<_> = R4_IDS.iter().chain(&RK_IDS).map(|(id, a)| Certificate::error(id, a, &e)).collect();
            out.push(Certificate::error("embedding_r4.claim_j", "radial-basis function", &e));
            return out;
        }
    };
    let radns: Vec<RadialNeighborhood> = claims.iter().map(|c| c.0.clone()).collect();
    let certs: Vec<&ClaimCertificate> = claims.iter().map(|c| &c.1).collect();
    let mut out = Vec::new();

    let claim_ok = certs.iter().all(|c| c.passed && c.ill_defined == 0);
    out.push(
        Certificate::new(
            "embedding_r4.claim_j",
            "radial-basis function",
            "P_j is (1+ε_j)-Lipschitz on sampled pairs",
            certs.iter().map(|c| format!("j={} σ={:e} ratio {:.6}", c.j, c.sigma, c.worst_ratio())).collect::<Vec<_>>().join("; "),
            claim_ok,
        )
        .with_detail(format!("{} pairs per stage, ε_j = 2^-j", cfg.claim_samples)),
    );

    let (worst, bound) = composite_ratio(&radns, cfg.claim_samples, cfg.seed);
    out.push(Certificate::new(R4_IDS[0].0, R4_IDS[0].1, format!("≤ Π(1+ε_t) = {bound:.6}"), format!("{worst:.6}"), worst <= bound));

    let drift_ok = certs.iter().all(|c| c.max_drift <= c.drift_bound);
    out.push(Certificate::new(
        R4_IDS[1].0,
        R4_IDS[1].1,
        "≤ 100·5^-j",
        certs.iter().map(|c| format!("{:e}/{:e}", c.max_drift, c.drift_bound)).collect::<Vec<_>>().join(", "),
        drift_ok,
    ));

    let ratios: Vec<Option<f64>> = bundle.stages.iter().skip(1).map(|r| injectivity_ratio(&r.stage, cfg.shsep_samples, cfg.seed)).collect();
    let inj_ok = ratios.iter().all(|r| r.is_some_and(|v| v > 0.0));
    out.push(Certificate::new(R4_IDS[2].0, R4_IDS[2].1, "distinct lifts have distinct images (ratio > 0)", format!("{ratios:?}"), inj_ok && !ratios.is_empty()));

    let s0 = &bundle.stages[0];
    let mut push_ok = bundle.stages.len() > 1;
    let mut push_err: f64 = 0.0;
    let mut detail = String::new();
    for r in bundle.stages.iter().skip(1) {
        let proj = radn_projection(radns[..r.j as usize].to_vec());
        match pushforward_check(0, r.j, &s0.stage, &r.stage, proj, false, &top_forms(r), 1e-6) {
            Ok(c) => {
                push_err = c.entries.iter().map(|e| e.difference).fold(push_err, f64::max);
                // the pushforward is nonzero: it integrates the area form to 1
                push_ok &= c.passed && c.entries.first().is_some_and(|e| (e.upper - 1.0).abs() <= 1e-6);
            }
            Err(e) => {
                push_ok = false;
                detail = e.to_string();
            }
        }
    }
    out.push(Certificate::new(R4_IDS[3].0, R4_IDS[3].1, "P_* N_j = N_0 on the form battery (≤ 1e-6)", format!("{push_err:e}"), push_ok).with_detail(detail));

    let lower_sites: Vec<usize> = bundle.stages.iter().map(|r| r.stage.complex.sites.len()).collect();
    let bounds: Vec<_> = bundle.stages.iter().skip(1).map(|r| certify_stage(&r.tower(cfg), lower_sites[r.j as usize - 1])).collect();
    out.push(Certificate::new(
        "embedding_r4.lipschitz",
        "Lipschitz interval",
        "glip ∈ [s/16, 23s], s = (1+Σδ²)^½; sup-move ≤ 56·5^{-(j-1)}·δ_j",
        bounds.iter().map(|b| b.as_ref().map_or_else(|e| e.to_string(), |b| format!("j={} glip {:.6}", b.j, b.glip))).collect::<Vec<_>>().join("; "),
        bounds.iter().all(Result::is_ok),
    ));

    if cfg.mode != Mode::Rk {
        out.extend(not_applicable(&RK_IDS, "bundle is the planar ℝ⁴ tower"));
        return out;
    }
    let defect = bundle.stages.iter().map(|r| fiber_constancy_defect(&r.stage)).fold(0.0, f64::max);
    out.push(Certificate::new(RK_IDS[0].0, RK_IDS[0].1, "site values constant along transverse axes", format!("{defect:e}"), defect == 0.0));

    let towers: Vec<_> = bundle.stages.iter().map(|r| r.tower(cfg)).collect();
    let diagrams: Vec<_> = towers.windows(2).zip(&radns).map(|(w, radn)| diagram_check_tower(&w[0], &w[1], radn)).collect();
    let diagram_ok = diagrams.iter().all(|d| d.mismatches == 0 && d.undefined == 0);
    let coverage_ok = bundle.stages.iter().all(|r| r.stage.complex.base_coverage().values().all(|v| v.is_one()));
    let on_boundary: usize = diagrams.iter().map(|d| d.undefined_on_boundary).sum();
    out.push(
        Certificate::new(
            RK_IDS[1].0,
            RK_IDS[1].1,
            "claim, drift, diagram and coverage as in the planar tower",
            format!("claim {claim_ok}, drift {drift_ok}, diagram {diagram_ok}, coverage {coverage_ok}"),
            claim_ok && drift_ok && diagram_ok && coverage_ok,
        )
        .with_detail(format!("k = {}; {on_boundary} cube-face vertices outside the tube", cfg.k)),
    );

    let cells: Vec<usize> = bundle.stages.iter().map(|r| r.stage.cell_count()).collect();
    let growth: Vec<String> = cells.windows(2).map(|w| format!("{:.1}", w[1] as f64 / w[0] as f64)).collect();
    out.push(Certificate::info(RK_IDS[2].0, RK_IDS[2].1, format!("cells {cells:?}, ratio {}", growth.join(", "))));
    out
}

struct ProbeRun {
    single_sheet: bool,
    certs: Vec<ProbeCertificate>,
}

fn run_battery(bundle: &Bundle) -> Result<Vec<ProbeRun>, String> {
    let cfg = bundle.config();
    let pcfg = ProbeConfig { ring_depth: cfg.ring_depth, g: cfg.g, c: cfg.c, ..ProbeConfig::default() };
    let recs: Vec<&StageRecord> = bundle.stages.iter().filter(|r| r.j >= 1).collect();
    let data: Vec<_> = recs.iter().map(|r| stage_data(r, cfg)).collect();
    let count = ProbeSurface::battery(&recs[0].stage, 0.0).len();
    let mut runs = Vec::new();
    for i in 0..count {
        let mut holes: Vec<CellAddress> = Vec::new();
        let mut certs = Vec::new();
        let mut single_sheet = false;
        for d in &data {
            let surface = ProbeSurface::battery(d.stage, d.glip_fiber).swap_remove(i);
            single_sheet = surface.name == "single-sheet";
            let c = probe_stage(&surface, d, &holes, &pcfg).map_err(|e| e.to_string())?;
            holes.extend(c.holes());
            certs.push(c);
        }
        runs.push(ProbeRun { single_sheet, certs });
    }
    Ok(runs)
}

pub(super) fn prober_checks(bundle: &Bundle) -> Vec<Certificate> {
    let cfg = bundle.config();
    if cfg.k != 2 || bundle.stages.iter().all(|r| r.j == 0) {
        return not_applicable(&PROBER_IDS, "the prober needs a planar stage j ≥ 1");
    }
    let runs = match run_battery(bundle) {
        Ok(r) => r,
        Err(e) => return PROBER_IDS.iter().map(|(id, a)| Certificate::error(id, a, &e)).collect(),
    };
    let mut out = Vec::new();
    let outcomes = |run: &ProbeRun| run.certs.iter().flat_map(|c| c.squares.iter().flat_map(|s| &s.rings)).cloned().collect::<Vec<_>>();

    let mut inconclusive = 0;
    let mut bad_witness = Vec::new();
    let mut violated = 0;
    for run in &runs {
        inconclusive += outcomes(run).iter().filter(|o| matches!(o, RingOutcome::Inconclusive { .. })).count();
        for c in &run.certs {
            violated += c.lipschitz_violated as usize;
            let rec = bundle.stage(c.n).expect("probed stage is in the bundle");
            let surface = ProbeSurface::battery(&rec.stage, c.constants.glip_fiber)
                .into_iter()
                .find(|s| s.name == c.surface)
                .expect("battery surface");
            for w in c.contradictions() {
                bad_witness.extend(verify_witness(&w.witness, &surface, &rec.stage));
            }
        }
    }
    out.push(
        Certificate::new(
            PROBER_IDS[0].0,
            PROBER_IDS[0].1,
            "every ring holes or yields a verified contradiction",
            format!("{inconclusive} inconclusive, {} witness failures, {violated} Lipschitz violations", bad_witness.len()),
            inconclusive == 0 && bad_witness.is_empty() && violated == 0,
        )
        .with_detail(bad_witness.join("; ")),
    );

    let mut all_hole = true;
    let mut gammas = Vec::new();
    for run in runs.iter().filter(|r| !r.single_sheet) {
        all_hole &= outcomes(run).iter().all(|o| matches!(o, RingOutcome::Hole { .. } | RingOutcome::AlreadyHoled { .. }));
        gammas.extend(run.certs.iter().filter_map(|c| c.gamma));
    }
    let (lo, hi) = gammas.iter().fold((f64::INFINITY, 0.0f64), |(a, b), g| (a.min(*g), b.max(*g)));
    let gamma_ok = !gammas.is_empty() && lo >= cfg.gamma_floor && hi <= 2.0 * lo;
    out.push(Certificate::new(
        PROBER_IDS[1].0,
        PROBER_IDS[1].1,
        format!("holes in every ring; γ ≥ {} and max/min ≤ 2", cfg.gamma_floor),
        format!("γ ∈ [{lo:.4}, {hi:.4}]"),
        all_hole && gamma_ok,
    ));

    let schedule = cfg.schedule();
    let product = cumulative_bound(200, lo.min(0.999), cfg.g, &schedule);
    let decreasing = product.partial_products.windows(2).all(|w| w[1] < w[0]) && product.value() < 1.0;
    let div = divergence_check(&DeltaSchedule::hilbert(), cfg.g, 5);
    out.push(
        Certificate::new(
            PROBER_IDS[2].0,
            PROBER_IDS[2].1,
            "partial products strictly decreasing; Σ δ_{k_j} diverges block by block",
            format!("Π₂₀₀ = {:.6}, blocks {}", product.value(), div.passed),
            gamma_ok && decreasing && div.passed,
        )
        .with_detail(format!("total lower {:.6} ≥ {:.6}", div.total_lower, div.total_bound)),
    );

    let mut steps = 0;
    let mut broken = 0;
    let mut constants = String::new();
    for run in runs.iter().filter(|r| r.single_sheet) {
        for c in &run.certs {
            for w in c.contradictions() {
                for s in w.steps.iter().filter(|s| s.continued) {
                    steps += 1;
                    broken += (s.fiber_step > s.lipschitz_bound * (1.0 + 1e-12)) as usize;
                }
            }
            let k = &c.constants;
            constants.push_str(&format!("n={} c={:e} C={:.4} glipF={:.4} I_n={}; ", c.n, k.c, k.lipschitz, k.glip_f, k.i_n));
        }
    }
    out.push(
        Certificate::new(
            PROBER_IDS[3].0,
            PROBER_IDS[3].1,
            "continued steps move at most Lip φ·|Δp| in the fiber",
            format!("{broken} of {steps} steps"),
            broken == 0 && steps > 0,
        )
        .with_detail(constants.trim_end().to_string()),
    );
    out
}
