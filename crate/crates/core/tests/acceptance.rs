//! Acceptance suite: one PASS/FAIL line per criterion, nonzero exit on any failure.

use std::time::{Duration, Instant};

use ckthermo::algebra::{state_eval, AlgebraElement};
use ckthermo::geometry::{cantor_system, farey_type_system, MarkovMap, SchottkySystem};
use ckthermo::inducing::{
    build_induced, chi_from_induced, coboundary_residual, kac_lift, rn_lift, InducedMeasure,
};
use ckthermo::kms::{check_suite, KMS_CONDITION, LSTAR_INVARIANCE};
use ckthermo::rn_rep::RnRepContext;
use ckthermo::spectrum::{bowen_root, equilibrium, linspace, normalized_potential, spectrum_sweep};
use ckthermo::transfer::{
    eigenmeasure, gibbs_measure, lstar_residual, pressure, rn_derivative_at, weak_gibbs_profile,
};
use ckthermo::{CylinderMeasure, IncidenceSystem, LocallyConstantFunction, Word};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

type F = LocallyConstantFunction<f64>;
type M = CylinderMeasure<f64>;
type Outcome = Result<(bool, String), ckthermo::Error>;
type Criterion = (&'static str, fn() -> Outcome, Duration);

fn ln(x: f64) -> f64 {
    x.ln()
}

/// Two-ratio potential `(log 2, log 4)` on the full 2-shift.
fn two_ratio() -> (IncidenceSystem, F) {
    let sys = IncidenceSystem::full_shift(2).unwrap();
    let j = F::from_values(&sys, 1, vec![ln(2.0), ln(4.0)]).unwrap();
    (sys, j)
}

/// Root of `2^{-s} + 4^{-s} = 1`: with `y = 2^{-s}`, `y² + y = 1`.
fn two_ratio_root() -> f64 {
    let y = (5f64.sqrt() - 1.0) / 2.0;
    -y.log2()
}

fn criterion_1() -> Outcome {
    let sys = IncidenceSystem::schottky(2)?;
    let phi = F::constant(&sys, 1, ln(3.0));
    let mut worst = 0.0f64;
    for s in [-2.0, -1.0, 0.0, 0.5, 1.0, 2.0] {
        let p = pressure(&sys, &phi.scale(-s))?;
        worst = worst.max((p - (1.0 - s) * ln(3.0)).abs());
    }
    Ok((
        worst < 1e-10,
        format!("max |P(-s phi) - (1-s) log 3| = {worst:.3e}"),
    ))
}

fn criterion_2() -> Outcome {
    let cantor = cantor_system();
    let cj = cantor.bowen_series_potential(1)?.j;
    let s_cantor = bowen_root(cantor.system(), &cj)?;
    let e1 = (s_cantor - ln(2.0) / ln(3.0)).abs();
    let (sys, j) = two_ratio();
    let target = two_ratio_root();
    let e2 = (bowen_root(&sys, &j)? - target).abs();
    let frozen = (target - 0.694241913631).abs();
    Ok((
        e1 < 1e-8 && e2 < 1e-7 && frozen < 1e-12,
        format!("cantor error {e1:.3e}; two-ratio error {e2:.3e} (target {target:.12})"),
    ))
}

fn criterion_3() -> Outcome {
    let sys = IncidenceSystem::full_shift(2)?;
    let h = F::constant(&sys, 1, ln(2.0));
    let mu = eigenmeasure(&sys, &h.scale(-1.0))?;
    let report = check_suite(&sys, &mu, &h, 1.0, 200, 2024)?;
    let kms = report.value(KMS_CONDITION).unwrap_or(f64::INFINITY);
    let worst = report.max_residual();
    let biased = M::bernoulli(&sys, &[0.7, 0.3])?;
    let control = check_suite(&sys, &biased, &h, 1.0, 200, 2024)?;
    let lstar = control.value(LSTAR_INVARIANCE).unwrap_or(0.0);
    Ok((
        kms < 1e-9 && worst < 1e-9 && lstar >= 0.1,
        format!("kms {kms:.3e}; worst check {worst:.3e}; Bernoulli(0.7) L* invariance {lstar:.3e}"),
    ))
}

fn random_irreducible(letters: usize, seed: u64) -> IncidenceSystem {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    loop {
        let matrix = (0..letters)
            .map(|_| (0..letters).map(|_| u8::from(rng.gen_bool(0.6))).collect())
            .collect();
        if let Ok(sys) = IncidenceSystem::new(matrix) {
            if sys.is_irreducible() {
                return sys;
            }
        }
    }
}

fn criterion_4() -> Outcome {
    let fair_sys = IncidenceSystem::full_shift(2)?;
    let fair = M::bernoulli(&fair_sys, &[0.5, 0.5])?;
    let golden = IncidenceSystem::golden_mean();
    let random = random_irreducible(4, 11);
    let cases = [
        ("bernoulli", fair_sys.clone(), fair),
        (
            "golden",
            golden.clone(),
            gibbs_measure(&golden, &F::zero(&golden))?,
        ),
        (
            "random4",
            random.clone(),
            gibbs_measure(&random, &F::zero(&random))?,
        ),
    ];
    let mut ok = true;
    let mut parts = Vec::new();
    for (name, sys, m) in cases {
        let ctx = RnRepContext::new(&sys, &m)?;
        let (r1, r2) = ctx.relation_residuals(4);
        let adj = ctx.adjointness_residual(50, 5)?;
        ok &= r1 < 1e-12 && r2 < 1e-12 && adj < 1e-12;
        parts.push(format!("{name} {:.1e}/{:.1e}/{:.1e}", r1, r2, adj));
    }
    Ok((ok, format!("relations/adjointness: {}", parts.join(", "))))
}

fn criterion_5() -> Outcome {
    let (sys, j) = two_ratio();
    let grid = linspace(-1.0, 1.0, 21);
    let sweep = spectrum_sweep(&sys, &j, &grid)?;
    let pts: Vec<_> = sweep.successful().cloned().collect();
    let all = pts.len() == grid.len();
    let peak = pts
        .iter()
        .max_by(|a, b| a.dim.total_cmp(&b.dim))
        .expect("non-empty sweep");
    let root = bowen_root(&sys, &j)?;
    let peak_ok = peak.q.abs() < 1e-12 && (peak.dim - root).abs() < 1e-8;
    let legendre = pts.iter().map(|p| p.legendre_residual).fold(0.0, f64::max);
    // s(q) decreases along the grid, so α strictly decreasing in s is α strictly increasing in q.
    let monotone = pts
        .windows(2)
        .all(|w| w[1].s_q < w[0].s_q && w[1].alpha > w[0].alpha);
    let mut state_gap = 0.0f64;
    let jx = AlgebraElement::from_real_function(&sys, &j);
    for p in &pts {
        let m = equilibrium(&sys, &j, p.s_q)?;
        let v = state_eval(&sys, &m, &jx)?;
        state_gap = state_gap.max((v.re - p.alpha).abs().max(v.im.abs()));
    }
    let lo = (sweep.alpha_minus - ln(2.0)).abs();
    let hi = (sweep.alpha_plus - ln(4.0)).abs();
    Ok((
        all && peak_ok && legendre < 1e-10 && monotone && state_gap < 1e-10 && lo < 1e-3 && hi < 1e-3,
        format!(
            "points {}/{}; peak q={:.2} |dim-root|={:.2e}; legendre {legendre:.2e}; alpha strictly decreasing in s(q): {monotone}; sigma(J)-alpha {state_gap:.2e}; endpoints {lo:.2e}, {hi:.2e}",
            pts.len(),
            grid.len(),
            peak.q,
            (peak.dim - root).abs()
        ),
    ))
}

fn criterion_6() -> Outcome {
    let sys = IncidenceSystem::golden_mean();
    let m = gibbs_measure(&sys, &F::zero(&sys))?;
    let base = vec![Word::parse(&sys, "0")?];
    let ind = build_induced(&sys, &base, &m, 40, 1e-12)?;
    let nt = InducedMeasure::restrict(&ind, &m)?;

    let lift = kac_lift(&ind, &nt, 3)?;
    let nu_b = lift.nu.mass(&sys, &[0])?;
    let normalizer = (lift.normalizer * nu_b - 1.0).abs();
    let direct = m.masses_at(&sys, 3)?;
    let round_trip = lift
        .nu
        .weights()
        .iter()
        .zip(&direct)
        .map(|(a, b)| (a - b).abs())
        .fold(0.0, f64::max);

    let mut rn = [0.0f64; 2];
    let mut count = [0usize; 2];
    for w in sys.word_letters(4) {
        let v = rn_lift(&ind, &nt, &w)?;
        let want = m.mass(&sys, &w[1..])? / m.mass(&sys, &w)?;
        let i = usize::from(v.formula) - 1;
        rn[i] = rn[i].max((v.value - want).abs());
        count[i] += 1;
    }

    let rnd = rn_derivative_at(&sys, &m, 2)?.map(f64::ln);
    let g = F::from_values(&sys, 1, vec![0.3, -0.2])?;
    let g_shift = g.compose_shift(&sys, 1);
    let h = F::from_fn(&sys, 2, |w| {
        rnd.value_at(&sys, w) + g.value_at(&sys, w) - g_shift.value_at(&sys, w)
    });
    let chi_tilde = g.map(|v| (-v).exp());
    let chi = chi_from_induced(&ind, &nt, &h, &chi_tilde, 3)?;
    let cob = coboundary_residual(&sys, &m, &h, &chi.chi, 4)?;

    let ok = normalizer < 1e-12
        && round_trip < 1e-12
        && rn[0] < 1e-10
        && rn[1] < 1e-10
        && count[0] > 0
        && count[1] > 0
        && chi.route_gap < 1e-9
        && cob < 1e-10;
    Ok((
        ok,
        format!(
            "normalizer {normalizer:.2e}; round trip {round_trip:.2e}; RN formula 1 {:.2e} ({} cylinders), formula 2 {:.2e} ({} cylinders); chi routes {:.2e}; coboundary {cob:.2e}",
            rn[0], count[0], rn[1], count[1], chi.route_gap
        ),
    ))
}

fn criterion_7() -> Outcome {
    let farey = farey_type_system();
    let sys = farey.system().clone();
    let s = 0.2;
    let depth = 12;
    let j = farey.map().bowen_series_potential(6)?.j;
    let m = equilibrium(&sys, &j, s)?;
    let ind = build_induced(&sys, &[Word::parse(&sys, "1")?], &m, 40, 1e-8)?;
    let nt = InducedMeasure::restrict(&ind, &m)?;
    let lift = kac_lift(&ind, &nt, depth)?;
    let neg = normalized_potential(&sys, &j, s)?.i_s.scale(-1.0);
    let b = weak_gibbs_profile(&sys, &lift.nu, &neg, depth)?;
    let (b4, b12) = (b[3] / 4.0, b[11] / 12.0);
    let r = lstar_residual(&sys, &lift.nu, &neg, 1.0, depth - 1)?;
    Ok((
        b12 < b4 && r < 1e-8,
        format!(
            "s={s}; b4/4 {b4:.4e} > b12/12 {b12:.4e}; L* residual {r:.2e}; tail mass {:.2e}, tail bound {:.2e}",
            ind.tail_mass(),
            ind.tail_bound()
        ),
    ))
}

fn box_count_gap(
    map: &MarkovMap,
    depth: usize,
    scales: &[f64],
    target: f64,
) -> Result<(f64, f64), ckthermo::Error> {
    let slope = map.boxcount_dimension(depth, scales)?;
    Ok((slope, (slope - target).abs()))
}

fn criterion_8() -> Outcome {
    let schottky = SchottkySystem::example();
    let delta = schottky.map().limit_set_dimension(8)?.delta;
    let max_diam = schottky.map().bowen_series_potential(9)?.max_diameter;
    let scales = MarkovMap::geometric_scales(4.0 * max_diam * 64.0, 0.5, 7);
    let (s1, g1) = box_count_gap(schottky.map(), 9, &scales, delta)?;

    let cantor = cantor_system();
    let cscales: Vec<f64> = (4..=10).map(|k| 2f64.powi(-k)).collect();
    let (s2, g2) = box_count_gap(&cantor, 10, &cscales, ln(2.0) / ln(3.0))?;
    Ok((
        g1 < 0.03 && g2 < 0.02,
        format!("schottky slope {s1:.4} vs delta {delta:.6} (gap {g1:.2e}); cantor slope {s2:.4} (gap {g2:.2e})"),
    ))
}

fn criterion_9() -> Outcome {
    let sys = IncidenceSystem::full_shift(2)?;
    let m = M::bernoulli(&sys, &[0.5, 0.5])?;
    let ctx = RnRepContext::new(&sys, &m)?;
    let report = ctx.report(4, 10, 3)?;
    let diagonal_gap = report
        .state_comparison
        .iter()
        .filter(|c| c.diagonal)
        .map(|c| c.difference)
        .fold(0.0, f64::max);
    let off = report
        .state_comparison
        .iter()
        .find(|c| !c.diagonal)
        .expect("off-diagonal sample");
    println!(
        "{}",
        serde_json::to_string(&report.state_comparison).unwrap()
    );
    let ok = diagonal_gap < 1e-15
        && (off.vector[0] - 0.5).abs() < 1e-15
        && off.vector[1].abs() < 1e-15
        && off.projection[0].abs() < 1e-15
        && off.projection[1].abs() < 1e-15;
    Ok((
        ok,
        format!(
            "diagonal gap {diagonal_gap:.1e}; {} vector {} projection {}",
            off.element, off.vector[0], off.projection[0]
        ),
    ))
}

fn main() {
    let criteria: [Criterion; 9] = [
        ("pressure line", criterion_1, Duration::from_secs(1)),
        ("Bowen roots", criterion_2, Duration::from_secs(1)),
        ("KMS suite", criterion_3, Duration::from_secs(10)),
        (
            "Cuntz-Krieger relations",
            criterion_4,
            Duration::from_secs(5),
        ),
        ("spectrum pipeline", criterion_5, Duration::from_secs(30)),
        ("Kac lift", criterion_6, Duration::from_secs(5)),
        ("parabolic weak Gibbs", criterion_7, Duration::from_secs(60)),
        ("geometry oracle", criterion_8, Duration::from_secs(60)),
        ("state discrepancy", criterion_9, Duration::from_secs(1)),
    ];
    let mut failures = 0;
    for (i, (name, check, budget)) in criteria.iter().enumerate() {
        let start = Instant::now();
        let outcome = check();
        let elapsed = start.elapsed();
        let (pass, detail) = match outcome {
            Ok((ok, detail)) => (ok && elapsed < *budget, detail),
            Err(e) => (false, format!("error: {e}")),
        };
        if !pass {
            failures += 1;
        }
        println!(
            "criterion {}: {} {name}: {detail} [{:.3}s of {}s]",
            i + 1,
            if pass { "PASS" } else { "FAIL" },
            elapsed.as_secs_f64(),
            budget.as_secs()
        );
    }
    println!("acceptance: {} of 9 criteria passed", 9 - failures);
    if failures > 0 {
        std::process::exit(1);
    }
}
