//! End-to-end acceptance checks. Prints one PASS/FAIL line per criterion and
//! exits non-zero if any criterion fails.

use std::process::ExitCode;
use std::time::Instant;

use assouadlab::cmaps::MapExpr;
use assouadlab::covering::{cell_side, count_bruteforce, count_dyadic};
use assouadlab::dimension::{regularize_spectrum, Estimator, EstimatorParams, SpectrumCurve};
use assouadlab::harness::{
    beta_intermediate, predict_qr_bound, predict_spectrum_bound, run_suite, theta_of_t,
    BoundReport, Suite, SuiteConfig, Verdict,
};
use assouadlab::refine::{classify, refine_step, Class, RefineSchedule, DEFAULT_MAX_LEVEL};
use assouadlab::{generate, Point, PointSet, SetSpec};
use rand::rngs::StdRng;
use rand::{Rng, SeedableRng};

type Outcome = Result<String, String>;
type Criterion<'a> = (&'static str, Box<dyn Fn() -> Outcome + 'a>);

const THETAS: [f64; 3] = [0.25, 0.5, 0.75];

fn check(ok: bool, detail: String) -> Outcome {
    if ok {
        Ok(detail)
    } else {
        Err(detail)
    }
}

fn regularized_curve(est: &Estimator) -> SpectrumCurve {
    let grid: Vec<f64> = (1..20).map(|i| i as f64 * 0.05).collect();
    regularize_spectrum(&est.spectrum(&grid).expect("spectrum"))
}

fn at(curve: &SpectrumCurve, theta: f64) -> f64 {
    curve
        .samples
        .iter()
        .find(|s| (s.theta - theta).abs() < 1e-9)
        .map(|s| s.alpha)
        .expect("theta on grid")
}

fn sequence_estimator(p: f64) -> Estimator {
    let (set, _) = generate(&SetSpec::SequencePower { p }, 10_000)
        .unwrap()
        .normalize();
    Estimator::new(&set, &EstimatorParams::default()).unwrap()
}

fn spectrum_closed_forms(seq1: &SpectrumCurve, seq2: &SpectrumCurve) -> Outcome {
    let mut ok = true;
    let mut parts = Vec::new();
    for (p, curve) in [(1.0, seq1), (2.0, seq2)] {
        for theta in THETAS {
            let exact = (1.0 / ((p + 1.0) * (1.0 - theta))).min(1.0);
            let got = at(curve, theta);
            ok &= (got - exact).abs() <= 0.1;
            parts.push(format!("seq:{p} θ={theta}: {got:.3} vs {exact:.3}"));
        }
    }
    check(ok, parts.join("; "))
}

fn strict_decrease(seq1: &SpectrumCurve) -> Outcome {
    let raw = generate(&SetSpec::SequencePower { p: 1.0 }, 10_000).unwrap();
    let img = "pow(2)"
        .parse::<MapExpr>()
        .unwrap()
        .apply(&raw, None)
        .unwrap()
        .set;
    let est = Estimator::new(&img.normalize().0, &EstimatorParams::default()).unwrap();
    let b = at(&regularized_curve(&est), 0.5);
    let a = at(seq1, 0.5);
    check(
        (0.57..=0.77).contains(&b) && (0.9..=1.0).contains(&a) && b < a,
        format!("image {b:.3} in [0.57,0.77], source {a:.3} in [0.9,1.0]"),
    )
}

fn suite_rows(suites: &[Suite]) -> Result<Vec<BoundReport>, String> {
    let cfg = SuiteConfig::default();
    let mut rows = Vec::new();
    for &s in suites {
        rows.extend(run_suite(s, &cfg).map_err(|e| e.to_string())?);
    }
    Ok(rows)
}

fn all_pass(suites: &[Suite]) -> Outcome {
    let rows = suite_rows(suites)?;
    let failed: Vec<&BoundReport> = rows.iter().filter(|r| r.verdict != Verdict::Pass).collect();
    let min_slack = rows.iter().map(|r| r.slack).fold(f64::INFINITY, f64::min);
    let mut detail = format!(
        "{} rows, {} not PASS, min slack {min_slack:.3}",
        rows.len(),
        failed.len()
    );
    for r in failed.iter().take(5) {
        detail += &format!("; {} {}", r.row, r.verdict);
    }
    check(failed.is_empty() && !rows.is_empty(), detail)
}

fn counterexample() -> Outcome {
    let rows = suite_rows(&[Suite::Counterexamples])?;
    let r = rows
        .iter()
        .find(|r| r.map == "neglog")
        .ok_or("no neglog row")?;
    let others_ok = rows.iter().all(|r| r.verdict == Verdict::ExpectedViolation);
    check(
        r.alpha_img >= 0.8
            && r.alpha_src <= 0.2
            && r.verdict == Verdict::ExpectedViolation
            && others_ok,
        format!(
            "neglog: source {:.3}, image {:.3}, {}; {} rows all EXPECTED-VIOLATION: {others_ok}",
            r.alpha_src,
            r.alpha_img,
            r.verdict,
            rows.len()
        ),
    )
}

fn slope(pts: &[(f64, f64)]) -> f64 {
    let n = pts.len() as f64;
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / n;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / n;
    let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let sxx: f64 = pts.iter().map(|p| (p.0 - mx).powi(2)).sum();
    sxy / sxx
}

fn refinement_rate() -> Outcome {
    let e = generate(&SetSpec::SequencePower { p: 1.0 }, 10_000).unwrap();
    let (alpha, p) = (1.0, 10.0);
    let mut ok = true;
    let mut parts = Vec::new();
    for d in [2u32, 3] {
        let h: MapExpr = format!("pow({d})").parse().unwrap();
        let schedule = RefineSchedule::new(0.125, d, alpha, p, None).unwrap();
        let j0 = schedule.j0();
        let mut pts = Vec::new();
        let mut certified = true;
        let mut conserved = true;
        for j in j0..j0 + 9 {
            let r =
                refine_step(&h, &e, &schedule, j, DEFAULT_MAX_LEVEL).map_err(|e| e.to_string())?;
            conserved &= r.conserved && r.emitted_area + r.discarded_area == r.root_area;
            certified &= r
                .minors
                .iter()
                .all(|q| classify(&h, &q.geometry(&r.root), r.target).ok() == Some(Class::Minor));
            let majors = r.majors_from(r.start_level);
            if majors > 0 {
                pts.push((j as f64, (majors as f64).log2()));
            }
        }
        let fit = if pts.len() >= 2 { slope(&pts) } else { 0.0 };
        ok &= certified && conserved && fit <= alpha + 0.15;
        parts.push(format!(
            "pow({d}): minors certified {certified}, area conserved {conserved}, growth exponent {fit:.3}"
        ));
    }
    check(ok, parts.join("; "))
}

fn oracle_equivalence() -> Outcome {
    let mut rng = StdRng::seed_from_u64(0x5eed);
    let mut checked = 0;
    for case in 0..50 {
        let n = rng.gen_range(2..=500);
        let clustered = rng.gen_bool(0.5);
        let pts: Vec<Point> = (0..n)
            .map(|_| {
                let (x, y): (f64, f64) = (rng.gen_range(-0.5..0.5), rng.gen_range(-0.5..0.5));
                if clustered {
                    Point::new(x * x * x * 4.0, y * 0.01)
                } else {
                    Point::new(x, y)
                }
            })
            .collect();
        let set = PointSet::new(pts, 1e-9, format!("random#{case}")).map_err(|e| e.to_string())?;
        let z = set.points()[rng.gen_range(0..set.len())];
        let radius = 2f64.powf(-rng.gen_range(0.0..6.0));
        let m = rng.gen_range(1..=8);
        let s = cell_side(radius, m);
        let nd = count_dyadic(&set, z, radius, m).map_err(|e| e.to_string())?;
        let lo = count_bruteforce(&set, z, radius, 2f64.sqrt() * s).map_err(|e| e.to_string())?;
        let hi = count_bruteforce(&set, z, radius, s).map_err(|e| e.to_string())?;
        if !(lo.lower <= nd && nd <= 4 * hi.upper) {
            return Err(format!("case {case}: {lo:?} <= {nd} <= 4*{hi:?} violated"));
        }
        checked += 1;
    }
    Ok(format!("{checked} random instances satisfy the sandwich"))
}

fn formula_identities() -> Outcome {
    let alphas: Vec<f64> = (1..=10).map(|i| i as f64 * 0.19).collect();
    let ks: Vec<f64> = (0..10).map(|i| 1.0 + i as f64 * 0.75).collect();
    let mut bad = Vec::new();
    for &a in &alphas {
        if predict_qr_bound(a, 1.0).unwrap() != a {
            bad.push(format!("K=1 at α={a}"));
        }
        let mut prev_k = f64::NEG_INFINITY;
        for &k in &ks {
            let b = predict_qr_bound(a, k).unwrap();
            if !(b < 2.0 && b > prev_k) {
                bad.push(format!("K-monotone/<2 at α={a}, K={k}"));
            }
            prev_k = b;
        }
    }
    for &k in &ks {
        let row: Vec<f64> = alphas
            .iter()
            .map(|&a| predict_qr_bound(a, k).unwrap())
            .collect();
        if row.windows(2).any(|w| w[1] <= w[0]) {
            bad.push(format!("α-monotone at K={k}"));
        }
    }
    let ps: Vec<f64> = (0..10).map(|i| 2.5 + i as f64 * 5.0).collect();
    for &p in &ps {
        for &a in &alphas {
            let beta = beta_intermediate(p, a).unwrap();
            if (-(p - 2.0) + a * p / beta - a).abs() > 1e-12 {
                bad.push(format!("cancellation at p={p}, α={a}"));
            }
        }
    }
    for t in [0.01, 0.5, 1.0, 3.0, 100.0] {
        if theta_of_t(t) != 1.0 / (1.0 + t) {
            bad.push(format!("θ({t})"));
        }
    }
    for &a in &alphas {
        for &k in &ks {
            let (theta, b) = predict_spectrum_bound(1e-12, k, a).unwrap();
            if (1.0 - theta) > 1e-11 || b != predict_qr_bound(a, k).unwrap() {
                bad.push(format!("t→0 limit at α={a}, K={k}"));
            }
        }
    }
    check(
        bad.is_empty(),
        if bad.is_empty() {
            "100-point grids: identities, monotonicity and limits hold".into()
        } else {
            bad.join("; ")
        },
    )
}

fn main() -> ExitCode {
    let start = Instant::now();
    let seq1 = regularized_curve(&sequence_estimator(1.0));
    let seq2 = regularized_curve(&sequence_estimator(2.0));

    let criteria: Vec<Criterion<'_>> = vec![
        (
            "spectrum closed forms",
            Box::new(|| spectrum_closed_forms(&seq1, &seq2)),
        ),
        (
            "strict decrease under pow(2)",
            Box::new(|| strict_decrease(&seq1)),
        ),
        ("logarithm counterexample", Box::new(counterexample)),
        (
            "holomorphic non-increase",
            Box::new(|| all_pass(&[Suite::HoloNoincrease])),
        ),
        (
            "quasiregular bounds",
            Box::new(|| all_pass(&[Suite::QrBound, Suite::SpectrumBound])),
        ),
        ("refinement rate", Box::new(refinement_rate)),
        ("dyadic/brute-force sandwich", Box::new(oracle_equivalence)),
        (
            "porosity preservation",
            Box::new(|| all_pass(&[Suite::PorosityPreserve])),
        ),
        ("formula identities", Box::new(formula_identities)),
    ];

    let mut failures = 0;
    for (i, (name, run)) in criteria.iter().enumerate() {
        let t = Instant::now();
        let (tag, detail) = match run() {
            Ok(d) => ("PASS", d),
            Err(d) => {
                failures += 1;
                ("FAIL", d)
            }
        };
        println!(
            "[{tag}] {} {name} ({:.1}s): {detail}",
            i + 1,
            t.elapsed().as_secs_f64()
        );
    }
    println!(
        "{} of {} criteria passed in {:.1}s",
        criteria.len() - failures,
        criteria.len(),
        start.elapsed().as_secs_f64()
    );
    if failures == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
