//! Acceptance run: one PASS/FAIL line per criterion, written straight to
//! stderr so it shows up without `--nocapture`.

mod common;

use std::io::Write;
use std::time::{Duration, Instant};

use rand::Rng;
use somd::bench::{batched_cholesky, spd_pool, CHOLESKY_POOL};
use somd::embedding::Strategy;
use somd::linalg::stream_seed;
use somd::metrics::{connected_components, pro_score, roc_auc, DEFAULT_FPR_LIMIT};
use somd::verify::{
    check_error_bounds, check_expectation_with, check_flat_eigenvalues, check_interlacing,
    check_orthogonal_invariance, check_svd_optimality, rank_collapse_report, spectra_experiment, Norm,
    SpectraParams, VerifyReport,
};

const SEED: u64 = 20_240_601;

struct Outcome {
    passed: bool,
    detail: String,
}

fn emit(line: &str) {
    let mut err = std::io::stderr().lock();
    let _ = writeln!(err, "{line}");
}

fn criterion(results: &mut Vec<bool>, name: &str, limit: Option<Duration>, run: impl FnOnce() -> Outcome) {
    let start = Instant::now();
    let outcome = run();
    let elapsed = start.elapsed();
    let in_time = limit.is_none_or(|l| elapsed <= l);
    let passed = outcome.passed && in_time;
    let timing = match limit {
        Some(l) => format!("{:.2}s (limit {}s)", elapsed.as_secs_f64(), l.as_secs()),
        None => format!("{:.2}s", elapsed.as_secs_f64()),
    };
    emit(&format!(
        "{} | {name} | {} | {timing}{}",
        if passed { "PASS" } else { "FAIL" },
        outcome.detail,
        if in_time { "" } else { " TIME LIMIT EXCEEDED" }
    ));
    results.push(passed);
}

fn summarize(reports: &[VerifyReport]) -> Outcome {
    let violations: usize = reports.iter().map(|r| r.violations).sum();
    let trials: usize = reports.iter().map(|r| r.trials).sum();
    let worst = reports.iter().map(|r| r.observed).fold(f64::NEG_INFINITY, f64::max);
    Outcome {
        passed: violations == 0 && reports.iter().all(|r| r.passed),
        detail: format!("{trials} instances, {violations} violations, worst observed {worst:.3e}"),
    }
}

fn secs(s: u64) -> Option<Duration> {
    Some(Duration::from_secs(s))
}

#[test]
fn acceptance() {
    let mut results = Vec::new();
    emit("acceptance criteria");

    criterion(&mut results, "mean training squared distance equals k", secs(30), || {
        let mut reports = Vec::new();
        for (i, (f, n, k)) in [(16, 200, 8), (64, 200, 16), (448, 500, 100)].into_iter().enumerate() {
            for strategy in [Strategy::SemiOrthogonal, Strategy::RandomSelection] {
                reports.push(check_expectation_with(strategy, f, n, k, 3, stream_seed(SEED, i as u64)));
            }
        }
        let mut o = summarize(&reports);
        o.detail.push_str(" (relative deviation, tol 1e-6)");
        o
    });

    criterion(&mut results, "square semi-orthogonal scores equal full scores", secs(10), || {
        let reports: Vec<_> = [8, 16, 32, 48, 64]
            .into_iter()
            .map(|f| check_orthogonal_invariance(f, 2 * f + 16, 10, stream_seed(SEED, 100 + f as u64)))
            .collect();
        let mut o = summarize(&reports);
        o.detail.push_str(" (relative difference, tol 1e-8)");
        o
    });

    criterion(&mut results, "error sandwich lower <= mid <= upper", secs(60), || {
        let mut reports = Vec::new();
        for i in 0..1000u64 {
            let f = 4 + (i % 13) as usize;
            let k = 1 + (i as usize / 13) % (f - 1);
            for norm in [Norm::Frobenius, Norm::Spectral] {
                reports.push(check_error_bounds(f, k, 1, stream_seed(SEED, 1000 + i), norm));
            }
        }
        let mut o = summarize(&reports);
        o.detail = format!("1000 matrices x 2 norms, dims 4-16; {} (relative slack 1e-9)", o.detail);
        o
    });

    criterion(&mut results, "eigen-lower embedding is optimal", secs(60), || {
        let reports: Vec<_> = [(8, 3), (12, 5), (16, 8), (6, 1)]
            .into_iter()
            .enumerate()
            .map(|(i, (f, k))| check_svd_optimality(f, k, 5, 500, stream_seed(SEED, 2000 + i as u64)))
            .collect();
        let mut o = summarize(&reports);
        o.detail = format!("500 random W each; {}", o.detail);
        o
    });

    criterion(&mut results, "flat-spectrum error equals (F-k)/alpha^2", secs(5), || {
        let mut rng = common::rng(SEED + 3000);
        let reports: Vec<_> = (0..100u64)
            .map(|i| {
                let f = rng.random_range(2..=24);
                let k = rng.random_range(1..=f);
                let alpha = 10f64.powf(rng.random_range(-1.0..1.0));
                check_flat_eigenvalues(f, k, alpha, 1, stream_seed(SEED, 3000 + i), Norm::Frobenius)
            })
            .collect();
        let mut o = summarize(&reports);
        o.detail.push_str(" (relative error, tol 1e-9)");
        o
    });

    criterion(&mut results, "embedded eigenvalues interlace", secs(10), || {
        let mut rng = common::rng(SEED + 4000);
        let reports: Vec<_> = (0..200u64)
            .map(|i| {
                let f = rng.random_range(2..=16);
                let k = rng.random_range(1..=f);
                check_interlacing(f, k, 1, stream_seed(SEED, 4000 + i))
            })
            .collect();
        summarize(&reports)
    });

    criterion(&mut results, "rank collapse only under random selection", secs(60), || {
        let params = SpectraParams {
            f: 32,
            l: 16,
            k: 12,
            n: 200,
            seeds: 100,
            seed: SEED,
        };
        match spectra_experiment(params, None) {
            Ok(summary) => {
                let r = rank_collapse_report(&summary);
                Outcome {
                    passed: r.passed,
                    detail: r.notes.join("; "),
                }
            }
            Err(e) => Outcome {
                passed: false,
                detail: e.to_string(),
            },
        }
    });

    criterion(&mut results, "metric oracles (PRO, ROC-AUC, components)", secs(30), || {
        let mut worst_pro = 0.0f64;
        let mut worst_roc = 0.0f64;
        for seed in 0..50 {
            let (scores, masks) = common::metric_instance(SEED + seed);
            let pixels: usize = scores.iter().map(|s| s.values().len()).sum();
            let pro = pro_score(&scores, &masks, DEFAULT_FPR_LIMIT, pixels).map(|c| c.pro);
            let roc = roc_auc(&scores, &masks);
            match (pro, roc) {
                (Ok(p), Ok(r)) => {
                    worst_pro = worst_pro.max((p - common::brute_force_pro(&scores, &masks, DEFAULT_FPR_LIMIT)).abs());
                    worst_roc = worst_roc.max((r - common::pairwise_roc_auc(&scores, &masks)).abs());
                }
                _ => worst_pro = f64::INFINITY,
            }
        }
        let mismatched = (0..200u64)
            .filter(|&seed| {
                let mask = common::random_mask(16, 16, [0.2, 0.35, 0.5, 0.65][seed as usize % 4], SEED + seed);
                let ours = connected_components(&mask);
                let (labels, count) = common::flood_fill_labels(&mask);
                ours.region_count != count || ours.labels != labels
            })
            .count();
        Outcome {
            passed: worst_pro <= 1e-10 && worst_roc <= 1e-10 && mismatched == 0,
            detail: format!(
                "50 instances: max |dPRO| {worst_pro:.1e}, max |dROC| {worst_roc:.1e}; 200 masks: {mismatched} labeling mismatches"
            ),
        }
    });

    criterion(&mut results, "batched Cholesky k=100 at least 10x faster than k=448 (64x64 grid)", None, || {
        let locations = 64 * 64;
        let reduced_pool = spd_pool(100, CHOLESKY_POOL, SEED);
        let full_pool = spd_pool(448, CHOLESKY_POOL, SEED + 1);
        let mut reduced: Vec<f64> = (0..3)
            .map(|_| batched_cholesky(&reduced_pool, locations).unwrap().as_secs_f64())
            .collect();
        reduced.sort_by(f64::total_cmp);
        let full = batched_cholesky(&full_pool, locations).unwrap().as_secs_f64();
        let speedup = full / reduced[1];
        Outcome {
            passed: speedup >= 10.0,
            detail: format!(
                "k=100 {:.0} ms, k=448 {:.0} ms, speedup {speedup:.1}x (cubic prediction 89.9x)",
                reduced[1] * 1e3,
                full * 1e3
            ),
        }
    });

    let passed = results.iter().filter(|&&p| p).count();
    emit(&format!("{passed}/{} criteria passed", results.len()));
    assert_eq!(passed, results.len(), "some acceptance criteria failed");
}
