//! Acceptance criteria, one test each. Every test prints a single
//! `criterion N: PASS|FAIL|SKIP ...` line (uncaptured) and fails on FAIL.

use std::io::Write;
use std::time::Instant;

use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use riocpd::correlation::SeriesFrame;
use riocpd::detector::{brute_force_cusum, cusum_update, detect_frame, DetectorConfig, OnlineDetector};
use riocpd::eval::{
    default_grid, render_table, run_benchmark, BenchmarkStream, Dataset, DatasetPreset,
};
use riocpd::manifold::{dist, frechet_mean, matrix_exp, matrix_log_le, MetricKind, SpdMatrix, SymmetricTangent};
use riocpd::simulator::{
    equicorrelation, flip_first_series, gaussian_regimes, null_stream, simulate_springs, spring_scenario,
    two_regime_stream, ChangeKind, ChangeSpec, Feature, GaussianSegment, ObservationLayout, SpringConfig,
};

const METRICS: [MetricKind; 2] = [MetricKind::LogEuclidean, MetricKind::LogCholesky];

fn verdict(n: u32, title: &str, pass: bool, detail: &str) {
    let tag = if pass { "PASS" } else { "FAIL" };
    let _ = writeln!(std::io::stderr(), "criterion {n}: {tag} {title} ({detail})");
    assert!(pass, "criterion {n} failed: {title} ({detail})");
}

fn random_spd(rng: &mut impl Rng, dim: usize) -> SpdMatrix {
    let a = DMatrix::<f64>::from_fn(dim, dim, |_, _| StandardNormal.sample(rng));
    let p: DMatrix<f64> = &a * a.transpose() / dim as f64 + DMatrix::identity(dim, dim) * 0.1;
    SpdMatrix::new((&p + p.transpose()) * 0.5).unwrap()
}

fn sym_noise(rng: &mut impl Rng, dim: usize, norm: f64) -> DMatrix<f64> {
    let a = DMatrix::<f64>::from_fn(dim, dim, |_, _| StandardNormal.sample(rng));
    let s: DMatrix<f64> = (&a + a.transpose()) * 0.5;
    let scale = norm / s.norm();
    s * scale
}

#[test]
fn criterion_1_metric_axioms() {
    let started = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(101);
    let mut bad = Vec::new();
    let mut checked = 0;
    for dim in 2..=6 {
        for _ in 0..1000 {
            let (p, q, r) = (random_spd(&mut rng, dim), random_spd(&mut rng, dim), random_spd(&mut rng, dim));
            let near = SpdMatrix::new(p.as_matrix() + sym_noise(&mut rng, dim, 1e-11)).unwrap();
            for metric in METRICS {
                let pq = dist(metric, &p, &q).unwrap();
                let qp = dist(metric, &q, &p).unwrap();
                let pr = dist(metric, &p, &r).unwrap();
                let qr = dist(metric, &q, &r).unwrap();
                let pp = dist(metric, &p, &p).unwrap();
                let pn = dist(metric, &p, &near).unwrap();
                let distinct = (p.as_matrix() - q.as_matrix()).norm() > 1e-8;
                let ok = pq >= 0.0
                    && pr >= 0.0
                    && (pq - qp).abs() <= 1e-12
                    && pp <= 1e-8
                    && pn <= 1e-8
                    && (!distinct || pq > 1e-8)
                    && pr <= pq + qr + 1e-9;
                checked += 1;
                if !ok {
                    bad.push(format!("{metric:?} dim {dim}"));
                }
            }
        }
    }
    let secs = started.elapsed().as_secs_f64();
    verdict(
        1,
        "metric axioms",
        bad.is_empty() && secs < 30.0,
        &format!("{checked} triples, {} violations, {secs:.2}s", bad.len()),
    );
}

fn objective(metric: MetricKind, x: &SpdMatrix, ps: &[SpdMatrix]) -> f64 {
    ps.iter().map(|p| dist(metric, x, p).unwrap().powi(2)).sum()
}

#[test]
fn criterion_2_frechet_optimality() {
    let started = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(202);
    let mut violations = 0;
    let mut trials = 0;
    for _ in 0..100 {
        let dim = rng.random_range(2..=4);
        let n = rng.random_range(3..=10);
        let ps: Vec<SpdMatrix> = (0..n).map(|_| random_spd(&mut rng, dim)).collect();
        for metric in METRICS {
            let mean = frechet_mean(metric, &ps).unwrap();
            let at_mean = objective(metric, &mean, &ps);
            let log_mean = matrix_log_le(&mean).unwrap();
            for _ in 0..200 {
                let moved = log_mean.as_matrix() + sym_noise(&mut rng, dim, 1e-2);
                let x = matrix_exp(&SymmetricTangent::new(moved).unwrap()).unwrap();
                trials += 1;
                if objective(metric, &x, &ps) < at_mean {
                    violations += 1;
                }
            }
        }
    }
    let secs = started.elapsed().as_secs_f64();
    verdict(
        2,
        "Frechet optimality",
        violations == 0 && secs < 60.0,
        &format!("{trials} perturbations, {violations} violations, {secs:.2}s"),
    );
}

#[test]
fn criterion_3_geometric_mean_degeneration() {
    let mut rng = ChaCha8Rng::seed_from_u64(303);
    let mut worst: f64 = 0.0;
    for _ in 0..500 {
        let dim = rng.random_range(2..=6);
        let n = rng.random_range(1..=10);
        let diags: Vec<Vec<f64>> = (0..n)
            .map(|_| (0..dim).map(|_| rng.random_range(0.05..20.0)).collect())
            .collect();
        let ps: Vec<SpdMatrix> = diags.iter().map(|d| SpdMatrix::from_diagonal(d).unwrap()).collect();
        let geo = DMatrix::from_fn(dim, dim, |i, j| {
            if i == j {
                diags.iter().map(|d| d[i]).product::<f64>().powf(1.0 / n as f64)
            } else {
                0.0
            }
        });
        for metric in METRICS {
            let m = frechet_mean(metric, &ps).unwrap();
            worst = worst.max((m.as_matrix() - &geo).amax());
        }
    }
    verdict(
        3,
        "geometric-mean degeneration",
        worst <= 1e-10,
        &format!("500 diagonal sets, max deviation {worst:.2e}"),
    );
}

#[test]
fn criterion_4_cusum_equivalence() {
    let mut rng = ChaCha8Rng::seed_from_u64(404);
    let mut mismatches = 0;
    for _ in 0..1000 {
        let len = rng.random_range(1..=200);
        let d: Vec<f64> = (0..len).map(|_| rng.random_range(-5.0..=5.0)).collect();
        let brute = brute_force_cusum(&d);
        let mut y = 0.0;
        for (t, v) in d.iter().enumerate() {
            y = cusum_update(y, *v);
            if y != brute[t] {
                mismatches += 1;
            }
        }
    }
    verdict(
        4,
        "CUSUM recursion equals definition",
        mismatches == 0,
        &format!("1000 sequences, {mismatches} mismatches"),
    );
}

#[test]
fn criterion_5_controlled_detection() {
    let (w, tau) = (20, 200);
    let cfg = DetectorConfig::new(w);
    let mut detected = 0;
    let mut false_alarms = 0;
    for seed in 0..100 {
        let s = two_regime_stream(3, 0.8, tau, 400, seed).unwrap();
        let events = detect_frame(&cfg, &s.frame).unwrap();
        if events.iter().any(|e| e.contains(tau) || (e.tau_hat >= tau && e.tau_hat - tau <= 2 * w)) {
            detected += 1;
        }
        let null = null_stream(3, 0.8, 400, seed).unwrap();
        false_alarms += detect_frame(&cfg, &null.frame).unwrap().len();
    }
    verdict(
        5,
        "controlled detection (m=3, W=20, auto k=3)",
        detected >= 95 && false_alarms <= 5,
        &format!("detection rate {detected}/100 (need >= 95), null false alarms {false_alarms} (need <= 5)"),
    );
}

#[test]
fn criterion_6_synthetic_scenarios() {
    let cfg = DatasetPreset::Synthetic.config();
    let grid = default_grid();
    let mut lines = Vec::new();
    let mut pass = true;
    let datasets: Vec<Dataset> = [ChangeKind::Connection, ChangeKind::Speed, ChangeKind::Location]
        .iter()
        .enumerate()
        .map(|(k, &kind)| Dataset {
            name: format!("{kind:?}"),
            streams: (0..50)
                .map(|i| {
                    let s = spring_scenario(kind, 100, 50, 6000 + 100 * k as u64 + i).unwrap();
                    BenchmarkStream {
                        frame: s.frame,
                        truth: Some(s.true_cps),
                    }
                })
                .collect(),
            default: cfg.clone(),
        })
        .collect();
    let outcome = run_benchmark(&datasets, &grid).unwrap();
    for e in &outcome.entries {
        let ok = e.best.report.f1 >= 0.40 && e.best.report.f1 >= e.default.report.f1;
        pass &= ok;
        lines.push(format!(
            "{} best {:.3} default {:.3}",
            e.dataset, e.best.report.f1, e.default.report.f1
        ));
    }
    let _ = write!(std::io::stderr(), "{}", render_table(&outcome.entries));
    verdict(
        6,
        "spring scenarios, LC, W=5, best F1 >= 0.40 per kind",
        pass,
        &lines.join("; "),
    );
}

fn hasc_scale_stream() -> SeriesFrame {
    let a = equicorrelation(3, 0.6);
    let b = flip_first_series(&a);
    let segs: Vec<GaussianSegment> = (0..6)
        .map(|i| GaussianSegment {
            length: 2000,
            correlation: if i % 2 == 0 { a.clone() } else { b.clone() },
        })
        .collect();
    gaussian_regimes(&segs, None, 707).unwrap().frame
}

#[test]
fn criterion_7_throughput() {
    let frame = hasc_scale_stream();
    let cfg = DetectorConfig::new(20).with_lag(5);
    let started = Instant::now();
    detect_frame(&cfg, &frame).unwrap();
    let hasc = started.elapsed().as_secs_f64();

    let spring = SpringConfig {
        layout: ObservationLayout::Feature(Feature::Vx),
        ..SpringConfig::default()
    };
    let s = simulate_springs(
        &spring,
        100,
        &[ChangeSpec {
            kind: ChangeKind::Speed,
            at: 50,
            magnitude: 1.0,
        }],
        7,
    )
    .unwrap();
    assert_eq!(s.frame.series_count(), 5);
    let started = Instant::now();
    detect_frame(&DatasetPreset::Synthetic.config(), &s.frame).unwrap();
    let synthetic = started.elapsed().as_secs_f64();
    verdict(
        7,
        "throughput",
        hasc < 30.0 && synthetic < 10.0,
        &format!("12000x3 W=20 L=5: {hasc:.3}s (< 30s); 100x5 W=5: {synthetic:.4}s (< 10s)"),
    );
}

fn multi_change(seed: u64) -> SeriesFrame {
    let a = equicorrelation(3, 0.8);
    let b = flip_first_series(&a);
    let segs: Vec<GaussianSegment> = (0..4)
        .map(|i| GaussianSegment {
            length: 100,
            correlation: if i % 2 == 0 { a.clone() } else { b.clone() },
        })
        .collect();
    gaussian_regimes(&segs, None, seed).unwrap().frame
}

fn event_bits(cfg: &DetectorConfig, frame: &SeriesFrame, origin: usize) -> Vec<(usize, u64, u64)> {
    let mut det = OnlineDetector::with_origin(cfg.clone(), frame.series_count(), origin).unwrap();
    let mut out = Vec::new();
    for t in origin..frame.len() {
        if let Some(e) = det.push(frame.row(t)).unwrap().and_then(|w| w.outcome.event) {
            out.push((e.tau_hat, e.cusum_value.to_bits(), e.score.to_bits()));
        }
    }
    out
}

#[test]
fn criterion_8_restart_isolation_and_determinism() {
    let mut failures = Vec::new();
    let mut restarts = 0;
    for seed in 0..20 {
        for metric in METRICS {
            let cfg = DetectorConfig::new(20).with_metric(metric);
            let events = event_bits(&cfg, &multi_change(800 + seed), 0);
            if events != event_bits(&cfg, &multi_change(800 + seed), 0) {
                failures.push(format!("replay differs (seed {seed})"));
            }
            for (k, e) in events.iter().enumerate() {
                restarts += 1;
                if event_bits(&cfg, &multi_change(800 + seed), e.0 + 1) != events[k + 1..] {
                    failures.push(format!("suffix differs (seed {seed}, event {k})"));
                }
            }
        }
    }
    verdict(
        8,
        "restart isolation and determinism",
        failures.is_empty() && restarts > 0,
        &format!("20 streams x 2 metrics, {restarts} restarts checked, {} failures", failures.len()),
    );
}

#[test]
fn criterion_9_external_beedance() {
    let Ok(dir) = std::env::var("RIOCPD_BEEDANCE_DIR") else {
        let _ = writeln!(
            std::io::stderr(),
            "criterion 9: SKIP external data (set RIOCPD_BEEDANCE_DIR to a directory of sequence CSVs with labels)"
        );
        return;
    };
    let streams = riocpd_cli::io::load_dir(std::path::Path::new(&dir), riocpd_cli::io::Delimiter::Comma).unwrap();
    let labelled = streams.iter().filter(|s| s.truth.is_some()).count();
    let ds = Dataset {
        name: "Beedance".into(),
        streams: streams
            .iter()
            .map(|s| BenchmarkStream {
                frame: s.frame.clone(),
                truth: s.truth.clone(),
            })
            .collect(),
        default: DatasetPreset::Beedance.config(),
    };
    let outcome = run_benchmark(&[ds], &default_grid()).unwrap();
    let table = render_table(&outcome.entries);
    let _ = write!(std::io::stderr(), "{table}");
    verdict(
        9,
        "external Beedance smoke",
        streams.len() == 6 && labelled == 6 && outcome.entries.len() == 1,
        &format!("{} sequences, {labelled} labelled", streams.len()),
    );
}
