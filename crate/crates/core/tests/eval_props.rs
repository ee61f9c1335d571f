use proptest::prelude::*;
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use riocpd::detector::{ChangeEvent, DetectorConfig, Threshold};
use riocpd::eval::{f1, match_detections, run_benchmark, BenchmarkStream, Dataset};
use riocpd::simulator::{null_stream, two_regime_stream};

fn event(tau_hat: usize, w: usize) -> ChangeEvent {
    ChangeEvent {
        tau_hat,
        cusum_value: 1.0,
        score: 1.0,
        window_span: [tau_hat, tau_hat + w - 1],
    }
}

proptest! {
    #[test]
    fn counts_balance(
        starts in prop::collection::vec(0usize..500, 0..20),
        truth in prop::collection::btree_set(0usize..500, 0..10),
        w in 2usize..30,
    ) {
        let events: Vec<ChangeEvent> = starts.iter().map(|&s| event(s, w)).collect();
        let truth: Vec<usize> = truth.into_iter().collect();
        let m = match_detections(&events, &truth);
        prop_assert_eq!(m.true_positives + m.false_negatives, truth.len());
        prop_assert_eq!(m.true_positives + m.false_positives, events.len());
        for p in &m.pairs {
            prop_assert!(p.tau_hat <= p.truth && p.truth < p.tau_hat + w);
        }
    }

    #[test]
    fn disjoint_spans_are_order_insensitive(
        slots in prop::collection::btree_set(0usize..50, 0..15),
        truth in prop::collection::btree_set(0usize..500, 0..10),
        seed in any::<u64>(),
    ) {
        let w = 10;
        let mut events: Vec<ChangeEvent> = slots.iter().map(|&s| event(s * w, w)).collect();
        let truth: Vec<usize> = truth.into_iter().collect();
        let a = match_detections(&events, &truth);
        events.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
        let b = match_detections(&events, &truth);
        prop_assert_eq!(
            (a.true_positives, a.false_positives, a.false_negatives),
            (b.true_positives, b.false_positives, b.false_negatives)
        );
    }
}

#[test]
fn f1_hand_values() {
    let s = f1(7, 3, 1);
    assert!((s.precision - 0.7).abs() < 1e-12);
    assert!((s.recall - 0.875).abs() < 1e-12);
    assert!((s.f1 - 2.0 * 0.7 * 0.875 / 1.575).abs() < 1e-12);
    assert_eq!(f1(0, 0, 0).f1, 0.0);
}

#[test]
fn best_is_never_below_default() {
    let streams: Vec<BenchmarkStream> = (0..6)
        .map(|seed| {
            let s = two_regime_stream(3, 0.8, 150, 300, seed).unwrap();
            BenchmarkStream { frame: s.frame, truth: Some(s.true_cps) }
        })
        .collect();
    let ds = Dataset { name: "two-regime".into(), streams, default: DetectorConfig::new(20) };
    let grid: Vec<Threshold> = [0.25, 0.5, 1.0, 2.0].iter().map(|&rho| Threshold::Fixed { rho }).collect();
    let out = run_benchmark(&[ds], &grid).unwrap();
    let e = &out.entries[0];
    assert!(e.best.report.f1 >= e.default.report.f1);
    assert_eq!(e.grid.len(), 4);
}

#[test]
fn grid_of_one_default_equals_best() {
    let s = two_regime_stream(3, 0.8, 150, 300, 3).unwrap();
    let cfg = DetectorConfig::new(20).with_threshold(Threshold::Fixed { rho: 1.0 });
    let ds = Dataset {
        name: "one".into(),
        streams: vec![BenchmarkStream { frame: s.frame, truth: Some(s.true_cps) }],
        default: cfg.clone(),
    };
    let out = run_benchmark(&[ds], &[cfg.threshold]).unwrap();
    assert_eq!(out.entries[0].default.report.f1, out.entries[0].best.report.f1);
}

#[test]
fn null_stream_detections_are_all_false_positives() {
    let s = null_stream(3, 0.8, 300, 1).unwrap();
    let ds = Dataset {
        name: "null".into(),
        streams: vec![BenchmarkStream { frame: s.frame, truth: Some(vec![]) }],
        default: DetectorConfig::new(20).with_threshold(Threshold::Fixed { rho: 1e-9 }),
    };
    let out = run_benchmark(&[ds], &[]).unwrap();
    let r = &out.entries[0].default.report;
    assert_eq!(r.f1, 0.0);
    assert_eq!(r.true_positives, 0);
    assert!(r.false_positives > 0);
}

#[test]
fn unlabelled_dataset_is_skipped() {
    let s = null_stream(3, 0.5, 100, 1).unwrap();
    let ds = Dataset {
        name: "raw".into(),
        streams: vec![BenchmarkStream { frame: s.frame, truth: None }],
        default: DetectorConfig::new(20),
    };
    let out = run_benchmark(&[ds], &[]).unwrap();
    assert!(out.entries.is_empty());
    assert_eq!(out.skipped.len(), 1);
}
