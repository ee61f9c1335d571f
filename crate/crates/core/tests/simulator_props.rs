mod common;

use proptest::prelude::*;
use riocpd::simulator::{
    gaussian_regimes, simulate_springs, spring_scenario, ChangeKind, ChangeSpec, GaussianSegment, SpringConfig,
    SpringSystem,
};

fn quiet_config() -> SpringConfig {
    SpringConfig {
        box_half_width: 100.0,
        noise_std: 0.0,
        ..SpringConfig::default()
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]
    #[test]
    fn energy_drift_is_small_without_walls(seed in any::<u64>()) {
        let mut rng = common::rng(seed);
        let mut sys = SpringSystem::random(quiet_config(), &mut rng).unwrap();
        let e0 = sys.kinetic_energy() + sys.potential_energy();
        for _ in 0..100 {
            sys.step();
            let inside = sys.positions.iter().all(|p| p[0].abs() < 100.0 && p[1].abs() < 100.0);
            prop_assert!(inside);
        }
        let e1 = sys.kinetic_energy() + sys.potential_energy();
        prop_assert!((e1 - e0).abs() <= 0.05 * e0);
    }

    #[test]
    fn connection_change_resamples_a_new_graph(seed in any::<u64>()) {
        let mut rng = common::rng(seed);
        let mut sys = SpringSystem::random(SpringConfig::default(), &mut rng).unwrap();
        let before = sys.adjacency.clone();
        sys.apply_change(&ChangeSpec { kind: ChangeKind::Connection, at: 1, magnitude: 0.0 }, &mut rng).unwrap();
        prop_assert_ne!(before, sys.adjacency);
    }

    #[test]
    fn particles_stay_in_the_box(seed in any::<u64>()) {
        let s = spring_scenario(ChangeKind::Speed, 100, 50, seed).unwrap();
        let cfg = SpringConfig::default();
        for t in 0..s.frame.len() {
            for (v, name) in s.frame.row(t).iter().zip(&s.columns) {
                if name.ends_with("_x") || name.ends_with("_y") {
                    // observation noise may push a reading slightly past the wall
                    prop_assert!(v.abs() <= cfg.box_half_width + 0.1);
                }
            }
        }
    }
}

#[test]
fn scenarios_are_labelled_and_deterministic() {
    for kind in [ChangeKind::Connection, ChangeKind::Speed, ChangeKind::Location] {
        let a = spring_scenario(kind, 100, 50, 7).unwrap();
        let b = spring_scenario(kind, 100, 50, 7).unwrap();
        assert_eq!(a.true_cps, vec![50]);
        assert_eq!(a.frame.len(), 100);
        assert_eq!(a.frame.series_count(), 20);
        let bits = |s: &riocpd::simulator::LabeledStream| -> Vec<u64> {
            s.frame.rows().flatten().map(|v| v.to_bits()).collect()
        };
        assert_eq!(bits(&a), bits(&b));
        assert_ne!(bits(&a), bits(&spring_scenario(kind, 100, 50, 8).unwrap()));
    }
}

#[test]
fn change_outside_the_stream_is_rejected() {
    let change = ChangeSpec { kind: ChangeKind::Speed, at: 100, magnitude: 1.0 };
    assert!(simulate_springs(&SpringConfig::default(), 100, &[change], 1).is_err());
}

#[test]
fn one_segment_has_no_change_points() {
    let s = gaussian_regimes(
        &[GaussianSegment { length: 30, correlation: nalgebra::DMatrix::identity(3, 3) }],
        None,
        1,
    )
    .unwrap();
    assert!(s.true_cps.is_empty());
}

#[test]
fn non_pd_segment_is_rejected() {
    let bad = riocpd::simulator::equicorrelation(3, -0.8);
    let r = gaussian_regimes(&[GaussianSegment { length: 30, correlation: bad }], None, 1);
    assert!(matches!(r, Err(riocpd::Error::Contract(_))));
}
