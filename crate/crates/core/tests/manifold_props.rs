mod common;

use common::{rel_frobenius, spd_from_entries};
use nalgebra::DMatrix;
use proptest::prelude::*;
use riocpd::manifold::{
    dist, frechet_mean, log_cholesky_map, log_image, matrix_exp, matrix_log_le, mean_from_log_sum, LogImage,
    MetricKind, SpdMatrix,
};

const METRICS: [MetricKind; 2] = [MetricKind::LogEuclidean, MetricKind::LogCholesky];

fn spd_strategy() -> impl Strategy<Value = SpdMatrix> {
    (2usize..=6).prop_flat_map(|d| prop::collection::vec(-3.0f64..3.0, d * d).prop_map(move |e| spd_from_entries(d, &e)))
}

fn spd_set_strategy(max_dim: usize, n: std::ops::RangeInclusive<usize>) -> impl Strategy<Value = Vec<SpdMatrix>> {
    (2usize..=max_dim, n).prop_flat_map(|(d, n)| {
        prop::collection::vec(prop::collection::vec(-2.0f64..2.0, d * d), n)
            .prop_map(move |sets| sets.iter().map(|e| spd_from_entries(d, e)).collect())
    })
}

fn same_dim_pair() -> impl Strategy<Value = (SpdMatrix, SpdMatrix, SpdMatrix)> {
    (2usize..=6).prop_flat_map(|d| {
        prop::collection::vec(prop::collection::vec(-3.0f64..3.0, d * d), 3)
            .prop_map(move |v| (spd_from_entries(d, &v[0]), spd_from_entries(d, &v[1]), spd_from_entries(d, &v[2])))
    })
}

proptest! {
    #[test]
    fn le_round_trip(p in spd_strategy()) {
        let back = matrix_exp(&matrix_log_le(&p).unwrap()).unwrap();
        prop_assert!(rel_frobenius(back.as_matrix(), p.as_matrix()) <= 1e-8);
    }

    #[test]
    fn lc_round_trip(p in spd_strategy()) {
        let img = log_cholesky_map(&p);
        let l = img.strict_lower() + DMatrix::from_diagonal(&img.log_diag().map(f64::exp));
        let back = &l * l.transpose();
        prop_assert!(rel_frobenius(&back, p.as_matrix()) <= 1e-8);
    }

    #[test]
    fn axioms_hold((p, q, r) in same_dim_pair()) {
        for metric in METRICS {
            let pq = dist(metric, &p, &q).unwrap();
            let qp = dist(metric, &q, &p).unwrap();
            let pr = dist(metric, &p, &r).unwrap();
            let qr = dist(metric, &q, &r).unwrap();
            prop_assert!(pq >= 0.0);
            prop_assert!((pq - qp).abs() <= 1e-12);
            prop_assert!(dist(metric, &p, &p).unwrap() <= 1e-8);
            prop_assert!(pr <= pq + qr + 1e-9);
        }
    }

    #[test]
    fn mean_is_permutation_invariant(ps in spd_set_strategy(4, 2..=8), rot in 0usize..8) {
        for metric in METRICS {
            let a = frechet_mean(metric, &ps).unwrap();
            let mut shuffled = ps.clone();
            shuffled.reverse();
            let k = rot % shuffled.len();
            shuffled.rotate_left(k);
            let b = frechet_mean(metric, &shuffled).unwrap();
            prop_assert!((a.as_matrix() - b.as_matrix()).amax() <= 1e-12 * a.as_matrix().amax().max(1.0));
        }
    }

    #[test]
    fn incremental_mean_matches_batch(ps in spd_set_strategy(5, 1..=10)) {
        for metric in METRICS {
            let dim = ps[0].dim();
            let mut sum = LogImage::zeros(metric, dim);
            for p in &ps {
                sum.add_assign(&log_image(metric, p).unwrap()).unwrap();
            }
            let inc = mean_from_log_sum(&sum, ps.len()).unwrap();
            let batch = frechet_mean(metric, &ps).unwrap();
            prop_assert!((inc.as_matrix() - batch.as_matrix()).amax() <= 1e-10);
        }
    }

    #[test]
    fn mean_is_spd_and_within_hull_distance(ps in spd_set_strategy(4, 2..=6)) {
        for metric in METRICS {
            let mean = frechet_mean(metric, &ps).unwrap();
            let far = ps.iter().map(|p| dist(metric, p, &ps[0]).unwrap()).fold(0.0, f64::max);
            let d = dist(metric, &mean, &ps[0]).unwrap();
            prop_assert!(d <= far + 1e-9);
        }
    }
}

#[test]
fn distance_from_identity_oracle() {
    let e2 = 2f64.exp();
    let p = SpdMatrix::from_diagonal(&[e2, e2]).unwrap();
    let id = SpdMatrix::identity(2);
    // LE image is diag(2, 2); the Cholesky pivots are e, whose logs are 1.
    let le = dist(MetricKind::LogEuclidean, &id, &p).unwrap();
    let lc = dist(MetricKind::LogCholesky, &id, &p).unwrap();
    assert!((le - 2.0 * 2f64.sqrt()).abs() < 1e-12);
    assert!((lc - 2f64.sqrt()).abs() < 1e-12);
}

#[test]
fn two_point_diagonal_mean_is_geometric() {
    let a = [2.0, 8.0, 0.5];
    let b = [8.0, 2.0, 4.5];
    let set = [SpdMatrix::from_diagonal(&a).unwrap(), SpdMatrix::from_diagonal(&b).unwrap()];
    for metric in METRICS {
        let m = frechet_mean(metric, &set).unwrap();
        for i in 0..3 {
            assert!((m.as_matrix()[(i, i)] - (a[i] * b[i]).sqrt()).abs() < 1e-12);
        }
    }
}
