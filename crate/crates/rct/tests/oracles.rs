//! Oracle-equivalence tests: the smoother against a dense joint-Gaussian
//! solve, optimal assignment against exhaustive enumeration, and HOTA
//! against a small-instance maximisation.

mod common;

use common::{brute_force_assignment, brute_force_hota_at, joint_gaussian_smoother, rng};
use rct::assignment::{assignment, matching_cost, FORBIDDEN};
use rct::geometry::Rect;
use rct::kalman::{smooth, KalmanConfig, Observation};
use rct::metrics::{hota_at, TrackSet, HOTA_THRESHOLDS};

fn random_observation_sequence(
    seed: u64,
) -> (Vec<Observation>, Rect) {
    let mut r = rng(seed);
    let len = 1 + (r.next_u64() % 8) as usize;
    let cx = r.range(50.0, 500.0);
    let cy = r.range(50.0, 400.0);
    let vx = r.range(-6.0, 6.0);
    let vy = r.range(-6.0, 6.0);
    let w = r.range(10.0, 60.0);
    let h = r.range(10.0, 60.0);
    let mut obs = Vec::with_capacity(len);
    for t in 0..len {
        if r.next_f64() < 0.3 {
            obs.push(Observation::Missing);
        } else {
            obs.push(Observation::Present(Rect::from_center(
                cx + vx * t as f64 + r.normal(0.0, 1.0),
                cy + vy * t as f64 + r.normal(0.0, 1.0),
                (w + r.normal(0.0, 1.0)).max(2.0),
                (h + r.normal(0.0, 1.0)).max(2.0),
            )));
        }
    }
    let init_box = Rect::from_center(cx, cy, w, h);
    (obs, init_box)
}

#[test]
fn smoother_matches_dense_joint_gaussian_posterior() {
    let cfg = KalmanConfig::default();
    for case in 0..200u64 {
        let (obs, init_box) = random_observation_sequence(1000 + case);
        let ours = smooth(&obs, &init_box, &cfg);
        let oracle = joint_gaussian_smoother(&obs, &init_box, &cfg);
        assert_eq!(ours.len(), oracle.len());
        for (t, (a, b)) in ours.iter().zip(&oracle).enumerate() {
            let mean_err = (a.mean - b.mean).norm();
            let mean_scale = b.mean.norm().max(1.0);
            assert!(
                mean_err <= 1e-6 * mean_scale,
                "case {case} t {t}: mean error {mean_err} vs scale {mean_scale}"
            );
            let cov_err = (a.cov - b.cov).norm();
            let cov_scale = b.cov.norm().max(1.0);
            assert!(
                cov_err <= 1e-6 * cov_scale,
                "case {case} t {t}: covariance error {cov_err} vs scale {cov_scale}"
            );
        }
    }
}

#[test]
fn assignment_matches_exhaustive_search() {
    let mut r = rng(77);
    for case in 0..500 {
        let rows = 1 + (r.next_u64() % 7) as usize;
        let cols = 1 + (r.next_u64() % 7) as usize;
        let forbid_rate = match case % 3 {
            0 => 0.0,
            1 => 0.2,
            _ => 0.5,
        };
        let costs: Vec<Vec<f64>> = (0..rows)
            .map(|_| {
                (0..cols)
                    .map(|_| {
                        if r.next_f64() < forbid_rate {
                            FORBIDDEN
                        } else {
                            (r.next_u64() % 100) as f64
                        }
                    })
                    .collect()
            })
            .collect();
        let ours = assignment(&costs);
        let ours_card = ours.len();
        let ours_cost = matching_cost(&costs, &ours);
        let (best_card, best_cost) = brute_force_assignment(&costs);
        assert_eq!(ours_card, best_card, "case {case}: cardinality mismatch on {costs:?}");
        assert_eq!(ours_cost, best_cost, "case {case}: cost mismatch on {costs:?}");
    }
}

#[test]
fn hota_matches_small_instance_maximisation() {
    // Two objects, one prediction covering half of each track's frames
    // with identical boxes: DetA = 0.5, pair alignment = 0.5, HOTA = 0.5.
    let mut gt = TrackSet::new();
    let mut pred = TrackSet::new();
    for f in 1..=4 {
        gt.insert(f, 1, Rect::new(f as f64, 0.0, 10.0, 10.0));
        gt.insert(f, 2, Rect::new(f as f64, 200.0, 10.0, 10.0));
    }
    for f in 1..=2 {
        pred.insert(f, 7, Rect::new(f as f64, 0.0, 10.0, 10.0));
        pred.insert(f, 8, Rect::new(f as f64, 200.0, 10.0, 10.0));
    }
    for &tau in &HOTA_THRESHOLDS {
        let oracle = brute_force_hota_at(&gt, &pred, tau);
        let ours = hota_at(&gt, &pred, tau);
        assert!((ours - oracle).abs() < 1e-12, "tau {tau}: {ours} vs oracle {oracle}");
        assert!((oracle - 0.5).abs() < 1e-12);
    }

    // An identity swap across two frames.
    let mut pred2 = TrackSet::new();
    for f in 1..=4 {
        let (a, b) = if f <= 2 { (7, 8) } else { (8, 7) };
        pred2.insert(f, a, Rect::new(f as f64, 0.0, 10.0, 10.0));
        pred2.insert(f, b, Rect::new(f as f64, 200.0, 10.0, 10.0));
    }
    for &tau in &HOTA_THRESHOLDS {
        let oracle = brute_force_hota_at(&gt, &pred2, tau);
        let ours = hota_at(&gt, &pred2, tau);
        assert!((ours - oracle).abs() < 1e-12, "tau {tau}: {ours} vs oracle {oracle}");
    }

    // A prediction offset so it only matches at looser thresholds: the
    // score must agree with the oracle at every threshold, matched or not.
    let mut gt3 = TrackSet::new();
    let mut pred3 = TrackSet::new();
    for f in 1..=3 {
        gt3.insert(f, 1, Rect::new(0.0, 0.0, 10.0, 10.0));
        pred3.insert(f, 5, Rect::new(14.0, 14.0, 10.0, 10.0));
    }
    for &tau in &HOTA_THRESHOLDS {
        let oracle = brute_force_hota_at(&gt3, &pred3, tau);
        let ours = hota_at(&gt3, &pred3, tau);
        assert!((ours - oracle).abs() < 1e-12, "tau {tau}: {ours} vs oracle {oracle}");
    }
}
