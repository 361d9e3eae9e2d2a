//! Shared oracles and scenario builders for the integration suites.
//!
//! The oracles are deliberately independent of the library's computation
//! paths: the smoother oracle conditions one dense joint Gaussian, the
//! assignment oracle enumerates every matching, and the HOTA oracle
//! maximises the score over all per-frame matching combinations.

#![allow(dead_code)]

use nalgebra::DMatrix;
use rct::geometry::{diou, FrameDims, Rect};
use rct::kalman::{
    init, measurement_matrix, transition_matrix, KalmanConfig, KalmanState, Observation,
};
use rct::metrics::TrackSet;
use rct::synth::{ConfidenceModel, Motion, ObjectSpec, Scenario, SplitMix64};

/// Exact smoothed marginals from the dense joint Gaussian over all states:
/// prior `x_0 ~ N(init(init_box), P0)`, dynamics `x_{t+1} = F x_t + w`, and
/// a measurement for every non-missing observation. Solved by direct
/// Gaussian conditioning on the stacked system, no recursions shared with
/// the smoother under test.
pub fn joint_gaussian_smoother(
    observations: &[Observation],
    init_box: &Rect,
    cfg: &KalmanConfig,
) -> Vec<KalmanState> {
    let t_len = observations.len();
    assert!(t_len > 0);
    let n = 6 * t_len;
    let f = transition_matrix();
    let h = measurement_matrix();

    // Prior mean: mu_t = F^t m0.
    let first = init(init_box, cfg);
    let mut mu = DMatrix::<f64>::zeros(n, 1);
    let mut mean_t = first.mean;
    for t in 0..t_len {
        for i in 0..6 {
            mu[(6 * t + i, 0)] = mean_t[i];
        }
        mean_t = f * mean_t;
    }

    // Prior covariance blocks: diag via the Lyapunov recursion, cross terms
    // via cov(x_s, x_t) = Sigma_ss (F^(t-s))^T.
    let mut diag = vec![first.cov];
    for _ in 1..t_len {
        let prev = diag.last().unwrap();
        diag.push(f * prev * f.transpose() + cfg.transition_cov);
    }
    let mut sigma = DMatrix::<f64>::zeros(n, n);
    for s in 0..t_len {
        // Powers of F applied progressively for the cross-covariances.
        let mut f_pow = nalgebra::SMatrix::<f64, 6, 6>::identity();
        for t in s..t_len {
            let block = diag[s] * f_pow.transpose();
            for i in 0..6 {
                for j in 0..6 {
                    sigma[(6 * s + i, 6 * t + j)] = block[(i, j)];
                    sigma[(6 * t + j, 6 * s + i)] = block[(i, j)];
                }
            }
            f_pow = f * f_pow;
        }
    }

    // Measurement stack over non-missing indices.
    let observed: Vec<(usize, Rect)> = observations
        .iter()
        .enumerate()
        .filter_map(|(t, o)| o.as_rect().map(|r| (t, *r)))
        .collect();
    let m = 4 * observed.len();
    if m == 0 {
        return (0..t_len)
            .map(|t| {
                let mut mean = nalgebra::SVector::<f64, 6>::zeros();
                let mut cov = nalgebra::SMatrix::<f64, 6, 6>::zeros();
                for i in 0..6 {
                    mean[i] = mu[(6 * t + i, 0)];
                    for j in 0..6 {
                        cov[(i, j)] = sigma[(6 * t + i, 6 * t + j)];
                    }
                }
                KalmanState { mean, cov }
            })
            .collect();
    }

    let mut h_big = DMatrix::<f64>::zeros(m, n);
    let mut r_big = DMatrix::<f64>::zeros(m, m);
    let mut z = DMatrix::<f64>::zeros(m, 1);
    for (k, (t, rect)) in observed.iter().enumerate() {
        let (cx, cy) = rect.center();
        let meas = [cx, cy, rect.w, rect.h];
        for i in 0..4 {
            z[(4 * k + i, 0)] = meas[i];
            for j in 0..6 {
                h_big[(4 * k + i, 6 * t + j)] = h[(i, j)];
            }
            for j in 0..4 {
                r_big[(4 * k + i, 4 * k + j)] = cfg.observation_cov[(i, j)];
            }
        }
    }

    let s_mat = &h_big * &sigma * h_big.transpose() + r_big;
    let s_inv = s_mat.try_inverse().expect("innovation covariance invertible");
    let gain = &sigma * h_big.transpose() * s_inv;
    let innovation = z - &h_big * &mu;
    let post_mean = &mu + &gain * innovation;
    let post_cov = &sigma - &gain * &h_big * &sigma;

    (0..t_len)
        .map(|t| {
            let mut mean = nalgebra::SVector::<f64, 6>::zeros();
            let mut cov = nalgebra::SMatrix::<f64, 6, 6>::zeros();
            for i in 0..6 {
                mean[i] = post_mean[(6 * t + i, 0)];
                for j in 0..6 {
                    cov[(i, j)] = post_cov[(6 * t + i, 6 * t + j)];
                }
            }
            KalmanState { mean, cov }
        })
        .collect()
}

/// Best matching by exhaustive enumeration: maximum cardinality over
/// finite-cost pairs, minimum total cost among those. Returns
/// `(cardinality, total_cost)`.
pub fn brute_force_assignment(costs: &[Vec<f64>]) -> (usize, f64) {
    let rows = costs.len();
    let cols = costs.first().map_or(0, Vec::len);
    let mut used = vec![false; cols];

    fn recurse(
        costs: &[Vec<f64>],
        row: usize,
        used: &mut [bool],
        card: usize,
        cost: f64,
        best: &mut (usize, f64),
    ) {
        if row == costs.len() {
            if card > best.0 || (card == best.0 && cost < best.1) {
                *best = (card, cost);
            }
            return;
        }
        // Leave this row unmatched.
        recurse(costs, row + 1, used, card, cost, best);
        for c in 0..used.len() {
            if !used[c] && costs[row][c].is_finite() {
                used[c] = true;
                recurse(costs, row + 1, used, card + 1, cost + costs[row][c], best);
                used[c] = false;
            }
        }
    }

    if rows == 0 || cols == 0 {
        return (0, 0.0);
    }
    let mut best = (0usize, f64::INFINITY);
    recurse(costs, 0, &mut used, 0, 0.0, &mut best);
    if best.1.is_infinite() {
        best.1 = 0.0;
    }
    best
}

/// HOTA at one DIoU threshold by enumerating every combination of
/// per-frame matchings and keeping the best score. Only viable for tiny
/// instances.
pub fn brute_force_hota_at(gt: &TrackSet, pred: &TrackSet, tau: f64) -> f64 {
    let num_gt = gt.num_boxes();
    let num_pred = pred.num_boxes();
    if num_gt == 0 && num_pred == 0 {
        return 1.0;
    }
    if num_gt == 0 || num_pred == 0 {
        return 0.0;
    }
    let mut frames: Vec<i64> = gt.frames.keys().chain(pred.frames.keys()).copied().collect();
    frames.sort_unstable();
    frames.dedup();

    // All admissible matchings per frame (including partial ones).
    let empty = std::collections::BTreeMap::new();
    let mut per_frame: Vec<Vec<Vec<(i64, i64)>>> = Vec::new();
    for f in &frames {
        let g: Vec<(i64, Rect)> =
            gt.frames.get(f).unwrap_or(&empty).iter().map(|(&i, &r)| (i, r)).collect();
        let p: Vec<(i64, Rect)> =
            pred.frames.get(f).unwrap_or(&empty).iter().map(|(&i, &r)| (i, r)).collect();
        let mut options: Vec<Vec<(i64, i64)>> = Vec::new();
        enumerate_matchings(&g, &p, tau, 0, &mut vec![false; p.len()], &mut Vec::new(), &mut options);
        per_frame.push(options);
    }

    // Cartesian product over frames.
    let mut best = 0.0f64;
    let mut choice = vec![0usize; per_frame.len()];
    loop {
        let mut tp = 0usize;
        let mut pair_count: std::collections::BTreeMap<(i64, i64), usize> = Default::default();
        for (fi, &ci) in choice.iter().enumerate() {
            for &(g, p) in &per_frame[fi][ci] {
                tp += 1;
                *pair_count.entry((g, p)).or_insert(0) += 1;
            }
        }
        let score = if tp == 0 {
            0.0
        } else {
            let det_a = tp as f64 / (tp + (num_gt - tp) + (num_pred - tp)) as f64;
            let mut gt_count: std::collections::BTreeMap<i64, usize> = Default::default();
            let mut pred_count: std::collections::BTreeMap<i64, usize> = Default::default();
            for per in gt.frames.values() {
                for &id in per.keys() {
                    *gt_count.entry(id).or_insert(0) += 1;
                }
            }
            for per in pred.frames.values() {
                for &id in per.keys() {
                    *pred_count.entry(id).or_insert(0) += 1;
                }
            }
            let mut ass = 0.0;
            for (&(g, p), &tpa) in &pair_count {
                let fna = gt_count[&g] - tpa;
                let fpa = pred_count[&p] - tpa;
                ass += tpa as f64 * tpa as f64 / (tpa + fna + fpa) as f64;
            }
            (det_a * (ass / tp as f64)).sqrt()
        };
        best = best.max(score);

        // Advance the product counter.
        let mut k = 0;
        loop {
            if k == choice.len() {
                return best;
            }
            choice[k] += 1;
            if choice[k] < per_frame[k].len() {
                break;
            }
            choice[k] = 0;
            k += 1;
        }
    }
}

fn enumerate_matchings(
    gt: &[(i64, Rect)],
    pred: &[(i64, Rect)],
    tau: f64,
    gi: usize,
    used: &mut Vec<bool>,
    current: &mut Vec<(i64, i64)>,
    out: &mut Vec<Vec<(i64, i64)>>,
) {
    if gi == gt.len() {
        out.push(current.clone());
        return;
    }
    // gt[gi] unmatched.
    enumerate_matchings(gt, pred, tau, gi + 1, used, current, out);
    for (pi, p) in pred.iter().enumerate() {
        if !used[pi] && diou(&gt[gi].1, &p.1) <= tau {
            used[pi] = true;
            current.push((gt[gi].0, p.0));
            enumerate_matchings(gt, pred, tau, gi + 1, used, current, out);
            current.pop();
            used[pi] = false;
        }
    }
}

/// Relative-error comparison at matrix scale.
pub fn close_rel(a: f64, b: f64, tol: f64) -> bool {
    (a - b).abs() <= tol * b.abs().max(1.0)
}

// ---------------------------------------------------------------------------
// Scenario builders shared by the pipeline and acceptance suites.
// ---------------------------------------------------------------------------

/// Three well-separated constant-velocity objects over the whole video.
pub fn three_object_scenario(seed: u64, dropout: f64, clutter_total: f64) -> Scenario {
    let mut sc = Scenario::new(seed, FrameDims::new(640, 480), 150);
    sc.dropout = dropout;
    sc.jitter = 1.0;
    sc.true_conf = ConfidenceModel { mean: 0.8, spread: 0.07 };
    sc.clutter_conf = ConfidenceModel { mean: 0.15, spread: 0.05 };
    sc.clutter_rate = clutter_total / 150.0;
    sc.objects.push(ObjectSpec::new(
        1,
        150,
        Motion::Linear { start: (80.0, 100.0), velocity: (2.6, 0.7) },
        42.0,
        32.0,
    ));
    sc.objects.push(ObjectSpec::new(
        1,
        150,
        Motion::Linear { start: (520.0, 380.0), velocity: (-2.2, -0.9) },
        36.0,
        30.0,
    ));
    sc.objects.push(ObjectSpec::new(
        1,
        150,
        Motion::Linear { start: (320.0, 420.0), velocity: (0.9, -1.8) },
        30.0,
        26.0,
    ));
    for (i, o) in sc.objects.iter_mut().enumerate() {
        o.texture_seed = 100 + i as u64;
    }
    sc
}

/// One sinusoidal object with a scripted detection gap placed across a
/// direction flip, so linear bridging misses while visual tracking holds.
pub fn sinusoidal_gap_scenario(seed: u64, gap: (i64, i64)) -> Scenario {
    let mut sc = Scenario::new(seed, FrameDims::new(640, 480), 120);
    sc.jitter = 0.8;
    sc.true_conf = ConfidenceModel { mean: 0.82, spread: 0.06 };
    let mut obj = ObjectSpec::new(
        1,
        120,
        Motion::Sinusoidal {
            start: (60.0, 240.0),
            velocity_x: 4.0,
            amplitude: 70.0,
            period: 40.0,
        },
        40.0,
        32.0,
    );
    obj.texture_seed = 5;
    obj.detection_gaps = vec![gap];
    sc.objects.push(obj);
    sc
}

/// Sinusoidal object fully occluded for a stretch: the detector and the
/// image both lose it, fragmenting the track so joining has work to do.
pub fn occlusion_scenario(seed: u64) -> Scenario {
    let mut sc = Scenario::new(seed, FrameDims::new(640, 480), 130);
    sc.jitter = 0.8;
    sc.true_conf = ConfidenceModel { mean: 0.8, spread: 0.06 };
    let mut obj = ObjectSpec::new(
        1,
        130,
        Motion::Sinusoidal {
            start: (80.0, 220.0),
            velocity_x: 3.0,
            amplitude: 55.0,
            period: 64.0,
        },
        38.0,
        30.0,
    );
    obj.texture_seed = 9;
    obj.occlusions = vec![(42, 56)];
    sc.objects.push(obj);
    // A second steady object keeps the scene non-trivial.
    let mut other = ObjectSpec::new(
        1,
        130,
        Motion::Linear { start: (520.0, 100.0), velocity: (-1.2, 1.4) },
        34.0,
        28.0,
    );
    other.texture_seed = 11;
    sc.objects.push(other);
    sc
}

/// Objects that exit the frame mid-video; their ground truth ends at the
/// exit, so anything extrapolated beyond it scores as false positives.
pub fn exit_scenario(seed: u64) -> Scenario {
    let mut sc = Scenario::new(seed, FrameDims::new(640, 480), 240);
    sc.jitter = 0.8;
    sc.true_conf = ConfidenceModel { mean: 0.8, spread: 0.06 };
    // Exits left around frame 45.
    let mut a = ObjectSpec::new(1, 52, Motion::exit_left((180.0, 140.0), 4.5), 40.0, 32.0);
    a.texture_seed = 21;
    // Exits bottom around frame 60.
    let mut b = ObjectSpec::new(1, 70, Motion::exit_bottom((480.0, 200.0), 4.5), 36.0, 30.0);
    b.texture_seed = 22;
    // Stays onscreen throughout.
    let mut c = ObjectSpec::new(
        1,
        240,
        Motion::Linear { start: (320.0, 400.0), velocity: (0.6, -1.2) },
        32.0,
        28.0,
    );
    c.texture_seed = 23;
    // Exits right around frame 70.
    let mut d = ObjectSpec::new(1, 80, Motion::exit_right((420.0, 90.0), 4.0), 36.0, 28.0);
    d.texture_seed = 24;
    sc.objects.push(a);
    sc.objects.push(b);
    sc.objects.push(c);
    sc.objects.push(d);
    sc
}

/// Every object leaves the frame early in a long video: with offscreen
/// trimming disabled, the extrapolated remainders flood the score with
/// false positives.
pub fn pure_exit_scenario(seed: u64) -> Scenario {
    let mut sc = Scenario::new(seed, FrameDims::new(640, 480), 300);
    sc.jitter = 0.8;
    sc.true_conf = ConfidenceModel { mean: 0.8, spread: 0.06 };
    let mut a = ObjectSpec::new(1, 48, Motion::exit_left((160.0, 120.0), 4.0), 40.0, 32.0);
    a.texture_seed = 41;
    let mut b = ObjectSpec::new(1, 62, Motion::exit_bottom((470.0, 240.0), 4.2), 36.0, 30.0);
    b.texture_seed = 42;
    let mut c = ObjectSpec::new(1, 70, Motion::exit_right((380.0, 380.0), 4.0), 34.0, 28.0);
    c.texture_seed = 43;
    sc.objects.push(a);
    sc.objects.push(b);
    sc.objects.push(c);
    sc
}

/// Two gently curving objects whose detections stay high-confidence except
/// in long scripted windows where informative low-confidence detections
/// bridge the path; a prefilter throws those bridges away and the windows
/// outlast both motion extrapolation and the joining gap limit.
pub fn gap_bridging_scenario(seed: u64) -> Scenario {
    let mut sc = Scenario::new(seed, FrameDims::new(640, 480), 140);
    sc.jitter = 0.8;
    sc.true_conf = ConfidenceModel { mean: 0.78, spread: 0.05 };
    // Gentle per-frame curvature (dense tracking never struggles) but each
    // low-confidence window spans roughly half a period, so coasting
    // through one crosses a full direction reversal.
    let mut a = ObjectSpec::new(
        1,
        140,
        Motion::Sinusoidal {
            start: (50.0, 160.0),
            velocity_x: 4.0,
            amplitude: 40.0,
            period: 48.0,
        },
        38.0,
        30.0,
    );
    a.texture_seed = 31;
    a.conf_overrides = vec![(50, 72, 0.2), (98, 120, 0.2)];
    let mut b = ObjectSpec::new(
        1,
        140,
        Motion::Sinusoidal {
            start: (60.0, 360.0),
            velocity_x: 3.8,
            amplitude: 40.0,
            period: 48.0,
        },
        34.0,
        28.0,
    );
    b.texture_seed = 32;
    b.conf_overrides = vec![(26, 48, 0.2), (74, 96, 0.2)];
    sc.objects.push(a);
    sc.objects.push(b);
    sc
}

/// Deterministic pseudo-random stream for the test suites.
pub fn rng(seed: u64) -> SplitMix64 {
    SplitMix64::new(seed)
}
