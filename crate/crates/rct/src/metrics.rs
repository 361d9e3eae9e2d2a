//! Evaluation of predicted tracks against ground truth.
//!
//! Matching uses distance-IoU rather than plain IoU so near misses earn
//! partial credit: a pair is matchable when its DIoU is at or below a
//! threshold. CLEAR MOT initialises matches at DIoU 1.25 (the score of two
//! equal boxes touching at a corner) and lets an existing correspondence
//! persist up to 1.5. HOTA averages per-threshold scores over eleven
//! thresholds evenly spaced across `[1.25, 1.5]`.

use crate::assignment::{assignment, FORBIDDEN};
use crate::geometry::{diou, Rect};
use std::collections::BTreeMap;

/// DIoU at or below which a new correspondence may be created.
pub const DIOU_INIT: f64 = 1.25;
/// DIoU up to which an existing correspondence persists.
pub const DIOU_CARRY: f64 = 1.5;
/// Thresholds HOTA integrates over.
pub const HOTA_THRESHOLDS: [f64; 11] = [
    1.250, 1.275, 1.300, 1.325, 1.350, 1.375, 1.400, 1.425, 1.450, 1.475, 1.500,
];

/// Per-frame boxes keyed by track id; used for both ground truth and
/// predictions.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct TrackSet {
    /// frame -> (track id -> box)
    pub frames: BTreeMap<i64, BTreeMap<i64, Rect>>,
}

impl TrackSet {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn insert(&mut self, frame: i64, id: i64, rect: Rect) {
        self.frames.entry(frame).or_default().insert(id, rect);
    }

    pub fn get(&self, frame: i64, id: i64) -> Option<&Rect> {
        self.frames.get(&frame).and_then(|m| m.get(&id))
    }

    pub fn num_boxes(&self) -> usize {
        self.frames.values().map(BTreeMap::len).sum()
    }

    pub fn is_empty(&self) -> bool {
        self.num_boxes() == 0
    }

    pub fn track_ids(&self) -> Vec<i64> {
        let mut ids: Vec<i64> = Vec::new();
        for per_frame in self.frames.values() {
            for &id in per_frame.keys() {
                if !ids.contains(&id) {
                    ids.push(id);
                }
            }
        }
        ids.sort_unstable();
        ids
    }
}

/// CLEAR MOT counters plus HOTA.
#[derive(Debug, Clone, PartialEq)]
pub struct EvalReport {
    pub hota: f64,
    pub mota: f64,
    pub id_switches: usize,
    pub false_positives: usize,
    pub misses: usize,
    pub matches: usize,
    pub precision: f64,
    pub recall: f64,
}

/// CLEAR MOT with DIoU matching.
///
/// Correspondences persist frame to frame while their DIoU stays at or
/// below [`DIOU_CARRY`]; unmatched boxes are paired by minimum-DIoU optimal
/// assignment over pairs at or below [`DIOU_INIT`]. A ground-truth object
/// re-matching to a different prediction than it last used counts one
/// identity switch.
pub fn clearmot(gt: &TrackSet, pred: &TrackSet) -> EvalReport {
    let mut frames: Vec<i64> = gt.frames.keys().chain(pred.frames.keys()).copied().collect();
    frames.sort_unstable();
    frames.dedup();

    let num_gt: usize = gt.num_boxes();
    let mut matches = 0usize;
    let mut false_positives = 0usize;
    let mut misses = 0usize;
    let mut id_switches = 0usize;
    // Active correspondence (a partial bijection) and the last prediction
    // each ground-truth id ever matched, for switch counting.
    let mut active: BTreeMap<i64, i64> = BTreeMap::new();
    let mut last_match: BTreeMap<i64, i64> = BTreeMap::new();

    let empty = BTreeMap::new();
    for f in frames {
        let gt_boxes = gt.frames.get(&f).unwrap_or(&empty);
        let pred_boxes = pred.frames.get(&f).unwrap_or(&empty);

        let mut matched_gt: Vec<i64> = Vec::new();
        let mut matched_pred: Vec<i64> = Vec::new();

        // Carry over existing correspondences that are still close enough.
        for (&gid, gbox) in gt_boxes {
            if let Some(&pid) = active.get(&gid) {
                if let Some(pbox) = pred_boxes.get(&pid) {
                    if diou(gbox, pbox) <= DIOU_CARRY {
                        matched_gt.push(gid);
                        matched_pred.push(pid);
                    }
                }
            }
        }

        // Optimal assignment over the remainder.
        let free_gt: Vec<i64> = gt_boxes.keys().filter(|g| !matched_gt.contains(g)).copied().collect();
        let free_pred: Vec<i64> =
            pred_boxes.keys().filter(|p| !matched_pred.contains(p)).copied().collect();
        if !free_gt.is_empty() && !free_pred.is_empty() {
            let costs: Vec<Vec<f64>> = free_gt
                .iter()
                .map(|g| {
                    free_pred
                        .iter()
                        .map(|p| {
                            let d = diou(&gt_boxes[g], &pred_boxes[p]);
                            if d <= DIOU_INIT {
                                d
                            } else {
                                FORBIDDEN
                            }
                        })
                        .collect()
                })
                .collect();
            for (gi, pi) in assignment(&costs) {
                let gid = free_gt[gi];
                let pid = free_pred[pi];
                if let Some(&prev) = last_match.get(&gid) {
                    if prev != pid {
                        id_switches += 1;
                    }
                }
                // Keep the correspondence map a bijection.
                active.retain(|_, v| *v != pid);
                active.insert(gid, pid);
                last_match.insert(gid, pid);
                matched_gt.push(gid);
                matched_pred.push(pid);
            }
        }

        matches += matched_gt.len();
        false_positives += pred_boxes.len() - matched_pred.len();
        misses += gt_boxes.len() - matched_gt.len();
    }

    let mota = if num_gt == 0 {
        if false_positives + id_switches == 0 {
            1.0
        } else {
            f64::NEG_INFINITY
        }
    } else {
        1.0 - (false_positives + misses + id_switches) as f64 / num_gt as f64
    };
    let precision = if matches + false_positives == 0 {
        // No predictions at all: reported as 1 by convention.
        1.0
    } else {
        matches as f64 / (matches + false_positives) as f64
    };
    let recall = if num_gt == 0 { 1.0 } else { matches as f64 / num_gt as f64 };

    EvalReport {
        hota: hota(gt, pred),
        mota,
        id_switches,
        false_positives,
        misses,
        matches,
        precision,
        recall,
    }
}

/// HOTA over the DIoU threshold set: the mean over thresholds of
/// `sqrt(DetA * AssA)`, with per-frame optimal matching at each threshold.
pub fn hota(gt: &TrackSet, pred: &TrackSet) -> f64 {
    let total: f64 = HOTA_THRESHOLDS.iter().map(|&tau| hota_at(gt, pred, tau)).sum();
    total / HOTA_THRESHOLDS.len() as f64
}

/// Single-threshold HOTA: detection accuracy times association accuracy
/// under a minimum-DIoU per-frame matching at threshold `tau`.
pub fn hota_at(gt: &TrackSet, pred: &TrackSet, tau: f64) -> f64 {
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

    // Count detections per id and matched frames per (gt, pred) pair.
    let mut gt_count: BTreeMap<i64, usize> = BTreeMap::new();
    let mut pred_count: BTreeMap<i64, usize> = BTreeMap::new();
    let mut pair_count: BTreeMap<(i64, i64), usize> = BTreeMap::new();
    let mut tp = 0usize;

    let empty = BTreeMap::new();
    for f in &frames {
        let gt_boxes = gt.frames.get(f).unwrap_or(&empty);
        let pred_boxes = pred.frames.get(f).unwrap_or(&empty);
        for &gid in gt_boxes.keys() {
            *gt_count.entry(gid).or_insert(0) += 1;
        }
        for &pid in pred_boxes.keys() {
            *pred_count.entry(pid).or_insert(0) += 1;
        }
        if gt_boxes.is_empty() || pred_boxes.is_empty() {
            continue;
        }
        let gids: Vec<i64> = gt_boxes.keys().copied().collect();
        let pids: Vec<i64> = pred_boxes.keys().copied().collect();
        let costs: Vec<Vec<f64>> = gids
            .iter()
            .map(|g| {
                pids.iter()
                    .map(|p| {
                        let d = diou(&gt_boxes[g], &pred_boxes[p]);
                        if d <= tau {
                            d
                        } else {
                            FORBIDDEN
                        }
                    })
                    .collect()
            })
            .collect();
        for (gi, pi) in assignment(&costs) {
            tp += 1;
            *pair_count.entry((gids[gi], pids[pi])).or_insert(0) += 1;
        }
    }

    if tp == 0 {
        return 0.0;
    }
    let fn_count = num_gt - tp;
    let fp_count = num_pred - tp;
    let det_a = tp as f64 / (tp + fn_count + fp_count) as f64;

    // Association accuracy: average over matched detections of the pair's
    // alignment score TPA / (TPA + FNA + FPA).
    let mut ass_sum = 0.0f64;
    for (&(gid, pid), &tpa) in &pair_count {
        let fna = gt_count[&gid] - tpa;
        let fpa = pred_count[&pid] - tpa;
        ass_sum += tpa as f64 * (tpa as f64 / (tpa + fna + fpa) as f64);
    }
    let ass_a = ass_sum / tp as f64;
    (det_a * ass_a).sqrt()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn square(x: f64, y: f64) -> Rect {
        Rect::new(x, y, 10.0, 10.0)
    }

    /// Two objects far apart over `n` frames.
    fn two_object_gt(n: i64) -> TrackSet {
        let mut ts = TrackSet::new();
        for f in 1..=n {
            ts.insert(f, 1, square(f as f64, 0.0));
            ts.insert(f, 2, square(f as f64, 200.0));
        }
        ts
    }

    #[test]
    fn perfect_prediction_scores_perfectly() {
        let gt = two_object_gt(10);
        let report = clearmot(&gt, &gt);
        assert_eq!(report.mota, 1.0);
        assert_eq!(report.id_switches, 0);
        assert_eq!(report.precision, 1.0);
        assert_eq!(report.recall, 1.0);
        assert!((report.hota - 1.0).abs() < 1e-12);
    }

    #[test]
    fn swapped_ids_mid_sequence_cost_two_switches() {
        let gt = two_object_gt(10);
        let mut pred = TrackSet::new();
        for f in 1..=10 {
            // Prediction swaps which id follows which object at frame 6.
            let (a, b) = if f <= 5 { (1, 2) } else { (2, 1) };
            pred.insert(f, a, square(f as f64, 0.0));
            pred.insert(f, b, square(f as f64, 200.0));
        }
        let report = clearmot(&gt, &pred);
        assert_eq!(report.id_switches, 2);
        assert_eq!(report.false_positives, 0);
        assert_eq!(report.misses, 0);
        assert!((report.mota - (1.0 - 2.0 / 20.0)).abs() < 1e-12);
    }

    #[test]
    fn empty_prediction_conventions() {
        let gt = two_object_gt(5);
        let report = clearmot(&gt, &TrackSet::new());
        assert_eq!(report.recall, 0.0);
        assert_eq!(report.precision, 1.0);
        assert_eq!(report.matches, 0);
        assert_eq!(report.false_positives, 0);
        assert_eq!(report.misses, 10);
        assert_eq!(report.mota, 0.0);
        assert_eq!(report.hota, 0.0);
    }

    #[test]
    fn carryover_keeps_match_beyond_init_threshold() {
        // The prediction drifts so DIoU rises above 1.25 but stays below
        // 1.5: an established correspondence must persist, a fresh one must
        // not be created.
        let mut gt = TrackSet::new();
        let mut pred = TrackSet::new();
        for f in 1..=4 {
            gt.insert(f, 1, square(0.0, 0.0));
            // Frame 1: aligned. Later: displaced so 1.25 < DIoU < 1.5.
            let dx = if f == 1 { 0.0 } else { 18.0 };
            pred.insert(f, 9, square(dx, 18.0 * ((f > 1) as i64 as f64)));
        }
        let d = diou(&square(0.0, 0.0), &square(18.0, 18.0));
        assert!(d > DIOU_INIT && d <= DIOU_CARRY, "test geometry: {d}");
        let report = clearmot(&gt, &pred);
        assert_eq!(report.matches, 4);
        assert_eq!(report.misses, 0);
        assert_eq!(report.id_switches, 0);

        // Without the frame-1 anchor the same displaced boxes never match.
        let mut cold = TrackSet::new();
        for f in 1..=4 {
            cold.insert(f, 9, square(18.0, 18.0));
        }
        let mut gt2 = TrackSet::new();
        for f in 1..=4 {
            gt2.insert(f, 1, square(0.0, 0.0));
        }
        let report = clearmot(&gt2, &cold);
        assert_eq!(report.matches, 0);
    }

    #[test]
    fn hota_half_coverage_single_identity() {
        // Prediction covers exactly half of each ground-truth track with
        // one id per object and identical boxes: DetA = 5/(5+5) = 0.5 and
        // the pair alignment is 5/(10+5-5) = 0.5, so HOTA = 0.5 at every
        // threshold.
        let gt = two_object_gt(10);
        let mut pred = TrackSet::new();
        for f in 1..=5 {
            pred.insert(f, 7, square(f as f64, 0.0));
            pred.insert(f, 8, square(f as f64, 200.0));
        }
        let h = hota(&gt, &pred);
        assert!((h - 0.5).abs() < 1e-12, "hota = {h}");
    }

    #[test]
    fn hota_empty_prediction_is_zero() {
        let gt = two_object_gt(4);
        assert_eq!(hota(&gt, &TrackSet::new()), 0.0);
    }

    #[test]
    fn deleting_pure_false_positive_track_never_decreases_mota() {
        let gt = two_object_gt(8);
        let mut pred_with = TrackSet::new();
        for f in 1..=8 {
            pred_with.insert(f, 1, square(f as f64, 0.0));
            pred_with.insert(f, 2, square(f as f64, 200.0));
            // A far-away spurious track.
            pred_with.insert(f, 99, square(400.0, 400.0));
        }
        let mut pred_without = pred_with.clone();
        for per_frame in pred_without.frames.values_mut() {
            per_frame.remove(&99);
        }
        let with = clearmot(&gt, &pred_with);
        let without = clearmot(&gt, &pred_without);
        assert!(without.mota >= with.mota);
    }

    #[test]
    fn frame_relabeling_preserves_scores() {
        let gt = two_object_gt(10);
        let mut pred = TrackSet::new();
        for f in 1..=10 {
            let (a, b) = if f <= 5 { (1, 2) } else { (2, 1) };
            pred.insert(f, a, square(f as f64, 0.0));
            pred.insert(f, b, square(f as f64, 200.0));
        }
        let base = clearmot(&gt, &pred);

        let remap = |ts: &TrackSet| {
            let mut out = TrackSet::new();
            for (&f, per_frame) in &ts.frames {
                for (&id, &r) in per_frame {
                    out.insert(3 * f + 7, id, r);
                }
            }
            out
        };
        let remapped = clearmot(&remap(&gt), &remap(&pred));
        assert_eq!(base, remapped);
    }

    #[test]
    fn mota_bounded_above_by_one() {
        let gt = two_object_gt(3);
        let mut pred = gt.clone();
        for f in 1..=3 {
            pred.insert(f, 50, square(300.0, 300.0));
        }
        let report = clearmot(&gt, &pred);
        assert!(report.mota <= 1.0);
        assert!(report.hota <= 1.0 && report.hota >= 0.0);
    }
}
