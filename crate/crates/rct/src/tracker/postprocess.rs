//! Post-build passes over the full track set: box replacement against the
//! single-object tracker, greedy track joining, confidence-based filtering,
//! and end trimming.

use super::growth::smooth_states;
use super::{deadline_expired, RctParams, Track, TrackBox, TrackError, TrackSource, TrimMode};
use crate::geometry::{intersection_area, iou, offscreen_fraction, FrameDims, Rect};
use crate::kalman::{init, predict, update, Observation, PredictiveDensity};
use std::collections::BTreeMap;
use std::time::Instant;

/// Re-runs smoothing over a track's current evidence and refreshes every
/// box from the smoothed states.
pub(super) fn resmooth(track: &mut Track, params: &RctParams) {
    let (Some(&lo), Some(&hi)) = (track.boxes.keys().next(), track.boxes.keys().next_back())
    else {
        return;
    };
    let evidence = track.evidence();
    if evidence.is_empty() {
        return;
    }
    track.states = smooth_states(&evidence, lo, hi, None, &params.kalman);
    let states = &track.states;
    for (f, tb) in track.boxes.iter_mut() {
        tb.rect = states[f].state_box();
    }
}

/// Revisits every box that is either motion-inferred or overlaps a
/// detection claimed by another track. Such a box becomes the
/// single-object tracker's box when that box connects to the previous
/// frame, and a missing observation otherwise.
pub(super) fn replace_after_build(tracks: &mut [Track], params: &RctParams) {
    // Snapshot of detection-backed boxes per frame, taken before any
    // replacement so the pass is order-independent.
    let mut claimed: BTreeMap<i64, Vec<(usize, Rect)>> = BTreeMap::new();
    for (i, t) in tracks.iter().enumerate() {
        for (&f, tb) in &t.boxes {
            if tb.source == TrackSource::Detection {
                claimed.entry(f).or_default().push((i, tb.rect));
            }
        }
    }

    for (i, track) in tracks.iter_mut().enumerate() {
        let mut changed = false;
        let frames: Vec<i64> = track.boxes.keys().copied().collect();
        for f in frames {
            let tb = &track.boxes[&f];
            let overlaps_other = claimed.get(&f).is_some_and(|v| {
                v.iter().any(|(j, r)| *j != i && intersection_area(r, &tb.rect) > 0.0)
            });
            if tb.source != TrackSource::Motion && !overlaps_other {
                continue;
            }
            let prev_rect = track.boxes.get(&(f - 1)).map(|p| p.rect);
            let sot = track.sot_chain.get(&f).copied();
            match (sot, prev_rect) {
                (Some(m), Some(prev)) if intersection_area(&m, &prev) > 0.0 => {
                    let cur = track.boxes.get_mut(&f).unwrap();
                    if cur.source != TrackSource::Sot || cur.observed != Some(m) {
                        *cur = TrackBox::sot(m);
                        changed = true;
                    }
                }
                _ => {
                    let cur = track.boxes.get_mut(&f).unwrap();
                    if cur.source != TrackSource::Motion {
                        *cur = TrackBox::motion(cur.rect);
                        changed = true;
                    }
                }
            }
        }
        if changed {
            resmooth(track, params);
        }
    }
}

fn max_speed(tracks: [&Track; 2]) -> f64 {
    tracks
        .iter()
        .flat_map(|t| t.states.values())
        .map(|s| s.speed())
        .fold(0.0, f64::max)
}

/// Direction test for joining: a filter initialised on track `w` and run
/// backwards through the gap must find `j`'s final box at least as likely
/// at its own frame as one frame earlier.
fn join_direction_ok(j: &Track, w: &Track, f_j: i64, params: &RctParams) -> bool {
    if f_j <= 1 {
        return true;
    }
    let cfg = &params.kalman;
    let evidence = w.evidence();
    let Some((&start, &start_rect)) = evidence.iter().next_back() else { return true };
    let Some(target) = j.boxes.get(&f_j).map(|tb| tb.observed.unwrap_or(tb.rect)) else {
        return false;
    };
    let prior = init(&start_rect, cfg);
    let Ok(mut state) = update(&prior, &Observation::Present(start_rect), cfg) else {
        return false;
    };
    let mut at_fj: Option<(PredictiveDensity, crate::kalman::MeasVector)> = None;
    let mut mean_before = None;
    let mut g = start - 1;
    while g >= f_j - 1 {
        let pred = predict(&state, cfg);
        if g == f_j {
            let Ok(density) = PredictiveDensity::new(&pred, cfg) else { return false };
            let mean = *density.mean();
            at_fj = Some((density, mean));
        } else if g == f_j - 1 {
            mean_before = Some(crate::kalman::measurement_matrix() * pred.mean);
        }
        let obs = evidence.get(&g).map(|&r| Observation::Present(r)).unwrap_or(Observation::Missing);
        state = update(&pred, &obs, cfg).unwrap_or(pred);
        g -= 1;
    }
    // The arrival-time hypothesis must explain j's final box at least as
    // well as overshooting one frame past it; both scored under the
    // arrival-time innovation covariance.
    match (at_fj, mean_before) {
        (Some((density, mean_at)), Some(before)) => {
            density.mahalanobis_from(&mean_at, &target)
                <= density.mahalanobis_from(&before, &target)
        }
        _ => true,
    }
}

/// Whether ordered pair `(j, w)` qualifies for a join: either `j`'s
/// evidence ends before `w`'s begins with a small, kinematically plausible
/// gap, or the two overlap in time and agree (IoU-wise) on almost every
/// frame where both carry detections.
fn joinable(j: &Track, w: &Track, params: &RctParams) -> bool {
    let (Some(f_j), Some(f_w)) = (j.last_evidence_frame(), w.first_evidence_frame()) else {
        return false;
    };
    if f_j <= f_w {
        let d_time = f_w - f_j;
        if d_time >= params.join_max_gap {
            return false;
        }
        let c_j = j.boxes[&f_j].rect.center();
        let c_w = w.boxes[&f_w].rect.center();
        let dist = (c_j.0 - c_w.0).hypot(c_j.1 - c_w.1);
        if dist > d_time as f64 * max_speed([j, w]) {
            return false;
        }
        join_direction_ok(j, w, f_j, params)
    } else {
        // Temporal overlap: require agreement on all but at most two of
        // the frames where both tracks carry observations (detections or
        // tracker boxes), with at least one agreeing frame so a pair
        // sharing only mismatched frames cannot slip through.
        let mut co_frames = 0usize;
        let mut disagreements = 0usize;
        for (&f, tb_j) in &j.boxes {
            if !tb_j.is_evidence() {
                continue;
            }
            let Some(tb_w) = w.boxes.get(&f) else { continue };
            if !tb_w.is_evidence() {
                continue;
            }
            co_frames += 1;
            if iou(&tb_j.rect, &tb_w.rect) < params.join_overlap_iou {
                disagreements += 1;
            }
        }
        co_frames > disagreements && disagreements <= 2
    }
}

fn source_rank(s: TrackSource) -> u8 {
    match s {
        TrackSource::Detection => 2,
        TrackSource::Sot => 1,
        TrackSource::Motion => 0,
    }
}

/// Merges two tracks, keeping the identity of the higher-confidence one.
/// Where both have a box on a frame, the stronger source wins.
fn merge_tracks(a: Track, b: Track) -> Track {
    let a_keeps = (a.init_confidence, -a.id) >= (b.init_confidence, -b.id);
    let (mut keep, other) = if a_keeps { (a, b) } else { (b, a) };
    for (f, tb) in other.boxes {
        match keep.boxes.get(&f) {
            Some(existing) if source_rank(existing.source) >= source_rank(tb.source) => {}
            _ => {
                keep.boxes.insert(f, tb);
            }
        }
    }
    for (f, r) in other.sot_chain {
        keep.sot_chain.entry(f).or_insert(r);
    }
    keep
}

/// Greedy iterative joining: repeatedly merges the first qualifying
/// ordered pair (in seed order) and re-smooths, until no pair qualifies.
pub(super) fn join_tracks(
    tracks: &mut Vec<Track>,
    params: &RctParams,
    deadline: Option<Instant>,
) -> Result<(), TrackError> {
    loop {
        if deadline_expired(deadline) {
            return Err(TrackError::TimedOut);
        }
        let mut pair = None;
        'outer: for j in 0..tracks.len() {
            for w in 0..tracks.len() {
                if j != w && joinable(&tracks[j], &tracks[w], params) {
                    pair = Some((j, w));
                    break 'outer;
                }
            }
        }
        let Some((j, w)) = pair else { break };
        let (first, second) = (j.min(w), j.max(w));
        let b = tracks.remove(second);
        let a = tracks.remove(first);
        let mut merged = merge_tracks(a, b);
        resmooth(&mut merged, params);
        tracks.insert(first, merged);
    }
    Ok(())
}

fn track_size(t: &Track) -> f64 {
    t.boxes.values().map(|tb| tb.rect.area()).sum()
}

/// Average per-frame IoU between two tracks. With `evidence_only`, frames
/// where neither box is observation-backed are excluded, so long inferred
/// tails cannot dilute the overlap of the tracks' real extents.
fn average_iou(a: &Track, b: &Track, evidence_only: bool) -> f64 {
    let mut sum = 0.0;
    let mut n = 0usize;
    for (&f, tb_a) in &a.boxes {
        let Some(tb_b) = b.boxes.get(&f) else { continue };
        if evidence_only && !tb_a.is_evidence() && !tb_b.is_evidence() {
            continue;
        }
        sum += iou(&tb_a.rect, &tb_b.rect);
        n += 1;
    }
    if n == 0 {
        0.0
    } else {
        sum / n as f64
    }
}

/// Removes the lower-confidence member of every pair whose average IoU
/// exceeds the redundancy threshold.
pub(super) fn drop_redundant(tracks: &mut Vec<Track>, params: &RctParams, evidence_only: bool) {
    let mut order: Vec<usize> = (0..tracks.len()).collect();
    order.sort_by(|&x, &y| {
        tracks[y]
            .init_confidence
            .partial_cmp(&tracks[x].init_confidence)
            .unwrap_or(std::cmp::Ordering::Equal)
            .then(tracks[x].id.cmp(&tracks[y].id))
    });
    let mut dead = vec![false; tracks.len()];
    for hi in 0..order.len() {
        for lo in (hi + 1)..order.len() {
            let (a, b) = (order[hi], order[lo]);
            if dead[a] || dead[b] {
                continue;
            }
            if average_iou(&tracks[a], &tracks[b], evidence_only) > params.redundancy_iou {
                dead[b] = true;
            }
        }
    }
    let mut idx = 0;
    tracks.retain(|_| {
        let keep = !dead[idx];
        idx += 1;
        keep
    });
}

/// Removes implausibly large low-confidence tracks (sized against the
/// Gaussian fit to the high-quality population) and redundant duplicates.
pub(super) fn filter_tracks(tracks: &mut Vec<Track>, params: &RctParams) {
    if params.use_size_filter && !tracks.is_empty() {
        let sizes: Vec<f64> = tracks.iter().map(track_size).collect();
        let mean_all = sizes.iter().sum::<f64>() / sizes.len() as f64;
        let quality: Vec<f64> = tracks
            .iter()
            .zip(&sizes)
            .filter(|(t, &s)| t.init_confidence > params.quality_confidence && s >= mean_all)
            .map(|(_, &s)| s)
            .collect();
        if !quality.is_empty() {
            let mu = quality.iter().sum::<f64>() / quality.len() as f64;
            let var =
                quality.iter().map(|s| (s - mu).powi(2)).sum::<f64>() / quality.len() as f64;
            let cut = mu + 1.645 * var.sqrt();
            let mut idx = 0;
            tracks.retain(|t| {
                let keep =
                    !(sizes[idx] > cut && t.init_confidence < params.quality_confidence);
                idx += 1;
                keep
            });
        }
    }
    drop_redundant(tracks, params, true);
}

/// Rewrites the motion-only tail beyond the last evidence frame with a
/// constant-velocity walk that accelerates once the box starts leaving the
/// frame, carrying exits swiftly offscreen.
fn recompute_exit_tail(t: &mut Track, anchor: i64, step: i64, dims: FrameDims, params: &RctParams) {
    let Some(state) = t.states.get(&anchor) else { return };
    let (mut cx, mut cy) = (state.mean[0], state.mean[1]);
    let (mut vx, mut vy) = (state.mean[2] * step as f64, state.mean[3] * step as f64);
    let (w, h) = (state.mean[4].max(0.0), state.mean[5].max(0.0));
    let mut armed = false;
    let mut g = anchor + step;
    while let Some(tb) = t.boxes.get_mut(&g) {
        debug_assert_eq!(tb.source, TrackSource::Motion);
        if armed {
            vx *= params.exit_accel;
            vy *= params.exit_accel;
        }
        cx += vx;
        cy += vy;
        let rect = Rect::from_center(cx, cy, w, h);
        let (ox, oy) = offscreen_fraction(&rect, dims);
        if !armed && (ox > 0.0 || oy > 0.0) {
            armed = true;
        }
        tb.rect = rect;
        g += step;
    }
}

/// Cuts boxes off both ends while they sit too far offscreen.
fn cut_offscreen_ends(t: &mut Track, dims: FrameDims, params: &RctParams) {
    let thr = params.offscreen_pct / 100.0;
    let on_touch = params.trim_mode == TrimMode::OnTouch;
    let too_off = |r: &Rect| {
        let (ox, oy) = offscreen_fraction(r, dims);
        if on_touch {
            ox > 0.0 || oy > 0.0
        } else {
            ox > thr && oy > thr
        }
    };
    while let Some((&f, tb)) = t.boxes.last_key_value() {
        if too_off(&tb.rect) {
            t.boxes.remove(&f);
            t.states.remove(&f);
        } else {
            break;
        }
    }
    while let Some((&f, tb)) = t.boxes.first_key_value() {
        if too_off(&tb.rect) {
            t.boxes.remove(&f);
            t.states.remove(&f);
        } else {
            break;
        }
    }
}

/// Trims a motion-only run at one end of the track when it is long enough.
/// A run that starts leaving the frame within its first few boxes is a
/// genuine exit and stays (the offscreen cut handles it); a run that
/// wanders onscreen longer than that is incorrect extrapolation.
fn trim_motion_tail(t: &mut Track, step: i64, dims: FrameDims, params: &RctParams) {
    let run: Vec<i64> = if step > 0 {
        t.boxes
            .iter()
            .rev()
            .take_while(|(_, tb)| tb.source == TrackSource::Motion)
            .map(|(&f, _)| f)
            .collect()
    } else {
        t.boxes
            .iter()
            .take_while(|(_, tb)| tb.source == TrackSource::Motion)
            .map(|(&f, _)| f)
            .collect()
    };
    if (run.len() as i64) < params.tail_trim_frames {
        return;
    }
    // run[0] is the outermost frame; the run's innermost boxes sit at the
    // end of the vector. Exempt the run when it reaches the frame edge
    // within its first `tail_trim_frames` boxes past the evidence.
    let exiting = run
        .iter()
        .rev()
        .take(params.tail_trim_frames as usize)
        .filter_map(|f| t.boxes.get(f))
        .any(|tb| {
            let (ox, oy) = offscreen_fraction(&tb.rect, dims);
            ox > 0.0 || oy > 0.0
        });
    if exiting {
        return;
    }
    for f in run {
        t.boxes.remove(&f);
        t.states.remove(&f);
    }
}

/// End trimming per the configured mode.
pub(super) fn trim_tracks(tracks: &mut Vec<Track>, dims: FrameDims, params: &RctParams) {
    for t in tracks.iter_mut() {
        let (Some(ev_lo), Some(ev_hi)) = (t.first_evidence_frame(), t.last_evidence_frame())
        else {
            t.boxes.clear();
            t.states.clear();
            continue;
        };
        if params.trim_mode != TrimMode::NoOffscreen {
            recompute_exit_tail(t, ev_hi, 1, dims, params);
            recompute_exit_tail(t, ev_lo, -1, dims, params);
            cut_offscreen_ends(t, dims, params);
        }
        if params.trim_mode != TrimMode::NoOnscreen {
            trim_motion_tail(t, 1, dims, params);
            trim_motion_tail(t, -1, dims, params);
        }
    }
    tracks.retain(|t| !t.boxes.is_empty());
}
