//! Track construction: bidirectional growth from a seed detection, scoring
//! candidates by detection confidence times motion-model density, with the
//! single-object tracker stepping in over detection droughts.

use super::{
    deadline_expired, DetectionPool, RctParams, Track, TrackBox, TrackError, TrackSource,
};
use crate::geometry::{intersection_area, offscreen_sum, FrameDims, Rect};
use crate::io::FrameSource;
use crate::kalman::{
    self, init, predict, update, KalmanConfig, KalmanState, Observation, PredictiveDensity,
};
use crate::medianflow::{pyramid, track_box_pyramids, Pyramid, SotResult};
use std::collections::BTreeMap;
use std::sync::Arc;
use std::time::Instant;

const PYRAMID_CACHE: usize = 8;

/// Small move-to-front cache of per-frame pyramids. Growth walks frames
/// sequentially in each direction, so a handful of entries covers both
/// frontiers.
struct PyramidCache<'a> {
    source: Option<&'a dyn FrameSource>,
    levels: usize,
    entries: Vec<(i64, Arc<Pyramid>)>,
}

impl<'a> PyramidCache<'a> {
    fn new(source: Option<&'a dyn FrameSource>, levels: usize) -> Self {
        Self { source, levels, entries: Vec::new() }
    }

    fn get(&mut self, frame: i64) -> Result<Option<Arc<Pyramid>>, TrackError> {
        let Some(source) = self.source else { return Ok(None) };
        if let Some(pos) = self.entries.iter().position(|(f, _)| *f == frame) {
            let entry = self.entries.remove(pos);
            self.entries.insert(0, entry.clone());
            return Ok(Some(entry.1));
        }
        let gray = source.frame(frame)?;
        let pyr = Arc::new(
            pyramid(&gray, self.levels).map_err(|e| TrackError::Input(e.to_string()))?,
        );
        self.entries.insert(0, (frame, Arc::clone(&pyr)));
        self.entries.truncate(PYRAMID_CACHE);
        Ok(Some(pyr))
    }
}

/// State of one growth direction.
struct DirState {
    /// +1 forward, -1 backward.
    step: i64,
    /// Last processed frame.
    frontier: i64,
    stopped: bool,
    post: KalmanState,
    /// Predictive (pre-update) states per processed frame.
    preds: BTreeMap<i64, KalmanState>,
    /// Posterior states per processed frame.
    posts: BTreeMap<i64, KalmanState>,
    /// Most recent frame in this direction that carried an observation;
    /// reference point for the direction test.
    last_evidence: i64,
    /// Offscreen measure of the previous effective box, for the stop rule.
    last_offscreen: f64,
    /// Single-object tracker chain box at the frontier; None once failed.
    sot: Option<Rect>,
    /// Consecutive frames the chain box has not overlapped the state box.
    sot_divergence: i64,
}

impl DirState {
    fn new(step: i64, seed_frame: i64, prior: KalmanState, post: KalmanState, off: f64, sot: Option<Rect>) -> Self {
        let mut preds = BTreeMap::new();
        preds.insert(seed_frame, prior);
        let mut posts = BTreeMap::new();
        posts.insert(seed_frame, post.clone());
        Self {
            step,
            frontier: seed_frame,
            stopped: false,
            post,
            preds,
            posts,
            last_evidence: seed_frame,
            last_offscreen: off,
            sot,
            sot_divergence: 0,
        }
    }
}

struct Candidate {
    idx: usize,
    rect: Rect,
    confidence: f64,
    score: f64,
}

/// Best acceptable extension at frame `f` under the predicted state:
/// highest confidence-times-density among unconsumed detections
/// overlapping the state box, subject to the center-containment and
/// direction tests.
fn evaluate_candidate(
    pool: &DetectionPool,
    f: i64,
    pred: &KalmanState,
    prev_pred: Option<&KalmanState>,
    cfg: &KalmanConfig,
) -> Option<Candidate> {
    let state_box = pred.state_box();
    if state_box.is_degenerate() {
        return None;
    }
    let density = PredictiveDensity::new(pred, cfg).ok()?;
    let mut best: Option<Candidate> = None;
    for (idx, e) in pool.unconsumed_at(f) {
        if intersection_area(&e.rect, &state_box) <= 0.0 {
            continue;
        }
        let score = e.confidence * density.density(&e.rect);
        let better = match &best {
            None => true,
            Some(b) => {
                score > b.score
                    || (score == b.score
                        && (e.rect.x, e.rect.y, idx) < (b.rect.x, b.rect.y, b.idx))
            }
        };
        if better {
            best = Some(Candidate { idx, rect: e.rect, confidence: e.confidence, score });
        }
    }
    let cand = best?;
    if !state_box.contains_point(cand.rect.center()) {
        return None;
    }
    // Direction test: the candidate must be at least as likely under the
    // current predictive state as under the one at the last observed
    // frame, otherwise its implied motion runs against the track. Both
    // hypotheses are scored under the current innovation covariance so
    // that accumulated prediction uncertainty cannot decide the
    // comparison.
    if let Some(prev) = prev_pred {
        let now = density.mahalanobis_from(density.mean(), &cand.rect);
        let prev_mean = kalman::measurement_matrix() * prev.mean;
        let before = density.mahalanobis_from(&prev_mean, &cand.rect);
        if now > before {
            return None;
        }
    }
    Some(cand)
}

fn mutual_center_containment(a: &Rect, b: &Rect) -> bool {
    a.contains_point(b.center()) && b.contains_point(a.center())
}

/// Grows, smooths, and returns one track from the seed detection.
#[allow(clippy::too_many_arguments)]
pub(super) fn grow_track(
    pool: &mut DetectionPool,
    id: i64,
    seed_frame: i64,
    seed_idx: usize,
    frames: Option<&dyn FrameSource>,
    sot_active: bool,
    dims: FrameDims,
    num_frames: i64,
    params: &RctParams,
    deadline: Option<Instant>,
) -> Result<Track, TrackError> {
    let cfg = &params.kalman;
    let (seed_rect, seed_conf) = pool.consume(seed_frame, seed_idx);

    let mut committed: BTreeMap<i64, TrackBox> = BTreeMap::new();
    committed.insert(seed_frame, TrackBox::detection(seed_rect, seed_conf));
    let mut sot_chain: BTreeMap<i64, Rect> = BTreeMap::new();
    if sot_active {
        sot_chain.insert(seed_frame, seed_rect);
    }

    let prior = init(&seed_rect, cfg);
    let post = update(&prior, &Observation::Present(seed_rect), cfg)
        .map_err(|e| TrackError::Input(e.to_string()))?;
    let seed_off = offscreen_sum(&seed_rect, dims);
    let sot_box = sot_active.then_some(seed_rect);
    let mut fwd = DirState::new(1, seed_frame, prior.clone(), post.clone(), seed_off, sot_box);
    let mut bwd = DirState::new(-1, seed_frame, prior, post, seed_off, sot_box);
    let mut pyramids = PyramidCache::new(sot_active.then_some(frames).flatten(), params.medianflow.levels);

    // Probe: score of the best acceptable candidate one step ahead.
    let probe = |dir: &DirState, pool: &DetectionPool| -> Option<f64> {
        if dir.stopped {
            return None;
        }
        let f = dir.frontier + dir.step;
        if f < 1 || f > num_frames {
            return None;
        }
        let pred = predict(&dir.post, cfg);
        let prev = &dir.preds[&dir.last_evidence];
        evaluate_candidate(pool, f, &pred, Some(prev), cfg).map(|c| c.score)
    };

    // Two-direction phase: each iteration commits the better-scoring single
    // step.
    for _ in 0..params.bidirectional_steps {
        if fwd.stopped && bwd.stopped {
            break;
        }
        if deadline_expired(deadline) {
            return Err(TrackError::TimedOut);
        }
        let sf = probe(&fwd, pool);
        let sb = probe(&bwd, pool);
        let pick_fwd = match (sf, sb) {
            (Some(a), Some(b)) => a >= b,
            (Some(_), None) => true,
            (None, Some(_)) => false,
            (None, None) => !fwd.stopped,
        };
        let dir = if pick_fwd { &mut fwd } else { &mut bwd };
        full_step(dir, pool, &mut committed, &mut sot_chain, &mut pyramids, dims, num_frames, params)?;
    }

    // Single-direction phases: forward to its end condition, then backward.
    while !fwd.stopped {
        if deadline_expired(deadline) {
            return Err(TrackError::TimedOut);
        }
        full_step(&mut fwd, pool, &mut committed, &mut sot_chain, &mut pyramids, dims, num_frames, params)?;
    }
    while !bwd.stopped {
        if deadline_expired(deadline) {
            return Err(TrackError::TimedOut);
        }
        full_step(&mut bwd, pool, &mut committed, &mut sot_chain, &mut pyramids, dims, num_frames, params)?;
    }

    // Final smoothing in two overlapping windows around the seed; inferred
    // boxes fill every frame of the video, trimming decides what survives.
    let evidence: BTreeMap<i64, Rect> =
        committed.iter().filter_map(|(&f, tb)| tb.observed.map(|r| (f, r))).collect();
    let states = smooth_states(
        &evidence,
        1,
        num_frames,
        Some((seed_frame, params.bidirectional_steps)),
        cfg,
    );

    let mut boxes = BTreeMap::new();
    for (&f, state) in &states {
        let rect = state.state_box();
        let tb = match committed.get(&f) {
            Some(c) => TrackBox { rect, source: c.source, confidence: c.confidence, observed: c.observed },
            None => TrackBox::motion(rect),
        };
        boxes.insert(f, tb);
    }

    Ok(Track {
        id,
        init_frame: seed_frame,
        init_confidence: seed_conf,
        boxes,
        states,
        sot_chain,
    })
}

/// Commits one growth step at `frontier + step`.
#[allow(clippy::too_many_arguments)]
fn full_step(
    dir: &mut DirState,
    pool: &mut DetectionPool,
    committed: &mut BTreeMap<i64, TrackBox>,
    sot_chain: &mut BTreeMap<i64, Rect>,
    pyramids: &mut PyramidCache,
    dims: FrameDims,
    num_frames: i64,
    params: &RctParams,
) -> Result<(), TrackError> {
    let cfg = &params.kalman;
    let f = dir.frontier + dir.step;
    if f < 1 || f > num_frames {
        dir.stopped = true;
        return Ok(());
    }

    let pred = predict(&dir.post, cfg);
    let state_box = pred.state_box();
    let candidate = {
        let prev = &dir.preds[&dir.last_evidence];
        evaluate_candidate(pool, f, &pred, Some(prev), cfg)
    };

    // Advance the single-object tracker chain one frame.
    let sot_now: Option<Rect> = if let Some(cur) = dir.sot {
        match (pyramids.get(dir.frontier)?, pyramids.get(f)?) {
            (Some(p_prev), Some(p_next)) => {
                match track_box_pyramids(&p_prev, &p_next, &cur, &params.medianflow) {
                    SotResult::Tracked(b) => {
                        sot_chain.insert(f, b);
                        dir.sot = Some(b);
                        Some(b)
                    }
                    SotResult::Failure => {
                        dir.sot = None;
                        None
                    }
                }
            }
            _ => {
                dir.sot = None;
                None
            }
        }
    } else {
        None
    };
    // A chain box that no longer even overlaps the motion state cannot be
    // accepted by the switch rule or the post-build replacement; retire
    // the chain once the divergence is sustained rather than dragging the
    // flow computation across the rest of the video.
    if let Some(m) = sot_now {
        if intersection_area(&m, &state_box) > 0.0 {
            dir.sot_divergence = 0;
        } else {
            dir.sot_divergence += 1;
            if dir.sot_divergence > 2 * params.sot_switch_frames + 1 {
                dir.sot = None;
            }
        }
    }
    let sot_plausible = sot_now.is_some_and(|m| state_box.contains_point(m.center()));

    enum Commit {
        Det(Candidate),
        Sot(Rect),
        SotSwitch(Rect),
        Missing,
    }

    let prev_source = committed.get(&dir.frontier).map(|tb| tb.source);
    let commit = if prev_source == Some(TrackSource::Sot) && sot_plausible {
        let m = sot_now.unwrap();
        match candidate {
            // A detection wrests control back from the tracker only when
            // the two boxes mutually contain each other's centers;
            // otherwise it is likely spurious and stays unconsumed.
            Some(c) if mutual_center_containment(&c.rect, &m) => Commit::Det(c),
            _ => Commit::Sot(m),
        }
    } else if let Some(c) = candidate {
        Commit::Det(c)
    } else {
        // Switch to the single-object tracker only after the last
        // `sot_switch_frames` frames (and this one) lack detections.
        let window_clear = (1..=params.sot_switch_frames).all(|k| {
            committed
                .get(&(f - dir.step * k))
                .is_none_or(|tb| tb.source != TrackSource::Detection)
        });
        if window_clear && sot_plausible {
            Commit::SotSwitch(sot_now.unwrap())
        } else {
            Commit::Missing
        }
    };

    match commit {
        Commit::Det(c) => {
            pool.consume(f, c.idx);
            committed.insert(f, TrackBox::detection(c.rect, c.confidence));
            let post = update(&pred, &Observation::Present(c.rect), cfg)
                .unwrap_or_else(|_| pred.clone());
            dir.preds.insert(f, pred);
            dir.posts.insert(f, post.clone());
            dir.post = post;
            dir.last_evidence = f;
        }
        Commit::Sot(m) => {
            committed.insert(f, TrackBox::sot(m));
            let post =
                update(&pred, &Observation::Present(m), cfg).unwrap_or_else(|_| pred.clone());
            dir.preds.insert(f, pred);
            dir.posts.insert(f, post.clone());
            dir.post = post;
            dir.last_evidence = f;
        }
        Commit::SotSwitch(m) => {
            committed.insert(f, TrackBox::sot(m));
            // Backfill the detection-less window with the tracker's boxes.
            for k in 1..=params.sot_switch_frames {
                let g = f - dir.step * k;
                if committed.contains_key(&g) {
                    continue;
                }
                if let Some(&mb) = sot_chain.get(&g) {
                    committed.insert(g, TrackBox::sot(mb));
                }
            }
            // Refilter this direction from just before the window so the
            // motion state absorbs the backfilled observations.
            let start = f - dir.step * (params.sot_switch_frames + 1);
            let mut state = dir.posts[&start].clone();
            let mut g = start + dir.step;
            loop {
                let p = predict(&state, cfg);
                let obs = match committed.get(&g) {
                    Some(tb) => tb
                        .observed
                        .map(Observation::Present)
                        .unwrap_or(Observation::Missing),
                    None => Observation::Missing,
                };
                state = update(&p, &obs, cfg).unwrap_or_else(|_| p.clone());
                dir.preds.insert(g, p);
                dir.posts.insert(g, state.clone());
                if g == f {
                    break;
                }
                g += dir.step;
            }
            dir.post = state;
            dir.last_evidence = f;
        }
        Commit::Missing => {
            dir.preds.insert(f, pred.clone());
            dir.posts.insert(f, pred.clone());
            dir.post = pred;
        }
    }
    dir.frontier = f;

    // Stop once the effective box slides further offscreen than the last
    // one; the rest of this direction stays missing.
    let eff = committed.get(&f).map(|tb| tb.rect).unwrap_or_else(|| dir.post.state_box());
    let off = offscreen_sum(&eff, dims);
    if off > dir.last_offscreen {
        dir.stopped = true;
    }
    dir.last_offscreen = off;
    Ok(())
}

/// Smooths evidence observations over `[lo, hi]`.
///
/// With `split = Some((seed, delta))`, two overlapping windows are smoothed
/// separately: frames at or after the seed come from a pass over
/// `(seed - delta, hi]` and frames before it from a pass over
/// `[lo, seed + delta)`, each window borrowing up to `delta` frames beyond
/// the seed as context.
pub(super) fn smooth_states(
    evidence: &BTreeMap<i64, Rect>,
    lo: i64,
    hi: i64,
    split: Option<(i64, i64)>,
    cfg: &KalmanConfig,
) -> BTreeMap<i64, KalmanState> {
    debug_assert!(lo <= hi);
    let run = |a: i64, b: i64| -> Vec<KalmanState> {
        let obs: Vec<Observation> = (a..=b)
            .map(|f| evidence.get(&f).map(|&r| Observation::Present(r)).unwrap_or(Observation::Missing))
            .collect();
        let init_box = (a..=b)
            .find_map(|f| evidence.get(&f))
            .copied()
            .unwrap_or_else(|| Rect::new(0.0, 0.0, 1.0, 1.0));
        kalman::smooth(&obs, &init_box, cfg)
    };

    let mut out = BTreeMap::new();
    match split {
        None => {
            for (f, s) in (lo..=hi).zip(run(lo, hi)) {
                out.insert(f, s);
            }
        }
        Some((seed, delta)) => {
            let a = lo.max(seed - delta + 1);
            for (f, s) in (a..=hi).zip(run(a, hi)) {
                if f >= seed {
                    out.insert(f, s);
                }
            }
            if lo < seed {
                let b = hi.min(seed + delta - 1);
                for (f, s) in (lo..=b).zip(run(lo, b)) {
                    if f < seed {
                        out.insert(f, s);
                    }
                }
            }
        }
    }
    out
}
