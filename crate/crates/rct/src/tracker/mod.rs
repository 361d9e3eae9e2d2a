//! The tracking pipeline: greedy confidence-ranked track construction with
//! joint confidence-times-motion scoring, a single-object-tracker fallback,
//! post-build box replacement, track joining, confidence-based filtering,
//! and end trimming.
//!
//! The pipeline consumes the detector's complete output: no confidence
//! threshold is applied on the way in. High-confidence detections seed
//! tracks; low-confidence ones only ever extend existing tracks.

mod growth;
mod postprocess;

use crate::geometry::{intersection_area, FrameDims, Rect};
use crate::io::{Detection, FrameSource, IoError};
use crate::kalman::{KalmanConfig, KalmanState};
use crate::medianflow::MedianFlowConfig;
use crate::metrics::TrackSet;
use std::collections::BTreeMap;
use std::time::Instant;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum TrackError {
    #[error("tracking timed out")]
    TimedOut,
    #[error(transparent)]
    Io(#[from] IoError),
    #[error("{0}")]
    Input(String),
}

/// Which parts of end trimming run; the non-default modes exist for
/// ablation studies.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TrimMode {
    /// Offscreen cut at the configured threshold, exit acceleration, and
    /// trimming of onscreen motion-only tails.
    Normal,
    /// No offscreen cut and no exit acceleration.
    NoOffscreen,
    /// Cut as soon as a box touches the frame edge at all.
    OnTouch,
    /// Keep onscreen motion-only tails instead of trimming them.
    NoOnscreen,
}

/// Tunable thresholds and feature flags for the pipeline.
#[derive(Debug, Clone, PartialEq)]
pub struct RctParams {
    /// Minimum detection confidence to seed a new track (h_I).
    pub seed_confidence: f64,
    /// Percent a seed box is enlarged to verify it sits clear of the frame
    /// edge (beta).
    pub edge_margin_pct: f64,
    /// Steps of two-direction growth before committing to one direction at
    /// a time (delta).
    pub bidirectional_steps: i64,
    /// Consecutive detection-less frames before the single-object tracker
    /// takes over (delta_m).
    pub sot_switch_frames: i64,
    /// IoU above which temporally overlapping tracks count as covering the
    /// same object when joining (h_u).
    pub join_overlap_iou: f64,
    /// Maximum frame gap across which two tracks may join (D_max).
    pub join_max_gap: i64,
    /// Confidence above which a track counts as high-quality in the size
    /// filter (h_q).
    pub quality_confidence: f64,
    /// Average IoU above which two tracks are redundant (h_f).
    pub redundancy_iou: f64,
    /// Percent of the frame extent a box must be offscreen, in both
    /// dimensions, before the track end is cut (omega).
    pub offscreen_pct: f64,
    /// Per-frame velocity multiplier applied while an object is exiting
    /// the frame (alpha).
    pub exit_accel: f64,
    /// Minimum run of trailing inferred boxes that gets trimmed (delta_n).
    pub tail_trim_frames: i64,
    pub use_medianflow: bool,
    pub use_joining: bool,
    pub use_size_filter: bool,
    pub trim_mode: TrimMode,
    pub kalman: KalmanConfig,
    pub medianflow: MedianFlowConfig,
}

impl Default for RctParams {
    fn default() -> Self {
        Self {
            seed_confidence: 0.5,
            edge_margin_pct: 50.0,
            bidirectional_steps: 4,
            sot_switch_frames: 2,
            join_overlap_iou: 0.3,
            join_max_gap: 20,
            quality_confidence: 0.8,
            redundancy_iou: 0.2,
            offscreen_pct: 1.0,
            exit_accel: 1.1,
            tail_trim_frames: 5,
            use_medianflow: true,
            use_joining: true,
            use_size_filter: true,
            trim_mode: TrimMode::Normal,
            kalman: KalmanConfig::default(),
            medianflow: MedianFlowConfig::default(),
        }
    }
}

/// What produced a track box.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TrackSource {
    /// A detector box was accepted on this frame.
    Detection,
    /// No observation: the box was inferred by the motion model.
    Motion,
    /// The single-object tracker supplied the box.
    Sot,
}

/// One per-frame box of a track.
#[derive(Debug, Clone, PartialEq)]
pub struct TrackBox {
    /// The emitted box (smoothed).
    pub rect: Rect,
    pub source: TrackSource,
    /// Detection confidence; 0 for inferred and tracker-supplied boxes.
    pub confidence: f64,
    /// The raw observation behind this box, when there was one.
    pub observed: Option<Rect>,
}

impl TrackBox {
    pub fn detection(rect: Rect, confidence: f64) -> Self {
        Self { rect, source: TrackSource::Detection, confidence, observed: Some(rect) }
    }

    pub fn sot(rect: Rect) -> Self {
        Self { rect, source: TrackSource::Sot, confidence: 0.0, observed: Some(rect) }
    }

    pub fn motion(rect: Rect) -> Self {
        Self { rect, source: TrackSource::Motion, confidence: 0.0, observed: None }
    }

    pub fn is_evidence(&self) -> bool {
        self.source != TrackSource::Motion
    }
}

/// One identity over time.
#[derive(Debug, Clone, PartialEq)]
pub struct Track {
    pub id: i64,
    /// Frame of the seeding detection.
    pub init_frame: i64,
    /// Confidence of the seeding detection.
    pub init_confidence: f64,
    /// One box per frame over a contiguous interval (after finalization).
    pub boxes: BTreeMap<i64, TrackBox>,
    /// Smoothed motion states per frame.
    pub states: BTreeMap<i64, KalmanState>,
    /// Boxes the single-object tracker produced alongside growth, kept for
    /// the post-build replacement pass.
    pub sot_chain: BTreeMap<i64, Rect>,
}

impl Track {
    pub fn from_boxes(
        id: i64,
        init_frame: i64,
        init_confidence: f64,
        boxes: BTreeMap<i64, TrackBox>,
    ) -> Self {
        Self {
            id,
            init_frame,
            init_confidence,
            boxes,
            states: BTreeMap::new(),
            sot_chain: BTreeMap::new(),
        }
    }

    pub fn first_frame(&self) -> Option<i64> {
        self.boxes.keys().next().copied()
    }

    pub fn last_frame(&self) -> Option<i64> {
        self.boxes.keys().next_back().copied()
    }

    /// First frame carrying an actual observation.
    pub fn first_evidence_frame(&self) -> Option<i64> {
        self.boxes.iter().find(|(_, tb)| tb.is_evidence()).map(|(&f, _)| f)
    }

    /// Last frame carrying an actual observation.
    pub fn last_evidence_frame(&self) -> Option<i64> {
        self.boxes.iter().rev().find(|(_, tb)| tb.is_evidence()).map(|(&f, _)| f)
    }

    /// Frame-to-observation map used when (re)smoothing.
    pub(crate) fn evidence(&self) -> BTreeMap<i64, Rect> {
        self.boxes
            .iter()
            .filter_map(|(&f, tb)| tb.observed.map(|r| (f, r)))
            .collect()
    }
}

/// Collects emitted tracks into the per-frame map the metrics consume.
pub fn track_set(tracks: &[Track]) -> TrackSet {
    let mut ts = TrackSet::new();
    for t in tracks {
        for (&f, tb) in &t.boxes {
            ts.insert(f, t.id, tb.rect);
        }
    }
    ts
}

#[derive(Debug, Clone)]
struct PoolEntry {
    rect: Rect,
    confidence: f64,
    consumed: bool,
}

/// Per-frame detections, each consumable by at most one track, ever.
#[derive(Debug, Clone)]
pub struct DetectionPool {
    frames: BTreeMap<i64, Vec<PoolEntry>>,
}

impl DetectionPool {
    pub fn new(detections: &[Detection]) -> Self {
        let mut frames: BTreeMap<i64, Vec<PoolEntry>> = BTreeMap::new();
        for d in detections {
            frames.entry(d.frame).or_default().push(PoolEntry {
                rect: d.rect,
                confidence: d.confidence,
                consumed: false,
            });
        }
        Self { frames }
    }

    pub fn max_frame(&self) -> Option<i64> {
        self.frames.keys().next_back().copied()
    }

    fn unconsumed_at(&self, frame: i64) -> impl Iterator<Item = (usize, &PoolEntry)> {
        self.frames
            .get(&frame)
            .into_iter()
            .flatten()
            .enumerate()
            .filter(|(_, e)| !e.consumed)
    }

    fn consume(&mut self, frame: i64, idx: usize) -> (Rect, f64) {
        let e = &mut self.frames.get_mut(&frame).expect("frame exists")[idx];
        debug_assert!(!e.consumed, "detection consumed twice");
        e.consumed = true;
        (e.rect, e.confidence)
    }
}

fn deadline_expired(deadline: Option<Instant>) -> bool {
    deadline.is_some_and(|d| Instant::now() >= d)
}

/// Joint confidence-and-motion score of a candidate box: the detection
/// confidence times the Gaussian density of the box under the predicted
/// state's measurement distribution.
pub fn score_candidate(
    confidence: f64,
    predicted: &KalmanState,
    rect: &Rect,
    cfg: &KalmanConfig,
) -> f64 {
    match crate::kalman::likelihood(predicted, rect, cfg) {
        Ok(density) => confidence * density,
        Err(_) => 0.0,
    }
}

/// Picks the unconsumed detection with maximal confidence to seed the next
/// track, skipping boxes too close to the frame edge and boxes that
/// overlap a detection already claimed by an existing track on that frame.
/// Returns `None` once the best remaining confidence falls below the seed
/// threshold. Ties break to the earliest frame, then smallest x, then
/// smallest y.
pub fn select_seed(
    pool: &DetectionPool,
    tracks: &[Track],
    params: &RctParams,
    dims: FrameDims,
) -> Option<(i64, usize)> {
    // Observation-backed boxes of existing tracks, by frame. Tracker
    // boxes count too: they are where the track actually is, and a seed
    // inside one would just duplicate that track.
    let mut claimed: BTreeMap<i64, Vec<Rect>> = BTreeMap::new();
    for t in tracks {
        for (&f, tb) in &t.boxes {
            if tb.is_evidence() {
                claimed.entry(f).or_default().push(tb.observed.unwrap_or(tb.rect));
            }
        }
    }

    let mut best: Option<(f64, i64, f64, f64, usize)> = None;
    for (&frame, entries) in &pool.frames {
        for (idx, e) in entries.iter().enumerate() {
            if e.consumed || e.confidence < params.seed_confidence {
                continue;
            }
            let key = (e.confidence, frame, e.rect.x, e.rect.y);
            if let Some((bc, bf, bx, by, _)) = best {
                let better = key.0 > bc
                    || (key.0 == bc
                        && (key.1 < bf
                            || (key.1 == bf && (key.2 < bx || (key.2 == bx && key.3 < by)))));
                if !better {
                    continue;
                }
            }
            if !e.rect.enlarge(params.edge_margin_pct).fully_onscreen(dims) {
                continue;
            }
            if claimed
                .get(&frame)
                .is_some_and(|v| v.iter().any(|r| intersection_area(r, &e.rect) > 0.0))
            {
                continue;
            }
            best = Some((e.confidence, frame, e.rect.x, e.rect.y, idx));
        }
    }
    best.map(|(_, frame, _, _, idx)| (frame, idx))
}

/// Runs the full pipeline over an unfiltered detection set.
///
/// `frames` supplies grayscale imagery for the single-object-tracker
/// fallback; without it the pipeline runs on detections and motion alone.
/// `dims` and `num_frames` describe the video and are taken from `frames`
/// when present. `deadline`, when set, aborts with
/// [`TrackError::TimedOut`].
pub fn run_rct(
    detections: &[Detection],
    frames: Option<&dyn FrameSource>,
    dims: FrameDims,
    num_frames: i64,
    params: &RctParams,
    deadline: Option<Instant>,
) -> Result<Vec<Track>, TrackError> {
    let (dims, num_frames) = match frames {
        Some(src) => (src.dims(), src.num_frames()),
        None => (dims, num_frames),
    };
    if num_frames < 1 {
        return Err(TrackError::Input("video must have at least one frame".into()));
    }
    if let Some(max) = detections.iter().map(|d| d.frame).max() {
        if max > num_frames {
            return Err(TrackError::Input(format!(
                "detection on frame {max} but video has {num_frames} frames"
            )));
        }
    }

    let min_dim = 1usize << (params.medianflow.levels - 1);
    let sot_active = params.use_medianflow
        && frames.is_some()
        && dims.width as usize >= min_dim
        && dims.height as usize >= min_dim;
    if params.use_medianflow && frames.is_none() {
        eprintln!("warning: no image sequence given; single-object-tracker fallback disabled");
    }

    let mut pool = DetectionPool::new(detections);
    let mut tracks: Vec<Track> = Vec::new();
    let mut next_id = 1i64;
    while let Some((frame, idx)) = select_seed(&pool, &tracks, params, dims) {
        if deadline_expired(deadline) {
            return Err(TrackError::TimedOut);
        }
        let track = growth::grow_track(
            &mut pool,
            next_id,
            frame,
            idx,
            frames,
            sot_active,
            dims,
            num_frames,
            params,
            deadline,
        )?;
        next_id += 1;
        tracks.push(track);
    }

    postprocess::replace_after_build(&mut tracks, params);
    if params.use_joining {
        postprocess::join_tracks(&mut tracks, params, deadline)?;
    }
    postprocess::filter_tracks(&mut tracks, params);
    postprocess::trim_tracks(&mut tracks, dims, params);
    // Trimming changes box overlap; enforce the redundancy bound on what is
    // actually emitted.
    postprocess::drop_redundant(&mut tracks, params, false);
    tracks.retain(|t| !t.boxes.is_empty());
    Ok(tracks)
}
