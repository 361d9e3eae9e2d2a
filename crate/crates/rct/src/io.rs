//! Readers and writers for detections, ground truth, emitted tracks,
//! configuration, and image sequences.
//!
//! File formats:
//! - detections: CSV lines `frame,x,y,w,h,confidence`, no filtering applied
//! - ground truth / tracks: MOT CSV `frame,id,x,y,w,h,conf,-1,-1,-1`
//! - frames: a directory of images numbered `1..N` (PNG, PGM, or PPM)
//! - config: `key = value` text, `#` comments, unknown keys rejected

use crate::frame::GrayFrame;
use crate::geometry::{FrameDims, Rect};
use crate::metrics::TrackSet;
use crate::tracker::{Track, TrackSource};
use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};
use std::sync::{Arc, Mutex};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum IoError {
    #[error("{path}: {source}")]
    Read {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("{path}:{line}: {msg}")]
    Parse { path: PathBuf, line: usize, msg: String },
    #[error("{path}:{line}: confidence {value} outside [0, 1]")]
    ConfidenceRange { path: PathBuf, line: usize, value: f64 },
    #[error("{path}:{line}: duplicate (frame, id) pair ({frame}, {id})")]
    DuplicateEntry { path: PathBuf, line: usize, frame: i64, id: i64 },
    #[error("frame directory {path}: missing frame {missing} (found {count} files)")]
    NumberingGap { path: PathBuf, missing: i64, count: usize },
    #[error("{path}: frame is {got_w}x{got_h}, expected {want_w}x{want_h}")]
    DimensionMismatch { path: PathBuf, got_w: u32, got_h: u32, want_w: u32, want_h: u32 },
    #[error("{path}: cannot decode image: {msg}")]
    Image { path: PathBuf, msg: String },
    #[error("frame directory {path} contains no numbered images")]
    EmptyFrameDir { path: PathBuf },
    #[error("frame {frame} outside 1..={count}")]
    FrameOutOfRange { frame: i64, count: i64 },
    #[error("{path}:{line}: unknown config key `{key}`")]
    UnknownKey { path: PathBuf, line: usize, key: String },
    #[error("track {id} has a gap at frame {frame}; only contiguous tracks can be written")]
    NonContiguousTrack { id: i64, frame: i64 },
}

/// One detector output box with its confidence.
#[derive(Debug, Clone, PartialEq)]
pub struct Detection {
    pub frame: i64,
    pub rect: Rect,
    pub confidence: f64,
}

/// Source of grayscale frames, either decoded from disk or synthesised.
pub trait FrameSource: Sync {
    fn dims(&self) -> FrameDims;
    fn num_frames(&self) -> i64;
    /// 1-based frame access.
    fn frame(&self, no: i64) -> Result<Arc<GrayFrame>, IoError>;
}

fn parse_field<T: std::str::FromStr>(
    field: &str,
    what: &str,
    path: &Path,
    line: usize,
) -> Result<T, IoError> {
    field.trim().parse().map_err(|_| IoError::Parse {
        path: path.to_path_buf(),
        line,
        msg: format!("cannot parse {what} from `{}`", field.trim()),
    })
}

/// Reads unfiltered detections from `frame,x,y,w,h,confidence` CSV.
pub fn read_detections(path: &Path) -> Result<Vec<Detection>, IoError> {
    let text = fs::read_to_string(path)
        .map_err(|source| IoError::Read { path: path.to_path_buf(), source })?;
    let mut out = Vec::new();
    for (idx, raw) in text.lines().enumerate() {
        let line = idx + 1;
        let trimmed = raw.trim();
        if trimmed.is_empty() || trimmed.starts_with('#') {
            continue;
        }
        let fields: Vec<&str> = trimmed.split(',').collect();
        if fields.len() != 6 {
            return Err(IoError::Parse {
                path: path.to_path_buf(),
                line,
                msg: format!("expected 6 fields, got {}", fields.len()),
            });
        }
        let frame: i64 = parse_field(fields[0], "frame number", path, line)?;
        let x: f64 = parse_field(fields[1], "x", path, line)?;
        let y: f64 = parse_field(fields[2], "y", path, line)?;
        let w: f64 = parse_field(fields[3], "w", path, line)?;
        let h: f64 = parse_field(fields[4], "h", path, line)?;
        let confidence: f64 = parse_field(fields[5], "confidence", path, line)?;
        if frame < 1 {
            return Err(IoError::Parse {
                path: path.to_path_buf(),
                line,
                msg: format!("frame number {frame} must be >= 1"),
            });
        }
        if w < 0.0 || h < 0.0 || !(x.is_finite() && y.is_finite() && w.is_finite() && h.is_finite())
        {
            return Err(IoError::Parse {
                path: path.to_path_buf(),
                line,
                msg: "box extent must be finite and non-negative".into(),
            });
        }
        if !(0.0..=1.0).contains(&confidence) {
            return Err(IoError::ConfidenceRange {
                path: path.to_path_buf(),
                line,
                value: confidence,
            });
        }
        out.push(Detection { frame, rect: Rect::new(x, y, w, h), confidence });
    }
    Ok(out)
}

/// Writes detections in the same CSV format `read_detections` accepts.
pub fn write_detections(path: &Path, detections: &[Detection]) -> Result<(), IoError> {
    let mut text = String::new();
    for d in detections {
        writeln!(
            text,
            "{},{:.6},{:.6},{:.6},{:.6},{:.6}",
            d.frame, d.rect.x, d.rect.y, d.rect.w, d.rect.h, d.confidence
        )
        .unwrap();
    }
    write_atomic(path, text.as_bytes())
}

/// Reads a MOT-format CSV (`frame,id,x,y,w,h,conf,-1,-1,-1`) into a track
/// set. The confidence column is ignored: ground truth carries no
/// meaningful score.
pub fn read_track_set(path: &Path) -> Result<TrackSet, IoError> {
    let text = fs::read_to_string(path)
        .map_err(|source| IoError::Read { path: path.to_path_buf(), source })?;
    let mut ts = TrackSet::new();
    for (idx, raw) in text.lines().enumerate() {
        let line = idx + 1;
        let trimmed = raw.trim();
        if trimmed.is_empty() || trimmed.starts_with('#') {
            continue;
        }
        let fields: Vec<&str> = trimmed.split(',').collect();
        if fields.len() < 6 {
            return Err(IoError::Parse {
                path: path.to_path_buf(),
                line,
                msg: format!("expected at least 6 fields, got {}", fields.len()),
            });
        }
        let frame: i64 = parse_field(fields[0], "frame number", path, line)?;
        let id: i64 = parse_field(fields[1], "track id", path, line)?;
        let x: f64 = parse_field(fields[2], "x", path, line)?;
        let y: f64 = parse_field(fields[3], "y", path, line)?;
        let w: f64 = parse_field(fields[4], "w", path, line)?;
        let h: f64 = parse_field(fields[5], "h", path, line)?;
        if ts.get(frame, id).is_some() {
            return Err(IoError::DuplicateEntry { path: path.to_path_buf(), line, frame, id });
        }
        ts.insert(frame, id, Rect::new(x, y, w, h));
    }
    Ok(ts)
}

/// Writes finalized tracks as MOT CSV, sorted by `(frame, id)`. Inferred
/// boxes are written with confidence 0; detection boxes carry their
/// detection confidence. Tracks must occupy contiguous frame intervals.
pub fn write_tracks(path: &Path, tracks: &[Track]) -> Result<(), IoError> {
    // frame -> id -> (rect, confidence)
    let mut rows: BTreeMap<i64, BTreeMap<i64, (Rect, f64)>> = BTreeMap::new();
    for track in tracks {
        let mut expected = None;
        for (&frame, tb) in &track.boxes {
            if let Some(e) = expected {
                if frame != e {
                    return Err(IoError::NonContiguousTrack { id: track.id, frame: e });
                }
            }
            expected = Some(frame + 1);
            let conf = match tb.source {
                TrackSource::Detection => tb.confidence,
                _ => 0.0,
            };
            rows.entry(frame).or_default().insert(track.id, (tb.rect, conf));
        }
    }
    let mut text = String::new();
    for (frame, per_id) in rows {
        for (id, (r, conf)) in per_id {
            writeln!(
                text,
                "{},{},{:.6},{:.6},{:.6},{:.6},{:.6},-1,-1,-1",
                frame, id, r.x, r.y, r.w, r.h, conf
            )
            .unwrap();
        }
    }
    write_atomic(path, text.as_bytes())
}

/// Writes bytes to a temp file in the target directory, then renames it
/// into place so readers never observe partial output.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> Result<(), IoError> {
    let wrap = |source| IoError::Read { path: path.to_path_buf(), source };
    let dir = path.parent().unwrap_or_else(|| Path::new("."));
    let tmp = dir.join(format!(
        ".{}.tmp-{}",
        path.file_name().map(|n| n.to_string_lossy().into_owned()).unwrap_or_default(),
        std::process::id()
    ));
    fs::write(&tmp, bytes).map_err(wrap)?;
    fs::rename(&tmp, path).map_err(wrap)
}

/// Fixed integer-weight luma conversion (0.299, 0.587, 0.114), deterministic
/// to the last bit across platforms.
pub fn luma_to_intensity(r: u8, g: u8, b: u8) -> f32 {
    let millis = 299u32 * u32::from(r) + 587 * u32::from(g) + 114 * u32::from(b);
    millis as f32 / 255_000.0
}

fn decode_gray(path: &Path) -> Result<GrayFrame, IoError> {
    let img = image::open(path)
        .map_err(|e| IoError::Image { path: path.to_path_buf(), msg: e.to_string() })?;
    let rgb = img.to_rgb8();
    let (w, h) = (rgb.width() as usize, rgb.height() as usize);
    let mut pixels = Vec::with_capacity(w * h);
    for p in rgb.pixels() {
        pixels.push(luma_to_intensity(p.0[0], p.0[1], p.0[2]));
    }
    Ok(GrayFrame::from_pixels(w, h, pixels))
}

/// Writes a grayscale frame as binary PGM (P5), the cheapest format the
/// synthesiser can emit at volume.
pub fn write_pgm(path: &Path, frame: &GrayFrame) -> Result<(), IoError> {
    let mut bytes = format!("P5\n{} {}\n255\n", frame.width, frame.height).into_bytes();
    bytes.extend(frame.pixels.iter().map(|&v| (v.clamp(0.0, 1.0) * 255.0).round() as u8));
    write_atomic(path, &bytes)
}

const VIDEO_CACHE_FRAMES: usize = 16;

/// Directory of numbered frames, lazily decoded with a small cache.
pub struct VideoSource {
    files: Vec<PathBuf>,
    dims: FrameDims,
    cache: Mutex<BTreeMap<i64, Arc<GrayFrame>>>,
}

impl VideoSource {
    /// Scans a directory for images named by frame number (any zero
    /// padding, extensions png/pgm/ppm), checks the numbering is a gapless
    /// `1..N`, and decodes the first frame to pin the dimensions.
    pub fn open(dir: &Path) -> Result<Self, IoError> {
        let entries = fs::read_dir(dir)
            .map_err(|source| IoError::Read { path: dir.to_path_buf(), source })?;
        let mut numbered: BTreeMap<i64, PathBuf> = BTreeMap::new();
        for entry in entries {
            let entry = entry.map_err(|source| IoError::Read { path: dir.to_path_buf(), source })?;
            let path = entry.path();
            let ext = path.extension().and_then(|e| e.to_str()).map(str::to_ascii_lowercase);
            if !matches!(ext.as_deref(), Some("png" | "pgm" | "ppm")) {
                continue;
            }
            let stem = path.file_stem().and_then(|s| s.to_str()).unwrap_or("");
            if let Ok(n) = stem.parse::<i64>() {
                numbered.insert(n, path);
            }
        }
        if numbered.is_empty() {
            return Err(IoError::EmptyFrameDir { path: dir.to_path_buf() });
        }
        let count = numbered.len();
        for (expect, &have) in (1..=count as i64).zip(numbered.keys()) {
            if have != expect {
                return Err(IoError::NumberingGap {
                    path: dir.to_path_buf(),
                    missing: expect,
                    count,
                });
            }
        }
        let files: Vec<PathBuf> = numbered.into_values().collect();
        let first = decode_gray(&files[0])?;
        let dims = FrameDims::new(first.width as u32, first.height as u32);
        let source = Self { files, dims, cache: Mutex::new(BTreeMap::new()) };
        source.cache.lock().unwrap().insert(1, Arc::new(first));
        Ok(source)
    }
}

impl FrameSource for VideoSource {
    fn dims(&self) -> FrameDims {
        self.dims
    }

    fn num_frames(&self) -> i64 {
        self.files.len() as i64
    }

    fn frame(&self, no: i64) -> Result<Arc<GrayFrame>, IoError> {
        if no < 1 || no > self.num_frames() {
            return Err(IoError::FrameOutOfRange { frame: no, count: self.num_frames() });
        }
        {
            let cache = self.cache.lock().unwrap();
            if let Some(f) = cache.get(&no) {
                return Ok(Arc::clone(f));
            }
        }
        let path = &self.files[(no - 1) as usize];
        let frame = decode_gray(path)?;
        if frame.width as u32 != self.dims.width || frame.height as u32 != self.dims.height {
            return Err(IoError::DimensionMismatch {
                path: path.clone(),
                got_w: frame.width as u32,
                got_h: frame.height as u32,
                want_w: self.dims.width,
                want_h: self.dims.height,
            });
        }
        let frame = Arc::new(frame);
        let mut cache = self.cache.lock().unwrap();
        cache.insert(no, Arc::clone(&frame));
        while cache.len() > VIDEO_CACHE_FRAMES {
            let (&lo, _) = cache.iter().next().unwrap();
            let (&hi, _) = cache.iter().next_back().unwrap();
            let evict = if no - lo >= hi - no { lo } else { hi };
            cache.remove(&evict);
        }
        Ok(frame)
    }
}

/// Why a parameter assignment was rejected.
#[derive(Debug, PartialEq, Eq)]
pub enum ParamError {
    UnknownKey,
    Invalid(String),
}

fn parse_positive(value: &str) -> Result<f64, ParamError> {
    let v: f64 = value
        .parse()
        .map_err(|_| ParamError::Invalid(format!("`{value}` is not a number")))?;
    if v > 0.0 && v.is_finite() {
        Ok(v)
    } else {
        Err(ParamError::Invalid(format!("{v} must be positive")))
    }
}

fn parse_unit(value: &str) -> Result<f64, ParamError> {
    let v: f64 = value
        .parse()
        .map_err(|_| ParamError::Invalid(format!("`{value}` is not a number")))?;
    if (0.0..=1.0).contains(&v) {
        Ok(v)
    } else {
        Err(ParamError::Invalid(format!("{v} outside [0, 1]")))
    }
}

fn parse_nonneg(value: &str) -> Result<f64, ParamError> {
    let v: f64 = value
        .parse()
        .map_err(|_| ParamError::Invalid(format!("`{value}` is not a number")))?;
    if v >= 0.0 && v.is_finite() {
        Ok(v)
    } else {
        Err(ParamError::Invalid(format!("{v} must be non-negative")))
    }
}

fn parse_count(value: &str) -> Result<i64, ParamError> {
    let v: i64 = value
        .parse()
        .map_err(|_| ParamError::Invalid(format!("`{value}` is not an integer")))?;
    if v >= 0 {
        Ok(v)
    } else {
        Err(ParamError::Invalid(format!("{v} must be non-negative")))
    }
}

fn parse_bool(value: &str) -> Result<bool, ParamError> {
    match value.to_ascii_lowercase().as_str() {
        "true" | "1" | "yes" | "on" => Ok(true),
        "false" | "0" | "no" | "off" => Ok(false),
        _ => Err(ParamError::Invalid(format!("`{value}` is not a boolean"))),
    }
}

/// Applies one `key = value` assignment to the parameter set. Shared by
/// the config-file loader and command-line overrides.
pub fn apply_param(params: &mut crate::tracker::RctParams, key: &str, value: &str) -> Result<(), ParamError> {
    use crate::tracker::TrimMode;
    match key {
        "seed_confidence" => params.seed_confidence = parse_unit(value)?,
        "edge_margin_pct" => params.edge_margin_pct = parse_nonneg(value)?,
        "bidirectional_steps" => params.bidirectional_steps = parse_count(value)?,
        "sot_switch_frames" => params.sot_switch_frames = parse_count(value)?,
        "join_overlap_iou" => params.join_overlap_iou = parse_unit(value)?,
        "join_max_gap" => params.join_max_gap = parse_count(value)?,
        "quality_confidence" => params.quality_confidence = parse_unit(value)?,
        "redundancy_iou" => params.redundancy_iou = parse_unit(value)?,
        "offscreen_pct" => params.offscreen_pct = parse_nonneg(value)?,
        "exit_accel" => {
            let v = parse_positive(value)?;
            if v < 1.0 {
                return Err(ParamError::Invalid(format!("{v} must be >= 1")));
            }
            params.exit_accel = v;
        }
        "tail_trim_frames" => {
            let v = parse_count(value)?;
            if v < 1 {
                return Err(ParamError::Invalid("must be >= 1".into()));
            }
            params.tail_trim_frames = v;
        }
        "use_medianflow" => params.use_medianflow = parse_bool(value)?,
        "use_joining" => params.use_joining = parse_bool(value)?,
        "use_size_filter" => params.use_size_filter = parse_bool(value)?,
        "trim_mode" => {
            params.trim_mode = match value {
                "normal" => TrimMode::Normal,
                "no_offscreen" => TrimMode::NoOffscreen,
                "on_touch" => TrimMode::OnTouch,
                "no_onscreen" => TrimMode::NoOnscreen,
                other => {
                    return Err(ParamError::Invalid(format!("`{other}` is not a trim mode")))
                }
            }
        }
        "kalman_transition_position" => {
            let v = parse_positive(value)?;
            params.kalman.transition_cov[(0, 0)] = v;
            params.kalman.transition_cov[(1, 1)] = v;
        }
        "kalman_transition_velocity" => {
            let v = parse_positive(value)?;
            params.kalman.transition_cov[(2, 2)] = v;
            params.kalman.transition_cov[(3, 3)] = v;
        }
        "kalman_transition_size" => {
            let v = parse_positive(value)?;
            params.kalman.transition_cov[(4, 4)] = v;
            params.kalman.transition_cov[(5, 5)] = v;
        }
        "kalman_observation" => {
            let v = parse_positive(value)?;
            for i in 0..4 {
                params.kalman.observation_cov[(i, i)] = v;
            }
        }
        "kalman_initial" => {
            let v = parse_positive(value)?;
            params.kalman.initial_cov = crate::kalman::StateMatrix::identity() * v;
        }
        "mf_grid" => {
            let v = parse_count(value)?;
            if v < 2 {
                return Err(ParamError::Invalid("grid must be >= 2".into()));
            }
            params.medianflow.grid = v as usize;
        }
        "mf_window_half" => {
            let v = parse_count(value)?;
            if v < 1 {
                return Err(ParamError::Invalid("window half-width must be >= 1".into()));
            }
            params.medianflow.window_half = v as usize;
        }
        "mf_levels" => {
            let v = parse_count(value)?;
            if v < 1 {
                return Err(ParamError::Invalid("levels must be >= 1".into()));
            }
            params.medianflow.levels = v as usize;
        }
        "mf_max_iters" => {
            let v = parse_count(value)?;
            if v < 1 {
                return Err(ParamError::Invalid("iteration cap must be >= 1".into()));
            }
            params.medianflow.max_iters = v as usize;
        }
        "mf_epsilon" => params.medianflow.epsilon = parse_positive(value)?,
        "mf_failure_error" => params.medianflow.failure_fb_error = parse_positive(value)?,
        "mf_min_points" => {
            let v = parse_count(value)?;
            if v < 1 {
                return Err(ParamError::Invalid("minimum points must be >= 1".into()));
            }
            params.medianflow.min_points = v as usize;
        }
        _ => return Err(ParamError::UnknownKey),
    }
    Ok(())
}

/// Loads pipeline parameters from `key = value` text, starting from the
/// defaults. Unknown keys and out-of-range values are rejected.
pub fn load_params(path: &Path) -> Result<crate::tracker::RctParams, IoError> {
    let mut params = crate::tracker::RctParams::default();
    for (key, value, line) in parse_key_values(path)? {
        apply_param(&mut params, &key, &value).map_err(|e| match e {
            ParamError::UnknownKey => {
                IoError::UnknownKey { path: path.to_path_buf(), line, key: key.clone() }
            }
            ParamError::Invalid(msg) => IoError::Parse {
                path: path.to_path_buf(),
                line,
                msg: format!("{key}: {msg}"),
            },
        })?;
    }
    Ok(params)
}

/// Raw `key = value` config text, validated against the known key set by
/// the caller.
pub fn parse_key_values(path: &Path) -> Result<Vec<(String, String, usize)>, IoError> {
    let text = fs::read_to_string(path)
        .map_err(|source| IoError::Read { path: path.to_path_buf(), source })?;
    let mut out = Vec::new();
    for (idx, raw) in text.lines().enumerate() {
        let line = idx + 1;
        let trimmed = raw.trim();
        if trimmed.is_empty() || trimmed.starts_with('#') {
            continue;
        }
        let Some((key, value)) = trimmed.split_once('=') else {
            return Err(IoError::Parse {
                path: path.to_path_buf(),
                line,
                msg: "expected `key = value`".into(),
            });
        };
        out.push((key.trim().to_string(), value.trim().to_string(), line));
    }
    Ok(out)
}
