//! Synthetic scenario generator: paired frames, detections, and ground
//! truth with controllable motion, clutter, dropout, and confidence models.
//!
//! Everything is a pure function of the scenario seed, so two generations
//! of the same scenario are byte-identical. Objects are rendered as
//! textured rectangles over a textured background so optical flow has
//! gradients to work with.

use crate::frame::GrayFrame;
use crate::geometry::{intersection_area, FrameDims, Rect};
use crate::io::{Detection, FrameSource, IoError};
use crate::metrics::TrackSet;
use std::collections::BTreeMap;
use std::sync::{Arc, Mutex};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum SynthError {
    #[error("objects {a} and {b} overlap at spawn beyond the configured limit")]
    SpawnOverlap { a: usize, b: usize },
    #[error("invalid scenario: {0}")]
    Invalid(String),
}

/// Deterministic 64-bit generator (splitmix64). Used instead of an external
/// RNG so generated datasets stay byte-stable across platforms and
/// dependency upgrades.
#[derive(Debug, Clone)]
pub struct SplitMix64(u64);

impl SplitMix64 {
    pub fn new(seed: u64) -> Self {
        Self(seed)
    }

    pub fn next_u64(&mut self) -> u64 {
        self.0 = self.0.wrapping_add(0x9e3779b97f4a7c15);
        let mut z = self.0;
        z = (z ^ (z >> 30)).wrapping_mul(0xbf58476d1ce4e5b9);
        z = (z ^ (z >> 27)).wrapping_mul(0x94d049bb133111eb);
        z ^ (z >> 31)
    }

    /// Uniform in `[0, 1)`.
    pub fn next_f64(&mut self) -> f64 {
        (self.next_u64() >> 11) as f64 / (1u64 << 53) as f64
    }

    /// Uniform in `[lo, hi)`.
    pub fn range(&mut self, lo: f64, hi: f64) -> f64 {
        lo + (hi - lo) * self.next_f64()
    }

    /// Gaussian draw via Box-Muller.
    pub fn normal(&mut self, mean: f64, std: f64) -> f64 {
        let u1 = (1.0 - self.next_f64()).max(f64::MIN_POSITIVE);
        let u2 = self.next_f64();
        mean + std * (-2.0 * u1.ln()).sqrt() * (std::f64::consts::TAU * u2).cos()
    }

    /// Poisson count via Knuth's product method; fine for small rates.
    pub fn poisson(&mut self, rate: f64) -> usize {
        if rate <= 0.0 {
            return 0;
        }
        let limit = (-rate).exp();
        let mut k = 0usize;
        let mut p = 1.0;
        loop {
            p *= self.next_f64();
            if p <= limit {
                return k;
            }
            k += 1;
        }
    }
}

fn lattice_hash(ix: i64, iy: i64, seed: u64) -> f64 {
    let mut h = seed ^ (ix as u64).wrapping_mul(0x9e3779b97f4a7c15);
    h ^= (iy as u64).wrapping_mul(0xc2b2ae3d27d4eb4f);
    h = (h ^ (h >> 30)).wrapping_mul(0xbf58476d1ce4e5b9);
    h = (h ^ (h >> 27)).wrapping_mul(0x94d049bb133111eb);
    h ^= h >> 31;
    (h >> 11) as f64 / (1u64 << 53) as f64
}

/// Smooth value noise: bilinear interpolation of hashed lattice values with
/// the given cell size.
pub fn value_noise(x: f64, y: f64, cell: f64, seed: u64) -> f64 {
    let gx = x / cell;
    let gy = y / cell;
    let ix = gx.floor();
    let iy = gy.floor();
    let fx = gx - ix;
    let fy = gy - iy;
    let (ix, iy) = (ix as i64, iy as i64);
    let v00 = lattice_hash(ix, iy, seed);
    let v10 = lattice_hash(ix + 1, iy, seed);
    let v01 = lattice_hash(ix, iy + 1, seed);
    let v11 = lattice_hash(ix + 1, iy + 1, seed);
    (1.0 - fx) * (1.0 - fy) * v00 + fx * (1.0 - fy) * v10 + (1.0 - fx) * fy * v01 + fx * fy * v11
}

/// Two-octave texture in `[0, 1]`: coarse structure so pyramid alignment
/// works, fine structure so subpixel flow converges.
pub fn texture(x: f64, y: f64, seed: u64) -> f64 {
    0.65 * value_noise(x, y, 8.0, seed) + 0.35 * value_noise(x, y, 3.0, seed ^ 0x5bd1e995)
}

/// Closed-form motion of an object center as a function of frames since
/// spawn.
#[derive(Debug, Clone, PartialEq)]
pub enum Motion {
    /// `p(t) = start + t * velocity`.
    Linear { start: (f64, f64), velocity: (f64, f64) },
    /// Direction-changing path: `x(t) = x0 + vx * t`,
    /// `y(t) = y0 + amplitude * sin(2 pi t / period)`.
    Sinusoidal { start: (f64, f64), velocity_x: f64, amplitude: f64, period: f64 },
}

impl Motion {
    pub fn position(&self, t: f64) -> (f64, f64) {
        match *self {
            Motion::Linear { start, velocity } => {
                (start.0 + velocity.0 * t, start.1 + velocity.1 * t)
            }
            Motion::Sinusoidal { start, velocity_x, amplitude, period } => (
                start.0 + velocity_x * t,
                start.1 + amplitude * (std::f64::consts::TAU * t / period).sin(),
            ),
        }
    }

    /// Linear motion aimed at the left frame edge.
    pub fn exit_left(start: (f64, f64), speed: f64) -> Self {
        Motion::Linear { start, velocity: (-speed.abs(), 0.0) }
    }

    pub fn exit_right(start: (f64, f64), speed: f64) -> Self {
        Motion::Linear { start, velocity: (speed.abs(), 0.0) }
    }

    pub fn exit_top(start: (f64, f64), speed: f64) -> Self {
        Motion::Linear { start, velocity: (0.0, -speed.abs()) }
    }

    pub fn exit_bottom(start: (f64, f64), speed: f64) -> Self {
        Motion::Linear { start, velocity: (0.0, speed.abs()) }
    }

    /// Two linear paths whose centers coincide at `meet` frames after
    /// spawn: one moving right, one moving left at the same height.
    pub fn crossing_pair(center: (f64, f64), speed: f64, meet: f64) -> (Self, Self) {
        let a = Motion::Linear {
            start: (center.0 - speed * meet, center.1 - 0.0),
            velocity: (speed, 0.0),
        };
        let b = Motion::Linear {
            start: (center.0 + speed * meet, center.1 + 0.0),
            velocity: (-speed, 0.0),
        };
        (a, b)
    }
}

/// One scripted object.
#[derive(Debug, Clone, PartialEq)]
pub struct ObjectSpec {
    /// First and last frame (inclusive, 1-based) the object exists.
    pub spawn: i64,
    pub despawn: i64,
    pub motion: Motion,
    pub width: f64,
    pub height: f64,
    /// Per-frame size multiplier; 1.0 keeps the object constant.
    pub scale_rate: f64,
    pub texture_seed: u64,
    /// Frame ranges (inclusive) with no detections emitted.
    pub detection_gaps: Vec<(i64, i64)>,
    /// Frame ranges (inclusive) where the object is hidden: not rendered
    /// and not detected, while ground truth continues.
    pub occlusions: Vec<(i64, i64)>,
    /// Frame ranges (inclusive) whose detections get a fixed confidence
    /// instead of a drawn one, for low-confidence-bridge scenes.
    pub conf_overrides: Vec<(i64, i64, f64)>,
}

impl ObjectSpec {
    pub fn new(spawn: i64, despawn: i64, motion: Motion, width: f64, height: f64) -> Self {
        Self {
            spawn,
            despawn,
            motion,
            width,
            height,
            scale_rate: 1.0,
            texture_seed: 0,
            detection_gaps: Vec::new(),
            occlusions: Vec::new(),
            conf_overrides: Vec::new(),
        }
    }

    fn alive(&self, frame: i64) -> bool {
        frame >= self.spawn && frame <= self.despawn
    }

    fn occluded(&self, frame: i64) -> bool {
        self.occlusions.iter().any(|&(a, b)| frame >= a && frame <= b)
    }

    fn in_gap(&self, frame: i64) -> bool {
        self.detection_gaps.iter().any(|&(a, b)| frame >= a && frame <= b)
    }

    /// Ground-truth box at an absolute frame number.
    pub fn gt_box(&self, frame: i64) -> Rect {
        let t = (frame - self.spawn) as f64;
        let (cx, cy) = self.motion.position(t);
        let s = self.scale_rate.powf(t);
        Rect::from_center(cx, cy, self.width * s, self.height * s)
    }
}

/// Gaussian confidence model clamped to `[0, 1]`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ConfidenceModel {
    pub mean: f64,
    pub spread: f64,
}

impl ConfidenceModel {
    pub fn draw(&self, rng: &mut SplitMix64) -> f64 {
        rng.normal(self.mean, self.spread).clamp(0.0, 1.0)
    }
}

/// Declarative description of a synthetic scene.
#[derive(Debug, Clone, PartialEq)]
pub struct Scenario {
    pub seed: u64,
    pub dims: FrameDims,
    /// Frames numbered `1..=frames`.
    pub frames: i64,
    pub objects: Vec<ObjectSpec>,
    /// Expected clutter detections per frame (Poisson).
    pub clutter_rate: f64,
    /// Probability a true detection is dropped.
    pub dropout: f64,
    /// Standard deviation of detection position noise in pixels.
    pub jitter: f64,
    pub true_conf: ConfidenceModel,
    pub clutter_conf: ConfidenceModel,
    /// Rejection-sample clutter so it never overlaps a ground-truth box.
    pub clutter_avoid_objects: bool,
    /// Object texture contrast in `[0, 1]`; low values starve optical flow.
    pub contrast: f64,
    /// Maximum tolerated overlap fraction between object boxes at spawn.
    pub max_spawn_overlap: f64,
}

impl Scenario {
    pub fn new(seed: u64, dims: FrameDims, frames: i64) -> Self {
        Self {
            seed,
            dims,
            frames,
            objects: Vec::new(),
            clutter_rate: 0.0,
            dropout: 0.0,
            jitter: 1.0,
            true_conf: ConfidenceModel { mean: 0.8, spread: 0.08 },
            clutter_conf: ConfidenceModel { mean: 0.15, spread: 0.08 },
            clutter_avoid_objects: true,
            contrast: 1.0,
            max_spawn_overlap: 0.0,
        }
    }

    fn validate(&self) -> Result<(), SynthError> {
        if self.frames < 1 {
            return Err(SynthError::Invalid("scenario needs at least one frame".into()));
        }
        for (i, a) in self.objects.iter().enumerate() {
            if a.spawn < 1 || a.despawn > self.frames || a.spawn > a.despawn {
                return Err(SynthError::Invalid(format!(
                    "object {i} lifetime {}..{} outside 1..{}",
                    a.spawn, a.despawn, self.frames
                )));
            }
            for (j, b) in self.objects.iter().enumerate().skip(i + 1) {
                let f = a.spawn.max(b.spawn);
                if f > a.despawn.min(b.despawn) {
                    continue;
                }
                let ra = a.gt_box(f);
                let rb = b.gt_box(f);
                let inter = intersection_area(&ra, &rb);
                let denom = ra.area().min(rb.area());
                if denom > 0.0 && inter / denom > self.max_spawn_overlap {
                    return Err(SynthError::SpawnOverlap { a: i, b: j });
                }
            }
        }
        Ok(())
    }

    /// Ground truth for every object over its lifetime (ids are 1-based
    /// object indices).
    pub fn ground_truth(&self) -> TrackSet {
        let mut ts = TrackSet::new();
        for (i, obj) in self.objects.iter().enumerate() {
            for f in obj.spawn..=obj.despawn {
                ts.insert(f, (i + 1) as i64, obj.gt_box(f));
            }
        }
        ts
    }

    /// Detections for the whole scene. Object detections and clutter come
    /// from independent deterministic streams, so enabling clutter never
    /// changes the object detections.
    pub fn detections(&self) -> Vec<Detection> {
        let mut rng_obj = SplitMix64::new(self.seed ^ 0x0bea_7500_d1ce_0001);
        let mut rng_clu = SplitMix64::new(self.seed ^ 0xc1a7_7e50_0000_0002);
        let mut out = Vec::new();
        for f in 1..=self.frames {
            let gt_boxes: Vec<Rect> = self
                .objects
                .iter()
                .filter(|o| o.alive(f))
                .map(|o| o.gt_box(f))
                .collect();
            for obj in &self.objects {
                if !obj.alive(f) || obj.occluded(f) || obj.in_gap(f) {
                    continue;
                }
                // Draws happen unconditionally per live frame so changing
                // the dropout rate does not reshuffle later frames' noise.
                let jx = rng_obj.normal(0.0, self.jitter);
                let jy = rng_obj.normal(0.0, self.jitter);
                let jw = rng_obj.normal(0.0, self.jitter * 0.5);
                let jh = rng_obj.normal(0.0, self.jitter * 0.5);
                let drawn = self.true_conf.draw(&mut rng_obj);
                let dropped = rng_obj.next_f64() < self.dropout;
                if dropped {
                    continue;
                }
                let conf = obj
                    .conf_overrides
                    .iter()
                    .find(|&&(a, b, _)| f >= a && f <= b)
                    .map(|&(_, _, c)| c)
                    .unwrap_or(drawn);
                let gt = obj.gt_box(f);
                let rect = Rect::new(
                    gt.x + jx,
                    gt.y + jy,
                    (gt.w + jw).max(2.0),
                    (gt.h + jh).max(2.0),
                );
                out.push(Detection { frame: f, rect, confidence: conf });
            }
            let count = rng_clu.poisson(self.clutter_rate);
            for _ in 0..count {
                let mut placed = None;
                for _attempt in 0..32 {
                    let w = rng_clu.range(10.0, 50.0);
                    let h = rng_clu.range(10.0, 50.0);
                    let x = rng_clu.range(0.0, f64::from(self.dims.width) - w);
                    let y = rng_clu.range(0.0, f64::from(self.dims.height) - h);
                    let rect = Rect::new(x, y, w, h);
                    let clear = !self.clutter_avoid_objects
                        || gt_boxes.iter().all(|g| intersection_area(g, &rect) == 0.0);
                    if clear {
                        placed = Some(rect);
                        break;
                    }
                }
                if let Some(rect) = placed {
                    let conf = self.clutter_conf.draw(&mut rng_clu);
                    out.push(Detection { frame: f, rect, confidence: conf });
                }
            }
        }
        out
    }

    /// Static background texture shared by every frame.
    pub fn render_background(&self) -> GrayFrame {
        let w = self.dims.width as usize;
        let h = self.dims.height as usize;
        let mut img = GrayFrame::new(w, h);
        let bg_seed = self.seed ^ 0xba5e_ba11;
        for y in 0..h {
            for x in 0..w {
                let v = 0.3 + 0.4 * texture(x as f64, y as f64, bg_seed);
                img.set(x, y, v as f32);
            }
        }
        img
    }

    /// Renders one frame. Pure function of the scenario and frame number.
    pub fn render_frame(&self, frame: i64) -> GrayFrame {
        self.render_frame_over(&self.render_background(), frame)
    }

    /// Renders one frame on top of a prebuilt background, the cheap path
    /// when many frames are produced.
    pub fn render_frame_over(&self, background: &GrayFrame, frame: i64) -> GrayFrame {
        let w = self.dims.width as usize;
        let h = self.dims.height as usize;
        debug_assert_eq!((background.width, background.height), (w, h));
        let mut img = background.clone();
        for (i, obj) in self.objects.iter().enumerate() {
            if !obj.alive(frame) {
                continue;
            }
            if obj.occluded(frame) {
                // A featureless occluder sits in front of the object:
                // nothing to detect and nothing for optical flow to grip.
                let b = obj.gt_box(frame).enlarge(30.0);
                let x0 = b.x.floor().max(0.0) as usize;
                let y0 = b.y.floor().max(0.0) as usize;
                let x1 = ((b.x + b.w).ceil().min(w as f64)).max(0.0) as usize;
                let y1 = ((b.y + b.h).ceil().min(h as f64)).max(0.0) as usize;
                for y in y0..y1 {
                    for x in x0..x1 {
                        img.set(x, y, 0.5);
                    }
                }
                continue;
            }
            let b = obj.gt_box(frame);
            let seed = obj.texture_seed ^ self.seed.rotate_left(17) ^ ((i as u64) << 32);
            let scale = obj.scale_rate.powf((frame - obj.spawn) as f64);
            let x0 = b.x.floor().max(0.0) as usize;
            let y0 = b.y.floor().max(0.0) as usize;
            let x1 = ((b.x + b.w).ceil().min(w as f64)).max(0.0) as usize;
            let y1 = ((b.y + b.h).ceil().min(h as f64)).max(0.0) as usize;
            for y in y0..y1 {
                for x in x0..x1 {
                    let px = x as f64 + 0.5;
                    let py = y as f64 + 0.5;
                    if px < b.x || px > b.x + b.w || py < b.y || py > b.y + b.h {
                        continue;
                    }
                    // Texture in object-local coordinates so it travels and
                    // stretches with the box.
                    let lx = (px - b.x) / scale;
                    let ly = (py - b.y) / scale;
                    let t = texture(lx, ly, seed);
                    let v = 0.5 + self.contrast * (t - 0.5);
                    img.set(x, y, v.clamp(0.0, 1.0) as f32);
                }
            }
        }
        img
    }

    /// Validates the scenario and bundles detections, ground truth, and a
    /// renderable frame source.
    pub fn generate(&self) -> Result<(SyntheticVideo, Vec<Detection>, TrackSet), SynthError> {
        self.validate()?;
        Ok((SyntheticVideo::new(self.clone()), self.detections(), self.ground_truth()))
    }
}

fn field_err(path: &std::path::Path, line: usize, msg: String) -> IoError {
    IoError::Parse { path: path.to_path_buf(), line, msg }
}

fn parse_pair(s: &str) -> Option<(f64, f64)> {
    let (a, b) = s.split_once(',')?;
    Some((a.trim().parse().ok()?, b.trim().parse().ok()?))
}

fn parse_ranges(s: &str) -> Option<Vec<(i64, i64)>> {
    s.split(';')
        .map(|r| {
            let (a, b) = r.split_once('-')?;
            Some((a.trim().parse().ok()?, b.trim().parse().ok()?))
        })
        .collect()
}

fn parse_object(value: &str) -> Result<ObjectSpec, String> {
    let mut kv = BTreeMap::new();
    for part in value.split_whitespace() {
        let (k, v) = part.split_once('=').ok_or_else(|| format!("`{part}` is not key=value"))?;
        kv.insert(k.to_string(), v.to_string());
    }
    let get = |k: &str| kv.get(k).ok_or_else(|| format!("object is missing `{k}`"));
    let pair = |k: &str| -> Result<(f64, f64), String> {
        parse_pair(get(k)?).ok_or_else(|| format!("`{k}` must be two numbers"))
    };
    let num = |k: &str| -> Result<f64, String> {
        get(k)?.parse().map_err(|_| format!("`{k}` must be a number"))
    };
    let int = |k: &str| -> Result<i64, String> {
        get(k)?.parse().map_err(|_| format!("`{k}` must be an integer"))
    };

    let start = pair("start")?;
    let motion = match get("motion")?.as_str() {
        "linear" => Motion::Linear { start, velocity: pair("vel")? },
        "sine" => Motion::Sinusoidal {
            start,
            velocity_x: num("velx")?,
            amplitude: num("amp")?,
            period: num("period")?,
        },
        "exit-left" => Motion::exit_left(start, num("speed")?),
        "exit-right" => Motion::exit_right(start, num("speed")?),
        "exit-top" => Motion::exit_top(start, num("speed")?),
        "exit-bottom" => Motion::exit_bottom(start, num("speed")?),
        other => return Err(format!("unknown motion `{other}`")),
    };
    let (w, h) = pair("size")?;
    let mut obj = ObjectSpec::new(int("spawn")?, int("despawn")?, motion, w, h);
    if let Some(v) = kv.get("scale") {
        obj.scale_rate = v.parse().map_err(|_| "`scale` must be a number".to_string())?;
    }
    if let Some(v) = kv.get("texture") {
        obj.texture_seed = v.parse().map_err(|_| "`texture` must be an integer".to_string())?;
    }
    if let Some(v) = kv.get("gaps") {
        obj.detection_gaps = parse_ranges(v).ok_or("`gaps` must look like 10-19;40-44")?;
    }
    if let Some(v) = kv.get("occl") {
        obj.occlusions = parse_ranges(v).ok_or("`occl` must look like 10-19;40-44")?;
    }
    if let Some(v) = kv.get("lowconf") {
        obj.conf_overrides = v
            .split(';')
            .map(|part| {
                let (range, conf) = part.split_once(':')?;
                let (a, b) = range.split_once('-')?;
                Some((a.trim().parse().ok()?, b.trim().parse().ok()?, conf.trim().parse().ok()?))
            })
            .collect::<Option<Vec<_>>>()
            .ok_or("`lowconf` must look like 10-19:0.2;40-44:0.1")?;
    }
    Ok(obj)
}

/// Loads a scenario from `key = value` text. Objects appear as repeated
/// `object = motion=... start=...` lines; see the repository README for
/// the full grammar.
pub fn parse_scenario_file(path: &std::path::Path) -> Result<Scenario, IoError> {
    let mut sc = Scenario::new(0, FrameDims::new(640, 480), 1);
    let mut width = 640u32;
    let mut height = 480u32;
    for (key, value, line) in crate::io::parse_key_values(path)? {
        let bad = |msg: String| field_err(path, line, msg);
        let f = |v: &str| -> Result<f64, IoError> {
            v.parse().map_err(|_| field_err(path, line, format!("`{v}` is not a number")))
        };
        match key.as_str() {
            "seed" => sc.seed = value.parse().map_err(|_| bad("seed must be an integer".into()))?,
            "width" => width = value.parse().map_err(|_| bad("width must be an integer".into()))?,
            "height" => {
                height = value.parse().map_err(|_| bad("height must be an integer".into()))?
            }
            "frames" => {
                sc.frames = value.parse().map_err(|_| bad("frames must be an integer".into()))?
            }
            "clutter_rate" => sc.clutter_rate = f(&value)?,
            "dropout" => sc.dropout = f(&value)?,
            "jitter" => sc.jitter = f(&value)?,
            "true_conf_mean" => sc.true_conf.mean = f(&value)?,
            "true_conf_spread" => sc.true_conf.spread = f(&value)?,
            "clutter_conf_mean" => sc.clutter_conf.mean = f(&value)?,
            "clutter_conf_spread" => sc.clutter_conf.spread = f(&value)?,
            "clutter_avoid_objects" => {
                sc.clutter_avoid_objects = value
                    .parse()
                    .map_err(|_| bad("clutter_avoid_objects must be true/false".into()))?
            }
            "contrast" => sc.contrast = f(&value)?,
            "max_spawn_overlap" => sc.max_spawn_overlap = f(&value)?,
            "object" => sc.objects.push(parse_object(&value).map_err(bad)?),
            other => {
                return Err(IoError::UnknownKey {
                    path: path.to_path_buf(),
                    line,
                    key: other.to_string(),
                })
            }
        }
    }
    if width == 0 || height == 0 {
        return Err(field_err(path, 0, "frame dimensions must be positive".into()));
    }
    sc.dims = FrameDims::new(width, height);
    Ok(sc)
}

const SYNTH_CACHE_FRAMES: usize = 12;

/// In-memory frame source rendering scenario frames on demand, with a small
/// cache sized for the sequential access patterns the tracker produces.
pub struct SyntheticVideo {
    scenario: Scenario,
    background: std::sync::OnceLock<GrayFrame>,
    cache: Mutex<BTreeMap<i64, Arc<GrayFrame>>>,
}

impl SyntheticVideo {
    pub fn new(scenario: Scenario) -> Self {
        Self { scenario, background: std::sync::OnceLock::new(), cache: Mutex::new(BTreeMap::new()) }
    }

    pub fn scenario(&self) -> &Scenario {
        &self.scenario
    }
}

impl FrameSource for SyntheticVideo {
    fn dims(&self) -> FrameDims {
        self.scenario.dims
    }

    fn num_frames(&self) -> i64 {
        self.scenario.frames
    }

    fn frame(&self, no: i64) -> Result<Arc<GrayFrame>, IoError> {
        if no < 1 || no > self.scenario.frames {
            return Err(IoError::FrameOutOfRange { frame: no, count: self.scenario.frames });
        }
        let mut cache = self.cache.lock().unwrap();
        if let Some(f) = cache.get(&no) {
            return Ok(Arc::clone(f));
        }
        let bg = self.background.get_or_init(|| self.scenario.render_background());
        let rendered = Arc::new(self.scenario.render_frame_over(bg, no));
        cache.insert(no, Arc::clone(&rendered));
        while cache.len() > SYNTH_CACHE_FRAMES {
            // Evict the cached frame farthest from the one just requested.
            let (&lo, _) = cache.iter().next().unwrap();
            let (&hi, _) = cache.iter().next_back().unwrap();
            let evict = if no - lo >= hi - no { lo } else { hi };
            cache.remove(&evict);
        }
        Ok(rendered)
    }
}
