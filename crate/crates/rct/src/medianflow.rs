//! MedianFlow single-object tracking: pyramidal Lucas-Kanade point flow
//! with forward-backward error filtering and median box updates.
//!
//! The tracker reports its own failure, which is what makes it usable as a
//! fallback: callers get either a box or `Failure`, never both.

use crate::frame::GrayFrame;
use crate::geometry::Rect;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum FlowError {
    #[error("frame {width}x{height} too small for {levels} pyramid levels")]
    FrameTooSmall { width: usize, height: usize, levels: usize },
}

/// Tuning knobs for the tracker. Defaults are the community-standard
/// MedianFlow settings.
#[derive(Debug, Clone, PartialEq)]
pub struct MedianFlowConfig {
    /// Points seeded per axis inside the box (grid x grid total).
    pub grid: usize,
    /// Half-width of the Lucas-Kanade integration window (window is
    /// `2 * half + 1` pixels square).
    pub window_half: usize,
    /// Pyramid levels used for coarse-to-fine tracking.
    pub levels: usize,
    /// Iteration cap per pyramid level.
    pub max_iters: usize,
    /// Convergence epsilon in pixels for the incremental flow update.
    pub epsilon: f64,
    /// Median forward-backward error (pixels) above which tracking fails.
    pub failure_fb_error: f64,
    /// Minimum surviving points below which tracking fails.
    pub min_points: usize,
}

impl Default for MedianFlowConfig {
    fn default() -> Self {
        Self {
            grid: 10,
            window_half: 5,
            levels: 3,
            max_iters: 20,
            epsilon: 0.03,
            failure_fb_error: 10.0,
            min_points: 10,
        }
    }
}

/// One point tracked between two frames.
#[derive(Debug, Clone, Copy)]
pub struct FlowPoint {
    pub src: (f64, f64),
    pub dst: (f64, f64),
    pub fb_error: f64,
    pub valid: bool,
}

/// Outcome of tracking a box between two frames.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum SotResult {
    Tracked(Rect),
    Failure,
}

impl SotResult {
    pub fn as_rect(&self) -> Option<&Rect> {
        match self {
            SotResult::Tracked(r) => Some(r),
            SotResult::Failure => None,
        }
    }
}

/// Image pyramid: level 0 is the input, each later level is a 2x
/// box-average downsample.
#[derive(Debug, Clone)]
pub struct Pyramid {
    pub levels: Vec<GrayFrame>,
}

/// Builds a pyramid with `levels` levels.
pub fn pyramid(frame: &GrayFrame, levels: usize) -> Result<Pyramid, FlowError> {
    assert!(levels >= 1, "pyramid needs at least one level");
    let min_dim = 1usize << (levels - 1);
    if frame.width < min_dim || frame.height < min_dim {
        return Err(FlowError::FrameTooSmall {
            width: frame.width,
            height: frame.height,
            levels,
        });
    }
    let mut out = Vec::with_capacity(levels);
    out.push(frame.clone());
    for l in 1..levels {
        let prev = &out[l - 1];
        let w = prev.width / 2;
        let h = prev.height / 2;
        let mut next = GrayFrame::new(w, h);
        for y in 0..h {
            for x in 0..w {
                let s = prev.get(2 * x, 2 * y)
                    + prev.get(2 * x + 1, 2 * y)
                    + prev.get(2 * x, 2 * y + 1)
                    + prev.get(2 * x + 1, 2 * y + 1);
                next.set(x, y, s * 0.25);
            }
        }
        out.push(next);
    }
    Ok(Pyramid { levels: out })
}

/// Tracks a single point from `prev` to `next` with iterative pyramidal
/// Lucas-Kanade. Returns `None` when the spatial-gradient system is
/// near-singular or the iteration leaves the frame.
pub fn lk_track_point(
    prev: &Pyramid,
    next: &Pyramid,
    p: (f64, f64),
    cfg: &MedianFlowConfig,
) -> Option<(f64, f64)> {
    let hw = cfg.window_half as i64;
    let levels = prev.levels.len();
    let side = (2 * hw + 1) as usize;
    let gside = side + 2;
    let mut prev_patch = vec![0.0f64; gside * gside];
    let mut next_patch = vec![0.0f64; side * side];
    let mut grads = vec![(0.0f64, 0.0f64); side * side];
    let mut dx = 0.0f64;
    let mut dy = 0.0f64;

    for level in (0..levels).rev() {
        let scale = 1.0 / f64::from(1u32 << level);
        let px = p.0 * scale;
        let py = p.1 * scale;
        let prev_img = &prev.levels[level];
        let next_img = &next.levels[level];
        // Carry the coarser level's flow estimate into this level's
        // coordinates.
        if level != levels - 1 {
            dx *= 2.0;
            dy *= 2.0;
        }

        // One interpolated patch of the previous frame (with a one-pixel
        // margin) supplies both the template and its central-difference
        // gradients.
        sample_patch(prev_img, px, py, hw + 1, &mut prev_patch);
        let mut g11 = 0.0f64;
        let mut g12 = 0.0f64;
        let mut g22 = 0.0f64;
        for row in 0..side {
            for col in 0..side {
                let c = (row + 1) * gside + (col + 1);
                let ix = (prev_patch[c + 1] - prev_patch[c - 1]) * 0.5;
                let iy = (prev_patch[c + gside] - prev_patch[c - gside]) * 0.5;
                g11 += ix * ix;
                g12 += ix * iy;
                g22 += iy * iy;
                grads[row * side + col] = (ix, iy);
            }
        }
        let det = g11 * g22 - g12 * g12;
        if det < 1e-10 {
            return None;
        }
        let inv_det = 1.0 / det;

        for _ in 0..cfg.max_iters {
            sample_patch(next_img, px + dx, py + dy, hw, &mut next_patch);
            let mut bx = 0.0f64;
            let mut by = 0.0f64;
            for row in 0..side {
                for col in 0..side {
                    let it =
                        next_patch[row * side + col] - prev_patch[(row + 1) * gside + col + 1];
                    let (ix, iy) = grads[row * side + col];
                    bx += ix * it;
                    by += iy * it;
                }
            }
            let step_x = inv_det * (g22 * bx - g12 * by);
            let step_y = inv_det * (g11 * by - g12 * bx);
            dx -= step_x;
            dy -= step_y;
            if step_x * step_x + step_y * step_y < cfg.epsilon * cfg.epsilon {
                break;
            }
        }

        let tx = px + dx;
        let ty = py + dy;
        if tx < -1.0
            || ty < -1.0
            || tx > prev_img.width as f64
            || ty > prev_img.height as f64
        {
            return None;
        }
    }

    Some((p.0 + dx, p.1 + dy))
}

/// Fills `out` (a `(2*half+1)^2` row-major patch) with bilinear samples of
/// the window centered at `(cx, cy)`. All samples share one fractional
/// offset, so the four interpolation weights are computed once; windows
/// fully inside the frame take a branch-free path over raw rows.
fn sample_patch(img: &GrayFrame, cx: f64, cy: f64, half: i64, out: &mut [f64]) {
    let side = (2 * half + 1) as usize;
    debug_assert_eq!(out.len(), side * side);
    let fx = cx.floor();
    let fy = cy.floor();
    let ax = cx - fx;
    let ay = cy - fy;
    let bx = fx as i64;
    let by = fy as i64;
    let w00 = (1.0 - ax) * (1.0 - ay);
    let w10 = ax * (1.0 - ay);
    let w01 = (1.0 - ax) * ay;
    let w11 = ax * ay;

    let x0 = bx - half;
    let y0 = by - half;
    let interior = x0 >= 0
        && y0 >= 0
        && (bx + half + 1) < img.width as i64
        && (by + half + 1) < img.height as i64;
    if interior {
        for row in 0..side {
            let base = (y0 as usize + row) * img.width + x0 as usize;
            let top = &img.pixels[base..base + side + 1];
            let bottom = &img.pixels[base + img.width..base + img.width + side + 1];
            let dst = &mut out[row * side..(row + 1) * side];
            for col in 0..side {
                dst[col] = w00 * f64::from(top[col])
                    + w10 * f64::from(top[col + 1])
                    + w01 * f64::from(bottom[col])
                    + w11 * f64::from(bottom[col + 1]);
            }
        }
    } else {
        for row in 0..side {
            let y = y0 + row as i64;
            for col in 0..side {
                let x = x0 + col as i64;
                out[row * side + col] = w00 * f64::from(img.get_clamped(x, y))
                    + w10 * f64::from(img.get_clamped(x + 1, y))
                    + w01 * f64::from(img.get_clamped(x, y + 1))
                    + w11 * f64::from(img.get_clamped(x + 1, y + 1));
            }
        }
    }
}

fn median(values: &mut [f64]) -> f64 {
    debug_assert!(!values.is_empty());
    values.sort_by(|a, b| a.total_cmp(b));
    let n = values.len();
    if n % 2 == 1 {
        values[n / 2]
    } else {
        0.5 * (values[n / 2 - 1] + values[n / 2])
    }
}

/// Tracks every grid point of `bbox` through prebuilt pyramids.
pub fn flow_points(
    prev: &Pyramid,
    next: &Pyramid,
    bbox: &Rect,
    cfg: &MedianFlowConfig,
) -> Vec<FlowPoint> {
    let mut points = Vec::with_capacity(cfg.grid * cfg.grid);
    for gy in 0..cfg.grid {
        for gx in 0..cfg.grid {
            let sx = bbox.x + bbox.w * (gx as f64 + 0.5) / cfg.grid as f64;
            let sy = bbox.y + bbox.h * (gy as f64 + 0.5) / cfg.grid as f64;
            let src = (sx, sy);
            match lk_track_point(prev, next, src, cfg) {
                Some(dst) => {
                    let fb = match lk_track_point(next, prev, dst, cfg) {
                        Some(back) => (back.0 - sx).hypot(back.1 - sy),
                        None => f64::INFINITY,
                    };
                    points.push(FlowPoint { src, dst, fb_error: fb, valid: fb.is_finite() });
                }
                None => points.push(FlowPoint { src, dst: src, fb_error: f64::INFINITY, valid: false }),
            }
        }
    }
    points
}

/// Tracks a box from `prev` to `next` using prebuilt pyramids.
pub fn track_box_pyramids(
    prev: &Pyramid,
    next: &Pyramid,
    bbox: &Rect,
    cfg: &MedianFlowConfig,
) -> SotResult {
    if bbox.is_degenerate() {
        return SotResult::Failure;
    }
    let points = flow_points(prev, next, bbox, cfg);
    let valid: Vec<&FlowPoint> = points.iter().filter(|p| p.valid).collect();
    if valid.len() < cfg.min_points {
        return SotResult::Failure;
    }

    // Keep the half of the points with forward-backward error at or below
    // the median.
    let mut fb: Vec<f64> = valid.iter().map(|p| p.fb_error).collect();
    let med_fb = median(&mut fb);
    let kept: Vec<&FlowPoint> = valid.into_iter().filter(|p| p.fb_error <= med_fb).collect();
    if kept.len() < cfg.min_points {
        return SotResult::Failure;
    }
    let mut kept_fb: Vec<f64> = kept.iter().map(|p| p.fb_error).collect();
    if median(&mut kept_fb) > cfg.failure_fb_error {
        return SotResult::Failure;
    }

    let mut dxs: Vec<f64> = kept.iter().map(|p| p.dst.0 - p.src.0).collect();
    let mut dys: Vec<f64> = kept.iter().map(|p| p.dst.1 - p.src.1).collect();
    let shift = (median(&mut dxs), median(&mut dys));

    // Scale change is the median ratio of pairwise point distances.
    let mut ratios = Vec::with_capacity(kept.len() * (kept.len() - 1) / 2);
    for i in 0..kept.len() {
        for j in (i + 1)..kept.len() {
            let d0 = (kept[i].src.0 - kept[j].src.0).hypot(kept[i].src.1 - kept[j].src.1);
            let d1 = (kept[i].dst.0 - kept[j].dst.0).hypot(kept[i].dst.1 - kept[j].dst.1);
            if d0 > 1e-9 {
                ratios.push(d1 / d0);
            }
        }
    }
    let scale = if ratios.is_empty() { 1.0 } else { median(&mut ratios) };

    let (cx, cy) = bbox.center();
    SotResult::Tracked(Rect::from_center(
        cx + shift.0,
        cy + shift.1,
        bbox.w * scale,
        bbox.h * scale,
    ))
}

/// Tracks a box between two raw frames, building pyramids internally.
pub fn track_box(
    prev: &GrayFrame,
    next: &GrayFrame,
    bbox: &Rect,
    cfg: &MedianFlowConfig,
) -> Result<SotResult, FlowError> {
    let p0 = pyramid(prev, cfg.levels)?;
    let p1 = pyramid(next, cfg.levels)?;
    Ok(track_box_pyramids(&p0, &p1, bbox, cfg))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::synth::texture;

    fn textured_frame(w: usize, h: usize, shift: (f64, f64), seed: u64) -> GrayFrame {
        let mut f = GrayFrame::new(w, h);
        for y in 0..h {
            for x in 0..w {
                let v = texture(x as f64 - shift.0, y as f64 - shift.1, seed);
                f.set(x, y, v as f32);
            }
        }
        f
    }

    /// Textured square object rendered in object-local coordinates over a
    /// textured background, so the object pattern travels with its origin.
    fn frame_with_object(
        w: usize,
        h: usize,
        origin: (f64, f64),
        size: f64,
        scale: f64,
        seed: u64,
    ) -> GrayFrame {
        let mut f = textured_frame(w, h, (0.0, 0.0), seed);
        for y in 0..h {
            for x in 0..w {
                let px = x as f64 + 0.5;
                let py = y as f64 + 0.5;
                if px >= origin.0
                    && px <= origin.0 + size * scale
                    && py >= origin.1
                    && py <= origin.1 + size * scale
                {
                    let lx = (px - origin.0) / scale;
                    let ly = (py - origin.1) / scale;
                    f.set(x, y, texture(lx, ly, seed ^ 0xdead) as f32);
                }
            }
        }
        f
    }

    #[test]
    fn pyramid_sizes_and_constant_frames() {
        let f = GrayFrame::from_pixels(64, 64, vec![0.25; 64 * 64]);
        let p = pyramid(&f, 3).unwrap();
        assert_eq!(p.levels.len(), 3);
        assert_eq!((p.levels[0].width, p.levels[0].height), (64, 64));
        assert_eq!((p.levels[1].width, p.levels[1].height), (32, 32));
        assert_eq!((p.levels[2].width, p.levels[2].height), (16, 16));
        for l in &p.levels {
            assert!(l.pixels.iter().all(|&v| (v - 0.25).abs() < 1e-6));
        }
    }

    #[test]
    fn pyramid_checkerboard_averages() {
        let f = GrayFrame::from_pixels(2, 2, vec![0.0, 1.0, 1.0, 0.0]);
        let p = pyramid(&f, 2).unwrap();
        assert_eq!((p.levels[1].width, p.levels[1].height), (1, 1));
        assert!((p.levels[1].get(0, 0) - 0.5).abs() < 1e-6);
    }

    #[test]
    fn pyramid_rejects_tiny_frames() {
        let f = GrayFrame::new(3, 3);
        assert!(pyramid(&f, 3).is_err());
    }

    #[test]
    fn lk_identical_frames_no_motion() {
        let f = textured_frame(64, 64, (0.0, 0.0), 7);
        let p = pyramid(&f, 3).unwrap();
        let cfg = MedianFlowConfig::default();
        let out = lk_track_point(&p, &p, (32.0, 32.0), &cfg).unwrap();
        assert!((out.0 - 32.0).abs() < 0.1 && (out.1 - 32.0).abs() < 0.1);
    }

    #[test]
    fn lk_recovers_integer_translation() {
        let a = textured_frame(96, 96, (0.0, 0.0), 11);
        let b = textured_frame(96, 96, (3.0, 0.0), 11);
        let pa = pyramid(&a, 3).unwrap();
        let pb = pyramid(&b, 3).unwrap();
        let cfg = MedianFlowConfig::default();
        let out = lk_track_point(&pa, &pb, (48.0, 48.0), &cfg).unwrap();
        assert!((out.0 - 51.0).abs() < 0.25, "x = {}", out.0);
        assert!((out.1 - 48.0).abs() < 0.25, "y = {}", out.1);
    }

    #[test]
    fn lk_flat_region_is_invalid() {
        let f = GrayFrame::from_pixels(64, 64, vec![0.5; 64 * 64]);
        let p = pyramid(&f, 3).unwrap();
        let cfg = MedianFlowConfig::default();
        assert!(lk_track_point(&p, &p, (32.0, 32.0), &cfg).is_none());
    }

    #[test]
    fn track_box_identical_frames() {
        let f = textured_frame(96, 96, (0.0, 0.0), 3);
        let cfg = MedianFlowConfig::default();
        let b = Rect::new(30.0, 30.0, 30.0, 30.0);
        match track_box(&f, &f, &b, &cfg).unwrap() {
            SotResult::Tracked(out) => {
                let (cx, cy) = out.center();
                assert!((cx - 45.0).abs() < 0.5 && (cy - 45.0).abs() < 0.5);
            }
            SotResult::Failure => panic!("tracking failed on identical frames"),
        }
    }

    #[test]
    fn track_box_translation() {
        // A textured object moves (5, -3) over a static background.
        let a = frame_with_object(128, 128, (40.0, 50.0), 30.0, 1.0, 5);
        let b = frame_with_object(128, 128, (45.0, 47.0), 30.0, 1.0, 5);
        let cfg = MedianFlowConfig::default();
        let bbox = Rect::new(40.0, 50.0, 30.0, 30.0);
        match track_box(&a, &b, &bbox, &cfg).unwrap() {
            SotResult::Tracked(out) => {
                let (cx, cy) = out.center();
                assert!((cx - 60.0).abs() < 1.0, "cx = {cx}");
                assert!((cy - 62.0).abs() < 1.0, "cy = {cy}");
            }
            SotResult::Failure => panic!("tracking failed on translation"),
        }
    }

    #[test]
    fn track_box_fails_on_uncorrelated_noise() {
        // The scene is replaced by unrelated blobby noise: flow wanders
        // between unrelated basins, the forward-backward error explodes,
        // and too few points survive the error filter.
        let blobs = |seed: u64| {
            let mut f = GrayFrame::new(96, 96);
            for y in 0..96 {
                for x in 0..96 {
                    let v = crate::synth::value_noise(x as f64, y as f64, 16.0, seed);
                    f.set(x, y, v as f32);
                }
            }
            f
        };
        let a = blobs(21);
        let b = blobs(4242);
        let cfg = MedianFlowConfig::default();
        let bbox = Rect::new(30.0, 30.0, 30.0, 30.0);
        assert_eq!(track_box(&a, &b, &bbox, &cfg).unwrap(), SotResult::Failure);
    }

    #[test]
    fn track_box_degenerate_box_fails() {
        let f = textured_frame(64, 64, (0.0, 0.0), 1);
        let cfg = MedianFlowConfig::default();
        assert_eq!(
            track_box(&f, &f, &Rect::new(10.0, 10.0, 0.0, 0.0), &cfg).unwrap(),
            SotResult::Failure
        );
    }

    #[test]
    fn track_box_deterministic() {
        let a = textured_frame(96, 96, (0.0, 0.0), 8);
        let b = textured_frame(96, 96, (2.0, 1.0), 8);
        let cfg = MedianFlowConfig::default();
        let bbox = Rect::new(25.0, 25.0, 40.0, 40.0);
        let r1 = track_box(&a, &b, &bbox, &cfg).unwrap();
        let r2 = track_box(&a, &b, &bbox, &cfg).unwrap();
        assert_eq!(r1, r2);
    }

    #[test]
    fn track_box_thirty_frame_translation_stays_locked() {
        // Textured square translating by up to 5 px per frame for 30 frames:
        // chained tracking keeps the center within 2 px of truth throughout.
        let steps: [(f64, f64); 6] = [(3.0, 0.0), (5.0, 1.0), (2.0, -2.0), (4.0, 0.0), (1.0, 3.0), (5.0, -1.0)];
        let cfg = MedianFlowConfig::default();
        let (mut ox, mut oy) = (30.0f64, 80.0f64);
        let mut bbox = Rect::new(ox, oy, 28.0, 28.0);
        let mut prev = frame_with_object(256, 192, (ox, oy), 28.0, 1.0, 31);
        for t in 0..30 {
            let (dx, dy) = steps[t % steps.len()];
            ox += dx;
            oy += dy;
            let next = frame_with_object(256, 192, (ox, oy), 28.0, 1.0, 31);
            bbox = match track_box(&prev, &next, &bbox, &cfg).unwrap() {
                SotResult::Tracked(b) => b,
                SotResult::Failure => panic!("lost track at frame {t}"),
            };
            let (cx, cy) = bbox.center();
            let err = (cx - (ox + 14.0)).hypot(cy - (oy + 14.0));
            assert!(err < 2.0, "frame {t}: center error {err}");
            prev = next;
        }
    }

    #[test]
    fn track_box_recovers_gradual_scale_up() {
        // Object grows 2% per frame; recovered per-frame scale stays in
        // [1.00, 1.04].
        let cfg = MedianFlowConfig::default();
        let mut scale = 1.0f64;
        let mut bbox = Rect::from_center(96.0, 96.0, 40.0, 40.0);
        for t in 0..8 {
            let origin_prev = (96.0 - 20.0 * scale, 96.0 - 20.0 * scale);
            let prev = frame_with_object(192, 192, origin_prev, 40.0, scale, 13);
            scale *= 1.02;
            let origin_next = (96.0 - 20.0 * scale, 96.0 - 20.0 * scale);
            let next = frame_with_object(192, 192, origin_next, 40.0, scale, 13);
            let out = match track_box(&prev, &next, &bbox, &cfg).unwrap() {
                SotResult::Tracked(b) => b,
                SotResult::Failure => panic!("lost track at step {t}"),
            };
            let ratio = out.w / bbox.w;
            assert!((1.00..=1.04).contains(&ratio), "step {t}: ratio {ratio}");
            bbox = out;
        }
    }
}
