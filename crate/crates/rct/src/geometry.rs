//! Axis-aligned box arithmetic shared by every other module.
//!
//! Boxes are continuous (real-valued) top-left + width/height rectangles.
//! Coordinates may be negative or exceed the frame bounds; widths and
//! heights are non-negative, with zero-area boxes flagged degenerate.

/// Axis-aligned bounding box in pixel coordinates.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Rect {
    /// Left edge.
    pub x: f64,
    /// Top edge.
    pub y: f64,
    /// Width (>= 0).
    pub w: f64,
    /// Height (>= 0).
    pub h: f64,
}

/// Pixel dimensions of a video frame.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct FrameDims {
    pub width: u32,
    pub height: u32,
}

impl FrameDims {
    pub fn new(width: u32, height: u32) -> Self {
        assert!(width > 0 && height > 0, "frame dimensions must be positive");
        Self { width, height }
    }
}

impl Rect {
    pub fn new(x: f64, y: f64, w: f64, h: f64) -> Self {
        debug_assert!(w >= 0.0 && h >= 0.0, "negative box extent");
        Self { x, y, w, h }
    }

    /// Box centered at `(cx, cy)` with the given extent.
    pub fn from_center(cx: f64, cy: f64, w: f64, h: f64) -> Self {
        Self::new(cx - w / 2.0, cy - h / 2.0, w, h)
    }

    pub fn area(&self) -> f64 {
        self.w * self.h
    }

    /// Zero-area boxes are permitted but carry no spatial extent.
    pub fn is_degenerate(&self) -> bool {
        self.area() <= 0.0
    }

    /// Geometric center `(x + w/2, y + h/2)`.
    pub fn center(&self) -> (f64, f64) {
        (self.x + self.w / 2.0, self.y + self.h / 2.0)
    }

    /// Closed-boundary point containment.
    pub fn contains_point(&self, p: (f64, f64)) -> bool {
        p.0 >= self.x && p.0 <= self.x + self.w && p.1 >= self.y && p.1 <= self.y + self.h
    }

    /// Scales width and height by `(1 + pct/100)` about the box center.
    pub fn enlarge(&self, pct: f64) -> Self {
        debug_assert!(pct >= 0.0);
        let scale = 1.0 + pct / 100.0;
        let (cx, cy) = self.center();
        Self::from_center(cx, cy, self.w * scale, self.h * scale)
    }

    /// True when the box lies entirely inside `[0, width] x [0, height]`.
    pub fn fully_onscreen(&self, dims: FrameDims) -> bool {
        self.x >= 0.0
            && self.y >= 0.0
            && self.x + self.w <= f64::from(dims.width)
            && self.y + self.h <= f64::from(dims.height)
    }
}

/// Area of the overlap rectangle; 0 when disjoint.
pub fn intersection_area(a: &Rect, b: &Rect) -> f64 {
    let ix = (a.x + a.w).min(b.x + b.w) - a.x.max(b.x);
    let iy = (a.y + a.h).min(b.y + b.h) - a.y.max(b.y);
    if ix > 0.0 && iy > 0.0 {
        ix * iy
    } else {
        0.0
    }
}

/// Intersection over union in `[0, 1]`. Two zero-area boxes give 0.
pub fn iou(a: &Rect, b: &Rect) -> f64 {
    if a == b {
        // Exact for self-comparisons, where the clip arithmetic would
        // otherwise round away from 1.
        return if a.is_degenerate() { 0.0 } else { 1.0 };
    }
    let inter = intersection_area(a, b);
    let union = a.area() + b.area() - inter;
    if union <= 0.0 {
        0.0
    } else {
        inter / union
    }
}

/// Distance-IoU: `1 - IoU + d^2(centers) / g^2`, where `g` is the diagonal
/// of the smallest box enclosing both inputs. Lower is better; the range is
/// `[0, 2)` and identical boxes score 0.
pub fn diou(a: &Rect, b: &Rect) -> f64 {
    if a == b {
        // Identical boxes score 0 even when degenerate (where the IoU
        // convention alone would not produce it).
        return 0.0;
    }
    let (acx, acy) = a.center();
    let (bcx, bcy) = b.center();
    let d2 = (acx - bcx).powi(2) + (acy - bcy).powi(2);
    let ex = (a.x + a.w).max(b.x + b.w) - a.x.min(b.x);
    let ey = (a.y + a.h).max(b.y + b.h) - a.y.min(b.y);
    let g2 = ex * ex + ey * ey;
    if g2 <= 0.0 {
        // Coincident degenerate pair: no diagonal to normalise by.
        return 0.0;
    }
    1.0 - iou(a, b) + d2 / g2
}

/// Fractions of the box extent lying outside the frame, normalised by the
/// frame dimensions: `(offscreen_width / frame_width, offscreen_height /
/// frame_height)`. The offscreen extent per axis is the part of the box not
/// covered by its clip against the frame, so a box that has fully left the
/// frame on either axis reports its whole extent offscreen on both axes.
pub fn offscreen_fraction(b: &Rect, dims: FrameDims) -> (f64, f64) {
    let fw = f64::from(dims.width);
    let fh = f64::from(dims.height);
    // Per-edge overhangs are exactly zero for fully visible boxes, which
    // matters because callers compare consecutive values for growth.
    let off_w = ((-b.x).max(0.0) + (b.x + b.w - fw).max(0.0)).min(b.w);
    let off_h = ((-b.y).max(0.0) + (b.y + b.h - fh).max(0.0)).min(b.h);
    if (b.w > 0.0 && off_w >= b.w) || (b.h > 0.0 && off_h >= b.h) {
        // No visible part at all: the entire box is offscreen.
        return (b.w / fw, b.h / fh);
    }
    (off_w / fw, off_h / fh)
}

/// Sum of the per-axis offscreen fractions, used as a scalar "how far out
/// of frame" measure when comparing consecutive boxes.
pub fn offscreen_sum(b: &Rect, dims: FrameDims) -> f64 {
    let (fx, fy) = offscreen_fraction(b, dims);
    fx + fy
}
