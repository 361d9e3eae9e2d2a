//! Annotated frame rendering: draws per-track colored boxes with id labels
//! onto video frames and writes them as PNG.

use crate::geometry::Rect;
use crate::metrics::TrackSet;
use image::{Rgb, RgbImage};
use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum VizError {
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("{path}: cannot decode image: {msg}")]
    Image { path: PathBuf, msg: String },
    #[error("frame directory {path} contains no numbered images")]
    EmptyFrameDir { path: PathBuf },
    #[error("track box on frame {frame} but the video ends at frame {count}")]
    FrameOutOfRange { frame: i64, count: i64 },
}

/// Deterministic id-to-color mapping: hue steps around the wheel by the
/// golden ratio so nearby ids get visually distant colors.
pub fn track_color(id: i64) -> Rgb<u8> {
    let hue = (id as f64 * 0.618_033_988_749_895).fract();
    let (r, g, b) = hsv_to_rgb(hue, 0.85, 0.95);
    Rgb([r, g, b])
}

fn hsv_to_rgb(h: f64, s: f64, v: f64) -> (u8, u8, u8) {
    let i = (h * 6.0).floor();
    let f = h * 6.0 - i;
    let p = v * (1.0 - s);
    let q = v * (1.0 - f * s);
    let t = v * (1.0 - (1.0 - f) * s);
    let (r, g, b) = match (i as i64).rem_euclid(6) {
        0 => (v, t, p),
        1 => (q, v, p),
        2 => (p, v, t),
        3 => (p, q, v),
        4 => (t, p, v),
        _ => (v, p, q),
    };
    ((r * 255.0).round() as u8, (g * 255.0).round() as u8, (b * 255.0).round() as u8)
}

// 3x5 digit glyphs, row-major bitmasks.
const DIGITS: [[u8; 5]; 10] = [
    [0b111, 0b101, 0b101, 0b101, 0b111], // 0
    [0b010, 0b110, 0b010, 0b010, 0b111], // 1
    [0b111, 0b001, 0b111, 0b100, 0b111], // 2
    [0b111, 0b001, 0b111, 0b001, 0b111], // 3
    [0b101, 0b101, 0b111, 0b001, 0b001], // 4
    [0b111, 0b100, 0b111, 0b001, 0b111], // 5
    [0b111, 0b100, 0b111, 0b101, 0b111], // 6
    [0b111, 0b001, 0b010, 0b010, 0b010], // 7
    [0b111, 0b101, 0b111, 0b101, 0b111], // 8
    [0b111, 0b101, 0b111, 0b001, 0b111], // 9
];

fn put_pixel(img: &mut RgbImage, x: i64, y: i64, color: Rgb<u8>) {
    if x >= 0 && y >= 0 && (x as u32) < img.width() && (y as u32) < img.height() {
        img.put_pixel(x as u32, y as u32, color);
    }
}

fn draw_rect(img: &mut RgbImage, r: &Rect, color: Rgb<u8>) {
    let x0 = r.x.round() as i64;
    let y0 = r.y.round() as i64;
    let x1 = (r.x + r.w).round() as i64;
    let y1 = (r.y + r.h).round() as i64;
    for t in 0..2i64 {
        for x in x0..=x1 {
            put_pixel(img, x, y0 + t, color);
            put_pixel(img, x, y1 - t, color);
        }
        for y in y0..=y1 {
            put_pixel(img, x0 + t, y, color);
            put_pixel(img, x1 - t, y, color);
        }
    }
}

fn draw_label(img: &mut RgbImage, x: i64, y: i64, id: i64, color: Rgb<u8>) {
    let text = id.to_string();
    const SCALE: i64 = 2;
    for (ci, ch) in text.bytes().enumerate() {
        if !ch.is_ascii_digit() {
            continue;
        }
        let glyph = DIGITS[(ch - b'0') as usize];
        let ox = x + ci as i64 * 4 * SCALE;
        for (gy, row) in glyph.iter().enumerate() {
            for gx in 0..3i64 {
                if row & (0b100 >> gx) != 0 {
                    for sy in 0..SCALE {
                        for sx in 0..SCALE {
                            put_pixel(
                                img,
                                ox + gx * SCALE + sx,
                                y + gy as i64 * SCALE + sy,
                                color,
                            );
                        }
                    }
                }
            }
        }
    }
}

fn numbered_images(dir: &Path) -> Result<Vec<(i64, PathBuf)>, VizError> {
    let entries =
        fs::read_dir(dir).map_err(|source| VizError::Io { path: dir.to_path_buf(), source })?;
    let mut out: BTreeMap<i64, PathBuf> = BTreeMap::new();
    for entry in entries {
        let entry = entry.map_err(|source| VizError::Io { path: dir.to_path_buf(), source })?;
        let path = entry.path();
        let ext = path.extension().and_then(|e| e.to_str()).map(str::to_ascii_lowercase);
        if !matches!(ext.as_deref(), Some("png" | "pgm" | "ppm")) {
            continue;
        }
        if let Some(n) = path.file_stem().and_then(|s| s.to_str()).and_then(|s| s.parse().ok()) {
            out.insert(n, path);
        }
    }
    if out.is_empty() {
        return Err(VizError::EmptyFrameDir { path: dir.to_path_buf() });
    }
    Ok(out.into_iter().collect())
}

/// Draws every track box onto its frame and writes `NNNNNN.png` files into
/// `out_dir`. Frames without boxes are written unannotated. Re-running
/// produces byte-identical output.
pub fn annotate_frames(frames_dir: &Path, tracks: &TrackSet, out_dir: &Path) -> Result<(), VizError> {
    let images = numbered_images(frames_dir)?;
    let count = images.last().map(|(n, _)| *n).unwrap_or(0);
    if let Some((&frame, _)) = tracks.frames.iter().next_back() {
        if frame > count {
            return Err(VizError::FrameOutOfRange { frame, count });
        }
    }
    fs::create_dir_all(out_dir)
        .map_err(|source| VizError::Io { path: out_dir.to_path_buf(), source })?;

    for (no, path) in &images {
        let mut img = image::open(path)
            .map_err(|e| VizError::Image { path: path.clone(), msg: e.to_string() })?
            .to_rgb8();
        if let Some(per_id) = tracks.frames.get(no) {
            for (&id, rect) in per_id {
                let color = track_color(id);
                draw_rect(&mut img, rect, color);
                draw_label(&mut img, rect.x.round() as i64 + 3, rect.y.round() as i64 + 3, id, color);
            }
        }
        let out = out_dir.join(format!("{no:06}.png"));
        img.save(&out).map_err(|e| VizError::Image { path: out, msg: e.to_string() })?;
    }
    Ok(())
}
