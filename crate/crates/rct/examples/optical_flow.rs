//! Follow a textured square with the MedianFlow tracker while it
//! translates and grows, and watch the tracker notice when the object
//! vanishes.
//!
//! Run with: cargo run --release --example optical_flow

use rct::frame::GrayFrame;
use rct::geometry::Rect;
use rct::medianflow::{track_box, MedianFlowConfig, SotResult};
use rct::synth::{texture, value_noise};

fn render(origin: (f64, f64), size: f64, scale: f64, with_object: bool) -> GrayFrame {
    let mut f = GrayFrame::new(256, 192);
    for y in 0..192usize {
        for x in 0..256usize {
            f.set(x, y, texture(x as f64, y as f64, 77) as f32);
        }
    }
    if with_object {
        for y in 0..192usize {
            for x in 0..256usize {
                let px = x as f64 + 0.5;
                let py = y as f64 + 0.5;
                if px >= origin.0
                    && px <= origin.0 + size * scale
                    && py >= origin.1
                    && py <= origin.1 + size * scale
                {
                    let v = value_noise((px - origin.0) / scale, (py - origin.1) / scale, 5.0, 911);
                    f.set(x, y, v as f32);
                }
            }
        }
    }
    f
}

fn main() {
    let cfg = MedianFlowConfig::default();
    let mut origin = (40.0, 80.0);
    let mut scale = 1.0;
    let mut bbox = Rect::new(origin.0, origin.1, 36.0, 36.0);
    let mut prev = render(origin, 36.0, scale, true);

    println!("frame  box center            size   truth center");
    for step in 1..=12 {
        origin = (origin.0 + 4.0, origin.1 + 2.5);
        scale *= 1.02;
        let next = render(origin, 36.0, scale, true);
        match track_box(&prev, &next, &bbox, &cfg).expect("frames large enough") {
            SotResult::Tracked(b) => {
                let (cx, cy) = b.center();
                let truth = (origin.0 + 18.0 * scale, origin.1 + 18.0 * scale);
                println!(
                    "{step:>5}  ({cx:>6.1}, {cy:>6.1})   {:>5.1}  ({:>6.1}, {:>6.1})",
                    b.w, truth.0, truth.1
                );
                bbox = b;
            }
            SotResult::Failure => {
                println!("{step:>5}  tracking failure");
                return;
            }
        }
        prev = next;
    }

    // The object disappears: the forward-backward error explodes and the
    // tracker reports failure instead of guessing.
    let empty = render(origin, 36.0, scale, false);
    match track_box(&prev, &empty, &bbox, &cfg).unwrap() {
        SotResult::Failure => println!("object removed -> tracker reports failure"),
        SotResult::Tracked(b) => println!("object removed, but tracker still returned {b:?}"),
    }
}
