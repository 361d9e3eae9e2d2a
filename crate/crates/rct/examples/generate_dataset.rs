//! Write a synthetic dataset to disk: numbered PGM frames plus detection
//! and ground-truth CSVs, ready for the `rct` command-line tools.
//!
//! Run with: cargo run --release --example generate_dataset -- [out_dir]

use rct::geometry::FrameDims;
use rct::io::{write_detections, write_pgm};
use rct::synth::{Motion, ObjectSpec, Scenario};
use std::fmt::Write as _;
use std::path::PathBuf;

fn main() {
    let out: PathBuf =
        std::env::args().nth(1).map(Into::into).unwrap_or_else(|| "target/synth-demo".into());
    let mut scene = Scenario::new(7, FrameDims::new(640, 480), 120);
    scene.dropout = 0.05;
    scene.clutter_rate = 2.0;
    scene.objects.push(ObjectSpec::new(
        1,
        120,
        Motion::Linear { start: (60.0, 120.0), velocity: (3.0, 1.0) },
        40.0,
        30.0,
    ));
    scene.objects.push(ObjectSpec::new(
        10,
        110,
        Motion::exit_right((380.0, 300.0), 3.5),
        34.0,
        28.0,
    ));
    scene.objects[0].texture_seed = 3;
    scene.objects[1].texture_seed = 4;

    let (video, detections, gt) = scene.generate().expect("valid scenario");

    std::fs::create_dir_all(out.join("frames")).unwrap();
    let background = scene.render_background();
    for no in 1..=scene.frames {
        let frame = scene.render_frame_over(&background, no);
        write_pgm(&out.join("frames").join(format!("{no:06}.pgm")), &frame).unwrap();
    }
    write_detections(&out.join("detections.csv"), &detections).unwrap();

    let mut gt_text = String::new();
    for (frame, per_id) in &gt.frames {
        for (id, r) in per_id {
            let _ = writeln!(
                gt_text,
                "{},{},{:.6},{:.6},{:.6},{:.6},1,-1,-1,-1",
                frame, id, r.x, r.y, r.w, r.h
            );
        }
    }
    std::fs::write(out.join("gt.csv"), gt_text).unwrap();

    let _ = video; // frames were rendered directly above
    println!("wrote {} frames, {} detections to {}", scene.frames, detections.len(), out.display());
    println!("try: rct track --detections {0}/detections.csv --frames {0}/frames --output {0}/tracks.csv", out.display());
}
