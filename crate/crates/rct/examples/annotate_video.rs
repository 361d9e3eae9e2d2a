//! Render tracks onto frames as annotated PNGs: generate a small scene,
//! track it, and draw the results.
//!
//! Run with: cargo run --release --example annotate_video -- [out_dir]

use rct::geometry::FrameDims;
use rct::io::{write_pgm, FrameSource};
use rct::synth::{Motion, ObjectSpec, Scenario};
use rct::tracker::{run_rct, track_set, RctParams};
use rct::viz::annotate_frames;
use std::path::PathBuf;

fn main() {
    let out: PathBuf =
        std::env::args().nth(1).map(Into::into).unwrap_or_else(|| "target/annotate-demo".into());
    let mut scene = Scenario::new(4, FrameDims::new(320, 240), 60);
    scene.objects.push(ObjectSpec::new(
        1,
        60,
        Motion::Linear { start: (40.0, 60.0), velocity: (3.2, 1.4) },
        34.0,
        26.0,
    ));
    scene.objects.push(ObjectSpec::new(
        1,
        60,
        Motion::Sinusoidal { start: (60.0, 180.0), velocity_x: 2.8, amplitude: 24.0, period: 48.0 },
        28.0,
        24.0,
    ));
    scene.objects[1].texture_seed = 9;

    let (video, detections, _) = scene.generate().expect("valid scenario");

    let frames_dir = out.join("frames");
    std::fs::create_dir_all(&frames_dir).unwrap();
    for no in 1..=scene.frames {
        write_pgm(&frames_dir.join(format!("{no:06}.pgm")), &video.frame(no).unwrap()).unwrap();
    }

    let tracks = run_rct(
        &detections,
        Some(&video as &dyn FrameSource),
        scene.dims,
        scene.frames,
        &RctParams::default(),
        None,
    )
    .expect("tracking succeeds");

    let annotated_dir = out.join("annotated");
    annotate_frames(&frames_dir, &track_set(&tracks), &annotated_dir).expect("annotation succeeds");
    println!(
        "wrote {} annotated frames for {} tracks to {}",
        scene.frames,
        tracks.len(),
        annotated_dir.display()
    );
}
