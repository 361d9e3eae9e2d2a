//! Track a synthetic three-object scene end to end and score the result.
//!
//! Run with: cargo run --release --example track_scene

use rct::geometry::FrameDims;
use rct::io::FrameSource;
use rct::metrics::clearmot;
use rct::synth::{Motion, ObjectSpec, Scenario};
use rct::tracker::{run_rct, track_set, RctParams, TrackSource};

fn main() {
    let mut scene = Scenario::new(42, FrameDims::new(640, 480), 150);
    scene.dropout = 0.06;
    scene.clutter_rate = 1.5;
    scene.objects.push(ObjectSpec::new(
        1,
        150,
        Motion::Linear { start: (70.0, 90.0), velocity: (2.8, 0.9) },
        42.0,
        32.0,
    ));
    scene.objects.push(ObjectSpec::new(
        1,
        150,
        Motion::Sinusoidal { start: (90.0, 320.0), velocity_x: 2.4, amplitude: 45.0, period: 80.0 },
        36.0,
        30.0,
    ));
    scene.objects.push(ObjectSpec::new(
        1,
        150,
        Motion::Linear { start: (540.0, 420.0), velocity: (-2.4, -1.6) },
        30.0,
        26.0,
    ));
    for (i, o) in scene.objects.iter_mut().enumerate() {
        o.texture_seed = i as u64 + 1;
    }

    let (video, detections, gt) = scene.generate().expect("valid scenario");
    println!(
        "scene: {} frames, {} detections ({} clutter)",
        scene.frames,
        detections.len(),
        detections.iter().filter(|d| d.confidence < 0.5).count()
    );

    let tracks = run_rct(
        &detections,
        Some(&video as &dyn FrameSource),
        scene.dims,
        scene.frames,
        &RctParams::default(),
        None,
    )
    .expect("tracking succeeds");

    for t in &tracks {
        let by_source = |s: TrackSource| t.boxes.values().filter(|b| b.source == s).count();
        println!(
            "track {:>2}: frames {:>3}..{:<3} seeded at {} (conf {:.2}); {} detected, {} flow, {} inferred",
            t.id,
            t.first_frame().unwrap(),
            t.last_frame().unwrap(),
            t.init_frame,
            t.init_confidence,
            by_source(TrackSource::Detection),
            by_source(TrackSource::Sot),
            by_source(TrackSource::Motion),
        );
    }

    let report = clearmot(&gt, &track_set(&tracks));
    println!(
        "scores: HOTA {:.3}, MOTA {:.3}, {} id switches, precision {:.3}, recall {:.3}",
        report.hota, report.mota, report.id_switches, report.precision, report.recall
    );
}
