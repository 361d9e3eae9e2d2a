//! Recover a smooth trajectory from noisy, partially missing box
//! observations with the constant-velocity filter and fixed-interval
//! smoothing.
//!
//! Run with: cargo run --example smooth_trajectory

use rct::geometry::Rect;
use rct::kalman::{filter_sequence, rts_backward, KalmanConfig, Observation};
use rct::synth::SplitMix64;

fn main() {
    let cfg = KalmanConfig::default();
    let mut rng = SplitMix64::new(5);

    // True motion: constant velocity (3, -1) from (50, 200), with noisy
    // boxes and a missing stretch in the middle.
    let truth = |t: i64| (50.0 + 3.0 * t as f64, 200.0 - 1.0 * t as f64);
    let observations: Vec<Observation> = (0..40)
        .map(|t| {
            if (15..22).contains(&t) {
                Observation::Missing
            } else {
                let (x, y) = truth(t);
                Observation::Present(Rect::from_center(
                    x + rng.normal(0.0, 1.2),
                    y + rng.normal(0.0, 1.2),
                    30.0 + rng.normal(0.0, 0.8),
                    24.0 + rng.normal(0.0, 0.8),
                ))
            }
        })
        .collect();

    let init = Rect::from_center(50.0, 200.0, 30.0, 24.0);
    let steps = filter_sequence(&observations, &init, &cfg);
    let smoothed = rts_backward(&steps);

    println!(" t   truth        filtered      smoothed      note");
    for (t, (step, smooth)) in steps.iter().zip(&smoothed).enumerate() {
        let (tx, ty) = truth(t as i64);
        let note = match observations[t] {
            Observation::Missing => "missing",
            _ => "",
        };
        println!(
            "{t:>2}  ({tx:>5.1},{ty:>5.1})  ({:>5.1},{:>5.1})  ({:>5.1},{:>5.1})  {note}",
            step.posterior.mean[0], step.posterior.mean[1], smooth.mean[0], smooth.mean[1],
        );
    }

    let worst_filtered = steps
        .iter()
        .enumerate()
        .map(|(t, s)| {
            let (tx, ty) = truth(t as i64);
            (s.posterior.mean[0] - tx).hypot(s.posterior.mean[1] - ty)
        })
        .fold(0.0f64, f64::max);
    let worst_smoothed = smoothed
        .iter()
        .enumerate()
        .map(|(t, s)| {
            let (tx, ty) = truth(t as i64);
            (s.mean[0] - tx).hypot(s.mean[1] - ty)
        })
        .fold(0.0f64, f64::max);
    println!("\nworst error: filtered {worst_filtered:.2} px, smoothed {worst_smoothed:.2} px");
}
