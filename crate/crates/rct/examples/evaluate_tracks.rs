//! Score a prediction against ground truth with DIoU-based CLEAR MOT and
//! HOTA, showing how near misses earn partial credit and how identity
//! swaps are charged.
//!
//! Run with: cargo run --example evaluate_tracks

use rct::geometry::Rect;
use rct::metrics::{clearmot, TrackSet};

fn main() {
    // Two objects crossing the scene for 30 frames.
    let mut gt = TrackSet::new();
    for f in 1..=30 {
        gt.insert(f, 1, Rect::new(10.0 + 4.0 * f as f64, 100.0, 40.0, 30.0));
        gt.insert(f, 2, Rect::new(600.0 - 4.0 * f as f64, 300.0, 40.0, 30.0));
    }

    // A perfect prediction.
    let report = clearmot(&gt, &gt);
    println!("perfect:        HOTA {:.3} MOTA {:.3} IDSW {}", report.hota, report.mota, report.id_switches);

    // Slightly offset boxes: no longer identical, still matched.
    let mut offset = TrackSet::new();
    for (&f, per_id) in &gt.frames {
        for (&id, r) in per_id {
            offset.insert(f, id + 10, Rect::new(r.x + 6.0, r.y + 5.0, r.w, r.h));
        }
    }
    let report = clearmot(&gt, &offset);
    println!("offset 8px:     HOTA {:.3} MOTA {:.3} IDSW {}", report.hota, report.mota, report.id_switches);

    // Identity swap halfway through: two switches, association halved.
    let mut swapped = TrackSet::new();
    for (&f, per_id) in &gt.frames {
        for (&id, r) in per_id {
            let out_id = if f <= 15 { id } else { 3 - id };
            swapped.insert(f, out_id, *r);
        }
    }
    let report = clearmot(&gt, &swapped);
    println!("id swap @15:    HOTA {:.3} MOTA {:.3} IDSW {}", report.hota, report.mota, report.id_switches);

    // Losing one object entirely: recall halves, precision stays perfect.
    let mut half = TrackSet::new();
    for (&f, per_id) in &gt.frames {
        half.insert(f, 1, per_id[&1]);
    }
    let report = clearmot(&gt, &half);
    println!(
        "one object:     HOTA {:.3} MOTA {:.3} precision {:.3} recall {:.3}",
        report.hota, report.mota, report.precision, report.recall
    );
}
