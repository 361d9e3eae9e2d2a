//! Offline multi-object tracking from unfiltered, confidence-annotated
//! detections.
//!
//! The tracker consumes the complete, unthresholded output of an object
//! detector — every box with its confidence — together with optional raw
//! grayscale frames, and emits identity-consistent tracks. Detection
//! confidence drives the whole pipeline: it ranks track initialisation,
//! combines with a Kalman motion model to score extensions, and filters
//! implausible tracks afterwards. A MedianFlow single-object tracker steps
//! in when detections vanish for several consecutive frames.
//!
//! The crate also ships the matching evaluation tooling (distance-IoU based
//! CLEAR MOT and HOTA) and a synthetic scenario generator that produces
//! paired frames, detections, and ground truth for benchmarking.
//!
//! See the `examples/` directory for one runnable program per capability,
//! or the `rct` binary for the command-line interface.

pub mod assignment;
pub mod cli;
pub mod frame;
pub mod geometry;
pub mod io;
pub mod kalman;
pub mod medianflow;
pub mod metrics;
pub mod synth;
pub mod tracker;
pub mod viz;

pub use geometry::{FrameDims, Rect};
pub use tracker::{RctParams, Track, TrackSource};
