//! Command implementations backing the `rct` binary: track, eval, synth,
//! viz, and the prefilter sweep. Each returns a typed result the binary
//! maps onto exit codes (0 ok, 2 input error, 3 timeout).

use crate::geometry::FrameDims;
use crate::io::{self, Detection, FrameSource, IoError, ParamError, VideoSource};
use crate::metrics::{clearmot, EvalReport};
use crate::synth::{parse_scenario_file, SynthError};
use crate::tracker::{run_rct, RctParams, TrackError};
use crate::viz::{annotate_frames, VizError};
use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::sync::atomic::{AtomicBool, AtomicUsize, Ordering};
use std::sync::Mutex;
use std::time::{Duration, Instant};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum CliError {
    #[error(transparent)]
    Io(#[from] IoError),
    #[error(transparent)]
    Synth(#[from] SynthError),
    #[error(transparent)]
    Viz(#[from] VizError),
    #[error("tracking timed out")]
    Timeout,
    #[error("{0}")]
    Input(String),
}

impl From<TrackError> for CliError {
    fn from(e: TrackError) -> Self {
        match e {
            TrackError::TimedOut => CliError::Timeout,
            TrackError::Io(io) => CliError::Io(io),
            TrackError::Input(msg) => CliError::Input(msg),
        }
    }
}

/// Exit code contract: 0 success, 2 input error, 3 timeout.
pub fn exit_code(err: &CliError) -> i32 {
    match err {
        CliError::Timeout => 3,
        _ => 2,
    }
}

/// Parses repeated `key=value` override flags onto a parameter set.
pub fn apply_overrides(params: &mut RctParams, overrides: &[String]) -> Result<(), CliError> {
    for spec in overrides {
        let Some((key, value)) = spec.split_once('=') else {
            return Err(CliError::Input(format!("override `{spec}` is not key=value")));
        };
        io::apply_param(params, key.trim(), value.trim()).map_err(|e| match e {
            ParamError::UnknownKey => CliError::Input(format!("unknown parameter `{key}`")),
            ParamError::Invalid(msg) => CliError::Input(format!("{key}: {msg}")),
        })?;
    }
    Ok(())
}

fn load_effective_params(
    config: Option<&Path>,
    overrides: &[String],
) -> Result<RctParams, CliError> {
    let mut params = match config {
        Some(path) => io::load_params(path)?,
        None => RctParams::default(),
    };
    apply_overrides(&mut params, overrides)?;
    Ok(params)
}

fn parse_dims(s: &str) -> Result<FrameDims, CliError> {
    let err = || CliError::Input(format!("`{s}` is not WIDTHxHEIGHT"));
    let (w, h) = s.split_once('x').ok_or_else(err)?;
    let w: u32 = w.trim().parse().map_err(|_| err())?;
    let h: u32 = h.trim().parse().map_err(|_| err())?;
    if w == 0 || h == 0 {
        return Err(CliError::Input("frame dimensions must be positive".into()));
    }
    Ok(FrameDims::new(w, h))
}

pub struct TrackArgs {
    pub detections: PathBuf,
    pub frames: Option<PathBuf>,
    /// `WIDTHxHEIGHT`; required when no frame directory is given.
    pub dims: Option<String>,
    pub config: Option<PathBuf>,
    pub overrides: Vec<String>,
    pub output: PathBuf,
    pub manifest: Option<PathBuf>,
    pub timeout_s: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TrackStatus {
    Ok,
    Timeout,
}

fn default_manifest(output: &Path) -> PathBuf {
    let mut name = output.file_name().map(|n| n.to_string_lossy().into_owned()).unwrap_or_default();
    name.push_str(".manifest");
    output.with_file_name(name)
}

fn snapshot_params(out: &mut String, params: &RctParams) {
    let _ = writeln!(out, "param.seed_confidence = {}", params.seed_confidence);
    let _ = writeln!(out, "param.edge_margin_pct = {}", params.edge_margin_pct);
    let _ = writeln!(out, "param.bidirectional_steps = {}", params.bidirectional_steps);
    let _ = writeln!(out, "param.sot_switch_frames = {}", params.sot_switch_frames);
    let _ = writeln!(out, "param.join_overlap_iou = {}", params.join_overlap_iou);
    let _ = writeln!(out, "param.join_max_gap = {}", params.join_max_gap);
    let _ = writeln!(out, "param.quality_confidence = {}", params.quality_confidence);
    let _ = writeln!(out, "param.redundancy_iou = {}", params.redundancy_iou);
    let _ = writeln!(out, "param.offscreen_pct = {}", params.offscreen_pct);
    let _ = writeln!(out, "param.exit_accel = {}", params.exit_accel);
    let _ = writeln!(out, "param.tail_trim_frames = {}", params.tail_trim_frames);
    let _ = writeln!(out, "param.use_medianflow = {}", params.use_medianflow);
    let _ = writeln!(out, "param.use_joining = {}", params.use_joining);
    let _ = writeln!(out, "param.use_size_filter = {}", params.use_size_filter);
    let mode = match params.trim_mode {
        crate::tracker::TrimMode::Normal => "normal",
        crate::tracker::TrimMode::NoOffscreen => "no_offscreen",
        crate::tracker::TrimMode::OnTouch => "on_touch",
        crate::tracker::TrimMode::NoOnscreen => "no_onscreen",
    };
    let _ = writeln!(out, "param.trim_mode = {mode}");
    let _ = writeln!(
        out,
        "param.kalman_transition_position = {}",
        params.kalman.transition_cov[(0, 0)]
    );
    let _ = writeln!(
        out,
        "param.kalman_transition_velocity = {}",
        params.kalman.transition_cov[(2, 2)]
    );
    let _ = writeln!(out, "param.kalman_transition_size = {}", params.kalman.transition_cov[(4, 4)]);
    let _ = writeln!(out, "param.kalman_observation = {}", params.kalman.observation_cov[(0, 0)]);
    let _ = writeln!(out, "param.kalman_initial = {}", params.kalman.initial_cov[(0, 0)]);
    let _ = writeln!(out, "param.mf_grid = {}", params.medianflow.grid);
    let _ = writeln!(out, "param.mf_window_half = {}", params.medianflow.window_half);
    let _ = writeln!(out, "param.mf_levels = {}", params.medianflow.levels);
    let _ = writeln!(out, "param.mf_max_iters = {}", params.medianflow.max_iters);
    let _ = writeln!(out, "param.mf_epsilon = {}", params.medianflow.epsilon);
    let _ = writeln!(out, "param.mf_failure_error = {}", params.medianflow.failure_fb_error);
    let _ = writeln!(out, "param.mf_min_points = {}", params.medianflow.min_points);
}

#[allow(clippy::too_many_arguments)]
fn write_manifest(
    path: &Path,
    status: &str,
    args: &TrackArgs,
    params: &RctParams,
    wall: Duration,
    video: Option<Duration>,
    num_tracks: Option<usize>,
) -> Result<(), IoError> {
    let mut out = String::new();
    let _ = writeln!(out, "status = {status}");
    let _ = writeln!(out, "detections = {}", args.detections.display());
    let _ = writeln!(
        out,
        "frames = {}",
        args.frames.as_ref().map(|p| p.display().to_string()).unwrap_or_else(|| "none".into())
    );
    let _ = writeln!(
        out,
        "config = {}",
        args.config.as_ref().map(|p| p.display().to_string()).unwrap_or_else(|| "none".into())
    );
    let _ = writeln!(out, "output = {}", args.output.display());
    let _ = writeln!(out, "timeout_s = {}", args.timeout_s);
    let _ = writeln!(out, "wall_time_s = {:.3}", wall.as_secs_f64());
    if let Some(v) = video {
        let _ = writeln!(out, "video_time_s = {:.3}", v.as_secs_f64());
    }
    if let Some(n) = num_tracks {
        let _ = writeln!(out, "num_tracks = {n}");
    }
    snapshot_params(&mut out, params);
    io::write_atomic(path, out.as_bytes())
}

/// Runs the tracker over one video and writes the track file plus a run
/// manifest. A timeout writes the manifest only: no partial track file is
/// ever produced.
pub fn track(args: &TrackArgs) -> Result<TrackStatus, CliError> {
    let start = Instant::now();
    let detections = io::read_detections(&args.detections)?;
    let video = match &args.frames {
        Some(dir) => Some(VideoSource::open(dir)?),
        None => None,
    };
    let params = load_effective_params(args.config.as_deref(), &args.overrides)?;

    let (dims, num_frames) = match &video {
        Some(v) => (v.dims(), v.num_frames()),
        None => {
            let dims = parse_dims(args.dims.as_deref().ok_or_else(|| {
                CliError::Input("--dims WIDTHxHEIGHT is required when no frames are given".into())
            })?)?;
            let n = detections.iter().map(|d| d.frame).max().unwrap_or(1);
            (dims, n)
        }
    };

    if args.timeout_s <= 0.0 {
        return Err(CliError::Input("timeout must be positive".into()));
    }
    let deadline = start + Duration::from_secs_f64(args.timeout_s);
    let manifest_path = args.manifest.clone().unwrap_or_else(|| default_manifest(&args.output));

    // Hard watchdog behind the cooperative deadline checks: if the pipeline
    // overshoots the deadline by a wide margin, write the manifest and
    // abort the process with the timeout exit code.
    let done = std::sync::Arc::new(AtomicBool::new(false));
    let grace = Duration::from_secs_f64(2.0 + args.timeout_s * 0.1);
    {
        let done = std::sync::Arc::clone(&done);
        let manifest_path = manifest_path.clone();
        let params = params.clone();
        let args_copy = TrackArgs {
            detections: args.detections.clone(),
            frames: args.frames.clone(),
            dims: args.dims.clone(),
            config: args.config.clone(),
            overrides: args.overrides.clone(),
            output: args.output.clone(),
            manifest: args.manifest.clone(),
            timeout_s: args.timeout_s,
        };
        std::thread::spawn(move || {
            let wake = deadline + grace;
            while Instant::now() < wake {
                if done.load(Ordering::SeqCst) {
                    return;
                }
                std::thread::sleep(Duration::from_millis(25));
            }
            if done.load(Ordering::SeqCst) {
                return;
            }
            let _ = write_manifest(
                &manifest_path,
                "TIMEOUT",
                &args_copy,
                &params,
                wake - start,
                None,
                None,
            );
            std::process::exit(3);
        });
    }

    let video_start = Instant::now();
    let result = run_rct(
        &detections,
        video.as_ref().map(|v| v as &dyn FrameSource),
        dims,
        num_frames,
        &params,
        Some(deadline),
    );
    let video_time = video_start.elapsed();
    done.store(true, Ordering::SeqCst);

    match result {
        Ok(tracks) => {
            io::write_tracks(&args.output, &tracks)?;
            write_manifest(
                &manifest_path,
                "OK",
                args,
                &params,
                start.elapsed(),
                Some(video_time),
                Some(tracks.len()),
            )?;
            Ok(TrackStatus::Ok)
        }
        Err(TrackError::TimedOut) => {
            write_manifest(
                &manifest_path,
                "TIMEOUT",
                args,
                &params,
                start.elapsed(),
                Some(video_time),
                None,
            )?;
            Ok(TrackStatus::Timeout)
        }
        Err(e) => Err(e.into()),
    }
}

pub struct EvalArgs {
    pub gt: PathBuf,
    pub pred: PathBuf,
    pub report: PathBuf,
}

pub fn report_csv(report: &EvalReport) -> String {
    format!(
        "hota,mota,idsw,fp,fn,precision,recall\n{:.6},{:.6},{},{},{},{:.6},{:.6}\n",
        report.hota,
        report.mota,
        report.id_switches,
        report.false_positives,
        report.misses,
        report.precision,
        report.recall
    )
}

pub fn report_table(report: &EvalReport) -> String {
    let mut out = String::new();
    let _ = writeln!(out, "metric       value");
    let _ = writeln!(out, "-----------  ---------");
    let _ = writeln!(out, "HOTA         {:>9.4}", report.hota);
    let _ = writeln!(out, "MOTA         {:>9.4}", report.mota);
    let _ = writeln!(out, "ID switches  {:>9}", report.id_switches);
    let _ = writeln!(out, "FP           {:>9}", report.false_positives);
    let _ = writeln!(out, "FN           {:>9}", report.misses);
    let _ = writeln!(out, "precision    {:>9.4}", report.precision);
    let _ = writeln!(out, "recall       {:>9.4}", report.recall);
    out
}

/// Evaluates predicted tracks against ground truth, writing the CSV report
/// and returning the metrics.
pub fn eval(args: &EvalArgs) -> Result<EvalReport, CliError> {
    let gt = io::read_track_set(&args.gt)?;
    let pred = io::read_track_set(&args.pred)?;
    let report = clearmot(&gt, &pred);
    io::write_atomic(&args.report, report_csv(&report).as_bytes())?;
    Ok(report)
}

pub struct SynthArgs {
    pub scenario: PathBuf,
    pub out: PathBuf,
    pub skip_frames: bool,
}

/// Generates a synthetic dataset: `frames/` (PGM), `detections.csv`, and
/// `gt.csv` under the output directory.
pub fn synth(args: &SynthArgs) -> Result<(), CliError> {
    let scenario = parse_scenario_file(&args.scenario)?;
    let (video, detections, gt) = scenario.generate()?;
    std::fs::create_dir_all(&args.out)
        .map_err(|source| IoError::Read { path: args.out.clone(), source })?;
    io::write_detections(&args.out.join("detections.csv"), &detections)?;
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
    io::write_atomic(&args.out.join("gt.csv"), gt_text.as_bytes())?;
    if !args.skip_frames {
        let frames_dir = args.out.join("frames");
        std::fs::create_dir_all(&frames_dir)
            .map_err(|source| IoError::Read { path: frames_dir.clone(), source })?;
        for no in 1..=scenario.frames {
            let frame = video.frame(no)?;
            io::write_pgm(&frames_dir.join(format!("{no:06}.pgm")), &frame)?;
        }
    }
    Ok(())
}

pub struct VizArgs {
    pub frames: PathBuf,
    pub tracks: PathBuf,
    pub out: PathBuf,
}

pub fn viz(args: &VizArgs) -> Result<(), CliError> {
    let tracks = io::read_track_set(&args.tracks)?;
    annotate_frames(&args.frames, &tracks, &args.out)?;
    Ok(())
}

pub struct SweepArgs {
    pub detections: PathBuf,
    pub frames: Option<PathBuf>,
    pub dims: Option<String>,
    pub gt: PathBuf,
    pub config: Option<PathBuf>,
    pub overrides: Vec<String>,
    pub thresholds: Vec<f64>,
    pub output: PathBuf,
    pub jobs: usize,
}

#[derive(Debug, Clone)]
pub struct SweepRow {
    pub threshold: f64,
    pub report: EvalReport,
    pub runtime_s: f64,
}

/// Reruns tracking with the detections prefiltered at each confidence
/// threshold (the unfiltered baseline `h = 0` is always included) and
/// evaluates each run against ground truth.
pub fn sweep(args: &SweepArgs) -> Result<Vec<SweepRow>, CliError> {
    let detections = io::read_detections(&args.detections)?;
    let gt = io::read_track_set(&args.gt)?;
    let video = match &args.frames {
        Some(dir) => Some(VideoSource::open(dir)?),
        None => None,
    };
    let params = load_effective_params(args.config.as_deref(), &args.overrides)?;
    let (dims, num_frames) = match &video {
        Some(v) => (v.dims(), v.num_frames()),
        None => {
            let dims = parse_dims(args.dims.as_deref().ok_or_else(|| {
                CliError::Input("--dims WIDTHxHEIGHT is required when no frames are given".into())
            })?)?;
            (dims, detections.iter().map(|d| d.frame).max().unwrap_or(1))
        }
    };

    let mut thresholds: Vec<f64> = args.thresholds.clone();
    if !thresholds.contains(&0.0) {
        thresholds.insert(0, 0.0);
    }

    let jobs = args.jobs.max(1).min(thresholds.len().max(1));
    let next = AtomicUsize::new(0);
    let rows: Mutex<Vec<Option<SweepRow>>> = Mutex::new(vec![None; thresholds.len()]);
    let failure: Mutex<Option<CliError>> = Mutex::new(None);
    std::thread::scope(|scope| {
        for _ in 0..jobs {
            scope.spawn(|| loop {
                let i = next.fetch_add(1, Ordering::SeqCst);
                if i >= thresholds.len() {
                    return;
                }
                let h = thresholds[i];
                let filtered: Vec<Detection> =
                    detections.iter().filter(|d| d.confidence >= h).cloned().collect();
                let run_start = Instant::now();
                let result = run_rct(
                    &filtered,
                    video.as_ref().map(|v| v as &dyn FrameSource),
                    dims,
                    num_frames,
                    &params,
                    None,
                );
                match result {
                    Ok(tracks) => {
                        let pred = crate::tracker::track_set(&tracks);
                        let report = clearmot(&gt, &pred);
                        rows.lock().unwrap()[i] = Some(SweepRow {
                            threshold: h,
                            report,
                            runtime_s: run_start.elapsed().as_secs_f64(),
                        });
                    }
                    Err(e) => {
                        let mut slot = failure.lock().unwrap();
                        if slot.is_none() {
                            *slot = Some(e.into());
                        }
                        return;
                    }
                }
            });
        }
    });
    if let Some(e) = failure.into_inner().unwrap() {
        return Err(e);
    }
    let rows: Vec<SweepRow> = rows.into_inner().unwrap().into_iter().flatten().collect();

    let mut csv = String::from("threshold,hota,mota,idsw,fp,fn,precision,recall,runtime_s\n");
    for row in &rows {
        let _ = writeln!(
            csv,
            "{:.3},{:.6},{:.6},{},{},{},{:.6},{:.6},{:.3}",
            row.threshold,
            row.report.hota,
            row.report.mota,
            row.report.id_switches,
            row.report.false_positives,
            row.report.misses,
            row.report.precision,
            row.report.recall,
            row.runtime_s
        );
    }
    io::write_atomic(&args.output, csv.as_bytes())?;
    Ok(rows)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn dims_parser() {
        assert_eq!(parse_dims("640x480").unwrap(), FrameDims::new(640, 480));
        assert!(parse_dims("640").is_err());
        assert!(parse_dims("0x10").is_err());
    }

    #[test]
    fn overrides_apply_and_reject() {
        let mut params = RctParams::default();
        apply_overrides(&mut params, &["seed_confidence=0.7".into(), "use_joining=false".into()])
            .unwrap();
        assert_eq!(params.seed_confidence, 0.7);
        assert!(!params.use_joining);
        assert!(apply_overrides(&mut params, &["nope=1".into()]).is_err());
        assert!(apply_overrides(&mut params, &["seed_confidence".into()]).is_err());
    }

    #[test]
    fn manifest_path_defaults_next_to_output() {
        let p = default_manifest(Path::new("/tmp/out/tracks.csv"));
        assert_eq!(p, Path::new("/tmp/out/tracks.csv.manifest"));
    }
}
