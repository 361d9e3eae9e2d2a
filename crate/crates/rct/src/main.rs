//! Thin command-line front end over the library; all logic lives in
//! `rct::cli`. Exit codes: 0 success, 2 input error, 3 timeout.

use clap::{Parser, Subcommand};
use rct::cli::{self, CliError, TrackStatus};
use std::path::PathBuf;
use std::process::ExitCode;

#[derive(Parser)]
#[command(name = "rct", about = "Multi-object tracking from unfiltered detections", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Track objects through one video's detections.
    Track {
        /// Detection CSV (frame,x,y,w,h,confidence).
        #[arg(long)]
        detections: PathBuf,
        /// Directory of numbered frames (PNG/PGM/PPM).
        #[arg(long)]
        frames: Option<PathBuf>,
        /// Frame size as WIDTHxHEIGHT; required without --frames.
        #[arg(long)]
        dims: Option<String>,
        /// Parameter file (key = value).
        #[arg(long)]
        config: Option<PathBuf>,
        /// Parameter overrides, repeatable: --set key=value.
        #[arg(long = "set", value_name = "KEY=VALUE")]
        overrides: Vec<String>,
        /// Output track CSV.
        #[arg(long)]
        output: PathBuf,
        /// Manifest path (defaults to <output>.manifest).
        #[arg(long)]
        manifest: Option<PathBuf>,
        /// Wall-clock budget in seconds.
        #[arg(long, default_value_t = 1800.0)]
        timeout: f64,
    },
    /// Score predicted tracks against ground truth.
    Eval {
        #[arg(long)]
        gt: PathBuf,
        #[arg(long)]
        pred: PathBuf,
        /// CSV report destination.
        #[arg(long)]
        report: PathBuf,
    },
    /// Generate a synthetic scene: frames, detections, and ground truth.
    Synth {
        /// Scenario description file.
        #[arg(long)]
        scenario: PathBuf,
        /// Output directory.
        #[arg(long)]
        out: PathBuf,
        /// Skip rendering frames (detections and ground truth only).
        #[arg(long)]
        skip_frames: bool,
    },
    /// Draw tracks onto frames as annotated PNGs.
    Viz {
        #[arg(long)]
        frames: PathBuf,
        #[arg(long)]
        tracks: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Rerun tracking under confidence prefilters and tabulate the scores.
    Sweep {
        #[arg(long)]
        detections: PathBuf,
        #[arg(long)]
        frames: Option<PathBuf>,
        #[arg(long)]
        dims: Option<String>,
        #[arg(long)]
        gt: PathBuf,
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long = "set", value_name = "KEY=VALUE")]
        overrides: Vec<String>,
        /// Comma-separated confidence thresholds; 0 (unfiltered) is always
        /// included.
        #[arg(long, value_delimiter = ',')]
        thresholds: Vec<f64>,
        /// Output CSV.
        #[arg(long)]
        output: PathBuf,
        /// Parallel runs.
        #[arg(long, default_value_t = 1)]
        jobs: usize,
    },
}

fn run(command: Command) -> Result<ExitCode, CliError> {
    match command {
        Command::Track {
            detections,
            frames,
            dims,
            config,
            overrides,
            output,
            manifest,
            timeout,
        } => {
            let args = cli::TrackArgs {
                detections,
                frames,
                dims,
                config,
                overrides,
                output,
                manifest,
                timeout_s: timeout,
            };
            match cli::track(&args)? {
                TrackStatus::Ok => Ok(ExitCode::SUCCESS),
                TrackStatus::Timeout => {
                    eprintln!("tracking timed out after {}s", args.timeout_s);
                    Ok(ExitCode::from(3))
                }
            }
        }
        Command::Eval { gt, pred, report } => {
            let result = cli::eval(&cli::EvalArgs { gt, pred, report })?;
            print!("{}", cli::report_table(&result));
            Ok(ExitCode::SUCCESS)
        }
        Command::Synth { scenario, out, skip_frames } => {
            cli::synth(&cli::SynthArgs { scenario, out, skip_frames })?;
            Ok(ExitCode::SUCCESS)
        }
        Command::Viz { frames, tracks, out } => {
            cli::viz(&cli::VizArgs { frames, tracks, out })?;
            Ok(ExitCode::SUCCESS)
        }
        Command::Sweep {
            detections,
            frames,
            dims,
            gt,
            config,
            overrides,
            thresholds,
            output,
            jobs,
        } => {
            let rows = cli::sweep(&cli::SweepArgs {
                detections,
                frames,
                dims,
                gt,
                config,
                overrides,
                thresholds,
                output,
                jobs,
            })?;
            for row in &rows {
                println!(
                    "threshold {:.3}: HOTA {:.4}, MOTA {:.4}, IDSW {}, {:.2}s",
                    row.threshold,
                    row.report.hota,
                    row.report.mota,
                    row.report.id_switches,
                    row.runtime_s
                );
            }
            Ok(ExitCode::SUCCESS)
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli.command) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(cli::exit_code(&e) as u8)
        }
    }
}
