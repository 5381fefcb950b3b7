//! `twoplane`: saliency heatmaps, image warping, detection mapping and
//! streaming evaluation from the command line.
//!
//! Exit codes: 0 on success, 2 when an input or the config is invalid, 1
//! when a file cannot be read or written.

mod commands;
mod config;
mod failure;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use commands::{Globals, WarpArgs};
use failure::Outcome;

#[derive(Debug, Parser)]
#[command(name = "twoplane", version, about = "Two-plane perspective warping and streaming evaluation")]
struct Cli {
    /// JSON run configuration.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Overrides `stream.seed`.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Overrides `cache_dir`.
    #[arg(long, global = true)]
    cache_dir: Option<PathBuf>,
    /// Keep the raw kernel-mean axis maps instead of stretching them to the
    /// image borders.
    #[arg(long, global = true)]
    no_endpoint_rescale: bool,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Build the saliency map, store it in the cache and write a heatmap.
    Saliency {
        #[arg(long)]
        out: PathBuf,
        /// Frame whose vanishing point to use in `per_frame` mode.
        #[arg(long, default_value_t = 0)]
        frame: usize,
    },
    /// Warp a PNG to `scale` times its size.
    Warp {
        #[arg(long)]
        input: PathBuf,
        #[arg(long)]
        output: PathBuf,
        /// Also write the warp field as JSON.
        #[arg(long)]
        field_out: Option<PathBuf>,
        /// Use uniform saliency, i.e. a plain resize.
        #[arg(long)]
        constant_saliency: bool,
        #[arg(long, default_value_t = 0)]
        frame: usize,
    },
    /// Map detections from warped to original coordinates.
    Unwarp {
        #[arg(long)]
        field: PathBuf,
        #[arg(long)]
        dets: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Map detections from original to warped coordinates.
    WarpDets {
        #[arg(long)]
        field: PathBuf,
        #[arg(long)]
        dets: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Map `{"points": [[x, y], ...]}` into warped coordinates, or back with
    /// `--inverse`.
    WarpPoints {
        #[arg(long)]
        field: PathBuf,
        #[arg(long)]
        points: PathBuf,
        #[arg(long)]
        out: PathBuf,
        #[arg(long)]
        inverse: bool,
    },
    /// Simulate streaming detection over a ground-truth sequence and report sAP.
    Stream {
        #[arg(long)]
        gt: PathBuf,
        #[arg(long)]
        report: PathBuf,
    },
    /// Vanishing point of annotated lines.
    Vp {
        #[arg(long)]
        lines: PathBuf,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Print the config in canonical form, defaults filled in.
    Config,
}

fn run(cli: Cli) -> Outcome<()> {
    let g = Globals {
        config: cli.config,
        seed: cli.seed,
        cache_dir: cli.cache_dir,
        no_endpoint_rescale: cli.no_endpoint_rescale,
    };
    match &cli.command {
        Command::Saliency { out, frame } => commands::saliency(&g, out, *frame),
        Command::Warp {
            input,
            output,
            field_out,
            constant_saliency,
            frame,
        } => commands::warp(
            &g,
            WarpArgs {
                input,
                output,
                field_out: field_out.as_deref(),
                constant_saliency: *constant_saliency,
                frame: *frame,
            },
        ),
        Command::Unwarp { field, dets, out } => commands::unwarp(field, dets, out),
        Command::WarpDets { field, dets, out } => commands::warp_dets(field, dets, out),
        Command::WarpPoints {
            field,
            points,
            out,
            inverse,
        } => commands::warp_points_cmd(field, points, out, *inverse),
        Command::Stream { gt, report } => commands::stream(&g, gt, report),
        Command::Vp { lines, out } => commands::vp(lines, out.as_deref()),
        Command::Config => commands::config(&g),
    }
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            eprintln!("error: {f}");
            f.exit_code()
        }
    }
}
