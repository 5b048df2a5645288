//! `graspkit` command-line front end.
//!
//! Exit codes: 0 success, 2 input or configuration error, 3 no valid grasp.

mod commands;
mod config;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

#[derive(Parser)]
#[command(name = "graspkit", version, about = "Grasp geometry, evaluation and search")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Clone)]
pub struct ConfigArgs {
    /// Configuration file of `section.key = value` lines.
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Override one configuration key, e.g. `--set grasp.n_seeds=32`.
    #[arg(long = "set", value_name = "KEY=VALUE")]
    pub overrides: Vec<String>,
}

#[derive(Subcommand)]
enum Command {
    /// Score predicted grasp rectangles against Cornell-format annotations.
    Eval {
        #[arg(long)]
        pred: PathBuf,
        #[arg(long)]
        truth: PathBuf,
        /// Minimum Jaccard index.
        #[arg(long)]
        jaccard: Option<f64>,
        /// Maximum orientation difference in degrees.
        #[arg(long)]
        angle_deg: Option<f64>,
        #[arg(long)]
        no_angle_check: bool,
        /// Restrict evaluation to the image ids listed in this file.
        #[arg(long)]
        split: Option<PathBuf>,
        #[arg(long)]
        report: Option<PathBuf>,
        #[command(flatten)]
        cfg: ConfigArgs,
    },
    /// Search for an antipodal grasp inside a pixel-polygon region.
    Grasp {
        #[arg(long)]
        cloud: PathBuf,
        /// Pixel polygon, e.g. "10,10 200,10 200,150 10,150".
        #[arg(long)]
        region: String,
        #[arg(long)]
        out: Option<PathBuf>,
        #[command(flatten)]
        cfg: ConfigArgs,
    },
    /// Time grasp search on the full cloud against the cropped cloud.
    Bench {
        #[arg(long)]
        cloud: PathBuf,
        #[arg(long)]
        region: String,
        #[arg(long, default_value_t = 20)]
        repeat: usize,
        #[command(flatten)]
        cfg: ConfigArgs,
    },
    /// Write a synthetic shape as PLY plus its grasp truth.
    Synth {
        #[arg(long, value_enum)]
        shape: Shape,
        /// Shape dimensions in meters: box w,d,h; cylinder radius,length;
        /// plane width,depth; sphere radius.
        #[arg(long)]
        dims: String,
        /// Object pose: 9 row-major rotation entries, then the translation.
        #[arg(long)]
        pose: Option<String>,
        #[arg(long)]
        out: PathBuf,
        #[arg(long)]
        truth_out: Option<PathBuf>,
        #[command(flatten)]
        cfg: ConfigArgs,
    },
    /// Run the regression head on a 768-value feature file.
    Infer {
        #[arg(long)]
        weights: PathBuf,
        #[arg(long)]
        feature: PathBuf,
        #[arg(long, default_value_t = 5)]
        out_dim: usize,
        /// Also run the double-precision reference and report the gap.
        #[arg(long)]
        check_oracle: bool,
    },
    /// Inspect or create weight containers.
    Weights {
        #[command(subcommand)]
        action: WeightsAction,
    },
}

#[derive(Subcommand)]
enum WeightsAction {
    /// List tensor names and shapes.
    Inspect { file: PathBuf },
    /// Write a container with zero or seeded random weights.
    Init {
        #[arg(long)]
        out: PathBuf,
        #[arg(long, default_value_t = 64)]
        dim: usize,
        #[arg(long, default_value_t = 4)]
        heads: usize,
        #[arg(long, default_value_t = 0.5)]
        alpha: f64,
        #[arg(long, default_value_t = 5)]
        out_dim: usize,
        /// Random weights from this seed; zeros when absent.
        #[arg(long)]
        seed: Option<u64>,
    },
}

#[derive(Clone, Copy, ValueEnum)]
pub enum Shape {
    Box,
    Cylinder,
    Plane,
    Sphere,
}

/// Failure carrying its process exit code.
#[derive(Debug)]
pub struct Failure {
    pub code: u8,
    pub message: String,
}

impl Failure {
    pub fn input(message: impl Into<String>) -> Self {
        Self {
            code: 2,
            message: message.into(),
        }
    }

    pub fn no_grasp(message: impl Into<String>) -> Self {
        Self {
            code: 3,
            message: message.into(),
        }
    }
}

fn configure_threads() -> Result<(), Failure> {
    let Ok(v) = std::env::var("GRASPKIT_THREADS") else {
        return Ok(());
    };
    let n: usize = v
        .trim()
        .parse()
        .map_err(|_| Failure::input(format!("GRASPKIT_THREADS: expected a count, got {v:?}")))?;
    if n > 0 {
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .map_err(|e| Failure::input(format!("GRASPKIT_THREADS: {e}")))?;
    }
    Ok(())
}

fn run(cli: Cli) -> Result<(), Failure> {
    configure_threads()?;
    match cli.command {
        Command::Eval {
            pred,
            truth,
            jaccard,
            angle_deg,
            no_angle_check,
            split,
            report,
            cfg,
        } => commands::eval(commands::EvalArgs {
            pred,
            truth,
            jaccard,
            angle_deg,
            no_angle_check,
            split,
            report,
            cfg,
        }),
        Command::Grasp {
            cloud,
            region,
            out,
            cfg,
        } => commands::grasp(&cloud, &region, out.as_deref(), &cfg),
        Command::Bench {
            cloud,
            region,
            repeat,
            cfg,
        } => commands::bench(&cloud, &region, repeat, &cfg),
        Command::Synth {
            shape,
            dims,
            pose,
            out,
            truth_out,
            cfg,
        } => commands::synth(shape, &dims, pose.as_deref(), &out, truth_out.as_deref(), &cfg),
        Command::Infer {
            weights,
            feature,
            out_dim,
            check_oracle,
        } => commands::infer(&weights, &feature, out_dim, check_oracle),
        Command::Weights { action } => match action {
            WeightsAction::Inspect { file } => commands::weights_inspect(&file),
            WeightsAction::Init {
                out,
                dim,
                heads,
                alpha,
                out_dim,
                seed,
            } => commands::weights_init(&out, dim, heads, alpha, out_dim, seed),
        },
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() {
                ExitCode::from(2)
            } else {
                ExitCode::SUCCESS
            };
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            eprintln!("error: {}", f.message);
            ExitCode::from(f.code)
        }
    }
}
