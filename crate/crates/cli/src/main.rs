use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use most_cli::config::{LocalizeArgs, WORKERS_ENV};
use most_cli::discover::{parse_k_range, DiscoverArgs};
use most_cli::schema::to_json;
use most_cli::{discover, eval, localize, viz, CliError};
use most_core::discovery::DiscoveryConfig;

/// Training-free object localization over precomputed ViT token features.
#[derive(Parser)]
#[command(name = "most", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Predict boxes for every .mfeat file in a directory
    Localize(LocalizeArgs),
    /// Score predicted boxes against ground truth
    Eval {
        #[arg(long)]
        pred: PathBuf,
        #[arg(long)]
        gt: PathBuf,
        #[arg(long, default_value_t = eval::DEFAULT_IOU)]
        iou_thresh: f64,
        /// Metrics JSON destination
        #[arg(long, short = 'o')]
        out: Option<PathBuf>,
    },
    /// Draw boxes over the source images as SVG
    Viz {
        #[arg(long)]
        boxes: PathBuf,
        #[arg(long)]
        images: PathBuf,
        #[arg(long, short = 'o')]
        out: PathBuf,
    },
    /// Cluster region descriptors and pick K from the inertia curve
    Discover {
        /// Directory of <image_id>__<pool_id>.mfeat files
        #[arg(long)]
        regions: PathBuf,
        #[arg(long, default_value = "2:150")]
        k_range: String,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, default_value_t = 10_000)]
        sample: usize,
        #[arg(long, default_value_t = 4)]
        restarts: usize,
        /// Boxes JSON used to attach a box to each region
        #[arg(long)]
        boxes: Option<PathBuf>,
        #[arg(long, short = 'o')]
        out: PathBuf,
        #[arg(long)]
        workers: Option<usize>,
    },
}

fn run(cli: Cli) -> Result<(), CliError> {
    match cli.command {
        Command::Localize(args) => {
            let env = std::env::var(WORKERS_ENV).ok();
            let cfg = args.resolve(env.as_deref())?;
            if args.print_config {
                print!("{}", to_json(&cfg));
                return Ok(());
            }
            let boxes = localize::run(&cfg)?;
            let n: usize = boxes.images.iter().map(|i| i.boxes.len()).sum();
            log::info!("{} images, {} boxes, {} failures", boxes.images.len(), n, boxes.errors.len());
        }
        Command::Eval { pred, gt, iou_thresh, out } => {
            eval::run(&pred, &gt, iou_thresh, out.as_deref())?;
        }
        Command::Viz { boxes, images, out } => {
            let n = viz::run(&boxes, &images, &out)?;
            log::info!("wrote {n} overlays to {}", out.display());
        }
        Command::Discover { regions, k_range, seed, sample, restarts, boxes, out, workers } => {
            let k_values = parse_k_range(&k_range).map_err(CliError::Usage)?;
            if sample == 0 || restarts == 0 {
                return Err(CliError::Usage("--sample and --restarts must be ≥ 1".into()));
            }
            discover::run(&DiscoverArgs {
                regions: &regions,
                boxes: boxes.as_deref(),
                out: &out,
                config: DiscoveryConfig { k_values, sample_size: sample, restarts, seed },
                workers,
            })?;
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
