//! `most localize` configuration: flags, config files, and `--print-config`.
//!
//! Precedence, lowest first: built-in defaults, `--config` file, explicit
//! flags, then the `MOST_WORKERS` environment variable for the worker count.

use std::fs;
use std::path::PathBuf;

use clap::Args;
use serde::{Deserialize, Serialize};

use most_core::{Connectivity, GridMetric, LocalizeConfig};

use crate::CliError;

pub const WORKERS_ENV: &str = "MOST_WORKERS";

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub input: Option<PathBuf>,
    pub output: Option<PathBuf>,
    pub eba: most_core::EbaConfig,
    pub cluster: most_core::ClusterConfig,
    pub boxer: most_core::BoxerConfig,
    /// Threads; `None` uses every core.
    pub workers: Option<usize>,
    pub seed: u64,
}

impl RunConfig {
    pub fn pipeline(&self) -> LocalizeConfig {
        LocalizeConfig { eba: self.eba.clone(), cluster: self.cluster.clone(), boxer: self.boxer.clone() }
    }

    pub fn validate(&self) -> Result<(), CliError> {
        self.pipeline().validate().map_err(|e| CliError::Usage(e.to_string()))?;
        if self.workers == Some(0) {
            return Err(CliError::Usage("workers must be ≥ 1".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, clap::ValueEnum)]
pub enum MetricArg {
    Manhattan,
    Chebyshev,
}

#[derive(Debug, Clone, Default, Args)]
pub struct LocalizeArgs {
    /// Directory of .mfeat files
    #[arg(long)]
    pub input: Option<PathBuf>,
    /// Boxes JSON destination (`-` for stdout)
    #[arg(long, short = 'o')]
    pub out: Option<PathBuf>,
    /// Load settings from a JSON file written by --print-config
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Print the resolved configuration as JSON and exit
    #[arg(long)]
    pub print_config: bool,

    /// Box sizes for the entropy vote, e.g. 1,2,3,4,5
    #[arg(long, value_delimiter = ',')]
    pub kernels: Option<Vec<usize>>,
    #[arg(long, allow_negative_numbers = true)]
    pub tau_a: Option<f64>,
    #[arg(long)]
    pub tau_b: Option<f64>,
    /// Histogram bins for the entropy pmf
    #[arg(long)]
    pub bins: Option<usize>,

    /// Clustering distance threshold in tokens
    #[arg(long)]
    pub eps: Option<usize>,
    #[arg(long)]
    pub min_pts: Option<usize>,
    #[arg(long, value_enum)]
    pub metric: Option<MetricArg>,

    /// Minimum box area in pixels
    #[arg(long)]
    pub min_area: Option<u64>,
    /// Drop boxes covering at least this fraction of the image
    #[arg(long)]
    pub whole_image_frac: Option<f64>,
    /// Island connectivity: 4 or 8
    #[arg(long, value_parser = parse_connectivity)]
    pub connectivity: Option<Connectivity>,

    #[arg(long)]
    pub workers: Option<usize>,
    #[arg(long)]
    pub seed: Option<u64>,
}

fn parse_connectivity(s: &str) -> Result<Connectivity, String> {
    s.parse::<u8>()
        .ok()
        .and_then(Connectivity::from_neighbors)
        .ok_or_else(|| format!("connectivity must be 4 or 8, got {s:?}"))
}

impl LocalizeArgs {
    /// Merges defaults, the optional config file, flags, and the environment.
    pub fn resolve(&self, env_workers: Option<&str>) -> Result<RunConfig, CliError> {
        let mut cfg = match &self.config {
            Some(path) => {
                let text = fs::read_to_string(path)
                    .map_err(|e| CliError::Io(format!("{}: {e}", path.display())))?;
                serde_json::from_str(&text)
                    .map_err(|e| CliError::Schema(format!("{}: {e}", path.display())))?
            }
            None => RunConfig::default(),
        };
        if let Some(v) = &self.input {
            cfg.input = Some(v.clone());
        }
        if let Some(v) = &self.out {
            cfg.output = Some(v.clone());
        }
        if let Some(v) = &self.kernels {
            cfg.eba.kernels = v.clone();
        }
        if let Some(v) = self.tau_a {
            cfg.eba.tau_a = v;
        }
        if let Some(v) = self.tau_b {
            cfg.eba.tau_b = v;
        }
        if let Some(v) = self.bins {
            cfg.eba.bins = v;
        }
        if let Some(v) = self.eps {
            cfg.cluster.epsilon = v;
        }
        if let Some(v) = self.min_pts {
            cfg.cluster.min_pts = v;
        }
        if let Some(v) = self.metric {
            cfg.cluster.metric = match v {
                MetricArg::Manhattan => GridMetric::Manhattan,
                MetricArg::Chebyshev => GridMetric::Chebyshev,
            };
        }
        if let Some(v) = self.min_area {
            cfg.boxer.min_area = v;
        }
        if let Some(v) = self.whole_image_frac {
            cfg.boxer.whole_image_fraction = v;
        }
        if let Some(v) = self.connectivity {
            cfg.boxer.connectivity = v;
        }
        if let Some(v) = self.workers {
            cfg.workers = Some(v);
        }
        if let Some(v) = self.seed {
            cfg.seed = v;
        }
        if let Some(raw) = env_workers.filter(|s| !s.trim().is_empty()) {
            let n = raw
                .trim()
                .parse()
                .map_err(|_| CliError::Usage(format!("{WORKERS_ENV}={raw:?} is not a thread count")))?;
            cfg.workers = Some(n);
        }
        cfg.validate()?;
        Ok(cfg)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use clap::Parser;

    #[derive(Parser)]
    struct Wrap {
        #[command(flatten)]
        args: LocalizeArgs,
    }

    fn parse(argv: &[&str]) -> LocalizeArgs {
        Wrap::parse_from(std::iter::once("most").chain(argv.iter().copied())).args
    }

    #[test]
    fn defaults_match_core() {
        let cfg = parse(&[]).resolve(None).unwrap();
        assert_eq!(cfg.pipeline(), LocalizeConfig::default());
        assert_eq!(cfg.workers, None);
    }

    #[test]
    fn flags_override_and_validate() {
        let cfg = parse(&[
            "--kernels", "1,3", "--tau-a", "-0.5", "--eps", "1", "--metric", "chebyshev",
            "--connectivity", "8", "--min-area", "0",
        ])
        .resolve(None)
        .unwrap();
        assert_eq!(cfg.eba.kernels, vec![1, 3]);
        assert_eq!(cfg.eba.tau_a, -0.5);
        assert_eq!(cfg.cluster.metric, GridMetric::Chebyshev);
        assert_eq!(cfg.boxer.connectivity, Connectivity::Eight);
        assert!(parse(&["--kernels", "3,1"]).resolve(None).is_err());
        assert!(parse(&["--whole-image-frac", "0"]).resolve(None).is_err());
    }

    #[test]
    fn environment_overrides_workers_flag() {
        let cfg = parse(&["--workers", "3"]).resolve(Some("5")).unwrap();
        assert_eq!(cfg.workers, Some(5));
        assert!(parse(&[]).resolve(Some("many")).is_err());
        assert_eq!(parse(&["--workers", "3"]).resolve(Some("")).unwrap().workers, Some(3));
    }

    #[test]
    fn printed_config_replays() {
        let dir = tempfile::tempdir().unwrap();
        let first = parse(&["--input", "feats", "--kernels", "1,2,4", "--bins", "64", "--workers", "2"])
            .resolve(None)
            .unwrap();
        let dump = crate::schema::to_json(&first);
        let path = dir.path().join("run.json");
        fs::write(&path, &dump).unwrap();
        let replay = parse(&["--config", path.to_str().unwrap()]).resolve(None).unwrap();
        assert_eq!(replay, first);
        assert_eq!(crate::schema::to_json(&replay), dump);
    }
}
