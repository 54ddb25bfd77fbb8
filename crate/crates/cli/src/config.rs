use std::path::{Path, PathBuf};

use clap::{Args, ValueEnum};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::CliError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum Format {
    Json,
    Csv,
}

/// Settings that may come from a config file or from flags; flags win.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize, Args)]
#[serde(deny_unknown_fields)]
pub struct Overrides {
    /// Offspring law, e.g. "0:0.25,2:0.75" or "geom:0.6667".
    #[arg(long)]
    pub offspring: Option<String>,
    /// Tree depth (spine length for `spine`).
    #[arg(long)]
    pub depth: Option<usize>,
    /// Depth of the subtrees grafted on the spine.
    #[arg(long)]
    pub subtree_depth: Option<usize>,
    #[arg(long)]
    pub reps: Option<usize>,
    #[arg(long)]
    pub seed: Option<u64>,
    /// Abort when a sample holds more nodes than this.
    #[arg(long)]
    pub cap: Option<u64>,
    /// Depth at which W is sampled for the empirical tail.
    #[arg(long)]
    pub tail_depth: Option<usize>,
    /// Number of W samples behind the empirical tail.
    #[arg(long)]
    pub tail_reps: Option<usize>,
    /// Smallest ball generation allowed in covers.
    #[arg(long)]
    pub min_gen: Option<usize>,
    /// Extra generations below the functional depth used for W values.
    #[arg(long)]
    pub extra: Option<usize>,
    /// First generation of the thin-ray constraint.
    #[arg(long)]
    pub n0: Option<usize>,
    /// Points on the x-grid.
    #[arg(long)]
    pub x_points: Option<usize>,
    /// Upper end of the x-grid (default: the 1% survival quantile).
    #[arg(long)]
    pub x_max: Option<f64>,
    /// Points on the log-spaced r-grid of the gauge table.
    #[arg(long)]
    pub r_points: Option<usize>,
    /// Spine length used for the density ratios in `cover`.
    #[arg(long)]
    pub spine_depth: Option<usize>,
    /// Spines per seed for the density ratios in `cover`.
    #[arg(long)]
    pub spine_reps: Option<usize>,
    /// Number of seeds for the density ratios in `cover`.
    #[arg(long)]
    pub spine_seeds: Option<usize>,
    #[arg(long)]
    pub output_dir: Option<PathBuf>,
    #[arg(long, value_enum)]
    pub format: Option<Format>,
    /// Worker threads (default: all cores). Results do not depend on it.
    #[arg(long)]
    pub threads: Option<usize>,
}

impl Overrides {
    pub fn from_file(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::Usage(format!("cannot read config {}: {e}", path.display())))?;
        toml::from_str(&text).map_err(|e| CliError::Usage(format!("config {}: {e}", path.display())))
    }

    /// `self` where set, otherwise `base`.
    pub fn over(self, base: Overrides) -> Overrides {
        macro_rules! pick {
            ($($f:ident),*) => { Overrides { $($f: self.$f.or(base.$f)),* } };
        }
        pick!(
            offspring,
            depth,
            subtree_depth,
            reps,
            seed,
            cap,
            tail_depth,
            tail_reps,
            min_gen,
            extra,
            n0,
            x_points,
            x_max,
            r_points,
            spine_depth,
            spine_reps,
            spine_seeds,
            output_dir,
            format,
            threads
        )
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Command {
    Tail,
    Spine,
    Verify,
    Cover,
    Bounds,
    Thin,
    Sample,
}

impl Command {
    pub fn name(self) -> &'static str {
        match self {
            Command::Tail => "tail",
            Command::Spine => "spine",
            Command::Verify => "verify",
            Command::Cover => "cover",
            Command::Bounds => "bounds",
            Command::Thin => "thin",
            Command::Sample => "sample",
        }
    }

    fn default_depth(self) -> usize {
        match self {
            Command::Tail => 14,
            Command::Spine => 128,
            Command::Verify => 2,
            Command::Cover => 10,
            Command::Bounds => 12,
            Command::Thin => 8,
            Command::Sample => 6,
        }
    }

    fn default_reps(self) -> usize {
        match self {
            Command::Tail => 10_000,
            Command::Spine => 2_000,
            Command::Verify => 100_000,
            Command::Cover => 200,
            Command::Bounds => 100_000,
            Command::Thin => 10_000,
            Command::Sample => 10,
        }
    }
}

/// Fully resolved settings of one run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentConfig {
    pub command: String,
    pub offspring: String,
    pub depth: usize,
    pub subtree_depth: usize,
    pub reps: usize,
    pub seed: u64,
    pub cap: u64,
    pub tail_depth: usize,
    pub tail_reps: usize,
    pub min_gen: usize,
    pub extra: usize,
    pub n0: usize,
    pub x_points: usize,
    pub x_max: Option<f64>,
    pub r_points: usize,
    pub spine_depth: usize,
    pub spine_reps: usize,
    pub spine_seeds: usize,
    pub output_dir: PathBuf,
    pub format: Format,
    pub threads: Option<usize>,
}

impl ExperimentConfig {
    pub fn resolve(command: Command, o: Overrides) -> Result<Self, CliError> {
        let offspring = o
            .offspring
            .ok_or_else(|| CliError::Usage("--offspring is required (flag or config key)".into()))?;
        let subtree_depth = o.subtree_depth.unwrap_or(12);
        let depth = o.depth.unwrap_or(command.default_depth());
        let tail_depth = o.tail_depth.unwrap_or(match command {
            Command::Bounds => depth,
            Command::Thin | Command::Tail => 14,
            _ => subtree_depth,
        });
        let cfg = ExperimentConfig {
            command: command.name().into(),
            offspring,
            depth,
            subtree_depth,
            reps: o.reps.unwrap_or(command.default_reps()),
            seed: o.seed.unwrap_or(0),
            cap: o.cap.unwrap_or(50_000_000),
            tail_depth,
            tail_reps: o.tail_reps.unwrap_or(20_000),
            min_gen: o.min_gen.unwrap_or(2),
            extra: o.extra.unwrap_or(4),
            n0: o.n0.unwrap_or(2),
            x_points: o.x_points.unwrap_or(20),
            x_max: o.x_max,
            r_points: o.r_points.unwrap_or(50),
            spine_depth: o.spine_depth.unwrap_or(64),
            spine_reps: o.spine_reps.unwrap_or(500),
            spine_seeds: o.spine_seeds.unwrap_or(3),
            output_dir: o.output_dir.unwrap_or_else(|| PathBuf::from("gwlab-out")),
            format: o.format.unwrap_or(Format::Json),
            threads: o.threads,
        };
        cfg.validate()?;
        Ok(cfg)
    }

    fn validate(&self) -> Result<(), CliError> {
        let bad = |m: &str| Err(CliError::Usage(m.into()));
        if self.reps == 0 || self.tail_reps == 0 || self.spine_reps == 0 || self.spine_seeds == 0 {
            return bad("replica counts must be positive");
        }
        if self.x_points < 2 || self.r_points < 2 {
            return bad("grids need at least 2 points");
        }
        if self.threads == Some(0) {
            return bad("--threads must be positive");
        }
        if let Some(x) = self.x_max {
            if !(x > 0.0 && x.is_finite()) {
                return bad("--x-max must be positive");
            }
        }
        for (name, d) in [
            ("depth", self.depth),
            ("subtree-depth", self.subtree_depth),
            ("tail-depth", self.tail_depth),
            ("spine-depth", self.spine_depth),
        ] {
            if d > 4096 {
                return Err(CliError::Usage(format!("--{name} {d} is beyond the supported range")));
            }
        }
        Ok(())
    }

    /// SHA-256 of the settings that determine the results (output location
    /// and thread count excluded).
    pub fn hash(&self) -> String {
        let mut c = self.clone();
        c.output_dir = PathBuf::new();
        c.threads = None;
        let text = serde_json::to_string(&c).expect("config serialises");
        hex::encode(Sha256::digest(text.as_bytes()))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sample() -> ExperimentConfig {
        ExperimentConfig::resolve(
            Command::Tail,
            Overrides {
                offspring: Some("0:0.25,2:0.75".into()),
                seed: Some(7),
                x_max: Some(3.5),
                ..Default::default()
            },
        )
        .unwrap()
    }

    #[test]
    fn round_trips() {
        let c = sample();
        let json = serde_json::to_string(&c).unwrap();
        assert_eq!(serde_json::from_str::<ExperimentConfig>(&json).unwrap(), c);
        let t = toml::to_string(&c).unwrap();
        assert_eq!(toml::from_str::<ExperimentConfig>(&t).unwrap(), c);
    }

    #[test]
    fn flags_win() {
        let file = Overrides {
            depth: Some(3),
            reps: Some(5),
            ..Default::default()
        };
        let flags = Overrides {
            depth: Some(9),
            ..Default::default()
        };
        let o = flags.over(file);
        assert_eq!((o.depth, o.reps), (Some(9), Some(5)));
    }

    #[test]
    fn hash_ignores_location() {
        let a = sample();
        let mut b = a.clone();
        b.output_dir = "elsewhere".into();
        b.threads = Some(3);
        assert_eq!(a.hash(), b.hash());
        b.seed = 8;
        assert_ne!(a.hash(), b.hash());
    }

    #[test]
    fn unknown_keys_rejected() {
        assert!(toml::from_str::<Overrides>("sead = 3").is_err());
        assert_eq!(toml::from_str::<Overrides>("seed = 3").unwrap().seed, Some(3));
    }
}
