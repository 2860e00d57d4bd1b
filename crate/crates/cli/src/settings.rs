//! Option resolution. Every flag has an environment variable; anything left
//! unset by both falls back to the TOML config file, then to the built-in
//! default.

use std::path::{Path, PathBuf};

use anyhow::Context;
use clap::Args;
use serde::Deserialize;

use longact::agent::AgentConfig;
use longact::session::SessionConfig;

pub const DEFAULT_CONFIG: &str = "longact.toml";

/// Copies every field that is `None` in `self` from `file`.
macro_rules! fill {
    ($ty:ident { $($field:ident),* $(,)? }) => {
        impl $ty {
            pub fn fill(self, file: Self) -> Self {
                Self { $($field: self.$field.or(file.$field)),* }
            }
        }
    };
}

#[derive(Args, Clone, Debug, Default, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GenerateOpts {
    /// First seed; episode i uses seed + i for both layout and task.
    #[arg(long, env = "LONGACT_SEED")]
    pub seed: Option<u64>,
    /// Number of episodes.
    #[arg(long, env = "LONGACT_COUNT")]
    pub count: Option<usize>,
    /// Restrict to one scenario (cleaning, work, rest, dining); default cycles all four.
    #[arg(long, env = "LONGACT_SCENARIO")]
    pub scenario: Option<String>,
    /// Output directory.
    #[arg(long, env = "LONGACT_OUT")]
    pub out: Option<PathBuf>,
}
fill!(GenerateOpts { seed, count, scenario, out });

#[derive(Args, Clone, Debug, Default, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunOpts {
    /// Episode file, corpus directory or directory of episode files.
    #[arg(long, env = "LONGACT_EPISODES")]
    pub episodes: Option<PathBuf>,
    /// oracle, greedy-template, random, noop or external.
    #[arg(long, env = "LONGACT_REASONER")]
    pub reasoner: Option<String>,
    /// Command line of the external reasoner process.
    #[arg(long, env = "LONGACT_REASONER_COMMAND")]
    pub reasoner_command: Option<String>,
    /// Worker slots.
    #[arg(long, env = "LONGACT_PARALLELISM")]
    pub parallelism: Option<usize>,
    /// Output directory for logs and the run manifest.
    #[arg(long, env = "LONGACT_OUT")]
    pub out: Option<PathBuf>,
    /// Give the agent the concise instruction.
    #[arg(long, env = "LONGACT_CONCISE", num_args = 0..=1, default_missing_value = "true")]
    pub concise: Option<bool>,
    #[arg(long, env = "LONGACT_IR_SEGMENTS")]
    pub ir_segments: Option<usize>,
}
fill!(RunOpts { episodes, reasoner, reasoner_command, parallelism, out, concise, ir_segments });

#[derive(Args, Clone, Debug, Default, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EvaluateOpts {
    #[arg(long, env = "LONGACT_EPISODES")]
    pub episodes: Option<PathBuf>,
    /// Write per-log reports as JSON here.
    #[arg(long, env = "LONGACT_JSON")]
    pub json: Option<PathBuf>,
    /// Write the CSV table here instead of stdout.
    #[arg(long, env = "LONGACT_CSV")]
    pub csv: Option<PathBuf>,
    #[arg(long, env = "LONGACT_IR_SEGMENTS")]
    pub ir_segments: Option<usize>,
}
fill!(EvaluateOpts { episodes, json, csv, ir_segments });

#[derive(Args, Clone, Debug, Default, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ReplayOpts {
    #[arg(long, env = "LONGACT_EPISODES")]
    pub episodes: Option<PathBuf>,
    /// Run manifest whose reports the replays must reproduce.
    #[arg(long, env = "LONGACT_MANIFEST")]
    pub manifest: Option<PathBuf>,
    #[arg(long, env = "LONGACT_IR_SEGMENTS")]
    pub ir_segments: Option<usize>,
}
fill!(ReplayOpts { episodes, manifest, ir_segments });

#[derive(Args, Clone, Debug, Default, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct IrOpts {
    /// Maximum segmentation.
    #[arg(short, long, env = "LONGACT_IR_SEGMENTS")]
    pub n: Option<usize>,
    /// Also print the per-level trend slopes.
    #[arg(long, env = "LONGACT_LEVELS", num_args = 0..=1, default_missing_value = "true")]
    pub levels: Option<bool>,
}
fill!(IrOpts { n, levels });

#[derive(Args, Clone, Debug, Default, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CurvesOpts {
    /// Series length T.
    #[arg(long, env = "LONGACT_T_MAX")]
    pub t_max: Option<usize>,
    #[arg(short, long, env = "LONGACT_IR_SEGMENTS")]
    pub n: Option<usize>,
    /// Comma-separated IR targets.
    #[arg(long, env = "LONGACT_TARGETS", value_delimiter = ',')]
    pub targets: Option<Vec<f64>>,
    /// Points sampled per curve.
    #[arg(long, env = "LONGACT_POINTS")]
    pub points: Option<usize>,
    #[arg(long, env = "LONGACT_OUT")]
    pub out: Option<PathBuf>,
}
fill!(CurvesOpts { t_max, n, targets, points, out });

#[derive(Args, Clone, Debug, Default, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ServeOpts {
    #[arg(long, env = "LONGACT_BIND")]
    pub bind: Option<String>,
    #[arg(long, env = "LONGACT_EPISODES")]
    pub episodes: Option<PathBuf>,
    /// Directory for session logs.
    #[arg(long, env = "LONGACT_LOGS")]
    pub logs: Option<PathBuf>,
}
fill!(ServeOpts { bind, episodes, logs });

/// Contents of the config file: one table per subcommand plus the agent
/// and session settings shared by all of them.
#[derive(Clone, Debug, Default, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ConfigFile {
    pub agent: AgentConfig,
    pub session: SessionConfig,
    pub generate: GenerateOpts,
    pub run: RunOpts,
    pub evaluate: EvaluateOpts,
    pub replay: ReplayOpts,
    pub ir: IrOpts,
    pub curves: CurvesOpts,
    pub serve: ServeOpts,
}

impl ConfigFile {
    /// An explicit path must exist; the default file is optional.
    pub fn load(explicit: Option<&Path>) -> anyhow::Result<Self> {
        let (path, required) = match explicit {
            Some(p) => (p.to_owned(), true),
            None => (PathBuf::from(DEFAULT_CONFIG), false),
        };
        if !required && !path.exists() {
            return Ok(Self::default());
        }
        let text = std::fs::read_to_string(&path).with_context(|| format!("reading {}", path.display()))?;
        toml::from_str(&text).with_context(|| format!("parsing {}", path.display()))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn flag_wins_over_file() {
        let flag = RunOpts { parallelism: Some(2), ..Default::default() };
        let file = RunOpts { parallelism: Some(8), reasoner: Some("noop".into()), ..Default::default() };
        let merged = flag.fill(file);
        assert_eq!(merged.parallelism, Some(2));
        assert_eq!(merged.reasoner.as_deref(), Some("noop"));
    }

    #[test]
    fn config_file_parses() {
        let cfg: ConfigFile = toml::from_str(
            "[agent]\nrefine_budget = 3\n[session]\nir_segments = 8\n[run]\nreasoner = \"oracle\"\nparallelism = 4\n",
        )
        .unwrap();
        assert_eq!(cfg.agent.refine_budget, 3);
        assert_eq!(cfg.session.ir_segments, 8);
        assert_eq!(cfg.run.parallelism, Some(4));
        assert!(toml::from_str::<ConfigFile>("[run]\nthreads = 4\n").is_err());
    }
}
