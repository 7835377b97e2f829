use std::io;
use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};
use contra_core::dbs::{DEFAULT_L_MAX, DEFAULT_N, DEFAULT_T_MAX};
use contra_core::grpo::DEFAULT_EPSILON;
use contra_core::literal::EqualityConfig;
use contra_core::reward::DEFAULT_ALPHA;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("{path}: {source}")]
    Io { path: String, source: io::Error },
    #[error("{path}:{line}: {message}")]
    Record {
        path: String,
        line: usize,
        message: String,
    },
    #[error("{0}")]
    Usage(String),
    #[error("internal invariant violated: {0}")]
    Invariant(String),
}

impl CliError {
    pub fn exit_code(&self) -> u8 {
        match self {
            CliError::Invariant(_) => 3,
            _ => 2,
        }
    }
}

#[derive(Debug, Parser)]
#[command(
    name = "contra",
    version,
    about = "Validate, score and sample block-level execution traces"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
    #[command(flatten)]
    pub knobs: Knobs,
}

#[derive(Debug, Args)]
pub struct Knobs {
    /// Weight of the process reward in the total
    #[arg(long, global = true, default_value_t = DEFAULT_ALPHA)]
    pub alpha: f64,
    /// Stabiliser added to the group standard deviation
    #[arg(long, global = true, default_value_t = DEFAULT_EPSILON)]
    pub epsilon: f64,
    /// Sampling budget per prompt
    #[arg(long, global = true, default_value_t = DEFAULT_N)]
    pub n: usize,
    /// Maximum number of sampling stages
    #[arg(long, global = true, default_value_t = DEFAULT_T_MAX)]
    pub t_max: usize,
    /// Maximum trajectory length in policy length units
    #[arg(long, global = true, default_value_t = DEFAULT_L_MAX)]
    pub l_max: usize,
    #[arg(long, global = true, default_value_t = 0)]
    pub seed: u64,
    /// Relative tolerance for float comparisons; 0 compares exactly
    #[arg(long, global = true, default_value_t = 0.0)]
    pub rel_tol: f64,
    /// Rollouts per prompt expected by `advantage`
    #[arg(long, global = true, default_value_t = 8)]
    pub group_size: usize,
    /// Output path, `-` for stdout
    #[arg(short, long, global = true, default_value = "-")]
    pub output: PathBuf,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Check the format of each rollout against its reference trace
    Validate { gt: PathBuf, rollouts: PathBuf },
    /// Reward each rollout
    Score { gt: PathBuf, rollouts: PathBuf },
    /// Group-relative advantages from reward records
    Advantage { rewards: PathBuf },
    /// Reasoning consistency score per rollout and on average
    Rcs { gt: PathBuf, rollouts: PathBuf },
    /// Sample trajectories for each reference trace with a mock policy
    DbsRun {
        gt: PathBuf,
        /// oracle, noisy:P, gibberish or scripted:PATH
        #[arg(long, default_value = "oracle")]
        policy: String,
        #[arg(long, value_enum, default_value_t = Mode::Dbs)]
        mode: Mode,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Mode {
    /// The whole budget goes to beam sampling
    Dbs,
    /// Half regular sampling, half beam sampling
    Mixed,
}

/// Validated settings shared by every subcommand.
#[derive(Debug, Clone)]
pub struct RunConfig {
    pub alpha: f64,
    pub epsilon: f64,
    pub n: usize,
    pub t_max: usize,
    pub l_max: usize,
    pub seed: u64,
    pub equality: EqualityConfig,
    pub group_size: usize,
    pub output: PathBuf,
}

impl TryFrom<Knobs> for RunConfig {
    type Error = CliError;

    fn try_from(k: Knobs) -> Result<Self, CliError> {
        if !(k.alpha.is_finite() && k.alpha >= 0.0) {
            return Err(CliError::Usage(format!(
                "--alpha must be finite and >= 0, got {}",
                k.alpha
            )));
        }
        if !(k.rel_tol.is_finite() && k.rel_tol >= 0.0) {
            return Err(CliError::Usage(format!(
                "--rel-tol must be finite and >= 0, got {}",
                k.rel_tol
            )));
        }
        if !(k.epsilon.is_finite() && k.epsilon > 0.0) {
            return Err(CliError::Usage(format!(
                "--epsilon must be finite and > 0, got {}",
                k.epsilon
            )));
        }
        for (name, v) in [
            ("--n", k.n),
            ("--t-max", k.t_max),
            ("--l-max", k.l_max),
            ("--group-size", k.group_size),
        ] {
            if v == 0 {
                return Err(CliError::Usage(format!("{name} must be at least 1")));
            }
        }
        Ok(RunConfig {
            alpha: k.alpha,
            epsilon: k.epsilon,
            n: k.n,
            t_max: k.t_max,
            l_max: k.l_max,
            seed: k.seed,
            equality: EqualityConfig::with_rel_tol(k.rel_tol),
            group_size: k.group_size,
            output: k.output,
        })
    }
}
