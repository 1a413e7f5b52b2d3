use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use mfa_cli::commands::{self, InferSelection, Overrides};
use mfa_cli::config;

/// Bayesian material-flow analysis under network-structure uncertainty:
/// enumerate candidate structures, infer mass flows against observations,
/// select and average structures by evidence, attribute emissions, and
/// rank demand-reduction options by risk appetite.
#[derive(Parser)]
#[command(name = "mfa", version, about)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(clap::Args, Clone)]
struct Common {
    /// Path to the run configuration (TOML).
    #[arg(long)]
    config: PathBuf,
    /// Output directory (default: the config's `run.out`, else `out/`).
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Subcommand)]
enum Command {
    /// List all candidate structures with their prior probabilities.
    Enumerate {
        #[command(flatten)]
        common: Common,
    },
    /// Run SMC inference for one structure or all of them.
    Infer {
        #[command(flatten)]
        common: Common,
        /// Structure code, e.g. 0100.
        #[arg(long, conflicts_with = "all")]
        structure: Option<String>,
        /// Infer every candidate structure (parallel across structures).
        #[arg(long)]
        all: bool,
        /// Particle count override.
        #[arg(long)]
        particles: Option<usize>,
        /// ESS target fraction override.
        #[arg(long, value_name = "FRACTION")]
        ess_target: Option<f64>,
        /// Mutation steps per tempering stage.
        #[arg(long)]
        mutation_steps: Option<usize>,
        /// Master seed override.
        #[arg(long)]
        seed: Option<u64>,
        /// Missing-record policy: exclude or compact-support.
        #[arg(long)]
        policy: Option<String>,
        /// Worker threads for --all (default: available cores).
        #[arg(long)]
        threads: Option<usize>,
    },
    /// Compute structure posteriors and pairwise posterior ratios.
    Select {
        #[command(flatten)]
        common: Common,
    },
    /// Pool posterior-predictive flows across structures (model averaging).
    Average {
        #[command(flatten)]
        common: Common,
    },
    /// Propagate flows to emissions and per-sector intensities.
    Impact {
        #[command(flatten)]
        common: Common,
    },
    /// Rank demand-reduction options under the decision metrics.
    Decide {
        #[command(flatten)]
        common: Common,
    },
}

fn run() -> mfa_cli::Result<()> {
    let cli = Cli::parse();
    match cli.command {
        Command::Enumerate { common } => {
            let cfg = load(&common, &Overrides::default())?;
            commands::cmd_enumerate(&cfg)
        }
        Command::Infer {
            common,
            structure,
            all,
            particles,
            ess_target,
            mutation_steps,
            seed,
            policy,
            threads,
        } => {
            let ov = Overrides {
                particles,
                ess_target,
                mutation_steps,
                seed,
                policy,
                out: common.out.clone(),
            };
            let cfg = load(&common, &ov)?;
            let selection = match (structure, all) {
                (Some(code), false) => InferSelection::One(code),
                (None, true) => InferSelection::All,
                (None, false) => {
                    return Err(mfa_cli::CliError::Config(
                        "pass --structure CODE or --all".into(),
                    ))
                }
                (Some(_), true) => unreachable!("clap forbids this combination"),
            };
            commands::cmd_infer(&cfg, selection, threads)
        }
        Command::Select { common } => {
            let cfg = load(&common, &Overrides::default())?;
            commands::cmd_select(&cfg)
        }
        Command::Average { common } => {
            let cfg = load(&common, &Overrides::default())?;
            commands::cmd_average(&cfg)
        }
        Command::Impact { common } => {
            let cfg = load(&common, &Overrides::default())?;
            commands::cmd_impact(&cfg)
        }
        Command::Decide { common } => {
            let cfg = load(&common, &Overrides::default())?;
            commands::cmd_decide(&cfg)
        }
    }
}

fn load(common: &Common, ov: &Overrides) -> mfa_cli::Result<config::RunConfig> {
    let mut cfg = config::load(&common.config)?;
    let mut ov = ov.clone();
    if ov.out.is_none() {
        ov.out = common.out.clone();
    }
    commands::apply_overrides(&mut cfg, &ov)?;
    Ok(cfg)
}

fn main() -> ExitCode {
    match run() {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
