//! `mfirank`: rank lenders from conversion logs and evaluate rankings offline.
//!
//! Exit codes: 0 success, 1 usage or configuration error, 2 data error,
//! 3 internal invariant violation.

mod commands;
mod config;
mod failure;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use mfirank::data::LoanType;
use mfirank::features::FeatureSet;

use commands::{AbArgs, FixtureArgs};
use config::{Overrides, PipelineConfig};
use failure::{Failure, Kind};

#[derive(Parser, Debug)]
#[command(name = "mfirank", version, about = "Rank lenders by pairwise comparison of post-click features")]
struct Cli {
    #[command(subcommand)]
    command: Command,

    /// JSON pipeline configuration.
    #[arg(long, global = true, value_name = "PATH")]
    config: Option<PathBuf>,
    /// Comma-separated features: rating, lar, fairness, service, epc.
    #[arg(long, global = true, value_name = "LIST")]
    features: Option<FeatureSet>,
    /// Minimum co-applicants behind a reapproval probability.
    #[arg(long, global = true, value_name = "N")]
    min_support: Option<u64>,
    /// Teleportation weight added to every transition row, in [0, 1).
    #[arg(long, global = true, value_name = "X")]
    damping: Option<f64>,
    /// Loan type to build features from; repeat or comma-separate for several.
    #[arg(long, global = true, value_name = "T", value_delimiter = ',')]
    loan_type: Vec<LoanType>,
    /// Output directory.
    #[arg(long, global = true, value_name = "DIR")]
    out: Option<PathBuf>,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Parse the datasets and report counts and integrity warnings.
    Validate,
    /// Compute the per-lender feature table.
    Features,
    /// Rank lenders from a feature table CSV.
    Rank {
        /// Feature table; defaults to features.csv in the output directory.
        #[arg(long, value_name = "PATH")]
        input: Option<PathBuf>,
    },
    /// Replay history under a weekly retrained ranking.
    Evaluate,
    /// One-sided A/B tests.
    Abtest {
        /// Successes and trials of both groups: S1 N1 S2 N2.
        #[arg(long, num_args = 4, value_names = ["S1", "N1", "S2", "N2"])]
        fisher: Vec<u64>,
        /// Two files of numbers: sample 1, sample 2.
        #[arg(long, num_args = 2, value_names = ["FILE1", "FILE2"])]
        welch: Vec<PathBuf>,
        /// 2x2 counts for Yule's coefficient: N11 N10 N01 N00.
        #[arg(long, num_args = 4, value_names = ["N11", "N10", "N01", "N00"])]
        yule: Vec<u64>,
        /// Confidence level for --yule.
        #[arg(long, default_value_t = 0.995)]
        level: f64,
    },
    /// Turn an evaluation into plot-ready daily series.
    Report {
        /// Evaluation JSON; defaults to evaluation.json in the output directory.
        #[arg(long, value_name = "PATH")]
        input: Option<PathBuf>,
    },
    /// Write a synthetic dataset and a config pointing at it.
    Fixture {
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, default_value_t = 10)]
        mfis: usize,
        #[arg(long, default_value_t = 2000)]
        clients: usize,
        #[arg(long, default_value_t = 21)]
        days: u32,
    },
}

fn run(cli: Cli) -> Result<(), Failure> {
    let overrides = Overrides {
        features: cli.features,
        min_support: cli.min_support,
        damping: cli.damping,
        loan_types: (!cli.loan_type.is_empty()).then_some(cli.loan_type),
        out: cli.out,
    };
    // --features selects the replayed ranking's features under `evaluate`.
    let for_vra = matches!(cli.command, Command::Evaluate);
    let config = PipelineConfig::load(cli.config.as_deref(), &overrides, for_vra)?;
    match cli.command {
        Command::Validate => commands::cmd_validate(&config),
        Command::Features => commands::cmd_features(&config),
        Command::Rank { input } => commands::cmd_rank(&config, input.as_deref()),
        Command::Evaluate => commands::cmd_evaluate(&config),
        Command::Abtest { fisher, welch, yule, level } => {
            commands::cmd_abtest(&config, &AbArgs { fisher: &fisher, welch: &welch, yule: &yule, level })
        }
        Command::Report { input } => commands::cmd_report(&config, input.as_deref()),
        Command::Fixture { seed, mfis, clients, days } => {
            commands::cmd_fixture(&config, &FixtureArgs { seed, mfis, clients, days })
        }
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { ExitCode::from(Kind::Usage as u8) } else { ExitCode::SUCCESS };
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            eprintln!("error: {f}");
            ExitCode::from(f.kind as u8)
        }
    }
}
