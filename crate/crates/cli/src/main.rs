use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};
use rotip_cli::{default_goldens, execute, Command, Invocation};
use rotip_core::feed::FeedPolicy;

/// Simulated tactile grasping experiments for thin, flexible sheets.
#[derive(Debug, Parser)]
#[command(name = "rotip", version)]
struct Cli {
    /// Scenario TOML file; built-in defaults when absent.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Use seeds 0..N.
    #[arg(long, global = true, conflicts_with = "seed_list")]
    seeds: Option<u64>,
    /// Comma-separated seeds.
    #[arg(long, global = true, value_delimiter = ',')]
    seed_list: Option<Vec<u64>>,
    #[arg(long, global = true, default_value = "out")]
    out: PathBuf,
    /// Run the acceptance checks and compare with the committed goldens.
    #[arg(long, global = true)]
    check: bool,
    /// Record the output hashes as the golden for this command.
    #[arg(long, global = true, hide = true)]
    bless: bool,
    #[arg(long, global = true)]
    goldens: Option<PathBuf>,
    #[command(subcommand)]
    command: Sub,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum PolicyArg {
    WithCa,
    WithoutCa,
    Both,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum CountingArg {
    On,
    Off,
    Both,
}

#[derive(Debug, Subcommand)]
enum Sub {
    /// Plane-estimation sweep: tactile, vision and force errors per tilt.
    EstimatePlane {
        /// Also write PGM masks for the first seed.
        #[arg(long)]
        masks: bool,
    },
    /// Two-finger contact success rates per method.
    ContactTrials {
        #[arg(long, value_delimiter = ',')]
        methods: Option<Vec<String>>,
        /// Write per-trial controller traces as JSON lines.
        #[arg(long)]
        trace: bool,
    },
    /// Feeding with and without continuous adjustment.
    Feed {
        #[arg(long, value_enum, default_value = "both")]
        policy: PolicyArg,
    },
    /// End-to-end grasping over the material and tilt grid.
    GraspBench {
        #[arg(long, value_enum, default_value = "both")]
        counting: CountingArg,
    },
    /// Minimal squeeze force at each sheet location.
    ForceAnalysis {
        #[arg(long)]
        material: Option<String>,
    },
    /// Offset calibration round trips on synthetic data.
    Calibrate {
        /// Use the mask-noise preset instead of clean masks.
        #[arg(long)]
        noisy: bool,
    },
    /// Counting accuracy per material.
    CountBench,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let command = match cli.command {
        Sub::EstimatePlane { masks } => Command::EstimatePlane { masks },
        Sub::ContactTrials { methods, trace } => Command::ContactTrials { methods, trace },
        Sub::Feed { policy } => Command::Feed {
            policies: match policy {
                PolicyArg::WithCa => vec![FeedPolicy::WithCA],
                PolicyArg::WithoutCa => vec![FeedPolicy::WithoutCA],
                PolicyArg::Both => vec![FeedPolicy::WithCA, FeedPolicy::WithoutCA],
            },
        },
        Sub::GraspBench { counting } => Command::GraspBench {
            counting: match counting {
                CountingArg::On => vec![true],
                CountingArg::Off => vec![false],
                CountingArg::Both => vec![true, false],
            },
        },
        Sub::ForceAnalysis { material } => Command::ForceAnalysis { material },
        Sub::Calibrate { noisy } => Command::Calibrate { noisy: noisy.then_some(true) },
        Sub::CountBench => Command::CountBench,
    };
    let inv = Invocation {
        config: cli.config,
        seeds: cli.seed_list.or(cli.seeds.map(|n| (0..n).collect())),
        out: cli.out,
        check: cli.check,
        bless: cli.bless,
        goldens: cli.goldens.unwrap_or_else(default_goldens),
        command,
    };
    match execute(&inv) {
        Ok(code) => ExitCode::from(code as u8),
        Err(e) => {
            eprintln!("{e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
