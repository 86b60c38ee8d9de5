mod commands;
mod config;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use config::RunConfig;
use roadrl_core::trainer::TrainMode;

#[derive(Parser, Debug)]
#[command(name = "roadrl", version, about = "Desk-scale learned driving planner: data, fitting, training, evaluation")]
struct Cli {
    /// TOML run configuration; defaults apply to every missing key.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Overrides the config seed.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Output directory; overrides the config.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Record expert rollouts as an imitation dataset.
    GenDataset,
    /// Fit the actuation response model on the synthetic plant.
    FitResponse,
    /// Regress the policy means onto an imitation dataset.
    PretrainIl {
        /// Dataset directory; defaults to <out>/dataset.
        #[arg(long)]
        dataset: Option<PathBuf>,
    },
    /// Delayed actor-critic training.
    Train {
        #[arg(long, value_parser = parse_mode)]
        mode: Option<TrainMode>,
        /// Policy checkpoint to start il_then_rl from.
        #[arg(long)]
        pretrained: Option<PathBuf>,
        /// Continue from a training checkpoint.
        #[arg(long)]
        resume: Option<PathBuf>,
    },
    /// Greedy rollouts of a policy checkpoint.
    Eval {
        #[arg(long)]
        checkpoint: PathBuf,
        /// Scenario files; overrides the config.
        #[arg(long, num_args = 0..)]
        scenarios: Option<Vec<PathBuf>>,
    },
    /// Average rewards of the rule-based expert.
    Baseline,
}

fn parse_mode(s: &str) -> Result<TrainMode, String> {
    match s {
        "pure_rl" => Ok(TrainMode::PureRl),
        "il_then_rl" => Ok(TrainMode::IlThenRl),
        _ => Err(format!("unknown mode `{s}` (pure_rl or il_then_rl)")),
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    let cfg = match RunConfig::load(cli.config.as_deref()) {
        Ok(c) => c.finish(cli.seed, cli.out),
        Err(e) => {
            eprintln!("error: {e:#}");
            return ExitCode::from(1);
        }
    };
    if let Err(e) = cfg.validate() {
        eprintln!("error: {e:#}");
        return ExitCode::from(1);
    }
    let res = match cli.command {
        Command::GenDataset => commands::gen_dataset(&cfg),
        Command::FitResponse => commands::fit_response(&cfg),
        Command::PretrainIl { dataset } => commands::pretrain_il(&cfg, dataset),
        Command::Train {
            mode,
            pretrained,
            resume,
        } => commands::train(&cfg, mode, pretrained, resume),
        Command::Eval { checkpoint, scenarios } => commands::eval(&cfg, &checkpoint, scenarios),
        Command::Baseline => commands::baseline(&cfg),
    };
    match res {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
    }
}
