use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use ff_sparsity::experiment::{self, ExperimentConfig, Mode};

#[derive(Parser)]
#[command(name = "ffsparse", version, about = "Forward-forward sparsity experiments on MNIST")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Goodness predicate for every training image under a fresh layer
    Theorem1Scan(Common),
    /// Mean satisfied ratio for several batch sizes
    BatchSweep {
        #[command(flatten)]
        common: Common,
        /// Comma-separated batch sizes
        #[arg(long, value_name = "LIST")]
        batch_sizes: Option<String>,
    },
    /// Goodness descent with per-iteration sparsity metrics
    TrainGoodness(Common),
    /// Forward-forward training with per-iteration sparsity metrics
    TrainFfa(Common),
    /// Pre-activation sign changes across training updates
    Audit {
        #[command(flatten)]
        common: Common,
        /// Update rule to audit: goodness or ffa
        #[arg(long)]
        rule: Option<String>,
    },
}

#[derive(Args)]
struct Common {
    #[arg(long, value_name = "PATH")]
    mnist_dir: Option<PathBuf>,
    #[arg(long)]
    neurons: Option<String>,
    #[arg(long)]
    batch_size: Option<String>,
    #[arg(long)]
    lr: Option<String>,
    #[arg(long)]
    epochs: Option<String>,
    #[arg(long, allow_hyphen_values = true)]
    theta: Option<String>,
    #[arg(long)]
    seed: Option<String>,
    #[arg(long, value_name = "PATH")]
    out: Option<PathBuf>,
    /// key=value file; flags given here take precedence
    #[arg(long, value_name = "PATH")]
    config: Option<PathBuf>,
}

impl Common {
    fn overrides(&self) -> Vec<(String, String)> {
        let mut kv = Vec::new();
        let mut push = |k: &str, v: Option<String>| {
            if let Some(v) = v {
                kv.push((k.to_string(), v));
            }
        };
        push("mnist-dir", self.mnist_dir.as_ref().map(|p| p.display().to_string()));
        push("neurons", self.neurons.clone());
        push("batch-size", self.batch_size.clone());
        push("lr", self.lr.clone());
        push("epochs", self.epochs.clone());
        push("theta", self.theta.clone());
        push("seed", self.seed.clone());
        push("out", self.out.as_ref().map(|p| p.display().to_string()));
        kv
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    let cli = Cli::parse();
    let (mode, common, extra) = match cli.command {
        Command::Theorem1Scan(c) => (Mode::Theorem1Scan, c, None),
        Command::BatchSweep { common, batch_sizes } => {
            (Mode::BatchSweep, common, batch_sizes.map(|v| ("batch-sizes", v)))
        }
        Command::TrainGoodness(c) => (Mode::TrainGoodness, c, None),
        Command::TrainFfa(c) => (Mode::TrainFfa, c, None),
        Command::Audit { common, rule } => (Mode::Audit, common, rule.map(|v| ("rule", v))),
    };
    let mut overrides = common.overrides();
    overrides.extend(extra.map(|(k, v)| (k.to_string(), v)));
    let result = ExperimentConfig::from_sources(mode, common.config.as_deref(), &overrides)
        .and_then(|config| experiment::run(&config));
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            log::error!("{e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
