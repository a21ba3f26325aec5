use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use uav_relay::energy::QModel;
use uav_relay::harness::{execute, Command, ExperimentConfig, Fault, RunOptions};

/// Energy/delay optimization and BER experiments for a two-way UAV relay.
#[derive(Debug, Parser)]
#[command(name = "uavrelay", version)]
struct Cli {
    #[command(subcommand)]
    command: Sub,
}

#[derive(Debug, Subcommand)]
enum Sub {
    /// Optimize a single operating point.
    Optimize(Common),
    /// Distance, power and altitude sweeps.
    Sweep(Common),
    /// Energy/delay trade-off over the weight grid.
    Tradeoff(Common),
    /// Analytic and Monte Carlo BER versus power.
    Ber(Common),
    /// Oracle suite with pass/fail report.
    Validate(ValidateArgs),
    /// Monte Carlo runs only.
    Mc(Common),
}

#[derive(Debug, Args, Clone, Default)]
struct Common {
    /// JSON configuration file; defaults apply when omitted.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    seed: Option<u64>,
    /// Output directory.
    #[arg(long)]
    out: Option<PathBuf>,
    /// `as-printed` or `symmetric`.
    #[arg(long = "q-model")]
    q_model: Option<QModel>,
    /// Monte Carlo samples per point.
    #[arg(long)]
    samples: Option<usize>,
}

#[derive(Debug, Args, Clone, Default)]
struct ValidateArgs {
    #[command(flatten)]
    common: Common,
    /// Perturb one formula to check that the suite notices.
    #[arg(long)]
    inject: Option<Fault>,
}

impl Sub {
    fn split(&self) -> (Command, &Common, Option<Fault>) {
        match self {
            Sub::Optimize(c) => (Command::Optimize, c, None),
            Sub::Sweep(c) => (Command::Sweep, c, None),
            Sub::Tradeoff(c) => (Command::Tradeoff, c, None),
            Sub::Ber(c) => (Command::Ber, c, None),
            Sub::Validate(v) => (Command::Validate, &v.common, v.inject),
            Sub::Mc(c) => (Command::Mc, c, None),
        }
    }
}

fn load_config(common: &Common, inject: Option<Fault>) -> uav_relay::Result<ExperimentConfig> {
    let mut cfg = match &common.config {
        Some(path) => ExperimentConfig::load(path)?,
        None => ExperimentConfig::default(),
    };
    RunOptions {
        out_dir: common.out.clone(),
        seed: common.seed,
        q_model: common.q_model,
        samples: common.samples,
        inject,
    }
    .apply(&mut cfg);
    cfg.validate()?;
    Ok(cfg)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let (cmd, common, inject) = cli.command.split();
    let cfg = match load_config(common, inject) {
        Ok(c) => c,
        Err(e) => {
            eprintln!("error: {e}");
            return ExitCode::from(1);
        }
    };
    match execute(cmd, &cfg, inject) {
        Ok(outcome) => {
            for w in &outcome.warnings {
                eprintln!("warning: {w}");
            }
            print!("{}", outcome.summary);
            ExitCode::from(outcome.status.code())
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(1)
        }
    }
}
