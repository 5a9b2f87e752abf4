use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use semoff_cli::{
    cmd_compare, cmd_eval, cmd_sweep_k, cmd_train, exit_code, CommonArgs, EvalPolicyName,
    TrainPolicy,
};
use semoff_core::config::Profile;

/// Simulator and trainer for energy-efficient semantic task offloading.
#[derive(Parser)]
#[command(name = "semoff", version, about)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct Common {
    /// Scenario config file (`key = value` lines).
    #[arg(long)]
    config: Option<PathBuf>,
    /// Seed list; training uses the first, evaluation runs one episode per
    /// seed (default 0..99).
    #[arg(long, value_delimiter = ',')]
    seed: Vec<u64>,
    /// Output run directory.
    #[arg(long)]
    out: PathBuf,
    /// Worker threads for seed-level parallelism (0 = all cores).
    #[arg(long, default_value_t = 0)]
    jobs: usize,
    /// Parameter preset applied before the config file.
    #[arg(long)]
    profile: Option<String>,
    /// Extra `key=value` overrides applied after the config file.
    #[arg(long = "set")]
    set: Vec<String>,
}

impl Common {
    fn to_args(&self) -> Result<CommonArgs, semoff_core::Error> {
        let profile = match &self.profile {
            Some(p) => Some(p.parse::<Profile>()?),
            None => None,
        };
        Ok(CommonArgs {
            config: self.config.clone(),
            seeds: self.seed.clone(),
            out: self.out.clone(),
            jobs: self.jobs,
            profile,
            overrides: self.set.clone(),
        })
    }
}

#[derive(Subcommand)]
enum Command {
    /// Train a policy and write metrics plus checkpoints.
    Train {
        #[command(flatten)]
        common: Common,
        /// Which learner to train.
        #[arg(long, default_value = "mappo")]
        policy: String,
    },
    /// Evaluate one policy over seeded snapshots.
    Eval {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        policy: String,
        /// Run directory holding checkpoints of a learned policy.
        #[arg(long)]
        ckpt: Option<PathBuf>,
    },
    /// Evaluate all benchmark policies on shared snapshots.
    Compare {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        mappo_ckpt: Option<PathBuf>,
        #[arg(long)]
        dqn_ckpt: Option<PathBuf>,
        /// Skip the learned policies.
        #[arg(long)]
        static_only: bool,
    },
    /// Sweep the encoder output dimension k.
    SweepK {
        #[command(flatten)]
        common: Common,
        /// k values to sweep.
        #[arg(long, value_delimiter = ',', default_value = "5,10,15,20")]
        k: Vec<f64>,
        /// Policies to include.
        #[arg(long, value_delimiter = ',', default_value = "exhaustive,local,remote,random")]
        policies: Vec<String>,
        #[arg(long)]
        mappo_ckpt: Option<PathBuf>,
        #[arg(long)]
        dqn_ckpt: Option<PathBuf>,
    },
}

fn run() -> Result<(), semoff_core::Error> {
    let cli = Cli::parse();
    match cli.command {
        Command::Train { common, policy } => {
            let args = common.to_args()?;
            let policy = policy.parse::<TrainPolicy>()?;
            let dir = cmd_train(&args, policy)?;
            println!("{}", dir.display());
        }
        Command::Eval {
            common,
            policy,
            ckpt,
        } => {
            let args = common.to_args()?;
            let policy = policy.parse::<EvalPolicyName>()?;
            let path = cmd_eval(&args, policy, ckpt.as_deref())?;
            println!("{}", path.display());
        }
        Command::Compare {
            common,
            mappo_ckpt,
            dqn_ckpt,
            static_only,
        } => {
            let args = common.to_args()?;
            let path = cmd_compare(
                &args,
                mappo_ckpt.as_deref(),
                dqn_ckpt.as_deref(),
                static_only,
            )?;
            println!("{}", path.display());
        }
        Command::SweepK {
            common,
            k,
            policies,
            mappo_ckpt,
            dqn_ckpt,
        } => {
            let args = common.to_args()?;
            let policies = policies
                .iter()
                .map(|p| p.parse::<EvalPolicyName>())
                .collect::<Result<Vec<_>, _>>()?;
            let path = cmd_sweep_k(
                &args,
                &k,
                &policies,
                mappo_ckpt.as_deref(),
                dqn_ckpt.as_deref(),
            )?;
            println!("{}", path.display());
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::new().filter_or("SEMOFF_LOG", "warn")).init();
    match run() {
        Ok(()) => ExitCode::SUCCESS,
        Err(err) => {
            eprintln!("error: {err}");
            ExitCode::from(exit_code(&err) as u8)
        }
    }
}
