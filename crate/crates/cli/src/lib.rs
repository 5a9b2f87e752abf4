//! Command implementations behind the `semoff` binary.
//!
//! Every command is deterministic under a fixed seed list and config:
//! parallel evaluation collects results into seed-ordered rows before
//! writing, and all randomness flows from the named seed streams.

use std::path::{Path, PathBuf};
use std::sync::Arc;

use rayon::prelude::*;

use semoff_core::baselines::{dqn_train, DiscreteActionGrid, DqnAgent, DqnPool, StaticMode};
use semoff_core::config::{Profile, ScenarioConfig};
use semoff_core::env::Environment;
use semoff_core::error::{Error, Result};
use semoff_core::harness::{run_episode, EvalPolicy};
use semoff_core::marl::{train, AgentPool};
use semoff_core::ppo::{ActionBounds, PpoAgent};
use semoff_core::report::{
    validate_metrics_jsonl, write_eval_csv, write_sweep_csv, EvalRow, MetricsKind, RunDir,
    SweepRow,
};
use semoff_core::semantics::AccuracyTable;

/// Flags shared by every subcommand.
#[derive(Debug, Clone)]
pub struct CommonArgs {
    pub config: Option<PathBuf>,
    pub seeds: Vec<u64>,
    pub out: PathBuf,
    pub jobs: usize,
    pub profile: Option<Profile>,
    /// `key=value` overrides applied after the config file.
    pub overrides: Vec<String>,
}

impl CommonArgs {
    /// Effective config: defaults, then profile, then file, then overrides.
    pub fn load_config(&self) -> Result<ScenarioConfig> {
        let mut cfg = ScenarioConfig::default();
        if let Some(profile) = self.profile {
            cfg.apply_profile(profile);
        }
        if let Some(path) = &self.config {
            cfg.apply_file(path)?;
        }
        for pair in &self.overrides {
            let (key, value) = pair.split_once('=').ok_or_else(|| {
                Error::config(format!("--set expects key=value, got `{pair}`"))
            })?;
            cfg.set(key.trim(), value)?;
        }
        cfg.validate()?;
        Ok(cfg)
    }

    fn eval_seeds(&self) -> Vec<u64> {
        if self.seeds.is_empty() {
            (0..100).collect()
        } else {
            self.seeds.clone()
        }
    }

    fn train_seed(&self) -> u64 {
        self.seeds.first().copied().unwrap_or(0)
    }

    fn install_pool<T: Send>(&self, work: impl FnOnce() -> Result<T> + Send) -> Result<T> {
        let threads = if self.jobs == 0 {
            std::thread::available_parallelism().map(|n| n.get()).unwrap_or(1)
        } else {
            self.jobs
        };
        let pool = rayon::ThreadPoolBuilder::new()
            .num_threads(threads)
            .build()
            .map_err(|e| Error::invalid(format!("thread pool: {e}")))?;
        pool.install(work)
    }
}

fn load_table(cfg: &ScenarioConfig) -> Result<Arc<AccuracyTable>> {
    if cfg.semantics.table_path.is_empty() {
        Ok(Arc::new(AccuracyTable::builtin()))
    } else {
        Ok(Arc::new(AccuracyTable::from_csv_path(Path::new(
            &cfg.semantics.table_path,
        ))?))
    }
}

/// Which learner `train` builds.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TrainPolicy {
    Mappo,
    Dqn,
}

impl std::str::FromStr for TrainPolicy {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "mappo" => Ok(TrainPolicy::Mappo),
            "dqn" => Ok(TrainPolicy::Dqn),
            other => Err(Error::config(format!(
                "unknown trainable policy `{other}` (expected mappo or dqn)"
            ))),
        }
    }
}

/// `semoff train`: run the trainer and leave metrics, checkpoints and the
/// effective config in the run directory.
pub fn cmd_train(args: &CommonArgs, policy: TrainPolicy) -> Result<PathBuf> {
    let cfg = args.load_config()?;
    let table = load_table(&cfg)?;
    let run = RunDir::create(&args.out)?;
    run.write_effective_config(&cfg.to_flat_string())?;
    run.start_metrics()?;
    let seed = args.train_seed();
    let kind = match policy {
        TrainPolicy::Mappo => {
            train(&cfg, table, seed, Some(&run))?;
            MetricsKind::Ppo
        }
        TrainPolicy::Dqn => {
            dqn_train(&cfg, table, seed, Some(&run))?;
            MetricsKind::Dqn
        }
    };
    let rows = validate_metrics_jsonl(&run.metrics_path(), kind)?;
    log::info!("training wrote {rows} metric rows to {}", run.root().display());
    Ok(run.root().to_path_buf())
}

fn load_mappo(cfg: &ScenarioConfig, env: &Environment, dir: &Path) -> Result<AgentPool> {
    let run = RunDir::open(dir)?;
    let bounds = ActionBounds {
        power_min_w: env.params().power_min_w,
        power_max_w: env.params().power_max_w,
        freq_min_hz: env.params().freq_min_hz,
        freq_max_hz: env.params().freq_max_hz,
    };
    let agents = run
        .latest_checkpoints()?
        .iter()
        .map(|ckpt| PpoAgent::from_checkpoint(ckpt, bounds))
        .collect::<Result<Vec<_>>>()?;
    if agents.len() != cfg.env.num_ues {
        return Err(Error::invalid(format!(
            "checkpoint holds {} agents but the scenario has {} UEs",
            agents.len(),
            cfg.env.num_ues
        )));
    }
    Ok(AgentPool { agents })
}

fn load_dqn(cfg: &ScenarioConfig, dir: &Path) -> Result<DqnPool> {
    let run = RunDir::open(dir)?;
    let grid = DiscreteActionGrid::from_config(cfg)?;
    let agents = run
        .latest_checkpoints()?
        .iter()
        .map(|ckpt| DqnAgent::from_checkpoint(ckpt, cfg.dqn.buffer_capacity))
        .collect::<Result<Vec<_>>>()?;
    if agents.len() != cfg.env.num_ues {
        return Err(Error::invalid(format!(
            "checkpoint holds {} agents but the scenario has {} UEs",
            agents.len(),
            cfg.env.num_ues
        )));
    }
    Ok(DqnPool { agents, grid })
}

/// Evaluate one policy over the seed list; rows come back seed-ordered.
fn evaluate_policy(
    cfg: &ScenarioConfig,
    table: &Arc<AccuracyTable>,
    policy: &EvalPolicy,
    seeds: &[u64],
) -> Result<Vec<EvalRow>> {
    let name = policy.name().to_string();
    seeds
        .par_iter()
        .map(|&seed| {
            let mut env = Environment::new(cfg, table.clone())?;
            let outcome = run_episode(policy, &mut env, seed)?;
            Ok(EvalRow {
                policy: name.clone(),
                seed,
                episode: 0,
                energy_j: outcome.energy_j,
                completion_step: outcome
                    .completion_step
                    .map(|s| s as i64)
                    .unwrap_or(-1),
                violations: outcome.violations,
            })
        })
        .collect()
}

/// Named policy selection for `semoff eval`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum EvalPolicyName {
    Mappo,
    Dqn,
    Exhaustive,
    Local,
    Remote,
    Random,
}

impl std::str::FromStr for EvalPolicyName {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "mappo" => Ok(EvalPolicyName::Mappo),
            "dqn" => Ok(EvalPolicyName::Dqn),
            "exhaustive" => Ok(EvalPolicyName::Exhaustive),
            "local" => Ok(EvalPolicyName::Local),
            "remote" => Ok(EvalPolicyName::Remote),
            "random" => Ok(EvalPolicyName::Random),
            other => Err(Error::config(format!("unknown policy `{other}`"))),
        }
    }
}

/// `semoff eval`: one policy, one CSV.
pub fn cmd_eval(
    args: &CommonArgs,
    policy: EvalPolicyName,
    checkpoint: Option<&Path>,
) -> Result<PathBuf> {
    let cfg = args.load_config()?;
    let table = load_table(&cfg)?;
    let seeds = args.eval_seeds();
    let run = RunDir::create(&args.out)?;
    run.write_effective_config(&cfg.to_flat_string())?;

    let env = Environment::new(&cfg, table.clone())?;
    let grid = DiscreteActionGrid::from_config(&cfg)?;
    let need_ckpt = || {
        checkpoint.ok_or_else(|| {
            Error::missing("evaluation of a learned policy needs --ckpt".to_string())
        })
    };
    let mappo;
    let dqn;
    let policy = match policy {
        EvalPolicyName::Mappo => {
            mappo = load_mappo(&cfg, &env, need_ckpt()?)?;
            EvalPolicy::Mappo(&mappo)
        }
        EvalPolicyName::Dqn => {
            dqn = load_dqn(&cfg, need_ckpt()?)?;
            EvalPolicy::Dqn(&dqn)
        }
        EvalPolicyName::Exhaustive => EvalPolicy::Exhaustive {
            grid: &grid,
            max_combinations: cfg.grid.max_joint_actions,
        },
        EvalPolicyName::Local => EvalPolicy::Static(StaticMode::Local),
        EvalPolicyName::Remote => EvalPolicy::Static(StaticMode::Remote),
        EvalPolicyName::Random => EvalPolicy::Static(StaticMode::Random),
    };
    let rows = args.install_pool(|| evaluate_policy(&cfg, &table, &policy, &seeds))?;
    let path = run.root().join("eval.csv");
    write_eval_csv(&path, &rows)?;
    Ok(path)
}

/// `semoff compare`: all benchmark policies over shared seeded snapshots.
pub fn cmd_compare(
    args: &CommonArgs,
    mappo_ckpt: Option<&Path>,
    dqn_ckpt: Option<&Path>,
    static_only: bool,
) -> Result<PathBuf> {
    let cfg = args.load_config()?;
    let table = load_table(&cfg)?;
    let seeds = args.eval_seeds();
    let run = RunDir::create(&args.out)?;
    run.write_effective_config(&cfg.to_flat_string())?;

    let env = Environment::new(&cfg, table.clone())?;
    let grid = DiscreteActionGrid::from_config(&cfg)?;
    let mut learned: Vec<(AgentPool, DqnPool)> = Vec::new();
    if !static_only {
        let mappo_dir = mappo_ckpt.ok_or_else(|| {
            Error::missing("compare needs --mappo-ckpt (or --static-only)".to_string())
        })?;
        let dqn_dir = dqn_ckpt.ok_or_else(|| {
            Error::missing("compare needs --dqn-ckpt (or --static-only)".to_string())
        })?;
        learned.push((load_mappo(&cfg, &env, mappo_dir)?, load_dqn(&cfg, dqn_dir)?));
    }

    let mut policies: Vec<EvalPolicy> = Vec::new();
    if let Some((mappo, dqn)) = learned.first() {
        policies.push(EvalPolicy::Mappo(mappo));
        policies.push(EvalPolicy::Dqn(dqn));
    }
    policies.push(EvalPolicy::Exhaustive {
        grid: &grid,
        max_combinations: cfg.grid.max_joint_actions,
    });
    policies.push(EvalPolicy::Static(StaticMode::Local));
    policies.push(EvalPolicy::Static(StaticMode::Remote));
    policies.push(EvalPolicy::Static(StaticMode::Random));

    let rows = args.install_pool(|| {
        let mut rows = Vec::new();
        for policy in &policies {
            rows.extend(evaluate_policy(&cfg, &table, policy, &seeds)?);
        }
        Ok(rows)
    })?;
    let path = run.root().join("compare.csv");
    write_eval_csv(&path, &rows)?;
    Ok(path)
}

/// `semoff sweep-k`: aggregate energy per policy over the encoder output
/// dimension.
pub fn cmd_sweep_k(
    args: &CommonArgs,
    k_values: &[f64],
    policies: &[EvalPolicyName],
    mappo_ckpt: Option<&Path>,
    dqn_ckpt: Option<&Path>,
) -> Result<PathBuf> {
    if k_values.is_empty() {
        return Err(Error::config("sweep needs at least one k value".to_string()));
    }
    let base_cfg = args.load_config()?;
    let table = load_table(&base_cfg)?;
    for &k in k_values {
        if !table.covers_k(k) {
            return Err(Error::config(format!(
                "sweep value k={k} is outside the accuracy table"
            )));
        }
    }
    let seeds = args.eval_seeds();
    let run = RunDir::create(&args.out)?;
    run.write_effective_config(&base_cfg.to_flat_string())?;

    let mut rows: Vec<SweepRow> = Vec::new();
    for &k in k_values {
        let mut cfg = base_cfg.clone();
        cfg.set("semantics.symbols_per_word", &k.to_string())?;
        let env = Environment::new(&cfg, table.clone())?;
        let grid = DiscreteActionGrid::from_config(&cfg)?;
        for name in policies {
            // Load learned pools per (k, policy); checkpoints are small.
            let mappo_pool;
            let dqn_pool;
            let policy = match name {
                EvalPolicyName::Mappo => {
                    let dir = mappo_ckpt.ok_or_else(|| {
                        Error::missing("sweep over mappo needs --mappo-ckpt".to_string())
                    })?;
                    mappo_pool = load_mappo(&cfg, &env, dir)?;
                    EvalPolicy::Mappo(&mappo_pool)
                }
                EvalPolicyName::Dqn => {
                    let dir = dqn_ckpt.ok_or_else(|| {
                        Error::missing("sweep over dqn needs --dqn-ckpt".to_string())
                    })?;
                    dqn_pool = load_dqn(&cfg, dir)?;
                    EvalPolicy::Dqn(&dqn_pool)
                }
                EvalPolicyName::Exhaustive => EvalPolicy::Exhaustive {
                    grid: &grid,
                    max_combinations: cfg.grid.max_joint_actions,
                },
                EvalPolicyName::Local => EvalPolicy::Static(StaticMode::Local),
                EvalPolicyName::Remote => EvalPolicy::Static(StaticMode::Remote),
                EvalPolicyName::Random => EvalPolicy::Static(StaticMode::Random),
            };
            let evals = args.install_pool(|| evaluate_policy(&cfg, &table, &policy, &seeds))?;
            let energies: Vec<f64> = evals.iter().map(|r| r.energy_j).collect();
            let n = energies.len() as f64;
            let mean = energies.iter().sum::<f64>() / n;
            let var = energies.iter().map(|e| (e - mean) * (e - mean)).sum::<f64>() / n;
            let completed = evals.iter().filter(|r| r.completion_step >= 0).count();
            rows.push(SweepRow {
                k,
                policy: policy.name().to_string(),
                mean_energy_j: mean,
                std_energy_j: var.sqrt(),
                completion_rate: completed as f64 / n,
            });
        }
    }
    let path = run.root().join("sweep.csv");
    write_sweep_csv(&path, &rows)?;
    Ok(path)
}

/// Exit-code contract: 0 success, 2 config error, 3 missing artifact,
/// 4 runtime failure.
pub fn exit_code(err: &Error) -> i32 {
    match err {
        Error::Config(_) => 2,
        Error::MissingArtifact(_) => 3,
        Error::Numeric(_) | Error::Invalid(_) | Error::Io(_) => 4,
    }
}
