//! Metrics records, file schemas, and the run-directory layout.
//!
//! Training emits one JSON line per episode into `metrics.jsonl`;
//! evaluation and sweeps emit CSV tables. Schemas are fixed and validated
//! both when writing and when reading back. Checkpoints land in
//! `agent_<i>/ckpt_<episode>.bin` under the run directory.

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::nnet::Checkpoint;

/// Per-episode training diagnostics of the PPO trainer.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TrainingStat {
    pub episode: u64,
    /// Episode return (identical across agents under the shared reward).
    pub mean_reward: f64,
    pub actor_loss: f64,
    pub critic_loss: f64,
    pub entropy: f64,
    pub clip_fraction: f64,
}

/// Per-episode training diagnostics of the DQN baseline trainer.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DqnTrainingStat {
    pub episode: u64,
    pub mean_reward: f64,
    pub td_loss: f64,
    pub epsilon: f64,
}

/// One evaluation episode of one policy.
#[derive(Debug, Clone, PartialEq)]
pub struct EvalRow {
    pub policy: String,
    pub seed: u64,
    pub episode: u64,
    pub energy_j: f64,
    /// Step at which all queues drained, `-1` if the episode hit the cap.
    pub completion_step: i64,
    /// Count of (UE, step) constraint violations.
    pub violations: u64,
}

impl EvalRow {
    pub const CSV_HEADER: &'static str = "policy,seed,episode,energy_J,completion_step,violations";

    pub fn to_csv_line(&self) -> String {
        format!(
            "{},{},{},{},{},{}",
            self.policy, self.seed, self.episode, self.energy_j, self.completion_step,
            self.violations
        )
    }

    pub fn from_csv_line(line: &str) -> Result<Self> {
        let fields: Vec<&str> = line.split(',').collect();
        if fields.len() != 6 {
            return Err(Error::invalid(format!(
                "eval row has {} fields, expected 6: `{line}`",
                fields.len()
            )));
        }
        Ok(EvalRow {
            policy: fields[0].to_string(),
            seed: parse_field(fields[1], "seed")?,
            episode: parse_field(fields[2], "episode")?,
            energy_j: parse_field(fields[3], "energy_J")?,
            completion_step: parse_field(fields[4], "completion_step")?,
            violations: parse_field(fields[5], "violations")?,
        })
    }
}

/// Aggregate of one policy at one encoder output dimension.
#[derive(Debug, Clone, PartialEq)]
pub struct SweepRow {
    pub k: f64,
    pub policy: String,
    pub mean_energy_j: f64,
    pub std_energy_j: f64,
    pub completion_rate: f64,
}

impl SweepRow {
    pub const CSV_HEADER: &'static str = "k,policy,mean_energy_J,std_energy_J,completion_rate";

    pub fn to_csv_line(&self) -> String {
        format!(
            "{},{},{},{},{}",
            self.k, self.policy, self.mean_energy_j, self.std_energy_j, self.completion_rate
        )
    }

    pub fn from_csv_line(line: &str) -> Result<Self> {
        let fields: Vec<&str> = line.split(',').collect();
        if fields.len() != 5 {
            return Err(Error::invalid(format!(
                "sweep row has {} fields, expected 5: `{line}`",
                fields.len()
            )));
        }
        Ok(SweepRow {
            k: parse_field(fields[0], "k")?,
            policy: fields[1].to_string(),
            mean_energy_j: parse_field(fields[2], "mean_energy_J")?,
            std_energy_j: parse_field(fields[3], "std_energy_J")?,
            completion_rate: parse_field(fields[4], "completion_rate")?,
        })
    }
}

fn parse_field<T: std::str::FromStr>(raw: &str, name: &str) -> Result<T> {
    raw.parse::<T>()
        .map_err(|_| Error::invalid(format!("bad {name} field `{raw}`")))
}

/// Write a CSV table and re-read it through the row parser as a schema
/// self-check.
pub fn write_eval_csv(path: &Path, rows: &[EvalRow]) -> Result<()> {
    let mut text = String::from(EvalRow::CSV_HEADER);
    text.push('\n');
    for row in rows {
        text.push_str(&row.to_csv_line());
        text.push('\n');
    }
    write_file(path, text.as_bytes())?;
    read_eval_csv(path)?;
    Ok(())
}

pub fn read_eval_csv(path: &Path) -> Result<Vec<EvalRow>> {
    let text = fs::read_to_string(path)
        .map_err(|e| Error::missing(format!("{}: {e}", path.display())))?;
    let mut lines = text.lines();
    match lines.next() {
        Some(h) if h == EvalRow::CSV_HEADER => {}
        other => {
            return Err(Error::invalid(format!(
                "{}: bad header {other:?}",
                path.display()
            )))
        }
    }
    lines.map(EvalRow::from_csv_line).collect()
}

pub fn write_sweep_csv(path: &Path, rows: &[SweepRow]) -> Result<()> {
    let mut text = String::from(SweepRow::CSV_HEADER);
    text.push('\n');
    for row in rows {
        text.push_str(&row.to_csv_line());
        text.push('\n');
    }
    write_file(path, text.as_bytes())?;
    read_sweep_csv(path)?;
    Ok(())
}

pub fn read_sweep_csv(path: &Path) -> Result<Vec<SweepRow>> {
    let text = fs::read_to_string(path)
        .map_err(|e| Error::missing(format!("{}: {e}", path.display())))?;
    let mut lines = text.lines();
    match lines.next() {
        Some(h) if h == SweepRow::CSV_HEADER => {}
        other => {
            return Err(Error::invalid(format!(
                "{}: bad header {other:?}",
                path.display()
            )))
        }
    }
    lines.map(SweepRow::from_csv_line).collect()
}

fn write_file(path: &Path, bytes: &[u8]) -> Result<()> {
    if let Some(parent) = path.parent() {
        fs::create_dir_all(parent)?;
    }
    fs::write(path, bytes)?;
    Ok(())
}

/// Which training-metrics schema a `metrics.jsonl` file follows.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MetricsKind {
    Ppo,
    Dqn,
}

/// Validate every line of a metrics file against its schema.
pub fn validate_metrics_jsonl(path: &Path, kind: MetricsKind) -> Result<usize> {
    let text = fs::read_to_string(path)
        .map_err(|e| Error::missing(format!("{}: {e}", path.display())))?;
    let mut count = 0;
    for (lineno, line) in text.lines().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let parsed = match kind {
            MetricsKind::Ppo => serde_json::from_str::<TrainingStat>(line).map(|_| ()),
            MetricsKind::Dqn => serde_json::from_str::<DqnTrainingStat>(line).map(|_| ()),
        };
        parsed.map_err(|e| {
            Error::invalid(format!(
                "{} line {}: schema violation: {e}",
                path.display(),
                lineno + 1
            ))
        })?;
        count += 1;
    }
    Ok(count)
}

/// A run directory: `metrics.jsonl`, `config.txt`, and per-agent
/// checkpoints.
#[derive(Debug, Clone)]
pub struct RunDir {
    root: PathBuf,
}

impl RunDir {
    pub fn create(root: impl Into<PathBuf>) -> Result<Self> {
        let root = root.into();
        fs::create_dir_all(&root)?;
        Ok(RunDir { root })
    }

    pub fn open(root: impl Into<PathBuf>) -> Result<Self> {
        let root = root.into();
        if !root.is_dir() {
            return Err(Error::missing(format!(
                "run directory {} does not exist",
                root.display()
            )));
        }
        Ok(RunDir { root })
    }

    pub fn root(&self) -> &Path {
        &self.root
    }

    pub fn metrics_path(&self) -> PathBuf {
        self.root.join("metrics.jsonl")
    }

    pub fn config_path(&self) -> PathBuf {
        self.root.join("config.txt")
    }

    pub fn write_effective_config(&self, flat: &str) -> Result<()> {
        write_file(&self.config_path(), flat.as_bytes())
    }

    /// Truncate the metrics file (start of a run).
    pub fn start_metrics(&self) -> Result<()> {
        write_file(&self.metrics_path(), b"")
    }

    pub fn append_metrics_line<T: Serialize>(&self, stat: &T) -> Result<()> {
        let line = serde_json::to_string(stat)
            .map_err(|e| Error::invalid(format!("metrics serialization: {e}")))?;
        let mut file = fs::OpenOptions::new()
            .create(true)
            .append(true)
            .open(self.metrics_path())?;
        writeln!(file, "{line}")?;
        Ok(())
    }

    pub fn checkpoint_path(&self, agent: usize, episode: u32) -> PathBuf {
        self.root
            .join(format!("agent_{agent}"))
            .join(format!("ckpt_{episode}.bin"))
    }

    pub fn save_checkpoint(&self, agent: usize, episode: u32, ckpt: &Checkpoint) -> Result<()> {
        ckpt.save(&self.checkpoint_path(agent, episode))
    }

    /// Latest checkpoint per agent, by episode number in the file name.
    pub fn latest_checkpoints(&self) -> Result<Vec<Checkpoint>> {
        let mut agents = Vec::new();
        for i in 0.. {
            let dir = self.root.join(format!("agent_{i}"));
            if !dir.is_dir() {
                break;
            }
            let mut best: Option<(u32, PathBuf)> = None;
            for entry in fs::read_dir(&dir)? {
                let path = entry?.path();
                let name = path.file_name().and_then(|n| n.to_str()).unwrap_or("");
                if let Some(num) = name
                    .strip_prefix("ckpt_")
                    .and_then(|rest| rest.strip_suffix(".bin"))
                    .and_then(|n| n.parse::<u32>().ok())
                {
                    if best.as_ref().map(|(b, _)| num > *b).unwrap_or(true) {
                        best = Some((num, path));
                    }
                }
            }
            let (_, path) = best.ok_or_else(|| {
                Error::missing(format!("no checkpoints under {}", dir.display()))
            })?;
            agents.push(Checkpoint::load(&path)?);
        }
        if agents.is_empty() {
            return Err(Error::missing(format!(
                "no agent checkpoints under {}",
                self.root.display()
            )));
        }
        Ok(agents)
    }
}
