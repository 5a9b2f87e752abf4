//! Scenario configuration.
//!
//! All tunable physical and algorithmic parameters live here, addressed by
//! flat namespaced keys (`env.num_ues`, `channel.noise_psd_dbm_hz`, ...).
//! Scenario files are plain `key = value` lines; `#` starts a comment.
//! Unknown keys are hard errors so that typos cannot silently fall back to
//! defaults. dBm-valued keys are converted to linear watts once, at load;
//! everything downstream works in SI units.

use crate::error::{Error, Result};

/// Convert dBm to watts.
pub fn dbm_to_watts(dbm: f64) -> f64 {
    10f64.powf((dbm - 30.0) / 10.0)
}

/// Convert a dBm/Hz spectral density to W/Hz.
pub fn dbm_per_hz_to_w_per_hz(dbm_hz: f64) -> f64 {
    dbm_to_watts(dbm_hz)
}

#[derive(Debug, Clone, PartialEq)]
pub struct EnvConfig {
    pub num_ues: usize,
    /// Side of the square deployment area; the edge server sits at its center.
    pub area_m: f64,
    /// Episode step cap.
    pub max_steps: u32,
    /// Sentences per UE task at episode start.
    pub queue_len: u32,
    /// Encoder FLOP count per sentence.
    pub flops_per_sentence: f64,
    /// Compute multiplier covering the decode stage, applied identically to
    /// local and remote execution.
    pub decode_cost_ratio: f64,
    /// Per-sentence latency bound.
    pub max_latency_s: f64,
    /// Battery capacity per UE.
    pub battery_j: f64,
    pub local_flops_per_cycle: f64,
    pub local_freq_min_hz: f64,
    pub local_freq_max_hz: f64,
    /// GPU clock a UE falls back to while its task is offloaded.
    pub local_freq_idle_hz: f64,
    pub remote_flops_per_cycle: f64,
    pub remote_freq_hz: f64,
    /// Effective-capacitance coefficient of the local chip.
    pub local_energy_coeff: f64,
    /// Effective-capacitance coefficient of the edge server.
    pub remote_energy_coeff: f64,
    /// Constant result-download latency.
    pub downlink_latency_s: f64,
    /// Constant added to every step reward.
    pub step_bonus: f64,
    /// Scale of the end-of-episode reward/punishment.
    pub terminal_bonus: f64,
    /// Minimum admissible semantic similarity for an offloaded sentence.
    pub min_accuracy: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ChannelConfig {
    pub carrier_hz: f64,
    /// Per-UE subband bandwidth.
    pub bandwidth_hz: f64,
    pub noise_psd_dbm_hz: f64,
    /// Pathloss at the reference distance, dB.
    pub pathloss_ref_db: f64,
    pub pathloss_exponent: f64,
    pub pathloss_ref_distance_m: f64,
    /// Distances are clamped below this floor.
    pub min_distance_m: f64,
    pub power_min_dbm: f64,
    pub power_max_dbm: f64,
}

impl ChannelConfig {
    pub fn noise_psd_w_per_hz(&self) -> f64 {
        dbm_per_hz_to_w_per_hz(self.noise_psd_dbm_hz)
    }

    pub fn power_min_w(&self) -> f64 {
        dbm_to_watts(self.power_min_dbm)
    }

    pub fn power_max_w(&self) -> f64 {
        dbm_to_watts(self.power_max_dbm)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SemanticsConfig {
    /// Semantic symbols transmitted per word (the encoder output dimension).
    pub symbols_per_word: f64,
    /// Average semantic units per sentence.
    pub units_per_sentence: f64,
    /// Average words per sentence.
    pub words_per_sentence: f64,
    /// Accuracy-table CSV path; empty selects the built-in table.
    pub table_path: String,
}

#[derive(Debug, Clone, PartialEq)]
pub struct PpoConfig {
    pub learning_rate: f64,
    pub discount: f64,
    pub gae_lambda: f64,
    pub clip_epsilon: f64,
    pub epochs: usize,
    pub minibatch_size: usize,
    pub value_coeff: f64,
    pub entropy_coeff: f64,
    pub normalize_advantages: bool,
    pub hidden_sizes: Vec<usize>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct DqnConfig {
    pub learning_rate: f64,
    pub discount: f64,
    pub buffer_capacity: usize,
    pub batch_size: usize,
    pub target_sync_steps: u64,
    pub epsilon_start: f64,
    pub epsilon_end: f64,
    pub epsilon_decay_steps: u64,
    pub hidden_sizes: Vec<usize>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct GridConfig {
    pub power_levels: usize,
    pub freq_levels: usize,
    /// Guard on the exhaustive-search joint enumeration size.
    pub max_joint_actions: u64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrainConfig {
    pub episodes: u32,
    /// Federated-averaging period, episodes.
    pub fed_period: u32,
    pub fed_average_critic: bool,
    pub fed_reset_optimizer: bool,
    pub checkpoint_period: u32,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ScenarioConfig {
    pub env: EnvConfig,
    pub channel: ChannelConfig,
    pub semantics: SemanticsConfig,
    pub ppo: PpoConfig,
    pub dqn: DqnConfig,
    pub grid: GridConfig,
    pub train: TrainConfig,
}

/// Named parameter presets selectable from the CLI.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Profile {
    /// Parameters as reported by the reference setup (slow learning rate).
    Paper,
    /// Small, quickly converging setup for smoke tests and CI.
    Fast,
}

impl std::str::FromStr for Profile {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "paper" => Ok(Profile::Paper),
            "fast" => Ok(Profile::Fast),
            other => Err(Error::config(format!(
                "unknown profile `{other}` (expected `paper` or `fast`)"
            ))),
        }
    }
}

impl Default for ScenarioConfig {
    fn default() -> Self {
        ScenarioConfig {
            env: EnvConfig {
                num_ues: 4,
                area_m: 500.0,
                max_steps: 40,
                queue_len: 10,
                flops_per_sentence: 2.2e10,
                decode_cost_ratio: 2.0,
                max_latency_s: 0.05,
                battery_j: 0.5,
                local_flops_per_cycle: 1024.0,
                local_freq_min_hz: 0.96e9,
                local_freq_max_hz: 1.72e9,
                local_freq_idle_hz: 0.0,
                remote_flops_per_cycle: 8192.0,
                remote_freq_hz: 0.96e9,
                local_energy_coeff: 1e-28,
                remote_energy_coeff: 1e-28,
                downlink_latency_s: 1e-4,
                step_bonus: 1.0,
                terminal_bonus: 1.0,
                min_accuracy: 0.7,
            },
            channel: ChannelConfig {
                carrier_hz: 6e9,
                bandwidth_hz: 1e5,
                noise_psd_dbm_hz: -174.0,
                pathloss_ref_db: 46.0,
                pathloss_exponent: 3.5,
                pathloss_ref_distance_m: 1.0,
                min_distance_m: 1.0,
                power_min_dbm: 15.0,
                power_max_dbm: 24.0,
            },
            semantics: SemanticsConfig {
                symbols_per_word: 15.0,
                units_per_sentence: 30.0,
                words_per_sentence: 20.0,
                table_path: String::new(),
            },
            ppo: PpoConfig {
                learning_rate: 5e-7,
                discount: 0.95,
                gae_lambda: 0.95,
                clip_epsilon: 0.2,
                epochs: 4,
                minibatch_size: 256,
                value_coeff: 0.5,
                entropy_coeff: 0.01,
                normalize_advantages: true,
                hidden_sizes: vec![64, 64],
            },
            dqn: DqnConfig {
                learning_rate: 5e-7,
                discount: 0.95,
                buffer_capacity: 10_000,
                batch_size: 64,
                target_sync_steps: 200,
                epsilon_start: 1.0,
                epsilon_end: 0.05,
                epsilon_decay_steps: 5_000,
                hidden_sizes: vec![64, 64],
            },
            grid: GridConfig {
                power_levels: 4,
                freq_levels: 4,
                max_joint_actions: 1_000_000,
            },
            train: TrainConfig {
                episodes: 1000,
                fed_period: 100,
                fed_average_critic: true,
                fed_reset_optimizer: false,
                checkpoint_period: 100,
            },
        }
    }
}

fn parse_num<T: std::str::FromStr>(key: &str, value: &str) -> Result<T> {
    value
        .trim()
        .parse::<T>()
        .map_err(|_| Error::config(format!("key `{key}`: cannot parse value `{value}`")))
}

fn parse_bool(key: &str, value: &str) -> Result<bool> {
    match value.trim() {
        "true" | "1" => Ok(true),
        "false" | "0" => Ok(false),
        other => Err(Error::config(format!(
            "key `{key}`: expected boolean, got `{other}`"
        ))),
    }
}

fn parse_sizes(key: &str, value: &str) -> Result<Vec<usize>> {
    let sizes: Result<Vec<usize>> = value
        .split(',')
        .map(|part| parse_num::<usize>(key, part))
        .collect();
    let sizes = sizes?;
    if sizes.is_empty() || sizes.contains(&0) {
        return Err(Error::config(format!(
            "key `{key}`: layer sizes must be non-empty positive integers"
        )));
    }
    Ok(sizes)
}

fn fmt_sizes(sizes: &[usize]) -> String {
    sizes
        .iter()
        .map(|s| s.to_string())
        .collect::<Vec<_>>()
        .join(",")
}

impl ScenarioConfig {
    /// Apply a named profile on top of the current values.
    pub fn apply_profile(&mut self, profile: Profile) {
        match profile {
            Profile::Paper => {}
            Profile::Fast => {
                self.env.num_ues = 2;
                self.ppo.learning_rate = 3e-4;
                self.dqn.learning_rate = 3e-4;
                self.train.episodes = 300;
                // Keep the energy term dominant in the learning signal: a
                // large completion bonus swamps the Joule-scale differences
                // the policy is supposed to optimize.
                self.env.step_bonus = 0.001;
                self.env.terminal_bonus = 0.01;
            }
        }
    }

    /// Set one key. Unknown keys and unparsable values are errors naming the
    /// offending key.
    pub fn set(&mut self, key: &str, value: &str) -> Result<()> {
        match key {
            "env.num_ues" => self.env.num_ues = parse_num(key, value)?,
            "env.area_m" => self.env.area_m = parse_num(key, value)?,
            "env.max_steps" => self.env.max_steps = parse_num(key, value)?,
            "env.queue_len" => self.env.queue_len = parse_num(key, value)?,
            "env.flops_per_sentence" => self.env.flops_per_sentence = parse_num(key, value)?,
            "env.decode_cost_ratio" => self.env.decode_cost_ratio = parse_num(key, value)?,
            "env.max_latency_s" => self.env.max_latency_s = parse_num(key, value)?,
            "env.battery_j" => self.env.battery_j = parse_num(key, value)?,
            "env.local_flops_per_cycle" => {
                self.env.local_flops_per_cycle = parse_num(key, value)?
            }
            "env.local_freq_min_hz" => self.env.local_freq_min_hz = parse_num(key, value)?,
            "env.local_freq_max_hz" => self.env.local_freq_max_hz = parse_num(key, value)?,
            "env.local_freq_idle_hz" => self.env.local_freq_idle_hz = parse_num(key, value)?,
            "env.remote_flops_per_cycle" => {
                self.env.remote_flops_per_cycle = parse_num(key, value)?
            }
            "env.remote_freq_hz" => self.env.remote_freq_hz = parse_num(key, value)?,
            "env.local_energy_coeff" => self.env.local_energy_coeff = parse_num(key, value)?,
            "env.remote_energy_coeff" => self.env.remote_energy_coeff = parse_num(key, value)?,
            "env.downlink_latency_s" => self.env.downlink_latency_s = parse_num(key, value)?,
            "env.step_bonus" => self.env.step_bonus = parse_num(key, value)?,
            "env.terminal_bonus" => self.env.terminal_bonus = parse_num(key, value)?,
            "env.min_accuracy" => self.env.min_accuracy = parse_num(key, value)?,
            "channel.carrier_hz" => self.channel.carrier_hz = parse_num(key, value)?,
            "channel.bandwidth_hz" => self.channel.bandwidth_hz = parse_num(key, value)?,
            "channel.noise_psd_dbm_hz" => self.channel.noise_psd_dbm_hz = parse_num(key, value)?,
            "channel.pathloss_ref_db" => self.channel.pathloss_ref_db = parse_num(key, value)?,
            "channel.pathloss_exponent" => {
                self.channel.pathloss_exponent = parse_num(key, value)?
            }
            "channel.pathloss_ref_distance_m" => {
                self.channel.pathloss_ref_distance_m = parse_num(key, value)?
            }
            "channel.min_distance_m" => self.channel.min_distance_m = parse_num(key, value)?,
            "channel.power_min_dbm" => self.channel.power_min_dbm = parse_num(key, value)?,
            "channel.power_max_dbm" => self.channel.power_max_dbm = parse_num(key, value)?,
            "semantics.symbols_per_word" => {
                self.semantics.symbols_per_word = parse_num(key, value)?
            }
            "semantics.units_per_sentence" => {
                self.semantics.units_per_sentence = parse_num(key, value)?
            }
            "semantics.words_per_sentence" => {
                self.semantics.words_per_sentence = parse_num(key, value)?
            }
            "semantics.table_path" => self.semantics.table_path = value.trim().to_string(),
            "ppo.learning_rate" => self.ppo.learning_rate = parse_num(key, value)?,
            "ppo.discount" => self.ppo.discount = parse_num(key, value)?,
            "ppo.gae_lambda" => self.ppo.gae_lambda = parse_num(key, value)?,
            "ppo.clip_epsilon" => self.ppo.clip_epsilon = parse_num(key, value)?,
            "ppo.epochs" => self.ppo.epochs = parse_num(key, value)?,
            "ppo.minibatch_size" => self.ppo.minibatch_size = parse_num(key, value)?,
            "ppo.value_coeff" => self.ppo.value_coeff = parse_num(key, value)?,
            "ppo.entropy_coeff" => self.ppo.entropy_coeff = parse_num(key, value)?,
            "ppo.normalize_advantages" => {
                self.ppo.normalize_advantages = parse_bool(key, value)?
            }
            "ppo.hidden_sizes" => self.ppo.hidden_sizes = parse_sizes(key, value)?,
            "dqn.learning_rate" => self.dqn.learning_rate = parse_num(key, value)?,
            "dqn.discount" => self.dqn.discount = parse_num(key, value)?,
            "dqn.buffer_capacity" => self.dqn.buffer_capacity = parse_num(key, value)?,
            "dqn.batch_size" => self.dqn.batch_size = parse_num(key, value)?,
            "dqn.target_sync_steps" => self.dqn.target_sync_steps = parse_num(key, value)?,
            "dqn.epsilon_start" => self.dqn.epsilon_start = parse_num(key, value)?,
            "dqn.epsilon_end" => self.dqn.epsilon_end = parse_num(key, value)?,
            "dqn.epsilon_decay_steps" => self.dqn.epsilon_decay_steps = parse_num(key, value)?,
            "dqn.hidden_sizes" => self.dqn.hidden_sizes = parse_sizes(key, value)?,
            "grid.power_levels" => self.grid.power_levels = parse_num(key, value)?,
            "grid.freq_levels" => self.grid.freq_levels = parse_num(key, value)?,
            "grid.max_joint_actions" => self.grid.max_joint_actions = parse_num(key, value)?,
            "train.episodes" => self.train.episodes = parse_num(key, value)?,
            "train.fed_period" => self.train.fed_period = parse_num(key, value)?,
            "train.fed_average_critic" => {
                self.train.fed_average_critic = parse_bool(key, value)?
            }
            "train.fed_reset_optimizer" => {
                self.train.fed_reset_optimizer = parse_bool(key, value)?
            }
            "train.checkpoint_period" => self.train.checkpoint_period = parse_num(key, value)?,
            unknown => {
                return Err(Error::config(format!("unknown config key `{unknown}`")));
            }
        }
        Ok(())
    }

    /// Parse `key = value` lines, `#` comments and blank lines allowed.
    pub fn apply_str(&mut self, text: &str) -> Result<()> {
        for (lineno, raw) in text.lines().enumerate() {
            let line = raw.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let (key, value) = line.split_once('=').ok_or_else(|| {
                Error::config(format!("line {}: expected `key = value`", lineno + 1))
            })?;
            self.set(key.trim(), value)?;
        }
        Ok(())
    }

    pub fn apply_file(&mut self, path: &std::path::Path) -> Result<()> {
        let text = std::fs::read_to_string(path).map_err(|e| {
            Error::config(format!("cannot read config file {}: {e}", path.display()))
        })?;
        self.apply_str(&text)
    }

    /// Sanity-check values that the simulator depends on.
    pub fn validate(&self) -> Result<()> {
        let checks: [(&str, bool); 16] = [
            ("env.num_ues", self.env.num_ues >= 1),
            ("env.area_m", self.env.area_m > 0.0),
            ("env.flops_per_sentence", self.env.flops_per_sentence > 0.0),
            ("env.decode_cost_ratio", self.env.decode_cost_ratio > 0.0),
            ("env.max_latency_s", self.env.max_latency_s > 0.0),
            ("env.battery_j", self.env.battery_j > 0.0),
            (
                "env.local_freq_min_hz",
                self.env.local_freq_min_hz > 0.0
                    && self.env.local_freq_min_hz <= self.env.local_freq_max_hz,
            ),
            ("env.local_flops_per_cycle", self.env.local_flops_per_cycle > 0.0),
            ("env.remote_flops_per_cycle", self.env.remote_flops_per_cycle > 0.0),
            ("env.remote_freq_hz", self.env.remote_freq_hz > 0.0),
            ("channel.carrier_hz", self.channel.carrier_hz > 0.0),
            ("channel.bandwidth_hz", self.channel.bandwidth_hz > 0.0),
            ("channel.pathloss_exponent", self.channel.pathloss_exponent > 0.0),
            (
                "channel.power_min_dbm",
                self.channel.power_min_dbm <= self.channel.power_max_dbm,
            ),
            ("ppo.discount", self.ppo.discount > 0.0 && self.ppo.discount < 1.0),
            (
                "ppo.gae_lambda",
                self.ppo.gae_lambda > 0.0 && self.ppo.gae_lambda <= 1.0,
            ),
        ];
        for (key, ok) in checks {
            if !ok {
                return Err(Error::config(format!("key `{key}`: value out of range")));
            }
        }
        if self.semantics.symbols_per_word <= 0.0
            || self.semantics.units_per_sentence <= 0.0
            || self.semantics.words_per_sentence <= 0.0
        {
            return Err(Error::config(
                "semantics.* rates must be strictly positive".to_string(),
            ));
        }
        Ok(())
    }

    /// The effective configuration as sorted `key = value` lines, suitable
    /// for echoing into a run directory and re-loading.
    pub fn to_flat_string(&self) -> String {
        let mut pairs: Vec<(String, String)> = vec![
            ("env.num_ues".into(), self.env.num_ues.to_string()),
            ("env.area_m".into(), self.env.area_m.to_string()),
            ("env.max_steps".into(), self.env.max_steps.to_string()),
            ("env.queue_len".into(), self.env.queue_len.to_string()),
            (
                "env.flops_per_sentence".into(),
                self.env.flops_per_sentence.to_string(),
            ),
            (
                "env.decode_cost_ratio".into(),
                self.env.decode_cost_ratio.to_string(),
            ),
            ("env.max_latency_s".into(), self.env.max_latency_s.to_string()),
            ("env.battery_j".into(), self.env.battery_j.to_string()),
            (
                "env.local_flops_per_cycle".into(),
                self.env.local_flops_per_cycle.to_string(),
            ),
            (
                "env.local_freq_min_hz".into(),
                self.env.local_freq_min_hz.to_string(),
            ),
            (
                "env.local_freq_max_hz".into(),
                self.env.local_freq_max_hz.to_string(),
            ),
            (
                "env.local_freq_idle_hz".into(),
                self.env.local_freq_idle_hz.to_string(),
            ),
            (
                "env.remote_flops_per_cycle".into(),
                self.env.remote_flops_per_cycle.to_string(),
            ),
            ("env.remote_freq_hz".into(), self.env.remote_freq_hz.to_string()),
            (
                "env.local_energy_coeff".into(),
                self.env.local_energy_coeff.to_string(),
            ),
            (
                "env.remote_energy_coeff".into(),
                self.env.remote_energy_coeff.to_string(),
            ),
            (
                "env.downlink_latency_s".into(),
                self.env.downlink_latency_s.to_string(),
            ),
            ("env.step_bonus".into(), self.env.step_bonus.to_string()),
            ("env.terminal_bonus".into(), self.env.terminal_bonus.to_string()),
            ("env.min_accuracy".into(), self.env.min_accuracy.to_string()),
            ("channel.carrier_hz".into(), self.channel.carrier_hz.to_string()),
            (
                "channel.bandwidth_hz".into(),
                self.channel.bandwidth_hz.to_string(),
            ),
            (
                "channel.noise_psd_dbm_hz".into(),
                self.channel.noise_psd_dbm_hz.to_string(),
            ),
            (
                "channel.pathloss_ref_db".into(),
                self.channel.pathloss_ref_db.to_string(),
            ),
            (
                "channel.pathloss_exponent".into(),
                self.channel.pathloss_exponent.to_string(),
            ),
            (
                "channel.pathloss_ref_distance_m".into(),
                self.channel.pathloss_ref_distance_m.to_string(),
            ),
            (
                "channel.min_distance_m".into(),
                self.channel.min_distance_m.to_string(),
            ),
            (
                "channel.power_min_dbm".into(),
                self.channel.power_min_dbm.to_string(),
            ),
            (
                "channel.power_max_dbm".into(),
                self.channel.power_max_dbm.to_string(),
            ),
            (
                "semantics.symbols_per_word".into(),
                self.semantics.symbols_per_word.to_string(),
            ),
            (
                "semantics.units_per_sentence".into(),
                self.semantics.units_per_sentence.to_string(),
            ),
            (
                "semantics.words_per_sentence".into(),
                self.semantics.words_per_sentence.to_string(),
            ),
            ("semantics.table_path".into(), self.semantics.table_path.clone()),
            ("ppo.learning_rate".into(), self.ppo.learning_rate.to_string()),
            ("ppo.discount".into(), self.ppo.discount.to_string()),
            ("ppo.gae_lambda".into(), self.ppo.gae_lambda.to_string()),
            ("ppo.clip_epsilon".into(), self.ppo.clip_epsilon.to_string()),
            ("ppo.epochs".into(), self.ppo.epochs.to_string()),
            ("ppo.minibatch_size".into(), self.ppo.minibatch_size.to_string()),
            ("ppo.value_coeff".into(), self.ppo.value_coeff.to_string()),
            ("ppo.entropy_coeff".into(), self.ppo.entropy_coeff.to_string()),
            (
                "ppo.normalize_advantages".into(),
                self.ppo.normalize_advantages.to_string(),
            ),
            ("ppo.hidden_sizes".into(), fmt_sizes(&self.ppo.hidden_sizes)),
            ("dqn.learning_rate".into(), self.dqn.learning_rate.to_string()),
            ("dqn.discount".into(), self.dqn.discount.to_string()),
            ("dqn.buffer_capacity".into(), self.dqn.buffer_capacity.to_string()),
            ("dqn.batch_size".into(), self.dqn.batch_size.to_string()),
            (
                "dqn.target_sync_steps".into(),
                self.dqn.target_sync_steps.to_string(),
            ),
            ("dqn.epsilon_start".into(), self.dqn.epsilon_start.to_string()),
            ("dqn.epsilon_end".into(), self.dqn.epsilon_end.to_string()),
            (
                "dqn.epsilon_decay_steps".into(),
                self.dqn.epsilon_decay_steps.to_string(),
            ),
            ("dqn.hidden_sizes".into(), fmt_sizes(&self.dqn.hidden_sizes)),
            ("grid.power_levels".into(), self.grid.power_levels.to_string()),
            ("grid.freq_levels".into(), self.grid.freq_levels.to_string()),
            (
                "grid.max_joint_actions".into(),
                self.grid.max_joint_actions.to_string(),
            ),
            ("train.episodes".into(), self.train.episodes.to_string()),
            ("train.fed_period".into(), self.train.fed_period.to_string()),
            (
                "train.fed_average_critic".into(),
                self.train.fed_average_critic.to_string(),
            ),
            (
                "train.fed_reset_optimizer".into(),
                self.train.fed_reset_optimizer.to_string(),
            ),
            (
                "train.checkpoint_period".into(),
                self.train.checkpoint_period.to_string(),
            ),
        ];
        pairs.sort();
        let mut out = String::new();
        for (k, v) in pairs {
            out.push_str(&k);
            out.push_str(" = ");
            out.push_str(&v);
            out.push('\n');
        }
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_validate() {
        ScenarioConfig::default().validate().unwrap();
    }

    #[test]
    fn unknown_key_is_error_naming_it() {
        let mut cfg = ScenarioConfig::default();
        let err = cfg.set("env.bogus_key", "1").unwrap_err();
        assert!(err.to_string().contains("env.bogus_key"));
    }

    #[test]
    fn bad_value_is_error_naming_key() {
        let mut cfg = ScenarioConfig::default();
        let err = cfg.set("env.num_ues", "four").unwrap_err();
        assert!(err.to_string().contains("env.num_ues"));
    }

    #[test]
    fn flat_echo_round_trips() {
        let mut cfg = ScenarioConfig::default();
        cfg.apply_profile(Profile::Fast);
        cfg.set("channel.power_max_dbm", "21.5").unwrap();
        let echoed = cfg.to_flat_string();
        let mut reparsed = ScenarioConfig::default();
        reparsed.apply_str(&echoed).unwrap();
        assert_eq!(cfg, reparsed);
    }

    #[test]
    fn comments_and_blanks_ignored() {
        let mut cfg = ScenarioConfig::default();
        cfg.apply_str("# comment\n\nenv.num_ues = 7\n").unwrap();
        assert_eq!(cfg.env.num_ues, 7);
    }

    #[test]
    fn dbm_conversions() {
        assert!((dbm_to_watts(30.0) - 1.0).abs() < 1e-12);
        assert!((dbm_to_watts(0.0) - 1e-3).abs() < 1e-15);
        // thermal noise floor
        let psd = dbm_per_hz_to_w_per_hz(-174.0);
        assert!((psd - 10f64.powf(-20.4)).abs() / psd < 1e-12);
    }

    #[test]
    fn fast_profile_overrides() {
        let mut cfg = ScenarioConfig::default();
        cfg.apply_profile(Profile::Fast);
        assert_eq!(cfg.env.num_ues, 2);
        assert_eq!(cfg.train.episodes, 300);
        assert!((cfg.ppo.learning_rate - 3e-4).abs() < 1e-18);
    }
}
