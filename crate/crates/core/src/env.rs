//! Multi-UE episodic task environment.
//!
//! Each step every UE attempts one sentence of its task: locally on its own
//! GPU or offloaded as semantic symbols to the edge server. The environment
//! accounts latencies and energies, checks the feasibility constraints,
//! advances task queues, and emits the shared reward.
//!
//! A step proceeds in two stages. `evaluate` is pure: given a joint action
//! and per-UE channel draws it computes the full outcome without touching
//! state (the exhaustive baseline enumerates over it). `step` evaluates and
//! then commits queue decrements and battery deductions.

use std::sync::Arc;

use rand::Rng;

use crate::channel::{self, ChannelDraw, ChannelParams};
use crate::config::ScenarioConfig;
use crate::error::{Error, Result};
use crate::semantics::{AccuracyTable, SemanticSourceStats};

/// Observation vector length produced by [`Environment::observe`].
pub const OBS_DIM: usize = 6;

/// One offloadable task: a queue of sentences with a per-sentence compute
/// cost and latency bound.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TaskSpec {
    pub queue_len: u32,
    pub flops_per_sentence: f64,
    pub max_latency_s: f64,
}

/// Dynamic per-UE state.
#[derive(Debug, Clone, PartialEq)]
pub struct UeState {
    pub position_m: (f64, f64),
    pub battery_j: f64,
    pub task: TaskSpec,
    pub distance_to_es_m: f64,
}

/// Per-UE component of a joint action. When `offload` is set the executed
/// GPU clock is forced to the idle frequency; when clear the executed
/// transmit power is forced to zero.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct UeAction {
    pub offload: bool,
    pub power_w: f64,
    pub freq_hz: f64,
}

/// One action per UE, indexed like the environment's roster.
pub type JointAction = Vec<UeAction>;

/// Feasibility flags for one UE and step. `all` must hold for the sentence
/// to count as executed.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ConstraintCheck {
    /// Semantic similarity meets the configured minimum (offloaded attempts
    /// only; local execution has no semantic channel).
    pub accuracy: bool,
    /// Offload decision is binary. Guaranteed by construction; recorded for
    /// completeness of the constraint set.
    pub association_binary: bool,
    /// Transmit power within `[0, p_max]`.
    pub power_limit: bool,
    /// Executed GPU clock within its admissible range.
    pub frequency_limit: bool,
    /// Total step latency within the per-sentence bound.
    pub latency_limit: bool,
    /// Battery can supply the attempt's energy.
    pub battery_limit: bool,
    /// UE index within the roster. Always true by construction.
    pub ue_index: bool,
}

impl ConstraintCheck {
    pub fn satisfied() -> Self {
        ConstraintCheck {
            accuracy: true,
            association_binary: true,
            power_limit: true,
            frequency_limit: true,
            latency_limit: true,
            battery_limit: true,
            ue_index: true,
        }
    }

    pub fn all(&self) -> bool {
        self.accuracy
            && self.association_binary
            && self.power_limit
            && self.frequency_limit
            && self.latency_limit
            && self.battery_limit
            && self.ue_index
    }

    pub fn violations(&self) -> u32 {
        [
            self.accuracy,
            self.association_binary,
            self.power_limit,
            self.frequency_limit,
            self.latency_limit,
            self.battery_limit,
            self.ue_index,
        ]
        .iter()
        .filter(|ok| !**ok)
        .count() as u32
    }
}

/// Latency and energy breakdown for one UE in one step.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct UeStepOutcome {
    pub local_latency_s: f64,
    pub upload_latency_s: f64,
    pub remote_latency_s: f64,
    pub download_latency_s: f64,
    /// `offload (t_ut + t_rc + t_dl) + (1 - offload) t_lc`.
    pub total_latency_s: f64,
    pub local_energy_j: f64,
    pub upload_energy_j: f64,
    /// Edge-server energy; reported but excluded from the objective.
    pub remote_energy_j: f64,
    pub constraints: ConstraintCheck,
    /// Whether the attempt physically ran (energy was spent). Refused or
    /// idle UEs report zero latencies and energies.
    pub attempted: bool,
    pub sentence_completed: bool,
    /// Instantaneous linear SNR (zero for local execution).
    pub snr: f64,
    /// Semantic similarity of the attempt (1 for local execution).
    pub similarity: f64,
}

impl UeStepOutcome {
    fn idle() -> Self {
        UeStepOutcome {
            local_latency_s: 0.0,
            upload_latency_s: 0.0,
            remote_latency_s: 0.0,
            download_latency_s: 0.0,
            total_latency_s: 0.0,
            local_energy_j: 0.0,
            upload_energy_j: 0.0,
            remote_energy_j: 0.0,
            constraints: ConstraintCheck::satisfied(),
            attempted: false,
            sentence_completed: false,
            snr: 0.0,
            similarity: 1.0,
        }
    }

    /// UE-side energy of the step (local compute plus upload).
    pub fn ue_energy_j(&self) -> f64 {
        self.local_energy_j + self.upload_energy_j
    }
}

/// Outcome of one environment step.
#[derive(Debug, Clone, PartialEq)]
pub struct StepOutcome {
    pub per_ue: Vec<UeStepOutcome>,
    /// Shared reward: step bonus minus the summed UE-side energy.
    pub reward: f64,
    /// Summed UE-side energy of the step.
    pub step_energy_j: f64,
    /// Number of UEs that actually transmitted this step.
    pub num_offloaders: u32,
}

/// Scenario parameters in SI units, derived once from [`ScenarioConfig`].
#[derive(Debug, Clone, PartialEq)]
pub struct EnvParams {
    pub num_ues: usize,
    pub area_m: f64,
    pub max_steps: u32,
    pub queue_len: u32,
    /// Per-sentence compute cost including the decode stage, applied
    /// identically to local and remote execution.
    pub effective_flops: f64,
    pub max_latency_s: f64,
    pub battery_j: f64,
    pub local_flops_per_cycle: f64,
    pub freq_min_hz: f64,
    pub freq_max_hz: f64,
    pub freq_idle_hz: f64,
    pub remote_flops_per_cycle: f64,
    pub remote_freq_hz: f64,
    pub local_energy_coeff: f64,
    pub remote_energy_coeff: f64,
    pub downlink_latency_s: f64,
    pub step_bonus: f64,
    pub terminal_bonus: f64,
    pub min_accuracy: f64,
    pub power_min_w: f64,
    pub power_max_w: f64,
    pub channel: ChannelParams,
    pub stats: SemanticSourceStats,
}

impl EnvParams {
    pub fn from_config(cfg: &ScenarioConfig) -> Result<Self> {
        cfg.validate()?;
        Ok(EnvParams {
            num_ues: cfg.env.num_ues,
            area_m: cfg.env.area_m,
            max_steps: cfg.env.max_steps,
            queue_len: cfg.env.queue_len,
            effective_flops: cfg.env.flops_per_sentence * cfg.env.decode_cost_ratio,
            max_latency_s: cfg.env.max_latency_s,
            battery_j: cfg.env.battery_j,
            local_flops_per_cycle: cfg.env.local_flops_per_cycle,
            freq_min_hz: cfg.env.local_freq_min_hz,
            freq_max_hz: cfg.env.local_freq_max_hz,
            freq_idle_hz: cfg.env.local_freq_idle_hz,
            remote_flops_per_cycle: cfg.env.remote_flops_per_cycle,
            remote_freq_hz: cfg.env.remote_freq_hz,
            local_energy_coeff: cfg.env.local_energy_coeff,
            remote_energy_coeff: cfg.env.remote_energy_coeff,
            downlink_latency_s: cfg.env.downlink_latency_s,
            step_bonus: cfg.env.step_bonus,
            terminal_bonus: cfg.env.terminal_bonus,
            min_accuracy: cfg.env.min_accuracy,
            power_min_w: cfg.channel.power_min_w(),
            power_max_w: cfg.channel.power_max_w(),
            channel: ChannelParams::from_config(&cfg.channel),
            stats: SemanticSourceStats {
                units_per_sentence: cfg.semantics.units_per_sentence,
                words_per_sentence: cfg.semantics.words_per_sentence,
                symbols_per_word: cfg.semantics.symbols_per_word,
            },
        })
    }
}

/// Compute latency of one sentence on a GPU running at `freq_hz`.
pub fn local_latency(flops: f64, flops_per_cycle: f64, freq_hz: f64) -> Result<f64> {
    if freq_hz <= 0.0 || !freq_hz.is_finite() {
        return Err(Error::invalid(format!(
            "GPU frequency must be positive, got {freq_hz}"
        )));
    }
    if flops_per_cycle <= 0.0 {
        return Err(Error::invalid("flops per cycle must be positive".to_string()));
    }
    Ok(flops / (flops_per_cycle * freq_hz))
}

/// Local compute energy `coeff * t * f^3`.
pub fn local_energy(compute_latency_s: f64, freq_hz: f64, coeff: f64) -> f64 {
    coeff * compute_latency_s * freq_hz.powi(3)
}

/// Upload latency of one sentence's semantic symbols.
///
/// Zero when the sentence runs locally. An offload attempt with zero
/// similarity can never finish and is signalled as an error so callers can
/// refuse the step.
pub fn upload_latency(
    offload: bool,
    stats: &SemanticSourceStats,
    bandwidth_hz: f64,
    eps: f64,
) -> Result<f64> {
    if !offload {
        return Ok(0.0);
    }
    if bandwidth_hz <= 0.0 {
        return Err(Error::invalid("bandwidth must be positive".to_string()));
    }
    if !(eps > 0.0 && eps <= 1.0) {
        return Err(Error::invalid(format!(
            "offload with similarity {eps} is infeasible"
        )));
    }
    Ok(stats.words_per_sentence * stats.symbols_per_word / (bandwidth_hz * eps))
}

/// Transmission energy `p * t_ut`.
pub fn upload_energy(power_w: f64, upload_latency_s: f64) -> f64 {
    power_w * upload_latency_s
}

/// Remote compute latency with the edge GPU shared equally among the
/// `num_offloaders` transmitting UEs.
pub fn remote_latency(
    flops: f64,
    flops_per_cycle: f64,
    freq_hz: f64,
    num_offloaders: u32,
) -> Result<f64> {
    if num_offloaders == 0 {
        return Err(Error::invalid(
            "remote latency undefined without offloaders".to_string(),
        ));
    }
    Ok(flops * num_offloaders as f64 / (flops_per_cycle * freq_hz))
}

/// Edge-server energy for one offloaded sentence at the shared clock.
pub fn remote_energy(
    remote_latency_s: f64,
    freq_hz: f64,
    num_offloaders: u32,
    coeff: f64,
) -> f64 {
    coeff * remote_latency_s * (freq_hz / num_offloaders as f64).powi(3)
}

/// End-of-episode reward: a bonus per spare step when every queue drained
/// by `completion_step`, otherwise a punishment per unfinished sentence.
pub fn terminal_reward(
    completion_step: Option<u32>,
    max_steps: u32,
    num_ues: usize,
    queue_remaining: u32,
    bonus: f64,
) -> f64 {
    match completion_step {
        Some(t0) => {
            debug_assert!(t0 <= max_steps);
            bonus * num_ues as f64 * (max_steps as f64 - t0 as f64)
        }
        None => -bonus * queue_remaining as f64,
    }
}

/// The episodic multi-UE environment.
#[derive(Debug, Clone)]
pub struct Environment {
    params: EnvParams,
    table: Arc<AccuracyTable>,
    pub(crate) ues: Vec<UeState>,
    step_count: u32,
    completion_step: Option<u32>,
}

impl Environment {
    pub fn new(cfg: &ScenarioConfig, table: Arc<AccuracyTable>) -> Result<Self> {
        let params = EnvParams::from_config(cfg)?;
        if !table.covers_k(params.stats.symbols_per_word) {
            return Err(Error::config(format!(
                "semantics.symbols_per_word = {} not covered by the accuracy table",
                params.stats.symbols_per_word
            )));
        }
        let ues = (0..params.num_ues)
            .map(|_| UeState {
                position_m: (params.area_m / 2.0, params.area_m / 2.0),
                battery_j: params.battery_j,
                task: TaskSpec {
                    queue_len: params.queue_len,
                    flops_per_sentence: params.effective_flops,
                    max_latency_s: params.max_latency_s,
                },
                distance_to_es_m: 0.0,
            })
            .collect();
        Ok(Environment {
            params,
            table,
            ues,
            step_count: 0,
            completion_step: None,
        })
    }

    pub fn params(&self) -> &EnvParams {
        &self.params
    }

    pub fn num_ues(&self) -> usize {
        self.params.num_ues
    }

    pub fn ue(&self, index: usize) -> &UeState {
        &self.ues[index]
    }

    pub fn step_count(&self) -> u32 {
        self.step_count
    }

    pub fn completion_step(&self) -> Option<u32> {
        self.completion_step
    }

    pub fn total_queue(&self) -> u32 {
        self.ues.iter().map(|u| u.task.queue_len).sum()
    }

    pub fn is_terminated(&self) -> bool {
        self.completion_step.is_some() || self.step_count >= self.params.max_steps
    }

    /// Place UEs uniformly in the square area and refill batteries and
    /// queues. Positions stay fixed for the whole episode.
    pub fn reset<R: Rng + ?Sized>(&mut self, rng: &mut R) {
        let area = self.params.area_m;
        let center = area / 2.0;
        for ue in &mut self.ues {
            let x = rng.random_range(0.0..area);
            let y = rng.random_range(0.0..area);
            ue.position_m = (x, y);
            ue.distance_to_es_m = ((x - center).powi(2) + (y - center).powi(2)).sqrt();
            ue.battery_j = self.params.battery_j;
            ue.task.queue_len = self.params.queue_len;
        }
        self.step_count = 0;
        self.completion_step = None;
    }

    /// Block-fading channel realizations for the current step.
    pub fn draw_channels<R: Rng + ?Sized>(&self, rng: &mut R) -> Result<Vec<ChannelDraw>> {
        self.ues
            .iter()
            .map(|ue| {
                let gain = channel::pathloss_gain(
                    ue.distance_to_es_m,
                    self.params.channel.carrier_hz,
                    &self.params.channel,
                )?;
                Ok(ChannelDraw {
                    large_scale_gain: gain,
                    rayleigh_coeff_sq: channel::draw_fading(rng),
                    bandwidth_hz: self.params.channel.bandwidth_hz,
                    noise_psd_w_per_hz: self.params.channel.noise_psd_w_per_hz,
                })
            })
            .collect()
    }

    /// Normalized local observation of one UE:
    /// `[x, y, battery, queue, flops, latency-bound]`, each scaled by its
    /// nominal configured value.
    pub fn observe(&self, index: usize) -> Vec<f64> {
        let ue = &self.ues[index];
        vec![
            ue.position_m.0 / self.params.area_m,
            ue.position_m.1 / self.params.area_m,
            ue.battery_j / self.params.battery_j,
            ue.task.queue_len as f64 / self.params.queue_len.max(1) as f64,
            ue.task.flops_per_sentence / self.params.effective_flops,
            ue.task.max_latency_s / self.params.max_latency_s,
        ]
    }

    /// Pure evaluation of a joint action under given channel draws.
    pub fn evaluate(&self, actions: &[UeAction], draws: &[ChannelDraw]) -> Result<StepOutcome> {
        let n = self.ues.len();
        if actions.len() != n || draws.len() != n {
            return Err(Error::invalid(format!(
                "expected {n} actions and draws, got {} and {}",
                actions.len(),
                draws.len()
            )));
        }

        // Stage 1: validate each attempt and cost out its own latencies and
        // energies. Domain violations and empty batteries refuse the attempt
        // up front (nothing is transmitted or computed); accuracy and
        // latency shortfalls surface only after the attempt ran.
        let mut outcomes = vec![UeStepOutcome::idle(); n];
        let mut attempted_offload = vec![false; n];
        for (i, (action, draw)) in actions.iter().zip(draws).enumerate() {
            let ue = &self.ues[i];
            if ue.task.queue_len == 0 {
                continue; // drained queue: no-op
            }
            let out = &mut outcomes[i];

            // Executed power is zero for local execution and the executed
            // clock is the idle frequency while offloading, so each bound
            // only constrains the side that actually runs.
            let power_ok = !action.offload
                || (action.power_w.is_finite()
                    && action.power_w >= 0.0
                    && action.power_w <= self.params.power_max_w);
            let freq_ok = action.offload
                || (action.freq_hz.is_finite()
                    && action.freq_hz >= self.params.freq_min_hz
                    && action.freq_hz <= self.params.freq_max_hz);
            out.constraints.power_limit = power_ok;
            out.constraints.frequency_limit = freq_ok;
            if !power_ok || !freq_ok {
                continue; // malformed: refused with the violation recorded
            }

            let (local_e, upload_e);
            if action.offload {
                out.snr = channel::snr(true, action.power_w, draw)?;
                out.similarity = self
                    .table
                    .similarity(self.params.stats.symbols_per_word, out.snr)?;
                let t_ut = match upload_latency(
                    true,
                    &self.params.stats,
                    draw.bandwidth_hz,
                    out.similarity,
                ) {
                    Ok(t) => t,
                    Err(_) => {
                        // zero-similarity upload can never finish
                        out.constraints.accuracy = false;
                        continue;
                    }
                };
                out.upload_latency_s = t_ut;
                local_e = 0.0;
                upload_e = upload_energy(action.power_w, t_ut);
            } else {
                let t_lc = local_latency(
                    ue.task.flops_per_sentence,
                    self.params.local_flops_per_cycle,
                    action.freq_hz,
                )?;
                out.local_latency_s = t_lc;
                local_e = local_energy(t_lc, action.freq_hz, self.params.local_energy_coeff);
                upload_e = 0.0;
            }

            if local_e + upload_e > ue.battery_j {
                out.constraints.battery_limit = false;
                out.upload_latency_s = 0.0;
                out.local_latency_s = 0.0;
                continue; // the UE refuses an attempt it cannot power
            }

            out.local_energy_j = local_e;
            out.upload_energy_j = upload_e;
            out.attempted = true;
            attempted_offload[i] = action.offload;
        }

        // Stage 2: the edge GPU is shared equally among the UEs that
        // actually transmitted, which fixes remote latencies.
        let num_offloaders = attempted_offload.iter().filter(|o| **o).count() as u32;
        let mut step_energy = 0.0;
        for (i, action) in actions.iter().enumerate() {
            let out = &mut outcomes[i];
            if !out.attempted {
                continue;
            }
            if action.offload {
                out.remote_latency_s = remote_latency(
                    self.ues[i].task.flops_per_sentence,
                    self.params.remote_flops_per_cycle,
                    self.params.remote_freq_hz,
                    num_offloaders,
                )?;
                out.remote_energy_j = remote_energy(
                    out.remote_latency_s,
                    self.params.remote_freq_hz,
                    num_offloaders,
                    self.params.remote_energy_coeff,
                );
                out.download_latency_s = self.params.downlink_latency_s;
                out.constraints.accuracy = out.similarity >= self.params.min_accuracy;
            }
            let rho = if action.offload { 1.0 } else { 0.0 };
            out.total_latency_s = rho
                * (out.upload_latency_s + out.remote_latency_s + out.download_latency_s)
                + (1.0 - rho) * out.local_latency_s;
            out.constraints.latency_limit = out.total_latency_s <= self.ues[i].task.max_latency_s;
            out.sentence_completed = out.constraints.all();
            step_energy += out.ue_energy_j();
        }

        Ok(StepOutcome {
            reward: self.params.step_bonus - step_energy,
            step_energy_j: step_energy,
            num_offloaders,
            per_ue: outcomes,
        })
    }

    /// Evaluate and commit one step.
    pub fn step(&mut self, actions: &[UeAction], draws: &[ChannelDraw]) -> Result<StepOutcome> {
        if self.is_terminated() {
            return Err(Error::invalid("episode already terminated".to_string()));
        }
        let outcome = self.evaluate(actions, draws)?;
        for (ue, out) in self.ues.iter_mut().zip(&outcome.per_ue) {
            if out.attempted {
                ue.battery_j -= out.ue_energy_j();
            }
            if out.sentence_completed {
                ue.task.queue_len -= 1;
            }
        }
        self.step_count += 1;
        if self.completion_step.is_none() && self.total_queue() == 0 {
            self.completion_step = Some(self.step_count);
        }
        Ok(outcome)
    }

    /// Episode-end reward for the current state.
    pub fn terminal_reward(&self) -> f64 {
        terminal_reward(
            self.completion_step,
            self.params.max_steps,
            self.params.num_ues,
            self.total_queue(),
            self.params.terminal_bonus,
        )
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::seeds;

    fn cfg() -> ScenarioConfig {
        ScenarioConfig::default()
    }

    fn env_with(cfg: &ScenarioConfig) -> Environment {
        Environment::new(cfg, Arc::new(AccuracyTable::builtin())).unwrap()
    }

    fn uniform_draws(env: &Environment, gain: f64, h2: f64) -> Vec<ChannelDraw> {
        (0..env.num_ues())
            .map(|_| ChannelDraw {
                large_scale_gain: gain,
                rayleigh_coeff_sq: h2,
                bandwidth_hz: env.params().channel.bandwidth_hz,
                noise_psd_w_per_hz: env.params().channel.noise_psd_w_per_hz,
            })
            .collect()
    }

    fn local_action(freq_hz: f64) -> UeAction {
        UeAction {
            offload: false,
            power_w: 0.0,
            freq_hz,
        }
    }

    fn offload_action(power_w: f64) -> UeAction {
        UeAction {
            offload: true,
            power_w,
            freq_hz: 0.0,
        }
    }

    #[test]
    fn local_latency_hand_evaluated() {
        let t = local_latency(2.2e10, 1024.0, 1.0e9).unwrap();
        assert!((t - 2.2e10 / 1.024e12).abs() < 1e-12);
        assert!((t - 0.021484375).abs() < 1e-9);
    }

    #[test]
    fn local_latency_inverse_in_frequency() {
        let t1 = local_latency(2.2e10, 1024.0, 1.0e9).unwrap();
        let t2 = local_latency(2.2e10, 1024.0, 2.0e9).unwrap();
        assert!((t1 / t2 - 2.0).abs() < 1e-12);
    }

    #[test]
    fn local_latency_rejects_nonpositive_frequency() {
        assert!(local_latency(1e10, 1024.0, 0.0).is_err());
        assert!(local_latency(1e10, 1024.0, -1e9).is_err());
    }

    #[test]
    fn local_energy_hand_evaluated() {
        assert_eq!(local_energy(0.0, 1e9, 1e-28), 0.0);
        let e = local_energy(0.02, 1e9, 1e-28);
        assert!((e - 2e-3).abs() / 2e-3 < 1e-12);
    }

    #[test]
    fn local_energy_quadratic_in_frequency_at_fixed_work() {
        // E = coeff * (flops / (n f)) * f^3 = coeff * flops / n * f^2
        let coeff = 1e-28;
        let flops = 4.4e10;
        let n = 1024.0;
        for f in [0.96e9, 1.3e9, 1.72e9] {
            let t = local_latency(flops, n, f).unwrap();
            let e = local_energy(t, f, coeff);
            let direct = coeff * flops / n * f * f;
            assert!((e - direct).abs() / direct < 1e-12);
        }
    }

    #[test]
    fn upload_latency_hand_evaluated() {
        let stats = SemanticSourceStats {
            units_per_sentence: 30.0,
            words_per_sentence: 20.0,
            symbols_per_word: 15.0,
        };
        assert_eq!(upload_latency(false, &stats, 1e5, 0.0).unwrap(), 0.0);
        let t = upload_latency(true, &stats, 1e5, 0.9).unwrap();
        assert!((t - 300.0 / 9e4).abs() < 1e-12);
        let e = upload_energy(0.1, t);
        assert!((e - 3.333333333333333e-4).abs() < 1e-12);
        assert!(upload_latency(true, &stats, 1e5, 0.0).is_err());
    }

    #[test]
    fn remote_latency_hand_evaluated_and_linear_sharing() {
        let t1 = remote_latency(2.2e10, 8192.0, 0.96e9, 1).unwrap();
        assert!((t1 - 2.2e10 / 7.86432e12).abs() < 1e-12);
        let t4 = remote_latency(2.2e10, 8192.0, 0.96e9, 4).unwrap();
        assert!((t4 / t1 - 4.0).abs() < 1e-12);
        assert!(remote_latency(2.2e10, 8192.0, 0.96e9, 0).is_err());
    }

    #[test]
    fn remote_energy_two_point_sharing_scaling() {
        // At fixed per-unit work, E^rc scales as 1/num_offloaders^2.
        let f = 0.96e9;
        let t1 = remote_latency(2.2e10, 8192.0, f, 1).unwrap();
        let t2 = remote_latency(2.2e10, 8192.0, f, 2).unwrap();
        let e1 = remote_energy(t1, f, 1, 1e-28);
        let e2 = remote_energy(t2, f, 2, 1e-28);
        assert!((e2 / e1 - 0.25).abs() < 1e-12);
    }

    #[test]
    fn terminal_reward_cases() {
        assert_eq!(terminal_reward(Some(40), 40, 4, 0, 1.0), 0.0);
        assert_eq!(terminal_reward(Some(35), 40, 4, 0, 1.0), 20.0);
        assert_eq!(terminal_reward(None, 40, 4, 7, 1.0), -7.0);
    }

    #[test]
    fn all_local_step_decrements_and_reward_matches_formula() {
        let cfg = cfg();
        let mut env = env_with(&cfg);
        let mut rng = seeds::stream_rng(1, seeds::ENV);
        env.reset(&mut rng);
        let f_min = env.params().freq_min_hz;
        let actions = vec![local_action(f_min); env.num_ues()];
        let draws = uniform_draws(&env, 1e-9, 1.0);
        let before = env.total_queue();
        let out = env.step(&actions, &draws).unwrap();
        assert_eq!(env.total_queue(), before - env.num_ues() as u32);
        let l_eff = env.params().effective_flops;
        let n = env.params().local_flops_per_cycle;
        let per_ue = 1e-28 * (l_eff / (n * f_min)) * f_min.powi(3);
        let expected = 1.0 - env.num_ues() as f64 * per_ue;
        assert!((out.reward - expected).abs() < 1e-12);
        for ue_out in &out.per_ue {
            assert!(ue_out.sentence_completed);
            assert_eq!(ue_out.upload_energy_j, 0.0);
        }
    }

    #[test]
    #[allow(clippy::needless_range_loop)]
    fn battery_shortfall_is_isolated_per_ue() {
        let cfg = cfg();
        let mut env = env_with(&cfg);
        let mut rng = seeds::stream_rng(2, seeds::ENV);
        env.reset(&mut rng);
        // Drain UE 0 battery below one local attempt.
        env.ues[0].battery_j = 1e-9;
        let actions = vec![local_action(env.params().freq_min_hz); env.num_ues()];
        let draws = uniform_draws(&env, 1e-9, 1.0);
        let queues_before: Vec<u32> = env.ues.iter().map(|u| u.task.queue_len).collect();
        let out = env.step(&actions, &draws).unwrap();
        assert!(!out.per_ue[0].constraints.battery_limit);
        assert!(!out.per_ue[0].sentence_completed);
        assert_eq!(out.per_ue[0].ue_energy_j(), 0.0);
        assert_eq!(env.ues[0].task.queue_len, queues_before[0]);
        for i in 1..env.num_ues() {
            assert!(out.per_ue[i].sentence_completed);
            assert_eq!(env.ues[i].task.queue_len, queues_before[i] - 1);
        }
    }

    #[test]
    fn empty_queue_is_noop() {
        let cfg = cfg();
        let mut env = env_with(&cfg);
        let mut rng = seeds::stream_rng(3, seeds::ENV);
        env.reset(&mut rng);
        env.ues[0].task.queue_len = 0;
        let actions = vec![local_action(env.params().freq_max_hz); env.num_ues()];
        let draws = uniform_draws(&env, 1e-9, 1.0);
        let out = env.step(&actions, &draws).unwrap();
        assert!(!out.per_ue[0].attempted);
        assert_eq!(out.per_ue[0].ue_energy_j(), 0.0);
        assert!(out.per_ue[0].constraints.all());
    }

    #[test]
    fn malformed_actions_are_refused_not_crashed() {
        let cfg = cfg();
        let mut env = env_with(&cfg);
        let mut rng = seeds::stream_rng(4, seeds::ENV);
        env.reset(&mut rng);
        let mut actions = vec![local_action(env.params().freq_min_hz); env.num_ues()];
        actions[0] = offload_action(-0.5);
        actions[1].freq_hz = env.params().freq_max_hz * 10.0;
        let draws = uniform_draws(&env, 1e-9, 1.0);
        let out = env.step(&actions, &draws).unwrap();
        assert!(!out.per_ue[0].constraints.power_limit);
        assert!(!out.per_ue[0].attempted);
        assert!(!out.per_ue[1].constraints.frequency_limit);
        assert!(!out.per_ue[1].attempted);
    }

    #[test]
    fn offload_gates_local_latency_out_of_total() {
        let cfg = cfg();
        let mut env = env_with(&cfg);
        let mut rng = seeds::stream_rng(5, seeds::ENV);
        env.reset(&mut rng);
        let actions = vec![offload_action(env.params().power_max_w); env.num_ues()];
        let draws = uniform_draws(&env, 1e-7, 1.0);
        let out = env.step(&actions, &draws).unwrap();
        for ue_out in &out.per_ue {
            assert_eq!(ue_out.local_latency_s, 0.0);
            assert_eq!(ue_out.local_energy_j, 0.0);
            let expected = ue_out.upload_latency_s
                + ue_out.remote_latency_s
                + ue_out.download_latency_s;
            assert_eq!(ue_out.total_latency_s, expected);
        }
        assert_eq!(out.num_offloaders, env.num_ues() as u32);
    }

    #[test]
    fn observe_components() {
        let cfg = cfg();
        let mut env = env_with(&cfg);
        let mut rng = seeds::stream_rng(6, seeds::ENV);
        env.reset(&mut rng);
        let obs = env.observe(0);
        assert_eq!(obs.len(), OBS_DIM);
        assert_eq!(obs[2], 1.0); // fresh battery
        assert_eq!(obs[3], 1.0); // full queue
        for v in &obs {
            assert!((0.0..=1.0).contains(v), "{obs:?}");
        }
        env.ues[0].task.queue_len = 0;
        assert_eq!(env.observe(0)[3], 0.0);
    }

    #[test]
    fn observation_snapshot_for_seeded_scenario() {
        // Frozen from a seeded reference run.
        let cfg = cfg();
        let mut env = env_with(&cfg);
        let mut rng = seeds::stream_rng(42, seeds::ENV);
        env.reset(&mut rng);
        assert_eq!(
            env.observe(0),
            vec![0.6859247523661594, 0.7794358857805335, 1.0, 1.0, 1.0, 1.0]
        );
        assert_eq!(
            env.observe(1),
            vec![0.6456590435844562, 0.5933720305909498, 1.0, 1.0, 1.0, 1.0]
        );
    }

    #[test]
    fn energy_bookkeeping_matches_battery_drain() {
        let cfg = cfg();
        let mut env = env_with(&cfg);
        let mut rng = seeds::stream_rng(7, seeds::ENV);
        env.reset(&mut rng);
        let initial: f64 = env.ues.iter().map(|u| u.battery_j).sum();
        let mut charged = 0.0;
        let mut step = 0u32;
        while !env.is_terminated() {
            let draws = env.draw_channels(&mut rng).unwrap();
            let actions: Vec<UeAction> = (0..env.num_ues())
                .map(|i| {
                    if (step + i as u32).is_multiple_of(2) {
                        local_action(env.params().freq_min_hz)
                    } else {
                        offload_action(env.params().power_min_w)
                    }
                })
                .collect();
            let out = env.step(&actions, &draws).unwrap();
            charged += out.step_energy_j;
            step += 1;
        }
        let remaining: f64 = env.ues.iter().map(|u| u.battery_j).sum();
        let drained = initial - remaining;
        assert!(
            (charged - drained).abs() <= 1e-9 * charged.max(1e-300),
            "charged {charged}, drained {drained}"
        );
    }

    #[test]
    fn queue_total_never_increases() {
        let cfg = cfg();
        let mut env = env_with(&cfg);
        let mut rng = seeds::stream_rng(8, seeds::ENV);
        env.reset(&mut rng);
        let initial = env.total_queue();
        let mut prev = initial;
        while !env.is_terminated() {
            let draws = env.draw_channels(&mut rng).unwrap();
            let actions = vec![offload_action(env.params().power_min_w); env.num_ues()];
            env.step(&actions, &draws).unwrap();
            let now = env.total_queue();
            assert!(now <= prev);
            prev = now;
        }
        assert!(initial - prev <= initial);
    }

    #[test]
    fn raising_limits_never_fails_a_passing_step() {
        let base_cfg = cfg();
        let mut relaxed_cfg = base_cfg.clone();
        relaxed_cfg.set("env.max_latency_s", "0.5").unwrap();
        relaxed_cfg.set("channel.power_max_dbm", "30").unwrap();
        let mut env = env_with(&base_cfg);
        let relaxed = env_with(&relaxed_cfg);
        let mut rng = seeds::stream_rng(9, seeds::ENV);
        for _ in 0..50 {
            env.reset(&mut rng);
            let strict = env.clone();
            let mut loose = relaxed.clone();
            loose.ues = strict.ues.clone();
            let draws = strict.draw_channels(&mut rng).unwrap();
            let actions: Vec<UeAction> = (0..strict.num_ues())
                .map(|_| {
                    if rng.random_bool(0.5) {
                        offload_action(rng.random_range(0.0..strict.params().power_max_w))
                    } else {
                        local_action(rng.random_range(
                            strict.params().freq_min_hz..strict.params().freq_max_hz,
                        ))
                    }
                })
                .collect();
            let a = strict.evaluate(&actions, &draws).unwrap();
            let b = loose.evaluate(&actions, &draws).unwrap();
            for (sa, sb) in a.per_ue.iter().zip(&b.per_ue) {
                if sa.sentence_completed {
                    assert!(sb.sentence_completed);
                }
            }
        }
    }

    #[test]
    fn all_local_outcome_ignores_channel() {
        let cfg = cfg();
        let mut env = env_with(&cfg);
        let mut rng = seeds::stream_rng(10, seeds::ENV);
        env.reset(&mut rng);
        let actions = vec![local_action(env.params().freq_min_hz); env.num_ues()];
        let good = uniform_draws(&env, 1.0, 5.0);
        let terrible = uniform_draws(&env, 1e-30, 1e-6);
        let a = env.evaluate(&actions, &good).unwrap();
        let b = env.evaluate(&actions, &terrible).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn step_after_termination_is_error() {
        let mut cfg = cfg();
        cfg.set("env.queue_len", "1").unwrap();
        let mut env = env_with(&cfg);
        let mut rng = seeds::stream_rng(11, seeds::ENV);
        env.reset(&mut rng);
        let actions = vec![local_action(env.params().freq_max_hz); env.num_ues()];
        let draws = uniform_draws(&env, 1e-9, 1.0);
        env.step(&actions, &draws).unwrap();
        assert!(env.is_terminated());
        assert_eq!(env.completion_step(), Some(1));
        assert!(env.step(&actions, &draws).is_err());
    }

    #[test]
    fn total_latency_identity_holds_on_random_steps() {
        let cfg = cfg();
        let mut env = env_with(&cfg);
        let mut rng = seeds::stream_rng(12, seeds::ENV);
        for _ in 0..20 {
            env.reset(&mut rng);
            let draws = env.draw_channels(&mut rng).unwrap();
            let actions: Vec<UeAction> = (0..env.num_ues())
                .map(|_| {
                    if rng.random_bool(0.5) {
                        offload_action(rng.random_range(0.0..env.params().power_max_w))
                    } else {
                        local_action(
                            rng.random_range(env.params().freq_min_hz..env.params().freq_max_hz),
                        )
                    }
                })
                .collect();
            let out = env.evaluate(&actions, &draws).unwrap();
            for (action, ue_out) in actions.iter().zip(&out.per_ue) {
                let rho = if action.offload { 1.0 } else { 0.0 };
                let expected = rho
                    * (ue_out.upload_latency_s
                        + ue_out.remote_latency_s
                        + ue_out.download_latency_s)
                    + (1.0 - rho) * ue_out.local_latency_s;
                assert_eq!(ue_out.total_latency_s, expected);
                assert!(ue_out.local_energy_j >= 0.0);
                assert!(ue_out.upload_energy_j >= 0.0);
                assert!(ue_out.remote_energy_j >= 0.0);
            }
        }
    }
}
