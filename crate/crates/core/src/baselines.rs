//! Comparison policies: multi-agent DQN on a discretized action grid,
//! per-step exhaustive search over that grid, and the local / remote /
//! random static policies.

use std::collections::VecDeque;
use std::sync::Arc;

use rand::Rng;
use rand_chacha::ChaCha8Rng;

use crate::channel::ChannelDraw;
use crate::config::{dbm_to_watts, ScenarioConfig};
use crate::env::{Environment, UeAction};
use crate::error::{Error, Result};
use crate::nnet::{
    adam_step, AdamState, Checkpoint, CheckpointKind, DenseNet, PolicyParams,
};
use crate::ppo::ActionBounds;
use crate::report::{DqnTrainingStat, RunDir};
use crate::seeds;
use crate::semantics::AccuracyTable;

// ---------------------------------------------------------------------------
// Discrete action grid
// ---------------------------------------------------------------------------

/// Discretized per-UE action set: local execution at each clock level,
/// then offloading at each power level. Power levels are spaced linearly in
/// dBm, clock levels linearly in Hz.
#[derive(Debug, Clone, PartialEq)]
pub struct DiscreteActionGrid {
    freq_levels_hz: Vec<f64>,
    power_levels_w: Vec<f64>,
}

fn linspace(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    if n == 1 {
        return vec![lo];
    }
    (0..n)
        .map(|i| lo + (hi - lo) * i as f64 / (n - 1) as f64)
        .collect()
}

impl DiscreteActionGrid {
    pub fn from_config(cfg: &ScenarioConfig) -> Result<Self> {
        if cfg.grid.freq_levels == 0 || cfg.grid.power_levels == 0 {
            return Err(Error::config("grid needs at least one level per side"));
        }
        let freq_levels_hz = linspace(
            cfg.env.local_freq_min_hz,
            cfg.env.local_freq_max_hz,
            cfg.grid.freq_levels,
        );
        let power_levels_w = linspace(
            cfg.channel.power_min_dbm,
            cfg.channel.power_max_dbm,
            cfg.grid.power_levels,
        )
        .into_iter()
        .map(dbm_to_watts)
        .collect();
        Ok(DiscreteActionGrid {
            freq_levels_hz,
            power_levels_w,
        })
    }

    pub fn len(&self) -> usize {
        self.freq_levels_hz.len() + self.power_levels_w.len()
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    /// Action at `index`: local clock levels first, offload power levels
    /// after.
    pub fn action(&self, index: usize) -> UeAction {
        let lf = self.freq_levels_hz.len();
        if index < lf {
            UeAction {
                offload: false,
                power_w: 0.0,
                freq_hz: self.freq_levels_hz[index],
            }
        } else {
            UeAction {
                offload: true,
                power_w: self.power_levels_w[index - lf],
                freq_hz: 0.0,
            }
        }
    }

    pub fn freq_levels_hz(&self) -> &[f64] {
        &self.freq_levels_hz
    }

    pub fn power_levels_w(&self) -> &[f64] {
        &self.power_levels_w
    }
}

// ---------------------------------------------------------------------------
// DQN
// ---------------------------------------------------------------------------

#[derive(Debug, Clone, PartialEq)]
pub struct DqnTransition {
    pub obs: Vec<f64>,
    pub action: usize,
    pub reward: f64,
    pub next_obs: Vec<f64>,
    pub done: bool,
}

/// Bounded FIFO replay memory.
#[derive(Debug, Clone)]
pub struct ReplayBuffer {
    capacity: usize,
    items: VecDeque<DqnTransition>,
}

impl ReplayBuffer {
    pub fn new(capacity: usize) -> Self {
        ReplayBuffer {
            capacity: capacity.max(1),
            items: VecDeque::new(),
        }
    }

    pub fn push(&mut self, item: DqnTransition) {
        if self.items.len() == self.capacity {
            self.items.pop_front();
        }
        self.items.push_back(item);
    }

    pub fn len(&self) -> usize {
        self.items.len()
    }

    pub fn is_empty(&self) -> bool {
        self.items.is_empty()
    }

    pub fn get(&self, index: usize) -> &DqnTransition {
        &self.items[index]
    }
}

/// Greedy index with the documented tie-break: the lowest index wins.
pub fn greedy_action(q_values: &[f64]) -> usize {
    let mut best = 0;
    for (i, v) in q_values.iter().enumerate().skip(1) {
        if *v > q_values[best] {
            best = i;
        }
    }
    best
}

/// One DQN learner: online net, periodically synced target net, replay
/// memory and optimizer state.
#[derive(Debug, Clone)]
pub struct DqnAgent {
    pub q: DenseNet,
    target: DenseNet,
    pub opt: AdamState,
    pub buffer: ReplayBuffer,
    pub env_steps: u64,
}

impl DqnAgent {
    pub fn new<R: Rng + ?Sized>(
        obs_dim: usize,
        hidden: &[usize],
        num_actions: usize,
        buffer_capacity: usize,
        rng: &mut R,
    ) -> Result<Self> {
        let mut sizes = vec![obs_dim];
        sizes.extend_from_slice(hidden);
        sizes.push(num_actions);
        let q = DenseNet::init(&sizes, rng)?;
        let target = q.clone();
        let opt = AdamState::new(q.num_params());
        Ok(DqnAgent {
            q,
            target,
            opt,
            buffer: ReplayBuffer::new(buffer_capacity),
            env_steps: 0,
        })
    }

    pub fn q_values(&self, obs: &[f64]) -> Result<Vec<f64>> {
        self.q.forward(obs)
    }

    pub fn greedy(&self, obs: &[f64]) -> Result<usize> {
        Ok(greedy_action(&self.q_values(obs)?))
    }

    /// Epsilon-greedy selection: explore uniformly with probability
    /// `epsilon`, otherwise act greedily.
    pub fn select<R: Rng + ?Sized>(
        &self,
        obs: &[f64],
        epsilon: f64,
        rng: &mut R,
    ) -> Result<usize> {
        if rng.random::<f64>() < epsilon {
            Ok(rng.random_range(0..self.q.output_dim()))
        } else {
            self.greedy(obs)
        }
    }

    pub fn sync_target(&mut self) {
        self.target = self.q.clone();
    }

    /// One TD(0) minibatch step on uniformly sampled replay transitions.
    /// Returns the minibatch loss.
    pub fn td_update<R: Rng + ?Sized>(
        &mut self,
        batch_size: usize,
        discount: f64,
        lr: f64,
        rng: &mut R,
    ) -> Result<f64> {
        let n = self.buffer.len();
        if n == 0 {
            return Err(Error::invalid("replay buffer is empty"));
        }
        let batch = batch_size.min(n).max(1);
        let mut grad = vec![0.0; self.q.num_params()];
        let mut loss = 0.0;
        let inv = 1.0 / batch as f64;
        for _ in 0..batch {
            let t = self.buffer.get(rng.random_range(0..n));
            let target_value = if t.done {
                t.reward
            } else {
                let next_q = self.target.forward(&t.next_obs)?;
                t.reward + discount * next_q[greedy_action(&next_q)]
            };
            let (q_out, cache) = self.q.forward_cached(&t.obs)?;
            let err = q_out[t.action] - target_value;
            loss += err * err * inv;
            let mut out_grad = vec![0.0; q_out.len()];
            out_grad[t.action] = 2.0 * err * inv;
            let g = self.q.backward(&cache, &out_grad)?;
            for (acc, gi) in grad.iter_mut().zip(g) {
                *acc += gi;
            }
        }
        let mut params = self.q.flatten();
        adam_step(&mut params, &grad, &mut self.opt, lr)?;
        self.q.set_from_flat(&params)?;
        Ok(loss)
    }

    pub fn to_checkpoint(&self) -> Checkpoint {
        Checkpoint {
            kind: CheckpointKind::DqnQ,
            nets: vec![PolicyParams::from_net(&self.q)],
            optimizers: vec![self.opt.clone()],
        }
    }

    pub fn from_checkpoint(ckpt: &Checkpoint, buffer_capacity: usize) -> Result<Self> {
        if ckpt.kind != CheckpointKind::DqnQ || ckpt.nets.is_empty() {
            return Err(Error::invalid("checkpoint does not hold a Q network"));
        }
        let mut q = DenseNet::zeros(&ckpt.nets[0].sizes)?;
        ckpt.nets[0].apply_to(&mut q)?;
        let target = q.clone();
        let opt = ckpt
            .optimizers
            .first()
            .cloned()
            .unwrap_or_else(|| AdamState::new(q.num_params()));
        Ok(DqnAgent {
            q,
            target,
            opt,
            buffer: ReplayBuffer::new(buffer_capacity),
            env_steps: 0,
        })
    }
}

/// The multi-agent DQN baseline: one learner per UE on the shared grid.
#[derive(Debug, Clone)]
pub struct DqnPool {
    pub agents: Vec<DqnAgent>,
    pub grid: DiscreteActionGrid,
}

/// Linear exploration schedule.
pub fn epsilon_at(step: u64, start: f64, end: f64, decay_steps: u64) -> f64 {
    if decay_steps == 0 || step >= decay_steps {
        return end;
    }
    start + (end - start) * step as f64 / decay_steps as f64
}

/// Training output of the DQN baseline.
#[derive(Debug)]
pub struct DqnTrainOutput {
    pub pool: DqnPool,
    pub stats: Vec<DqnTrainingStat>,
    pub episodes: Vec<crate::marl::EpisodeRecord>,
}

/// Train the multi-agent DQN baseline under the same environment loop and
/// shared reward as the PPO trainer.
pub fn dqn_train(
    cfg: &ScenarioConfig,
    table: Arc<AccuracyTable>,
    master_seed: u64,
    run_dir: Option<&RunDir>,
) -> Result<DqnTrainOutput> {
    let mut env = Environment::new(cfg, table)?;
    let grid = DiscreteActionGrid::from_config(cfg)?;
    let mut agents = (0..cfg.env.num_ues)
        .map(|i| {
            let mut rng = seeds::stream_rng(master_seed, seeds::AGENT_INIT + i as u64);
            DqnAgent::new(
                crate::env::OBS_DIM,
                &cfg.dqn.hidden_sizes,
                grid.len(),
                cfg.dqn.buffer_capacity,
                &mut rng,
            )
        })
        .collect::<Result<Vec<_>>>()?;
    let mut env_rng = seeds::stream_rng(master_seed, seeds::ENV);
    let mut action_rngs: Vec<ChaCha8Rng> = (0..agents.len())
        .map(|i| seeds::stream_rng(master_seed, seeds::AGENT_ACTION + i as u64))
        .collect();
    let mut sample_rngs: Vec<ChaCha8Rng> = (0..agents.len())
        .map(|i| seeds::stream_rng(master_seed, seeds::AGENT_SHUFFLE + i as u64))
        .collect();

    let mut stats = Vec::new();
    let mut episodes = Vec::new();
    for episode in 1..=cfg.train.episodes {
        env.reset(&mut env_rng);
        let mut reward_sum = 0.0;
        let mut energy = 0.0;
        let mut violations = 0u64;
        let mut steps = 0u32;
        let mut loss_sum = 0.0;
        let mut loss_count = 0u32;
        while !env.is_terminated() {
            let draws = env.draw_channels(&mut env_rng)?;
            let observations: Vec<Vec<f64>> =
                (0..agents.len()).map(|i| env.observe(i)).collect();
            let mut indices = Vec::with_capacity(agents.len());
            let mut actions = Vec::with_capacity(agents.len());
            for (i, agent) in agents.iter().enumerate() {
                let eps = epsilon_at(
                    agent.env_steps,
                    cfg.dqn.epsilon_start,
                    cfg.dqn.epsilon_end,
                    cfg.dqn.epsilon_decay_steps,
                );
                let idx = agent.select(&observations[i], eps, &mut action_rngs[i])?;
                indices.push(idx);
                actions.push(grid.action(idx));
            }
            let outcome = env.step(&actions, &draws)?;
            steps += 1;
            reward_sum += outcome.reward;
            energy += outcome.step_energy_j;
            violations += outcome
                .per_ue
                .iter()
                .filter(|u| !u.constraints.all())
                .count() as u64;
            let done = env.is_terminated();
            let terminal = if done { env.terminal_reward() } else { 0.0 };
            for (i, agent) in agents.iter_mut().enumerate() {
                agent.buffer.push(DqnTransition {
                    obs: observations[i].clone(),
                    action: indices[i],
                    reward: outcome.reward + terminal,
                    next_obs: env.observe(i),
                    done,
                });
                agent.env_steps += 1;
                if agent.buffer.len() >= cfg.dqn.batch_size {
                    loss_sum += agent.td_update(
                        cfg.dqn.batch_size,
                        cfg.dqn.discount,
                        cfg.dqn.learning_rate,
                        &mut sample_rngs[i],
                    )?;
                    loss_count += 1;
                }
                if cfg.dqn.target_sync_steps > 0
                    && agent.env_steps % cfg.dqn.target_sync_steps == 0
                {
                    agent.sync_target();
                }
            }
        }
        reward_sum += env.terminal_reward();
        let record = crate::marl::EpisodeRecord {
            reward_sum,
            steps,
            energy_j: energy,
            completion_step: env.completion_step(),
            violations,
            terminal_reward: env.terminal_reward(),
        };
        let stat = DqnTrainingStat {
            episode: episode as u64,
            mean_reward: reward_sum,
            td_loss: if loss_count > 0 {
                loss_sum / loss_count as f64
            } else {
                0.0
            },
            epsilon: epsilon_at(
                agents[0].env_steps,
                cfg.dqn.epsilon_start,
                cfg.dqn.epsilon_end,
                cfg.dqn.epsilon_decay_steps,
            ),
        };
        if !stat.mean_reward.is_finite() || !stat.td_loss.is_finite() {
            if let Some(dir) = run_dir {
                for (i, agent) in agents.iter().enumerate() {
                    dir.save_checkpoint(i, episode, &agent.to_checkpoint())?;
                }
            }
            return Err(Error::numeric(format!(
                "non-finite DQN statistics at episode {episode}; diagnostic checkpoint written"
            )));
        }
        if let Some(dir) = run_dir {
            dir.append_metrics_line(&stat)?;
            let at_period = cfg.train.checkpoint_period > 0
                && episode % cfg.train.checkpoint_period == 0;
            if at_period || episode == cfg.train.episodes {
                for (i, agent) in agents.iter().enumerate() {
                    dir.save_checkpoint(i, episode, &agent.to_checkpoint())?;
                }
            }
        }
        stats.push(stat);
        episodes.push(record);
    }
    Ok(DqnTrainOutput {
        pool: DqnPool { agents, grid },
        stats,
        episodes,
    })
}

// ---------------------------------------------------------------------------
// Exhaustive search
// ---------------------------------------------------------------------------

/// Result of one per-step joint-grid search.
#[derive(Debug, Clone, PartialEq)]
pub struct ExhaustiveChoice {
    pub actions: Vec<UeAction>,
    /// Whether a fully feasible joint action exists; when false the
    /// returned action is the least-violating one.
    pub feasible: bool,
    pub energy_j: f64,
}

/// Enumerate every joint grid action for the UEs that still hold work and
/// return the feasible one with minimal instantaneous UE-side energy.
/// Ties break lexicographically on the index tuple (lowest first). If no
/// joint action is feasible, the least-violating one (fewest violated
/// constraints, then lowest energy) is returned with `feasible = false`.
pub fn exhaustive_search(
    env: &Environment,
    grid: &DiscreteActionGrid,
    draws: &[ChannelDraw],
    max_combinations: u64,
) -> Result<ExhaustiveChoice> {
    let n = env.num_ues();
    let active: Vec<usize> = (0..n).filter(|&i| env.ue(i).task.queue_len > 0).collect();
    let arity = grid.len() as u64;
    let combos = arity
        .checked_pow(active.len() as u32)
        .ok_or_else(|| Error::config("joint action space overflows"))?;
    if combos > max_combinations {
        return Err(Error::config(format!(
            "exhaustive search over {combos} joint actions exceeds the guard of {max_combinations}"
        )));
    }
    // Placeholder for drained UEs; the environment ignores it.
    let idle = UeAction {
        offload: false,
        power_w: 0.0,
        freq_hz: env.params().freq_min_hz,
    };
    let mut actions = vec![idle; n];
    if active.is_empty() {
        let outcome = env.evaluate(&actions, draws)?;
        return Ok(ExhaustiveChoice {
            actions,
            feasible: true,
            energy_j: outcome.step_energy_j,
        });
    }

    let mut best_feasible: Option<(f64, Vec<UeAction>)> = None;
    let mut best_infeasible: Option<(u32, f64, Vec<UeAction>)> = None;
    let mut indices = vec![0usize; active.len()];
    loop {
        for (slot, &ue) in active.iter().enumerate() {
            actions[ue] = grid.action(indices[slot]);
        }
        let outcome = env.evaluate(&actions, draws)?;
        let feasible = active
            .iter()
            .all(|&ue| outcome.per_ue[ue].sentence_completed);
        let energy = outcome.step_energy_j;
        if feasible {
            if best_feasible.as_ref().map(|(e, _)| energy < *e).unwrap_or(true) {
                best_feasible = Some((energy, actions.clone()));
            }
        } else if best_feasible.is_none() {
            let violations: u32 = active
                .iter()
                .map(|&ue| outcome.per_ue[ue].constraints.violations())
                .sum();
            let better = match &best_infeasible {
                None => true,
                Some((v, e, _)) => violations < *v || (violations == *v && energy < *e),
            };
            if better {
                best_infeasible = Some((violations, energy, actions.clone()));
            }
        }
        // lexicographic odometer: last slot advances fastest
        let mut pos = active.len();
        loop {
            if pos == 0 {
                break;
            }
            pos -= 1;
            indices[pos] += 1;
            if indices[pos] < grid.len() {
                break;
            }
            indices[pos] = 0;
            if pos == 0 {
                pos = usize::MAX;
                break;
            }
        }
        if pos == usize::MAX {
            break;
        }
    }
    if let Some((energy, actions)) = best_feasible {
        Ok(ExhaustiveChoice {
            actions,
            feasible: true,
            energy_j: energy,
        })
    } else {
        let (_, energy, actions) = best_infeasible.expect("at least one combination evaluated");
        Ok(ExhaustiveChoice {
            actions,
            feasible: false,
            energy_j: energy,
        })
    }
}

// ---------------------------------------------------------------------------
// Static policies
// ---------------------------------------------------------------------------

/// The non-learning reference policies.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum StaticMode {
    /// Execute everything locally at maximum clock.
    Local,
    /// Offload everything at maximum power.
    Remote,
    /// Fair-coin offloading, uniform power and clock.
    Random,
}

impl std::str::FromStr for StaticMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "local" => Ok(StaticMode::Local),
            "remote" => Ok(StaticMode::Remote),
            "random" => Ok(StaticMode::Random),
            other => Err(Error::config(format!("unknown static policy `{other}`"))),
        }
    }
}

pub fn static_policy_action<R: Rng + ?Sized>(
    mode: StaticMode,
    bounds: &ActionBounds,
    rng: &mut R,
) -> UeAction {
    match mode {
        StaticMode::Local => UeAction {
            offload: false,
            power_w: 0.0,
            freq_hz: bounds.freq_max_hz,
        },
        StaticMode::Remote => UeAction {
            offload: true,
            power_w: bounds.power_max_w,
            freq_hz: 0.0,
        },
        StaticMode::Random => {
            let offload = rng.random_bool(0.5);
            UeAction {
                offload,
                power_w: rng.random_range(bounds.power_min_w..bounds.power_max_w),
                freq_hz: rng.random_range(bounds.freq_min_hz..bounds.freq_max_hz),
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::config::Profile;

    fn cfg() -> ScenarioConfig {
        ScenarioConfig::default()
    }

    fn bounds(env: &Environment) -> ActionBounds {
        ActionBounds {
            power_min_w: env.params().power_min_w,
            power_max_w: env.params().power_max_w,
            freq_min_hz: env.params().freq_min_hz,
            freq_max_hz: env.params().freq_max_hz,
        }
    }

    #[test]
    fn grid_has_both_sides_within_limits() {
        let cfg = cfg();
        let grid = DiscreteActionGrid::from_config(&cfg).unwrap();
        assert_eq!(grid.len(), cfg.grid.freq_levels + cfg.grid.power_levels);
        // dBm levels 15, 18, 21, 24
        let expected_w: Vec<f64> = [15.0, 18.0, 21.0, 24.0]
            .iter()
            .map(|d| dbm_to_watts(*d))
            .collect();
        for (a, b) in grid.power_levels_w().iter().zip(&expected_w) {
            assert!((a - b).abs() / b < 1e-12);
        }
        for idx in 0..grid.len() {
            let action = grid.action(idx);
            if action.offload {
                assert!(action.power_w <= cfg.channel.power_max_w() * (1.0 + 1e-12));
            } else {
                assert!(action.freq_hz >= cfg.env.local_freq_min_hz);
                assert!(action.freq_hz <= cfg.env.local_freq_max_hz);
            }
        }
    }

    #[test]
    fn greedy_prefers_lowest_index_on_ties() {
        assert_eq!(greedy_action(&[0.0, 0.0, 0.0]), 0);
        assert_eq!(greedy_action(&[1.0, 2.0, 2.0]), 1);
        assert_eq!(greedy_action(&[-1.0, 0.5, 3.0, 3.0]), 2);
    }

    #[test]
    fn epsilon_zero_is_pure_argmax() {
        let mut rng = seeds::stream_rng(1, seeds::AGENT_ACTION);
        let mut agent = DqnAgent::new(2, &[4], 5, 100, &mut rng).unwrap();
        // Rig the output biases to favor index 3.
        let mut flat = agent.q.flatten();
        let n = flat.len();
        flat[n - 5..].copy_from_slice(&[0.0, 0.0, 0.0, 10.0, 0.0]);
        agent.q.set_from_flat(&flat).unwrap();
        for _ in 0..50 {
            assert_eq!(agent.select(&[0.1, -0.2], 0.0, &mut rng).unwrap(), 3);
        }
    }

    #[test]
    fn epsilon_one_explores_uniformly() {
        let mut rng = seeds::stream_rng(2, seeds::AGENT_ACTION);
        let agent = DqnAgent::new(2, &[4], 8, 100, &mut rng).unwrap();
        let n = 10_000;
        let mut counts = [0usize; 8];
        for _ in 0..n {
            counts[agent.select(&[0.0, 0.0], 1.0, &mut rng).unwrap()] += 1;
        }
        let expected = n as f64 / 8.0;
        let chi2: f64 = counts
            .iter()
            .map(|c| {
                let d = *c as f64 - expected;
                d * d / expected
            })
            .sum();
        // chi-square critical value, 7 dof, p = 0.001
        assert!(chi2 < 24.32, "chi2 = {chi2}, counts {counts:?}");
    }

    #[test]
    fn epsilon_schedule_is_linear_then_flat() {
        assert_eq!(epsilon_at(0, 1.0, 0.05, 100), 1.0);
        assert!((epsilon_at(50, 1.0, 0.05, 100) - 0.525).abs() < 1e-12);
        assert_eq!(epsilon_at(100, 1.0, 0.05, 100), 0.05);
        assert_eq!(epsilon_at(10_000, 1.0, 0.05, 100), 0.05);
    }

    #[test]
    fn exhaustive_picks_minimum_energy_feasible_action() {
        let mut cfg = cfg();
        cfg.set("env.num_ues", "1").unwrap();
        let mut env = Environment::new(&cfg, Arc::new(AccuracyTable::builtin())).unwrap();
        let mut rng = seeds::stream_rng(3, seeds::EVAL_ENV);
        env.reset(&mut rng);
        // Excellent channel: every power level clears the accuracy bar.
        let draws = vec![ChannelDraw {
            large_scale_gain: 1e-6,
            rayleigh_coeff_sq: 1.0,
            bandwidth_hz: env.params().channel.bandwidth_hz,
            noise_psd_w_per_hz: env.params().channel.noise_psd_w_per_hz,
        }];
        let grid = DiscreteActionGrid::from_config(&cfg).unwrap();
        let choice = exhaustive_search(&env, &grid, &draws, 1_000_000).unwrap();
        assert!(choice.feasible);
        // independent re-enumeration
        let mut best = f64::INFINITY;
        let mut best_action = None;
        for idx in 0..grid.len() {
            let actions = vec![grid.action(idx)];
            let out = env.evaluate(&actions, &draws).unwrap();
            if out.per_ue[0].sentence_completed && out.step_energy_j < best {
                best = out.step_energy_j;
                best_action = Some(actions[0]);
            }
        }
        assert_eq!(choice.energy_j, best);
        assert_eq!(choice.actions[0], best_action.unwrap());
        // with a great channel the cheapest feasible option is offloading at
        // the lowest power level
        assert!(choice.actions[0].offload);
        assert!((choice.actions[0].power_w - grid.power_levels_w()[0]).abs() < 1e-15);
    }

    #[test]
    fn exhaustive_flags_infeasible_snapshots() {
        let mut cfg = cfg();
        cfg.set("env.num_ues", "1").unwrap();
        cfg.set("env.max_latency_s", "1e-9").unwrap();
        let mut env = Environment::new(&cfg, Arc::new(AccuracyTable::builtin())).unwrap();
        let mut rng = seeds::stream_rng(4, seeds::EVAL_ENV);
        env.reset(&mut rng);
        let draws = env.draw_channels(&mut rng).unwrap();
        let grid = DiscreteActionGrid::from_config(&cfg).unwrap();
        let choice = exhaustive_search(&env, &grid, &draws, 1_000_000).unwrap();
        assert!(!choice.feasible);
    }

    #[test]
    fn exhaustive_is_symmetric_for_identical_ues() {
        let mut cfg = cfg();
        cfg.set("env.num_ues", "2").unwrap();
        let mut env = Environment::new(&cfg, Arc::new(AccuracyTable::builtin())).unwrap();
        let mut rng = seeds::stream_rng(5, seeds::EVAL_ENV);
        env.reset(&mut rng);
        // identical positions and draws
        let pos = env.ue(0).position_m;
        env.ues[1].position_m = pos;
        env.ues[1].distance_to_es_m = env.ue(0).distance_to_es_m;
        let draw = ChannelDraw {
            large_scale_gain: 1e-7,
            rayleigh_coeff_sq: 1.0,
            bandwidth_hz: env.params().channel.bandwidth_hz,
            noise_psd_w_per_hz: env.params().channel.noise_psd_w_per_hz,
        };
        let grid = DiscreteActionGrid::from_config(&cfg).unwrap();
        let choice = exhaustive_search(&env, &grid, &[draw, draw], 1_000_000).unwrap();
        assert_eq!(choice.actions[0], choice.actions[1]);
    }

    #[test]
    fn exhaustive_guard_rejects_oversized_spaces() {
        let cfg = cfg();
        let mut env = Environment::new(&cfg, Arc::new(AccuracyTable::builtin())).unwrap();
        let mut rng = seeds::stream_rng(6, seeds::EVAL_ENV);
        env.reset(&mut rng);
        let draws = env.draw_channels(&mut rng).unwrap();
        let grid = DiscreteActionGrid::from_config(&cfg).unwrap();
        assert!(matches!(
            exhaustive_search(&env, &grid, &draws, 10),
            Err(Error::Config(_))
        ));
    }

    #[test]
    fn static_local_never_transmits_and_remote_never_computes() {
        let cfg = {
            let mut c = cfg();
            c.apply_profile(Profile::Fast);
            c
        };
        let mut env = Environment::new(&cfg, Arc::new(AccuracyTable::builtin())).unwrap();
        let mut rng = seeds::stream_rng(7, seeds::EVAL_ENV);
        type OutcomeCheck = fn(&crate::env::UeStepOutcome) -> bool;
        let cases: [(StaticMode, OutcomeCheck); 2] = [
            (StaticMode::Local, |u| u.upload_energy_j == 0.0),
            (StaticMode::Remote, |u| u.local_energy_j == 0.0),
        ];
        for (mode, check) in cases {
            env.reset(&mut rng);
            let b = bounds(&env);
            while !env.is_terminated() {
                let draws = env.draw_channels(&mut rng).unwrap();
                let actions: Vec<UeAction> = (0..env.num_ues())
                    .map(|_| static_policy_action(mode, &b, &mut rng))
                    .collect();
                let out = env.step(&actions, &draws).unwrap();
                assert!(out.per_ue.iter().all(check));
            }
        }
    }

    #[test]
    fn static_random_is_reproducible() {
        let cfg = cfg();
        let env = Environment::new(&cfg, Arc::new(AccuracyTable::builtin())).unwrap();
        let b = bounds(&env);
        let mut r1 = seeds::stream_rng(8, seeds::EVAL_POLICY);
        let mut r2 = seeds::stream_rng(8, seeds::EVAL_POLICY);
        for _ in 0..100 {
            assert_eq!(
                static_policy_action(StaticMode::Random, &b, &mut r1),
                static_policy_action(StaticMode::Random, &b, &mut r2)
            );
        }
    }
}
