//! Multi-agent orchestration: per-UE PPO agents sharing a global reward,
//! trained on-policy episode by episode, with periodic federated averaging
//! of their network parameters.
//!
//! Each agent's replay memory is its per-episode buffer: the trajectory is
//! consumed by one PPO update and cleared, keeping the updates on-policy.

use std::sync::Arc;

use rand_chacha::ChaCha8Rng;

use crate::config::ScenarioConfig;
use crate::env::{Environment, UeAction};
use crate::error::{Error, Result};
use crate::nnet::{AdamState, PolicyParams};
use crate::ppo::{
    ActionBounds, GaeConfig, PpoAgent, PpoBatch, PpoUpdateConfig, Trajectory, Transition,
    UpdateStats,
};
use crate::report::{RunDir, TrainingStat};
use crate::seeds;
use crate::semantics::AccuracyTable;

/// When and how local models are averaged.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FedSchedule {
    /// Averaging period in episodes; 0 disables averaging.
    pub period_episodes: u32,
    pub average_critic: bool,
    pub reset_optimizer: bool,
}

impl FedSchedule {
    pub fn from_config(cfg: &ScenarioConfig) -> Self {
        FedSchedule {
            period_episodes: cfg.train.fed_period,
            average_critic: cfg.train.fed_average_critic,
            reset_optimizer: cfg.train.fed_reset_optimizer,
        }
    }
}

/// The set of per-UE agents, indexed by UE id.
#[derive(Debug, Clone)]
pub struct AgentPool {
    pub agents: Vec<PpoAgent>,
}

impl AgentPool {
    /// One agent per UE, each initialized from its own seed stream.
    pub fn new(cfg: &ScenarioConfig, bounds: ActionBounds, master_seed: u64) -> Result<Self> {
        let agents = (0..cfg.env.num_ues)
            .map(|i| {
                let mut rng = seeds::stream_rng(master_seed, seeds::AGENT_INIT + i as u64);
                PpoAgent::new(
                    crate::env::OBS_DIM,
                    &cfg.ppo.hidden_sizes,
                    bounds,
                    &mut rng,
                )
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(AgentPool { agents })
    }

    pub fn len(&self) -> usize {
        self.agents.len()
    }

    pub fn is_empty(&self) -> bool {
        self.agents.is_empty()
    }

    /// Replace every agent's parameters by the uniform element-wise mean,
    /// actors and critics separately.
    pub fn federated_average(&mut self, schedule: &FedSchedule) -> Result<()> {
        if self.agents.is_empty() {
            return Ok(());
        }
        let actor_mean = PolicyParams::mean(
            &self
                .agents
                .iter()
                .map(|a| PolicyParams::from_net(&a.actor))
                .collect::<Vec<_>>(),
        )?;
        let critic_mean = if schedule.average_critic {
            Some(PolicyParams::mean(
                &self
                    .agents
                    .iter()
                    .map(|a| PolicyParams::from_net(&a.critic))
                    .collect::<Vec<_>>(),
            )?)
        } else {
            None
        };
        for agent in &mut self.agents {
            actor_mean.apply_to(&mut agent.actor)?;
            if let Some(cm) = &critic_mean {
                cm.apply_to(&mut agent.critic)?;
            }
            if schedule.reset_optimizer {
                agent.actor_opt = AdamState::new(agent.actor.num_params());
                agent.critic_opt = AdamState::new(agent.critic.num_params());
            }
        }
        Ok(())
    }
}

/// Summary of one collected episode.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EpisodeRecord {
    /// Sum of shared step rewards plus the terminal reward.
    pub reward_sum: f64,
    pub steps: u32,
    /// Total UE-side energy spent over the episode.
    pub energy_j: f64,
    pub completion_step: Option<u32>,
    /// Count of (UE, step) constraint violations.
    pub violations: u64,
    pub terminal_reward: f64,
}

/// Roll out one episode. Every agent acts from its local observation with
/// its own sampling stream; all agents record the same shared reward, and
/// the terminal reward is folded into each trajectory's final transition.
pub fn collect_episode(
    pool: &AgentPool,
    env: &mut Environment,
    env_rng: &mut ChaCha8Rng,
    action_rngs: &mut [ChaCha8Rng],
) -> Result<(Vec<Trajectory>, EpisodeRecord)> {
    if pool.len() != env.num_ues() || action_rngs.len() != pool.len() {
        return Err(Error::invalid(format!(
            "pool ({}), env ({}) and rng streams ({}) disagree on agent count",
            pool.len(),
            env.num_ues(),
            action_rngs.len()
        )));
    }
    env.reset(env_rng);
    let mut trajectories = vec![Trajectory::default(); pool.len()];
    let mut record = EpisodeRecord {
        reward_sum: 0.0,
        steps: 0,
        energy_j: 0.0,
        completion_step: None,
        violations: 0,
        terminal_reward: 0.0,
    };
    while !env.is_terminated() {
        let draws = env.draw_channels(env_rng)?;
        let mut actions = Vec::with_capacity(pool.len());
        let mut sampled = Vec::with_capacity(pool.len());
        let mut values = Vec::with_capacity(pool.len());
        let mut observations = Vec::with_capacity(pool.len());
        for (i, agent) in pool.agents.iter().enumerate() {
            let obs = env.observe(i);
            let (action, value) = agent.sample_action(&obs, &mut action_rngs[i])?;
            actions.push(UeAction {
                offload: action.offload,
                power_w: action.power_w,
                freq_hz: action.freq_hz,
            });
            sampled.push(action);
            values.push(value);
            observations.push(obs);
        }
        let outcome = env.step(&actions, &draws)?;
        record.steps += 1;
        record.reward_sum += outcome.reward;
        record.energy_j += outcome.step_energy_j;
        record.violations += outcome
            .per_ue
            .iter()
            .filter(|ue| !ue.constraints.all())
            .count() as u64;
        for (i, traj) in trajectories.iter_mut().enumerate() {
            traj.steps.push(Transition {
                obs: std::mem::take(&mut observations[i]),
                action: sampled[i],
                reward: outcome.reward,
                value: values[i],
            });
        }
    }
    record.completion_step = env.completion_step();
    record.terminal_reward = env.terminal_reward();
    record.reward_sum += record.terminal_reward;
    for traj in &mut trajectories {
        if let Some(last) = traj.steps.last_mut() {
            last.reward += record.terminal_reward;
        }
    }
    Ok((trajectories, record))
}

/// Full training output: the trained pool plus per-episode diagnostics.
#[derive(Debug)]
pub struct TrainOutput {
    pub pool: AgentPool,
    pub stats: Vec<TrainingStat>,
    pub episodes: Vec<EpisodeRecord>,
}

/// Train the agent pool: collect, update every agent on its own episode
/// buffer, periodically average the local models. Deterministic under the
/// master seed.
pub fn train(
    cfg: &ScenarioConfig,
    table: Arc<AccuracyTable>,
    master_seed: u64,
    run_dir: Option<&RunDir>,
) -> Result<TrainOutput> {
    let mut env = Environment::new(cfg, table)?;
    let bounds = ActionBounds {
        power_min_w: env.params().power_min_w,
        power_max_w: env.params().power_max_w,
        freq_min_hz: env.params().freq_min_hz,
        freq_max_hz: env.params().freq_max_hz,
    };
    let mut pool = AgentPool::new(cfg, bounds, master_seed)?;
    let schedule = FedSchedule::from_config(cfg);
    let gae = GaeConfig {
        discount: cfg.ppo.discount,
        lambda: cfg.ppo.gae_lambda,
    };
    let update_cfg = PpoUpdateConfig {
        learning_rate: cfg.ppo.learning_rate,
        clip_epsilon: cfg.ppo.clip_epsilon,
        value_coeff: cfg.ppo.value_coeff,
        entropy_coeff: cfg.ppo.entropy_coeff,
        epochs: cfg.ppo.epochs,
        minibatch_size: cfg.ppo.minibatch_size,
    };
    let mut env_rng = seeds::stream_rng(master_seed, seeds::ENV);
    let mut action_rngs: Vec<ChaCha8Rng> = (0..pool.len())
        .map(|i| seeds::stream_rng(master_seed, seeds::AGENT_ACTION + i as u64))
        .collect();
    let mut shuffle_rngs: Vec<ChaCha8Rng> = (0..pool.len())
        .map(|i| seeds::stream_rng(master_seed, seeds::AGENT_SHUFFLE + i as u64))
        .collect();

    let mut stats = Vec::with_capacity(cfg.train.episodes as usize);
    let mut episodes = Vec::with_capacity(cfg.train.episodes as usize);
    for episode in 1..=cfg.train.episodes {
        let (trajectories, record) =
            collect_episode(&pool, &mut env, &mut env_rng, &mut action_rngs)?;
        let mut update_totals = UpdateStats::default();
        let mut updated = 0usize;
        for (i, traj) in trajectories.iter().enumerate() {
            if traj.steps.is_empty() {
                continue;
            }
            let batch = PpoBatch::from_trajectory(traj, &gae, cfg.ppo.normalize_advantages)?;
            let s = pool.agents[i].update(&batch, &update_cfg, &mut shuffle_rngs[i])?;
            update_totals.actor_objective += s.actor_objective;
            update_totals.critic_loss += s.critic_loss;
            update_totals.entropy += s.entropy;
            update_totals.clip_fraction += s.clip_fraction;
            update_totals.mean_ratio += s.mean_ratio;
            update_totals.skipped_samples += s.skipped_samples;
            updated += 1;
        }
        let inv = 1.0 / updated.max(1) as f64;
        let stat = TrainingStat {
            episode: episode as u64,
            mean_reward: record.reward_sum,
            actor_loss: -update_totals.actor_objective * inv,
            critic_loss: update_totals.critic_loss * inv,
            entropy: update_totals.entropy * inv,
            clip_fraction: update_totals.clip_fraction * inv,
        };
        let finite = stat.mean_reward.is_finite()
            && stat.actor_loss.is_finite()
            && stat.critic_loss.is_finite()
            && stat.entropy.is_finite();
        if !finite {
            if let Some(dir) = run_dir {
                for (i, agent) in pool.agents.iter().enumerate() {
                    dir.save_checkpoint(i, episode, &agent.to_checkpoint())?;
                }
            }
            return Err(Error::numeric(format!(
                "non-finite training statistics at episode {episode}; diagnostic checkpoint written"
            )));
        }
        if let Some(dir) = run_dir {
            dir.append_metrics_line(&stat)?;
            let at_period = cfg.train.checkpoint_period > 0
                && episode % cfg.train.checkpoint_period == 0;
            if at_period || episode == cfg.train.episodes {
                for (i, agent) in pool.agents.iter().enumerate() {
                    dir.save_checkpoint(i, episode, &agent.to_checkpoint())?;
                }
            }
        }
        stats.push(stat);
        episodes.push(record);
        if schedule.period_episodes > 0 && episode % schedule.period_episodes == 0 {
            pool.federated_average(&schedule)?;
        }
    }
    Ok(TrainOutput {
        pool,
        stats,
        episodes,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::config::Profile;

    fn fast_cfg() -> ScenarioConfig {
        let mut cfg = ScenarioConfig::default();
        cfg.apply_profile(Profile::Fast);
        cfg
    }

    fn pool_and_env(cfg: &ScenarioConfig, seed: u64) -> (AgentPool, Environment) {
        let env = Environment::new(cfg, Arc::new(AccuracyTable::builtin())).unwrap();
        let bounds = ActionBounds {
            power_min_w: env.params().power_min_w,
            power_max_w: env.params().power_max_w,
            freq_min_hz: env.params().freq_min_hz,
            freq_max_hz: env.params().freq_max_hz,
        };
        let pool = AgentPool::new(cfg, bounds, seed).unwrap();
        (pool, env)
    }

    fn collect(seed: u64) -> (Vec<Trajectory>, EpisodeRecord) {
        let cfg = fast_cfg();
        let (pool, mut env) = pool_and_env(&cfg, seed);
        let mut env_rng = seeds::stream_rng(seed, seeds::ENV);
        let mut action_rngs: Vec<ChaCha8Rng> = (0..pool.len())
            .map(|i| seeds::stream_rng(seed, seeds::AGENT_ACTION + i as u64))
            .collect();
        collect_episode(&pool, &mut env, &mut env_rng, &mut action_rngs).unwrap()
    }

    #[test]
    fn all_agents_share_the_reward_stream() {
        let (trajs, _) = collect(3);
        let reference: Vec<f64> = trajs[0].steps.iter().map(|s| s.reward).collect();
        for traj in &trajs[1..] {
            let rewards: Vec<f64> = traj.steps.iter().map(|s| s.reward).collect();
            assert_eq!(rewards, reference);
        }
    }

    #[test]
    fn terminal_reward_lands_in_final_transition() {
        // Trivially feasible scenario: every step completes, so the episode
        // ends at exactly `queue_len` steps with a known positive bonus.
        let mut cfg = fast_cfg();
        cfg.set("env.max_latency_s", "10").unwrap();
        cfg.set("env.min_accuracy", "0").unwrap();
        let (pool, mut env) = pool_and_env(&cfg, 4);
        let mut env_rng = seeds::stream_rng(4, seeds::ENV);
        let mut action_rngs: Vec<ChaCha8Rng> = (0..pool.len())
            .map(|i| seeds::stream_rng(4, seeds::AGENT_ACTION + i as u64))
            .collect();
        let (trajs, record) =
            collect_episode(&pool, &mut env, &mut env_rng, &mut action_rngs).unwrap();
        let t0 = cfg.env.queue_len;
        assert_eq!(record.completion_step, Some(t0));
        let expected_terminal = cfg.env.terminal_bonus
            * cfg.env.num_ues as f64
            * (cfg.env.max_steps - t0) as f64;
        assert_eq!(record.terminal_reward, expected_terminal);
        for traj in &trajs {
            let last = traj.steps.last().unwrap().reward;
            // last reward = (step bonus - step energy) + terminal
            let step_part = last - expected_terminal;
            assert!(step_part <= cfg.env.step_bonus + 1e-12);
            assert!(step_part > cfg.env.step_bonus - 1.0);
        }
    }

    #[test]
    fn collection_is_deterministic_under_seed() {
        let (a, ra) = collect(7);
        let (b, rb) = collect(7);
        assert_eq!(a, b);
        assert_eq!(ra, rb);
        let (c, _) = collect(8);
        assert_ne!(a, c);
    }

    #[test]
    fn consensus_pool_is_fixed_point_of_averaging() {
        let cfg = fast_cfg();
        let (mut pool, _) = pool_and_env(&cfg, 5);
        let reference = PolicyParams::from_net(&pool.agents[0].actor);
        for agent in &mut pool.agents {
            reference.apply_to(&mut agent.actor).unwrap();
        }
        let before: Vec<Vec<f64>> = pool.agents.iter().map(|a| a.actor.flatten()).collect();
        pool.federated_average(&FedSchedule {
            period_episodes: 1,
            average_critic: false,
            reset_optimizer: false,
        })
        .unwrap();
        let after: Vec<Vec<f64>> = pool.agents.iter().map(|a| a.actor.flatten()).collect();
        assert_eq!(before, after);
    }

    #[test]
    fn two_agent_average_is_midpoint() {
        let cfg = fast_cfg();
        let (mut pool, _) = pool_and_env(&cfg, 6);
        let n = pool.agents[0].actor.num_params();
        pool.agents[0].actor.set_from_flat(&vec![1.0; n]).unwrap();
        pool.agents[1].actor.set_from_flat(&vec![3.0; n]).unwrap();
        pool.federated_average(&FedSchedule {
            period_episodes: 1,
            average_critic: true,
            reset_optimizer: false,
        })
        .unwrap();
        for agent in &pool.agents {
            assert!(agent.actor.flatten().iter().all(|v| *v == 2.0));
        }
    }

    #[test]
    fn averaging_is_permutation_invariant() {
        let mut cfg = fast_cfg();
        cfg.set("env.num_ues", "3").unwrap();
        let (mut pool_a, _) = pool_and_env(&cfg, 9);
        let mut pool_b = pool_a.clone();
        pool_b.agents.swap(0, 2);
        pool_b.agents.swap(1, 2);
        let schedule = FedSchedule {
            period_episodes: 1,
            average_critic: true,
            reset_optimizer: false,
        };
        pool_a.federated_average(&schedule).unwrap();
        pool_b.federated_average(&schedule).unwrap();
        let a = pool_a.agents[0].actor.flatten();
        let b = pool_b.agents[0].actor.flatten();
        for (x, y) in a.iter().zip(&b) {
            assert!((x - y).abs() <= 1e-15 * x.abs().max(1.0));
        }
    }

    #[test]
    fn averaging_preserves_parameter_mean() {
        let cfg = fast_cfg();
        let (mut pool, _) = pool_and_env(&cfg, 10);
        let mean_before = PolicyParams::mean(
            &pool
                .agents
                .iter()
                .map(|a| PolicyParams::from_net(&a.actor))
                .collect::<Vec<_>>(),
        )
        .unwrap();
        pool.federated_average(&FedSchedule {
            period_episodes: 1,
            average_critic: true,
            reset_optimizer: false,
        })
        .unwrap();
        let mean_after = PolicyParams::mean(
            &pool
                .agents
                .iter()
                .map(|a| PolicyParams::from_net(&a.actor))
                .collect::<Vec<_>>(),
        )
        .unwrap();
        assert_eq!(mean_before.values, mean_after.values);
    }

    #[test]
    fn zero_episodes_trains_nothing() {
        let mut cfg = fast_cfg();
        cfg.set("train.episodes", "0").unwrap();
        let out = train(&cfg, Arc::new(AccuracyTable::builtin()), 1, None).unwrap();
        assert!(out.stats.is_empty());
        assert!(out.episodes.is_empty());
    }

    #[test]
    fn training_is_reproducible_bit_exactly() {
        let mut cfg = fast_cfg();
        cfg.set("train.episodes", "5").unwrap();
        let a = train(&cfg, Arc::new(AccuracyTable::builtin()), 11, None).unwrap();
        let b = train(&cfg, Arc::new(AccuracyTable::builtin()), 11, None).unwrap();
        assert_eq!(a.stats, b.stats);
        for (x, y) in a.pool.agents.iter().zip(&b.pool.agents) {
            assert_eq!(x.actor.flatten(), y.actor.flatten());
            assert_eq!(x.critic.flatten(), y.critic.flatten());
        }
    }
}
