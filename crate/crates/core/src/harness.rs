//! Seeded single-episode evaluation of any policy.
//!
//! One seed fixes the UE placement, the fading sequence and any policy
//! randomness, so different policies evaluated on the same seed see
//! identical channel realizations step for step.

use rand_chacha::ChaCha8Rng;

use crate::baselines::{
    exhaustive_search, static_policy_action, DiscreteActionGrid, DqnPool, StaticMode,
};
use crate::env::{Environment, UeAction};
use crate::error::{Error, Result};
use crate::marl::AgentPool;
use crate::ppo::ActionBounds;
use crate::seeds;

/// A policy under evaluation. Learned policies act deterministically (mode
/// of the PPO head, greedy argmax for DQN).
pub enum EvalPolicy<'a> {
    Mappo(&'a AgentPool),
    Dqn(&'a DqnPool),
    Exhaustive {
        grid: &'a DiscreteActionGrid,
        max_combinations: u64,
    },
    Static(StaticMode),
}

impl EvalPolicy<'_> {
    pub fn name(&self) -> &'static str {
        match self {
            EvalPolicy::Mappo(_) => "mappo",
            EvalPolicy::Dqn(_) => "dqn",
            EvalPolicy::Exhaustive { .. } => "exhaustive",
            EvalPolicy::Static(StaticMode::Local) => "local",
            EvalPolicy::Static(StaticMode::Remote) => "remote",
            EvalPolicy::Static(StaticMode::Random) => "random",
        }
    }
}

/// Result of one evaluated episode.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EvalOutcome {
    pub energy_j: f64,
    pub completion_step: Option<u32>,
    pub violations: u64,
    pub reward_sum: f64,
    pub steps: u32,
}

fn joint_action(
    policy: &EvalPolicy,
    env: &Environment,
    draws: &[crate::channel::ChannelDraw],
    bounds: &ActionBounds,
    policy_rng: &mut ChaCha8Rng,
) -> Result<Vec<UeAction>> {
    match policy {
        EvalPolicy::Mappo(pool) => {
            if pool.len() != env.num_ues() {
                return Err(Error::invalid(format!(
                    "agent pool has {} agents for {} UEs",
                    pool.len(),
                    env.num_ues()
                )));
            }
            (0..env.num_ues())
                .map(|i| {
                    let (offload, power_w, freq_hz) =
                        pool.agents[i].deterministic_action(&env.observe(i))?;
                    Ok(UeAction {
                        offload,
                        power_w,
                        freq_hz,
                    })
                })
                .collect()
        }
        EvalPolicy::Dqn(pool) => {
            if pool.agents.len() != env.num_ues() {
                return Err(Error::invalid(format!(
                    "DQN pool has {} agents for {} UEs",
                    pool.agents.len(),
                    env.num_ues()
                )));
            }
            (0..env.num_ues())
                .map(|i| {
                    let idx = pool.agents[i].greedy(&env.observe(i))?;
                    Ok(pool.grid.action(idx))
                })
                .collect()
        }
        EvalPolicy::Exhaustive {
            grid,
            max_combinations,
        } => Ok(exhaustive_search(env, grid, draws, *max_combinations)?.actions),
        EvalPolicy::Static(mode) => Ok((0..env.num_ues())
            .map(|_| static_policy_action(*mode, bounds, policy_rng))
            .collect()),
    }
}

/// Run one seeded episode under the given policy.
pub fn run_episode(policy: &EvalPolicy, env: &mut Environment, seed: u64) -> Result<EvalOutcome> {
    let mut env_rng = seeds::stream_rng(seed, seeds::EVAL_ENV);
    let mut policy_rng = seeds::stream_rng(seed, seeds::EVAL_POLICY);
    let bounds = ActionBounds {
        power_min_w: env.params().power_min_w,
        power_max_w: env.params().power_max_w,
        freq_min_hz: env.params().freq_min_hz,
        freq_max_hz: env.params().freq_max_hz,
    };
    env.reset(&mut env_rng);
    let mut outcome = EvalOutcome {
        energy_j: 0.0,
        completion_step: None,
        violations: 0,
        reward_sum: 0.0,
        steps: 0,
    };
    while !env.is_terminated() {
        let draws = env.draw_channels(&mut env_rng)?;
        let actions = joint_action(policy, env, &draws, &bounds, &mut policy_rng)?;
        let step = env.step(&actions, &draws)?;
        outcome.steps += 1;
        outcome.energy_j += step.step_energy_j;
        outcome.reward_sum += step.reward;
        outcome.violations += step
            .per_ue
            .iter()
            .filter(|u| !u.constraints.all())
            .count() as u64;
    }
    outcome.completion_step = env.completion_step();
    outcome.reward_sum += env.terminal_reward();
    Ok(outcome)
}
