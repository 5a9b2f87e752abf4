//! Single-agent PPO core.
//!
//! The policy head factorizes the hybrid action: a Bernoulli offload
//! decision plus two tanh-squashed Gaussians for transmit power and GPU
//! clock. The joint log-density is the sum of the component log-densities
//! with the squash Jacobian correction; when the environment overrides the
//! clock of an offloading UE the density still uses the sampled value (the
//! override is an environment mapping, not a policy event).

use rand::Rng;
use rand_distr::StandardNormal;

use crate::error::{Error, Result};
use crate::nnet::{adam_step, AdamState, Checkpoint, CheckpointKind, DenseNet, PolicyParams};

pub const LOG_STD_MIN: f64 = -5.0;
pub const LOG_STD_MAX: f64 = 2.0;

/// Number of raw actor outputs consumed by the policy head.
pub const POLICY_HEAD_DIM: usize = 5;

const LN_2PI: f64 = 1.8378770664093453; // ln(2*pi)

fn softplus(x: f64) -> f64 {
    x.max(0.0) + (-x.abs()).exp().ln_1p()
}

fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

/// Action-space bounds the squashed heads map into.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ActionBounds {
    pub power_min_w: f64,
    pub power_max_w: f64,
    pub freq_min_hz: f64,
    pub freq_max_hz: f64,
}

/// Affine-tanh squash of an unbounded sample into `(lo, hi)`.
pub fn squash(u: f64, lo: f64, hi: f64) -> f64 {
    let mid = 0.5 * (lo + hi);
    let half = 0.5 * (hi - lo);
    mid + half * u.tanh()
}

/// `ln |d squash / d u|`, numerically stable for large `|u|`.
fn log_squash_jacobian(u: f64, lo: f64, hi: f64) -> f64 {
    let half = 0.5 * (hi - lo);
    // ln(1 - tanh^2 u) = 2 (ln 2 - u - softplus(-2u))
    half.ln() + 2.0 * (std::f64::consts::LN_2 - u - softplus(-2.0 * u))
}

/// Raw policy-head outputs of the actor network.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HybridPolicyOutput {
    pub offload_logit: f64,
    pub power_mean: f64,
    pub power_log_std_raw: f64,
    pub freq_mean: f64,
    pub freq_log_std_raw: f64,
}

impl HybridPolicyOutput {
    pub fn from_raw(raw: &[f64]) -> Result<Self> {
        if raw.len() != POLICY_HEAD_DIM {
            return Err(Error::invalid(format!(
                "policy head expects {POLICY_HEAD_DIM} outputs, got {}",
                raw.len()
            )));
        }
        Ok(HybridPolicyOutput {
            offload_logit: raw[0],
            power_mean: raw[1],
            power_log_std_raw: raw[2],
            freq_mean: raw[3],
            freq_log_std_raw: raw[4],
        })
    }

    pub fn power_log_std(&self) -> f64 {
        self.power_log_std_raw.clamp(LOG_STD_MIN, LOG_STD_MAX)
    }

    pub fn freq_log_std(&self) -> f64 {
        self.freq_log_std_raw.clamp(LOG_STD_MIN, LOG_STD_MAX)
    }

    /// Analytic entropy of the head: Bernoulli entropy plus the two
    /// pre-squash Gaussian entropies.
    pub fn entropy(&self) -> f64 {
        let q = sigmoid(self.offload_logit);
        let h_bern = q * softplus(-self.offload_logit) + (1.0 - q) * softplus(self.offload_logit);
        let h_gauss = |s: f64| s + 0.5 * (LN_2PI + 1.0);
        h_bern + h_gauss(self.power_log_std()) + h_gauss(self.freq_log_std())
    }

    /// Gradient of [`Self::entropy`] with respect to the raw outputs.
    /// Clamped log-std components pass no gradient.
    pub fn entropy_grad(&self) -> [f64; POLICY_HEAD_DIM] {
        let q = sigmoid(self.offload_logit);
        let gate = |raw: f64| {
            if raw > LOG_STD_MIN && raw < LOG_STD_MAX {
                1.0
            } else {
                0.0
            }
        };
        [
            -self.offload_logit * q * (1.0 - q),
            0.0,
            gate(self.power_log_std_raw),
            0.0,
            gate(self.freq_log_std_raw),
        ]
    }
}

/// A sampled hybrid action with everything needed to re-evaluate its
/// density later: the pre-squash Gaussian samples and the joint log-prob.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SampledAction {
    pub offload: bool,
    pub power_u: f64,
    pub freq_u: f64,
    pub power_w: f64,
    pub freq_hz: f64,
    pub log_prob: f64,
}

/// Joint log-density of a stored action under the given head outputs.
pub fn log_prob(
    out: &HybridPolicyOutput,
    bounds: &ActionBounds,
    offload: bool,
    power_u: f64,
    freq_u: f64,
) -> f64 {
    let lp_bern = if offload {
        -softplus(-out.offload_logit)
    } else {
        -softplus(out.offload_logit)
    };
    let gauss = |u: f64, mean: f64, log_std: f64| {
        let z = (u - mean) / log_std.exp();
        -0.5 * z * z - log_std - 0.5 * LN_2PI
    };
    lp_bern + gauss(power_u, out.power_mean, out.power_log_std())
        - log_squash_jacobian(power_u, bounds.power_min_w, bounds.power_max_w)
        + gauss(freq_u, out.freq_mean, out.freq_log_std())
        - log_squash_jacobian(freq_u, bounds.freq_min_hz, bounds.freq_max_hz)
}

/// Gradient of [`log_prob`] with respect to the raw head outputs. The
/// squash Jacobian terms are parameter-free and contribute nothing.
pub fn log_prob_grad(
    out: &HybridPolicyOutput,
    offload: bool,
    power_u: f64,
    freq_u: f64,
) -> [f64; POLICY_HEAD_DIM] {
    let rho = if offload { 1.0 } else { 0.0 };
    let d_logit = rho - sigmoid(out.offload_logit);
    let gauss = |u: f64, mean: f64, log_std_raw: f64| -> (f64, f64) {
        let log_std = log_std_raw.clamp(LOG_STD_MIN, LOG_STD_MAX);
        let inv_var = (-2.0 * log_std).exp();
        let d_mean = (u - mean) * inv_var;
        let z2 = (u - mean) * (u - mean) * inv_var;
        let gate = if log_std_raw > LOG_STD_MIN && log_std_raw < LOG_STD_MAX {
            1.0
        } else {
            0.0
        };
        (d_mean, (z2 - 1.0) * gate)
    };
    let (d_pm, d_ps) = gauss(power_u, out.power_mean, out.power_log_std_raw);
    let (d_fm, d_fs) = gauss(freq_u, out.freq_mean, out.freq_log_std_raw);
    [d_logit, d_pm, d_ps, d_fm, d_fs]
}

/// Sample an action. Consumes exactly one uniform (offload) and two normals
/// (power, clock) from the stream, in that order.
pub fn act<R: Rng + ?Sized>(
    out: &HybridPolicyOutput,
    bounds: &ActionBounds,
    rng: &mut R,
) -> SampledAction {
    let offload = rng.random::<f64>() < sigmoid(out.offload_logit);
    let z_p: f64 = rng.sample(StandardNormal);
    let z_f: f64 = rng.sample(StandardNormal);
    let power_u = out.power_mean + out.power_log_std().exp() * z_p;
    let freq_u = out.freq_mean + out.freq_log_std().exp() * z_f;
    let log_p = log_prob(out, bounds, offload, power_u, freq_u);
    SampledAction {
        offload,
        power_u,
        freq_u,
        power_w: squash(power_u, bounds.power_min_w, bounds.power_max_w),
        freq_hz: squash(freq_u, bounds.freq_min_hz, bounds.freq_max_hz),
        log_prob: log_p,
    }
}

/// Mode of the policy, used for deterministic evaluation.
pub fn mean_action(out: &HybridPolicyOutput, bounds: &ActionBounds) -> (bool, f64, f64) {
    (
        out.offload_logit >= 0.0,
        squash(out.power_mean, bounds.power_min_w, bounds.power_max_w),
        squash(out.freq_mean, bounds.freq_min_hz, bounds.freq_max_hz),
    )
}

// ---------------------------------------------------------------------------
// Trajectories and advantages
// ---------------------------------------------------------------------------

/// One environment transition as stored by an agent.
#[derive(Debug, Clone, PartialEq)]
pub struct Transition {
    pub obs: Vec<f64>,
    pub action: SampledAction,
    pub reward: f64,
    /// Critic estimate at `obs` when the action was taken.
    pub value: f64,
}

/// One episode of experience for one agent. The terminal reward is folded
/// into the final transition's reward by the collector.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct Trajectory {
    pub steps: Vec<Transition>,
    /// Value bootstrap past the last step; zero for true terminals.
    pub bootstrap_value: f64,
}

/// Discount and smoothing factors of the advantage estimator.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GaeConfig {
    pub discount: f64,
    pub lambda: f64,
}

/// Exponentially weighted multi-step advantages via the standard backward
/// recursion `A_t = delta_t + discount * lambda * A_{t+1}`.
pub fn gae_advantages(traj: &Trajectory, cfg: &GaeConfig) -> Result<Vec<f64>> {
    if traj.steps.is_empty() {
        return Err(Error::invalid("cannot compute advantages of an empty trajectory"));
    }
    let n = traj.steps.len();
    let mut advantages = vec![0.0; n];
    let mut running = 0.0;
    for t in (0..n).rev() {
        let next_value = if t + 1 == n {
            traj.bootstrap_value
        } else {
            traj.steps[t + 1].value
        };
        let delta = traj.steps[t].reward + cfg.discount * next_value - traj.steps[t].value;
        running = delta + cfg.discount * cfg.lambda * running;
        advantages[t] = running;
    }
    Ok(advantages)
}

/// The PPO clip envelope.
pub fn clip_g(epsilon: f64, advantage: f64) -> f64 {
    if advantage >= 0.0 {
        (1.0 + epsilon) * advantage
    } else {
        (1.0 - epsilon) * advantage
    }
}

// ---------------------------------------------------------------------------
// Batches and losses
// ---------------------------------------------------------------------------

/// Assembled update batch: observations, stored actions (with their
/// behavior log-probs), advantages and critic targets.
#[derive(Debug, Clone, PartialEq)]
pub struct PpoBatch {
    pub obs: Vec<Vec<f64>>,
    pub actions: Vec<SampledAction>,
    pub advantages: Vec<f64>,
    pub targets: Vec<f64>,
}

impl PpoBatch {
    /// Advantages via GAE; critic targets are advantage plus value estimate.
    /// Optionally normalizes advantages to zero mean and unit variance.
    pub fn from_trajectory(traj: &Trajectory, cfg: &GaeConfig, normalize: bool) -> Result<Self> {
        let mut advantages = gae_advantages(traj, cfg)?;
        let targets: Vec<f64> = advantages
            .iter()
            .zip(&traj.steps)
            .map(|(a, s)| a + s.value)
            .collect();
        if normalize {
            let n = advantages.len() as f64;
            let mean = advantages.iter().sum::<f64>() / n;
            let var = advantages.iter().map(|a| (a - mean) * (a - mean)).sum::<f64>() / n;
            let std = var.sqrt();
            for a in &mut advantages {
                *a = (*a - mean) / (std + 1e-8);
            }
        }
        Ok(PpoBatch {
            obs: traj.steps.iter().map(|s| s.obs.clone()).collect(),
            actions: traj.steps.iter().map(|s| s.action).collect(),
            advantages,
            targets,
        })
    }

    pub fn len(&self) -> usize {
        self.obs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.obs.is_empty()
    }
}

/// Diagnostics of one surrogate-objective evaluation.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct ClipStats {
    pub mean_ratio: f64,
    pub clip_fraction: f64,
    /// Samples dropped for non-finite ratios.
    pub skipped: u64,
}

/// Clipped surrogate objective (to be maximized) and its gradient with
/// respect to the actor parameters, averaged over the given sample indices.
pub fn clipped_actor_objective(
    actor: &DenseNet,
    bounds: &ActionBounds,
    batch: &PpoBatch,
    indices: &[usize],
    clip_epsilon: f64,
) -> Result<(f64, Vec<f64>, ClipStats)> {
    if indices.is_empty() {
        return Err(Error::invalid("empty minibatch"));
    }
    let mut grad = vec![0.0; actor.num_params()];
    let mut objective = 0.0;
    let mut stats = ClipStats::default();
    let mut used = 0usize;
    for &i in indices {
        let (raw, cache) = actor.forward_cached(&batch.obs[i])?;
        let out = HybridPolicyOutput::from_raw(&raw)?;
        let action = &batch.actions[i];
        let lp = log_prob(&out, bounds, action.offload, action.power_u, action.freq_u);
        let ratio = (lp - action.log_prob).exp();
        if !ratio.is_finite() {
            stats.skipped += 1;
            log::warn!("non-finite policy ratio on sample {i}; excluded from update");
            continue;
        }
        used += 1;
        let adv = batch.advantages[i];
        let unclipped = ratio * adv;
        let clipped = clip_g(clip_epsilon, adv);
        stats.mean_ratio += ratio;
        if ratio < 1.0 - clip_epsilon || ratio > 1.0 + clip_epsilon {
            stats.clip_fraction += 1.0;
        }
        if unclipped <= clipped {
            objective += unclipped;
            // d(ratio * A)/d theta = A * ratio * d log pi / d theta
            let dlp = log_prob_grad(&out, action.offload, action.power_u, action.freq_u);
            let scale = adv * ratio;
            let mut out_grad = [0.0; POLICY_HEAD_DIM];
            for (og, d) in out_grad.iter_mut().zip(dlp) {
                *og = scale * d;
            }
            let g = actor.backward(&cache, &out_grad)?;
            for (acc, gi) in grad.iter_mut().zip(g) {
                *acc += gi;
            }
        } else {
            // clipped branch: constant in the parameters
            objective += clipped;
        }
    }
    if used == 0 {
        return Err(Error::numeric("all samples in minibatch had non-finite ratios"));
    }
    let inv = 1.0 / used as f64;
    objective *= inv;
    for g in &mut grad {
        *g *= inv;
    }
    stats.mean_ratio *= inv;
    stats.clip_fraction *= inv;
    Ok((objective, grad, stats))
}

/// Mean-squared-error critic loss and gradient over the given indices.
pub fn critic_loss(
    critic: &DenseNet,
    batch: &PpoBatch,
    indices: &[usize],
) -> Result<(f64, Vec<f64>)> {
    if indices.is_empty() {
        return Err(Error::invalid("empty minibatch"));
    }
    let mut grad = vec![0.0; critic.num_params()];
    let mut loss = 0.0;
    let inv = 1.0 / indices.len() as f64;
    for &i in indices {
        let (out, cache) = critic.forward_cached(&batch.obs[i])?;
        let err = out[0] - batch.targets[i];
        loss += err * err * inv;
        let g = critic.backward(&cache, &[2.0 * err * inv])?;
        for (acc, gi) in grad.iter_mut().zip(g) {
            *acc += gi;
        }
    }
    Ok((loss, grad))
}

/// Mean policy entropy and its actor-parameter gradient over the indices.
pub fn entropy_objective(
    actor: &DenseNet,
    batch: &PpoBatch,
    indices: &[usize],
) -> Result<(f64, Vec<f64>)> {
    let mut grad = vec![0.0; actor.num_params()];
    let mut entropy = 0.0;
    let inv = 1.0 / indices.len().max(1) as f64;
    for &i in indices {
        let (raw, cache) = actor.forward_cached(&batch.obs[i])?;
        let out = HybridPolicyOutput::from_raw(&raw)?;
        entropy += out.entropy() * inv;
        let mut out_grad = out.entropy_grad();
        for g in &mut out_grad {
            *g *= inv;
        }
        let g = actor.backward(&cache, &out_grad)?;
        for (acc, gi) in grad.iter_mut().zip(g) {
            *acc += gi;
        }
    }
    Ok((entropy, grad))
}

/// Hyperparameters of one PPO update.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PpoUpdateConfig {
    pub learning_rate: f64,
    pub clip_epsilon: f64,
    /// Critic-loss weight in the combined objective.
    pub value_coeff: f64,
    /// Entropy-bonus weight in the combined objective.
    pub entropy_coeff: f64,
    pub epochs: usize,
    pub minibatch_size: usize,
}

/// Aggregated diagnostics of one combined update.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct UpdateStats {
    /// Mean clipped surrogate objective (higher is better).
    pub actor_objective: f64,
    pub critic_loss: f64,
    pub entropy: f64,
    pub clip_fraction: f64,
    pub mean_ratio: f64,
    pub skipped_samples: u64,
}

/// One learning agent: actor, critic, and their optimizer states.
#[derive(Debug, Clone)]
pub struct PpoAgent {
    pub actor: DenseNet,
    pub critic: DenseNet,
    pub actor_opt: AdamState,
    pub critic_opt: AdamState,
    pub bounds: ActionBounds,
}

impl PpoAgent {
    pub fn new<R: Rng + ?Sized>(
        obs_dim: usize,
        hidden: &[usize],
        bounds: ActionBounds,
        rng: &mut R,
    ) -> Result<Self> {
        let mut actor_sizes = vec![obs_dim];
        actor_sizes.extend_from_slice(hidden);
        actor_sizes.push(POLICY_HEAD_DIM);
        let mut critic_sizes = vec![obs_dim];
        critic_sizes.extend_from_slice(hidden);
        critic_sizes.push(1);
        let actor = DenseNet::init(&actor_sizes, rng)?;
        let critic = DenseNet::init(&critic_sizes, rng)?;
        let actor_opt = AdamState::new(actor.num_params());
        let critic_opt = AdamState::new(critic.num_params());
        Ok(PpoAgent {
            actor,
            critic,
            actor_opt,
            critic_opt,
            bounds,
        })
    }

    pub fn policy_output(&self, obs: &[f64]) -> Result<HybridPolicyOutput> {
        HybridPolicyOutput::from_raw(&self.actor.forward(obs)?)
    }

    pub fn value(&self, obs: &[f64]) -> Result<f64> {
        Ok(self.critic.forward(obs)?[0])
    }

    /// Sample an action and estimate the state value.
    pub fn sample_action<R: Rng + ?Sized>(
        &self,
        obs: &[f64],
        rng: &mut R,
    ) -> Result<(SampledAction, f64)> {
        let out = self.policy_output(obs)?;
        Ok((act(&out, &self.bounds, rng), self.value(obs)?))
    }

    /// Deterministic (mode) action for evaluation.
    pub fn deterministic_action(&self, obs: &[f64]) -> Result<(bool, f64, f64)> {
        Ok(mean_action(&self.policy_output(obs)?, &self.bounds))
    }

    /// K epochs of minibatch ascent on the combined objective
    /// `L_clip - c1 * L_critic + c2 * entropy`.
    pub fn update<R: Rng + ?Sized>(
        &mut self,
        batch: &PpoBatch,
        cfg: &PpoUpdateConfig,
        rng: &mut R,
    ) -> Result<UpdateStats> {
        if batch.is_empty() {
            return Err(Error::invalid("cannot update on an empty batch"));
        }
        let n = batch.len();
        let mut indices: Vec<usize> = (0..n).collect();
        let mut totals = UpdateStats::default();
        let mut passes = 0usize;
        for _ in 0..cfg.epochs {
            // Fisher-Yates driven by the agent's shuffle stream
            for i in (1..n).rev() {
                let j = rng.random_range(0..=i);
                indices.swap(i, j);
            }
            let mut start = 0;
            while start < n {
                let end = (start + cfg.minibatch_size).min(n);
                let mb = &indices[start..end];
                start = end;

                let (objective, clip_grad, clip_stats) = clipped_actor_objective(
                    &self.actor,
                    &self.bounds,
                    batch,
                    mb,
                    cfg.clip_epsilon,
                )?;
                let (entropy, entropy_grad) = entropy_objective(&self.actor, batch, mb)?;
                // ascend the surrogate and the entropy bonus
                let actor_grad: Vec<f64> = clip_grad
                    .iter()
                    .zip(&entropy_grad)
                    .map(|(c, e)| -(c + cfg.entropy_coeff * e))
                    .collect();
                let mut actor_params = self.actor.flatten();
                adam_step(&mut actor_params, &actor_grad, &mut self.actor_opt, cfg.learning_rate)?;
                self.actor.set_from_flat(&actor_params)?;

                let (loss, mut critic_grad) = critic_loss(&self.critic, batch, mb)?;
                for g in &mut critic_grad {
                    *g *= cfg.value_coeff;
                }
                let mut critic_params = self.critic.flatten();
                adam_step(
                    &mut critic_params,
                    &critic_grad,
                    &mut self.critic_opt,
                    cfg.learning_rate,
                )?;
                self.critic.set_from_flat(&critic_params)?;

                totals.actor_objective += objective;
                totals.critic_loss += loss;
                totals.entropy += entropy;
                totals.clip_fraction += clip_stats.clip_fraction;
                totals.mean_ratio += clip_stats.mean_ratio;
                totals.skipped_samples += clip_stats.skipped;
                passes += 1;
            }
        }
        let inv = 1.0 / passes.max(1) as f64;
        totals.actor_objective *= inv;
        totals.critic_loss *= inv;
        totals.entropy *= inv;
        totals.clip_fraction *= inv;
        totals.mean_ratio *= inv;
        Ok(totals)
    }

    pub fn to_checkpoint(&self) -> Checkpoint {
        Checkpoint {
            kind: CheckpointKind::PpoActorCritic,
            nets: vec![
                PolicyParams::from_net(&self.actor),
                PolicyParams::from_net(&self.critic),
            ],
            optimizers: vec![self.actor_opt.clone(), self.critic_opt.clone()],
        }
    }

    pub fn from_checkpoint(ckpt: &Checkpoint, bounds: ActionBounds) -> Result<Self> {
        if ckpt.kind != CheckpointKind::PpoActorCritic || ckpt.nets.len() != 2 {
            return Err(Error::invalid("checkpoint does not hold an actor/critic pair"));
        }
        let mut actor = DenseNet::zeros(&ckpt.nets[0].sizes)?;
        ckpt.nets[0].apply_to(&mut actor)?;
        let mut critic = DenseNet::zeros(&ckpt.nets[1].sizes)?;
        ckpt.nets[1].apply_to(&mut critic)?;
        let (actor_opt, critic_opt) = if ckpt.optimizers.len() == 2 {
            (ckpt.optimizers[0].clone(), ckpt.optimizers[1].clone())
        } else {
            (
                AdamState::new(actor.num_params()),
                AdamState::new(critic.num_params()),
            )
        };
        Ok(PpoAgent {
            actor,
            critic,
            actor_opt,
            critic_opt,
            bounds,
        })
    }
}
