//! Simulator and trainer for energy-efficient semantic-aware task
//! offloading: user equipments decide per step whether to run machine
//! translation locally or ship semantic symbols to an edge server, and a
//! federated multi-agent PPO learns the joint offload/power/clock policy.
//!
//! Module map:
//! - [`channel`]: pathloss, Rayleigh fading, SNR
//! - [`semantics`]: accuracy surrogate table and semantic rate
//! - [`env`]: the episodic multi-UE environment (latency/energy accounting,
//!   constraints, rewards)
//! - [`nnet`]: dense nets with analytic gradients, Adam, checkpoints
//! - [`ppo`]: hybrid-action PPO (GAE, clipped surrogate, critic loss)
//! - [`marl`]: per-UE agents, shared reward, federated averaging
//! - [`baselines`]: DQN, exhaustive grid search, static policies
//! - [`harness`]: seeded single-episode evaluation
//! - [`report`]: metrics schemas and the run-directory layout

pub mod baselines;
pub mod channel;
pub mod config;
pub mod env;
pub mod error;
pub mod harness;
pub mod marl;
pub mod nnet;
pub mod ppo;
pub mod report;
pub mod seeds;
pub mod semantics;

pub use config::{Profile, ScenarioConfig};
pub use error::{Error, Result};
