//! Recurrent multi-agent PPO: rollouts, advantage estimation, clipped
//! surrogate updates, evaluation and heuristic baselines.

mod baselines;
mod eval;
mod gae;
mod ppo;
mod rollout;
mod train;

pub use baselines::{BaselineKind, GreedyPolicy, LearnedPolicy, Policy, RandomPolicy};
pub use eval::{evaluate, evaluate_with, EvalReport};
pub use gae::{compute_advantages, gae, normalize_advantages, Advantages};
pub use ppo::{clipped_objective, ppo_update, LossReport};
pub use rollout::{collect_rollout, episode_seed, AgentTrajectory, EpisodeStats, EpisodeTrajectory, TrajectoryBatch};
pub use train::{train, MetricsRow, NullSink, TrainOutcome, TrainSink, METRICS_CSV_HEADER};

use thiserror::Error;

use crate::nets::{ActorConfig, CriticConfig, NetError, PolicyBundle};
use crate::tensor::{AdamConfig, TensorError};
use crate::world::{ScenarioConfig, WorldError};

#[derive(Debug, Error)]
pub enum TrainError {
    #[error("invalid training setting `{key}`: {message}")]
    Config { key: &'static str, message: String },
    #[error("non-finite {what} in update {update}")]
    NonFinite { update: usize, what: &'static str },
    #[error(transparent)]
    World(#[from] WorldError),
    #[error(transparent)]
    Net(#[from] NetError),
    #[error(transparent)]
    Tensor(#[from] TensorError),
    #[error("output sink failed: {0}")]
    Sink(#[from] std::io::Error),
}

/// Hyperparameters of a training run.
#[derive(Debug, Clone, PartialEq)]
pub struct TrainConfig {
    pub episodes: usize,
    pub gamma: f64,
    pub gae_lambda: f64,
    pub clip_epsilon: f64,
    pub epochs: usize,
    /// Episodes collected per update.
    pub episodes_per_update: usize,
    /// Each update's episodes are split into this many groups of whole
    /// sequences, one optimizer step per group and epoch.
    pub minibatches: usize,
    pub entropy_coef: f64,
    pub value_coef: f64,
    /// Updates between copies of the live actors into the old actors.
    pub sync_period: usize,
    pub lr: f64,
    pub max_grad_norm: f64,
    pub adam_beta1: f64,
    pub adam_beta2: f64,
    pub adam_eps: f64,
    /// Episodes between checkpoints; 0 disables them.
    pub eval_interval: usize,
    pub normalize_advantages: bool,
    /// Multiplies every reward before advantage estimation.
    pub reward_scale: f64,
    pub hidden: usize,
    pub head_hidden: usize,
    pub critic_widths: Vec<usize>,
    /// LSTM actor and dual-value critic; `false` gives the feed-forward,
    /// single-head variant.
    pub recurrent: bool,
    pub dual_critic: bool,
    pub per_agent_mix: bool,
    pub forget_bias: f64,
    /// Rollout worker threads.
    pub threads: usize,
    /// Fill the `wall_ms` metrics column with measured time instead of 0.
    pub record_wall_time: bool,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            episodes: 300,
            gamma: 0.99,
            gae_lambda: 0.95,
            clip_epsilon: 0.2,
            epochs: 4,
            episodes_per_update: 4,
            minibatches: 1,
            entropy_coef: 0.01,
            value_coef: 0.5,
            sync_period: 1,
            lr: 3e-4,
            max_grad_norm: 0.5,
            adam_beta1: 0.9,
            adam_beta2: 0.999,
            adam_eps: 1e-8,
            eval_interval: 0,
            normalize_advantages: true,
            reward_scale: 1.0,
            hidden: 64,
            head_hidden: 64,
            critic_widths: vec![128, 64],
            recurrent: true,
            dual_critic: true,
            per_agent_mix: false,
            forget_bias: 1.0,
            threads: 1,
            record_wall_time: false,
        }
    }
}

fn bad(key: &'static str, message: impl Into<String>) -> TrainError {
    TrainError::Config {
        key,
        message: message.into(),
    }
}

impl TrainConfig {
    /// Feed-forward actor with a single-head critic.
    pub fn mappo_ff() -> Self {
        Self {
            recurrent: false,
            dual_critic: false,
            ..Self::default()
        }
    }

    pub fn validate(&self) -> Result<(), TrainError> {
        if !(self.gamma > 0.0 && self.gamma <= 1.0) {
            return Err(bad("gamma", "must lie in (0, 1]"));
        }
        if !(0.0..=1.0).contains(&self.gae_lambda) {
            return Err(bad("gae_lambda", "must lie in [0, 1]"));
        }
        if !(self.clip_epsilon > 0.0) {
            return Err(bad("clip_epsilon", "must be positive"));
        }
        if !(self.lr > 0.0 && self.lr.is_finite()) {
            return Err(bad("lr", "must be positive"));
        }
        if !(self.max_grad_norm > 0.0) {
            return Err(bad("max_grad_norm", "must be positive"));
        }
        for (key, v) in [
            ("epochs", self.epochs),
            ("episodes_per_update", self.episodes_per_update),
            ("minibatches", self.minibatches),
            ("sync_period", self.sync_period),
            ("hidden", self.hidden),
            ("head_hidden", self.head_hidden),
            ("threads", self.threads),
        ] {
            if v == 0 {
                return Err(bad(key, "must be at least 1"));
            }
        }
        if self.minibatches > self.episodes_per_update {
            return Err(bad("minibatches", "must not exceed episodes_per_update"));
        }
        if self.critic_widths.contains(&0) {
            return Err(bad("critic_widths", "widths must be positive"));
        }
        if !(self.reward_scale > 0.0 && self.reward_scale.is_finite()) {
            return Err(bad("reward_scale", "must be positive"));
        }
        Ok(())
    }

    pub fn adam(&self) -> AdamConfig {
        AdamConfig {
            lr: self.lr,
            beta1: self.adam_beta1,
            beta2: self.adam_beta2,
            eps: self.adam_eps,
            max_grad_norm: Some(self.max_grad_norm),
        }
    }

    pub fn actor_config(&self, scenario: &ScenarioConfig) -> ActorConfig {
        ActorConfig {
            obs_dim: scenario.obs_dim(),
            n_actions: scenario.n_actions(),
            hidden: self.hidden,
            head_hidden: self.head_hidden,
            recurrent: self.recurrent,
            forget_bias: self.forget_bias,
        }
    }

    pub fn critic_config(&self, scenario: &ScenarioConfig) -> CriticConfig {
        CriticConfig {
            obs_dim: scenario.obs_dim(),
            state_dim: scenario.global_state_dim(),
            n_agents: scenario.n_uavs,
            widths: self.critic_widths.clone(),
            dual: self.dual_critic,
            per_agent_weights: self.per_agent_mix,
        }
    }

    /// Freshly initialized networks for `scenario`.
    pub fn init_bundle(&self, scenario: &ScenarioConfig, seed: u64) -> PolicyBundle<f64> {
        PolicyBundle::new(&self.actor_config(scenario), &self.critic_config(scenario), seed)
    }
}

/// Rollout worker count from `AOIUAV_THREADS`, defaulting to 1.
pub fn threads_from_env() -> usize {
    std::env::var("AOIUAV_THREADS")
        .ok()
        .and_then(|v| v.trim().parse::<usize>().ok())
        .filter(|&n| n > 0)
        .unwrap_or(1)
}

#[cfg(test)]
mod tests;
