//! Run configuration: ablation switches, schedule, and nested component
//! settings, loadable from TOML with full defaults.

use serde::{Deserialize, Serialize};

use crate::env::{EnvConfig, ObjectShape};
use crate::error::{Error, Result};
use crate::linalg::fnv1a_64;
use crate::reward::RewardWeights;
use crate::scalar::Real;

/// The four studied configurations. Flags derive from the variant, so
/// inconsistent combinations cannot be expressed.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Ablation {
    /// Dense task reward + shadow rewards + parameter sharing.
    DenseFmsrIs,
    /// Dense task reward + shadow rewards.
    DenseFmsr,
    /// Dense task reward only.
    Dense,
    /// Sparse terminal-style reward only.
    Sparse,
}

impl Ablation {
    pub fn label(self) -> &'static str {
        match self {
            Ablation::DenseFmsrIs => "dense_fmsr_is",
            Ablation::DenseFmsr => "dense_fmsr",
            Ablation::Dense => "dense",
            Ablation::Sparse => "sparse",
        }
    }

    /// Shadow rewards participate in targets and actor updates.
    pub fn shadow_enabled(self) -> bool {
        matches!(self, Ablation::DenseFmsrIs | Ablation::DenseFmsr)
    }

    /// Consensus parameter sharing runs each cycle.
    pub fn sharing_enabled(self) -> bool {
        matches!(self, Ablation::DenseFmsrIs)
    }

    /// Dense per-step task reward; otherwise the sparse 0/-1 signal.
    pub fn dense_reward(self) -> bool {
        !matches!(self, Ablation::Sparse)
    }

    pub fn all() -> [Ablation; 4] {
        [Ablation::DenseFmsrIs, Ablation::DenseFmsr, Ablation::Dense, Ablation::Sparse]
    }
}

/// Learner hyperparameters shared by every agent.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
#[serde(bound(serialize = "", deserialize = ""))]
pub struct AgentParams<R: Real> {
    /// Hidden layer widths of actors and critics.
    pub hidden: Vec<usize>,
    pub learning_rate: R,
    pub gamma: R,
    pub replay_capacity: usize,
    pub batch_size: usize,
    /// Exploration noise std per action dimension.
    pub sigma_explore: R,
    /// Target soft-update factor applied once per epoch.
    pub tau_soft: R,
}

impl<R: Real> Default for AgentParams<R> {
    fn default() -> Self {
        let f = R::from_f64_lossy;
        AgentParams {
            hidden: vec![32, 32],
            learning_rate: f(1e-3),
            gamma: f(0.98),
            replay_capacity: 20_000,
            batch_size: 128,
            sigma_explore: f(0.2),
            tau_soft: f(0.3),
        }
    }
}

/// Shadow-reward shaping parameters; feature indices are fixed by the
/// trainer's feature layout (0 = palm offset, 1 = contact count).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
#[serde(bound(serialize = "", deserialize = ""))]
pub struct RewardParams<R: Real> {
    /// Shadow-reward scaler; forced to zero by non-shadow ablations.
    pub alpha: R,
    pub log_offset: R,
    pub contact_threshold: u32,
    pub literal_sign_mode: bool,
    /// Safe-region radius as a fraction of the palm radius.
    pub safe_radius_fraction: R,
}

impl<R: Real> Default for RewardParams<R> {
    fn default() -> Self {
        let f = R::from_f64_lossy;
        RewardParams {
            alpha: f(0.1),
            log_offset: f(0.1),
            contact_threshold: 5,
            literal_sign_mode: false,
            safe_radius_fraction: f(0.35),
        }
    }
}

impl<R: Real> RewardParams<R> {
    /// Core reward weights with the ablation-effective alpha.
    pub fn weights(&self, effective_alpha: R) -> RewardWeights<R> {
        RewardWeights {
            alpha: effective_alpha,
            log_offset: self.log_offset,
            contact_threshold: self.contact_threshold,
            literal_sign_mode: self.literal_sign_mode,
            offset_feature: 0,
            contact_feature: 1,
        }
    }
}

/// Occupancy estimator settings.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default)]
pub struct OccupancyParams {
    /// Sliding window, episodes.
    pub window: usize,
    /// Bins for the palm-offset feature.
    pub offset_bins: u32,
}

impl Default for OccupancyParams {
    fn default() -> Self {
        OccupancyParams { window: 50, offset_bins: 16 }
    }
}

/// Consensus graph settings.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(default)]
pub struct ConsensusParams {
    /// Connect the wrist to the first two fingers instead of leaving it
    /// isolated.
    pub include_wrist: bool,
}

/// Full experiment description. `Default` is the desk-scale Block run;
/// [`RunConfig::full_scale`] restores the full-size schedule.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
#[serde(bound(serialize = "", deserialize = ""))]
pub struct RunConfig<R: Real> {
    /// Manipulated object; overrides `env.object_shape`.
    pub task: ObjectShape,
    pub ablation: Ablation,
    pub epochs: usize,
    pub cycles_per_epoch: usize,
    pub batches_per_cycle: usize,
    pub rollout_workers: usize,
    /// Pre-registered training seeds.
    pub seeds: Vec<u64>,
    /// Success threshold during training and validation, radians.
    pub train_threshold: R,
    /// Success threshold during testing, radians.
    pub test_threshold: R,
    pub eval_trials_validation: usize,
    pub eval_trials_test: usize,
    pub failure_trials: usize,
    /// Evaluation-set seeds; disjoint from training seeds by construction.
    pub validation_seed: u64,
    pub test_seed: u64,
    pub failure_seed: u64,
    /// Stability-series sampling stride, steps.
    pub stability_stride: usize,
    pub env: EnvConfig<R>,
    pub reward: RewardParams<R>,
    pub agent: AgentParams<R>,
    pub occupancy: OccupancyParams,
    pub consensus: ConsensusParams,
}

impl<R: Real> Default for RunConfig<R> {
    fn default() -> Self {
        Self::desk_block()
    }
}

impl<R: Real> RunConfig<R> {
    /// Desk-scale Block task: 3 fingers, 40 epochs x 5 cycles x 5 batches,
    /// 2 rollout workers, seeds 11/12/13.
    pub fn desk_block() -> Self {
        let f = R::from_f64_lossy;
        let mut env = EnvConfig::default();
        env.num_fingers = 3;
        env.dofs_per_agent = vec![2, 3, 3, 3];
        env.max_episode_steps = 60;
        RunConfig {
            task: ObjectShape::Block,
            ablation: Ablation::DenseFmsrIs,
            epochs: 40,
            cycles_per_epoch: 5,
            batches_per_cycle: 5,
            rollout_workers: 2,
            seeds: vec![11, 12, 13],
            train_threshold: f(0.1),
            test_threshold: f(0.4),
            eval_trials_validation: 50,
            eval_trials_test: 100,
            failure_trials: 500,
            validation_seed: 71_000_000,
            test_seed: 92_000_000,
            failure_seed: 95_000_000,
            stability_stride: 10,
            env,
            reward: RewardParams::default(),
            agent: AgentParams::default(),
            occupancy: OccupancyParams::default(),
            consensus: ConsensusParams::default(),
        }
    }

    /// Full-size schedule: whole hand, 400 epochs x 25 cycles x 25 batches,
    /// 4 rollout workers.
    pub fn full_scale() -> Self {
        let f = R::from_f64_lossy;
        let mut config = Self::desk_block();
        config.env = EnvConfig::default();
        config.epochs = 400;
        config.cycles_per_epoch = 25;
        config.batches_per_cycle = 25;
        config.rollout_workers = 4;
        config.agent.hidden = vec![64, 64];
        config.agent.replay_capacity = 100_000;
        config.agent.batch_size = 256;
        config.reward.contact_threshold = 10;
        config.occupancy.offset_bins = 32;
        config.env.max_episode_steps = 100;
        let _ = f;
        config
    }

    /// Environment with the task object applied.
    pub fn effective_env(&self) -> EnvConfig<R> {
        let mut env = self.env.clone();
        env.object_shape = self.task;
        env
    }

    /// Alpha actually used: zero unless the ablation carries shadow terms.
    pub fn effective_alpha(&self) -> R {
        if self.ablation.shadow_enabled() {
            self.reward.alpha
        } else {
            R::zero()
        }
    }

    pub fn to_toml(&self) -> Result<String> {
        toml::to_string(self).map_err(|e| Error::config(format!("serialize config: {e}")))
    }

    pub fn from_toml_str(text: &str) -> Result<Self> {
        let config: Self =
            toml::from_str(text).map_err(|e| Error::config(format!("parse config: {e}")))?;
        config.validate()?;
        Ok(config)
    }

    pub fn from_path(path: &std::path::Path) -> Result<Self> {
        Self::from_toml_str(&std::fs::read_to_string(path)?)
    }

    /// Hash of the canonical TOML form.
    pub fn config_hash(&self) -> Result<u64> {
        Ok(fnv1a_64(self.to_toml()?.as_bytes()))
    }

    pub fn validate(&self) -> Result<()> {
        for (name, v) in [
            ("epochs", self.epochs),
            ("cycles_per_epoch", self.cycles_per_epoch),
            ("batches_per_cycle", self.batches_per_cycle),
            ("rollout_workers", self.rollout_workers),
            ("eval_trials_validation", self.eval_trials_validation),
            ("eval_trials_test", self.eval_trials_test),
            ("failure_trials", self.failure_trials),
            ("stability_stride", self.stability_stride),
            ("occupancy.window", self.occupancy.window),
            ("agent.batch_size", self.agent.batch_size),
        ] {
            if v == 0 {
                return Err(Error::config(format!("{name} must be at least 1")));
            }
        }
        if self.seeds.is_empty() {
            return Err(Error::config("at least one training seed is required"));
        }
        if self.train_threshold <= R::zero() || self.test_threshold <= R::zero() {
            return Err(Error::config("success thresholds must be positive"));
        }
        if self.agent.batch_size > self.agent.replay_capacity {
            return Err(Error::config("batch size cannot exceed replay capacity"));
        }
        if self.agent.gamma < R::zero() || self.agent.gamma >= R::one() {
            return Err(Error::config("gamma must lie in [0, 1)"));
        }
        if self.agent.hidden.is_empty() {
            return Err(Error::config("at least one hidden layer is required"));
        }
        if self.ablation.sharing_enabled() && self.agent.hidden.len() < 2 {
            return Err(Error::config(
                "parameter sharing needs at least two hidden layers (shared interior)",
            ));
        }
        if self.ablation.shadow_enabled() && self.agent.sigma_explore <= R::zero() {
            return Err(Error::config(
                "shadow ablations need exploration noise (sigma_explore > 0)",
            ));
        }
        if self.occupancy.offset_bins == 0 {
            return Err(Error::config("offset_bins must be at least 1"));
        }
        if self.reward.safe_radius_fraction <= R::zero() {
            return Err(Error::config("safe_radius_fraction must be positive"));
        }
        self.reward.weights(self.reward.alpha).validate()?;
        self.effective_env().validate()?;
        Ok(())
    }
}
