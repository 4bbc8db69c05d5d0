//! Seeded exploration rollouts collected by worker threads over frozen
//! policy snapshots. Workers only read their snapshot and return immutable
//! episode data; merging happens in worker order, so collection is
//! deterministic regardless of scheduling.

use crate::agents::{global_state, local_observation, Agent, NoiseProcess};
use crate::env::{ContactReport, EnvConfig, EnvState, HeightFlag, PlanarHandEnv};
use crate::error::{Error, Result};
use crate::linalg::fnv1a_64;
use crate::reward::{sparse_reward, task_reward};
use crate::scalar::Real;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// Stable derivation of sub-seeds from labeled parts.
pub fn derive_seed(parts: &[u64]) -> u64 {
    let mut bytes = Vec::with_capacity(parts.len() * 8);
    for p in parts {
        bytes.extend_from_slice(&p.to_le_bytes());
    }
    fnv1a_64(&bytes)
}

/// Occupancy features of a state: palm-offset distance, contact count.
pub fn step_features<R: Real>(
    state: &EnvState<R>,
    report: &ContactReport<R>,
    palm_center: [R; 2],
) -> Vec<R> {
    let dx = state.object_center[0] - palm_center[0];
    let dy = state.object_center[1] - palm_center[1];
    vec![
        (dx * dx + dy * dy).sqrt(),
        R::from_usize(report.contact_count).expect("contact count fits"),
    ]
}

/// Per-step task reward mode.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum RewardMode<R> {
    /// Negative absolute wrapped goal error each step.
    Dense,
    /// 0 within the threshold, -1 outside.
    Sparse { threshold: R },
}

impl<R: Real> RewardMode<R> {
    fn reward(&self, object_angle: R, target_angle: R) -> R {
        match *self {
            RewardMode::Dense => task_reward(object_angle, target_angle),
            RewardMode::Sparse { threshold } => {
                sparse_reward(object_angle, target_angle, threshold)
            }
        }
    }
}

/// One transition of an exploration episode, with everything training
/// needs: observations, the actor-input action history, occupancy features,
/// and the shared task reward.
#[derive(Debug, Clone, PartialEq)]
pub struct RolloutStep<R> {
    pub global_state: Vec<R>,
    pub local_observations: Vec<Vec<R>>,
    /// Previous-step actions every actor saw as "most recent".
    pub prev_actions: Vec<Vec<R>>,
    pub actions: Vec<Vec<R>>,
    pub next_global_state: Vec<R>,
    pub next_local_observations: Vec<Vec<R>>,
    /// Task reward of the post-step state, shared by all agents.
    pub task_reward: R,
    /// Occupancy features of the pre-step state.
    pub features: Vec<R>,
    /// Contacts after the step.
    pub contact_count: usize,
    /// The object fell; bootstrap is cut. Time-limit truncation is not a
    /// terminal state.
    pub done: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct EpisodeData<R> {
    pub worker: usize,
    pub steps: Vec<RolloutStep<R>>,
}

impl<R: Real> EpisodeData<R> {
    /// Feature rows feeding the occupancy estimator.
    pub fn feature_rows(&self) -> Vec<Vec<R>> {
        self.steps.iter().map(|s| s.features.clone()).collect()
    }
}

/// Runs one noisy episode with the frozen agents.
pub fn run_exploration_episode<R: Real>(
    env_config: &EnvConfig<R>,
    agents: &[Agent<R>],
    seed: u64,
    sigma: R,
    mode: RewardMode<R>,
) -> Result<EpisodeData<R>> {
    if agents.len() != env_config.n_agents() {
        return Err(Error::contract("agent count must match the environment"));
    }
    let mut env = PlanarHandEnv::new(env_config.clone())?;
    let (mut state, goal, mut report) = env.reset(seed);
    let mut noises: Vec<NoiseProcess<R>> = (0..agents.len())
        .map(|i| {
            NoiseProcess::new(
                sigma,
                ChaCha8Rng::seed_from_u64(derive_seed(&[seed, 0x4E01, i as u64])),
            )
        })
        .collect();
    let mut prev_actions: Vec<Vec<R>> =
        agents.iter().map(|a| vec![R::zero(); a.spec.action_dim]).collect();
    let mut steps = Vec::with_capacity(env_config.max_episode_steps);

    while !env.terminated() {
        let globals = global_state(&state, &goal);
        let locals: Vec<Vec<R>> =
            (0..agents.len()).map(|i| local_observation(i, &state, &goal)).collect();
        let features = step_features(&state, &report, env_config.palm_center);
        let mut actions = Vec::with_capacity(agents.len());
        for (agent, noise) in agents.iter().zip(&mut noises) {
            let input = agent.actor_input(&locals[agent.spec.agent_index], &prev_actions)?;
            actions.push(agent.select_action(&input, noise)?);
        }
        let result = env.step(&actions)?;
        let next_locals: Vec<Vec<R>> =
            (0..agents.len()).map(|i| local_observation(i, &result.state, &goal)).collect();
        steps.push(RolloutStep {
            global_state: globals,
            local_observations: locals,
            prev_actions: prev_actions.clone(),
            actions: actions.clone(),
            next_global_state: global_state(&result.state, &goal),
            next_local_observations: next_locals,
            task_reward: mode.reward(result.state.object_angle, goal.target_angle),
            features,
            contact_count: result.report.contact_count,
            done: result.state.height_flag == HeightFlag::Fallen,
        });
        prev_actions = actions;
        state = result.state;
        report = result.report;
    }
    Ok(EpisodeData { worker: 0, steps })
}

/// Collects one episode per worker concurrently and merges them in worker
/// order.
pub fn collect_rollouts<R: Real>(
    env_config: &EnvConfig<R>,
    agents: &[Agent<R>],
    workers: usize,
    cycle_seed: u64,
    sigma: R,
    mode: RewardMode<R>,
) -> Result<Vec<EpisodeData<R>>> {
    if workers == 0 {
        return Err(Error::config("at least one rollout worker is required"));
    }
    std::thread::scope(|scope| {
        let mut handles = Vec::with_capacity(workers);
        for w in 0..workers {
            let snapshot: Vec<Agent<R>> = agents.to_vec();
            let env_config = env_config.clone();
            handles.push(scope.spawn(move || {
                let seed = derive_seed(&[cycle_seed, 0x77, w as u64]);
                run_exploration_episode(&env_config, &snapshot, seed, sigma, mode)
                    .map(|mut episode| {
                        episode.worker = w;
                        episode
                    })
            }));
        }
        handles
            .into_iter()
            .map(|h| h.join().map_err(|_| Error::contract("rollout worker panicked"))?)
            .collect()
    })
}
