//! Per-agent actor-critic learners over a shared synchronized replay.
//!
//! Each agent owns a critic reading the global state plus every agent's
//! action, and an actor reading its local observation plus its ring
//! neighbors' most recent actions. Critic targets add the shadow bonus to
//! the task reward; actors ascend the deterministic policy gradient plus a
//! score-function gradient of the shadow term through the Gaussian
//! exploration policy.

use std::collections::VecDeque;

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::consensus::Topology;
use crate::env::{EnvConfig, EnvState, Goal};
use crate::error::{Error, Result};
use crate::net::{Activation, Adam, Network};
use crate::scalar::Real;

// ---------------------------------------------------------------------------
// Observation builders
// ---------------------------------------------------------------------------

/// Extra observation entries beyond the joint state: goal error direction
/// (cosine, sine), object angular velocity, object center.
const POSE_OBS_DIM: usize = 5;

fn pose_features<R: Real>(state: &EnvState<R>, goal: &Goal<R>) -> [R; POSE_OBS_DIM] {
    let err = goal.target_angle - state.object_angle;
    [
        err.cos(),
        err.sin(),
        state.object_angular_velocity,
        state.object_center[0],
        state.object_center[1],
    ]
}

/// Global state vector: every joint position and velocity, then the shared
/// pose features.
pub fn global_state<R: Real>(state: &EnvState<R>, goal: &Goal<R>) -> Vec<R> {
    let mut x = Vec::new();
    for joints in &state.joint_positions {
        x.extend_from_slice(joints);
    }
    for vels in &state.joint_velocities {
        x.extend_from_slice(vels);
    }
    x.extend_from_slice(&pose_features(state, goal));
    x
}

/// Local observation of one agent: its own joint positions and velocities,
/// then the shared pose features.
pub fn local_observation<R: Real>(
    agent_index: usize,
    state: &EnvState<R>,
    goal: &Goal<R>,
) -> Vec<R> {
    let mut o = Vec::new();
    o.extend_from_slice(&state.joint_positions[agent_index]);
    o.extend_from_slice(&state.joint_velocities[agent_index]);
    o.extend_from_slice(&pose_features(state, goal));
    o
}

// ---------------------------------------------------------------------------
// Agent wiring
// ---------------------------------------------------------------------------

/// Static dimensions and neighborhood of one agent.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AgentSpec {
    pub agent_index: usize,
    pub action_dim: usize,
    /// Local observation width.
    pub obs_dim: usize,
    /// Global state width shared by every critic.
    pub global_dim: usize,
    /// Ring neighbors whose most recent actions the actor observes.
    pub neighbor_ids: Vec<usize>,
    /// Action widths of all agents, in agent order.
    pub action_dims: Vec<usize>,
}

impl AgentSpec {
    /// Critic reads the global state plus every agent's action.
    pub fn critic_input_dim(&self) -> usize {
        self.global_dim + self.action_dims.iter().sum::<usize>()
    }

    /// Actor reads the local observation plus neighbor actions.
    pub fn actor_input_dim(&self) -> usize {
        self.obs_dim + self.neighbor_ids.iter().map(|&j| self.action_dims[j]).sum::<usize>()
    }
}

/// Derives all agent specs from the environment layout and the
/// communication graph (neighbor lists follow the graph's edges).
pub fn build_agent_specs<R: Real>(config: &EnvConfig<R>, topology: &Topology) -> Result<Vec<AgentSpec>> {
    let n = config.n_agents();
    if topology.n_agents != n {
        return Err(Error::contract("topology size must match the agent count"));
    }
    let action_dims: Vec<usize> = config.dofs_per_agent.clone();
    let total_dofs: usize = action_dims.iter().sum();
    let global_dim = 2 * total_dofs + POSE_OBS_DIM;
    Ok((0..n)
        .map(|i| {
            let mut neighbor_ids: Vec<usize> = topology
                .edges
                .iter()
                .filter_map(|&(a, b)| {
                    if a == i {
                        Some(b)
                    } else if b == i {
                        Some(a)
                    } else {
                        None
                    }
                })
                .collect();
            neighbor_ids.sort_unstable();
            neighbor_ids.dedup();
            AgentSpec {
                agent_index: i,
                action_dim: action_dims[i],
                obs_dim: 2 * action_dims[i] + POSE_OBS_DIM,
                global_dim,
                neighbor_ids,
                action_dims: action_dims.clone(),
            }
        })
        .collect())
}

// ---------------------------------------------------------------------------
// Replay
// ---------------------------------------------------------------------------

/// One synchronized step of all agents.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TransitionRecord<R> {
    pub global_state: Vec<R>,
    pub local_observations: Vec<Vec<R>>,
    /// Actions each actor saw as "most recent" when acting (previous step).
    pub prev_actions: Vec<Vec<R>>,
    /// Actions taken this step.
    pub actions: Vec<Vec<R>>,
    pub rewards: Vec<R>,
    /// Shadow bonuses, already weighted, one per agent.
    pub shadow_values: Vec<R>,
    pub next_global_state: Vec<R>,
    pub next_local_observations: Vec<Vec<R>>,
    pub contact_count: usize,
    pub done: bool,
}

/// Bounded FIFO store of synchronized transitions. One index sequence drawn
/// per update is reused by every agent.
#[derive(Debug, Clone)]
pub struct ReplayBuffer<R> {
    records: VecDeque<TransitionRecord<R>>,
    capacity: usize,
}

impl<R: Real> ReplayBuffer<R> {
    pub fn new(capacity: usize) -> Result<Self> {
        if capacity == 0 {
            return Err(Error::config("replay capacity must be positive"));
        }
        Ok(ReplayBuffer { records: VecDeque::new(), capacity })
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    pub fn capacity(&self) -> usize {
        self.capacity
    }

    pub fn push(&mut self, record: TransitionRecord<R>) {
        if self.records.len() == self.capacity {
            self.records.pop_front();
        }
        self.records.push_back(record);
    }

    pub fn get(&self, index: usize) -> &TransitionRecord<R> {
        &self.records[index]
    }

    /// Draws one minibatch index sequence (with replacement) for all agents.
    pub fn sample_indices(&self, rng: &mut ChaCha8Rng, batch: usize) -> Result<Vec<usize>> {
        if self.records.is_empty() {
            return Err(Error::contract("cannot sample from an empty replay buffer"));
        }
        Ok((0..batch).map(|_| rng.random_range(0..self.records.len())).collect())
    }

    pub fn select(&self, indices: &[usize]) -> Vec<&TransitionRecord<R>> {
        indices.iter().map(|&i| &self.records[i]).collect()
    }
}

// ---------------------------------------------------------------------------
// Exploration noise
// ---------------------------------------------------------------------------

/// Mean-zero Gaussian action noise, deterministic under its seed.
#[derive(Debug, Clone)]
pub struct NoiseProcess<R> {
    pub sigma: R,
    rng: ChaCha8Rng,
}

impl<R: Real> NoiseProcess<R> {
    pub fn new(sigma: R, rng: ChaCha8Rng) -> Self {
        NoiseProcess { sigma, rng }
    }

    pub fn sample(&mut self, dim: usize) -> Vec<R> {
        (0..dim)
            .map(|_| {
                let z: f64 = self.rng.sample(StandardNormal);
                self.sigma * R::from_f64_lossy(z)
            })
            .collect()
    }
}

// ---------------------------------------------------------------------------
// Gradient estimators
// ---------------------------------------------------------------------------

/// Deterministic policy gradient: chains the critic's action gradient
/// through the actor, averaged over the batch. `grad_q(actor_input, action)`
/// returns the critic's gradient w.r.t. this agent's action slot. Ascent
/// direction.
pub fn dpg_gradient<R: Real>(
    actor: &Network<R>,
    inputs: &[Vec<R>],
    mut grad_q: impl FnMut(&[R], &[R]) -> Result<Vec<R>>,
) -> Result<Vec<R>> {
    if inputs.is_empty() {
        return Err(Error::contract("policy gradient needs a non-empty batch"));
    }
    let mut acc = vec![R::zero(); actor.params().len()];
    for input in inputs {
        let action = actor.forward(input)?;
        let dq = grad_q(input, &action)?;
        if dq.len() != action.len() {
            return Err(Error::contract("action gradient width mismatch"));
        }
        let grads = actor.backward(input, &dq)?;
        for (a, g) in acc.iter_mut().zip(&grads.params) {
            *a = *a + *g;
        }
    }
    let scale = R::one() / R::from_usize(inputs.len()).expect("batch fits");
    for a in &mut acc {
        *a = *a * scale;
    }
    Ok(acc)
}

/// One step of an episode used by the shadow-term gradient.
#[derive(Debug, Clone, PartialEq)]
pub struct ShadowStep<R> {
    pub actor_input: Vec<R>,
    pub action: Vec<R>,
    /// Critic value of the step under the current joint action.
    pub q_value: R,
}

/// Score-function gradient of the shadow term through the Gaussian
/// exploration policy centered on the actor mean: per step,
/// `gamma^t * q * grad mu * (a - mu) / sigma^2`, summed over steps,
/// averaged over episodes, scaled by `alpha`. Ascent direction.
pub fn shadow_gradient<R: Real>(
    actor: &Network<R>,
    episodes: &[Vec<ShadowStep<R>>],
    alpha: R,
    sigma: R,
    gamma: R,
) -> Result<Vec<R>> {
    if alpha == R::zero() {
        return Ok(vec![R::zero(); actor.params().len()]);
    }
    if sigma <= R::zero() {
        return Err(Error::not_applicable(
            "shadow gradient needs a stochastic policy (sigma > 0)",
        ));
    }
    if episodes.is_empty() {
        return Err(Error::contract("shadow gradient needs at least one episode"));
    }
    let inv_var = R::one() / (sigma * sigma);
    let mut acc = vec![R::zero(); actor.params().len()];
    for episode in episodes {
        let mut discount = R::one();
        for step in episode {
            let mean = actor.forward(&step.actor_input)?;
            if mean.len() != step.action.len() {
                return Err(Error::contract("shadow step action width mismatch"));
            }
            // d log N(a; mu, sigma^2) / d mu = (a - mu) / sigma^2.
            let dmu: Vec<R> = step
                .action
                .iter()
                .zip(&mean)
                .map(|(&a, &m)| discount * step.q_value * (a - m) * inv_var)
                .collect();
            let grads = actor.backward(&step.actor_input, &dmu)?;
            for (a, g) in acc.iter_mut().zip(&grads.params) {
                *a = *a + *g;
            }
            discount = discount * gamma;
        }
    }
    let scale = alpha / R::from_usize(episodes.len()).expect("episode count fits");
    for a in &mut acc {
        *a = *a * scale;
    }
    Ok(acc)
}

/// Bootstrapped critic regression target: reward plus the weighted shadow
/// bonus, plus the discounted next-state target value unless terminal.
pub fn critic_target_value<R: Real>(
    reward: R,
    shadow_bonus: R,
    gamma: R,
    next_q: R,
    done: bool,
) -> R {
    let base = reward + shadow_bonus;
    if done {
        base
    } else {
        base + gamma * next_q
    }
}

// ---------------------------------------------------------------------------
// Agent
// ---------------------------------------------------------------------------

/// One learner: online and target actor/critic pairs with their optimizers.
#[derive(Debug, Clone)]
pub struct Agent<R: Real> {
    pub spec: AgentSpec,
    pub actor: Network<R>,
    pub critic: Network<R>,
    pub target_actor: Network<R>,
    pub target_critic: Network<R>,
    actor_opt: Adam<R>,
    critic_opt: Adam<R>,
}

impl<R: Real> Agent<R> {
    /// Builds actor `[obs+neighbor actions, hidden.., action]` with a tanh
    /// output and critic `[global+all actions, hidden.., 1]` with a linear
    /// output; targets start as exact copies.
    pub fn new(
        spec: AgentSpec,
        hidden: &[usize],
        learning_rate: R,
        rng: &mut ChaCha8Rng,
    ) -> Result<Self> {
        let mut actor_sizes = vec![spec.actor_input_dim()];
        actor_sizes.extend_from_slice(hidden);
        actor_sizes.push(spec.action_dim);
        let mut critic_sizes = vec![spec.critic_input_dim()];
        critic_sizes.extend_from_slice(hidden);
        critic_sizes.push(1);

        let mut actor = Network::new(&actor_sizes, Activation::Relu, Activation::Tanh)?;
        actor.init(rng);
        let mut critic = Network::new(&critic_sizes, Activation::Relu, Activation::Identity)?;
        critic.init(rng);
        let target_actor = actor.clone();
        let target_critic = critic.clone();
        let actor_opt = Adam::new(actor.params().len(), learning_rate);
        let critic_opt = Adam::new(critic.params().len(), learning_rate);
        Ok(Agent { spec, actor, critic, target_actor, target_critic, actor_opt, critic_opt })
    }

    /// Rebuilds an agent around checkpointed networks.
    pub fn from_networks(
        spec: AgentSpec,
        actor: Network<R>,
        critic: Network<R>,
        target_actor: Network<R>,
        target_critic: Network<R>,
        learning_rate: R,
    ) -> Result<Self> {
        if actor.input_len() != spec.actor_input_dim()
            || actor.output_len() != spec.action_dim
            || critic.input_len() != spec.critic_input_dim()
            || critic.output_len() != 1
            || target_actor.sizes() != actor.sizes()
            || target_critic.sizes() != critic.sizes()
        {
            return Err(Error::contract("network shapes do not match the agent spec"));
        }
        let actor_opt = Adam::new(actor.params().len(), learning_rate);
        let critic_opt = Adam::new(critic.params().len(), learning_rate);
        Ok(Agent { spec, actor, critic, target_actor, target_critic, actor_opt, critic_opt })
    }

    /// Concatenates the local observation with neighbor actions in neighbor
    /// order.
    pub fn actor_input(&self, local_obs: &[R], recent_actions: &[Vec<R>]) -> Result<Vec<R>> {
        if local_obs.len() != self.spec.obs_dim {
            return Err(Error::contract("local observation width mismatch"));
        }
        if recent_actions.len() != self.spec.action_dims.len() {
            return Err(Error::contract("recent actions must cover every agent"));
        }
        let mut input = local_obs.to_vec();
        for &j in &self.spec.neighbor_ids {
            if recent_actions[j].len() != self.spec.action_dims[j] {
                return Err(Error::contract("neighbor action width mismatch"));
            }
            input.extend_from_slice(&recent_actions[j]);
        }
        Ok(input)
    }

    /// Concatenates the global state with every agent's action.
    pub fn critic_input(&self, global: &[R], actions: &[Vec<R>]) -> Result<Vec<R>> {
        if global.len() != self.spec.global_dim {
            return Err(Error::contract("global state width mismatch"));
        }
        if actions.len() != self.spec.action_dims.len() {
            return Err(Error::contract("actions must cover every agent"));
        }
        let mut input = global.to_vec();
        for (a, &dim) in actions.iter().zip(&self.spec.action_dims) {
            if a.len() != dim {
                return Err(Error::contract("action width mismatch"));
            }
            input.extend_from_slice(a);
        }
        Ok(input)
    }

    /// Actor mean plus the given noise vector, clipped to `[-1, 1]`.
    pub fn select_action_with(&self, actor_input: &[R], noise: &[R]) -> Result<Vec<R>> {
        let mean = self.actor.forward(actor_input)?;
        if noise.len() != mean.len() {
            return Err(Error::contract("noise width mismatch"));
        }
        Ok(mean
            .iter()
            .zip(noise)
            .map(|(&m, &n)| (m + n).min(R::one()).max(-R::one()))
            .collect())
    }

    /// Exploration action: actor mean plus one fresh noise draw.
    pub fn select_action(&self, actor_input: &[R], noise: &mut NoiseProcess<R>) -> Result<Vec<R>> {
        let draw = noise.sample(self.spec.action_dim);
        self.select_action_with(actor_input, &draw)
    }

    /// Mean squared error against the targets and its parameter gradient.
    fn critic_loss_and_grad(&self, inputs: &[Vec<R>], targets: &[R]) -> Result<(R, Vec<R>)> {
        let n = R::from_usize(inputs.len()).expect("batch fits");
        let mut loss = R::zero();
        let mut grad = vec![R::zero(); self.critic.params().len()];
        for (input, &y) in inputs.iter().zip(targets) {
            let q = self.critic.forward(input)?[0];
            let err = q - y;
            loss = loss + err * err;
            // d/dq of (q - y)^2 / n.
            let g = self.critic.backward(input, &[R::two() * err / n])?;
            for (a, b) in grad.iter_mut().zip(&g.params) {
                *a = *a + *b;
            }
        }
        Ok((loss / n, grad))
    }

    /// One descent step on the critic regression loss; returns the pre-step
    /// loss.
    pub fn update_critic(&mut self, inputs: &[Vec<R>], targets: &[R]) -> Result<R> {
        if inputs.is_empty() || inputs.len() != targets.len() {
            return Err(Error::contract("critic update needs a non-empty matched batch"));
        }
        let (loss, grad) = self.critic_loss_and_grad(inputs, targets)?;
        self.critic_opt.step(self.critic.params_mut(), &grad)?;
        Ok(loss)
    }

    /// One ascent step along the summed policy gradients.
    pub fn update_actor(&mut self, ascent_grad: &[R]) -> Result<()> {
        if ascent_grad.len() != self.actor.params().len() {
            return Err(Error::contract("actor gradient length mismatch"));
        }
        let descent: Vec<R> = ascent_grad.iter().map(|&g| -g).collect();
        self.actor_opt.step(self.actor.params_mut(), &descent)
    }

    /// Moves both targets toward the online networks by factor `tau`.
    pub fn soft_update_targets(&mut self, tau: R) -> Result<()> {
        self.target_actor.soft_update_from(&self.actor, tau)?;
        self.target_critic.soft_update_from(&self.critic, tau)
    }
}

/// Critic regression targets for one agent over a batch: next actions come
/// from every agent's target actor fed with next observations and the
/// tuple's actions as "most recent", evaluated by this agent's target
/// critic.
pub fn critic_targets<R: Real>(
    agents: &[Agent<R>],
    agent_index: usize,
    batch: &[&TransitionRecord<R>],
    gamma: R,
) -> Result<Vec<R>> {
    let agent = &agents[agent_index];
    let mut out = Vec::with_capacity(batch.len());
    for record in batch {
        let reward = record.rewards[agent_index];
        let shadow = record.shadow_values[agent_index];
        let y = if record.done {
            critic_target_value(reward, shadow, gamma, R::zero(), true)
        } else {
            let mut next_actions = Vec::with_capacity(agents.len());
            for other in agents {
                let input = other.actor_input(
                    &record.next_local_observations[other.spec.agent_index],
                    &record.actions,
                )?;
                next_actions.push(other.target_actor.forward(&input)?);
            }
            let input = agent.critic_input(&record.next_global_state, &next_actions)?;
            let next_q = agent.target_critic.forward(&input)?[0];
            critic_target_value(reward, shadow, gamma, next_q, false)
        };
        out.push(y);
    }
    Ok(out)
}

/// Deterministic policy gradient for one agent over a batch of replayed
/// transitions, differentiating the critic in this agent's action slot
/// while other agents' actions stay at their recorded values.
pub fn replay_actor_gradient<R: Real>(
    agents: &[Agent<R>],
    agent_index: usize,
    batch: &[&TransitionRecord<R>],
) -> Result<Vec<R>> {
    let agent = &agents[agent_index];
    let offset: usize =
        agent.spec.global_dim + agent.spec.action_dims[..agent_index].iter().sum::<usize>();
    let dim = agent.spec.action_dim;

    let inputs: Vec<Vec<R>> = batch
        .iter()
        .map(|r| agent.actor_input(&r.local_observations[agent_index], &r.prev_actions))
        .collect::<Result<_>>()?;

    let mut row = 0usize;
    dpg_gradient(&agent.actor, &inputs, |_, action| {
        let record = batch[row];
        row += 1;
        let mut actions = record.actions.clone();
        actions[agent_index] = action.to_vec();
        let critic_in = agent.critic_input(&record.global_state, &actions)?;
        let grads = agent.critic.backward(&critic_in, &[R::one()])?;
        Ok(grads.input[offset..offset + dim].to_vec())
    })
}
