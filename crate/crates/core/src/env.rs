//! Planar surrogate for multi-finger in-hand object rotation.
//!
//! A circular object rests at the center of a circular palm. Fingers are
//! short revolute chains mounted on a base circle; the wrist agent rotates
//! and squeezes that base circle. Physics is quasi-static: joints are
//! position-controlled through rate-limited deltas, contacts are detected by
//! fingertip penetration of the object boundary, the object spins with the
//! friction-weighted tangential fingertip motion at the contacts, and
//! unbalanced normal forces push the object across the palm until it leaves
//! the palm disc (a drop). Everything is a deterministic function of
//! (config, seed, actions).

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::angle::wrap_angle;
use crate::error::{Error, Result};
use crate::linalg::Vec2;
use crate::scalar::Real;

// ---------------------------------------------------------------------------
// Configuration
// ---------------------------------------------------------------------------

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ObjectShape {
    Block,
    Egg,
}

impl ObjectShape {
    /// Effective circular radius of the object profile, meters.
    pub fn radius_f64(self) -> f64 {
        match self {
            ObjectShape::Block => 0.045,
            ObjectShape::Egg => 0.032,
        }
    }
}

/// Full parameterization of the surrogate hand and object.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
#[serde(bound(serialize = "", deserialize = ""))]
pub struct EnvConfig<R: Real> {
    pub num_fingers: usize,
    pub wrist_enabled: bool,
    /// Joint counts per agent, wrist first when enabled.
    pub dofs_per_agent: Vec<usize>,
    pub object_shape: ObjectShape,
    pub palm_center: [R; 2],
    pub palm_radius: R,
    /// Tactile cells tiled uniformly over the fingertip patches.
    pub sensor_count: usize,
    pub time_step: R,
    pub max_episode_steps: usize,
    pub friction_coefficient: R,
    /// Steps of sub-2-contact grasp tolerated before the object counts as
    /// fallen.
    pub drop_grace_steps: usize,
    /// Total finger chain length, meters; links share it equally.
    pub finger_length: R,
    /// Finger base circle radius as a fraction of the palm radius.
    pub base_radius_factor: R,
    /// Base circle radius change per unit of the wrist squeeze joint.
    pub base_radial_span: R,
    /// Symmetric position limit of every finger joint, radians.
    pub joint_limit: R,
    /// Symmetric position limit of the wrist rotation joint, radians.
    pub wrist_rotation_limit: R,
    /// Maximum joint speed, rad/s; actions are deltas of at most
    /// `rate_limit * time_step`.
    pub rate_limit: R,
    /// Normal force per meter of fingertip penetration.
    pub contact_stiffness: R,
    /// Penetration depth activating one further tactile cell.
    pub cell_depth: R,
    /// Object center displacement per newton-second of unbalanced force.
    pub push_gain: R,
    /// Fingertip penetration established by reset posing.
    pub reset_penetration: R,
    /// Radius of the uniform disc the initial object center is drawn from.
    pub reset_jitter: R,
    /// Per-step standard deviation of the Egg's center noise, meters.
    pub egg_noise_std: R,
}

impl<R: Real> Default for EnvConfig<R> {
    fn default() -> Self {
        let f = R::from_f64_lossy;
        EnvConfig {
            num_fingers: 5,
            wrist_enabled: true,
            dofs_per_agent: vec![2, 5, 3, 3, 3, 4],
            object_shape: ObjectShape::Block,
            palm_center: [R::zero(), R::zero()],
            palm_radius: f(0.10),
            sensor_count: 92,
            time_step: f(0.04),
            max_episode_steps: 100,
            friction_coefficient: f(0.8),
            drop_grace_steps: 10,
            finger_length: f(0.07),
            base_radius_factor: f(0.95),
            base_radial_span: f(0.05),
            joint_limit: f(1.2),
            wrist_rotation_limit: f(1.5 * std::f64::consts::PI),
            rate_limit: f(2.0),
            contact_stiffness: f(200.0),
            cell_depth: f(0.0015),
            push_gain: f(0.05),
            reset_penetration: f(0.002),
            reset_jitter: f(0.005),
            egg_noise_std: f(0.0008),
        }
    }
}

impl<R: Real> EnvConfig<R> {
    /// Number of agents: the fingers plus the wrist when enabled.
    pub fn n_agents(&self) -> usize {
        self.num_fingers + usize::from(self.wrist_enabled)
    }

    /// Agent index of finger `f` (0-based finger numbering).
    fn finger_agent(&self, f: usize) -> usize {
        f + usize::from(self.wrist_enabled)
    }

    pub fn object_radius(&self) -> R {
        R::from_f64_lossy(self.object_shape.radius_f64())
    }

    pub fn validate(&self) -> Result<()> {
        if self.num_fingers == 0 {
            return Err(Error::config("at least one finger required"));
        }
        if self.dofs_per_agent.len() != self.n_agents() {
            return Err(Error::config(format!(
                "dofs_per_agent has {} entries for {} agents",
                self.dofs_per_agent.len(),
                self.n_agents()
            )));
        }
        if self.dofs_per_agent.iter().any(|&d| d == 0) {
            return Err(Error::config("every agent needs at least one joint"));
        }
        if self.sensor_count < self.num_fingers {
            return Err(Error::config("need at least one tactile cell per finger"));
        }
        let positive = [
            (self.palm_radius, "palm_radius"),
            (self.time_step, "time_step"),
            (self.friction_coefficient, "friction_coefficient"),
            (self.finger_length, "finger_length"),
            (self.base_radius_factor, "base_radius_factor"),
            (self.joint_limit, "joint_limit"),
            (self.wrist_rotation_limit, "wrist_rotation_limit"),
            (self.rate_limit, "rate_limit"),
            (self.contact_stiffness, "contact_stiffness"),
            (self.cell_depth, "cell_depth"),
            (self.reset_penetration, "reset_penetration"),
        ];
        for (v, name) in positive {
            if !(v > R::zero()) {
                return Err(Error::config(format!("{name} must be positive")));
            }
        }
        for (v, name) in [
            (self.base_radial_span, "base_radial_span"),
            (self.push_gain, "push_gain"),
            (self.reset_jitter, "reset_jitter"),
            (self.egg_noise_std, "egg_noise_std"),
        ] {
            if !(v >= R::zero()) {
                return Err(Error::config(format!("{name} must be non-negative")));
            }
        }
        if self.max_episode_steps == 0 {
            return Err(Error::config("max_episode_steps must be positive"));
        }
        if !(self.object_radius() < self.palm_radius) {
            return Err(Error::config("object must fit inside the palm"));
        }
        Ok(())
    }
}

// ---------------------------------------------------------------------------
// State, goal, contacts
// ---------------------------------------------------------------------------

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum HeightFlag {
    OnPalm,
    Fallen,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EnvState<R> {
    pub joint_positions: Vec<Vec<R>>,
    pub joint_velocities: Vec<Vec<R>>,
    /// Object orientation, wrapped to `(-pi, pi]`.
    pub object_angle: R,
    pub object_angular_velocity: R,
    pub object_center: [R; 2],
    pub height_flag: HeightFlag,
    pub step_index: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Goal<R> {
    /// Target orientation, wrapped to `(-pi, pi]`.
    pub target_angle: R,
}

/// One activated tactile cell: where it touches the object, the inward
/// direction its force acts along, and the force magnitude.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Contact<R> {
    pub position: [R; 2],
    pub normal: [R; 2],
    pub normal_force: R,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ContactReport<R> {
    pub contacts: Vec<Contact<R>>,
    pub sensor_activations: Vec<bool>,
    pub contact_count: usize,
}

impl<R> ContactReport<R> {
    pub fn empty(sensor_count: usize) -> Self {
        ContactReport {
            contacts: Vec::new(),
            sensor_activations: vec![false; sensor_count],
            contact_count: 0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Outcome {
    Success,
    Incomplete,
    Drop,
}

/// One recorded step: the post-step state and its contact report, plus the
/// episode goal so every line of a serialized trajectory is self-contained.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound(serialize = "", deserialize = ""))]
pub struct TrajectoryStep<R: Real> {
    pub step: usize,
    pub goal: Goal<R>,
    pub state: EnvState<R>,
    pub report: ContactReport<R>,
}

/// Serializes steps one JSON object per line.
pub fn trajectory_to_jsonl<R: Real + Serialize>(steps: &[TrajectoryStep<R>]) -> Result<String> {
    let mut out = String::new();
    for step in steps {
        out.push_str(&serde_json::to_string(step)?);
        out.push('\n');
    }
    Ok(out)
}

pub fn trajectory_from_jsonl<R: Real + for<'de> Deserialize<'de>>(
    text: &str,
) -> Result<Vec<TrajectoryStep<R>>> {
    text.lines()
        .filter(|l| !l.trim().is_empty())
        .map(|l| serde_json::from_str(l).map_err(Error::from))
        .collect()
}

// ---------------------------------------------------------------------------
// Environment
// ---------------------------------------------------------------------------

#[derive(Debug, Clone)]
pub struct PlanarHandEnv<R: Real> {
    config: EnvConfig<R>,
    state: EnvState<R>,
    goal: Goal<R>,
    rng: ChaCha8Rng,
    /// Consecutive steps with fewer than 2 activated cells.
    low_contact_streak: usize,
    terminated: bool,
}

pub struct StepResult<R: Real> {
    pub state: EnvState<R>,
    pub report: ContactReport<R>,
    pub terminated: bool,
}

impl<R: Real> PlanarHandEnv<R> {
    pub fn new(config: EnvConfig<R>) -> Result<Self> {
        config.validate()?;
        let n_agents = config.n_agents();
        let state = EnvState {
            joint_positions: config.dofs_per_agent.iter().map(|&d| vec![R::zero(); d]).collect(),
            joint_velocities: config.dofs_per_agent.iter().map(|&d| vec![R::zero(); d]).collect(),
            object_angle: R::zero(),
            object_angular_velocity: R::zero(),
            object_center: config.palm_center,
            height_flag: HeightFlag::OnPalm,
            step_index: 0,
        };
        debug_assert_eq!(state.joint_positions.len(), n_agents);
        Ok(PlanarHandEnv {
            config,
            state,
            goal: Goal { target_angle: R::zero() },
            rng: ChaCha8Rng::seed_from_u64(0),
            low_contact_streak: 0,
            terminated: false,
        })
    }

    pub fn config(&self) -> &EnvConfig<R> {
        &self.config
    }

    pub fn state(&self) -> &EnvState<R> {
        &self.state
    }

    pub fn goal(&self) -> Goal<R> {
        self.goal
    }

    pub fn n_agents(&self) -> usize {
        self.config.n_agents()
    }

    pub fn action_dims(&self) -> &[usize] {
        &self.config.dofs_per_agent
    }

    pub fn terminated(&self) -> bool {
        self.terminated
    }

    /// Seeds and reinitializes: object pose jittered near the palm center,
    /// goal uniform over the circle, fingers posed to touch the object at
    /// the configured reset penetration.
    pub fn reset(&mut self, seed: u64) -> (EnvState<R>, Goal<R>, ContactReport<R>) {
        self.rng = ChaCha8Rng::seed_from_u64(seed);
        self.low_contact_streak = 0;
        self.terminated = false;

        let angle0 = wrap_angle(R::from_f64_lossy(
            self.rng.random_range(-std::f64::consts::PI..std::f64::consts::PI),
        ));
        let goal = wrap_angle(R::from_f64_lossy(
            self.rng.random_range(-std::f64::consts::PI..std::f64::consts::PI),
        ));
        // Uniform over a disc of radius reset_jitter.
        let jitter_r = self.config.reset_jitter.to_f64_lossy()
            * self.rng.random_range(0.0..1.0f64).sqrt();
        let jitter_a = self.rng.random_range(-std::f64::consts::PI..std::f64::consts::PI);
        let center = [
            self.config.palm_center[0] + R::from_f64_lossy(jitter_r * jitter_a.cos()),
            self.config.palm_center[1] + R::from_f64_lossy(jitter_r * jitter_a.sin()),
        ];

        self.goal = Goal { target_angle: goal };
        self.state = EnvState {
            joint_positions: self
                .config
                .dofs_per_agent
                .iter()
                .map(|&d| vec![R::zero(); d])
                .collect(),
            joint_velocities: self
                .config
                .dofs_per_agent
                .iter()
                .map(|&d| vec![R::zero(); d])
                .collect(),
            object_angle: angle0,
            object_angular_velocity: R::zero(),
            object_center: center,
            height_flag: HeightFlag::OnPalm,
            step_index: 0,
        };
        self.pose_fingers_onto_object();
        let report = self.contact_report();
        (self.state.clone(), self.goal, report)
    }

    /// Solves each finger's first joint so the straight chain's tip lands
    /// exactly at the reset penetration depth on the object boundary.
    fn pose_fingers_onto_object(&mut self) {
        let mu = Vec2::new(self.state.object_center[0], self.state.object_center[1]);
        let target = self.config.object_radius() - self.config.reset_penetration;
        let len = self.config.finger_length;
        for f in 0..self.config.num_fingers {
            let (base, ref_angle) = self.finger_base(f);
            let to_obj = mu.sub(base);
            let dist = to_obj.norm();
            // Law of cosines: tip at |chain| = len from the base must land
            // at distance `target` from the object center.
            let cos_psi =
                (dist * dist + len * len - target * target) / (R::two() * dist * len);
            let psi = cos_psi.min(R::one()).max(-R::one()).acos();
            let toward = to_obj.y.atan2(to_obj.x);
            let q1 = wrap_angle(toward - ref_angle) + psi;
            let agent = self.config.finger_agent(f);
            self.state.joint_positions[agent][0] = q1;
            for q in self.state.joint_positions[agent].iter_mut().skip(1) {
                *q = R::zero();
            }
        }
    }

    /// Base position and chain reference angle of finger `f` under the
    /// current wrist joints.
    fn finger_base(&self, f: usize) -> (Vec2<R>, R) {
        let (rot, squeeze) = if self.config.wrist_enabled {
            let w = &self.state.joint_positions[0];
            (w[0], if w.len() > 1 { w[1] } else { R::zero() })
        } else {
            (R::zero(), R::zero())
        };
        let frac = R::from_usize(f).expect("finger index fits")
            / R::from_usize(self.config.num_fingers).expect("finger count fits");
        let beta = rot + R::two_pi() * frac;
        let radius = self.config.palm_radius
            * (self.config.base_radius_factor + self.config.base_radial_span * squeeze);
        let base = Vec2::new(
            self.config.palm_center[0] + radius * beta.cos(),
            self.config.palm_center[1] + radius * beta.sin(),
        );
        // Chains reference the inward direction toward the palm center.
        (base, beta + R::pi())
    }

    /// Fingertip position of finger `f` for the given joint state.
    fn fingertip_of(&self, f: usize, joints: &[Vec<R>]) -> Vec2<R> {
        let (base, ref_angle) = self.finger_base_with(f, joints);
        let agent = self.config.finger_agent(f);
        let q = &joints[agent];
        let link = self.config.finger_length
            / R::from_usize(q.len()).expect("joint count fits");
        let mut pos = base;
        let mut angle = ref_angle;
        for &qj in q {
            angle = angle + qj;
            pos = pos.add(Vec2::from_angle(angle).scale(link));
        }
        pos
    }

    fn finger_base_with(&self, f: usize, joints: &[Vec<R>]) -> (Vec2<R>, R) {
        let (rot, squeeze) = if self.config.wrist_enabled {
            let w = &joints[0];
            (w[0], if w.len() > 1 { w[1] } else { R::zero() })
        } else {
            (R::zero(), R::zero())
        };
        let frac = R::from_usize(f).expect("finger index fits")
            / R::from_usize(self.config.num_fingers).expect("finger count fits");
        let beta = rot + R::two_pi() * frac;
        let radius = self.config.palm_radius
            * (self.config.base_radius_factor + self.config.base_radial_span * squeeze);
        let base = Vec2::new(
            self.config.palm_center[0] + radius * beta.cos(),
            self.config.palm_center[1] + radius * beta.sin(),
        );
        (base, beta + R::pi())
    }

    pub fn fingertip_positions(&self) -> Vec<[R; 2]> {
        (0..self.config.num_fingers)
            .map(|f| {
                let p = self.fingertip_of(f, &self.state.joint_positions);
                [p.x, p.y]
            })
            .collect()
    }

    /// Per-fingertip physical contacts against the current object pose:
    /// penetration depth and inward normal at each touching fingertip.
    fn fingertip_contacts(&self, joints: &[Vec<R>]) -> Vec<(usize, Vec2<R>, R)> {
        let mu = Vec2::new(self.state.object_center[0], self.state.object_center[1]);
        let r_obj = self.config.object_radius();
        let mut out = Vec::new();
        for f in 0..self.config.num_fingers {
            let tip = self.fingertip_of(f, joints);
            let to_tip = tip.sub(mu);
            let dist = to_tip.norm();
            let pen = r_obj - dist;
            if pen > R::zero() && dist > R::zero() {
                out.push((f, to_tip.scale(R::one() / dist), pen));
            }
        }
        out
    }

    /// Builds the tactile report for the current state. Deeper penetration
    /// activates more adjacent cells of the finger's patch; each activated
    /// cell contributes one contact entry carrying an equal share of the
    /// fingertip force, spread along the object boundary at the contact
    /// depth.
    pub fn contact_report(&self) -> ContactReport<R> {
        let mu = Vec2::new(self.state.object_center[0], self.state.object_center[1]);
        let r_obj = self.config.object_radius();
        let n = self.config.num_fingers;
        let total_cells = self.config.sensor_count;
        let base_patch = total_cells / n;
        let extra = total_cells % n;

        let mut contacts = Vec::new();
        let mut activations = vec![false; total_cells];
        for (f, outward, pen) in self.fingertip_contacts(&self.state.joint_positions) {
            let patch = base_patch + usize::from(f < extra);
            let patch_start: usize = (0..f).map(|g| base_patch + usize::from(g < extra)).sum();
            let cells = 1 + (pen / self.config.cell_depth).to_f64_lossy().floor() as usize;
            let cells = cells.min(patch);
            let force = self.config.contact_stiffness * pen
                / R::from_usize(cells).expect("cell count fits");
            let contact_dist = r_obj - pen;
            let center_angle = outward.y.atan2(outward.x);
            // Angular pitch of one cell along the object boundary.
            let pitch = R::from_f64_lossy(0.004) / r_obj;
            let window_start = (patch - cells) / 2;
            for c in 0..cells {
                let offset = R::from_usize(c).expect("cell index fits")
                    - R::from_usize(cells - 1).expect("cell index fits") * R::half();
                let angle = center_angle + pitch * offset;
                let dir = Vec2::from_angle(angle);
                let pos = mu.add(dir.scale(contact_dist));
                contacts.push(Contact {
                    position: [pos.x, pos.y],
                    normal: [-dir.x, -dir.y],
                    normal_force: force,
                });
                activations[patch_start + window_start + c] = true;
            }
        }
        let contact_count = contacts.len();
        ContactReport { contacts, sensor_activations: activations, contact_count }
    }

    /// Advances one step. Actions are per-agent vectors in `[-1, 1]`,
    /// interpreted as rate-limited joint-position deltas.
    pub fn step(&mut self, actions: &[Vec<R>]) -> Result<StepResult<R>> {
        if self.terminated {
            return Err(Error::contract("step called on a terminated episode"));
        }
        if actions.len() != self.n_agents() {
            return Err(Error::contract(format!(
                "got {} action vectors for {} agents",
                actions.len(),
                self.n_agents()
            )));
        }
        for (i, a) in actions.iter().enumerate() {
            if a.len() != self.config.dofs_per_agent[i] {
                return Err(Error::contract(format!(
                    "agent {i} action has {} entries, needs {}",
                    a.len(),
                    self.config.dofs_per_agent[i]
                )));
            }
        }

        let dt = self.config.time_step;
        let max_delta = self.config.rate_limit * dt;
        let old_joints = self.state.joint_positions.clone();
        let old_tips: Vec<Vec2<R>> = (0..self.config.num_fingers)
            .map(|f| self.fingertip_of(f, &old_joints))
            .collect();

        // Joint update: clamp action to [-1, 1], scale to a delta, clamp the
        // resulting position to the joint's limit.
        for (i, a) in actions.iter().enumerate() {
            for (j, &raw) in a.iter().enumerate() {
                let clipped = raw.min(R::one()).max(-R::one());
                let limit = if self.config.wrist_enabled && i == 0 && j == 0 {
                    self.config.wrist_rotation_limit
                } else {
                    self.config.joint_limit
                };
                let q = self.state.joint_positions[i][j] + clipped * max_delta;
                let q = q.min(limit).max(-limit);
                self.state.joint_velocities[i][j] =
                    (q - self.state.joint_positions[i][j]) / dt;
                self.state.joint_positions[i][j] = q;
            }
        }

        let new_tips: Vec<Vec2<R>> = (0..self.config.num_fingers)
            .map(|f| self.fingertip_of(f, &self.state.joint_positions))
            .collect();

        // Object rotation: friction-scaled, force-weighted mean tangential
        // fingertip speed at the contacts, divided by the object radius.
        // Normalizing by total force keeps the rate independent of the
        // contact stiffness scale.
        let contacts = self.fingertip_contacts(&self.state.joint_positions);
        let mut force_sum = R::zero();
        let mut tangential_sum = R::zero();
        let mut push = Vec2::zero();
        for &(f, outward, pen) in &contacts {
            let force = self.config.contact_stiffness * pen;
            let vel = new_tips[f].sub(old_tips[f]).scale(R::one() / dt);
            let tangent = outward.rot90();
            tangential_sum = tangential_sum + force * vel.dot(tangent);
            force_sum = force_sum + force;
            // Fingertip pushes the object inward along -outward.
            push = push.add(outward.scale(-force));
        }
        let omega = if force_sum > R::from_f64_lossy(1e-9) {
            self.config.friction_coefficient * tangential_sum
                / (force_sum * self.config.object_radius())
        } else {
            R::zero()
        };
        self.state.object_angular_velocity = omega;
        self.state.object_angle = wrap_angle(self.state.object_angle + omega * dt);

        // Object translation: net unbalanced contact force plus, for the
        // egg, destabilizing center noise.
        let gain = self.config.push_gain * dt;
        let mut cx = self.state.object_center[0] + gain * push.x;
        let mut cy = self.state.object_center[1] + gain * push.y;
        if self.config.object_shape == ObjectShape::Egg {
            let std = self.config.egg_noise_std.to_f64_lossy();
            let nx: f64 = self.rng.sample(rand_distr::StandardNormal);
            let ny: f64 = self.rng.sample(rand_distr::StandardNormal);
            cx = cx + R::from_f64_lossy(nx * std);
            cy = cy + R::from_f64_lossy(ny * std);
        }
        self.state.object_center = [cx, cy];
        self.state.step_index += 1;

        // Report reflects the post-step pose.
        let report = self.contact_report();

        // Drop rules: palm exit ends immediately; a sub-2-contact grasp must
        // persist beyond the grace window.
        let off = Vec2::new(
            cx - self.config.palm_center[0],
            cy - self.config.palm_center[1],
        );
        if report.contact_count < 2 {
            self.low_contact_streak += 1;
        } else {
            self.low_contact_streak = 0;
        }
        if off.norm() > self.config.palm_radius
            || self.low_contact_streak > self.config.drop_grace_steps
        {
            self.state.height_flag = HeightFlag::Fallen;
        }

        self.terminated = self.state.height_flag == HeightFlag::Fallen
            || self.state.step_index >= self.config.max_episode_steps;
        Ok(StepResult { state: self.state.clone(), report, terminated: self.terminated })
    }
}

/// Success test shared by training, evaluation, and reward shaping:
/// wrapped angular error strictly below the threshold.
pub fn is_success<R: Real>(state: &EnvState<R>, goal: &Goal<R>, threshold: R) -> bool {
    wrap_angle(state.object_angle - goal.target_angle).abs() < threshold
}

/// Trial outcome per the evaluation taxonomy: reaching the goal at any step
/// wins, otherwise a fall is a drop, otherwise the trial is incomplete.
pub fn classify_outcome<R: Real>(
    trajectory: &[TrajectoryStep<R>],
    goal: &Goal<R>,
    test_threshold: R,
) -> Result<Outcome> {
    if trajectory.is_empty() {
        return Err(Error::contract("cannot classify an empty trajectory"));
    }
    if trajectory.iter().any(|s| is_success(&s.state, goal, test_threshold)) {
        return Ok(Outcome::Success);
    }
    if trajectory.iter().any(|s| s.state.height_flag == HeightFlag::Fallen) {
        return Ok(Outcome::Drop);
    }
    Ok(Outcome::Incomplete)
}

// ---------------------------------------------------------------------------
// Scripted controllers
// ---------------------------------------------------------------------------

/// Hand-written rotation controller: the wrist turns toward the goal and
/// squeezes gently; fingers hold position. Used as a solvability probe and
/// as a known-good policy in tests.
pub fn scripted_rotation_actions<R: Real>(
    config: &EnvConfig<R>,
    state: &EnvState<R>,
    goal: &Goal<R>,
) -> Vec<Vec<R>> {
    let mut actions: Vec<Vec<R>> = config.dofs_per_agent.iter().map(|&d| vec![R::zero(); d]).collect();
    if config.wrist_enabled {
        let err = wrap_angle(goal.target_angle - state.object_angle);
        // Gearing is below 1, so ask for more than the raw error rate.
        let gain = R::two() / (config.friction_coefficient);
        let desired = err * gain / (config.rate_limit * config.time_step);
        actions[0][0] = desired.min(R::one()).max(-R::one());
        if config.dofs_per_agent[0] > 1 {
            // Constant gentle squeeze keeps contact through the rotation.
            actions[0][1] = -R::from_f64_lossy(0.2);
        }
    }
    actions
}

/// Opens every finger and the wrist: contact is lost within a few steps and
/// the grace rule declares a drop.
pub fn retract_all_actions<R: Real>(config: &EnvConfig<R>) -> Vec<Vec<R>> {
    let mut actions: Vec<Vec<R>> =
        config.dofs_per_agent.iter().map(|&d| vec![R::zero(); d]).collect();
    let start = usize::from(config.wrist_enabled);
    if config.wrist_enabled && config.dofs_per_agent[0] > 1 {
        actions[0][1] = R::one();
    }
    for a in actions.iter_mut().skip(start) {
        a[0] = R::one();
    }
    actions
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use proptest::prelude::*;

    fn desk_config() -> EnvConfig<f64> {
        EnvConfig {
            num_fingers: 3,
            dofs_per_agent: vec![2, 3, 3, 3],
            max_episode_steps: 60,
            ..EnvConfig::default()
        }
    }

    fn collect_trajectory(
        env: &mut PlanarHandEnv<f64>,
        seed: u64,
        policy: impl Fn(&EnvConfig<f64>, &EnvState<f64>, &Goal<f64>) -> Vec<Vec<f64>>,
    ) -> (Vec<TrajectoryStep<f64>>, Goal<f64>) {
        let (state, goal, report) = env.reset(seed);
        let mut steps = vec![TrajectoryStep { step: 0, goal, state, report }];
        while !env.terminated() {
            let actions = policy(env.config(), env.state(), &goal);
            let r = env.step(&actions).unwrap();
            steps.push(TrajectoryStep { step: r.state.step_index, goal, state: r.state, report: r.report });
        }
        (steps, goal)
    }

    #[test]
    fn default_config_validates() {
        EnvConfig::<f64>::default().validate().unwrap();
        desk_config().validate().unwrap();
    }

    #[test]
    fn bad_configs_rejected() {
        let mut c = EnvConfig::<f64>::default();
        c.dofs_per_agent = vec![2, 5, 3];
        assert!(c.validate().is_err());

        let mut c = EnvConfig::<f64>::default();
        c.time_step = 0.0;
        assert!(c.validate().is_err());

        let mut c = EnvConfig::<f64>::default();
        c.num_fingers = 0;
        c.dofs_per_agent = vec![2];
        assert!(c.validate().is_err());

        let mut c = EnvConfig::<f64>::default();
        c.sensor_count = 3;
        assert!(c.validate().is_err());
    }

    #[test]
    fn reset_is_deterministic() {
        let mut a = PlanarHandEnv::new(EnvConfig::<f64>::default()).unwrap();
        let mut b = PlanarHandEnv::new(EnvConfig::<f64>::default()).unwrap();
        let (sa, ga, ra) = a.reset(7);
        let (sb, gb, rb) = b.reset(7);
        assert_eq!(sa, sb);
        assert_eq!(ga, gb);
        assert_eq!(ra, rb);
        // Re-resetting the same instance also reproduces bitwise.
        let (sa2, ga2, ra2) = a.reset(7);
        assert_eq!(sa, sa2);
        assert_eq!(ga, ga2);
        assert_eq!(ra, ra2);
        // A different seed changes the draw.
        let (_, gc, _) = a.reset(8);
        assert_ne!(ga.target_angle, gc.target_angle);
    }

    #[test]
    fn goals_span_the_circle() {
        let mut env = PlanarHandEnv::new(desk_config()).unwrap();
        let mut min = f64::INFINITY;
        let mut max = f64::NEG_INFINITY;
        for seed in 0..10_000u64 {
            let (_, goal, _) = env.reset(seed);
            let g = goal.target_angle;
            assert!(g > -std::f64::consts::PI && g <= std::f64::consts::PI);
            min = min.min(g);
            max = max.max(g);
        }
        assert!(min < -3.0, "goals should reach near -pi, saw min {min}");
        assert!(max > 3.0, "goals should reach near pi, saw max {max}");
    }

    #[test]
    fn reset_shapes_match_config() {
        let mut env = PlanarHandEnv::new(desk_config()).unwrap();
        let (state, _, report) = env.reset(0);
        assert_eq!(state.joint_positions.len(), 4);
        assert_eq!(state.joint_positions[0].len(), 2);
        for agent in 1..4 {
            assert_eq!(state.joint_positions[agent].len(), 3);
        }
        // All fingers start in contact at the reset penetration: 2 cells
        // each at the default cell depth.
        assert_eq!(report.contact_count, 6);
        assert_eq!(report.sensor_activations.iter().filter(|&&b| b).count(), 6);
    }

    #[test]
    fn reset_establishes_exact_penetration() {
        let mut env = PlanarHandEnv::new(EnvConfig::<f64>::default()).unwrap();
        let (state, _, _) = env.reset(3);
        let mu = Vec2::new(state.object_center[0], state.object_center[1]);
        let r_obj = env.config().object_radius();
        for tip in env.fingertip_positions() {
            let dist = Vec2::new(tip[0], tip[1]).sub(mu).norm();
            assert_relative_eq!(r_obj - dist, 0.002, epsilon = 1e-9);
        }
    }

    #[test]
    fn zero_actions_hold_a_centered_two_finger_grasp() {
        // Two antipodal fingers, object exactly centered: forces cancel, no
        // tangential motion, so the state is a fixed point.
        let config = EnvConfig::<f64> {
            num_fingers: 2,
            wrist_enabled: false,
            dofs_per_agent: vec![2, 2],
            sensor_count: 2,
            cell_depth: 0.01,
            reset_jitter: 0.0,
            ..EnvConfig::default()
        };
        let mut env = PlanarHandEnv::new(config).unwrap();
        let (state0, _, report0) = env.reset(5);
        assert_eq!(report0.contact_count, 2);
        let zero = vec![vec![0.0, 0.0], vec![0.0, 0.0]];
        for _ in 0..20 {
            let r = env.step(&zero).unwrap();
            assert_eq!(r.state.object_angle.to_bits(), state0.object_angle.to_bits());
            assert_relative_eq!(r.state.object_center[0], state0.object_center[0], epsilon = 1e-12);
            assert_relative_eq!(r.state.object_center[1], state0.object_center[1], epsilon = 1e-12);
            assert_eq!(r.report.contact_count, 2);
            assert!(!r.terminated);
        }
    }

    #[test]
    fn retracting_drops_the_object() {
        let mut env = PlanarHandEnv::new(desk_config()).unwrap();
        env.reset(11);
        let retract = retract_all_actions(env.config());
        let mut fell = false;
        for _ in 0..desk_config().max_episode_steps {
            let r = env.step(&retract).unwrap();
            if r.terminated {
                fell = r.state.height_flag == HeightFlag::Fallen;
                break;
            }
        }
        assert!(fell, "retracting all fingers must end in a fall");
    }

    #[test]
    fn drop_is_terminal_and_sticky() {
        let mut env = PlanarHandEnv::new(desk_config()).unwrap();
        env.reset(11);
        let retract = retract_all_actions(env.config());
        loop {
            let r = env.step(&retract).unwrap();
            if r.terminated {
                assert_eq!(r.state.height_flag, HeightFlag::Fallen);
                break;
            }
        }
        // Terminated episodes refuse further steps.
        assert!(env.step(&retract).is_err());
        assert_eq!(env.state().height_flag, HeightFlag::Fallen);
    }

    /// Independent kinematics oracle: a two-finger pinwheel with both tips
    /// moving counterclockwise must rotate the object counterclockwise, and
    /// the angle trace must match a hand-rolled scalar recomputation.
    #[test]
    fn rotation_sign_matches_step_by_step_oracle() {
        let config = EnvConfig::<f64> {
            num_fingers: 2,
            wrist_enabled: false,
            dofs_per_agent: vec![1, 1],
            sensor_count: 2,
            cell_depth: 0.01,
            reset_jitter: 0.0,
            egg_noise_std: 0.0,
            ..EnvConfig::default()
        };
        let mut env = PlanarHandEnv::new(config.clone()).unwrap();
        let (state0, _, _) = env.reset(2);
        let z0 = state0.object_angle;

        // Oracle state: the scalar joint angle of each single-link finger.
        let mut oracle_q: Vec<f64> = (0..2).map(|f| state0.joint_positions[f][0]).collect();
        let mut oracle_z = z0;
        let dt = config.time_step;
        let rate = config.rate_limit;
        let r_obj = config.object_shape.radius_f64();
        let base_r = config.palm_radius * config.base_radius_factor;
        let link = config.finger_length;
        let tip_of = |f: usize, q: f64| -> (f64, f64) {
            let beta = 2.0 * std::f64::consts::PI * (f as f64) / 2.0;
            let bx = base_r * beta.cos();
            let by = base_r * beta.sin();
            let ang = beta + std::f64::consts::PI + q;
            (bx + link * ang.cos(), by + link * ang.sin())
        };

        // Joint motion toward the radial pose deepens contact while sweeping
        // both tips the same way around the object (the pose is
        // rotationally symmetric), so the grasp persists while rotating.
        let action = vec![vec![-0.4], vec![-0.4]];
        for _ in 0..5 {
            let old_tips: Vec<(f64, f64)> = (0..2).map(|f| tip_of(f, oracle_q[f])).collect();
            for q in oracle_q.iter_mut() {
                *q = (*q - 0.4 * rate * dt).clamp(-config.joint_limit, config.joint_limit);
            }
            let new_tips: Vec<(f64, f64)> = (0..2).map(|f| tip_of(f, oracle_q[f])).collect();
            let mut f_sum = 0.0;
            let mut t_sum = 0.0;
            for f in 0..2 {
                let (tx, ty) = new_tips[f];
                let dist = (tx * tx + ty * ty).sqrt();
                let pen = r_obj - dist;
                if pen > 0.0 {
                    let force = config.contact_stiffness * pen;
                    let (ox, oy) = (tx / dist, ty / dist);
                    let (vx, vy) =
                        ((new_tips[f].0 - old_tips[f].0) / dt, (new_tips[f].1 - old_tips[f].1) / dt);
                    // Tangent is the outward normal rotated 90 degrees CCW.
                    t_sum += force * (vx * -oy + vy * ox);
                    f_sum += force;
                }
            }
            let omega = if f_sum > 1e-9 {
                config.friction_coefficient * t_sum / (f_sum * r_obj)
            } else {
                0.0
            };
            oracle_z = wrap_angle(oracle_z + omega * dt);

            let r = env.step(&action).unwrap();
            assert_relative_eq!(r.state.object_angle, oracle_z, epsilon = 1e-9);
        }
        // The object moved, and both computations agree on the direction.
        assert_ne!(oracle_z, z0);
        assert_eq!((oracle_z - z0) > 0.0, (env.state().object_angle - z0) > 0.0);
    }

    #[test]
    fn wrist_rotation_rotates_the_object() {
        let mut env = PlanarHandEnv::new(desk_config()).unwrap();
        env.reset(4);
        let z0 = env.state().object_angle;
        let mut actions: Vec<Vec<f64>> = vec![vec![0.0; 2], vec![0.0; 3], vec![0.0; 3], vec![0.0; 3]];
        actions[0][0] = 1.0;
        actions[0][1] = -0.2;
        let mut unwrapped = 0.0;
        let mut prev = z0;
        for _ in 0..10 {
            let r = env.step(&actions).unwrap();
            unwrapped += wrap_angle(r.state.object_angle - prev);
            prev = r.state.object_angle;
            assert!(!r.terminated);
        }
        // Ten steps at full rate with ~0.76 gearing: roughly 0.6 rad.
        assert!(unwrapped > 0.3, "wrist rotation should carry the object, got {unwrapped}");
    }

    #[test]
    fn angle_stays_wrapped_along_trajectories() {
        let mut env = PlanarHandEnv::new(desk_config()).unwrap();
        for seed in [0u64, 9, 77] {
            let (steps, _) =
                collect_trajectory(&mut env, seed, |c, s, g| scripted_rotation_actions(c, s, g));
            for s in &steps {
                assert!(s.state.object_angle > -std::f64::consts::PI);
                assert!(s.state.object_angle <= std::f64::consts::PI);
            }
        }
    }

    #[test]
    fn step_indices_increase_by_one() {
        let mut env = PlanarHandEnv::new(desk_config()).unwrap();
        let (steps, _) = collect_trajectory(&mut env, 13, |c, s, g| scripted_rotation_actions(c, s, g));
        for (i, s) in steps.iter().enumerate() {
            assert_eq!(s.state.step_index, i);
        }
    }

    #[test]
    fn contact_count_matches_sensor_activations() {
        let mut env = PlanarHandEnv::new(desk_config()).unwrap();
        let (steps, _) = collect_trajectory(&mut env, 21, |c, s, g| scripted_rotation_actions(c, s, g));
        for s in &steps {
            let lit = s.report.sensor_activations.iter().filter(|&&b| b).count();
            assert_eq!(s.report.contact_count, lit);
            assert_eq!(s.report.contacts.len(), s.report.contact_count);
            for c in &s.report.contacts {
                assert!(c.normal_force > 0.0);
                let n = Vec2::new(c.normal[0], c.normal[1]).norm();
                assert_relative_eq!(n, 1.0, epsilon = 1e-9);
            }
        }
    }

    #[test]
    fn scripted_controller_reaches_goals() {
        let mut env = PlanarHandEnv::new(desk_config()).unwrap();
        let mut successes = 0;
        let trials = 20;
        for seed in 0..trials {
            let (steps, goal) =
                collect_trajectory(&mut env, 1000 + seed, |c, s, g| scripted_rotation_actions(c, s, g));
            if classify_outcome(&steps, &goal, 0.1).unwrap() == Outcome::Success {
                successes += 1;
            }
        }
        assert!(
            successes >= trials * 8 / 10,
            "scripted rotation succeeded only {successes}/{trials}"
        );
    }

    #[test]
    fn identical_seeds_give_bitwise_identical_trajectories() {
        let run = |seed: u64| -> Vec<TrajectoryStep<f64>> {
            let mut env = PlanarHandEnv::new(EnvConfig::<f64> {
                object_shape: ObjectShape::Egg,
                ..desk_config()
            })
            .unwrap();
            let (steps, _) =
                collect_trajectory(&mut env, seed, |c, s, g| scripted_rotation_actions(c, s, g));
            steps
        };
        let a = run(42);
        let b = run(42);
        assert_eq!(a.len(), b.len());
        for (x, y) in a.iter().zip(&b) {
            assert_eq!(x.state.object_angle.to_bits(), y.state.object_angle.to_bits());
            assert_eq!(x.state.object_center[0].to_bits(), y.state.object_center[0].to_bits());
            assert_eq!(x.report.contact_count, y.report.contact_count);
        }
    }

    #[test]
    fn success_uses_wrapped_distance() {
        let mut state = EnvState {
            joint_positions: vec![],
            joint_velocities: vec![],
            object_angle: 0.50,
            object_angular_velocity: 0.0,
            object_center: [0.0, 0.0],
            height_flag: HeightFlag::OnPalm,
            step_index: 0,
        };
        let goal = Goal { target_angle: 0.42 };
        assert!(is_success(&state, &goal, 0.1));
        state.object_angle = 3.0;
        let seam_goal = Goal { target_angle: -3.0 };
        assert!(is_success(&state, &seam_goal, 0.4));
        assert!(!is_success(&state, &seam_goal, 0.2));
        state.object_angle = -3.0;
        assert!(is_success(&state, &Goal { target_angle: -3.0 }, 1e-9));
    }

    #[test]
    fn outcome_classification_precedence() {
        let mk_step = |angle: f64, flag: HeightFlag, t: usize| TrajectoryStep {
            step: t,
            goal: Goal { target_angle: 0.0 },
            state: EnvState {
                joint_positions: vec![],
                joint_velocities: vec![],
                object_angle: angle,
                object_angular_velocity: 0.0,
                object_center: [0.0, 0.0],
                height_flag: flag,
                step_index: t,
            },
            report: ContactReport::empty(4),
        };
        let goal = Goal { target_angle: 0.0 };

        // Passing through the goal then falling still counts as success.
        let through = vec![
            mk_step(1.0, HeightFlag::OnPalm, 0),
            mk_step(0.2, HeightFlag::OnPalm, 1),
            mk_step(1.5, HeightFlag::Fallen, 2),
        ];
        assert_eq!(classify_outcome(&through, &goal, 0.4).unwrap(), Outcome::Success);

        let dropped = vec![
            mk_step(1.0, HeightFlag::OnPalm, 0),
            mk_step(1.2, HeightFlag::Fallen, 1),
        ];
        assert_eq!(classify_outcome(&dropped, &goal, 0.4).unwrap(), Outcome::Drop);

        let stuck = vec![mk_step(1.0, HeightFlag::OnPalm, 0), mk_step(1.1, HeightFlag::OnPalm, 1)];
        assert_eq!(classify_outcome(&stuck, &goal, 0.4).unwrap(), Outcome::Incomplete);

        assert!(classify_outcome::<f64>(&[], &goal, 0.4).is_err());
    }

    #[test]
    fn action_shape_mismatches_error() {
        let mut env = PlanarHandEnv::new(desk_config()).unwrap();
        env.reset(0);
        assert!(env.step(&vec![vec![0.0; 2]]).is_err());
        let mut wrong = vec![vec![0.0; 2], vec![0.0; 3], vec![0.0; 3], vec![0.0; 3]];
        wrong[2] = vec![0.0; 5];
        assert!(env.step(&wrong).is_err());
    }

    #[test]
    fn trajectory_jsonl_round_trips() {
        let mut env = PlanarHandEnv::new(desk_config()).unwrap();
        let (steps, _) = collect_trajectory(&mut env, 3, |c, s, g| scripted_rotation_actions(c, s, g));
        let text = trajectory_to_jsonl(&steps).unwrap();
        assert_eq!(text.lines().count(), steps.len());
        let parsed: Vec<TrajectoryStep<f64>> = trajectory_from_jsonl(&text).unwrap();
        assert_eq!(parsed.len(), steps.len());
        assert_eq!(parsed[0].goal, steps[0].goal);
        assert_eq!(parsed.last().unwrap().state.step_index, steps.last().unwrap().state.step_index);
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(24))]

        #[test]
        fn random_action_episodes_respect_invariants(seed in 0u64..5000) {
            let mut env = PlanarHandEnv::new(desk_config()).unwrap();
            let (_, _, _) = env.reset(seed);
            let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0xabcd);
            let mut fallen_seen = false;
            while !env.terminated() {
                let actions: Vec<Vec<f64>> = env
                    .action_dims()
                    .iter()
                    .map(|&d| (0..d).map(|_| rng.random_range(-1.0..1.0)).collect())
                    .collect();
                let r = env.step(&actions).unwrap();
                // Wrapped angle.
                prop_assert!(r.state.object_angle > -std::f64::consts::PI);
                prop_assert!(r.state.object_angle <= std::f64::consts::PI);
                // Fallen implies terminated, and only at the end.
                if r.state.height_flag == HeightFlag::Fallen {
                    fallen_seen = true;
                    prop_assert!(r.terminated);
                }
                // Contact consistency.
                let lit = r.report.sensor_activations.iter().filter(|&&b| b).count();
                prop_assert_eq!(r.report.contact_count, lit);
            }
            let _ = fallen_seen;
        }
    }
}
