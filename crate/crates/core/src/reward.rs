//! Task reward, occupancy-based shadow rewards, and per-agent composition.
//!
//! The task term penalizes wrapped angular distance to the goal. The two
//! shadow terms read the occupancy table: one measures time spent with the
//! object outside a safe disc around the palm center, the other time spent
//! with too few contact points. Both enter as `-ln(mass + offset)`, so they
//! are largest when the undesirable set is never visited.
//!
//! Occupancy feature convention: the table's feature 0 is the object-center
//! distance from the palm center and feature 1 is the contact count; the
//! indices are carried in [`RewardWeights`] so alternative layouts stay
//! possible.

use serde::{Deserialize, Serialize};

use crate::angle::{angular_distance, wrap_angle};
use crate::error::Result;
use crate::occupancy::OccupancyTable;
use crate::scalar::Real;

// ---------------------------------------------------------------------------
// Parameter types
// ---------------------------------------------------------------------------

/// Disc around the palm center inside which the object is considered safe.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SafeRegionSpec<R> {
    /// Palm center, meters. The occupancy feature extractor must measure
    /// object offset from this same point.
    pub center: [R; 2],
    /// Safe radius, meters; must be positive.
    pub radius: R,
}

/// Scalers and thresholds shared by all reward compositions.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RewardWeights<R> {
    /// Shadow-reward scaler applied on top of the task reward.
    pub alpha: R,
    /// Additive offset inside the log; keeps the argument positive.
    pub log_offset: R,
    /// Contact count below which occupancy counts as low-contact.
    pub contact_threshold: u32,
    /// Reproduce the printed formulas exactly (safe-set and high-contact
    /// masses inside the log) instead of the intent-preserving default.
    pub literal_sign_mode: bool,
    /// Occupancy feature index of the object-offset distance.
    pub offset_feature: usize,
    /// Occupancy feature index of the contact count.
    pub contact_feature: usize,
}

impl<R: Real> Default for RewardWeights<R> {
    fn default() -> Self {
        RewardWeights {
            alpha: R::from_f64_lossy(0.1),
            log_offset: R::from_f64_lossy(0.1),
            contact_threshold: 10,
            literal_sign_mode: false,
            offset_feature: 0,
            contact_feature: 1,
        }
    }
}

impl<R: Real> RewardWeights<R> {
    pub fn validate(&self) -> Result<()> {
        if !(self.alpha >= R::zero()) {
            return Err(crate::Error::config("shadow scaler alpha must be >= 0"));
        }
        if !(self.log_offset > R::zero()) {
            return Err(crate::Error::config("log offset must be positive"));
        }
        Ok(())
    }
}

/// Which reward components an agent receives, determined by its position in
/// the hand: the wrist sees everything, edge fingers (first and last) add
/// the safe-region term, inner fingers add the contact term.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct AgentRewardProfile {
    pub task: bool,
    pub safe_region: bool,
    pub contact: bool,
}

impl AgentRewardProfile {
    pub fn wrist() -> Self {
        AgentRewardProfile { task: true, safe_region: true, contact: true }
    }

    pub fn edge_finger() -> Self {
        AgentRewardProfile { task: true, safe_region: true, contact: false }
    }

    pub fn inner_finger() -> Self {
        AgentRewardProfile { task: true, safe_region: false, contact: true }
    }

    /// Profile of agent `index` in a hand of `n_agents` total agents.
    /// Agent 0 is the wrist; agents 1 and n-1 are the edge fingers.
    pub fn for_position(index: usize, n_agents: usize) -> Self {
        if index == 0 {
            Self::wrist()
        } else if index == 1 || index + 1 == n_agents {
            Self::edge_finger()
        } else {
            Self::inner_finger()
        }
    }
}

// ---------------------------------------------------------------------------
// Reward components
// ---------------------------------------------------------------------------

/// Task reward: negative wrapped angular distance from orientation `z_t` to
/// goal `z_g`. Zero exactly at the goal, minimum -pi.
pub fn task_reward<R: Real>(z_t: R, z_g: R) -> R {
    -angular_distance(z_g, z_t).abs()
}

/// Safe-region shadow reward.
///
/// Default mode: `-ln(mass(offset > radius) + log_offset)`, maximal when the
/// object never leaves the safe disc. Literal mode: `-ln(mass(offset <=
/// radius) + log_offset)`, the formula as printed.
pub fn safe_region_reward<R: Real>(
    table: &OccupancyTable<R>,
    region: &SafeRegionSpec<R>,
    weights: &RewardWeights<R>,
) -> R {
    let idx = weights.offset_feature;
    let mass = if weights.literal_sign_mode {
        table.mass_where(|f| f[idx] <= region.radius)
    } else {
        table.mass_where(|f| f[idx] > region.radius)
    };
    -(mass + weights.log_offset).ln()
}

/// Contact shadow reward.
///
/// Default mode: `-ln(mass(contacts < threshold) + log_offset)`, maximal
/// when contact count stays high. Literal mode uses the high-contact set
/// `contacts > threshold` as printed.
pub fn contact_reward<R: Real>(table: &OccupancyTable<R>, weights: &RewardWeights<R>) -> R {
    let idx = weights.contact_feature;
    let tau = R::from_u32(weights.contact_threshold).expect("threshold fits");
    let mass = if weights.literal_sign_mode {
        table.mass_where(|f| f[idx] > tau)
    } else {
        table.mass_where(|f| f[idx] < tau)
    };
    -(mass + weights.log_offset).ln()
}

/// Sums exactly the components the profile declares.
pub fn compose<R: Real>(profile: AgentRewardProfile, r1: R, r2: R, r3: R) -> R {
    let mut total = R::zero();
    if profile.task {
        total = total + r1;
    }
    if profile.safe_region {
        total = total + r2;
    }
    if profile.contact {
        total = total + r3;
    }
    total
}

/// Shadow-only composition: the occupancy terms the profile declares,
/// excluding the per-step task reward. This is the `F` added to critic
/// targets with weight alpha.
pub fn compose_shadow<R: Real>(profile: AgentRewardProfile, r2: R, r3: R) -> R {
    compose(
        AgentRewardProfile { task: false, ..profile },
        R::zero(),
        r2,
        r3,
    )
}

/// Per-step contribution to an agent's total objective:
/// `gamma_t * r_task + alpha * f_shadow`.
pub fn total_reward<R: Real>(r_task: R, f_shadow: R, weights: &RewardWeights<R>, gamma_t: R) -> R {
    gamma_t * r_task + weights.alpha * f_shadow
}

/// Sparse ablation reward: 0 within `threshold` of the goal, -1 otherwise.
/// Uses the same wrapped-distance test as environment success.
pub fn sparse_reward<R: Real>(z_t: R, z_g: R, threshold: R) -> R {
    if wrap_angle(z_t - z_g).abs() <= threshold {
        R::zero()
    } else {
        -R::one()
    }
}
