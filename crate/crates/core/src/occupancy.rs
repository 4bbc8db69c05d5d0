//! Discounted state-action occupancy estimation over a sliding episode
//! window.
//!
//! Each recorded episode contributes `gamma^t` to the bin holding its step-t
//! feature vector. The table aggregate is the mean over the retained
//! episodes; normalized queries divide by the total retained mass, so set
//! probabilities stay in `[0, 1]` regardless of episode length or window
//! fill. Aggregation always replays episodes oldest-first over sorted bin
//! keys, so results are bit-identical across runs and after eviction.

use std::collections::{BTreeMap, VecDeque};

use serde::{Deserialize, Serialize};

use crate::angle::wrap_angle;
use crate::error::{Error, Result};
use crate::scalar::Real;

// ---------------------------------------------------------------------------
// Feature binning
// ---------------------------------------------------------------------------

/// How one feature dimension is discretized.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum FeatureKind<R> {
    /// Uniform bins over `[lo, hi]`; values outside are clamped.
    Linear { lo: R, hi: R, bins: u32 },
    /// Uniform bins over the wrapped circle `(-pi, pi]`.
    Angular { bins: u32 },
    /// Integers `0..=max`, one bin each; values are rounded and clamped.
    Count { max: u32 },
    /// Two bins split at 0.5.
    Binary,
}

impl<R: Real> FeatureKind<R> {
    pub fn bins(&self) -> u32 {
        match self {
            FeatureKind::Linear { bins, .. } => *bins,
            FeatureKind::Angular { bins } => *bins,
            FeatureKind::Count { max } => *max + 1,
            FeatureKind::Binary => 2,
        }
    }

    fn index_of(&self, value: R) -> u32 {
        match self {
            FeatureKind::Linear { lo, hi, bins } => {
                let v = value.max(*lo).min(*hi);
                let frac = (v - *lo) / (*hi - *lo);
                let idx = (frac * R::from_u32(*bins).expect("bins fits")).floor();
                (idx.to_f64_lossy() as u32).min(bins - 1)
            }
            FeatureKind::Angular { bins } => {
                let w = wrap_angle(value);
                let frac = (w + R::pi()) / R::two_pi();
                let idx = (frac * R::from_u32(*bins).expect("bins fits")).floor();
                (idx.to_f64_lossy() as u32).min(bins - 1)
            }
            FeatureKind::Count { max } => {
                let v = value.round().to_f64_lossy();
                if v <= 0.0 {
                    0
                } else {
                    (v as u32).min(*max)
                }
            }
            FeatureKind::Binary => {
                if value >= R::half() {
                    1
                } else {
                    0
                }
            }
        }
    }

    /// Representative value of bin `idx`, used by set predicates.
    fn center(&self, idx: u32) -> R {
        match self {
            FeatureKind::Linear { lo, hi, bins } => {
                let width = (*hi - *lo) / R::from_u32(*bins).expect("bins fits");
                *lo + width * (R::from_u32(idx).expect("idx fits") + R::half())
            }
            FeatureKind::Angular { bins } => {
                let width = R::two_pi() / R::from_u32(*bins).expect("bins fits");
                -R::pi() + width * (R::from_u32(idx).expect("idx fits") + R::half())
            }
            FeatureKind::Count { .. } | FeatureKind::Binary => {
                R::from_u32(idx).expect("idx fits")
            }
        }
    }

    fn validate(&self) -> Result<()> {
        match self {
            FeatureKind::Linear { lo, hi, bins } => {
                if *bins == 0 {
                    return Err(Error::config("linear feature needs at least one bin"));
                }
                if !(*hi > *lo) {
                    return Err(Error::config("linear feature needs hi > lo"));
                }
            }
            FeatureKind::Angular { bins } => {
                if *bins == 0 {
                    return Err(Error::config("angular feature needs at least one bin"));
                }
            }
            FeatureKind::Count { .. } | FeatureKind::Binary => {}
        }
        Ok(())
    }
}

/// Discretization of a full feature vector into a single flat bin key.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BinningSpec<R> {
    pub features: Vec<FeatureKind<R>>,
}

impl<R: Real> BinningSpec<R> {
    pub fn new(features: Vec<FeatureKind<R>>) -> Result<Self> {
        let spec = BinningSpec { features };
        spec.validate()?;
        Ok(spec)
    }

    pub fn validate(&self) -> Result<()> {
        if self.features.is_empty() {
            return Err(Error::config("binning spec needs at least one feature"));
        }
        for f in &self.features {
            f.validate()?;
        }
        let mut total: u128 = 1;
        for f in &self.features {
            total = total.saturating_mul(f.bins() as u128);
        }
        if total > u64::MAX as u128 {
            return Err(Error::config("bin space does not fit in a 64-bit key"));
        }
        Ok(())
    }

    pub fn n_features(&self) -> usize {
        self.features.len()
    }

    /// Mixed-radix flat key of the bin containing `features`.
    pub fn key_of(&self, features: &[R]) -> Result<u64> {
        if features.len() != self.features.len() {
            return Err(Error::contract(format!(
                "feature vector length {} does not match spec ({})",
                features.len(),
                self.features.len()
            )));
        }
        let mut key: u64 = 0;
        let mut stride: u64 = 1;
        for (kind, &v) in self.features.iter().zip(features) {
            key += stride * kind.index_of(v) as u64;
            stride *= kind.bins() as u64;
        }
        Ok(key)
    }

    /// Per-feature bin indices of a flat key.
    pub fn unflatten(&self, key: u64) -> Vec<u32> {
        let mut rest = key;
        self.features
            .iter()
            .map(|kind| {
                let b = kind.bins() as u64;
                let idx = (rest % b) as u32;
                rest /= b;
                idx
            })
            .collect()
    }

    /// Bin-center feature vector of a flat key.
    pub fn centers(&self, key: u64) -> Vec<R> {
        self.unflatten(key)
            .iter()
            .zip(&self.features)
            .map(|(&idx, kind)| kind.center(idx))
            .collect()
    }
}

// ---------------------------------------------------------------------------
// Occupancy table
// ---------------------------------------------------------------------------

/// Checkpointable contents of an [`OccupancyTable`]: per-episode sparse
/// discounted visitation, keys sorted, values widened to `f64`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OccupancySnapshot {
    pub episodes: Vec<Vec<(u64, f64)>>,
}

#[derive(Debug, Clone)]
pub struct OccupancyTable<R> {
    spec: BinningSpec<R>,
    gamma: R,
    window: usize,
    episodes: VecDeque<BTreeMap<u64, R>>,
    aggregate: BTreeMap<u64, R>,
    total: R,
}

impl<R: Real> OccupancyTable<R> {
    pub fn new(spec: BinningSpec<R>, gamma: R, window: usize) -> Result<Self> {
        spec.validate()?;
        if !(gamma >= R::zero() && gamma < R::one()) {
            return Err(Error::config("occupancy discount must lie in [0, 1)"));
        }
        if window == 0 {
            return Err(Error::config("occupancy window must hold at least one episode"));
        }
        Ok(OccupancyTable {
            spec,
            gamma,
            window,
            episodes: VecDeque::new(),
            aggregate: BTreeMap::new(),
            total: R::zero(),
        })
    }

    pub fn spec(&self) -> &BinningSpec<R> {
        &self.spec
    }

    pub fn gamma(&self) -> R {
        self.gamma
    }

    pub fn window(&self) -> usize {
        self.window
    }

    pub fn episode_count(&self) -> usize {
        self.episodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.episodes.is_empty()
    }

    /// Records one episode as step-ordered feature vectors; step `t` adds
    /// `gamma^t` to its bin. Evicts the oldest episode beyond the window.
    pub fn add_episode(&mut self, steps: &[Vec<R>]) -> Result<()> {
        if steps.is_empty() {
            return Err(Error::contract("episode must contain at least one step"));
        }
        let mut ep: BTreeMap<u64, R> = BTreeMap::new();
        let mut weight = R::one();
        for step in steps {
            let key = self.spec.key_of(step)?;
            let slot = ep.entry(key).or_insert_with(R::zero);
            *slot = *slot + weight;
            weight = weight * self.gamma;
        }
        self.episodes.push_back(ep);
        while self.episodes.len() > self.window {
            self.episodes.pop_front();
        }
        self.rebuild();
        Ok(())
    }

    /// Recomputes the aggregate from retained episodes, oldest first, keys
    /// ascending. Full replay keeps eviction from leaving floating-point
    /// residue in the aggregate.
    fn rebuild(&mut self) {
        self.aggregate.clear();
        for ep in &self.episodes {
            for (&key, &mass) in ep {
                let slot = self.aggregate.entry(key).or_insert_with(R::zero);
                *slot = *slot + mass;
            }
        }
        let n = R::from_usize(self.episodes.len().max(1)).expect("episode count fits");
        for v in self.aggregate.values_mut() {
            *v = *v / n;
        }
        self.total = self.aggregate.values().copied().sum();
    }

    /// Mean discounted visitation mass summed over all bins.
    pub fn total_mass(&self) -> R {
        self.total
    }

    /// Raw (unnormalized) mean discounted mass of the bin holding `features`.
    pub fn raw_mass_at(&self, features: &[R]) -> Result<R> {
        let key = self.spec.key_of(features)?;
        Ok(self.aggregate.get(&key).copied().unwrap_or_else(R::zero))
    }

    /// Normalized probability of the bin holding `features`; 0 on an empty
    /// table.
    pub fn mass_at(&self, features: &[R]) -> Result<R> {
        if self.total == R::zero() {
            return Ok(R::zero());
        }
        Ok(self.raw_mass_at(features)? / self.total)
    }

    /// Normalized probability of the set of bins whose center vector
    /// satisfies `pred`; 0 on an empty table.
    pub fn mass_where(&self, pred: impl Fn(&[R]) -> bool) -> R {
        if self.total == R::zero() {
            return R::zero();
        }
        let mut acc = R::zero();
        for (&key, &mass) in &self.aggregate {
            if pred(&self.spec.centers(key)) {
                acc = acc + mass;
            }
        }
        acc / self.total
    }

    pub fn snapshot(&self) -> OccupancySnapshot {
        OccupancySnapshot {
            episodes: self
                .episodes
                .iter()
                .map(|ep| ep.iter().map(|(&k, &v)| (k, v.to_f64_lossy())).collect())
                .collect(),
        }
    }

    pub fn from_snapshot(
        spec: BinningSpec<R>,
        gamma: R,
        window: usize,
        snap: &OccupancySnapshot,
    ) -> Result<Self> {
        let mut table = Self::new(spec, gamma, window)?;
        if snap.episodes.len() > window {
            return Err(Error::checkpoint("snapshot holds more episodes than the window"));
        }
        for ep in &snap.episodes {
            let mut map = BTreeMap::new();
            for &(k, v) in ep {
                if map.insert(k, R::from_f64_lossy(v)).is_some() {
                    return Err(Error::checkpoint("snapshot episode repeats a bin key"));
                }
            }
            table.episodes.push_back(map);
        }
        table.rebuild();
        Ok(table)
    }
}
