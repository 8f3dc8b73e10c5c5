use std::fmt;
use std::path::PathBuf;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{LabError, Result};
use crate::observables::BaseObservable;
use crate::rng::derive_seed;
use crate::systems::SystemSpec;

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum ScenarioId {
    V1,
    V2,
    V3,
    V4,
    V5,
    V6,
    V7,
    V8,
}

impl ScenarioId {
    pub const ALL: [ScenarioId; 8] = [
        ScenarioId::V1,
        ScenarioId::V2,
        ScenarioId::V3,
        ScenarioId::V4,
        ScenarioId::V5,
        ScenarioId::V6,
        ScenarioId::V7,
        ScenarioId::V8,
    ];
}

impl fmt::Display for ScenarioId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{self:?}")
    }
}

impl FromStr for ScenarioId {
    type Err = LabError;

    fn from_str(s: &str) -> Result<Self> {
        ScenarioId::ALL
            .into_iter()
            .find(|id| id.to_string().eq_ignore_ascii_case(s.trim()))
            .ok_or_else(|| LabError::InvalidParameter(format!("unknown scenario '{s}'")))
    }
}

/// How perturbation coefficients are chosen.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "policy", rename_all = "snake_case")]
pub enum AlphaPolicy {
    /// One observable with these coefficients; empty means the bare base.
    Fixed { alpha: Vec<f64> },
    /// `count` independent draws from the ball of `radius`.
    Sampled { count: usize, radius: f64, seed: u64 },
}

impl AlphaPolicy {
    pub fn count(&self) -> usize {
        match self {
            AlphaPolicy::Fixed { .. } => 1,
            AlphaPolicy::Sampled { count, .. } => *count,
        }
    }

    /// Seed of draw `i` for a sampled policy.
    pub fn draw_seed(&self, i: usize) -> Option<u64> {
        match self {
            AlphaPolicy::Fixed { .. } => None,
            AlphaPolicy::Sampled { seed, .. } => Some(derive_seed(*seed, i as u64)),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ObservableConfig {
    pub base: BaseObservable,
    pub alpha: AlphaPolicy,
    /// Probe degree; defaults to `2k + 1`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub degree: Option<usize>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ScenarioConfig {
    pub id: ScenarioId,
    pub system: SystemSpec,
    pub observable: ObservableConfig,
    /// Delay dimensions to run.
    pub k: Vec<usize>,
    /// Cloud size for phase-space dimension estimates.
    pub n_points: usize,
    /// Pair count for embedded clouds.
    pub n_pairs: usize,
    /// ε ladder; data-driven default when absent.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub epsilons: Option<Vec<f64>>,
    /// δ ladder; data-driven default when absent.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub deltas: Option<Vec<f64>>,
    pub sample_seed: u64,
    pub analysis_seed: u64,
    pub max_queries: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub output_dir: Option<PathBuf>,
}

fn strictly_monotone(v: &[f64]) -> bool {
    v.windows(2).all(|w| w[0] > w[1]) || v.windows(2).all(|w| w[0] < w[1])
}

impl ScenarioConfig {
    pub fn validate(&self) -> Result<()> {
        if self.k.is_empty() || self.k.contains(&0) {
            return Err(LabError::InvalidParameter("k must list delay dimensions ≥ 1".into()));
        }
        if self.n_pairs < 2 || self.n_points < 2 || self.max_queries == 0 {
            return Err(LabError::InvalidParameter("sample sizes must be positive".into()));
        }
        for (name, l) in [("epsilons", &self.epsilons), ("deltas", &self.deltas)] {
            if let Some(l) = l {
                if l.is_empty() || !strictly_monotone(l) || l.iter().any(|x| !(*x > 0.0 && x.is_finite())) {
                    return Err(LabError::InvalidParameter(format!("{name} must be positive and strictly monotone")));
                }
            }
        }
        match &self.observable.alpha {
            // An empty α set is allowed; it yields a result with no runs.
            AlphaPolicy::Sampled { radius, .. } if !(*radius > 0.0 && radius.is_finite()) => {
                Err(LabError::InvalidParameter("sampled α needs a positive radius".into()))
            }
            _ => Ok(()),
        }
    }

    pub fn from_json(s: &str) -> Result<Self> {
        let c: Self = serde_json::from_str(s)?;
        c.validate()?;
        Ok(c)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("config serializes")
    }
}
