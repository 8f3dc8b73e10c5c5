use super::config::{AlphaPolicy, ObservableConfig, ScenarioConfig, ScenarioId};
use crate::observables::BaseObservable;
use crate::systems::{build_union_chain, SystemSpec};

/// A registered experiment and the claim it checks.
#[derive(Clone, Copy, Debug)]
pub struct ScenarioEntry {
    pub id: ScenarioId,
    /// Short stable name of the claim.
    pub anchor: &'static str,
    pub claim: &'static str,
}

/// Claims the registry must cover, one scenario each.
pub const ANCHORS: [&str; 8] = [
    "predictable-above-dimension",
    "unpredictable-below-dimension",
    "exceedance-upper-rate",
    "solenoid-predictable-not-injective",
    "slice-dimension-lower-bound",
    "pushforward-absolutely-continuous",
    "local-dimension-projection",
    "iterate-measure-needed",
];

pub const REGISTRY: [ScenarioEntry; 8] = [
    ScenarioEntry {
        id: ScenarioId::V1,
        anchor: ANCHORS[0],
        claim: "k above the dimension of μ: exceedance mass vanishes as ε → 0 for generic observables",
    },
    ScenarioEntry {
        id: ScenarioId::V2,
        anchor: ANCHORS[1],
        claim: "k below the dimension of an ergodic μ: exceedance mass stays bounded below for some δ",
    },
    ScenarioEntry {
        id: ScenarioId::V3,
        anchor: ANCHORS[2],
        claim: "exceedance mass decays no slower than ε^(k − D − θ) for generic observables",
    },
    ScenarioEntry {
        id: ScenarioId::V4,
        anchor: ANCHORS[3],
        claim: "solenoid with cos t: exceedance is exactly zero at small ε although the delay map is not injective",
    },
    ScenarioEntry {
        id: ScenarioId::V5,
        anchor: ANCHORS[4],
        claim: "slices of μ along delay-map fibers have dimension at least dim μ − k",
    },
    ScenarioEntry {
        id: ScenarioId::V6,
        anchor: ANCHORS[5],
        claim: "k below the dimension of T^(k−1)μ: the delay-vector distribution has a density",
    },
    ScenarioEntry {
        id: ScenarioId::V7,
        anchor: ANCHORS[6],
        claim: "local dimension of the delay-vector distribution at φ(x) equals min(k, d(μ, x))",
    },
    ScenarioEntry {
        id: ScenarioId::V8,
        anchor: ANCHORS[7],
        claim: "union chain: predictable with k = 2 although dim μ > 2; delay-vector distribution is singular",
    },
];

pub fn entry(id: ScenarioId) -> &'static ScenarioEntry {
    REGISTRY.iter().find(|e| e.id == id).expect("every id is registered")
}

fn sampled(seed: u64) -> AlphaPolicy {
    AlphaPolicy::Sampled { count: 8, radius: 1.0, seed }
}

fn config(id: ScenarioId, system: SystemSpec, base: BaseObservable, alpha: AlphaPolicy, k: Vec<usize>) -> ScenarioConfig {
    ScenarioConfig {
        id,
        system,
        observable: ObservableConfig { base, alpha, degree: None },
        k,
        n_points: 100_000,
        n_pairs: 1_000_000,
        epsilons: None,
        deltas: None,
        sample_seed: 20_240 + id as u64,
        analysis_seed: 7,
        max_queries: 10_000,
        output_dir: None,
    }
}

/// Default configuration of each scenario.
pub fn default_config(id: ScenarioId) -> ScenarioConfig {
    let corner = SystemSpec::corner_cantor(1.0 / 3.0).expect("valid ratio");
    let seed = 1000 + 100 * id as u64;
    match id {
        ScenarioId::V1 => {
            // The smallest scales need a larger sample to resolve the collapse.
            let mut c = config(id, corner, BaseObservable::Zero, sampled(seed), vec![2]);
            c.n_pairs = 2_000_000;
            c
        }
        ScenarioId::V2 => config(id, corner, BaseObservable::Zero, sampled(seed), vec![1]),
        ScenarioId::V3 => config(id, SystemSpec::solenoid(), BaseObservable::CosAngle, sampled(seed), vec![2]),
        ScenarioId::V4 => {
            let mut c = config(
                id,
                SystemSpec::solenoid(),
                BaseObservable::CosAngle,
                AlphaPolicy::Fixed { alpha: Vec::new() },
                vec![1, 2],
            );
            c.n_pairs = 200_000;
            c
        }
        ScenarioId::V5 => config(id, corner, BaseObservable::Zero, sampled(seed), vec![1]),
        ScenarioId::V6 => config(id, corner, BaseObservable::Zero, sampled(seed), vec![1]),
        ScenarioId::V7 => config(id, SystemSpec::solenoid(), BaseObservable::CosAngle, sampled(seed), vec![1, 2]),
        ScenarioId::V8 => config(
            id,
            build_union_chain(0.4, 0.05).expect("valid ratios"),
            BaseObservable::Zero,
            sampled(seed),
            vec![2],
        ),
    }
}
