//! Approximate labelling functions L̂ that emit per-proposition
//! probabilities from agent-visible context only.
//!
//! For fully observable environments the context is the observed transition
//! `(s, a, s')`; for partially observable ones it is the observation-action
//! history, which the handcrafted models compress into small sufficient
//! features (last light sighting for Traffic, per-chore knowledge for
//! Kitchen).

use crate::envs::{EnvMeta, KitchenLayout, LabelledModel, LightPhase, TrafficObs};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum LabelError {
    #[error("epsilon must be non-negative, got {0}")]
    NegativeEpsilon(f64),
    #[error("labelling `{kind}` does not apply to environment `{env}`")]
    WrongEnvironment { kind: String, env: String },
    #[error("unknown labelling kind `{0}`")]
    UnknownKind(String),
}

/// Fig. 3 left grid: gold probabilities at ε = 1 under uniform noise.
/// First row = top grid row, columns left→right.
pub const UNIFORM_NOISE_GRID: [[f64; 4]; 4] = [
    [0.21, 0.15, 0.12, 0.87],
    [0.14, 0.21, 0.20, 0.90],
    [0.26, 0.23, 0.15, 0.84],
    [0.00, 0.17, 0.10, 0.84],
];

/// Fig. 3 right grid: gold probabilities at ε = 1 with a single false
/// positive.
pub const FALSE_POSITIVE_GRID: [[f64; 4]; 4] = [
    [0.0, 0.0, 0.0, 1.0],
    [0.6, 0.0, 0.0, 1.0],
    [0.0, 0.0, 0.0, 1.0],
    [0.0, 0.0, 0.0, 1.0],
];

/// Ground truth: gold in the rightmost column only.
pub const TRUTH_GRID: [[f64; 4]; 4] = [
    [0.0, 0.0, 0.0, 1.0],
    [0.0, 0.0, 0.0, 1.0],
    [0.0, 0.0, 0.0, 1.0],
    [0.0, 0.0, 0.0, 1.0],
];

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MiningNoiseKind {
    Uniform,
    FalsePositive,
}

impl MiningNoiseKind {
    pub fn grid(self) -> &'static [[f64; 4]; 4] {
        match self {
            MiningNoiseKind::Uniform => &UNIFORM_NOISE_GRID,
            MiningNoiseKind::FalsePositive => &FALSE_POSITIVE_GRID,
        }
    }
}

/// `P(gold | dig at (row, col)) = clamp(truth + ε·(noisy − truth), 0, 1)`:
/// ε = 0 is ground truth, ε = 1 the Fig. 3 grid, affine in between and
/// beyond (clamped).
pub fn mining_gold_probability(kind: MiningNoiseKind, epsilon: f64, row: usize, col: usize) -> f64 {
    let truth = TRUTH_GRID[row][col];
    let noisy = kind.grid()[row][col];
    (truth + epsilon * (noisy - truth)).clamp(0.0, 1.0)
}

/// Per-proposition probabilities, indexed by the alphabet's prop indices.
#[derive(Debug, Clone, PartialEq)]
pub struct LabelDistribution {
    pub probs: Vec<f64>,
}

impl LabelDistribution {
    pub fn zeros(n: usize) -> Self {
        LabelDistribution { probs: vec![0.0; n] }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LabellingKind {
    GroundTruth,
    MiningUniform,
    MiningFalsePositive,
    BayesTraffic,
    BayesKitchen,
}

impl LabellingKind {
    pub fn parse(s: &str) -> Result<Self, LabelError> {
        match s {
            "ground_truth" => Ok(LabellingKind::GroundTruth),
            "mining_uniform" => Ok(LabellingKind::MiningUniform),
            "mining_false_positive" => Ok(LabellingKind::MiningFalsePositive),
            "bayes_traffic" => Ok(LabellingKind::BayesTraffic),
            "bayes_kitchen" => Ok(LabellingKind::BayesKitchen),
            other => Err(LabelError::UnknownKind(other.to_string())),
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            LabellingKind::GroundTruth => "ground_truth",
            LabellingKind::MiningUniform => "mining_uniform",
            LabellingKind::MiningFalsePositive => "mining_false_positive",
            LabellingKind::BayesTraffic => "bayes_traffic",
            LabellingKind::BayesKitchen => "bayes_kitchen",
        }
    }
}

/// Per-chore knowledge state for the Kitchen model.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum ChoreKnowledge {
    Unknown,
    Known(bool),
}

#[derive(Debug, Clone)]
enum Memory {
    None,
    /// Last light sighting and its age in chain steps.
    Traffic { last: Option<(LightPhase, usize)> },
    Kitchen { knowledge: Vec<ChoreKnowledge> },
}

/// A stateful per-episode labelling model. Call [`Labeller::begin_episode`]
/// with the first observation, then [`Labeller::step`] once per transition;
/// inputs are strictly agent-visible.
#[derive(Debug, Clone)]
pub struct Labeller<'a> {
    model: &'a LabelledModel,
    kind: LabellingKind,
    epsilon: f64,
    memory: Memory,
}

impl<'a> Labeller<'a> {
    pub fn new(model: &'a LabelledModel, kind: LabellingKind, epsilon: f64) -> Result<Self, LabelError> {
        if epsilon < 0.0 {
            return Err(LabelError::NegativeEpsilon(epsilon));
        }
        let wrong = || LabelError::WrongEnvironment { kind: kind.name().to_string(), env: model.name.clone() };
        let memory = match kind {
            LabellingKind::GroundTruth => {
                if !model.fully_observable {
                    return Err(wrong());
                }
                Memory::None
            }
            LabellingKind::MiningUniform | LabellingKind::MiningFalsePositive => {
                let EnvMeta::Mining(layout) = &model.meta else { return Err(wrong()) };
                if layout.rows != 4 || layout.cols != 4 {
                    return Err(wrong());
                }
                Memory::None
            }
            LabellingKind::BayesTraffic => {
                let EnvMeta::Traffic(_) = &model.meta else { return Err(wrong()) };
                Memory::Traffic { last: None }
            }
            LabellingKind::BayesKitchen => {
                let EnvMeta::Kitchen(layout) = &model.meta else { return Err(wrong()) };
                Memory::Kitchen { knowledge: vec![ChoreKnowledge::Unknown; layout.n_chores()] }
            }
        };
        Ok(Labeller { model, kind, epsilon, memory })
    }

    pub fn kind(&self) -> LabellingKind {
        self.kind
    }

    pub fn epsilon(&self) -> f64 {
        self.epsilon
    }

    /// Resets episode memory and ingests the first observation.
    pub fn begin_episode(&mut self, obs: usize) {
        match (&mut self.memory, &self.model.meta) {
            (Memory::Traffic { last }, EnvMeta::Traffic(_)) => {
                *last = TrafficObs::decode(obs).light.map(|phase| (phase, 0));
            }
            (Memory::Kitchen { knowledge }, EnvMeta::Kitchen(layout)) => {
                knowledge.fill(ChoreKnowledge::Unknown);
                absorb_kitchen_obs(knowledge, layout, obs);
            }
            _ => {}
        }
    }

    /// Emits `P(σ_i)` for the transition `(prev_obs, action, obs)` and
    /// updates episode memory.
    pub fn step(&mut self, prev_obs: usize, action: usize, obs: usize) -> LabelDistribution {
        let n_props = self.model.rm.alphabet().len();
        let mut out = LabelDistribution::zeros(n_props);
        match self.kind {
            LabellingKind::GroundTruth => {
                // Fully observable: the observed transition is the true one.
                let label = self.model.label(prev_obs, action, obs).expect("observed transition exists");
                for i in 0..n_props {
                    out.probs[i] = if label.contains(i) { 1.0 } else { 0.0 };
                }
            }
            LabellingKind::MiningUniform | LabellingKind::MiningFalsePositive => {
                let EnvMeta::Mining(layout) = &self.model.meta else { unreachable!() };
                let alphabet = self.model.rm.alphabet();
                let gold = alphabet.index_of("gold").unwrap();
                let home = alphabet.index_of("home").unwrap();
                let noise = match self.kind {
                    LabellingKind::MiningUniform => MiningNoiseKind::Uniform,
                    _ => MiningNoiseKind::FalsePositive,
                };
                if action == 4 {
                    let (r, c) = layout.coords(prev_obs);
                    out.probs[gold] = mining_gold_probability(noise, self.epsilon, r, c);
                }
                // `home` is modelled without error.
                if layout.coords(obs) == layout.depot {
                    out.probs[home] = 1.0;
                }
            }
            LabellingKind::BayesTraffic => {
                let EnvMeta::Traffic(layout) = &self.model.meta else { unreachable!() };
                let Memory::Traffic { last } = &mut self.memory else { unreachable!() };
                // The phase chain advanced one step during this transition.
                if let Some((_, age)) = last {
                    *age += 1;
                }
                let o = TrafficObs::decode(obs);
                if let Some(phase) = o.light {
                    *last = Some((phase, 0));
                }
                let alphabet = self.model.rm.alphabet();
                out.probs[alphabet.index_of("pkg").unwrap()] = if o.pos == layout.pkg_cell() { 1.0 } else { 0.0 };
                out.probs[alphabet.index_of("home").unwrap()] = if o.pos == 0 { 1.0 } else { 0.0 };
                let red = alphabet.index_of("red_cross").unwrap();
                out.probs[red] = if !layout.in_intersection(o.pos) {
                    0.0
                } else {
                    match last {
                        // Green one chain step ago cannot be red now.
                        Some((LightPhase::Green, 1)) => 0.0,
                        // Yellow one chain step ago is red now.
                        Some((LightPhase::Yellow, 1)) => 1.0,
                        // Otherwise approximate with the stationary red mass.
                        _ => layout.stationary()[2],
                    }
                };
            }
            LabellingKind::BayesKitchen => {
                let EnvMeta::Kitchen(layout) = &self.model.meta else { unreachable!() };
                let Memory::Kitchen { knowledge } = &mut self.memory else { unreachable!() };
                let walkable = layout.walkable();
                let n_flag_sets = 1usize << layout.n_chores();
                // Doing a chore on its square pins that chore done forever.
                if action == 5 {
                    let prev_pos = walkable[prev_obs / (2 * (n_flag_sets + 1))];
                    if let Some(i) = layout.chores.iter().position(|&c| c == prev_pos) {
                        knowledge[i] = ChoreKnowledge::Known(true);
                    }
                }
                absorb_kitchen_obs(knowledge, layout, obs);
                let alphabet = self.model.rm.alphabet();
                for (i, k) in knowledge.iter().enumerate() {
                    let idx = alphabet.index_of(&format!("chore_{i}")).unwrap();
                    out.probs[idx] = match k {
                        ChoreKnowledge::Unknown => layout.p_done,
                        ChoreKnowledge::Known(true) => 1.0,
                        ChoreKnowledge::Known(false) => 0.0,
                    };
                }
                let pos = walkable[obs / (2 * (n_flag_sets + 1))];
                out.probs[alphabet.index_of("port").unwrap()] = if pos == layout.port { 1.0 } else { 0.0 };
            }
        }
        debug_assert!(out.probs.iter().all(|p| (0.0..=1.0).contains(p)));
        out
    }
}

/// If the observation reveals the chore flags (agent inside the kitchen),
/// overwrite the knowledge state with the observed values.
fn absorb_kitchen_obs(knowledge: &mut [ChoreKnowledge], layout: &KitchenLayout, obs: usize) {
    let n_flag_sets = 1usize << layout.n_chores();
    let flag_obs = obs % (n_flag_sets + 1);
    if flag_obs < n_flag_sets {
        for (i, k) in knowledge.iter_mut().enumerate() {
            *k = ChoreKnowledge::Known(flag_obs & (1 << i) != 0);
        }
    }
}

/// Convenience for tests and oracles: the labeller's prob for one prop.
pub fn prob_of(dist: &LabelDistribution, index: usize) -> f64 {
    dist.probs[index]
}
