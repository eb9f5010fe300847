//! Tabular environment suite with ground-truth labelling functions and
//! hidden-RM session wrappers.
//!
//! Each environment is a finite (PO)MDP paired with a labelling function
//! `L: S×A×S' → 2^AP` and a Reward Machine. Sessions hide both the RM
//! state and the proposition values from the agent: the only agent-visible
//! outputs are observation ids, rewards, and the done flag.

mod kitchen;
mod mining;
mod traffic;

pub use kitchen::{kitchen_env, kitchen_rm, kitchen_small, KitchenLayout, DOOR_CHORE_SHAPING};
pub use mining::{mining_env, mining_small, MiningLayout, MINING_RM_DSL, MOVE_SHAPING};
pub use traffic::{traffic_env, traffic_small, LightPhase, TrafficLayout, TrafficObs, TRAFFIC_RM_DSL};

use crate::mdp::TabularPomdp;
use crate::rm::{rm_step, PropSet, RewardMachine};
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum EnvError {
    #[error("session is already finished")]
    SessionFinished,
    #[error("action {0} out of range ({1} actions)")]
    BadAction(usize, usize),
}

/// Environment-specific layout constants, used by handcrafted labelling
/// models and diagnostics. Not part of the agent-visible interface.
#[derive(Debug, Clone)]
pub enum EnvMeta {
    Mining(MiningLayout),
    Traffic(TrafficLayout),
    Kitchen(KitchenLayout),
}

/// A tabular (PO)MDP, its ground-truth labelling, and its Reward Machine.
///
/// `labels[s * A + a][k]` is the label of the k-th entry of the sparse
/// transition row for `(s, a)`. `shaping[a]` is the environment-level
/// reward added on top of `δ_r` for action `a`.
#[derive(Debug, Clone)]
pub struct LabelledModel {
    pub name: String,
    pub dynamics: TabularPomdp,
    pub labels: Vec<Vec<PropSet>>,
    pub rm: RewardMachine,
    pub shaping: Vec<f64>,
    pub horizon: usize,
    pub fully_observable: bool,
    pub action_names: Vec<String>,
    pub meta: EnvMeta,
}

impl LabelledModel {
    pub fn n_states(&self) -> usize {
        self.dynamics.mdp.n_states
    }

    pub fn n_actions(&self) -> usize {
        self.dynamics.mdp.n_actions
    }

    pub fn n_obs(&self) -> usize {
        self.dynamics.n_obs
    }

    pub fn gamma(&self) -> f64 {
        self.dynamics.mdp.gamma
    }

    pub fn is_env_terminal(&self, state: usize) -> bool {
        self.dynamics.mdp.terminal[state]
    }

    pub fn obs(&self, state: usize) -> usize {
        self.dynamics.obs_of[state]
    }

    /// Sparse transitions for `(s, a)` as `(s', p, L(s,a,s'))` triples.
    pub fn transitions(&self, state: usize, action: usize) -> impl Iterator<Item = (usize, f64, PropSet)> + '_ {
        let idx = state * self.n_actions() + action;
        self.dynamics.mdp.rows[idx]
            .iter()
            .zip(self.labels[idx].iter())
            .map(|(&(next, prob), &label)| (next, prob, label))
    }

    /// Ground-truth label of a positive-probability transition.
    pub fn label(&self, state: usize, action: usize, next: usize) -> Option<PropSet> {
        self.transitions(state, action).find(|&(n, _, _)| n == next).map(|(_, _, l)| l)
    }
}

/// Yields every positive-probability transition `(s, a, s', p, L(s,a,s'))`
/// exactly once. Feeds the cross product and brute-force oracles.
pub fn enumerate_transitions(model: &LabelledModel) -> impl Iterator<Item = (usize, usize, usize, f64, PropSet)> + '_ {
    (0..model.n_states())
        .filter(|&s| !model.is_env_terminal(s))
        .flat_map(move |s| {
            (0..model.n_actions()).flat_map(move |a| {
                model.transitions(s, a).map(move |(next, prob, label)| (s, a, next, prob, label))
            })
        })
}

/// Agent-visible observation: an opaque id into the model's observation
/// space. Deliberately carries no RM state and no proposition values.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct Observation(pub usize);

/// Hidden per-step data for oracles and diagnostics only. Never routed
/// into agent-visible data paths (trackers other than `perfect_rm`, Q
/// functions, labelling inputs).
#[derive(Debug, Clone, Copy)]
pub struct StepInfo {
    pub state: usize,
    pub rm_node: usize,
    pub label: PropSet,
}

#[derive(Debug, Clone)]
pub struct StepOutcome {
    pub obs: Observation,
    pub reward: f64,
    pub done: bool,
    pub info: StepInfo,
}

/// One episode of interaction with a hidden-RM environment.
#[derive(Debug, Clone)]
pub struct UrmSession<'a> {
    model: &'a LabelledModel,
    rng: ChaCha8Rng,
    state: usize,
    rm_node: usize,
    steps: usize,
    done: bool,
}

/// Samples `s₀ ~ μ`, sets the RM to its initial state, and returns the
/// first observation. The RM state is never exposed.
pub fn session_reset(model: &LabelledModel, seed: u64) -> (UrmSession<'_>, Observation) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let state = sample_sparse(&mut rng, &model.dynamics.mdp.init);
    let session = UrmSession {
        model,
        rng,
        state,
        rm_node: model.rm.initial(),
        steps: 0,
        done: false,
    };
    let obs = Observation(model.obs(state));
    (session, obs)
}

impl<'a> UrmSession<'a> {
    pub fn model(&self) -> &'a LabelledModel {
        self.model
    }

    pub fn is_done(&self) -> bool {
        self.done
    }

    pub fn steps(&self) -> usize {
        self.steps
    }

    /// Hidden `(s, u)` pair; diagnostics only.
    pub fn hidden(&self) -> (usize, usize) {
        (self.state, self.rm_node)
    }

    /// Samples `s' ~ P(·|s,a)`, computes `σ = L(s,a,s')`, steps the RM,
    /// and returns `δ_r + shaping`. Done when the environment or the RM
    /// reaches a terminal, or the horizon is exhausted.
    pub fn step(&mut self, action: usize) -> Result<StepOutcome, EnvError> {
        if self.done {
            return Err(EnvError::SessionFinished);
        }
        if action >= self.model.n_actions() {
            return Err(EnvError::BadAction(action, self.model.n_actions()));
        }
        let idx = self.state * self.model.n_actions() + action;
        let next = sample_sparse(&mut self.rng, &self.model.dynamics.mdp.rows[idx]);
        let label = self.model.label(self.state, action, next).expect("sampled transition has a label");
        let outcome = rm_step(&self.model.rm, self.rm_node, label).expect("session RM node is non-terminal");
        let reward = outcome.reward + self.model.shaping[action];
        self.state = next;
        self.rm_node = outcome.next;
        self.steps += 1;
        let done = self.model.is_env_terminal(next)
            || self.model.rm.is_terminal(outcome.next)
            || self.steps >= self.model.horizon;
        self.done = done;
        Ok(StepOutcome {
            obs: Observation(self.model.obs(next)),
            reward,
            done,
            info: StepInfo { state: next, rm_node: outcome.next, label },
        })
    }
}

fn sample_sparse(rng: &mut ChaCha8Rng, row: &[(usize, f64)]) -> usize {
    debug_assert!(!row.is_empty());
    let draw: f64 = rng.gen();
    let mut acc = 0.0;
    for &(next, prob) in row {
        acc += prob;
        if draw < acc {
            return next;
        }
    }
    row.last().unwrap().0
}
