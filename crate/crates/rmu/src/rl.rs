//! Tabular and linear Q-learning over tracker outputs, exact value
//! iteration oracles, and policy evaluation.

use crate::belief::{
    exact_filter_init, exact_filter_update, independent_update, persistent_update,
    thresholding_update, Belief, BeliefError, ExactFilter, PersistentTracker, ThresholdTracker,
};
use crate::envs::{session_reset, LabelledModel, StepOutcome};
use crate::labelling::{LabelError, Labeller, LabellingKind, MiningNoiseKind};
use crate::mdp::{RewardedTransition, SolvableMdp};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum RlError {
    #[error("tracker `{tracker}` is incompatible with model `{model}`: {reason}")]
    TrackerMismatch { tracker: String, model: String, reason: String },
    #[error(transparent)]
    Label(#[from] LabelError),
    #[error(transparent)]
    Belief(#[from] BeliefError),
    #[error("unknown tracker kind `{0}`")]
    UnknownTracker(String),
}

/// The belief-over-RM-state strategy driving a learner.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum TrackerKind {
    /// Feeds the hidden RM state directly (diagnostic/baseline only).
    PerfectRm,
    Thresholding,
    Independent,
    Persistent,
    ExactFilter,
}

impl TrackerKind {
    pub const ALL: [TrackerKind; 5] = [
        TrackerKind::PerfectRm,
        TrackerKind::Thresholding,
        TrackerKind::Independent,
        TrackerKind::Persistent,
        TrackerKind::ExactFilter,
    ];

    pub fn parse(s: &str) -> Result<Self, RlError> {
        match s {
            "perfect_rm" => Ok(TrackerKind::PerfectRm),
            "thresholding" => Ok(TrackerKind::Thresholding),
            "independent" => Ok(TrackerKind::Independent),
            "persistent" => Ok(TrackerKind::Persistent),
            "exact_filter" => Ok(TrackerKind::ExactFilter),
            other => Err(RlError::UnknownTracker(other.to_string())),
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            TrackerKind::PerfectRm => "perfect_rm",
            TrackerKind::Thresholding => "thresholding",
            TrackerKind::Independent => "independent",
            TrackerKind::Persistent => "persistent",
            TrackerKind::ExactFilter => "exact_filter",
        }
    }

    /// Discrete-prediction trackers learn a [`QTable`]; belief trackers a
    /// [`LinearQ`].
    pub fn uses_table(self) -> bool {
        matches!(self, TrackerKind::PerfectRm | TrackerKind::Thresholding)
    }

    /// Whether this tracker consumes an approximate labelling function.
    pub fn needs_labeller(self) -> bool {
        !matches!(self, TrackerKind::PerfectRm | TrackerKind::ExactFilter)
    }
}

/// A tracker plus the labelling it conditions on.
#[derive(Debug, Clone, Copy)]
pub struct TrackerSpec {
    pub kind: TrackerKind,
    pub labelling: LabellingKind,
    pub epsilon: f64,
}

enum TrackerState {
    Node(usize),
    Belief(Belief),
    Persistent(PersistentTracker),
    Filter(ExactFilter),
}

/// Per-episode tracker runtime: owns the labeller memory and the tracker
/// state, and exposes the current belief.
pub struct TrackerRuntime<'a> {
    kind: TrackerKind,
    model: &'a LabelledModel,
    labeller: Option<Labeller<'a>>,
    state: TrackerState,
}

impl<'a> TrackerRuntime<'a> {
    pub fn new(model: &'a LabelledModel, spec: TrackerSpec) -> Result<Self, RlError> {
        let labeller = if spec.kind.needs_labeller() {
            Some(Labeller::new(model, spec.labelling, spec.epsilon)?)
        } else {
            None
        };
        // The filter is conditioned on a real first observation in
        // `reset`; construction holds the unconditioned prior μ'(s,u).
        let state = match spec.kind {
            TrackerKind::ExactFilter => {
                let n_nodes = model.rm.n_nodes();
                let mut joint = vec![0.0; model.n_states() * n_nodes];
                for &(s, p) in &model.dynamics.mdp.init {
                    joint[s * n_nodes + model.rm.initial()] = p;
                }
                TrackerState::Filter(ExactFilter { joint })
            }
            other => initial_state(other, model, 0)?,
        };
        Ok(TrackerRuntime { kind: spec.kind, model, labeller, state })
    }

    pub fn kind(&self) -> TrackerKind {
        self.kind
    }

    /// Starts a new episode from the first observation.
    pub fn reset(&mut self, obs: usize) -> Result<(), RlError> {
        if let Some(lab) = &mut self.labeller {
            lab.begin_episode(obs);
        }
        self.state = initial_state(self.kind, self.model, obs)?;
        Ok(())
    }

    /// Current belief over RM nodes.
    pub fn belief(&self) -> Belief {
        let n = self.model.rm.n_nodes();
        match &self.state {
            TrackerState::Node(u) => Belief::point_mass(n, *u),
            TrackerState::Belief(b) => b.clone(),
            TrackerState::Persistent(t) => t.belief(),
            TrackerState::Filter(f) => f.belief(self.model),
        }
    }

    /// Current discrete prediction for [`QTable`] trackers.
    pub fn node(&self) -> Option<usize> {
        match &self.state {
            TrackerState::Node(u) => Some(*u),
            _ => None,
        }
    }

    /// Advances the tracker across one transition. `hidden_node` is
    /// consumed only by `perfect_rm` and must be `None` for every other
    /// tracker (hidden-state hygiene).
    pub fn update(
        &mut self,
        prev_obs: usize,
        action: usize,
        obs: usize,
        hidden_node: Option<usize>,
    ) -> Result<(), RlError> {
        debug_assert!(hidden_node.is_none() || self.kind == TrackerKind::PerfectRm);
        let rm = &self.model.rm;
        match (&mut self.state, self.kind) {
            (TrackerState::Node(u), TrackerKind::PerfectRm) => {
                *u = hidden_node.expect("perfect_rm requires the hidden RM node");
            }
            (TrackerState::Node(u), TrackerKind::Thresholding) => {
                // Predicted terminal: frozen (the raw op would error).
                if !rm.is_terminal(*u) {
                    let probs = self.labeller.as_mut().unwrap().step(prev_obs, action, obs);
                    let mut t = ThresholdTracker { node: *u };
                    thresholding_update(&mut t, &probs, rm)?;
                    *u = t.node;
                }
            }
            (TrackerState::Belief(b), TrackerKind::Independent) => {
                let probs = self.labeller.as_mut().unwrap().step(prev_obs, action, obs);
                *b = independent_update(b, &probs, rm);
            }
            (TrackerState::Persistent(t), TrackerKind::Persistent) => {
                let probs = self.labeller.as_mut().unwrap().step(prev_obs, action, obs);
                persistent_update(t, (prev_obs, action), &probs, rm)?;
            }
            (TrackerState::Filter(f), TrackerKind::ExactFilter) => {
                exact_filter_update(f, action, obs, self.model)?;
            }
            _ => unreachable!("state/kind pairing is fixed at construction"),
        }
        Ok(())
    }
}

fn initial_state(kind: TrackerKind, model: &LabelledModel, obs: usize) -> Result<TrackerState, RlError> {
    Ok(match kind {
        TrackerKind::PerfectRm | TrackerKind::Thresholding => TrackerState::Node(model.rm.initial()),
        TrackerKind::Independent => {
            TrackerState::Belief(Belief::point_mass(model.rm.n_nodes(), model.rm.initial()))
        }
        TrackerKind::Persistent => TrackerState::Persistent(PersistentTracker::new(&model.rm)),
        TrackerKind::ExactFilter => TrackerState::Filter(exact_filter_init(model, obs)?),
    })
}

/// Dense action values indexed `(observation, RM node, action)`.
#[derive(Debug, Clone, PartialEq)]
pub struct QTable {
    pub values: Vec<f64>,
    pub n_obs: usize,
    pub n_nodes: usize,
    pub n_actions: usize,
}

impl QTable {
    pub fn zeros(n_obs: usize, n_nodes: usize, n_actions: usize) -> Self {
        QTable { values: vec![0.0; n_obs * n_nodes * n_actions], n_obs, n_nodes, n_actions }
    }

    pub fn q(&self, obs: usize, node: usize, action: usize) -> f64 {
        self.values[(obs * self.n_nodes + node) * self.n_actions + action]
    }

    pub fn q_mut(&mut self, obs: usize, node: usize, action: usize) -> &mut f64 {
        &mut self.values[(obs * self.n_nodes + node) * self.n_actions + action]
    }
}

/// Linear action values over belief features:
/// `Q(s, b, a) = Σ_u b(u)·weights[s, u, a]`.
#[derive(Debug, Clone, PartialEq)]
pub struct LinearQ {
    pub weights: QTable,
}

impl LinearQ {
    pub fn zeros(n_obs: usize, n_nodes: usize, n_actions: usize) -> Self {
        LinearQ { weights: QTable::zeros(n_obs, n_nodes, n_actions) }
    }

    pub fn q(&self, obs: usize, belief: &Belief, action: usize) -> f64 {
        belief
            .probs
            .iter()
            .enumerate()
            .map(|(u, &p)| p * self.weights.q(obs, u, action))
            .sum()
    }
}

/// A learned action-value function of either representation.
#[derive(Debug, Clone, PartialEq)]
pub enum QFunc {
    Table(QTable),
    Linear(LinearQ),
}

impl QFunc {
    pub fn q(&self, obs: usize, node: Option<usize>, belief: &Belief, action: usize) -> f64 {
        match self {
            QFunc::Table(t) => t.q(obs, node.expect("table tracker has a node"), action),
            QFunc::Linear(l) => l.q(obs, belief, action),
        }
    }
}

/// Argmax over actions; ties break to the lowest action id.
pub fn greedy_action(q: &QFunc, obs: usize, node: Option<usize>, belief: &Belief, n_actions: usize) -> usize {
    let mut best = 0;
    let mut best_v = f64::NEG_INFINITY;
    for a in 0..n_actions {
        let v = q.q(obs, node, belief, a);
        if v > best_v {
            best_v = v;
            best = a;
        }
    }
    best
}

/// Training hyperparameters.
#[derive(Debug, Clone, Copy)]
pub struct TrainConfig {
    pub lr: f64,
    pub gamma: f64,
    pub explore_eps: f64,
    pub frames: usize,
    pub eval_episodes: usize,
    pub seed: u64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig { lr: 0.01, gamma: 0.97, explore_eps: 0.2, frames: 1_000_000, eval_episodes: 1000, seed: 0 }
    }
}

/// Periodic greedy-evaluation checkpoints: `(frames, mean return, SE)`.
#[derive(Debug, Clone, PartialEq)]
pub struct LearningCurve {
    pub checkpoints: Vec<(usize, f64, f64)>,
}

/// ε-greedy TD(0) over the tracker's output for `cfg.frames` environment
/// steps. Discrete trackers learn a [`QTable`] indexed by the predicted
/// node; belief trackers a [`LinearQ`] with gradient `b(u)` per weight.
/// Fully deterministic given the seed. Evaluates greedily every 5% of
/// frames.
pub fn q_learning(
    model: &LabelledModel,
    spec: TrackerSpec,
    cfg: &TrainConfig,
) -> Result<(QFunc, LearningCurve), RlError> {
    let n_actions = model.n_actions();
    let n_nodes = model.rm.n_nodes();
    let mut q = if spec.kind.uses_table() {
        QFunc::Table(QTable::zeros(model.n_obs(), n_nodes, n_actions))
    } else {
        QFunc::Linear(LinearQ::zeros(model.n_obs(), n_nodes, n_actions))
    };
    let mut curve = LearningCurve { checkpoints: Vec::new() };
    if cfg.frames == 0 {
        return Ok((q, curve));
    }
    let checkpoint_every = (cfg.frames / 20).max(1);

    let mut tracker = TrackerRuntime::new(model, spec)?;
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut frames = 0usize;
    'outer: loop {
        let episode_seed = rng.gen::<u64>();
        let (mut session, first) = session_reset(model, episode_seed);
        tracker.reset(first.0)?;
        let mut obs = first.0;
        loop {
            let node = tracker.node();
            let belief = tracker.belief();
            let action = if rng.gen::<f64>() < cfg.explore_eps {
                rng.gen_range(0..n_actions)
            } else {
                greedy_action(&q, obs, node, &belief, n_actions)
            };
            let out: StepOutcome = session.step(action).expect("session not done");
            let hidden = (spec.kind == TrackerKind::PerfectRm).then_some(out.info.rm_node);
            tracker.update(obs, action, out.obs.0, hidden)?;
            let next_node = tracker.node();
            let next_belief = tracker.belief();

            let bootstrap = if out.done {
                0.0
            } else {
                (0..n_actions)
                    .map(|a| q.q(out.obs.0, next_node, &next_belief, a))
                    .fold(f64::NEG_INFINITY, f64::max)
            };
            let target = out.reward + cfg.gamma * bootstrap;
            match &mut q {
                QFunc::Table(t) => {
                    let cell = t.q_mut(obs, node.unwrap(), action);
                    *cell += cfg.lr * (target - *cell);
                }
                QFunc::Linear(l) => {
                    let predicted = l.q(obs, &belief, action);
                    let delta = cfg.lr * (target - predicted);
                    for (u, &p) in belief.probs.iter().enumerate() {
                        if p != 0.0 {
                            *l.weights.q_mut(obs, u, action) += delta * p;
                        }
                    }
                }
            }

            obs = out.obs.0;
            frames += 1;
            if frames % checkpoint_every == 0 || frames == cfg.frames {
                let eval_seed = cfg.seed ^ 0x9e37_79b9_7f4a_7c15 ^ frames as u64;
                let (mean, se) = evaluate_policy(model, spec, &q, cfg.eval_episodes, eval_seed)?;
                curve.checkpoints.push((frames, mean, se));
            }
            if frames >= cfg.frames {
                break 'outer;
            }
            if out.done {
                break;
            }
        }
    }
    Ok((q, curve))
}

/// Greedy rollouts with a fresh tracker per episode; returns the mean
/// discounted return `Σ γ^t r_t` and its standard error.
pub fn evaluate_policy(
    model: &LabelledModel,
    spec: TrackerSpec,
    q: &QFunc,
    episodes: usize,
    seed: u64,
) -> Result<(f64, f64), RlError> {
    let mut tracker = TrackerRuntime::new(model, spec)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let n_actions = model.n_actions();
    let mut returns = Vec::with_capacity(episodes);
    for _ in 0..episodes {
        let episode_seed = rng.gen::<u64>();
        let (mut session, first) = session_reset(model, episode_seed);
        tracker.reset(first.0)?;
        let mut obs = first.0;
        let mut ret = 0.0;
        let mut discount = 1.0;
        while !session.is_done() {
            let action = greedy_action(q, obs, tracker.node(), &tracker.belief(), n_actions);
            let out = session.step(action).expect("session not done");
            let hidden = (spec.kind == TrackerKind::PerfectRm).then_some(out.info.rm_node);
            tracker.update(obs, action, out.obs.0, hidden)?;
            ret += discount * out.reward;
            discount *= model.gamma();
            obs = out.obs.0;
        }
        returns.push(ret);
    }
    Ok(mean_se(&returns))
}

/// Sample mean and standard error.
pub fn mean_se(xs: &[f64]) -> (f64, f64) {
    let n = xs.len() as f64;
    let mean = xs.iter().sum::<f64>() / n;
    if xs.len() < 2 {
        return (mean, 0.0);
    }
    let var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0);
    (mean, (var / n).sqrt())
}

/// Exact solution of a finite MDP: `V`, `Q`, and the final Bellman
/// residual.
#[derive(Debug, Clone)]
pub struct ValueSolution {
    pub v: Vec<f64>,
    pub q: Vec<f64>,
    pub residual: f64,
}

impl ValueSolution {
    pub fn q_of(&self, mdp: &SolvableMdp, state: usize, action: usize) -> f64 {
        self.q[state * mdp.n_actions + action]
    }

    /// Optimal value under the initial distribution.
    pub fn initial_value(&self, mdp: &SolvableMdp) -> f64 {
        mdp.init.iter().map(|&(s, p)| p * self.v[s]).sum()
    }

    pub fn greedy_policy(&self, mdp: &SolvableMdp) -> Vec<usize> {
        (0..mdp.n_states)
            .map(|s| {
                let mut best = 0;
                let mut best_v = f64::NEG_INFINITY;
                for a in 0..mdp.n_actions {
                    let v = self.q_of(mdp, s, a);
                    if v > best_v {
                        best_v = v;
                        best = a;
                    }
                }
                best
            })
            .collect()
    }
}

pub const VI_TOLERANCE: f64 = 1e-10;

/// Synchronous value iteration to sup-norm residual ≤ `tolerance`.
pub fn value_iteration(mdp: &SolvableMdp, tolerance: f64) -> ValueSolution {
    assert!(mdp.gamma < 1.0, "value iteration requires γ < 1");
    let mut v = vec![0.0; mdp.n_states];
    let mut q = vec![0.0; mdp.n_states * mdp.n_actions];
    let mut residual;
    loop {
        residual = 0.0f64;
        let mut next = vec![0.0; mdp.n_states];
        for s in 0..mdp.n_states {
            if mdp.terminal[s] {
                continue;
            }
            let mut best = f64::NEG_INFINITY;
            for a in 0..mdp.n_actions {
                let value: f64 = mdp
                    .row(s, a)
                    .iter()
                    .map(|t| t.prob * (t.reward + mdp.gamma * v[t.next]))
                    .sum();
                q[s * mdp.n_actions + a] = value;
                best = best.max(value);
            }
            next[s] = best;
            residual = residual.max((next[s] - v[s]).abs());
        }
        v = next;
        if residual <= tolerance {
            break;
        }
    }
    ValueSolution { v, q, residual }
}

/// The finite Mining belief MDP: states are `(grid position, set of
/// distinct relevant squares dug so far)`, where a square is relevant iff
/// its modelled gold probability is positive. Entering the depot pays the
/// subjective success probability `P(u1 | dug set) = 1 − Π_q (1 − p_q)`
/// plus movement shaping. Its optimum is the best achievable return for
/// any belief-consistent agent under the given labelling.
pub fn build_mining_belief_mdp(
    model: &LabelledModel,
    noise: MiningNoiseKind,
    epsilon: f64,
) -> Result<SolvableMdp, BeliefError> {
    use crate::envs::EnvMeta;
    let EnvMeta::Mining(layout) = &model.meta else {
        panic!("build_mining_belief_mdp requires the Mining environment")
    };
    let relevant: Vec<(usize, f64)> = (0..model.n_states())
        .filter_map(|cell| {
            let (r, c) = layout.coords(cell);
            let p = crate::labelling::mining_gold_probability(noise, epsilon, r, c);
            (p > 0.0).then_some((cell, p))
        })
        .collect();
    if relevant.len() > crate::belief::MAX_LATENTS {
        return Err(BeliefError::TooManyLatents);
    }
    let k = relevant.len();
    let n_sets = 1usize << k;
    let n_cells = model.n_states();
    let n_states = n_cells * n_sets;
    let n_actions = model.n_actions();
    let depot = layout.cell(layout.depot.0, layout.depot.1);

    let success_prob = |dug: usize| -> f64 {
        1.0 - relevant
            .iter()
            .enumerate()
            .filter(|(j, _)| dug & (1 << j) != 0)
            .map(|(_, &(_, p))| 1.0 - p)
            .product::<f64>()
    };

    let mut terminal = vec![false; n_states];
    for dug in 0..n_sets {
        terminal[depot * n_sets + dug] = true;
    }
    let mut rows = vec![Vec::new(); n_states * n_actions];
    for cell in 0..n_cells {
        if cell == depot {
            continue;
        }
        for dug in 0..n_sets {
            let s = cell * n_sets + dug;
            for a in 0..n_actions {
                // Grid dynamics are deterministic: read the successor cell
                // off the environment.
                let (next_cell, _, _) = model.transitions(cell, a).next().expect("deterministic row");
                let next_dug = if a == 4 {
                    match relevant.iter().position(|&(q, _)| q == cell) {
                        Some(j) => dug | (1 << j),
                        None => dug,
                    }
                } else {
                    dug
                };
                let mut reward = model.shaping[a];
                if next_cell == depot {
                    reward += success_prob(next_dug);
                }
                rows[s * n_actions + a] =
                    vec![RewardedTransition { next: next_cell * n_sets + next_dug, prob: 1.0, reward }];
            }
        }
    }
    let init = model
        .dynamics
        .mdp
        .init
        .iter()
        .map(|&(s, p)| (s * n_sets, p))
        .collect();
    Ok(SolvableMdp {
        n_states,
        n_actions,
        terminal,
        rows,
        gamma: model.gamma(),
        init,
    })
}
