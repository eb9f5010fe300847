//! Belief-over-RM-state strategies: Thresholding, Independent Belief
//! Updating, Belief Updating+ (persistent latents), and the exact Bayes
//! filter, plus a brute-force oracle and TV-distance diagnostics.
//!
//! A belief `ũ` is a distribution over `U ∪ F`: the non-terminal RM states
//! plus each terminal. Terminal entries are absorbing so trackers remain
//! well-defined past predicted termination.

use crate::envs::LabelledModel;
use crate::labelling::LabelDistribution;
use crate::rm::{rm_step, PropSet, RewardMachine};
use thiserror::Error;

/// Probability-vector normalization tolerance for beliefs.
pub const BELIEF_TOL: f64 = 1e-9;

/// Cap on distinct persistent latent keys (2^20 enumeration worst case).
pub const MAX_LATENTS: usize = 20;

#[derive(Debug, Error)]
pub enum BeliefError {
    #[error("thresholding tracker already reached terminal node {0}")]
    TerminalPrediction(usize),
    #[error("persistent tracker exceeded {MAX_LATENTS} distinct latent keys")]
    TooManyLatents,
    #[error("filter mass is zero: observation impossible under the model")]
    ZeroMass,
    #[error("belief lengths differ: {0} vs {1}")]
    LengthMismatch(usize, usize),
    #[error("brute-force enumeration budget exceeded ({0} trajectories)")]
    EnumerationBudget(usize),
}

/// A probability vector over `U ∪ F` (entries ≥ 0, sum 1 within 1e-9).
#[derive(Debug, Clone, PartialEq)]
pub struct Belief {
    pub probs: Vec<f64>,
}

impl Belief {
    pub fn point_mass(n_nodes: usize, node: usize) -> Belief {
        let mut probs = vec![0.0; n_nodes];
        probs[node] = 1.0;
        Belief { probs }
    }

    pub fn is_valid(&self) -> bool {
        self.probs.iter().all(|&p| p >= -BELIEF_TOL)
            && (self.probs.iter().sum::<f64>() - 1.0).abs() <= BELIEF_TOL
    }

    /// Total mass on terminal nodes.
    pub fn terminal_mass(&self, rm: &RewardMachine) -> f64 {
        self.probs.iter().enumerate().filter(|&(u, _)| rm.is_terminal(u)).map(|(_, &p)| p).sum()
    }
}

/// Computes `(1/2)·Σ |b1(u) − b2(u)| ∈ [0, 1]`.
pub fn tv_distance(b1: &Belief, b2: &Belief) -> Result<f64, BeliefError> {
    if b1.probs.len() != b2.probs.len() {
        return Err(BeliefError::LengthMismatch(b1.probs.len(), b2.probs.len()));
    }
    Ok(0.5 * b1.probs.iter().zip(&b2.probs).map(|(a, b)| (a - b).abs()).sum::<f64>())
}

/// Discretizes each proposition at 0.5; ties round up (`≥`).
pub fn threshold_assignment(probs: &LabelDistribution) -> PropSet {
    let mut sigma = PropSet::EMPTY;
    for (i, &p) in probs.probs.iter().enumerate() {
        sigma.set(i, p >= 0.5);
    }
    sigma
}

/// Thresholding tracker: a single discrete RM-state prediction `û`.
#[derive(Debug, Clone)]
pub struct ThresholdTracker {
    pub node: usize,
}

impl ThresholdTracker {
    pub fn new(rm: &RewardMachine) -> ThresholdTracker {
        ThresholdTracker { node: rm.initial() }
    }

    pub fn belief(&self, rm: &RewardMachine) -> Belief {
        Belief::point_mass(rm.n_nodes(), self.node)
    }
}

/// Steps the tracked state on the thresholded assignment and returns the
/// point mass on the new prediction. Updating past a predicted terminal is
/// an error: the caller must handle predicted termination.
pub fn thresholding_update(
    tracker: &mut ThresholdTracker,
    probs: &LabelDistribution,
    rm: &RewardMachine,
) -> Result<Belief, BeliefError> {
    if rm.is_terminal(tracker.node) {
        return Err(BeliefError::TerminalPrediction(tracker.node));
    }
    let outcome = rm_step(rm, tracker.node, threshold_assignment(probs)).expect("checked non-terminal");
    tracker.node = outcome.next;
    Ok(tracker.belief(rm))
}

/// Independent Belief Updating:
/// `ũ'(u') = Σ_{σ∈2^AP} Σ_{u∈U} P(σ)·ũ(u)·1[δ_u(u,σ)=u']`, with
/// `P(σ) = Π_i p_i^{σ_i}(1−p_i)^{1−σ_i}` treating propositions as
/// independent. Terminal mass passes through unchanged.
pub fn independent_update(b: &Belief, probs: &LabelDistribution, rm: &RewardMachine) -> Belief {
    let n_nodes = rm.n_nodes();
    let mut out = vec![0.0; n_nodes];
    for u in 0..n_nodes {
        if rm.is_terminal(u) {
            out[u] += b.probs[u];
        }
    }
    for sigma in rm.alphabet().assignments() {
        let mut p_sigma = 1.0;
        for (i, &p) in probs.probs.iter().enumerate() {
            p_sigma *= if sigma.contains(i) { p } else { 1.0 - p };
        }
        if p_sigma == 0.0 {
            continue;
        }
        for u in 0..rm.n_states() {
            if b.probs[u] == 0.0 {
                continue;
            }
            let next = rm_step(rm, u, sigma).expect("non-terminal").next;
            out[next] += b.probs[u] * p_sigma;
        }
    }
    Belief { probs: out }
}

/// One memoized persistent latent: a proposition queried at a specific
/// `(state, action)` key, Bernoulli with the first emitted probability.
#[derive(Debug, Clone)]
struct Latent {
    key: (usize, usize, usize),
    prob: f64,
}

/// Belief Updating+ tracker.
///
/// Propositions whose emitted probability is strictly inside (0,1) are
/// treated as persistent latents keyed by `(state, action, prop)`:
/// re-querying a key contributes no new information. The belief is the
/// exact marginal over the joint of the memoized Bernoullis, obtained by
/// stepping the RM along the query history separately for each of the
/// `2^k` latent configurations.
#[derive(Debug, Clone)]
pub struct PersistentTracker {
    latents: Vec<Latent>,
    /// One entry per assignment of the latents: `(bits, current RM node)`.
    configs: Vec<(u32, usize)>,
    n_nodes: usize,
}

impl PersistentTracker {
    pub fn new(rm: &RewardMachine) -> PersistentTracker {
        PersistentTracker {
            latents: Vec::new(),
            configs: vec![(0, rm.initial())],
            n_nodes: rm.n_nodes(),
        }
    }

    fn config_weight(&self, bits: u32) -> f64 {
        self.latents
            .iter()
            .enumerate()
            .map(|(j, l)| if bits & (1 << j) != 0 { l.prob } else { 1.0 - l.prob })
            .product()
    }

    pub fn belief(&self) -> Belief {
        let mut probs = vec![0.0; self.n_nodes];
        for &(bits, node) in &self.configs {
            probs[node] += self.config_weight(bits);
        }
        Belief { probs }
    }
}

/// Advances the tracker for one transition queried at `key = (state,
/// action)` with emitted probabilities `probs`.
pub fn persistent_update(
    tracker: &mut PersistentTracker,
    key: (usize, usize),
    probs: &LabelDistribution,
    rm: &RewardMachine,
) -> Result<Belief, BeliefError> {
    // Resolve each proposition to an exact bit or a latent index,
    // memoizing new latents (which doubles the configuration set).
    enum Resolved {
        Exact(bool),
        Latent(usize),
    }
    let mut resolved = Vec::with_capacity(probs.probs.len());
    for (i, &p) in probs.probs.iter().enumerate() {
        if p <= 0.0 {
            resolved.push(Resolved::Exact(false));
        } else if p >= 1.0 {
            resolved.push(Resolved::Exact(true));
        } else {
            let lkey = (key.0, key.1, i);
            let j = match tracker.latents.iter().position(|l| l.key == lkey) {
                Some(j) => j,
                None => {
                    if tracker.latents.len() >= MAX_LATENTS {
                        return Err(BeliefError::TooManyLatents);
                    }
                    let j = tracker.latents.len();
                    tracker.latents.push(Latent { key: lkey, prob: p });
                    let mut doubled = Vec::with_capacity(tracker.configs.len() * 2);
                    for &(bits, node) in &tracker.configs {
                        doubled.push((bits, node));
                        doubled.push((bits | (1 << j), node));
                    }
                    tracker.configs = doubled;
                    j
                }
            };
            resolved.push(Resolved::Latent(j));
        }
    }
    for (bits, node) in tracker.configs.iter_mut() {
        if rm.is_terminal(*node) {
            continue; // absorbing
        }
        let mut sigma = PropSet::EMPTY;
        for (i, r) in resolved.iter().enumerate() {
            let value = match r {
                Resolved::Exact(v) => *v,
                Resolved::Latent(j) => *bits & (1 << *j) != 0,
            };
            sigma.set(i, value);
        }
        *node = rm_step(rm, *node, sigma).expect("non-terminal").next;
    }
    Ok(tracker.belief())
}

/// Exact Bayes filter over the joint hidden state (environment state × RM
/// node) of the cross-product (PO)MDP.
#[derive(Debug, Clone)]
pub struct ExactFilter {
    /// `joint[s * n_nodes + u]`, normalized.
    pub joint: Vec<f64>,
}

/// Initial filter state: `μ'(s,u) = μ(s)·1[u = u₀]` conditioned on the
/// first observation.
pub fn exact_filter_init(model: &LabelledModel, first_obs: usize) -> Result<ExactFilter, BeliefError> {
    let n_nodes = model.rm.n_nodes();
    let mut joint = vec![0.0; model.n_states() * n_nodes];
    for &(s, p) in &model.dynamics.mdp.init {
        if model.obs(s) == first_obs {
            joint[s * n_nodes + model.rm.initial()] = p;
        }
    }
    normalize(&mut joint)?;
    Ok(ExactFilter { joint })
}

impl ExactFilter {
    /// RM-state marginal of the joint.
    pub fn belief(&self, model: &LabelledModel) -> Belief {
        let n_nodes = model.rm.n_nodes();
        let mut probs = vec![0.0; n_nodes];
        for (idx, &p) in self.joint.iter().enumerate() {
            probs[idx % n_nodes] += p;
        }
        Belief { probs }
    }
}

/// One forward-filter step conditioned on `(action, observation)`:
/// `b'(s',u') ∝ Σ_{s,u} b(s,u)·P(s'|s,a)·1[δ_u(u,L(s,a,s'))=u']·1[obs(s')=o]`.
///
/// Only live hypotheses propagate: mass on environment-terminal states or
/// terminal RM nodes is dropped, because such trajectories could not have
/// produced a further step. Zero remaining mass is an error (the trace is
/// impossible under the model).
pub fn exact_filter_update(
    filter: &mut ExactFilter,
    action: usize,
    obs: usize,
    model: &LabelledModel,
) -> Result<Belief, BeliefError> {
    let n_nodes = model.rm.n_nodes();
    let mut next = vec![0.0; filter.joint.len()];
    for s in 0..model.n_states() {
        if model.is_env_terminal(s) {
            continue;
        }
        for u in 0..model.rm.n_states() {
            let mass = filter.joint[s * n_nodes + u];
            if mass == 0.0 {
                continue;
            }
            for (succ, prob, label) in model.transitions(s, action) {
                if model.obs(succ) != obs {
                    continue;
                }
                let u_next = rm_step(&model.rm, u, label).expect("non-terminal").next;
                next[succ * n_nodes + u_next] += mass * prob;
            }
        }
    }
    normalize(&mut next)?;
    filter.joint = next;
    Ok(filter.belief(model))
}

fn normalize(v: &mut [f64]) -> Result<(), BeliefError> {
    let total: f64 = v.iter().sum();
    if total <= 0.0 {
        return Err(BeliefError::ZeroMass);
    }
    for p in v.iter_mut() {
        *p /= total;
    }
    Ok(())
}

/// Independent oracle for the filter: enumerates every hidden trajectory
/// consistent with the history `(o₀, a₀, o₁, …, a_{T-1}, o_T)`, weights it
/// by `Π P · Π O`, and sums weights by final RM node. Trajectories must be
/// live (non-terminal) before each non-final step.
pub fn brute_force_belief(
    model: &LabelledModel,
    first_obs: usize,
    history: &[(usize, usize)],
) -> Result<Belief, BeliefError> {
    const BUDGET: usize = 50_000_000;

    struct Dfs<'a> {
        model: &'a LabelledModel,
        history: &'a [(usize, usize)],
        probs: Vec<f64>,
        visited: usize,
        budget_hit: bool,
    }
    impl Dfs<'_> {
        fn go(&mut self, s: usize, u: usize, depth: usize, weight: f64) {
            self.visited += 1;
            if self.visited > BUDGET {
                self.budget_hit = true;
                return;
            }
            if depth == self.history.len() {
                self.probs[u] += weight;
                return;
            }
            // A trajectory that already terminated could not have stepped.
            if self.model.is_env_terminal(s) || self.model.rm.is_terminal(u) {
                return;
            }
            let (action, obs) = self.history[depth];
            let transitions: Vec<_> = self.model.transitions(s, action).collect();
            for (succ, prob, label) in transitions {
                if self.model.obs(succ) != obs {
                    continue;
                }
                let u_next = rm_step(&self.model.rm, u, label).expect("non-terminal").next;
                self.go(succ, u_next, depth + 1, weight * prob);
                if self.budget_hit {
                    return;
                }
            }
        }
    }

    let mut dfs = Dfs {
        model,
        history,
        probs: vec![0.0; model.rm.n_nodes()],
        visited: 0,
        budget_hit: false,
    };
    for &(s, p) in &model.dynamics.mdp.init {
        if model.obs(s) == first_obs {
            dfs.go(s, model.rm.initial(), 0, p);
        }
        if dfs.budget_hit {
            return Err(BeliefError::EnumerationBudget(BUDGET));
        }
    }
    let mut probs = dfs.probs;
    normalize(&mut probs)?;
    Ok(Belief { probs })
}
