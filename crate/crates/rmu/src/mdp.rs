//! Finite tabular MDP/POMDP containers shared by the environments, the
//! cross product, and the value-iteration oracles.

use thiserror::Error;

/// Tolerance for probability-row normalization checks.
pub const ROW_SUM_TOL: f64 = 1e-12;

#[derive(Debug, Error)]
pub enum MdpError {
    #[error("transition row (s={state}, a={action}) sums to {sum}, expected 1")]
    BadRow { state: usize, action: usize, sum: f64 },
    #[error("initial distribution sums to {0}, expected 1")]
    BadInit(f64),
    #[error("non-finite reward on transition (s={state}, a={action})")]
    NonFiniteReward { state: usize, action: usize },
}

/// A finite MDP without a reward function: `⟨S, T, A, P, γ, μ⟩`.
///
/// Transition rows are stored sparsely as `(successor, probability)` pairs
/// indexed by `s * n_actions + a`; terminal states have empty rows.
#[derive(Debug, Clone)]
pub struct TabularMdp {
    pub n_states: usize,
    pub n_actions: usize,
    pub terminal: Vec<bool>,
    pub rows: Vec<Vec<(usize, f64)>>,
    pub gamma: f64,
    pub init: Vec<(usize, f64)>,
}

impl TabularMdp {
    pub fn row(&self, state: usize, action: usize) -> &[(usize, f64)] {
        &self.rows[state * self.n_actions + action]
    }

    /// Verifies that every non-terminal row and the initial distribution
    /// are normalized within [`ROW_SUM_TOL`].
    pub fn check_stochastic(&self) -> Result<(), MdpError> {
        for s in 0..self.n_states {
            if self.terminal[s] {
                continue;
            }
            for a in 0..self.n_actions {
                let sum: f64 = self.row(s, a).iter().map(|&(_, p)| p).sum();
                if (sum - 1.0).abs() > ROW_SUM_TOL {
                    return Err(MdpError::BadRow { state: s, action: a, sum });
                }
            }
        }
        let init_sum: f64 = self.init.iter().map(|&(_, p)| p).sum();
        if (init_sum - 1.0).abs() > ROW_SUM_TOL {
            return Err(MdpError::BadInit(init_sum));
        }
        Ok(())
    }
}

/// A finite POMDP: a [`TabularMdp`] plus an observation space.
///
/// All environments in this crate emit observations deterministically from
/// the successor state, so `O(o | s', a) = 1[o = obs_of[s']]`.
#[derive(Debug, Clone)]
pub struct TabularPomdp {
    pub mdp: TabularMdp,
    pub n_obs: usize,
    pub obs_of: Vec<usize>,
}

impl TabularPomdp {
    /// The observation row `O(· | s, a)` as a sparse distribution.
    pub fn obs_row(&self, state: usize, _action: usize) -> [(usize, f64); 1] {
        [(self.obs_of[state], 1.0)]
    }
}

/// One entry of a rewarded transition row.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RewardedTransition {
    pub next: usize,
    pub prob: f64,
    pub reward: f64,
}

/// A finite MDP with a reward function attached, the input to value
/// iteration (the cross-product output and the Mining belief MDP).
#[derive(Debug, Clone)]
pub struct SolvableMdp {
    pub n_states: usize,
    pub n_actions: usize,
    pub terminal: Vec<bool>,
    pub rows: Vec<Vec<RewardedTransition>>,
    pub gamma: f64,
    pub init: Vec<(usize, f64)>,
}

impl SolvableMdp {
    pub fn row(&self, state: usize, action: usize) -> &[RewardedTransition] {
        &self.rows[state * self.n_actions + action]
    }

    pub fn check(&self) -> Result<(), MdpError> {
        for s in 0..self.n_states {
            if self.terminal[s] {
                continue;
            }
            for a in 0..self.n_actions {
                let row = self.row(s, a);
                let sum: f64 = row.iter().map(|t| t.prob).sum();
                if (sum - 1.0).abs() > ROW_SUM_TOL {
                    return Err(MdpError::BadRow { state: s, action: a, sum });
                }
                if row.iter().any(|t| !t.reward.is_finite()) {
                    return Err(MdpError::NonFiniteReward { state: s, action: a });
                }
            }
        }
        let init_sum: f64 = self.init.iter().map(|&(_, p)| p).sum();
        if (init_sum - 1.0).abs() > ROW_SUM_TOL {
            return Err(MdpError::BadInit(init_sum));
        }
        Ok(())
    }
}
