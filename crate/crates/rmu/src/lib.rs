//! Reward Machines under noisy and hidden symbol grounding.
//!
//! The crate provides: a Reward Machine core with a small text DSL
//! (`rm`), tabular environments whose RM state is hidden from the agent
//! (`envs`, `mdp`), approximate labelling functions (`labelling`), the
//! belief-over-RM-state strategies and their oracles (`belief`), tabular
//! reinforcement learning and exact solvers (`rl`, `product`), and an
//! experiment harness with a CLI (`harness`).

pub mod belief;
pub mod envs;
pub mod harness;
pub mod labelling;
pub mod mdp;
pub mod product;
pub mod rl;
pub mod rm;
