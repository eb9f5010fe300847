//! Traffic Light corridor: fetch a package from the far end of a 1-D road
//! and bring it home without crossing the intersection on a red light.
//!
//! The light follows a three-phase Markov chain with geometric green and
//! red durations and a single yellow step. The light colour is only
//! observable when the agent faces the intersection from outside it, which
//! makes the environment partially observable.

use super::{EnvMeta, LabelledModel};
use crate::mdp::{TabularMdp, TabularPomdp};
use crate::rm::PropSet;

/// RM over {pkg, home, red_cross}: pay 1 for the first package pickup,
/// remember whether a red light was ever crossed, and settle ±1 on
/// delivery. States: u0 start, u1 ticketed, u2 carrying, u3 carrying with
/// a ticket.
pub const TRAFFIC_RM_DSL: &str = "\
props pkg home red_cross;

state u0 init;
state u1;
state u2;
state u3;
terminal delivered_ok;
terminal delivered_ticket;

edge u0 : pkg -> u2 @ 1;
edge u0 : red_cross -> u1 @ 0;
edge u1 : pkg -> u3 @ 1;
edge u2 : home -> delivered_ok @ 1;
edge u2 : red_cross -> u3 @ 0;
edge u3 : home -> delivered_ticket @ -1;
";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum LightPhase {
    Green,
    Yellow,
    Red,
}

impl LightPhase {
    pub const ALL: [LightPhase; 3] = [LightPhase::Green, LightPhase::Yellow, LightPhase::Red];

    pub fn index(self) -> usize {
        match self {
            LightPhase::Green => 0,
            LightPhase::Yellow => 1,
            LightPhase::Red => 2,
        }
    }
}

/// Corridor geometry and light-chain parameters.
///
/// Home is cell 0, the package waits at the last cell, and the intersection
/// occupies the inclusive cell range `intersection`. The light turns yellow
/// with probability `1/green_mean` per green step, stays yellow exactly one
/// step, and turns back green with probability `1/red_mean` per red step.
#[derive(Debug, Clone)]
pub struct TrafficLayout {
    pub length: usize,
    pub intersection: (usize, usize),
    pub green_mean: f64,
    pub red_mean: f64,
}

impl TrafficLayout {
    pub fn pkg_cell(&self) -> usize {
        self.length - 1
    }

    pub fn in_intersection(&self, pos: usize) -> bool {
        pos >= self.intersection.0 && pos <= self.intersection.1
    }

    /// The light is visible iff the agent faces the intersection from
    /// outside it; inside the intersection it is never visible.
    pub fn light_visible(&self, pos: usize, facing_right: bool) -> bool {
        (facing_right && pos < self.intersection.0) || (!facing_right && pos > self.intersection.1)
    }

    /// Stationary distribution `(π_G, π_Y, π_R)` of the phase chain;
    /// `π ∝ (green_mean, 1, red_mean)`, so `P(red) = 4/11` at defaults.
    pub fn stationary(&self) -> [f64; 3] {
        let total = self.green_mean + 1.0 + self.red_mean;
        [self.green_mean / total, 1.0 / total, self.red_mean / total]
    }

    pub fn n_states(&self) -> usize {
        self.length * 2 * 3 * 2
    }

    pub fn encode(&self, pos: usize, facing_right: bool, phase: LightPhase, has_pkg: bool) -> usize {
        ((pos * 2 + facing_right as usize) * 3 + phase.index()) * 2 + has_pkg as usize
    }

    pub fn decode(&self, state: usize) -> (usize, bool, LightPhase, bool) {
        let has_pkg = state % 2 == 1;
        let rest = state / 2;
        let phase = LightPhase::ALL[rest % 3];
        let rest = rest / 3;
        (rest / 2, rest % 2 == 1, phase, has_pkg)
    }

    pub fn n_obs(&self) -> usize {
        self.length * 2 * 2 * 4
    }

    fn encode_obs(&self, pos: usize, facing_right: bool, has_pkg: bool, light: Option<LightPhase>) -> usize {
        let light_code = light.map_or(3, LightPhase::index);
        ((pos * 2 + facing_right as usize) * 2 + has_pkg as usize) * 4 + light_code
    }
}

/// Decoded agent observation: position, facing, package flag, and the light
/// colour when visible.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct TrafficObs {
    pub pos: usize,
    pub facing_right: bool,
    pub has_pkg: bool,
    pub light: Option<LightPhase>,
}

impl TrafficObs {
    pub fn decode(obs: usize) -> TrafficObs {
        let light = match obs % 4 {
            0 => Some(LightPhase::Green),
            1 => Some(LightPhase::Yellow),
            2 => Some(LightPhase::Red),
            _ => None,
        };
        let rest = obs / 4;
        TrafficObs {
            pos: rest / 4,
            facing_right: (rest / 2) % 2 == 1,
            has_pkg: rest % 2 == 1,
            light,
        }
    }
}

/// The standard 11-cell Traffic Light environment, intersection at cells
/// 5–6. γ = 0.97; defaults `(green_mean, red_mean) = (6, 4)`.
pub fn traffic_env(green_mean: f64, red_mean: f64, horizon: usize) -> LabelledModel {
    build(
        TrafficLayout { length: 11, intersection: (5, 6), green_mean, red_mean },
        horizon,
        "traffic",
    )
}

/// A 3-cell shrunken instance (home 0, intersection {1}, package 2) for the
/// brute-force belief oracle.
pub fn traffic_small(green_mean: f64, red_mean: f64, horizon: usize) -> LabelledModel {
    build(
        TrafficLayout { length: 3, intersection: (1, 1), green_mean, red_mean },
        horizon,
        "traffic_small",
    )
}

fn build(layout: TrafficLayout, horizon: usize, name: &str) -> LabelledModel {
    assert!(layout.green_mean >= 1.0 && layout.red_mean >= 1.0);
    let rm = crate::rm::parse_rm(TRAFFIC_RM_DSL).expect("traffic RM parses");
    let pkg_id = rm.alphabet().index_of("pkg").unwrap();
    let home_id = rm.alphabet().index_of("home").unwrap();
    let red_id = rm.alphabet().index_of("red_cross").unwrap();

    let n_states = layout.n_states();
    let n_actions = 3; // forward, backward, wait
    let mut transition_rows = vec![Vec::new(); n_states * n_actions];
    let mut labels = vec![Vec::new(); n_states * n_actions];
    for s in 0..n_states {
        let (pos, facing_right, phase, has_pkg) = layout.decode(s);
        for a in 0..n_actions {
            let (next_pos, next_facing) = match a {
                0 => ((pos + 1).min(layout.length - 1), true),
                1 => (pos.saturating_sub(1), false),
                _ => (pos, facing_right),
            };
            let next_pkg = has_pkg || next_pos == layout.pkg_cell();
            // Phase successors: geometric green/red durations, yellow one step.
            let phase_row: Vec<(LightPhase, f64)> = match phase {
                LightPhase::Green => {
                    let p = 1.0 / layout.green_mean;
                    if p >= 1.0 {
                        vec![(LightPhase::Yellow, 1.0)]
                    } else {
                        vec![(LightPhase::Green, 1.0 - p), (LightPhase::Yellow, p)]
                    }
                }
                LightPhase::Yellow => vec![(LightPhase::Red, 1.0)],
                LightPhase::Red => {
                    let p = 1.0 / layout.red_mean;
                    if p >= 1.0 {
                        vec![(LightPhase::Green, 1.0)]
                    } else {
                        vec![(LightPhase::Red, 1.0 - p), (LightPhase::Green, p)]
                    }
                }
            };
            let idx = s * n_actions + a;
            for (next_phase, prob) in phase_row {
                let next = layout.encode(next_pos, next_facing, next_phase, next_pkg);
                let mut label = PropSet::default();
                if next_pos == layout.pkg_cell() {
                    label = label.with(pkg_id);
                }
                if next_pos == 0 {
                    label = label.with(home_id);
                }
                if layout.in_intersection(next_pos) && next_phase == LightPhase::Red {
                    label = label.with(red_id);
                }
                transition_rows[idx].push((next, prob));
                labels[idx].push(label);
            }
        }
    }

    // Start at home facing right without the package; phase ~ stationary.
    let pi = layout.stationary();
    let init: Vec<(usize, f64)> = LightPhase::ALL
        .iter()
        .map(|&phase| (layout.encode(0, true, phase, false), pi[phase.index()]))
        .collect();

    let obs_of: Vec<usize> = (0..n_states)
        .map(|s| {
            let (pos, facing_right, phase, has_pkg) = layout.decode(s);
            let light = layout.light_visible(pos, facing_right).then_some(phase);
            layout.encode_obs(pos, facing_right, has_pkg, light)
        })
        .collect();
    let n_obs = layout.n_obs();

    let mdp = TabularMdp {
        n_states,
        n_actions,
        terminal: vec![false; n_states],
        rows: transition_rows,
        gamma: 0.97,
        init,
    };
    LabelledModel {
        name: name.to_string(),
        dynamics: TabularPomdp { mdp, n_obs, obs_of },
        labels,
        rm,
        shaping: vec![0.0; n_actions],
        horizon,
        fully_observable: false,
        action_names: ["forward", "backward", "wait"].map(String::from).to_vec(),
        meta: EnvMeta::Traffic(layout),
    }
}
