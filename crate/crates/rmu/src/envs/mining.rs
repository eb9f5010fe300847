//! Mining gridworld: a fully observable 4×4 grid where the robot must dig
//! up gold from the rightmost column and bring it to the depot.
//!
//! Actions: up/down/left/right (deterministic, bumping a wall keeps the
//! position, −0.05 shaping each) and dig (free). `gold` holds iff dig is
//! performed on a gold square; `home` holds iff the successor square is the
//! depot. Entering the depot ends the episode at the environment level; the
//! RM then decides between success (gold in hand) and failure.

use super::{EnvMeta, LabelledModel};
use crate::mdp::{TabularMdp, TabularPomdp};
use crate::rm::PropSet;

/// Reward Machine for the Mining task: carry gold home.
///
/// Two working states (`u0` searching, `u1` carrying), two terminals
/// (`fail` reached empty-handed, `success` pays 1), five edges.
pub const MINING_RM_DSL: &str = "\
props gold home;

state u0 init;
state u1;
terminal fail;
terminal success;

edge u0 : gold & !home -> u1 @ 0;
edge u0 : home -> fail @ 0;
edge u0 : !gold & !home -> u0 @ 0;
edge u1 : home -> success @ 1;
edge u1 : !home -> u1 @ 0;
";

pub const MOVE_SHAPING: f64 = -0.05;

/// Grid geometry for the Mining family. State id = `row * cols + col`.
#[derive(Debug, Clone)]
pub struct MiningLayout {
    pub rows: usize,
    pub cols: usize,
    /// Robot start, top-left.
    pub start: (usize, usize),
    /// Depot, bottom-left; environment-terminal.
    pub depot: (usize, usize),
    /// Squares that actually contain gold (the rightmost column).
    pub gold: Vec<(usize, usize)>,
}

impl MiningLayout {
    pub fn cell(&self, row: usize, col: usize) -> usize {
        row * self.cols + col
    }

    pub fn coords(&self, state: usize) -> (usize, usize) {
        (state / self.cols, state % self.cols)
    }

    pub fn has_gold(&self, row: usize, col: usize) -> bool {
        self.gold.contains(&(row, col))
    }
}

/// The standard 4×4 Mining environment. γ = 0.97.
pub fn mining_env(horizon: usize) -> LabelledModel {
    build(4, 4, horizon, "mining")
}

/// A 2×2 shrunken instance with the same structure, small enough for the
/// brute-force belief oracle to sweep every short action sequence.
pub fn mining_small(horizon: usize) -> LabelledModel {
    build(2, 2, horizon, "mining_small")
}

fn build(rows: usize, cols: usize, horizon: usize, name: &str) -> LabelledModel {
    let layout = MiningLayout {
        rows,
        cols,
        start: (0, 0),
        depot: (rows - 1, 0),
        gold: (0..rows).map(|r| (r, cols - 1)).collect(),
    };
    let rm = crate::rm::parse_rm(MINING_RM_DSL).expect("mining RM parses");
    let gold_id = rm.alphabet().index_of("gold").unwrap();
    let home_id = rm.alphabet().index_of("home").unwrap();

    let n_states = rows * cols;
    let n_actions = 5; // up, down, left, right, dig
    let depot = layout.cell(layout.depot.0, layout.depot.1);
    let mut transition_rows = vec![Vec::new(); n_states * n_actions];
    let mut labels = vec![Vec::new(); n_states * n_actions];
    for s in 0..n_states {
        if s == depot {
            continue;
        }
        let (r, c) = layout.coords(s);
        for a in 0..n_actions {
            let (nr, nc) = match a {
                0 => (r.saturating_sub(1), c),
                1 => ((r + 1).min(rows - 1), c),
                2 => (r, c.saturating_sub(1)),
                3 => (r, (c + 1).min(cols - 1)),
                _ => (r, c),
            };
            let next = layout.cell(nr, nc);
            let mut label = PropSet::default();
            if a == 4 && layout.has_gold(r, c) {
                label = label.with(gold_id);
            }
            if next == depot {
                label = label.with(home_id);
            }
            let idx = s * n_actions + a;
            transition_rows[idx] = vec![(next, 1.0)];
            labels[idx] = vec![label];
        }
    }
    let mut terminal = vec![false; n_states];
    terminal[depot] = true;

    let start = layout.cell(layout.start.0, layout.start.1);
    let mdp = TabularMdp {
        n_states,
        n_actions,
        terminal,
        rows: transition_rows,
        gamma: 0.97,
        init: vec![(start, 1.0)],
    };
    LabelledModel {
        name: name.to_string(),
        dynamics: TabularPomdp {
            mdp,
            n_obs: n_states,
            obs_of: (0..n_states).collect(),
        },
        labels,
        rm,
        shaping: vec![MOVE_SHAPING, MOVE_SHAPING, MOVE_SHAPING, MOVE_SHAPING, 0.0],
        horizon,
        fully_observable: true,
        action_names: ["up", "down", "left", "right", "dig"].map(String::from).to_vec(),
        meta: EnvMeta::Mining(layout),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::envs::session_reset;

    const UP: usize = 0;
    const DOWN: usize = 1;
    const RIGHT: usize = 3;
    const DIG: usize = 4;

    #[test]
    fn reset_observes_top_left() {
        let model = mining_env(100);
        let (_, obs) = session_reset(&model, 0);
        assert_eq!(obs.0, 0);
    }

    #[test]
    fn dig_at_gold_advances_hidden_rm_only() {
        let model = mining_env(100);
        let (mut session, _) = session_reset(&model, 0);
        for _ in 0..3 {
            session.step(RIGHT).unwrap();
        }
        assert_eq!(session.hidden(), (3, 0)); // cell (0,3), still u0
        let out = session.step(DIG).unwrap();
        assert_eq!(out.reward, 0.0);
        assert_eq!(out.obs.0, 3); // observation: unchanged cell
        assert_eq!(session.hidden().1, 1); // hidden RM state is now u1
        assert!(!out.done);
    }

    #[test]
    fn dig_then_depot_succeeds_from_every_gold_square() {
        let model = mining_env(100);
        for gold_row in 0..4 {
            let (mut session, _) = session_reset(&model, 0);
            for _ in 0..3 {
                session.step(RIGHT).unwrap();
            }
            for _ in 0..gold_row {
                session.step(DOWN).unwrap();
            }
            session.step(DIG).unwrap();
            let mut plan = vec![2usize; 3]; // left to column 0
            plan.extend(std::iter::repeat(DOWN).take(3 - gold_row));
            let mut last = None;
            for a in plan {
                last = Some(session.step(a).unwrap());
                if last.as_ref().unwrap().done {
                    break;
                }
            }
            let last = last.unwrap();
            assert!(last.done, "row {gold_row} should reach the depot");
            assert_eq!(last.reward, 1.0 + MOVE_SHAPING);
            assert_eq!(session.hidden().1, model.rm.node_index("success").unwrap());
        }
    }

    #[test]
    fn straight_to_depot_fails_with_movement_costs() {
        let model = mining_env(100);
        let (mut session, _) = session_reset(&model, 0);
        let mut ret = 0.0;
        let mut disc = 1.0;
        let mut done = false;
        for _ in 0..3 {
            let out = session.step(DOWN).unwrap();
            ret += disc * out.reward;
            disc *= model.gamma();
            done = out.done;
        }
        assert!(done);
        let g = model.gamma();
        let expected = -0.05 * (1.0 + g + g * g);
        assert!((ret - expected).abs() < 1e-12);
        assert_eq!(session.hidden().1, model.rm.node_index("fail").unwrap());
    }

    #[test]
    fn walls_keep_position() {
        let model = mining_env(100);
        let (mut session, _) = session_reset(&model, 0);
        let out = session.step(UP).unwrap();
        assert_eq!(out.obs.0, 0);
        assert_eq!(out.reward, MOVE_SHAPING);
    }

    #[test]
    fn small_variant_shape() {
        let model = mining_small(50);
        assert_eq!(model.n_states(), 4);
        assert_eq!(model.n_actions(), 5);
        let EnvMeta::Mining(layout) = &model.meta else { panic!() };
        assert_eq!(layout.depot, (1, 0));
        assert_eq!(layout.gold, vec![(0, 1), (1, 1)]);
    }
}
