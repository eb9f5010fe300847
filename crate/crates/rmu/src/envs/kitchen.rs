//! Kitchen chores: a hallway/kitchen grid split by a wall with one door.
//!
//! Some chores may already be done at reset (each independently with
//! probability `p_done`), but the agent cannot see the chore flags until it
//! is inside the kitchen. It must return to the charging port, which ends
//! the episode with reward 1 iff every chore is complete.

use super::{EnvMeta, LabelledModel};
use crate::mdp::{TabularMdp, TabularPomdp};
use crate::rm::{parse_rm, PropSet, RewardMachine};
use std::fmt::Write as _;

pub const DOOR_CHORE_SHAPING: f64 = -0.05;

/// Grid geometry for the Kitchen family.
///
/// Cells left of `wall_col` are the hallway, cells right of it the kitchen;
/// the wall column is impassable except for the door cell, which is
/// passable only while the door is open. `chores` are kitchen squares.
#[derive(Debug, Clone)]
pub struct KitchenLayout {
    pub size: usize,
    pub wall_col: usize,
    pub door: (usize, usize),
    pub port: (usize, usize),
    pub start: (usize, usize),
    pub chores: Vec<(usize, usize)>,
    pub p_done: f64,
}

impl KitchenLayout {
    pub fn is_wall(&self, cell: (usize, usize)) -> bool {
        cell.1 == self.wall_col && cell != self.door
    }

    pub fn in_kitchen(&self, cell: (usize, usize)) -> bool {
        cell.1 > self.wall_col
    }

    /// Walkable cells in row-major order; the state encoding indexes into
    /// this list.
    pub fn walkable(&self) -> Vec<(usize, usize)> {
        (0..self.size)
            .flat_map(|r| (0..self.size).map(move |c| (r, c)))
            .filter(|&cell| !self.is_wall(cell))
            .collect()
    }

    pub fn n_chores(&self) -> usize {
        self.chores.len()
    }
}

/// Chore-subset Reward Machine: one state per subset of chores known done
/// (indexed by bitmask, `s0` = none, initial) plus the `done` terminal.
/// Arriving at the port pays 1 iff every chore is complete.
pub fn kitchen_rm(n_chores: usize) -> RewardMachine {
    let mut dsl = String::from("props ");
    for i in 0..n_chores {
        write!(dsl, "chore_{i} ").unwrap();
    }
    dsl.push_str("port;\n");
    for mask in 0..(1usize << n_chores) {
        if mask == 0 {
            dsl.push_str("state s0 init;\n");
        } else {
            writeln!(dsl, "state s{mask};").unwrap();
        }
    }
    dsl.push_str("terminal done;\n");
    let full = (1usize << n_chores) - 1;
    for mask in 0..=full {
        let missing: Vec<usize> = (0..n_chores).filter(|i| mask & (1 << i) == 0).collect();
        // Port edges first: success needs every missing chore asserted now.
        let success_guard: Vec<String> =
            std::iter::once("port".to_string()).chain(missing.iter().map(|i| format!("chore_{i}"))).collect();
        writeln!(dsl, "edge s{mask} : {} -> done @ 1;", success_guard.join(" & ")).unwrap();
        if !missing.is_empty() {
            writeln!(dsl, "edge s{mask} : port -> done @ 0;").unwrap();
        }
        // Progress edges: larger newly-observed sets first so the most
        // specific guard fires.
        let mut supersets: Vec<usize> = (1..=full).filter(|m| m & mask == 0).collect();
        supersets.sort_by_key(|m| std::cmp::Reverse(m.count_ones()));
        for sub in supersets {
            let guard: Vec<String> =
                (0..n_chores).filter(|i| sub & (1 << i) != 0).map(|i| format!("chore_{i}")).collect();
            writeln!(dsl, "edge s{mask} : {} -> s{} @ 0;", guard.join(" & "), mask | sub).unwrap();
        }
    }
    parse_rm(&dsl).expect("generated kitchen RM parses")
}

/// The standard 7×7 Kitchen with three chores. γ = 0.99.
pub fn kitchen_env(p_done: f64, horizon: usize) -> LabelledModel {
    build(
        KitchenLayout {
            size: 7,
            wall_col: 3,
            door: (3, 3),
            port: (0, 0),
            start: (3, 0),
            chores: vec![(1, 5), (3, 5), (5, 5)],
            p_done,
        },
        horizon,
        "kitchen",
    )
}

/// A 3×3 single-chore shrunken instance for the brute-force belief oracle.
pub fn kitchen_small(p_done: f64, horizon: usize) -> LabelledModel {
    build(
        KitchenLayout {
            size: 3,
            wall_col: 1,
            door: (1, 1),
            port: (0, 0),
            start: (1, 0),
            chores: vec![(1, 2)],
            p_done,
        },
        horizon,
        "kitchen_small",
    )
}

fn build(layout: KitchenLayout, horizon: usize, name: &str) -> LabelledModel {
    assert!((0.0..=1.0).contains(&layout.p_done));
    let k = layout.n_chores();
    let rm = kitchen_rm(k);
    let port_id = rm.alphabet().index_of("port").unwrap();

    let walkable = layout.walkable();
    let n_cells = walkable.len();
    let cell_index = |cell: (usize, usize)| walkable.iter().position(|&c| c == cell);
    let n_flag_sets = 1usize << k;
    let n_states = n_cells * 2 * n_flag_sets;
    let encode = |pos: usize, door_open: bool, flags: usize| (pos * 2 + door_open as usize) * n_flag_sets + flags;
    let n_actions = 6; // up, down, left, right, toggle-door, do-chore
    let port_pos = cell_index(layout.port).expect("port is walkable");

    let mut transition_rows = vec![Vec::new(); n_states * n_actions];
    let mut labels = vec![Vec::new(); n_states * n_actions];
    let mut terminal = vec![false; n_states];
    for door_open in [false, true] {
        for flags in 0..n_flag_sets {
            terminal[encode(port_pos, door_open, flags)] = true;
        }
    }
    for pos in 0..n_cells {
        if pos == port_pos {
            continue;
        }
        let (r, c) = walkable[pos];
        for door_open in [false, true] {
            for flags in 0..n_flag_sets {
                let s = encode(pos, door_open, flags);
                for a in 0..n_actions {
                    let mut next_pos = pos;
                    let mut next_door = door_open;
                    let mut next_flags = flags;
                    match a {
                        0..=3 => {
                            let target = match a {
                                0 => (r.wrapping_sub(1), c),
                                1 => (r + 1, c),
                                2 => (r, c.wrapping_sub(1)),
                                _ => (r, c + 1),
                            };
                            let passable = target.0 < layout.size
                                && target.1 < layout.size
                                && !layout.is_wall(target)
                                && (target != layout.door || door_open);
                            if passable {
                                next_pos = cell_index(target).unwrap();
                            }
                        }
                        4 => {
                            let (dr, dc) = layout.door;
                            let adjacent = (r == dr && c.abs_diff(dc) == 1) || (c == dc && r.abs_diff(dr) == 1);
                            if adjacent {
                                next_door = !door_open;
                            }
                        }
                        _ => {
                            if let Some(i) = layout.chores.iter().position(|&ch| ch == (r, c)) {
                                next_flags |= 1 << i;
                            }
                        }
                    }
                    let next = encode(next_pos, next_door, next_flags);
                    let mut label = PropSet::from_bits(next_flags as u32);
                    if next_pos == port_pos {
                        label = label.with(port_id);
                    }
                    let idx = s * n_actions + a;
                    transition_rows[idx] = vec![(next, 1.0)];
                    labels[idx] = vec![label];
                }
            }
        }
    }

    // Reset: start cell, door closed, each chore pre-done w.p. p_done.
    let start_pos = cell_index(layout.start).expect("start is walkable");
    let init: Vec<(usize, f64)> = (0..n_flag_sets)
        .map(|flags| {
            let prob: f64 = (0..k)
                .map(|i| if flags & (1 << i) != 0 { layout.p_done } else { 1.0 - layout.p_done })
                .product();
            (encode(start_pos, false, flags), prob)
        })
        .filter(|&(_, p)| p > 0.0)
        .collect();

    // Chore flags are observable only from inside the kitchen; code
    // `n_flag_sets` means "unknown".
    let n_obs = n_cells * 2 * (n_flag_sets + 1);
    let obs_of: Vec<usize> = (0..n_states)
        .map(|s| {
            let flags = s % n_flag_sets;
            let door = (s / n_flag_sets) % 2;
            let pos = s / (2 * n_flag_sets);
            let flag_obs = if layout.in_kitchen(walkable[pos]) { flags } else { n_flag_sets };
            (pos * 2 + door) * (n_flag_sets + 1) + flag_obs
        })
        .collect();

    let mut shaping = vec![0.0; n_actions];
    shaping[4] = DOOR_CHORE_SHAPING;
    shaping[5] = DOOR_CHORE_SHAPING;

    let mdp = TabularMdp {
        n_states,
        n_actions,
        terminal,
        rows: transition_rows,
        gamma: 0.99,
        init,
    };
    LabelledModel {
        name: name.to_string(),
        dynamics: TabularPomdp { mdp, n_obs, obs_of },
        labels,
        rm,
        shaping,
        horizon,
        fully_observable: false,
        action_names: ["up", "down", "left", "right", "toggle_door", "do_chore"].map(String::from).to_vec(),
        meta: EnvMeta::Kitchen(layout),
    }
}
