//! RM-MDP cross product: folds a Reward Machine into a labelled
//! environment, producing an ordinary MDP with a reward function.

use crate::envs::LabelledModel;
use crate::mdp::{RewardedTransition, SolvableMdp};
use crate::rm::rm_step;

/// Builds the product MDP over `S × U` with
/// `P'((s',u')|(s,u),a) = P(s'|s,a)·1[δ_u(u, L(s,a,s')) = u']` and reward
/// `δ_r(u, L(s,a,s'))` plus the environment's action shaping. Product
/// state index = `s * |U ∪ F| + u`; terminals are `(T × U) ∪ (S × F)`.
pub fn cross_product(model: &LabelledModel) -> SolvableMdp {
    let n_nodes = model.rm.n_nodes();
    let n_states = model.n_states() * n_nodes;
    let n_actions = model.n_actions();

    let mut terminal = vec![false; n_states];
    for s in 0..model.n_states() {
        for u in 0..n_nodes {
            if model.is_env_terminal(s) || model.rm.is_terminal(u) {
                terminal[s * n_nodes + u] = true;
            }
        }
    }

    let mut rows = vec![Vec::new(); n_states * n_actions];
    for s in 0..model.n_states() {
        if model.is_env_terminal(s) {
            continue;
        }
        for u in 0..n_nodes {
            if model.rm.is_terminal(u) {
                continue;
            }
            for a in 0..n_actions {
                let row = &mut rows[(s * n_nodes + u) * n_actions + a];
                for (next, prob, label) in model.transitions(s, a) {
                    let outcome = rm_step(&model.rm, u, label).expect("u is non-terminal");
                    row.push(RewardedTransition {
                        next: next * n_nodes + outcome.next,
                        prob,
                        reward: outcome.reward + model.shaping[a],
                    });
                }
            }
        }
    }

    let init = model
        .dynamics
        .mdp
        .init
        .iter()
        .map(|&(s, p)| (s * n_nodes + model.rm.initial(), p))
        .collect();

    SolvableMdp {
        n_states,
        n_actions,
        terminal,
        rows,
        gamma: model.gamma(),
        init,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::envs::{kitchen_env, mining_env, traffic_env};

    #[test]
    fn mining_product_has_32_working_states() {
        let model = mining_env(100);
        let product = cross_product(&model);
        // 16 grid cells × 2 non-terminal RM states.
        assert_eq!(model.n_states() * model.rm.n_states(), 32);
        assert_eq!(product.n_states, 16 * 4);
        product.check().unwrap();
    }

    #[test]
    fn product_rows_are_stochastic_everywhere() {
        for model in [mining_env(100), traffic_env(6.0, 4.0, 200), kitchen_env(1.0 / 3.0, 200)] {
            cross_product(&model).check().unwrap_or_else(|e| panic!("{}: {e}", model.name));
        }
    }

    #[test]
    fn dig_transition_moves_rm_component() {
        let model = mining_env(100);
        let product = cross_product(&model);
        let n_nodes = model.rm.n_nodes();
        // Top-right cell (state 3), u0, dig: next = (3, u1) with reward 0.
        let row = product.row(3 * n_nodes, 4);
        assert_eq!(row.len(), 1);
        assert_eq!(row[0].next, 3 * n_nodes + 1);
        assert_eq!(row[0].reward, 0.0);
    }
}
