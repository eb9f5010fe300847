//! Randomized invariant suites: DSL round-trip, RM totality, belief
//! normalization, and transition-row stochasticity, each with 10^4 cases.

use proptest::prelude::*;

use rmu::belief::{
    exact_filter_init, exact_filter_update, independent_update, persistent_update, Belief,
    PersistentTracker,
};
use rmu::envs::{kitchen_small, mining_env, mining_small, traffic_small, LabelledModel};
use rmu::labelling::LabelDistribution;
use rmu::rm::{
    format_rm, parse_rm, rm_step, Alphabet, Formula, PropSet, RewardMachine, RmEdge,
};

const CASES: u32 = 10_000;

fn arb_formula(n_props: usize) -> impl Strategy<Value = Formula> {
    let leaf = prop_oneof![
        Just(Formula::True),
        Just(Formula::False),
        (0..n_props).prop_map(Formula::lit),
    ];
    leaf.prop_recursive(3, 16, 2, |inner| {
        prop_oneof![
            inner.clone().prop_map(Formula::not),
            (inner.clone(), inner.clone()).prop_map(|(a, b)| Formula::and(a, b)),
            (inner.clone(), inner).prop_map(|(a, b)| Formula::or(a, b)),
        ]
    })
}

prop_compose! {
    fn arb_machine()(
        n_props in 1usize..=4,
        n_states in 1usize..=4,
        n_terminals in 1usize..=3,
    )(
        edges in {
            let n_nodes = n_states + n_terminals;
            prop::collection::vec(
                prop::collection::vec(
                    (arb_formula(n_props), 0..n_nodes, -4i32..=4),
                    0..=3,
                ),
                n_states,
            )
        },
        initial in 0..n_states,
        n_props in Just(n_props),
        n_states in Just(n_states),
        n_terminals in Just(n_terminals),
    ) -> RewardMachine {
        let alphabet =
            Alphabet::new((0..n_props).map(|i| format!("p{i}"))).unwrap();
        let states: Vec<String> = (0..n_states).map(|i| format!("u{i}")).collect();
        let terminals: Vec<String> = (0..n_terminals).map(|i| format!("t{i}")).collect();
        let edges = edges
            .into_iter()
            .map(|list| {
                list.into_iter()
                    .map(|(guard, target, reward)| RmEdge {
                        guard,
                        target,
                        reward: f64::from(reward) / 4.0,
                    })
                    .collect()
            })
            .collect();
        RewardMachine::new(alphabet, states, terminals, initial, edges).unwrap()
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(CASES))]

    #[test]
    fn dsl_round_trip(rm in arb_machine()) {
        let text = format_rm(&rm);
        let reparsed = parse_rm(&text).unwrap();
        prop_assert_eq!(&reparsed, &rm);
        // A second cycle is a fixed point.
        prop_assert_eq!(format_rm(&reparsed), text);
    }

    #[test]
    fn rm_step_is_total(rm in arb_machine(), bits in 0u32..16) {
        let sigma = PropSet::from_bits(bits & ((1 << rm.alphabet().len()) - 1));
        for u in 0..rm.n_nodes() {
            if rm.is_terminal(u) {
                prop_assert!(rm_step(&rm, u, sigma).is_err());
            } else {
                let outcome = rm_step(&rm, u, sigma).unwrap();
                prop_assert!(outcome.next < rm.n_nodes());
                prop_assert!(outcome.reward.is_finite());
            }
        }
    }
}

fn mining_rm() -> RewardMachine {
    mining_env(10).rm
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(CASES))]

    /// Independent updating keeps the belief a normalized distribution
    /// for arbitrary streams of label probabilities.
    #[test]
    fn independent_beliefs_stay_normalized(
        steps in prop::collection::vec(
            (0.0f64..=1.0, prop::bool::ANY),
            1..8,
        ),
    ) {
        let rm = mining_rm();
        let mut b = Belief::point_mass(rm.n_nodes(), rm.initial());
        for (gold, home) in steps {
            let mut probs = LabelDistribution::zeros(2);
            probs.probs[0] = gold;
            probs.probs[1] = if home { 1.0 } else { 0.0 };
            b = independent_update(&b, &probs, &rm);
            prop_assert!(b.is_valid());
        }
    }

    /// Persistent updating keeps the belief normalized across repeated
    /// and novel (state, action) queries.
    #[test]
    fn persistent_beliefs_stay_normalized(
        steps in prop::collection::vec(
            ((0usize..6, 0usize..2), 0.05f64..=0.95),
            1..8,
        ),
    ) {
        let rm = mining_rm();
        let mut tracker = PersistentTracker::new(&rm);
        for ((state, action), gold) in steps {
            let mut probs = LabelDistribution::zeros(2);
            probs.probs[0] = gold;
            persistent_update(&mut tracker, (state, action), &probs, &rm).unwrap();
            prop_assert!(tracker.belief().is_valid());
        }
    }

    /// The exact filter stays normalized along arbitrary live action
    /// sequences of the small environments.
    #[test]
    fn exact_filter_stays_normalized(
        actions in prop::collection::vec(0usize..6, 1..8),
        env in 0usize..3,
        seed in 0u64..1000,
    ) {
        let model = match env {
            0 => mining_small(8),
            1 => traffic_small(3.0, 2.0, 8),
            _ => kitchen_small(0.5, 8),
        };
        let (mut session, first) = rmu::envs::session_reset(&model, seed);
        let mut filter = exact_filter_init(&model, first.0).unwrap();
        prop_assert!(filter.belief(&model).is_valid());
        for a in actions {
            if session.is_done() {
                break;
            }
            let a = a % model.n_actions();
            let out = session.step(a).unwrap();
            exact_filter_update(&mut filter, a, out.obs.0, &model).unwrap();
            let b = filter.belief(&model);
            prop_assert!(b.is_valid());
            if out.done {
                break;
            }
        }
    }

    /// Every environment's transition matrix is row-stochastic for
    /// arbitrary parameters.
    #[test]
    fn transition_rows_sum_to_one(
        env in 0usize..3,
        horizon in 1usize..50,
        p_done in 0.0f64..=1.0,
        green_mean in 1.0f64..10.0,
        red_mean in 1.0f64..10.0,
    ) {
        let model: LabelledModel = match env {
            0 => mining_small(horizon),
            1 => traffic_small(green_mean, red_mean, horizon),
            _ => kitchen_small(p_done, horizon),
        };
        model.dynamics.mdp.check_stochastic().unwrap();
    }
}
