mod support;

use proptest::prelude::*;
use support::oracle::{run_library, run_oracle, Model};

proptest! {
    #![proptest_config(ProptestConfig { cases: 256, ..ProptestConfig::default() })]

    #[test]
    fn fixpoint_matches_brute_force_oracle(seed in any::<u64>()) {
        let model = Model::random(seed);
        prop_assert_eq!(run_library(&model), run_oracle(&model), "scenario {}", model.to_json());
    }

    #[test]
    fn blocked_writes_leave_state_unchanged(seed in any::<u64>()) {
        let model = Model::random(seed);
        let observed = run_library(&model);
        for pair in observed.windows(2) {
            if pair[1].blocked_by.is_some() {
                prop_assert_eq!(&pair[0].state, &pair[1].state);
                prop_assert!(pair[1].fired.is_empty());
            }
        }
    }

    #[test]
    fn cascade_depth_never_exceeds_limit(seed in any::<u64>()) {
        let model = Model::random(seed);
        for obs in run_library(&model) {
            prop_assert!(obs.fired.iter().all(|(_, d)| (1..=support::oracle::CASCADE_LIMIT).contains(d)));
            prop_assert!(obs.fired.windows(2).all(|w| w[0].1 <= w[1].1));
        }
    }
}

#[test]
fn oscillating_rules_truncate_at_the_limit() {
    // Two rules flipping the same property forever.
    let model = Model {
        vars: vec![(0, 0), (0, 1)],
        initial: vec![false, false],
        rules: vec![
            support::oracle::Rule {
                constraint: false,
                cond: support::oracle::Cond::Atom { var: 0, negate: false, value: true },
                priority: None,
                writes: vec![(0, false)],
                blocks: vec![],
            },
            support::oracle::Rule {
                constraint: false,
                cond: support::oracle::Cond::Atom { var: 0, negate: false, value: false },
                priority: None,
                writes: vec![(0, true)],
                blocks: vec![],
            },
        ],
        writes: vec![(1, true)],
    };
    let observed = run_library(&model);
    assert!(observed[0].truncated);
    assert_eq!(observed[0].fired.len(), 16);
    assert_eq!(observed, run_oracle(&model));
}
