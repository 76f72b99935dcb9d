mod support;

use geobehave::cohort::Label;
use geobehave::forest::{Ensemble, ForestHyperparams};
use proptest::prelude::*;
use support::cart::{build, Impurity};

fn dataset() -> impl Strategy<Value = (Vec<Vec<f64>>, Vec<Label>, Vec<Vec<f64>>)> {
    (1usize..=4, 2usize..=30).prop_flat_map(|(d, n)| {
        // a coarse value grid makes ties and repeated values common
        let value = prop_oneof![(0u8..6).prop_map(|v| f64::from(v) / 5.0), 0.0f64..1.0];
        (
            prop::collection::vec(prop::collection::vec(value.clone(), d), n),
            prop::collection::vec(any::<bool>().prop_map(|b| if b { Label::High } else { Label::Low }), n),
            prop::collection::vec(prop::collection::vec(0.0f64..1.0, d), 20),
        )
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(200))]

    #[test]
    fn single_tree_matches_brute_force((rows, labels, queries) in dataset(), entropy in any::<bool>(), depth in prop::option::of(1u32..5)) {
        let (name, kind) = if entropy { ("entropy", Impurity::Entropy) } else { ("gini", Impurity::Gini) };
        let hp = ForestHyperparams {
            n_trees: 1,
            max_depth: depth,
            criterion: name.into(),
            bootstrap: false,
            features_per_split: rows[0].len(),
            seed: 11,
        };
        let forest = Ensemble::fit(&rows, &labels, &hp).unwrap();
        let oracle = build(&rows, &labels, kind, hp.effective_depth());
        for x in rows.iter().chain(&queries) {
            prop_assert_eq!(forest.vote(x).class, oracle.predict(x));
        }
    }
}
