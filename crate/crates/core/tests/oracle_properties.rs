use esg_core::oracles::{hamming_weight, OracleKind};
use esg_core::rng::stream;
use esg_core::{BinaryVector, Oracle};
use proptest::prelude::*;

fn bits(max_dim: usize) -> impl Strategy<Value = Vec<bool>> {
    (1..=max_dim).prop_flat_map(|d| prop::collection::vec(any::<bool>(), d))
}

proptest! {
    #![proptest_config(ProptestConfig { failure_persistence: None, ..ProptestConfig::with_cases(256) })]

    #[test]
    fn slice_depends_only_on_weight(y in bits(40), perm_seed in any::<u64>()) {
        use rand::seq::SliceRandom;
        let oracle = Oracle::symmetric_slice(y.len()).unwrap();
        let mut shuffled = y.clone();
        shuffled.shuffle(&mut stream(perm_seed));
        let a = BinaryVector::new(y);
        let b = BinaryVector::new(shuffled);
        prop_assert_eq!(hamming_weight(&a), hamming_weight(&b));
        prop_assert_eq!(oracle.query(&a).unwrap(), oracle.query(&b).unwrap());
    }

    #[test]
    fn knapsack_values_come_from_three_bands(y in bits(30), seed in any::<u64>()) {
        let oracle = Oracle::knapsack(y.len(), &mut stream(seed)).unwrap();
        let OracleKind::Knapsack { weights, target } = oracle.kind() else { unreachable!() };
        let load: u64 = weights.iter().zip(&y).filter(|(_, &b)| b).map(|(&w, _)| u64::from(w)).sum();
        let q = oracle.query(&BinaryVector::new(y.clone())).unwrap();
        let expected = if load.abs_diff(*target) <= 2 { 20.0 } else if load > target + 2 { -5.0 } else { 0.0 };
        prop_assert_eq!(q, expected);
        prop_assert!(weights.iter().all(|w| (1..=9).contains(w)));
    }

    #[test]
    fn counter_counts_every_query(ys in prop::collection::vec(bits(6), 1..40)) {
        let oracle = Oracle::symmetric_slice(8).unwrap();
        let mut expected = 0;
        for y in &ys {
            if oracle.query(&BinaryVector::new(y.clone())).is_ok() {
                expected += 1;
            }
        }
        prop_assert_eq!(oracle.calls(), expected);
    }
}
