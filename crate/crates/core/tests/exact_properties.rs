mod common;

use common::*;
use esg_core::exact::{multilinear_gradient, multilinear_value, MAX_ENUMERATION_DIM};
use esg_core::{BinaryVector, Error, Oracle, ProbVector};
use proptest::prelude::*;

fn table_and_point(max_dim: usize) -> impl Strategy<Value = (Vec<f64>, Vec<f64>)> {
    (1..=max_dim).prop_flat_map(|d| (prop::collection::vec(-10.0f64..10.0, 1 << d), prop::collection::vec(0.0f64..=1.0, d)))
}

proptest! {
    #![proptest_config(ProptestConfig { failure_persistence: None, ..ProptestConfig::with_cases(128) })]

    #[test]
    fn matches_independent_enumeration((values, x) in table_and_point(8)) {
        let oracle = Oracle::table(x.len(), values.clone()).unwrap();
        let q = |i: u64| values[i as usize];
        let p = ProbVector::new(x.clone()).unwrap();
        prop_assert!((multilinear_value(&p, &oracle).unwrap() - brute_value(&x, &q)).abs() <= 1e-10);
        for (a, b) in multilinear_gradient(&p, &oracle).unwrap().iter().zip(brute_gradient(&x, &q)) {
            prop_assert!((a - b).abs() <= 1e-10);
        }
    }

    #[test]
    fn vertices_reproduce_the_table(values in (1usize..=6).prop_flat_map(|d| prop::collection::vec(-10.0f64..10.0, 1 << d))) {
        let d = values.len().trailing_zeros() as usize;
        let oracle = Oracle::table(d, values.clone()).unwrap();
        for idx in 0..1u64 << d {
            let y = BinaryVector::from_index(d, idx);
            let x = ProbVector::new(y.as_bits().iter().map(|&b| f64::from(u8::from(b))).collect()).unwrap();
            prop_assert_eq!(multilinear_value(&x, &oracle).unwrap(), values[idx as usize]);
        }
    }

    #[test]
    fn affine_in_each_coordinate((values, x) in table_and_point(6), i in 0usize..6) {
        let d = x.len();
        let i = i % d;
        let oracle = Oracle::table(d, values).unwrap();
        let at = |t: f64| {
            let mut v = x.clone();
            v[i] = t;
            multilinear_value(&ProbVector::new(v).unwrap(), &oracle).unwrap()
        };
        prop_assert!((at(0.5) - 0.5 * (at(0.0) + at(1.0))).abs() <= 1e-12 * (1.0 + at(0.5).abs()) + 1e-12);
    }
}

#[test]
fn enumeration_guard() {
    let x = ProbVector::filled(MAX_ENUMERATION_DIM + 1, 0.5).unwrap();
    let oracle = Oracle::symmetric_slice(MAX_ENUMERATION_DIM + 1).unwrap();
    assert!(matches!(multilinear_value(&x, &oracle), Err(Error::DimensionTooLarge { .. })));
}
