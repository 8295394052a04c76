use dsa_core::instances;
use dsa_core::oracle::{NodeRef, ReferenceEngine};
use proptest::prelude::*;

proptest! {
    #![proptest_config(ProptestConfig::with_cases(20))]

    #[test]
    fn value_functions_are_convex_along_segments(
        name in prop_oneof![Just("tiny3"), Just("tiny4")],
        a in 0.0..1.0f64,
        b in 0.0..1.0f64,
    ) {
        let p = instances::bundled(name).unwrap();
        let e = ReferenceEngine::new(&p);
        let v = |u: f64| e.value_function(2, Some(0), &[u]).unwrap().0;
        let mid = v(0.5 * (a + b));
        prop_assert!(mid <= 0.5 * (v(a) + v(b)) + 1e-8, "v({}) = {} above chord", 0.5 * (a + b), mid);
    }

    #[test]
    fn expectation_is_the_probability_weighted_outcome_values(u in 0.0..1.0f64) {
        let p = instances::bundled("tiny3").unwrap();
        let e = ReferenceEngine::new(&p);
        let (v, _) = e.value_function(2, Some(0), &[u]).unwrap();
        let support = p.distribution.support(2, Some(0)).unwrap();
        let mut weighted = 0.0;
        for (j, o) in support.iter().enumerate() {
            let node = NodeRef { stage: 2, parent: Some(0), outcome_index: j };
            let s = e.stage_saddle(node, &[u]).unwrap();
            weighted += o.prob * s.value;
            // The node value is also its full stage cost at the minimizer.
            let cost = e.stage_cost(node, s.x.as_slice()).unwrap();
            prop_assert!((cost - s.value).abs() <= 1e-6 * (1.0 + s.value.abs()), "{} vs {}", cost, s.value);
        }
        prop_assert!((weighted - v).abs() <= 1e-9);
    }
}
