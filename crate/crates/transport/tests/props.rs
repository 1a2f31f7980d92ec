//! Property tests for the structural invariants of W2.

use proptest::prelude::*;
use transport_variance::{w2_distance, w2_geodesic, DiscreteMeasure, GroundSpace};

fn measure_strategy() -> impl Strategy<Value = DiscreteMeasure> {
    (
        prop::collection::vec(prop::collection::vec(-2.0..2.0f64, 2), 1..5),
        prop::collection::vec(0.05..1.0f64, 1..5),
    )
        .prop_map(|(atoms, raw)| {
            let n = atoms.len();
            let raw = &raw[..raw.len().min(n)];
            let mut weights = vec![raw[raw.len() - 1]; n];
            weights[..raw.len()].copy_from_slice(raw);
            let s: f64 = weights.iter().sum();
            DiscreteMeasure::new(atoms, weights.into_iter().map(|w| w / s).collect()).unwrap()
        })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn w2_is_symmetric(mu in measure_strategy(), nu in measure_strategy()) {
        let space = GroundSpace::euclidean(2);
        let (ab, _) = w2_distance(&space, &mu, &nu).unwrap();
        let (ba, _) = w2_distance(&space, &nu, &mu).unwrap();
        prop_assert!((ab - ba).abs() < 1e-10);
    }

    #[test]
    fn w2_scales_with_the_atoms(mu in measure_strategy(), nu in measure_strategy(),
                                lambda in 0.1..4.0f64) {
        let space = GroundSpace::euclidean(2);
        let scale = |m: &DiscreteMeasure| {
            DiscreteMeasure::new(
                m.atoms().iter().map(|a| a.iter().map(|x| lambda * x).collect()).collect(),
                m.weights().to_vec(),
            )
            .unwrap()
        };
        let (d, _) = w2_distance(&space, &mu, &nu).unwrap();
        let (ds, _) = w2_distance(&space, &scale(&mu), &scale(&nu)).unwrap();
        prop_assert!((ds - lambda * d).abs() < 1e-9 * (1.0 + lambda * d));
    }

    #[test]
    fn geodesic_endpoints_recover_the_measures(mu in measure_strategy(),
                                               nu in measure_strategy()) {
        let space = GroundSpace::euclidean(2);
        let start = w2_geodesic(&space, &mu, &nu, 0.0).unwrap();
        let end = w2_geodesic(&space, &mu, &nu, 1.0).unwrap();
        let (d0, _) = w2_distance(&space, &start, &mu).unwrap();
        let (d1, _) = w2_distance(&space, &end, &nu).unwrap();
        prop_assert!(d0 < 1e-9 && d1 < 1e-9);
    }
}
