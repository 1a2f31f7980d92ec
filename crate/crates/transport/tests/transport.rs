//! Cross-checks of the transport crate against independent references:
//! permutation brute force for small couplings, dense grid search for the
//! p-norm barycenter, and the metric/geodesic identities of W2.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use transport_variance::{
    check_sqrt_var_convexity, variance, w2_distance, w2_geodesic, DiscreteMeasure, GroundSpace,
    Norm,
};

fn rand_atoms(rng: &mut ChaCha8Rng, n: usize, dim: usize, half_width: f64) -> Vec<Vec<f64>> {
    (0..n)
        .map(|_| (0..dim).map(|_| rng.gen_range(-half_width..half_width)).collect())
        .collect()
}

fn rand_measure(rng: &mut ChaCha8Rng, n: usize, dim: usize) -> DiscreteMeasure {
    let atoms = rand_atoms(rng, n, dim, 3.0);
    if rng.gen_bool(0.5) {
        DiscreteMeasure::uniform(atoms).unwrap()
    } else {
        let raw: Vec<f64> = (0..n).map(|_| rng.gen_range(0.1..1.0)).collect();
        let s: f64 = raw.iter().sum();
        DiscreteMeasure::new(atoms, raw.into_iter().map(|w| w / s).collect()).unwrap()
    }
}

#[test]
fn three_atom_uniform_matches_permutation_brute_force() {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let space = GroundSpace::euclidean(2);
    let perms = [[0, 1, 2], [0, 2, 1], [1, 0, 2], [1, 2, 0], [2, 0, 1], [2, 1, 0]];
    for _ in 0..20 {
        let xs = rand_atoms(&mut rng, 3, 2, 2.0);
        let ys = rand_atoms(&mut rng, 3, 2, 2.0);
        let mu = DiscreteMeasure::uniform(xs.clone()).unwrap();
        let nu = DiscreteMeasure::uniform(ys.clone()).unwrap();
        let (w2, _) = w2_distance(&space, &mu, &nu).unwrap();
        let best = perms
            .iter()
            .map(|p| {
                (0..3)
                    .map(|i| {
                        let d = space.distance(&xs[i], &ys[p[i]]);
                        d * d / 3.0
                    })
                    .sum::<f64>()
            })
            .fold(f64::INFINITY, f64::min);
        assert!((w2 * w2 - best).abs() < 1e-12, "w2^2={} brute={best}", w2 * w2);
    }
}

#[test]
fn geodesic_reparametrization_is_affine() {
    let space = GroundSpace::euclidean(2);
    let mu = DiscreteMeasure::uniform(vec![
        vec![0.0, 0.0],
        vec![1.0, 0.1],
        vec![0.9, 1.0],
        vec![0.05, 0.95],
    ])
    .unwrap();
    let nu = DiscreteMeasure::uniform(vec![
        vec![2.1, 0.4],
        vec![3.9, 0.3],
        vec![4.0, 2.2],
        vec![2.0, 2.0],
    ])
    .unwrap();
    let (w2, _) = w2_distance(&space, &mu, &nu).unwrap();
    let grid = [0.0, 0.25, 0.5, 0.75, 1.0];
    for (a, &s) in grid.iter().enumerate() {
        for &t in &grid[a + 1..] {
            let ms = w2_geodesic(&space, &mu, &nu, s).unwrap();
            let mt = w2_geodesic(&space, &mu, &nu, t).unwrap();
            let (d, _) = w2_distance(&space, &ms, &mt).unwrap();
            assert!(
                (d - (t - s) * w2).abs() < 1e-9,
                "s={s} t={t} d={d} expected={}",
                (t - s) * w2
            );
        }
    }
}

#[test]
fn two_dirac_interpolation_pairs_across() {
    let space = GroundSpace::euclidean(2);
    let (a, b) = (vec![0.0, 0.0], vec![0.0, 1.0]);
    let (c, d) = (vec![3.0, 0.0], vec![3.0, 2.0]);
    let mu = DiscreteMeasure::uniform(vec![a.clone(), b.clone()]).unwrap();
    let nu = DiscreteMeasure::uniform(vec![c.clone(), d.clone()]).unwrap();
    for k in 0..=10 {
        let t = k as f64 / 10.0;
        let mt = w2_geodesic(&space, &mu, &nu, t).unwrap();
        assert_eq!(mt.len(), 2);
        let g1: Vec<f64> = (0..2).map(|i| (1.0 - t) * a[i] + t * c[i]).collect();
        let g2: Vec<f64> = (0..2).map(|i| (1.0 - t) * b[i] + t * d[i]).collect();
        let mut atoms = mt.atoms().to_vec();
        atoms.sort_by(|p, q| p[1].total_cmp(&q[1]));
        for (got, want) in atoms.iter().zip([&g1, &g2]) {
            for i in 0..2 {
                assert!((got[i] - want[i]).abs() < 1e-15, "t={t}");
            }
        }
        assert!(mt.weights().iter().all(|&w| (w - 0.5).abs() < 1e-15));

        let (var, _) = variance(&space, &mt).unwrap();
        let dist = space.distance(&g1, &g2);
        assert!((var - 0.25 * dist * dist).abs() < 1e-10, "t={t} var={var}");
    }
}

#[test]
fn two_dirac_variance_identity_holds_in_p_norm() {
    let space = GroundSpace::new(2, Norm::P(3.0)).unwrap();
    let mu = DiscreteMeasure::uniform(vec![vec![0.0, 0.0], vec![0.3, 1.1]]).unwrap();
    let nu = DiscreteMeasure::uniform(vec![vec![2.5, 0.2], vec![2.8, 1.6]]).unwrap();
    for k in 0..=6 {
        let t = k as f64 / 6.0;
        let mt = w2_geodesic(&space, &mu, &nu, t).unwrap();
        assert_eq!(mt.len(), 2);
        let (var, _) = variance(&space, &mt).unwrap();
        let dist = space.distance(&mt.atoms()[0], &mt.atoms()[1]);
        assert!((var - 0.25 * dist * dist).abs() < 1e-10, "t={t} var={var}");
    }
}

#[test]
fn p3_variance_matches_dense_grid_search() {
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let space = GroundSpace::new(2, Norm::P(3.0)).unwrap();
    let atoms = rand_atoms(&mut rng, 3, 2, 0.5);
    let mu = DiscreteMeasure::uniform(atoms.clone()).unwrap();
    let (var, _) = variance(&space, &mu).unwrap();

    let objective = |z: &[f64]| -> f64 {
        atoms
            .iter()
            .map(|a| {
                let d = space.distance(z, a);
                d * d / 3.0
            })
            .sum()
    };
    // p-norms are monotone in each coordinate distance, so the minimizer
    // lies inside the atom bounding box; a small margin guards the edges
    let mut lo = [f64::INFINITY; 2];
    let mut hi = [f64::NEG_INFINITY; 2];
    for a in &atoms {
        for i in 0..2 {
            lo[i] = lo[i].min(a[i] - 0.02);
            hi[i] = hi[i].max(a[i] + 0.02);
        }
    }
    let step = 1e-3;
    let mut best = f64::INFINITY;
    let mut x = lo[0];
    while x <= hi[0] {
        let mut y = lo[1];
        while y <= hi[1] {
            best = best.min(objective(&[x, y]));
            y += step;
        }
        x += step;
    }
    assert!((var - best).abs() < 1e-5, "optimizer={var} grid={best}");
    assert!(var <= best + 1e-9);
}

#[test]
fn w2_is_a_metric_on_sampled_triples() {
    let mut rng = ChaCha8Rng::seed_from_u64(23);
    for trial in 0..50 {
        let space = if trial % 2 == 0 {
            GroundSpace::euclidean(2)
        } else {
            GroundSpace::new(2, Norm::P(3.0)).unwrap()
        };
        let (na, nb, nc) = (rng.gen_range(1..=5), rng.gen_range(1..=5), rng.gen_range(1..=5));
        let a = rand_measure(&mut rng, na, 2);
        let b = rand_measure(&mut rng, nb, 2);
        let c = rand_measure(&mut rng, nc, 2);
        let (dab, _) = w2_distance(&space, &a, &b).unwrap();
        let (dba, _) = w2_distance(&space, &b, &a).unwrap();
        let (dbc, _) = w2_distance(&space, &b, &c).unwrap();
        let (dac, _) = w2_distance(&space, &a, &c).unwrap();
        assert!((dab - dba).abs() < 1e-10, "trial {trial}: {dab} vs {dba}");
        assert!(dac <= dab + dbc + 1e-9, "trial {trial}: {dac} > {dab}+{dbc}");
        let (daa, _) = w2_distance(&space, &a, &a).unwrap();
        assert!(daa < 1e-10);
    }
}

#[test]
fn variance_is_translation_equivariant() {
    let mut rng = ChaCha8Rng::seed_from_u64(31);
    let shift = [1.75, -0.5];
    for trial in 0..20 {
        let n = rng.gen_range(2..=5);
        let mu = rand_measure(&mut rng, n, 2);
        let shifted = DiscreteMeasure::new(
            mu.atoms()
                .iter()
                .map(|a| a.iter().zip(&shift).map(|(x, s)| x + s).collect())
                .collect(),
            mu.weights().to_vec(),
        )
        .unwrap();

        let euclid = GroundSpace::euclidean(2);
        let (v0, b0) = variance(&euclid, &mu).unwrap();
        let (v1, b1) = variance(&euclid, &shifted).unwrap();
        assert!((v0 - v1).abs() < 1e-10, "trial {trial}");
        for i in 0..2 {
            assert!((b0[i] + shift[i] - b1[i]).abs() < 1e-10, "trial {trial}");
        }

        // the p-norm barycenter comes from a derivative-free optimizer that
        // resolves the argmin of a flat quadratic bowl only to about the
        // square root of the value tolerance, so the argmin comparison is
        // correspondingly looser
        let p3 = GroundSpace::new(2, Norm::P(3.0)).unwrap();
        let (v0, b0) = variance(&p3, &mu).unwrap();
        let (v1, b1) = variance(&p3, &shifted).unwrap();
        assert!((v0 - v1).abs() < 1e-9, "trial {trial}: {v0} vs {v1}");
        for i in 0..2 {
            assert!((b0[i] + shift[i] - b1[i]).abs() < 1e-4, "trial {trial}");
        }
    }
}

#[test]
fn sqrt_var_is_constant_when_measures_coincide() {
    let space = GroundSpace::euclidean(2);
    let mu = DiscreteMeasure::uniform(vec![vec![0.0, 0.0], vec![1.0, 2.0], vec![-1.0, 0.5]])
        .unwrap();
    let report = check_sqrt_var_convexity(&space, &mu, &mu, 9).unwrap();
    assert!(report.pass);
    let lo = report.sqrt_var.iter().fold(f64::INFINITY, |a, &b| a.min(b));
    let hi = report.sqrt_var.iter().fold(f64::NEG_INFINITY, |a, &b| a.max(b));
    assert!(hi - lo < 1e-12);
}

#[test]
fn sqrt_var_convexity_passes_on_random_pairs_euclidean() {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let space = GroundSpace::euclidean(2);
    for trial in 0..20 {
        let mu = DiscreteMeasure::uniform(rand_atoms(&mut rng, 4, 2, 2.0)).unwrap();
        let nu = DiscreteMeasure::uniform(rand_atoms(&mut rng, 4, 2, 2.0)).unwrap();
        let report = check_sqrt_var_convexity(&space, &mu, &nu, 17).unwrap();
        assert!(report.pass, "trial {trial}: min_gap={}", report.min_gap);
    }
}

#[test]
fn sqrt_var_convexity_passes_on_random_pairs_p3() {
    let mut rng = ChaCha8Rng::seed_from_u64(6);
    let space = GroundSpace::new(2, Norm::P(3.0)).unwrap();
    for trial in 0..20 {
        let mu = DiscreteMeasure::uniform(rand_atoms(&mut rng, 4, 2, 2.0)).unwrap();
        let nu = DiscreteMeasure::uniform(rand_atoms(&mut rng, 4, 2, 2.0)).unwrap();
        let report = check_sqrt_var_convexity(&space, &mu, &nu, 17).unwrap();
        assert!(report.pass, "trial {trial}: min_gap={}", report.min_gap);
    }
}
