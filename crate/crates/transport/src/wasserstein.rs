//! W2 distance, optimal couplings, displacement interpolation, and the
//! sqrt-variance convexity check along displacement geodesics.

use serde::Serialize;

use crate::assignment::min_cost_assignment;
use crate::simplex::transport_lp;
use crate::variance::variance;
use crate::{DiscreteMeasure, Error, GroundSpace, Result};

const CONVEXITY_TOL: f64 = 1e-7;

/// Transport plan between two discrete measures, stored dense row-major.
#[derive(Clone, Debug, Serialize)]
pub struct Coupling {
    pub rows: usize,
    pub cols: usize,
    /// entry (i, j) is the mass moved from source atom i to target atom j
    pub plan: Vec<f64>,
}

impl Coupling {
    pub fn entry(&self, i: usize, j: usize) -> f64 {
        self.plan[i * self.cols + j]
    }

    /// Entries carrying positive mass.
    pub fn support(&self) -> impl Iterator<Item = (usize, usize, f64)> + '_ {
        let cols = self.cols;
        self.plan
            .iter()
            .enumerate()
            .filter(|(_, &w)| w > 0.0)
            .map(move |(k, &w)| (k / cols, k % cols, w))
    }
}

/// W2 distance between `mu` and `nu` together with an optimal coupling.
///
/// Equal-size uniform measures go through the assignment solver; everything
/// else through the transportation simplex.  Both are exact, so the returned
/// cost is the true minimum up to floating-point rounding.
pub fn w2_distance(
    space: &GroundSpace,
    mu: &DiscreteMeasure,
    nu: &DiscreteMeasure,
) -> Result<(f64, Coupling)> {
    space.check()?;
    mu.check_dim(space)?;
    nu.check_dim(space)?;
    let m = mu.len();
    let n = nu.len();
    let mut cost = vec![0.0_f64; m * n];
    for (i, a) in mu.atoms().iter().enumerate() {
        for (j, b) in nu.atoms().iter().enumerate() {
            let d = space.distance(a, b);
            cost[i * n + j] = d * d;
        }
    }

    let plan = if m == n && mu.is_uniform() && nu.is_uniform() {
        let perm = min_cost_assignment(&cost, m);
        let w = 1.0 / m as f64;
        let mut plan = vec![0.0_f64; m * n];
        for (i, &j) in perm.iter().enumerate() {
            plan[i * n + j] = w;
        }
        plan
    } else {
        transport_lp(&cost, mu.weights(), nu.weights())
    };

    let total: f64 = plan.iter().zip(&cost).map(|(p, c)| p * c).sum();
    Ok((total.max(0.0).sqrt(), Coupling { rows: m, cols: n, plan }))
}

/// Displacement interpolation at time `t` along the coupling `plan`:
/// each supported pair (i, j) contributes the atom (1-t) x_i + t y_j with
/// the pair's mass.
pub fn displacement(
    mu: &DiscreteMeasure,
    nu: &DiscreteMeasure,
    plan: &Coupling,
    t: f64,
) -> Result<DiscreteMeasure> {
    if plan.rows != mu.len() || plan.cols != nu.len() {
        return Err(Error::BadArgument(format!(
            "coupling is {}x{} but the measures have {} and {} atoms",
            plan.rows,
            plan.cols,
            mu.len(),
            nu.len()
        )));
    }
    if !(0.0..=1.0).contains(&t) {
        return Err(Error::BadArgument(format!(
            "interpolation parameter {t} outside [0, 1]"
        )));
    }
    let mut atoms = Vec::new();
    let mut weights = Vec::new();
    for (i, j, w) in plan.support() {
        let x = &mu.atoms()[i];
        let y = &nu.atoms()[j];
        atoms.push(
            x.iter()
                .zip(y)
                .map(|(&a, &b)| (1.0 - t) * a + t * b)
                .collect(),
        );
        weights.push(w);
    }
    DiscreteMeasure::new(atoms, weights)
}

/// Point on the W2 geodesic from `mu` to `nu` at parameter `t`.
pub fn w2_geodesic(
    space: &GroundSpace,
    mu: &DiscreteMeasure,
    nu: &DiscreteMeasure,
    t: f64,
) -> Result<DiscreteMeasure> {
    let (_, plan) = w2_distance(space, mu, nu)?;
    displacement(mu, nu, &plan, t)
}

/// Result of the sqrt-variance convexity scan along one W2 geodesic.
#[derive(Clone, Debug, Serialize)]
pub struct ConvexityReport {
    pub pass: bool,
    /// Smallest chord-minus-midpoint gap (f(t-h) + f(t+h))/2 - f(t) over
    /// the interior grid points; convexity makes every gap nonnegative.
    pub min_gap: f64,
    pub ts: Vec<f64>,
    pub sqrt_var: Vec<f64>,
}

/// Evaluates sqrt(var) of the displacement interpolation on an inclusive
/// t-grid and applies the three-point convexity test at every interior
/// point.  Grid points are independent, so the scan parallelizes trivially;
/// at desk scale the sequential loop is already instant.
pub fn check_sqrt_var_convexity(
    space: &GroundSpace,
    mu: &DiscreteMeasure,
    nu: &DiscreteMeasure,
    grid_size: usize,
) -> Result<ConvexityReport> {
    if grid_size < 3 {
        return Err(Error::BadArgument(format!(
            "convexity grid needs at least 3 points, got {grid_size}"
        )));
    }
    let (_, plan) = w2_distance(space, mu, nu)?;
    let mut ts = Vec::with_capacity(grid_size);
    let mut sqrt_var = Vec::with_capacity(grid_size);
    for k in 0..grid_size {
        let t = k as f64 / (grid_size - 1) as f64;
        let mid = displacement(mu, nu, &plan, t)?;
        let (var, _) = variance(space, &mid)?;
        ts.push(t);
        sqrt_var.push(var.max(0.0).sqrt());
    }
    let mut min_gap = f64::INFINITY;
    for k in 1..grid_size - 1 {
        min_gap = min_gap.min(0.5 * (sqrt_var[k - 1] + sqrt_var[k + 1]) - sqrt_var[k]);
    }
    Ok(ConvexityReport { pass: min_gap >= -CONVEXITY_TOL, min_gap, ts, sqrt_var })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::Norm;

    #[test]
    fn dirac_pair_gives_ground_distance() {
        let space = GroundSpace::new(2, Norm::P(3.0)).unwrap();
        let mu = DiscreteMeasure::dirac(vec![0.0, 0.0]).unwrap();
        let nu = DiscreteMeasure::dirac(vec![1.0, 1.0]).unwrap();
        let (w2, plan) = w2_distance(&space, &mu, &nu).unwrap();
        assert!((w2 - space.distance(&[0.0, 0.0], &[1.0, 1.0])).abs() < 1e-14);
        assert_eq!(plan.plan, vec![1.0]);
    }

    #[test]
    fn identical_measures_couple_on_the_diagonal() {
        let space = GroundSpace::euclidean(2);
        let mu = DiscreteMeasure::uniform(vec![
            vec![0.0, 0.0],
            vec![1.0, 0.5],
            vec![-2.0, 3.0],
        ])
        .unwrap();
        let (w2, plan) = w2_distance(&space, &mu, &mu).unwrap();
        assert!(w2 < 1e-15);
        for i in 0..3 {
            assert!((plan.entry(i, i) - 1.0 / 3.0).abs() < 1e-15);
        }
    }

    #[test]
    fn nonuniform_weights_match_a_hand_solved_plan() {
        let space = GroundSpace::euclidean(1);
        let mu = DiscreteMeasure::new(vec![vec![0.0], vec![1.0]], vec![0.7, 0.3]).unwrap();
        let nu = DiscreteMeasure::new(vec![vec![0.0], vec![1.0]], vec![0.3, 0.7]).unwrap();
        let (w2, plan) = w2_distance(&space, &mu, &nu).unwrap();
        assert!((w2 - 0.4_f64.sqrt()).abs() < 1e-14);
        assert!((plan.entry(0, 0) - 0.3).abs() < 1e-14);
        assert!((plan.entry(0, 1) - 0.4).abs() < 1e-14);
        assert!((plan.entry(1, 1) - 0.3).abs() < 1e-14);
    }

    #[test]
    fn interpolation_hits_both_endpoints() {
        let space = GroundSpace::euclidean(2);
        let mu = DiscreteMeasure::uniform(vec![vec![0.0, 0.0], vec![1.0, 0.0]]).unwrap();
        let nu = DiscreteMeasure::uniform(vec![vec![0.0, 2.0], vec![1.0, 2.0]]).unwrap();
        for (t, target) in [(0.0, &mu), (1.0, &nu)] {
            let gamma_t = w2_geodesic(&space, &mu, &nu, t).unwrap();
            let (d, _) = w2_distance(&space, &gamma_t, target).unwrap();
            assert!(d < 1e-12, "t={t} d={d}");
        }
    }

    #[test]
    fn interpolation_rejects_out_of_range_parameter() {
        let space = GroundSpace::euclidean(1);
        let mu = DiscreteMeasure::dirac(vec![0.0]).unwrap();
        let nu = DiscreteMeasure::dirac(vec![1.0]).unwrap();
        assert!(matches!(
            w2_geodesic(&space, &mu, &nu, 1.5),
            Err(Error::BadArgument(_))
        ));
    }

    #[test]
    fn assignment_agrees_with_lp_on_uniform_instances() {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(41);
        for m in [2usize, 3, 5, 8] {
            for _ in 0..5 {
                let cost: Vec<f64> = (0..m * m).map(|_| rng.gen_range(0.0..10.0)).collect();
                let w = vec![1.0 / m as f64; m];
                let perm = min_cost_assignment(&cost, m);
                let by_assignment: f64 =
                    perm.iter().enumerate().map(|(i, &j)| cost[i * m + j] / m as f64).sum();
                let flow = transport_lp(&cost, &w, &w);
                let by_lp: f64 = flow.iter().zip(&cost).map(|(f, c)| f * c).sum();
                assert!(
                    (by_assignment - by_lp).abs() < 1e-9,
                    "m={m} assignment={by_assignment} lp={by_lp}"
                );
            }
        }
    }

    #[test]
    fn two_dirac_convexity_scan_passes() {
        let space = GroundSpace::euclidean(2);
        let mu = DiscreteMeasure::uniform(vec![vec![0.0, 0.0], vec![0.0, 1.0]]).unwrap();
        let nu = DiscreteMeasure::uniform(vec![vec![3.0, 0.0], vec![3.0, 2.0]]).unwrap();
        let report = check_sqrt_var_convexity(&space, &mu, &nu, 17).unwrap();
        assert!(report.pass, "min_gap={}", report.min_gap);
        assert_eq!(report.ts.len(), 17);
    }
}
