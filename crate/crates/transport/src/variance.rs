//! Variance and barycenter of a discrete measure: the minimum of
//! z -> sum_i w_i d(z, x_i)^2 and its argmin.

use crate::{DiscreteMeasure, GroundSpace, Norm, Result};

/// Variance of `mu` and the barycenter attaining it.
///
/// Euclidean ground spaces use the closed form (weighted mean).  For p-norms
/// the objective is strictly convex but has no closed form, so it is
/// minimized by a deterministic Nelder-Mead descent started at the weighted
/// mean with three refinement restarts at shrinking scales; the value is
/// good to 1e-9 on the objective (the internal stopping tolerance is 1e-12,
/// leaving margin).
pub fn variance(space: &GroundSpace, mu: &DiscreteMeasure) -> Result<(f64, Vec<f64>)> {
    space.check()?;
    mu.check_dim(space)?;
    let k = space.dim;
    let atoms = mu.atoms();
    let weights = mu.weights();

    let mut mean = vec![0.0_f64; k];
    for (a, &w) in atoms.iter().zip(weights) {
        for (m, &c) in mean.iter_mut().zip(a) {
            *m += w * c;
        }
    }
    let objective = |z: &[f64]| -> f64 {
        atoms
            .iter()
            .zip(weights)
            .map(|(a, &w)| {
                let d = space.distance(z, a);
                w * d * d
            })
            .sum()
    };

    if matches!(space.norm, Norm::Euclidean) {
        let var = objective(&mean);
        return Ok((var, mean));
    }

    let mut spread = 0.0_f64;
    for d in 0..k {
        let lo = atoms.iter().map(|a| a[d]).fold(f64::INFINITY, f64::min);
        let hi = atoms.iter().map(|a| a[d]).fold(f64::NEG_INFINITY, f64::max);
        spread = spread.max(hi - lo);
    }
    if spread == 0.0 {
        return Ok((0.0, mean));
    }

    let mut best = (objective(&mean), mean);
    for restart in 0..3 {
        let scale = spread * 0.5 * 0.1_f64.powi(restart);
        let refined = nelder_mead(&objective, &best.1, scale);
        if refined.0 < best.0 {
            best = refined;
        }
    }
    Ok(best)
}

/// Standard Nelder-Mead (reflection 1, expansion 2, contraction 1/2,
/// shrink 1/2), fully deterministic.
fn nelder_mead(f: &dyn Fn(&[f64]) -> f64, start: &[f64], scale: f64) -> (f64, Vec<f64>) {
    const TOL: f64 = 1e-12;
    let k = start.len();
    let mut simplex: Vec<(f64, Vec<f64>)> = Vec::with_capacity(k + 1);
    simplex.push((f(start), start.to_vec()));
    for d in 0..k {
        let mut v = start.to_vec();
        v[d] += scale;
        simplex.push((f(&v), v));
    }

    let max_iter = 400 * k.max(1) + 400;
    for _ in 0..max_iter {
        simplex.sort_by(|a, b| a.0.total_cmp(&b.0));
        let fb = simplex[0].0;
        let fw = simplex[k].0;
        if fw - fb <= TOL * (1.0 + fb.abs()) {
            break;
        }

        let mut centroid = vec![0.0_f64; k];
        for (_, v) in &simplex[..k] {
            for (c, &x) in centroid.iter_mut().zip(v) {
                *c += x / k as f64;
            }
        }
        let worst = simplex[k].1.clone();
        let point = |t: f64| -> Vec<f64> {
            centroid
                .iter()
                .zip(&worst)
                .map(|(&c, &w)| c + t * (c - w))
                .collect()
        };

        let xr = point(1.0);
        let fr = f(&xr);
        if fr < fb {
            let xe = point(2.0);
            let fe = f(&xe);
            simplex[k] = if fe < fr { (fe, xe) } else { (fr, xr) };
        } else if fr < simplex[k - 1].0 {
            simplex[k] = (fr, xr);
        } else {
            let (fc, xc) = if fr < fw {
                let xc = point(0.5);
                (f(&xc), xc)
            } else {
                let xc = point(-0.5);
                (f(&xc), xc)
            };
            if fc < fr.min(fw) {
                simplex[k] = (fc, xc);
            } else {
                let bestv = simplex[0].1.clone();
                for (fv, v) in simplex.iter_mut().skip(1) {
                    for (x, &b) in v.iter_mut().zip(&bestv) {
                        *x = b + 0.5 * (*x - b);
                    }
                    *fv = f(v);
                }
            }
        }
    }
    simplex.sort_by(|a, b| a.0.total_cmp(&b.0));
    simplex.swap_remove(0)
}
