//! Adaptive Dormand-Prince 5(4) integrator with FSAL and cubic Hermite dense
//! output, on dynamically sized state vectors.

use nalgebra::DVector;

use crate::error::{Error, Result};

pub const DEFAULT_TOL: f64 = 1e-10;

const A21: f64 = 1.0 / 5.0;
const A31: f64 = 3.0 / 40.0;
const A32: f64 = 9.0 / 40.0;
const A41: f64 = 44.0 / 45.0;
const A42: f64 = -56.0 / 15.0;
const A43: f64 = 32.0 / 9.0;
const A51: f64 = 19372.0 / 6561.0;
const A52: f64 = -25360.0 / 2187.0;
const A53: f64 = 64448.0 / 6561.0;
const A54: f64 = -212.0 / 729.0;
const A61: f64 = 9017.0 / 3168.0;
const A62: f64 = -355.0 / 33.0;
const A63: f64 = 46732.0 / 5247.0;
const A64: f64 = 49.0 / 176.0;
const A65: f64 = -5103.0 / 18656.0;
const B1: f64 = 35.0 / 384.0;
const B3: f64 = 500.0 / 1113.0;
const B4: f64 = 125.0 / 192.0;
const B5: f64 = -2187.0 / 6784.0;
const B6: f64 = 11.0 / 84.0;
const E1: f64 = 71.0 / 57600.0;
const E3: f64 = -71.0 / 16695.0;
const E4: f64 = 71.0 / 1920.0;
const E5: f64 = -17253.0 / 339200.0;
const E6: f64 = 22.0 / 525.0;
const E7: f64 = -1.0 / 40.0;

const MAX_STEPS: usize = 1_000_000;

/// Dense solution: states and state derivatives at accepted knots, cubic
/// Hermite in between.
#[derive(Debug, Clone)]
pub struct OdeSolution {
    pub ts: Vec<f64>,
    pub ys: Vec<DVector<f64>>,
    pub fs: Vec<DVector<f64>>,
}

impl OdeSolution {
    pub fn t0(&self) -> f64 {
        self.ts[0]
    }

    pub fn t1(&self) -> f64 {
        *self.ts.last().unwrap()
    }

    fn segment(&self, t: f64) -> usize {
        match self.ts.binary_search_by(|a| a.partial_cmp(&t).unwrap()) {
            Ok(i) => i.min(self.ts.len() - 2),
            Err(i) => i.saturating_sub(1).min(self.ts.len() - 2),
        }
    }

    /// Cubic Hermite interpolation of the state at t (clamped to the span).
    pub fn sample(&self, t: f64) -> DVector<f64> {
        let t = t.clamp(self.t0(), self.t1());
        let i = self.segment(t);
        let (t0, t1) = (self.ts[i], self.ts[i + 1]);
        let h = t1 - t0;
        let s = (t - t0) / h;
        let (y0, y1) = (&self.ys[i], &self.ys[i + 1]);
        let (f0, f1) = (&self.fs[i], &self.fs[i + 1]);
        let s2 = s * s;
        let s3 = s2 * s;
        let h00 = 2.0 * s3 - 3.0 * s2 + 1.0;
        let h10 = s3 - 2.0 * s2 + s;
        let h01 = -2.0 * s3 + 3.0 * s2;
        let h11 = s3 - s2;
        y0 * h00 + f0 * (h10 * h) + y1 * h01 + f1 * (h11 * h)
    }
}

/// Integrate y' = f(t, y) over [t0, t1], t1 > t0.  The guard runs on every
/// accepted knot; its error aborts the integration.  `max_step` bounds the
/// step size (the caller usually passes span/32).
pub fn integrate<F, G>(
    f: F,
    guard: G,
    t0: f64,
    t1: f64,
    y0: DVector<f64>,
    tol: f64,
    max_step: f64,
) -> Result<OdeSolution>
where
    F: Fn(f64, &DVector<f64>) -> Result<DVector<f64>>,
    G: Fn(f64, &DVector<f64>) -> Result<()>,
{
    assert!(t1 > t0, "integration span must be forward");
    guard(t0, &y0)?;
    let mut ts = vec![t0];
    let mut k1 = f(t0, &y0)?;
    let mut ys = vec![y0];
    let mut fs = vec![k1.clone()];
    let mut t = t0;
    let mut h = max_step.min((t1 - t0) / 64.0).max(1e-12);

    for _ in 0..MAX_STEPS {
        if t >= t1 {
            return Ok(OdeSolution { ts, ys, fs });
        }
        h = h.min(t1 - t).min(max_step);
        if h < 1e-14 * (1.0 + t.abs()) {
            return Err(Error::StepUnderflow { t });
        }
        let y = ys.last().unwrap().clone();

        let k2 = f(t + A21 * h, &(&y + &k1 * (A21 * h)))?;
        let k3 = f(t + 0.3 * h, &(&y + (&k1 * A31 + &k2 * A32) * h))?;
        let k4 = f(t + 0.8 * h, &(&y + (&k1 * A41 + &k2 * A42 + &k3 * A43) * h))?;
        let k5 = f(
            t + (8.0 / 9.0) * h,
            &(&y + (&k1 * A51 + &k2 * A52 + &k3 * A53 + &k4 * A54) * h),
        )?;
        let k6 = f(
            t + h,
            &(&y + (&k1 * A61 + &k2 * A62 + &k3 * A63 + &k4 * A64 + &k5 * A65) * h),
        )?;
        let y_next = &y + (&k1 * B1 + &k3 * B3 + &k4 * B4 + &k5 * B5 + &k6 * B6) * h;
        let k7 = f(t + h, &y_next)?;

        let err_vec = (&k1 * E1 + &k3 * E3 + &k4 * E4 + &k5 * E5 + &k6 * E6 + &k7 * E7) * h;
        let mut err = 0.0_f64;
        for i in 0..y.len() {
            let scale = tol + tol * y[i].abs().max(y_next[i].abs());
            err += (err_vec[i] / scale).powi(2);
        }
        err = (err / y.len() as f64).sqrt();

        if err <= 1.0 {
            t += h;
            guard(t, &y_next)?;
            ts.push(t);
            ys.push(y_next);
            fs.push(k7.clone());
            k1 = k7;
        }
        let factor = if err == 0.0 {
            5.0
        } else {
            (0.9 * err.powf(-0.2)).clamp(0.2, 5.0)
        };
        h *= factor;
    }
    Err(Error::StepUnderflow { t })
}

#[cfg(test)]
mod tests {
    use super::*;
    use nalgebra::dvector;

    #[test]
    fn exponential_decay_to_machine_accuracy() {
        let sol = integrate(
            |_, y| Ok(-y.clone()),
            |_, _| Ok(()),
            0.0,
            2.0,
            dvector![1.0],
            1e-10,
            2.0 / 32.0,
        )
        .unwrap();
        let y_end = sol.ys.last().unwrap()[0];
        assert!((y_end - (-2.0_f64).exp()).abs() < 1e-10);
        // dense output between knots: Hermite error ~ (max_step)^4 / 384
        let mid = sol.sample(1.234)[0];
        assert!((mid - (-1.234_f64).exp()).abs() < 5e-8);
    }

    #[test]
    fn harmonic_oscillator_energy() {
        let sol = integrate(
            |_, y: &DVector<f64>| Ok(dvector![y[1], -y[0]]),
            |_, _| Ok(()),
            0.0,
            10.0,
            dvector![1.0, 0.0],
            1e-10,
            10.0 / 32.0,
        )
        .unwrap();
        for (y, t) in sol.ys.iter().zip(sol.ts.iter()) {
            let e = y[0] * y[0] + y[1] * y[1];
            assert!((e - 1.0).abs() < 1e-8, "t={t}");
        }
    }

    #[test]
    fn guard_aborts_integration() {
        let res = integrate(
            |_, _| Ok(dvector![1.0]),
            |_, y: &DVector<f64>| {
                if y[0] > 0.5 {
                    Err(Error::LeftChart { t: 0.0 })
                } else {
                    Ok(())
                }
            },
            0.0,
            2.0,
            dvector![0.0],
            1e-10,
            0.05,
        );
        assert!(matches!(res, Err(Error::LeftChart { .. })));
    }
}
