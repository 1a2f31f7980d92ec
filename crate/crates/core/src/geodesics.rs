//! Geodesic integration, exponential map, two-point boundary value solver,
//! parallel transport, and the chart-local time separation.

use std::sync::Arc;

use nalgebra::{DMatrix, DVector};

use crate::chart::ChartBox;
use crate::connection::{chern_relaxed, spray_relaxed, ReferencePolicy};
use crate::error::{Error, Result};
use crate::fundamental::{classify, CausalClass};
use crate::models::{check_point, check_vector, eval_l_relaxed, Spacetime};
use crate::ode::{integrate, OdeSolution, DEFAULT_TOL};

/// Endpoint residual demanded of the shooting solver (max norm).
pub const BVP_TOL: f64 = 1e-9;
const BVP_MAX_ITERS: usize = 50;
/// Shooting iterates may overshoot the box slightly; the boundary-value
/// solver works in a chart inflated by this fraction.
const CHART_SLACK: f64 = 0.05;

const GL_NODES: [f64; 5] = [
    -0.906_179_845_938_664,
    -0.538_469_310_105_683_1,
    0.0,
    0.538_469_310_105_683_1,
    0.906_179_845_938_664,
];
const GL_WEIGHTS: [f64; 5] = [
    0.236_926_885_056_189_08,
    0.478_628_670_499_366_47,
    0.568_888_888_888_888_9,
    0.478_628_670_499_366_47,
    0.236_926_885_056_189_08,
];

#[derive(Debug, Clone)]
enum Repr {
    Ode(OdeSolution),
    Constant(DVector<f64>),
}

/// A geodesic on [t0, t1] with dense Hermite interpolation, or a constant
/// (zero-velocity) path, which the concavity checks admit.
#[derive(Clone)]
pub struct GeodesicPath {
    model: Arc<dyn Spacetime>,
    span: (f64, f64),
    repr: Repr,
}

impl GeodesicPath {
    pub fn constant(model: &Arc<dyn Spacetime>, x: &DVector<f64>, span: (f64, f64)) -> Result<Self> {
        check_point(model.as_ref(), x)?;
        if !(span.1 > span.0) {
            return Err(Error::BadConfig("path span must have positive length".into()));
        }
        Ok(GeodesicPath {
            model: model.clone(),
            span,
            repr: Repr::Constant(x.clone()),
        })
    }

    pub fn model(&self) -> &Arc<dyn Spacetime> {
        &self.model
    }

    pub fn span(&self) -> (f64, f64) {
        self.span
    }

    pub fn is_constant(&self) -> bool {
        matches!(self.repr, Repr::Constant(_))
    }

    pub fn knots(&self) -> Vec<f64> {
        match &self.repr {
            Repr::Ode(sol) => sol.ts.clone(),
            Repr::Constant(_) => {
                let (a, b) = self.span;
                (0..5).map(|i| a + (b - a) * i as f64 / 4.0).collect()
            }
        }
    }

    pub fn position(&self, t: f64) -> DVector<f64> {
        match &self.repr {
            Repr::Ode(sol) => {
                let n = self.model.dim();
                sol.sample(t).rows(0, n).into_owned()
            }
            Repr::Constant(x) => x.clone(),
        }
    }

    pub fn velocity(&self, t: f64) -> DVector<f64> {
        match &self.repr {
            Repr::Ode(sol) => {
                let n = self.model.dim();
                sol.sample(t).rows(n, n).into_owned()
            }
            Repr::Constant(x) => DVector::zeros(x.len()),
        }
    }

    pub fn start(&self) -> DVector<f64> {
        self.position(self.span.0)
    }

    pub fn end(&self) -> DVector<f64> {
        self.position(self.span.1)
    }

    pub fn initial_velocity(&self) -> DVector<f64> {
        self.velocity(self.span.0)
    }

    /// Max relative drift of L(velocity) across knots; 0 for constant paths.
    /// Conservation along geodesics makes this an integration-quality gauge.
    pub fn max_l_drift(&self) -> Result<f64> {
        match &self.repr {
            Repr::Constant(_) => Ok(0.0),
            Repr::Ode(sol) => {
                let n = self.model.dim();
                let m = self.model.as_ref();
                let l0 = {
                    let y = &sol.ys[0];
                    eval_l_relaxed(m, &y.rows(0, n).into_owned(), &y.rows(n, n).into_owned())?
                };
                let mut worst = 0.0_f64;
                for y in &sol.ys {
                    let l =
                        eval_l_relaxed(m, &y.rows(0, n).into_owned(), &y.rows(n, n).into_owned())?;
                    worst = worst.max((l - l0).abs());
                }
                Ok(worst / (1.0 + l0.abs()))
            }
        }
    }
}

fn integrate_in(
    model: &Arc<dyn Spacetime>,
    x: &DVector<f64>,
    v: &DVector<f64>,
    span: (f64, f64),
    bbox: &ChartBox,
) -> Result<GeodesicPath> {
    let m = model.as_ref();
    if x.len() != m.dim() {
        return Err(Error::DimMismatch { expected: m.dim(), got: x.len() });
    }
    check_vector(m, v)?;
    if !(span.1 > span.0) {
        return Err(Error::BadConfig("integration span must have positive length".into()));
    }
    let n = m.dim();
    let cone = m.cone();
    let y0 = DVector::from_iterator(2 * n, x.iter().chain(v.iter()).copied());
    let sol = integrate(
        |_, y: &DVector<f64>| {
            let xx = y.rows(0, n).into_owned();
            let vv = y.rows(n, n).into_owned();
            let a = -spray_relaxed(m, &xx, &vv)?;
            Ok(DVector::from_iterator(2 * n, vv.iter().chain(a.iter()).copied()))
        },
        |t, y: &DVector<f64>| {
            let xx = y.rows(0, n).into_owned();
            if !bbox.contains(&xx) {
                return Err(Error::LeftChart { t });
            }
            if let Some(c) = &cone {
                if !c.contains(&y.rows(n, n).into_owned()) {
                    return Err(Error::LeftCone { t });
                }
            }
            Ok(())
        },
        span.0,
        span.1,
        y0,
        DEFAULT_TOL,
        (span.1 - span.0) / 32.0,
    )?;
    Ok(GeodesicPath { model: model.clone(), span, repr: Repr::Ode(sol) })
}

/// Integrate the geodesic with initial data (x, v) over the span, keeping
/// the trajectory inside the chart box.
pub fn integrate_geodesic(
    model: &Arc<dyn Spacetime>,
    x: &DVector<f64>,
    v: &DVector<f64>,
    span: (f64, f64),
) -> Result<GeodesicPath> {
    check_point(model.as_ref(), x)?;
    integrate_in(model, x, v, span, &model.chart().clone())
}

/// Endpoint of the unit-time geodesic with initial velocity v.
pub fn exp_map(model: &Arc<dyn Spacetime>, x: &DVector<f64>, v: &DVector<f64>) -> Result<DVector<f64>> {
    check_point(model.as_ref(), x)?;
    if v.iter().all(|&a| a == 0.0) {
        return Ok(x.clone());
    }
    Ok(integrate_geodesic(model, x, v, (0.0, 1.0))?.end())
}

fn shoot(
    model: &Arc<dyn Spacetime>,
    x: &DVector<f64>,
    v: &DVector<f64>,
    bbox: &ChartBox,
) -> Result<(DVector<f64>, GeodesicPath)> {
    let path = integrate_in(model, x, v, (0.0, 1.0), bbox)?;
    Ok((path.end(), path))
}

/// Damped-Newton shooting solver for the geodesic from x to y; returns the
/// initial velocity and the connecting path.  The guess defaults to y - x.
pub fn solve_bvp_with_guess(
    model: &Arc<dyn Spacetime>,
    x: &DVector<f64>,
    y: &DVector<f64>,
    guess: Option<&DVector<f64>>,
) -> Result<(DVector<f64>, GeodesicPath)> {
    let m = model.as_ref();
    check_point(m, x)?;
    check_point(m, y)?;
    if x == y {
        return Err(Error::EndpointCondition("boundary points coincide".into()));
    }
    let n = m.dim();
    let bbox = m.chart().inflated(CHART_SLACK);
    let mut v = match guess {
        Some(g) => g.clone(),
        None => y - x,
    };
    let (mut end, mut path) = shoot(model, x, &v, &bbox)?;
    let mut res = &end - y;
    for iter in 0..BVP_MAX_ITERS {
        let rnorm = res.amax();
        if rnorm <= BVP_TOL {
            return Ok((v, path));
        }
        let mut jac = DMatrix::zeros(n, n);
        for j in 0..n {
            let h = 1e-6 * (1.0 + v[j].abs());
            let mut vp = v.clone();
            vp[j] += h;
            let col = match shoot(model, x, &vp, &bbox) {
                Ok((e, _)) => (&e - &end) / h,
                Err(_) => {
                    vp[j] = v[j] - h;
                    let (e, _) = shoot(model, x, &vp, &bbox)?;
                    (&end - &e) / h
                }
            };
            jac.set_column(j, &col);
        }
        let step = jac
            .lu()
            .solve(&(-&res))
            .ok_or(Error::BvpNoConvergence { iters: iter, residual: rnorm })?;
        let mut lambda = 1.0;
        let mut accepted = false;
        while lambda >= 1.0 / 64.0 {
            let trial = &v + &step * lambda;
            if let Ok((e, p)) = shoot(model, x, &trial, &bbox) {
                let r = &e - y;
                if r.amax() < (1.0 - 1e-4 * lambda) * rnorm {
                    v = trial;
                    end = e;
                    path = p;
                    res = r;
                    accepted = true;
                    break;
                }
            }
            lambda *= 0.5;
        }
        if !accepted {
            return Err(Error::BvpNoConvergence { iters: iter, residual: rnorm });
        }
    }
    Err(Error::BvpNoConvergence { iters: BVP_MAX_ITERS, residual: res.amax() })
}

pub fn solve_bvp(
    model: &Arc<dyn Spacetime>,
    x: &DVector<f64>,
    y: &DVector<f64>,
) -> Result<(DVector<f64>, GeodesicPath)> {
    solve_bvp_with_guess(model, x, y, None)
}

/// Parallel transport of V0 along the path under the chosen reference
/// policy; values returned on the knot grid.
pub fn parallel_transport(
    path: &GeodesicPath,
    v0: &DVector<f64>,
    reference: &ReferencePolicy,
) -> Result<Vec<DVector<f64>>> {
    let m = path.model().as_ref();
    let n = m.dim();
    if v0.len() != n {
        return Err(Error::DimMismatch { expected: n, got: v0.len() });
    }
    let knots = path.knots();
    if path.is_constant() {
        if matches!(reference, ReferencePolicy::Tangent) {
            return Err(Error::ZeroReference);
        }
        return Ok(vec![v0.clone(); knots.len()]);
    }
    if let ReferencePolicy::Fixed(w) = reference {
        if w.norm() == 0.0 {
            return Err(Error::ZeroReference);
        }
    }
    let (t0, t1) = path.span();
    let sol = integrate(
        |t, vv: &DVector<f64>| {
            let x = path.position(t);
            let tangent = path.velocity(t);
            let refv = match reference {
                ReferencePolicy::Tangent => tangent.clone(),
                ReferencePolicy::Field => vv.clone(),
                ReferencePolicy::Fixed(w) => w.clone(),
            };
            if refv.norm() == 0.0 {
                return Err(Error::ZeroReference);
            }
            let chern = chern_relaxed(m, &x, &refv)?;
            Ok(-chern.contract(&tangent, vv))
        },
        |_, _| Ok(()),
        t0,
        t1,
        v0.clone(),
        DEFAULT_TOL,
        (t1 - t0) / 32.0,
    )?;
    Ok(knots.iter().map(|&t| sol.sample(t)).collect())
}

/// Time separation evaluated through the boundary-value solver, carrying
/// the solver velocity out for warm starts.
#[derive(Debug, Clone)]
pub struct TauEval {
    pub tau: f64,
    /// BVP initial velocity when the solve converged (any causal class).
    pub velocity: Option<DVector<f64>>,
}

/// tau(x, y): length of the connecting geodesic when it is future-directed
/// causal, 0 otherwise.  On cone-restricted models, pairs whose connecting
/// velocity leaves the validity cone count as unrelated (tau = 0).
pub fn time_separation(model: &Arc<dyn Spacetime>, x: &DVector<f64>, y: &DVector<f64>) -> Result<f64> {
    Ok(time_separation_ext(model, x, y, None)?.tau)
}

pub fn time_separation_ext(
    model: &Arc<dyn Spacetime>,
    x: &DVector<f64>,
    y: &DVector<f64>,
    guess: Option<&DVector<f64>>,
) -> Result<TauEval> {
    let m = model.as_ref();
    check_point(m, x)?;
    check_point(m, y)?;
    if x == y {
        return Ok(TauEval { tau: 0.0, velocity: None });
    }
    let (v, path) = match solve_bvp_with_guess(model, x, y, guess) {
        Ok(pair) => pair,
        Err(Error::OutsideCone) | Err(Error::LeftCone { .. }) => {
            return Ok(TauEval { tau: 0.0, velocity: None });
        }
        Err(e) => return Err(e),
    };
    let cls = classify(m, x, &v)?;
    let related = matches!(cls.class, CausalClass::Timelike | CausalClass::Lightlike)
        && cls.future == Some(true);
    if !related {
        return Ok(TauEval { tau: 0.0, velocity: Some(v) });
    }
    Ok(TauEval { tau: lorentzian_length(&path)?, velocity: Some(v) })
}

/// Integral of F along the path by Gauss-Legendre (5 nodes) on each knot
/// interval; tiny causality violations from roundoff clamp to zero.
pub fn lorentzian_length(path: &GeodesicPath) -> Result<f64> {
    if path.is_constant() {
        return Ok(0.0);
    }
    let m = path.model().as_ref();
    let knots = path.knots();
    let mut total = 0.0;
    for w in knots.windows(2) {
        let (a, b) = (w[0], w[1]);
        let mid = 0.5 * (a + b);
        let half = 0.5 * (b - a);
        for (node, weight) in GL_NODES.iter().zip(GL_WEIGHTS.iter()) {
            let t = mid + half * node;
            let l = eval_l_relaxed(m, &path.position(t), &path.velocity(t))?;
            total += weight * half * (-2.0 * l).max(0.0).sqrt();
        }
    }
    Ok(total)
}
