//! Curvature tensor, flag curvature, and Jacobi-field propagation.
//!
//! The arrays G and N are assembled exactly (closed-form oracle calls up to
//! order 4); only the single outer derivative layer dG/dx, dN/dx, dN/dv is
//! taken numerically, by central differences with one Richardson level.
//! Differencing exact quantities once keeps the noise floor near 1e-9
//! instead of the geometric blowup nested differencing would give.

use std::sync::Arc;

use nalgebra::{DMatrix, DVector};

use crate::connection::{chern_relaxed, spray_and_nonlinear_relaxed};
use crate::error::{Error, Result};
use crate::fundamental::{classify, metric_at, CausalClass, MetricAtV};
use crate::geodesics::{integrate_geodesic, GeodesicPath};
use crate::models::{check_point, check_vector, eval_l_relaxed, Spacetime};
use crate::ode::{integrate, OdeSolution, DEFAULT_TOL};

/// Base step for the outer finite-difference layer.
const FD_H: f64 = 1e-3;

/// Degenerate-flag guard on |det Gram(v, w)| relative to Euclidean norms.
const FLAG_DET_EPS: f64 = 1e-10;

/// Stencil step for the second derivative of F along a Jacobi field.
const STENCIL_H: f64 = 1e-3;

fn richardson<F>(eval: F, h: f64) -> Result<(DVector<f64>, DMatrix<f64>)>
where
    F: Fn(f64) -> Result<(DVector<f64>, DMatrix<f64>)>,
{
    let (gp, np) = eval(h)?;
    let (gm, nm) = eval(-h)?;
    let (gp2, np2) = eval(0.5 * h)?;
    let (gm2, nm2) = eval(-0.5 * h)?;
    let g_h = (gp - gm) / (2.0 * h);
    let g_h2 = (gp2 - gm2) / h;
    let n_h = (np - nm) / (2.0 * h);
    let n_h2 = (np2 - nm2) / h;
    Ok(((g_h2 * 4.0 - g_h) / 3.0, (n_h2 * 4.0 - n_h) / 3.0))
}

/// R^i_j(v) as a matrix, acting on transverse vectors by multiplication.
pub fn curvature_matrix(m: &dyn Spacetime, x: &DVector<f64>, v: &DVector<f64>) -> Result<DMatrix<f64>> {
    check_point(m, x)?;
    check_vector(m, v)?;
    curvature_matrix_relaxed(m, x, v)
}

pub(crate) fn curvature_matrix_relaxed(
    m: &dyn Spacetime,
    x: &DVector<f64>,
    v: &DVector<f64>,
) -> Result<DMatrix<f64>> {
    let n = m.dim();
    let (g0, n0) = spray_and_nonlinear_relaxed(m, x, v)?;
    let mut r = DMatrix::zeros(n, n);
    for k in 0..n {
        let hx = FD_H * (1.0 + x[k].abs());
        let (dgdx, dndx) = richardson(
            |h| {
                let mut xx = x.clone();
                xx[k] += h;
                spray_and_nonlinear_relaxed(m, &xx, v)
            },
            hx,
        )?;
        let hv = FD_H * (1.0 + v[k].abs());
        let (_, dndv) = richardson(
            |h| {
                let mut vv = v.clone();
                vv[k] += h;
                spray_and_nonlinear_relaxed(m, x, &vv)
            },
            hv,
        )?;
        // dG/dx^k contributes the k-th column of the first term
        for i in 0..n {
            r[(i, k)] += dgdx[i];
        }
        // -dN/dx^k v^k + dN/dv^k G^k
        r += dndx * (-v[k]) + dndv * g0[k];
    }
    r -= &n0 * &n0;
    Ok(r)
}

/// R_v(w).
pub fn curvature_r(
    m: &dyn Spacetime,
    x: &DVector<f64>,
    v: &DVector<f64>,
    w: &DVector<f64>,
) -> Result<DVector<f64>> {
    if w.len() != m.dim() {
        return Err(Error::DimMismatch { expected: m.dim(), got: w.len() });
    }
    Ok(curvature_matrix(m, x, v)? * w)
}

fn flag_denominator(g: &MetricAtV, v: &DVector<f64>, w: &DVector<f64>) -> Result<f64> {
    let det = g.inner(v, v) * g.inner(w, w) - g.inner(v, w).powi(2);
    if det.abs() < FLAG_DET_EPS * v.norm_squared() * w.norm_squared() || det >= 0.0 {
        return Err(Error::DegenerateFlag);
    }
    Ok(det)
}

/// Flag curvature K(v, w) with flagpole v; requires a future timelike
/// flagpole and a transverse vector spanning a nondegenerate plane.
pub fn flag_curvature(
    m: &dyn Spacetime,
    x: &DVector<f64>,
    v: &DVector<f64>,
    w: &DVector<f64>,
) -> Result<f64> {
    let cls = classify(m, x, v)?;
    if cls.class != CausalClass::Timelike || cls.future != Some(true) {
        return Err(Error::NotTimelike);
    }
    if w.len() != m.dim() {
        return Err(Error::DimMismatch { expected: m.dim(), got: w.len() });
    }
    let g = metric_at(m, x, v)?;
    let den = flag_denominator(&g, v, w)?;
    let rw = curvature_matrix_relaxed(m, x, v)? * w;
    Ok(g.inner(&rw, w) / den)
}

/// A Jacobi field along a geodesic, on the knot grid.
pub struct JacobiSolution {
    pub along: GeodesicPath,
    pub j: Vec<DVector<f64>>,
    pub dj: Vec<DVector<f64>>,
}

fn jacobi_dense(
    along: &GeodesicPath,
    j0: &DVector<f64>,
    dj0: &DVector<f64>,
) -> Result<OdeSolution> {
    let m = along.model().as_ref();
    let n = m.dim();
    if along.is_constant() {
        return Err(Error::BadConfig("jacobi propagation needs a nonconstant geodesic".into()));
    }
    if j0.len() != n || dj0.len() != n {
        return Err(Error::DimMismatch { expected: n, got: j0.len().min(dj0.len()) });
    }
    let (t0, t1) = along.span();
    let z0 = DVector::from_iterator(2 * n, j0.iter().chain(dj0.iter()).copied());
    integrate(
        |t, z: &DVector<f64>| {
            let x = along.position(t);
            let vel = along.velocity(t);
            let j = z.rows(0, n).into_owned();
            let u = z.rows(n, n).into_owned();
            let chern = chern_relaxed(m, &x, &vel)?;
            let r = curvature_matrix_relaxed(m, &x, &vel)?;
            let dj = &u - chern.contract(&vel, &j);
            let du = -(&r * &j) - chern.contract(&vel, &u);
            Ok(DVector::from_iterator(2 * n, dj.iter().chain(du.iter()).copied()))
        },
        |_, _| Ok(()),
        t0,
        t1,
        z0,
        DEFAULT_TOL,
        (t1 - t0) / 32.0,
    )
}

/// Propagate the Jacobi field with initial data (J0, DJ0) along a geodesic;
/// covariant derivatives are referenced to the tangent.
pub fn jacobi_propagate(
    along: &GeodesicPath,
    j0: &DVector<f64>,
    dj0: &DVector<f64>,
) -> Result<JacobiSolution> {
    let n = along.model().dim();
    let sol = jacobi_dense(along, j0, dj0)?;
    let knots = along.knots();
    let mut j = Vec::with_capacity(knots.len());
    let mut dj = Vec::with_capacity(knots.len());
    for &t in &knots {
        let z = sol.sample(t);
        j.push(z.rows(0, n).into_owned());
        dj.push(z.rows(n, n).into_owned());
    }
    Ok(JacobiSolution { along: along.clone(), j, dj })
}

/// d^2/dt^2 F(J(t)) at t = 0 for the Jacobi field with J(0) = v, DJ(0) = 0
/// along the geodesic leaving x with velocity w; 5-point one-sided stencil.
/// The result equals g_v(v, R_w(v))/F(v) up to stencil and integrator error.
pub fn jacobi_f_second_derivative(
    model: &Arc<dyn Spacetime>,
    x: &DVector<f64>,
    v: &DVector<f64>,
    w: &DVector<f64>,
) -> Result<f64> {
    let m = model.as_ref();
    for u in [v, w] {
        let cls = classify(m, x, u)?;
        if cls.class != CausalClass::Timelike || cls.future != Some(true) {
            return Err(Error::NotTimelike);
        }
    }
    let g = metric_at(m, x, v)?;
    flag_denominator(&g, v, w)?;
    let h = STENCIL_H;
    let eta = integrate_geodesic(model, x, w, (0.0, 4.0 * h))?;
    let sol = jacobi_dense(&eta, v, &DVector::zeros(m.dim()))?;
    let n = m.dim();
    let mut f = [0.0_f64; 5];
    for (i, fi) in f.iter_mut().enumerate() {
        let t = i as f64 * h;
        let j = sol.sample(t).rows(0, n).into_owned();
        let l = eval_l_relaxed(m, &eta.position(t), &j)?;
        if l >= 0.0 {
            return Err(Error::NotTimelike);
        }
        *fi = (-2.0 * l).sqrt();
    }
    Ok((35.0 * f[0] - 104.0 * f[1] + 114.0 * f[2] - 56.0 * f[3] + 11.0 * f[4]) / (12.0 * h * h))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::models::{build_model, ModelConfig};
    use crate::rng;
    use nalgebra::dvector;

    fn model(name: &str) -> Arc<dyn Spacetime> {
        build_model(&ModelConfig::named(name)).unwrap()
    }

    #[test]
    fn flat_models_have_zero_curvature() {
        for name in ["minkowski", "flat_finsler"] {
            let m = model(name);
            let r =
                curvature_matrix(m.as_ref(), &dvector![0.1, 0.2], &dvector![1.0, 0.2]).unwrap();
            assert!(r.amax() < 1e-10, "{name}: {r}");
            let k = flag_curvature(m.as_ref(), &dvector![0.1, 0.2], &dvector![1.0, 0.2], &dvector![0.3, 1.0])
                .unwrap();
            assert!(k.abs() < 1e-9);
        }
    }

    #[test]
    fn de_sitter_flag_curvature_is_one() {
        let m = model("de_sitter");
        let mut rng = rng::substream(17, "ds_flags");
        for _ in 0..25 {
            let (x, v) = rng::point_and_timelike(&mut rng, m.as_ref(), 0.05).unwrap();
            let g = metric_at(m.as_ref(), &x, &v).unwrap();
            let w = rng::flag_complement(&mut rng, &g, &v).unwrap();
            let k = flag_curvature(m.as_ref(), &x, &v, &w).unwrap();
            assert!((k - 1.0).abs() < 1e-4, "K = {k} at x = {x:?}");
        }
    }

    #[test]
    fn product_time_flag_is_flat() {
        let m = model("product_hyperbolic");
        let x = dvector![0.1, 0.1, -0.05];
        let v = dvector![1.0, 0.0, 0.0];
        let w = dvector![0.0, 0.7, 0.2];
        let k = flag_curvature(m.as_ref(), &x, &v, &w).unwrap();
        assert!(k.abs() < 1e-5, "K = {k}");
    }

    #[test]
    fn flag_guards() {
        let m = model("minkowski");
        let x = dvector![0.0, 0.0];
        assert!(matches!(
            flag_curvature(m.as_ref(), &x, &dvector![0.2, 1.0], &dvector![1.0, 0.0]),
            Err(Error::NotTimelike)
        ));
        assert!(matches!(
            flag_curvature(m.as_ref(), &x, &dvector![1.0, 0.1], &dvector![2.0, 0.2]),
            Err(Error::DegenerateFlag)
        ));
    }

    #[test]
    fn flagpole_scaling_and_shift_invariance() {
        let m = model("de_sitter");
        let x = dvector![0.05, 0.1, -0.08];
        let v = dvector![0.8, 0.1, 0.15];
        let w = dvector![0.2, 0.9, -0.3];
        let k = flag_curvature(m.as_ref(), &x, &v, &w).unwrap();
        for lam in [0.5, 3.0] {
            let ks = flag_curvature(m.as_ref(), &x, &(&v * lam), &w).unwrap();
            assert!((ks - k).abs() < 1e-6 * (1.0 + k.abs()));
        }
        for c in [-1.0, 1.0] {
            let ks = flag_curvature(m.as_ref(), &x, &v, &(&w + &v * c)).unwrap();
            assert!((ks - k).abs() < 1e-6 * (1.0 + k.abs()));
        }
    }

    #[test]
    fn jacobi_linear_on_minkowski() {
        let m = model("minkowski");
        let path = integrate_geodesic(&m, &dvector![-0.5, 0.0], &dvector![0.9, 0.1], (0.0, 1.0))
            .unwrap();
        let sol = jacobi_propagate(&path, &dvector![0.2, 0.1], &dvector![-0.1, 0.3]).unwrap();
        for (i, &t) in path.knots().iter().enumerate() {
            let want = dvector![0.2 - 0.1 * t, 0.1 + 0.3 * t];
            assert!((&sol.j[i] - want).amax() < 1e-10);
        }
    }

    #[test]
    fn tangent_jacobi_field() {
        let m = model("de_sitter");
        let x = dvector![-0.2, 0.04, 0.08];
        let v = dvector![0.4, 0.1, -0.06];
        let path = integrate_geodesic(&m, &x, &v, (0.0, 1.0)).unwrap();
        let zero = DVector::zeros(3);
        let sol = jacobi_propagate(&path, &zero, &path.velocity(0.0)).unwrap();
        for (i, &t) in path.knots().iter().enumerate() {
            let want = path.velocity(t) * t;
            assert!((&sol.j[i] - want).amax() < 1e-7, "t = {t}");
        }
    }

    #[test]
    fn stencil_matches_curvature_pairing() {
        let m = model("de_sitter");
        let x = dvector![-0.05, 0.02, -0.03];
        let v = dvector![1.0, 0.15, 0.05];
        let w = dvector![0.9, -0.1, 0.2];
        let got = jacobi_f_second_derivative(&m, &x, &v, &w).unwrap();
        let rv = curvature_r(m.as_ref(), &x, &w, &v).unwrap();
        let g = metric_at(m.as_ref(), &x, &v).unwrap();
        let l = crate::models::eval_l(m.as_ref(), &x, &v).unwrap();
        let want = g.inner(&v, &rv) / (-2.0 * l).sqrt();
        assert!((got - want).abs() < 1e-5, "stencil {got} vs pairing {want}");
        assert!(got <= 1e-6, "must be nonpositive on de Sitter, got {got}");
    }
}
