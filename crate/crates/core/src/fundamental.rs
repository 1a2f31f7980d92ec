//! Fundamental tensor g_v, causal classification, and the Finsler norm.

use nalgebra::{DMatrix, DVector};

use crate::deriv::Deriv;
use crate::error::{Error, Result};
use crate::models::{eval_l, Spacetime};

/// Relative half-width of the lightlike band: |L| <= LIGHT_BAND |v|^2.
pub const LIGHT_BAND: f64 = 1e-12;

/// Condition-number ceiling before the metric counts as singular.
pub const COND_LIMIT: f64 = 1e12;

/// The fundamental tensor at a fixed flagpole v, with its inverse and an
/// infinity-norm condition estimate.  Construction verifies the Lorentzian
/// signature (-, +, ..., +).
#[derive(Debug, Clone)]
pub struct MetricAtV {
    g: DMatrix<f64>,
    inv: DMatrix<f64>,
    cond: f64,
}

fn inf_norm(m: &DMatrix<f64>) -> f64 {
    (0..m.nrows())
        .map(|i| m.row(i).iter().map(|a| a.abs()).sum::<f64>())
        .fold(0.0, f64::max)
}

impl MetricAtV {
    pub fn g(&self) -> &DMatrix<f64> {
        &self.g
    }

    pub fn inverse(&self) -> &DMatrix<f64> {
        &self.inv
    }

    pub fn cond_inf(&self) -> f64 {
        self.cond
    }

    pub fn inner(&self, a: &DVector<f64>, b: &DVector<f64>) -> f64 {
        (a.transpose() * &self.g * b)[(0, 0)]
    }
}

/// Assemble g_v[a][b] = d^2 L / dv^a dv^b without signature or conditioning
/// checks.  The result is symmetrized.
pub fn metric_matrix(m: &dyn Spacetime, x: &DVector<f64>, v: &DVector<f64>) -> Result<DMatrix<f64>> {
    crate::models::check_point(m, x)?;
    metric_matrix_relaxed(m, x, v)
}

pub(crate) fn metric_matrix_relaxed(
    m: &dyn Spacetime,
    x: &DVector<f64>,
    v: &DVector<f64>,
) -> Result<DMatrix<f64>> {
    let n = m.dim();
    let mut g = DMatrix::zeros(n, n);
    for a in 0..n {
        for b in a..n {
            let d = Deriv::none(n).dv(a).dv(b);
            let val = crate::models::eval_partial_relaxed(m, x, v, &d)?;
            g[(a, b)] = val;
            g[(b, a)] = val;
        }
    }
    Ok(g)
}

/// LU inverse with the condition-number guard; shared by every consumer of
/// g^{-1}.
pub(crate) fn invert_with_guard(g: &DMatrix<f64>) -> Result<(DMatrix<f64>, f64)> {
    let inv = g
        .clone()
        .lu()
        .try_inverse()
        .ok_or(Error::SingularMetric { cond: f64::INFINITY })?;
    let cond = inf_norm(g) * inf_norm(&inv);
    if !cond.is_finite() || cond > COND_LIMIT {
        return Err(Error::SingularMetric { cond });
    }
    Ok((inv, cond))
}

/// Metric and inverse for hot loops: no chart-box test on x, no signature
/// eigendecomposition, conditioning guard only.
pub(crate) fn metric_inverse_relaxed(
    m: &dyn Spacetime,
    x: &DVector<f64>,
    v: &DVector<f64>,
) -> Result<(DMatrix<f64>, DMatrix<f64>)> {
    let g = metric_matrix_relaxed(m, x, v)?;
    let (inv, _) = invert_with_guard(&g)?;
    Ok((g, inv))
}

/// Checked fundamental tensor: builds g_v, inverts it by LU with partial
/// pivoting, rejects condition numbers above [`COND_LIMIT`], and verifies
/// the signature by symmetric eigendecomposition.
pub fn metric_at(m: &dyn Spacetime, x: &DVector<f64>, v: &DVector<f64>) -> Result<MetricAtV> {
    let g = metric_matrix(m, x, v)?;
    let (inv, cond) = invert_with_guard(&g)?;
    let eig = g.clone().symmetric_eigen();
    let neg = eig.eigenvalues.iter().filter(|&&l| l < 0.0).count();
    let pos = eig.eigenvalues.iter().filter(|&&l| l > 0.0).count();
    if neg != 1 || pos != m.dim() - 1 {
        return Err(Error::SignatureViolation);
    }
    Ok(MetricAtV { g, inv, cond })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CausalClass {
    Timelike,
    Lightlike,
    Spacelike,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Classification {
    pub class: CausalClass,
    /// Future/past flag for causal vectors; `None` for spacelike ones.
    pub future: Option<bool>,
}

/// Classify v by the sign of L(x, v), with a relative band around zero for
/// lightlike vectors.  Causal vectors get a time orientation from the sign
/// of g_X(X, v) at the orientation field X.
pub fn classify(m: &dyn Spacetime, x: &DVector<f64>, v: &DVector<f64>) -> Result<Classification> {
    let l = eval_l(m, x, v)?;
    let scale = v.norm_squared();
    let class = if l.abs() <= LIGHT_BAND * scale {
        CausalClass::Lightlike
    } else if l < 0.0 {
        CausalClass::Timelike
    } else {
        CausalClass::Spacelike
    };
    let future = match class {
        CausalClass::Spacelike => None,
        _ => {
            let xfield = m.orientation(x);
            let gx = metric_at(m, x, &xfield)?;
            Some(gx.inner(&xfield, v) < 0.0)
        }
    };
    Ok(Classification { class, future })
}

/// F(x, v) = sqrt(-2 L) for causal v.  Spacelike input is an error; lightlike
/// input clamps the tiny residual to zero.
pub fn norm_f(m: &dyn Spacetime, x: &DVector<f64>, v: &DVector<f64>) -> Result<f64> {
    let l = eval_l(m, x, v)?;
    if l > LIGHT_BAND * v.norm_squared() {
        return Err(Error::NotCausal);
    }
    Ok((-2.0 * l).max(0.0).sqrt())
}
