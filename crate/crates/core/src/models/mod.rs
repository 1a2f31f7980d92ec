//! Spacetime models: the `Spacetime` trait, the guarded evaluation API, the
//! generic finite-difference fallback for derivative oracles, reversal, and
//! the built-in model zoo.

use std::sync::Arc;

use nalgebra::DVector;
use serde::{Deserialize, Serialize};

use crate::chart::{ChartBox, ValidityCone};
use crate::deriv::Deriv;
use crate::error::{Error, Result};

mod zoo;

pub use zoo::{zoo_configs, ZOO_NAMES};

/// A chart-local Lorentz-Finsler structure: a 2-homogeneous Lagrangian
/// L(x, v) whose fiberwise Hessian has signature (-, +, ..., +), presented
/// through a derivative oracle.
///
/// Trait methods are raw formula evaluations with no domain guards; they must
/// be finite on a neighborhood of the chart box (and, when a validity cone is
/// declared, for v in that cone).  Use [`eval_l`] / [`eval_partial`] for the
/// checked entry points.
pub trait Spacetime: Send + Sync {
    fn name(&self) -> &str;
    fn dim(&self) -> usize;
    fn chart(&self) -> &ChartBox;

    /// Cone of fiber directions on which smoothness and signature are
    /// certified.  `None` means all v != 0 (quadratic models).
    fn cone(&self) -> Option<ValidityCone> {
        None
    }

    fn lagrangian(&self, x: &DVector<f64>, v: &DVector<f64>) -> f64;

    /// Mixed partial of L.  The default is a central-difference fallback with
    /// one Richardson level; analytic models override it with closed forms.
    fn partial(&self, x: &DVector<f64>, v: &DVector<f64>, d: &Deriv) -> f64 {
        fd_partial(&|xx, vv| self.lagrangian(xx, vv), x, v, d)
    }

    /// Time-orientation field X(x); future-directed causal vectors satisfy
    /// g_X(X, v) < 0.
    fn orientation(&self, _x: &DVector<f64>) -> DVector<f64> {
        let mut e = DVector::zeros(self.dim());
        e[0] = 1.0;
        e
    }
}

/// Highest mixed-derivative order the checked oracle accepts.
pub const MAX_ORDER: usize = 4;
/// Highest number of x-slots the checked oracle accepts.
pub const MAX_X_ORDER: usize = 2;

pub(crate) fn check_point(m: &dyn Spacetime, x: &DVector<f64>) -> Result<()> {
    if x.len() != m.dim() {
        return Err(Error::DimMismatch { expected: m.dim(), got: x.len() });
    }
    if !m.chart().contains(x) {
        return Err(Error::OutsideChart);
    }
    Ok(())
}

pub(crate) fn check_vector(m: &dyn Spacetime, v: &DVector<f64>) -> Result<()> {
    if v.len() != m.dim() {
        return Err(Error::DimMismatch { expected: m.dim(), got: v.len() });
    }
    if v.iter().all(|&a| a == 0.0) {
        return Err(Error::ZeroVector);
    }
    if let Some(cone) = m.cone() {
        if !cone.contains(v) {
            return Err(Error::OutsideCone);
        }
    }
    Ok(())
}

/// Checked Lagrangian evaluation.
pub fn eval_l(m: &dyn Spacetime, x: &DVector<f64>, v: &DVector<f64>) -> Result<f64> {
    check_point(m, x)?;
    check_vector(m, v)?;
    Ok(m.lagrangian(x, v))
}

/// Checked mixed-partial evaluation (order <= 4, at most 2 x-slots).
pub fn eval_partial(
    m: &dyn Spacetime,
    x: &DVector<f64>,
    v: &DVector<f64>,
    d: &Deriv,
) -> Result<f64> {
    check_point(m, x)?;
    eval_partial_relaxed(m, x, v, d)
}

/// Like [`eval_partial`] but without the chart-box test on x.  Internal
/// assembly code uses this for probe points (RK stages, FD offsets) that may
/// poke microscopically past the box; the trait contract guarantees
/// smoothness on a neighborhood.
pub(crate) fn eval_partial_relaxed(
    m: &dyn Spacetime,
    x: &DVector<f64>,
    v: &DVector<f64>,
    d: &Deriv,
) -> Result<f64> {
    if x.len() != m.dim() {
        return Err(Error::DimMismatch { expected: m.dim(), got: x.len() });
    }
    check_vector(m, v)?;
    if d.n != m.dim() {
        return Err(Error::DimMismatch { expected: m.dim(), got: d.n });
    }
    if d.order() > MAX_ORDER || d.x_order() > MAX_X_ORDER {
        return Err(Error::OrderExceeded { order: d.order(), x_order: d.x_order() });
    }
    Ok(m.partial(x, v, d))
}

/// Like [`eval_l`] but without the chart-box test on x; see
/// [`eval_partial_relaxed`].
pub(crate) fn eval_l_relaxed(m: &dyn Spacetime, x: &DVector<f64>, v: &DVector<f64>) -> Result<f64> {
    if x.len() != m.dim() {
        return Err(Error::DimMismatch { expected: m.dim(), got: x.len() });
    }
    check_vector(m, v)?;
    Ok(m.lagrangian(x, v))
}

/// Base step for the generic finite-difference oracle.
pub const FD_STEP: f64 = 1e-3;

#[derive(Clone, Copy)]
enum Slot {
    X(usize),
    V(usize),
}

fn nested_central(
    f: &dyn Fn(&DVector<f64>, &DVector<f64>) -> f64,
    x: &mut DVector<f64>,
    v: &mut DVector<f64>,
    slots: &[(Slot, f64)],
) -> f64 {
    let Some(((slot, h), rest)) = slots.split_first() else {
        return f(x, v);
    };
    let h = *h;
    match *slot {
        Slot::X(i) => {
            x[i] += h;
            let p = nested_central(f, x, v, rest);
            x[i] -= 2.0 * h;
            let q = nested_central(f, x, v, rest);
            x[i] += h;
            (p - q) / (2.0 * h)
        }
        Slot::V(i) => {
            v[i] += h;
            let p = nested_central(f, x, v, rest);
            v[i] -= 2.0 * h;
            let q = nested_central(f, x, v, rest);
            v[i] += h;
            (p - q) / (2.0 * h)
        }
    }
}

/// Central-difference mixed partial with one Richardson extrapolation level.
/// Step per slot: FD_STEP * (1 + |center component|).  Accuracy degrades with
/// total order; closed-form oracles should be preferred above order 2.
pub fn fd_partial(
    f: &dyn Fn(&DVector<f64>, &DVector<f64>) -> f64,
    x: &DVector<f64>,
    v: &DVector<f64>,
    d: &Deriv,
) -> f64 {
    let mut slots: Vec<(Slot, f64)> = Vec::with_capacity(d.order());
    for i in d.x_slots() {
        slots.push((Slot::X(i), FD_STEP * (1.0 + x[i].abs())));
    }
    for i in d.v_slots() {
        slots.push((Slot::V(i), FD_STEP * (1.0 + v[i].abs())));
    }
    if slots.is_empty() {
        return f(x, v);
    }
    let mut xw = x.clone();
    let mut vw = v.clone();
    let coarse = nested_central(f, &mut xw, &mut vw, &slots);
    for s in slots.iter_mut() {
        s.1 *= 0.5;
    }
    let fine = nested_central(f, &mut xw, &mut vw, &slots);
    (4.0 * fine - coarse) / 3.0
}

/// L-reversal: same chart, L_rev(x, v) = L(x, -v), opposite orientation.
struct Reversed {
    inner: Arc<dyn Spacetime>,
    name: String,
}

pub fn reverse_model(m: Arc<dyn Spacetime>) -> Arc<dyn Spacetime> {
    let name = format!("reverse_{}", m.name());
    Arc::new(Reversed { inner: m, name })
}

impl Spacetime for Reversed {
    fn name(&self) -> &str {
        &self.name
    }

    fn dim(&self) -> usize {
        self.inner.dim()
    }

    fn chart(&self) -> &ChartBox {
        self.inner.chart()
    }

    fn cone(&self) -> Option<ValidityCone> {
        self.inner.cone()
    }

    fn lagrangian(&self, x: &DVector<f64>, v: &DVector<f64>) -> f64 {
        self.inner.lagrangian(x, &-v)
    }

    fn partial(&self, x: &DVector<f64>, v: &DVector<f64>, d: &Deriv) -> f64 {
        let sign = if d.v_order() % 2 == 1 { -1.0 } else { 1.0 };
        sign * self.inner.partial(x, &-v, d)
    }

    fn orientation(&self, x: &DVector<f64>) -> DVector<f64> {
        -self.inner.orientation(x)
    }
}

/// JSON-facing model description.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ModelConfig {
    pub name: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub dim: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub radius: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub epsilon: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub cone_c: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub chart_min: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub chart_max: Option<Vec<f64>>,
}

impl ModelConfig {
    pub fn named(name: &str) -> Self {
        ModelConfig {
            name: name.to_string(),
            dim: None,
            radius: None,
            epsilon: None,
            cone_c: None,
            chart_min: None,
            chart_max: None,
        }
    }
}

/// Build a zoo model from a config.  Unknown names, out-of-range parameters,
/// and inconsistent chart boxes are rejected as `BadConfig`.
pub fn build_model(cfg: &ModelConfig) -> Result<Arc<dyn Spacetime>> {
    zoo::build(cfg)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn mink() -> Arc<dyn Spacetime> {
        build_model(&ModelConfig::named("minkowski")).unwrap()
    }

    #[test]
    fn eval_l_guards() {
        let m = mink();
        let x = DVector::from_vec(vec![0.0, 0.0]);
        let v = DVector::from_vec(vec![1.0, 0.0]);
        assert!(eval_l(m.as_ref(), &x, &v).is_ok());
        let far = DVector::from_vec(vec![5.0, 0.0]);
        assert!(matches!(eval_l(m.as_ref(), &far, &v), Err(Error::OutsideChart)));
        let zero = DVector::zeros(2);
        assert!(matches!(eval_l(m.as_ref(), &x, &zero), Err(Error::ZeroVector)));
        let bad = DVector::from_vec(vec![0.0]);
        assert!(matches!(eval_l(m.as_ref(), &bad, &v), Err(Error::DimMismatch { .. })));
    }

    #[test]
    fn eval_partial_order_guard() {
        let m = mink();
        let x = DVector::zeros(2);
        let v = DVector::from_vec(vec![1.0, 0.0]);
        let d5 = Deriv::none(2).dv(0).dv(0).dv(0).dv(0).dv(0);
        assert!(matches!(
            eval_partial(m.as_ref(), &x, &v, &d5),
            Err(Error::OrderExceeded { .. })
        ));
        let d3x = Deriv::none(2).dx(0).dx(0).dx(0).dv(0);
        assert!(matches!(
            eval_partial(m.as_ref(), &x, &v, &d3x),
            Err(Error::OrderExceeded { .. })
        ));
    }

    #[test]
    fn cone_guard_applies_to_finsler_models() {
        let m = build_model(&ModelConfig::named("flat_finsler")).unwrap();
        let x = DVector::zeros(2);
        let inside = DVector::from_vec(vec![1.0, 0.4]);
        let outside = DVector::from_vec(vec![1.0, 0.6]);
        assert!(eval_l(m.as_ref(), &x, &inside).is_ok());
        assert!(matches!(eval_l(m.as_ref(), &x, &outside), Err(Error::OutsideCone)));
    }

    #[test]
    fn reversal_flips_odd_v_orders_and_orientation() {
        let cfg = ModelConfig { dim: Some(3), ..ModelConfig::named("de_sitter") };
        let m = build_model(&cfg).unwrap();
        let r = reverse_model(m.clone());
        let x = DVector::from_vec(vec![0.1, 0.05, -0.08]);
        let v = DVector::from_vec(vec![0.9, 0.2, -0.1]);
        assert!((r.lagrangian(&x, &v) - m.lagrangian(&x, &-&v)).abs() < 1e-15);
        let d1 = Deriv::none(3).dv(1);
        assert!((r.partial(&x, &v, &d1) + m.partial(&x, &-&v, &d1)).abs() < 1e-15);
        let d2 = Deriv::none(3).dv(1).dv(2);
        assert!((r.partial(&x, &v, &d2) - m.partial(&x, &-&v, &d2)).abs() < 1e-15);
        assert_eq!(r.orientation(&x)[0], -1.0);
    }

    #[test]
    fn fd_fallback_matches_closed_form_at_low_order() {
        struct BlackBox(Arc<dyn Spacetime>);
        impl Spacetime for BlackBox {
            fn name(&self) -> &str {
                "blackbox"
            }
            fn dim(&self) -> usize {
                self.0.dim()
            }
            fn chart(&self) -> &ChartBox {
                self.0.chart()
            }
            fn lagrangian(&self, x: &DVector<f64>, v: &DVector<f64>) -> f64 {
                self.0.lagrangian(x, v)
            }
        }
        let cfg = ModelConfig { dim: Some(3), ..ModelConfig::named("de_sitter") };
        let m = build_model(&cfg).unwrap();
        let bb = BlackBox(m.clone());
        let x = DVector::from_vec(vec![0.1, 0.05, -0.08]);
        let v = DVector::from_vec(vec![0.9, 0.2, -0.1]);
        for d in [
            Deriv::none(3).dv(0).dv(0),
            Deriv::none(3).dv(1).dv(2),
            Deriv::none(3).dx(1).dv(2).dv(2),
            Deriv::none(3).dx(2).dx(1).dv(0),
        ] {
            let exact = m.partial(&x, &v, &d);
            let fd = bb.partial(&x, &v, &d);
            let scale = 1.0 + exact.abs();
            assert!(
                (exact - fd).abs() / scale < 1e-6,
                "order {} mismatch: {exact} vs {fd}",
                d.order()
            );
        }
    }
}
