//! Built-in model zoo.
//!
//! Quadratic models carry an explicit metric g(x) with closed-form x-partials
//! to second order; the two quartic models add eps(x) (v^1)^4 / (v^0)^2 to the
//! Minkowski form and declare a validity cone.

use std::sync::Arc;

use nalgebra::{DMatrix, DVector};

use crate::chart::{ChartBox, ValidityCone, DEFAULT_CONE_C};
use crate::deriv::Deriv;
use crate::error::{Error, Result};

use super::{ModelConfig, Spacetime};

pub const ZOO_NAMES: [&str; 6] = [
    "minkowski",
    "de_sitter",
    "product_hyperbolic",
    "product_sphere",
    "flat_finsler",
    "perturbed_finsler",
];

/// v-part of a quadratic Lagrangian partial: L = v' g v / 2 with g already
/// differentiated in x; slots are the v-axes of the multi-index.
fn quad_v_part(g: &DMatrix<f64>, v: &DVector<f64>, vslots: &[usize]) -> f64 {
    match *vslots {
        [] => 0.5 * (v.transpose() * g * v)[(0, 0)],
        [a] => (g * v)[a],
        [a, b] => g[(a, b)],
        _ => 0.0,
    }
}

fn collect_slots(d: &Deriv) -> ([usize; 4], usize, [usize; 4], usize) {
    let mut ax = [0usize; 4];
    let mut na = 0;
    for i in d.x_slots() {
        ax[na] = i;
        na += 1;
    }
    let mut av = [0usize; 4];
    let mut nv = 0;
    for i in d.v_slots() {
        if nv < 4 {
            av[nv] = i;
        }
        nv += 1;
    }
    (ax, na, av, nv)
}

// ---------------------------------------------------------------------------
// Minkowski
// ---------------------------------------------------------------------------

struct Minkowski {
    n: usize,
    chart: ChartBox,
}

fn mink_metric(n: usize) -> DMatrix<f64> {
    let mut g = DMatrix::identity(n, n);
    g[(0, 0)] = -1.0;
    g
}

impl Spacetime for Minkowski {
    fn name(&self) -> &str {
        "minkowski"
    }

    fn dim(&self) -> usize {
        self.n
    }

    fn chart(&self) -> &ChartBox {
        &self.chart
    }

    fn lagrangian(&self, _x: &DVector<f64>, v: &DVector<f64>) -> f64 {
        let spatial: f64 = v.iter().skip(1).map(|a| a * a).sum();
        0.5 * (-v[0] * v[0] + spatial)
    }

    fn partial(&self, _x: &DVector<f64>, v: &DVector<f64>, d: &Deriv) -> f64 {
        let (_, na, av, nv) = collect_slots(d);
        if na > 0 {
            return 0.0;
        }
        quad_v_part(&mink_metric(self.n), v, &av[..nv.min(3)])
    }
}

// ---------------------------------------------------------------------------
// de Sitter, static-patch chart in Cartesian spatial coordinates
//
//   g_00 = -(1 - |y|^2 / R^2),  g_ij = delta_ij + y_i y_j / (R^2 - |y|^2)
//
// Smooth on |y| < R; the chart box stays well inside.
// ---------------------------------------------------------------------------

struct DeSitter {
    n: usize,
    radius: f64,
    chart: ChartBox,
}

impl DeSitter {
    /// Metric differentiated along the chart axes in `ax` (0, 1, or 2 slots).
    /// Any time-axis slot kills the whole matrix.
    fn metric_deriv(&self, x: &DVector<f64>, ax: &[usize]) -> DMatrix<f64> {
        let n = self.n;
        let r2 = self.radius * self.radius;
        let s: f64 = x.iter().skip(1).map(|a| a * a).sum();
        let w = 1.0 / (r2 - s);
        let y = |i: usize| x[i]; // chart axis i >= 1
        let mut g = DMatrix::zeros(n, n);
        match *ax {
            [] => {
                g[(0, 0)] = -(1.0 - s / r2);
                for i in 1..n {
                    for j in 1..n {
                        g[(i, j)] = y(i) * y(j) * w + if i == j { 1.0 } else { 0.0 };
                    }
                }
            }
            [a] => {
                if a == 0 {
                    return g;
                }
                g[(0, 0)] = 2.0 * y(a) / r2;
                for i in 1..n {
                    for j in 1..n {
                        let da = |p: usize, q: usize| if p == q { 1.0 } else { 0.0 };
                        g[(i, j)] = (da(a, i) * y(j) + da(a, j) * y(i)) * w
                            + 2.0 * y(i) * y(j) * y(a) * w * w;
                    }
                }
            }
            [a, b] => {
                if a == 0 || b == 0 {
                    return g;
                }
                g[(0, 0)] = if a == b { 2.0 / r2 } else { 0.0 };
                let da = |p: usize, q: usize| if p == q { 1.0 } else { 0.0 };
                for i in 1..n {
                    for j in 1..n {
                        let first = (da(a, i) * da(b, j) + da(a, j) * da(b, i)) * w;
                        let second = 2.0
                            * ((da(a, i) * y(j) + da(a, j) * y(i)) * y(b)
                                + (da(b, i) * y(j) + da(b, j) * y(i)) * y(a)
                                + da(a, b) * y(i) * y(j))
                            * w
                            * w;
                        let third = 8.0 * y(i) * y(j) * y(a) * y(b) * w * w * w;
                        g[(i, j)] = first + second + third;
                    }
                }
            }
            _ => unreachable!("x-order capped at 2"),
        }
        g
    }
}

impl Spacetime for DeSitter {
    fn name(&self) -> &str {
        "de_sitter"
    }

    fn dim(&self) -> usize {
        self.n
    }

    fn chart(&self) -> &ChartBox {
        &self.chart
    }

    fn lagrangian(&self, x: &DVector<f64>, v: &DVector<f64>) -> f64 {
        let g = self.metric_deriv(x, &[]);
        0.5 * (v.transpose() * g * v)[(0, 0)]
    }

    fn partial(&self, x: &DVector<f64>, v: &DVector<f64>, d: &Deriv) -> f64 {
        let (ax, na, av, nv) = collect_slots(d);
        let g = self.metric_deriv(x, &ax[..na.min(2)]);
        if na > 2 {
            return 0.0;
        }
        quad_v_part(&g, v, &av[..nv.min(3)])
    }
}

// ---------------------------------------------------------------------------
// Static conformal products -dt^2 + phi(y)^2 delta, phi = 2 / (1 + sign |y|^2):
// sign = -1 is the Poincare ball (curvature -1), sign = +1 the stereographic
// round sphere (curvature +1).
// ---------------------------------------------------------------------------

struct ConformalProduct {
    n: usize,
    sign: f64,
    name: &'static str,
    chart: ChartBox,
}

impl ConformalProduct {
    fn metric_deriv(&self, x: &DVector<f64>, ax: &[usize]) -> DMatrix<f64> {
        let n = self.n;
        let s: f64 = x.iter().skip(1).map(|a| a * a).sum();
        let u = 1.0 + self.sign * s;
        let q = 4.0 / (u * u);
        let dq = -8.0 * self.sign / (u * u * u);
        let ddq = 24.0 / (u * u * u * u);
        let y = |i: usize| x[i];
        let da = |p: usize, q: usize| if p == q { 1.0 } else { 0.0 };
        let mut g = DMatrix::zeros(n, n);
        match *ax {
            [] => {
                g[(0, 0)] = -1.0;
                for i in 1..n {
                    g[(i, i)] = q;
                }
            }
            [a] => {
                if a == 0 {
                    return g;
                }
                for i in 1..n {
                    g[(i, i)] = dq * 2.0 * y(a);
                }
            }
            [a, b] => {
                if a == 0 || b == 0 {
                    return g;
                }
                for i in 1..n {
                    g[(i, i)] = 2.0 * da(a, b) * dq + 4.0 * y(a) * y(b) * ddq;
                }
            }
            _ => unreachable!("x-order capped at 2"),
        }
        g
    }
}

impl Spacetime for ConformalProduct {
    fn name(&self) -> &str {
        self.name
    }

    fn dim(&self) -> usize {
        self.n
    }

    fn chart(&self) -> &ChartBox {
        &self.chart
    }

    fn lagrangian(&self, x: &DVector<f64>, v: &DVector<f64>) -> f64 {
        let g = self.metric_deriv(x, &[]);
        0.5 * (v.transpose() * g * v)[(0, 0)]
    }

    fn partial(&self, x: &DVector<f64>, v: &DVector<f64>, d: &Deriv) -> f64 {
        let (ax, na, av, nv) = collect_slots(d);
        if na > 2 {
            return 0.0;
        }
        let g = self.metric_deriv(x, &ax[..na]);
        quad_v_part(&g, v, &av[..nv.min(3)])
    }
}

// ---------------------------------------------------------------------------
// Quartic Finsler family: L = (-(v^0)^2 + |v-hat|^2)/2 + eps(x) (v^1)^4/(v^0)^2
// with eps(x) = eps0 (1 + slope * x^1); slope = 0 gives the x-independent
// (hence Berwald, locally flat) member, slope = 1 the non-Berwald one.
// ---------------------------------------------------------------------------

struct QuarticFinsler {
    n: usize,
    eps0: f64,
    slope: f64,
    cone: ValidityCone,
    name: &'static str,
    chart: ChartBox,
}

/// d^a/d(v0)^a d^b/d(v1)^b of (v1)^4 / (v0)^2, zero when any other axis
/// carries a derivative.
fn quartic_t_partial(v0: f64, v1: f64, a: usize, b: usize) -> f64 {
    if b > 4 {
        return 0.0;
    }
    const FALL4: [f64; 5] = [1.0, 4.0, 12.0, 24.0, 24.0];
    // (-2)(-3)...(-2 - a + 1) = (-1)^a (a+1)!
    let mut neg2 = 1.0;
    for k in 0..a {
        neg2 *= -(2.0 + k as f64);
    }
    FALL4[b] * v1.powi(4 - b as i32) * neg2 * v0.powi(-2 - a as i32)
}

impl QuarticFinsler {
    fn eps(&self, x: &DVector<f64>) -> f64 {
        self.eps0 * (1.0 + self.slope * x[1])
    }
}

impl Spacetime for QuarticFinsler {
    fn name(&self) -> &str {
        self.name
    }

    fn dim(&self) -> usize {
        self.n
    }

    fn chart(&self) -> &ChartBox {
        &self.chart
    }

    fn cone(&self) -> Option<ValidityCone> {
        Some(self.cone)
    }

    fn lagrangian(&self, x: &DVector<f64>, v: &DVector<f64>) -> f64 {
        let spatial: f64 = v.iter().skip(1).map(|a| a * a).sum();
        0.5 * (-v[0] * v[0] + spatial) + self.eps(x) * v[1].powi(4) / (v[0] * v[0])
    }

    fn partial(&self, x: &DVector<f64>, v: &DVector<f64>, d: &Deriv) -> f64 {
        let (ax, na, av, nv) = collect_slots(d);
        let quad = if na > 0 {
            0.0
        } else {
            quad_v_part(&mink_metric(self.n), v, &av[..nv.min(3)])
        };
        // eps factor after the x-derivatives in the multi-index
        let eps_fac = match ax[..na] {
            [] => self.eps(x),
            [1] => self.eps0 * self.slope,
            _ => 0.0,
        };
        if eps_fac == 0.0 {
            return quad;
        }
        // quartic term dies unless all v-slots hit axes 0 or 1
        let a = d.v[0] as usize;
        let b = d.v[1] as usize;
        if a + b != d.v_order() {
            return quad;
        }
        quad + eps_fac * quartic_t_partial(v[0], v[1], a, b)
    }
}

// ---------------------------------------------------------------------------
// Config handling
// ---------------------------------------------------------------------------

fn chart_from_cfg(cfg: &ModelConfig, dim: usize, default: ChartBox) -> Result<ChartBox> {
    match (&cfg.chart_min, &cfg.chart_max) {
        (None, None) => Ok(default),
        (Some(lo), Some(hi)) => {
            if lo.len() != dim || hi.len() != dim {
                return Err(Error::BadConfig(format!(
                    "chart bounds must have length {dim}"
                )));
            }
            if lo.iter().zip(hi).any(|(a, b)| !(a < b)) {
                return Err(Error::BadConfig("chart_min must be below chart_max".into()));
            }
            Ok(ChartBox::new(lo.clone(), hi.clone()))
        }
        _ => Err(Error::BadConfig(
            "chart_min and chart_max must be given together".into(),
        )),
    }
}

fn dim_from_cfg(cfg: &ModelConfig, default: usize) -> Result<usize> {
    let dim = cfg.dim.unwrap_or(default);
    if !(2..=4).contains(&dim) {
        return Err(Error::BadConfig(format!("dim {dim} outside 2..=4")));
    }
    Ok(dim)
}

fn quartic_params(cfg: &ModelConfig) -> Result<(f64, f64)> {
    let eps0 = cfg.epsilon.unwrap_or(0.02);
    if eps0.abs() > 0.05 {
        return Err(Error::BadConfig(format!("|epsilon| = {} exceeds 0.05", eps0.abs())));
    }
    let c = cfg.cone_c.unwrap_or(DEFAULT_CONE_C);
    if c < 1.0 {
        return Err(Error::BadConfig(format!("cone_c = {c} must be >= 1")));
    }
    Ok((eps0, c))
}

pub(super) fn build(cfg: &ModelConfig) -> Result<Arc<dyn Spacetime>> {
    match cfg.name.as_str() {
        "minkowski" => {
            let n = dim_from_cfg(cfg, 2)?;
            let chart = chart_from_cfg(cfg, n, ChartBox::symmetric(&vec![1.0; n]))?;
            Ok(Arc::new(Minkowski { n, chart }))
        }
        "de_sitter" => {
            let n = dim_from_cfg(cfg, 3)?;
            let radius = cfg.radius.unwrap_or(1.0);
            if !(radius > 0.0) {
                return Err(Error::BadConfig(format!("radius = {radius} must be > 0")));
            }
            let y_half = 0.3 * radius / ((n - 1) as f64).sqrt();
            let mut hw = vec![y_half; n];
            hw[0] = 0.3 * radius;
            let chart = chart_from_cfg(cfg, n, ChartBox::symmetric(&hw))?;
            let r_max: f64 = (1..n)
                .map(|i| chart.min[i].abs().max(chart.max[i].abs()).powi(2))
                .sum::<f64>()
                .sqrt();
            if r_max >= radius {
                return Err(Error::BadConfig(format!(
                    "chart reaches |y| = {r_max:.3} >= radius {radius}"
                )));
            }
            Ok(Arc::new(DeSitter { n, radius, chart }))
        }
        "product_hyperbolic" | "product_sphere" => {
            let n = dim_from_cfg(cfg, 3)?;
            let sign = if cfg.name == "product_sphere" { 1.0 } else { -1.0 };
            let mut hw = vec![0.35; n];
            hw[0] = 0.6;
            let chart = chart_from_cfg(cfg, n, ChartBox::symmetric(&hw))?;
            if sign < 0.0 {
                let r_max: f64 = (1..n)
                    .map(|i| chart.min[i].abs().max(chart.max[i].abs()).powi(2))
                    .sum::<f64>()
                    .sqrt();
                if r_max >= 1.0 {
                    return Err(Error::BadConfig(format!(
                        "chart reaches |y| = {r_max:.3} >= 1 (Poincare ball boundary)"
                    )));
                }
            }
            let name: &'static str = if sign > 0.0 { "product_sphere" } else { "product_hyperbolic" };
            Ok(Arc::new(ConformalProduct { n, sign, name, chart }))
        }
        "flat_finsler" | "perturbed_finsler" => {
            let n = dim_from_cfg(cfg, 2)?;
            let (eps0, c) = quartic_params(cfg)?;
            let chart = chart_from_cfg(cfg, n, ChartBox::symmetric(&vec![1.0; n]))?;
            let slope = if cfg.name == "perturbed_finsler" { 1.0 } else { 0.0 };
            let name: &'static str =
                if slope > 0.0 { "perturbed_finsler" } else { "flat_finsler" };
            Ok(Arc::new(QuarticFinsler {
                n,
                eps0,
                slope,
                cone: ValidityCone { c },
                name,
                chart,
            }))
        }
        other => Err(Error::BadConfig(format!("unknown model '{other}'"))),
    }
}

/// Default configs for every zoo model, in canonical order.
pub fn zoo_configs() -> Vec<ModelConfig> {
    ZOO_NAMES
        .iter()
        .map(|&name| {
            let mut cfg = ModelConfig::named(name);
            match name {
                "minkowski" => cfg.dim = Some(2),
                "de_sitter" => {
                    cfg.dim = Some(3);
                    cfg.radius = Some(1.0);
                }
                "product_hyperbolic" | "product_sphere" => cfg.dim = Some(3),
                "flat_finsler" | "perturbed_finsler" => {
                    cfg.dim = Some(2);
                    cfg.epsilon = Some(0.02);
                    cfg.cone_c = Some(DEFAULT_CONE_C);
                }
                _ => unreachable!(),
            }
            cfg
        })
        .collect()
}
