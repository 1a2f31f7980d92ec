//! Formal Christoffel symbols, geodesic spray, nonlinear connection, Chern
//! connection, covariant derivatives, and the Berwald-deviation detector.
//!
//! Everything here is assembled from closed-form derivative-oracle calls of
//! total order at most 4 (at most one x-slot), so the arrays are exact up to
//! the model's own oracle accuracy.  No finite differencing happens in this
//! module.

use nalgebra::{DMatrix, DVector};

use crate::deriv::Deriv;
use crate::error::{Error, Result};
use crate::fundamental::metric_inverse_relaxed;
use crate::models::{check_point, check_vector, eval_partial_relaxed, Spacetime};
use crate::rng;

/// Dense rank-3 array indexed [i][j][k], n <= 8.
#[derive(Debug, Clone, PartialEq)]
pub struct Tensor3 {
    n: usize,
    data: Vec<f64>,
}

impl Tensor3 {
    pub fn zeros(n: usize) -> Self {
        Tensor3 { n, data: vec![0.0; n * n * n] }
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize, k: usize) -> f64 {
        self.data[(i * self.n + j) * self.n + k]
    }

    #[inline]
    pub fn set(&mut self, i: usize, j: usize, k: usize, val: f64) {
        self.data[(i * self.n + j) * self.n + k] = val;
    }

    /// Sum_jk T^i_jk a^j b^k.
    pub fn contract(&self, a: &DVector<f64>, b: &DVector<f64>) -> DVector<f64> {
        let n = self.n;
        DVector::from_iterator(
            n,
            (0..n).map(|i| {
                let mut s = 0.0;
                for j in 0..n {
                    for k in 0..n {
                        s += self.get(i, j, k) * a[j] * b[k];
                    }
                }
                s
            }),
        )
    }

    pub fn inf_norm(&self) -> f64 {
        self.data.iter().fold(0.0, |m, a| m.max(a.abs()))
    }

    pub fn max_abs_diff(&self, other: &Tensor3) -> f64 {
        self.data
            .iter()
            .zip(other.data.iter())
            .fold(0.0, |m, (a, b)| m.max((a - b).abs()))
    }
}

/// All connection data at a fixed (x, v).
#[derive(Debug, Clone)]
pub struct ConnectionEval {
    pub at: (DVector<f64>, DVector<f64>),
    /// Formal Christoffel symbols of the second kind.
    pub gamma: Tensor3,
    /// Geodesic spray coefficients, spray^i = gamma^i_jk v^j v^k.
    pub spray: DVector<f64>,
    /// Nonlinear connection, nonlinear^i_j = d(spray^i)/dv^j / 2.
    pub nonlinear: DMatrix<f64>,
    /// Chern connection coefficients.
    pub chern: Tensor3,
}

struct Partials {
    n: usize,
    ginv: DMatrix<f64>,
    /// dgx[c][(a,b)] = d g_ab / d x^c
    dgx: Vec<DMatrix<f64>>,
    /// cartan[m][(a,b)] = d g_ab / d v^m  (twice the Cartan tensor)
    cartan: Vec<DMatrix<f64>>,
    /// mixed[c][m][(a,b)] = d^2 g_ab / d x^c d v^m
    mixed: Vec<Vec<DMatrix<f64>>>,
}

fn sym_eval(
    m: &dyn Spacetime,
    x: &DVector<f64>,
    v: &DVector<f64>,
    base: Deriv,
) -> Result<DMatrix<f64>> {
    let n = m.dim();
    let mut out = DMatrix::zeros(n, n);
    for a in 0..n {
        for b in a..n {
            let val = eval_partial_relaxed(m, x, v, &base.dv(a).dv(b))?;
            out[(a, b)] = val;
            out[(b, a)] = val;
        }
    }
    Ok(out)
}

fn partials(
    m: &dyn Spacetime,
    x: &DVector<f64>,
    v: &DVector<f64>,
    with_mixed: bool,
) -> Result<Partials> {
    let n = m.dim();
    let (_, ginv) = metric_inverse_relaxed(m, x, v)?;
    let mut dgx = Vec::with_capacity(n);
    let mut cartan = Vec::with_capacity(n);
    for c in 0..n {
        dgx.push(sym_eval(m, x, v, Deriv::none(n).dx(c))?);
        cartan.push(sym_eval(m, x, v, Deriv::none(n).dv(c))?);
    }
    let mut mixed = Vec::new();
    if with_mixed {
        for c in 0..n {
            let mut row = Vec::with_capacity(n);
            for mm in 0..n {
                row.push(sym_eval(m, x, v, Deriv::none(n).dx(c).dv(mm))?);
            }
            mixed.push(row);
        }
    }
    Ok(Partials { n, ginv, dgx, cartan, mixed })
}

impl Partials {
    #[inline]
    fn d_coeff(&self, l: usize, j: usize, k: usize) -> f64 {
        self.dgx[j][(l, k)] + self.dgx[k][(j, l)] - self.dgx[l][(j, k)]
    }

    /// d/dv^m of d_coeff(l, j, k).
    #[inline]
    fn d_coeff_dv(&self, l: usize, j: usize, k: usize, m: usize) -> f64 {
        self.mixed[j][m][(l, k)] + self.mixed[k][m][(j, l)] - self.mixed[l][m][(j, k)]
    }

    fn gamma(&self) -> Tensor3 {
        let n = self.n;
        let mut t = Tensor3::zeros(n);
        for i in 0..n {
            for j in 0..n {
                for k in j..n {
                    let mut s = 0.0;
                    for l in 0..n {
                        s += self.ginv[(i, l)] * self.d_coeff(l, j, k);
                    }
                    t.set(i, j, k, 0.5 * s);
                    t.set(i, k, j, 0.5 * s);
                }
            }
        }
        t
    }

    /// d gamma^i_jk / d v^m, exact.
    fn gamma_dv(&self) -> Vec<Tensor3> {
        let n = self.n;
        // dginv[m] = -ginv cartan[m] ginv
        let dginv: Vec<DMatrix<f64>> = (0..n)
            .map(|m| -(&self.ginv * &self.cartan[m] * &self.ginv))
            .collect();
        (0..n)
            .map(|m| {
                let mut t = Tensor3::zeros(n);
                for i in 0..n {
                    for j in 0..n {
                        for k in j..n {
                            let mut s = 0.0;
                            for l in 0..n {
                                s += dginv[m][(i, l)] * self.d_coeff(l, j, k)
                                    + self.ginv[(i, l)] * self.d_coeff_dv(l, j, k, m);
                            }
                            t.set(i, j, k, 0.5 * s);
                            t.set(i, k, j, 0.5 * s);
                        }
                    }
                }
                t
            })
            .collect()
    }
}

/// Spray coefficients alone, via the contracted form; the cheapest evaluation,
/// used in ODE right-hand sides.
pub fn spray(m: &dyn Spacetime, x: &DVector<f64>, v: &DVector<f64>) -> Result<DVector<f64>> {
    check_point(m, x)?;
    spray_relaxed(m, x, v)
}

/// [`spray`] without the chart-box test; see `eval_partial_relaxed`.
pub(crate) fn spray_relaxed(
    m: &dyn Spacetime,
    x: &DVector<f64>,
    v: &DVector<f64>,
) -> Result<DVector<f64>> {
    let n = m.dim();
    let (_, ginv) = metric_inverse_relaxed(m, x, v)?;
    let mut b = DVector::zeros(n);
    let mut c = DVector::zeros(n);
    for l in 0..n {
        let gl = sym_eval(m, x, v, Deriv::none(n).dx(l))?;
        let gv = &gl * v;
        c[l] = (v.transpose() * &gv)[(0, 0)];
        for i in 0..n {
            b[i] += gv[i] * v[l];
        }
    }
    Ok(&ginv * (b - c * 0.5))
}

/// Spray and nonlinear connection, both exact; the pair the curvature module
/// differentiates.
pub fn spray_and_nonlinear(
    m: &dyn Spacetime,
    x: &DVector<f64>,
    v: &DVector<f64>,
) -> Result<(DVector<f64>, DMatrix<f64>)> {
    check_point(m, x)?;
    spray_and_nonlinear_relaxed(m, x, v)
}

pub(crate) fn spray_and_nonlinear_relaxed(
    m: &dyn Spacetime,
    x: &DVector<f64>,
    v: &DVector<f64>,
) -> Result<(DVector<f64>, DMatrix<f64>)> {
    let p = partials(m, x, v, true)?;
    let gamma = p.gamma();
    let g_spray = gamma.contract(v, v);
    let gamma_dv = p.gamma_dv();
    let n = p.n;
    let mut nl = DMatrix::zeros(n, n);
    for i in 0..n {
        for j in 0..n {
            let mut s = 0.0;
            for q in 0..n {
                s += gamma.get(i, j, q) * v[q];
            }
            nl[(i, j)] = 0.5 * gamma_dv[j].contract(v, v)[i] + s;
        }
    }
    Ok((g_spray, nl))
}

const QUADRATIC_EPS: f64 = 1e-14;

/// Chern coefficients only, chart-relaxed; quadratic models (vanishing
/// Cartan tensor) short-circuit to the formal Christoffel symbols.  This is
/// the parallel-transport hot path.
pub(crate) fn chern_relaxed(
    m: &dyn Spacetime,
    x: &DVector<f64>,
    v: &DVector<f64>,
) -> Result<Tensor3> {
    let p = partials(m, x, v, false)?;
    let gamma = p.gamma();
    if p.cartan.iter().all(|c| c.amax() < QUADRATIC_EPS) {
        return Ok(gamma);
    }
    Ok(connection_eval_relaxed(m, x, v)?.chern)
}

/// Full connection evaluation at (x, v).
pub fn connection_eval(
    m: &dyn Spacetime,
    x: &DVector<f64>,
    v: &DVector<f64>,
) -> Result<ConnectionEval> {
    check_point(m, x)?;
    check_vector(m, v)?;
    connection_eval_relaxed(m, x, v)
}

pub(crate) fn connection_eval_relaxed(
    m: &dyn Spacetime,
    x: &DVector<f64>,
    v: &DVector<f64>,
) -> Result<ConnectionEval> {
    let p = partials(m, x, v, true)?;
    let gamma = p.gamma();
    let g_spray = gamma.contract(v, v);
    let gamma_dv = p.gamma_dv();
    let n = p.n;
    let mut nl = DMatrix::zeros(n, n);
    for i in 0..n {
        for j in 0..n {
            let mut s = 0.5 * gamma_dv[j].contract(v, v)[i];
            for q in 0..n {
                s += gamma.get(i, j, q) * v[q];
            }
            nl[(i, j)] = s;
        }
    }
    let mut chern = Tensor3::zeros(n);
    for i in 0..n {
        for j in 0..n {
            for k in j..n {
                let mut corr = 0.0;
                for l in 0..n {
                    let mut term = 0.0;
                    for mm in 0..n {
                        term += p.cartan[mm][(l, k)] * nl[(mm, j)]
                            + p.cartan[mm][(j, l)] * nl[(mm, k)]
                            - p.cartan[mm][(j, k)] * nl[(mm, l)];
                    }
                    corr += p.ginv[(i, l)] * term;
                }
                let val = gamma.get(i, j, k) - 0.5 * corr;
                chern.set(i, j, k, val);
                chern.set(i, k, j, val);
            }
        }
    }
    Ok(ConnectionEval {
        at: (x.clone(), v.clone()),
        gamma,
        spray: g_spray,
        nonlinear: nl,
        chern,
    })
}

/// Reference-vector policy for covariant differentiation along a curve.
#[derive(Debug, Clone)]
pub enum ReferencePolicy {
    /// Reference = curve tangent at each knot.
    Tangent,
    /// Reference = the differentiated field itself.
    Field,
    /// A fixed reference vector used at every knot.
    Fixed(DVector<f64>),
}

/// Covariant derivative of `field` along the knotted curve (ts, xs, vs):
/// (D Y)^i = dY^i/dt + Gamma^i_jk(ref) eta-dot^j Y^k, with dY/dt from
/// second-order nonuniform finite differences on the knot grid.
pub fn covariant_derivative(
    m: &dyn Spacetime,
    ts: &[f64],
    xs: &[DVector<f64>],
    vs: &[DVector<f64>],
    field: &[DVector<f64>],
    reference: &ReferencePolicy,
) -> Result<Vec<DVector<f64>>> {
    let k = ts.len();
    if k < 3 {
        return Err(Error::GridTooCoarse { knots: k });
    }
    if xs.len() != k || vs.len() != k || field.len() != k {
        return Err(Error::DimMismatch { expected: k, got: xs.len().min(vs.len()).min(field.len()) });
    }
    let mut out = Vec::with_capacity(k);
    for i in 0..k {
        let dy = knot_derivative(ts, field, i);
        let refv = match reference {
            ReferencePolicy::Tangent => vs[i].clone(),
            ReferencePolicy::Field => field[i].clone(),
            ReferencePolicy::Fixed(w) => w.clone(),
        };
        if refv.norm() == 0.0 {
            return Err(Error::ZeroReference);
        }
        let conn = connection_eval(m, &xs[i], &refv)?;
        out.push(dy + conn.chern.contract(&vs[i], &field[i]));
    }
    Ok(out)
}

/// Second-order first derivative on a nonuniform grid (central inside,
/// one-sided at the ends).
pub(crate) fn knot_derivative(ts: &[f64], ys: &[DVector<f64>], i: usize) -> DVector<f64> {
    let k = ts.len();
    if i == 0 {
        let h1 = ts[1] - ts[0];
        let h2 = ts[2] - ts[1];
        let c0 = -(2.0 * h1 + h2) / (h1 * (h1 + h2));
        let c1 = (h1 + h2) / (h1 * h2);
        let c2 = -h1 / (h2 * (h1 + h2));
        &ys[0] * c0 + &ys[1] * c1 + &ys[2] * c2
    } else if i == k - 1 {
        let h1 = ts[k - 2] - ts[k - 3];
        let h2 = ts[k - 1] - ts[k - 2];
        let c0 = h2 / (h1 * (h1 + h2));
        let c1 = -(h1 + h2) / (h1 * h2);
        let c2 = (h1 + 2.0 * h2) / (h2 * (h1 + h2));
        &ys[k - 3] * c0 + &ys[k - 2] * c1 + &ys[k - 1] * c2
    } else {
        let h1 = ts[i] - ts[i - 1];
        let h2 = ts[i + 1] - ts[i];
        let c0 = -h2 / (h1 * (h1 + h2));
        let c1 = (h2 - h1) / (h1 * h2);
        let c2 = h1 / (h2 * (h1 + h2));
        &ys[i - 1] * c0 + &ys[i] * c1 + &ys[i + 1] * c2
    }
}

/// Berwald report: the sampled deviation together with the scale used by the
/// declaration threshold.
#[derive(Debug, Clone)]
pub struct BerwaldReport {
    pub max_deviation: f64,
    pub chern_norm: f64,
    pub berwald: bool,
}

/// Threshold above which a sampled Chern-coefficient spread counts as
/// direction-dependent.
pub fn berwald_threshold(chern_norm: f64) -> f64 {
    1e-7 * (1.0 + chern_norm)
}

/// Max over sampled direction pairs of the max-norm Chern-coefficient
/// difference at x.
pub fn berwald_deviation(
    m: &dyn Spacetime,
    x: &DVector<f64>,
    sample_count: usize,
    seed: u64,
) -> Result<f64> {
    Ok(berwald_report(m, x, sample_count, seed)?.max_deviation)
}

pub fn berwald_report(
    m: &dyn Spacetime,
    x: &DVector<f64>,
    sample_count: usize,
    seed: u64,
) -> Result<BerwaldReport> {
    if sample_count < 2 {
        return Err(Error::BadConfig("berwald_deviation needs sample_count >= 2".into()));
    }
    let mut rng = rng::substream(seed, "berwald_dirs");
    let dirs = rng::cone_directions(&mut rng, m, x, sample_count)?;
    let n = m.dim();
    let mut lo = vec![f64::INFINITY; n * n * n];
    let mut hi = vec![f64::NEG_INFINITY; n * n * n];
    let mut chern_norm = 0.0_f64;
    for v in &dirs {
        let conn = connection_eval(m, x, v)?;
        chern_norm = chern_norm.max(conn.chern.inf_norm());
        let mut idx = 0;
        for i in 0..n {
            for j in 0..n {
                for k in 0..n {
                    let val = conn.chern.get(i, j, k);
                    lo[idx] = lo[idx].min(val);
                    hi[idx] = hi[idx].max(val);
                    idx += 1;
                }
            }
        }
    }
    let max_deviation = lo
        .iter()
        .zip(hi.iter())
        .fold(0.0_f64, |m, (a, b)| m.max(b - a));
    Ok(BerwaldReport {
        max_deviation,
        chern_norm,
        berwald: max_deviation <= berwald_threshold(chern_norm),
    })
}
