//! Classical pseudo-Riemannian oracle for the quadratic zoo members.
//!
//! The metric components are written out here from scratch, Christoffel
//! symbols come from Richardson-extrapolated central differences of those
//! components, and the Riemann tensor from a second differentiation pass.
//! None of the crate's Finsler machinery (v-Hessians, sprays, nonlinear
//! connection) is involved, so agreement with the engine is a genuine
//! cross-check rather than the same formula evaluated twice.

use nalgebra::{DMatrix, DVector};

const FD_H: f64 = 1e-3;

#[derive(Clone, Copy)]
pub enum QuadOracle {
    Minkowski { n: usize },
    DeSitter { n: usize, radius: f64 },
    Conformal { n: usize, sign: f64 },
}

impl QuadOracle {
    /// Oracle for a quadratic zoo model under its default parameters.
    pub fn for_model(name: &str) -> Option<QuadOracle> {
        match name {
            "minkowski" => Some(QuadOracle::Minkowski { n: 2 }),
            "de_sitter" => Some(QuadOracle::DeSitter { n: 3, radius: 1.0 }),
            "product_hyperbolic" => Some(QuadOracle::Conformal { n: 3, sign: -1.0 }),
            "product_sphere" => Some(QuadOracle::Conformal { n: 3, sign: 1.0 }),
            _ => None,
        }
    }

    pub fn dim(&self) -> usize {
        match *self {
            QuadOracle::Minkowski { n }
            | QuadOracle::DeSitter { n, .. }
            | QuadOracle::Conformal { n, .. } => n,
        }
    }

    pub fn metric(&self, x: &DVector<f64>) -> DMatrix<f64> {
        let n = self.dim();
        let mut g = DMatrix::zeros(n, n);
        match *self {
            QuadOracle::Minkowski { .. } => {
                g[(0, 0)] = -1.0;
                for i in 1..n {
                    g[(i, i)] = 1.0;
                }
            }
            QuadOracle::DeSitter { radius, .. } => {
                let r2 = radius * radius;
                let s: f64 = (1..n).map(|i| x[i] * x[i]).sum();
                g[(0, 0)] = s / r2 - 1.0;
                for i in 1..n {
                    for j in 1..n {
                        g[(i, j)] = x[i] * x[j] / (r2 - s);
                        if i == j {
                            g[(i, j)] += 1.0;
                        }
                    }
                }
            }
            QuadOracle::Conformal { sign, .. } => {
                let s: f64 = (1..n).map(|i| x[i] * x[i]).sum();
                let phi = 2.0 / (1.0 + sign * s);
                g[(0, 0)] = -1.0;
                for i in 1..n {
                    g[(i, i)] = phi * phi;
                }
            }
        }
        g
    }

    /// d g / d x^a by central differences with one Richardson step.
    fn metric_deriv(&self, x: &DVector<f64>, a: usize) -> DMatrix<f64> {
        let step = |h: f64| {
            let mut xp = x.clone();
            let mut xm = x.clone();
            xp[a] += h;
            xm[a] -= h;
            (self.metric(&xp) - self.metric(&xm)) / (2.0 * h)
        };
        let coarse = step(FD_H);
        let fine = step(FD_H / 2.0);
        (fine * 4.0 - coarse) / 3.0
    }

    /// Christoffel symbols; entry i of the result is the matrix over (j, k).
    pub fn christoffel(&self, x: &DVector<f64>) -> Vec<DMatrix<f64>> {
        let n = self.dim();
        let g = self.metric(x);
        let ginv = g.clone().try_inverse().expect("oracle metric invertible");
        let dg: Vec<DMatrix<f64>> = (0..n).map(|a| self.metric_deriv(x, a)).collect();
        let mut out = vec![DMatrix::zeros(n, n); n];
        for i in 0..n {
            for j in 0..n {
                for k in 0..n {
                    let mut sum = 0.0;
                    for l in 0..n {
                        sum += ginv[(i, l)] * (dg[j][(l, k)] + dg[k][(j, l)] - dg[l][(j, k)]);
                    }
                    out[i][(j, k)] = 0.5 * sum;
                }
            }
        }
        out
    }

    fn christoffel_deriv(&self, x: &DVector<f64>, a: usize) -> Vec<DMatrix<f64>> {
        let n = self.dim();
        let step = |h: f64| {
            let mut xp = x.clone();
            let mut xm = x.clone();
            xp[a] += h;
            xm[a] -= h;
            let cp = self.christoffel(&xp);
            let cm = self.christoffel(&xm);
            (0..n).map(|i| (&cp[i] - &cm[i]) / (2.0 * h)).collect::<Vec<_>>()
        };
        let coarse = step(FD_H);
        let fine = step(FD_H / 2.0);
        (0..n).map(|i| (&fine[i] * 4.0 - &coarse[i]) / 3.0).collect()
    }

    /// Riemann tensor R^i_{jkl} = d_k Gamma^i_{lj} - d_l Gamma^i_{kj}
    /// + Gamma^i_{km} Gamma^m_{lj} - Gamma^i_{lm} Gamma^m_{kj},
    /// flattened as [i][j][k][l] row-major.
    pub fn riemann(&self, x: &DVector<f64>) -> Vec<f64> {
        let n = self.dim();
        let gamma = self.christoffel(x);
        let dgamma: Vec<Vec<DMatrix<f64>>> =
            (0..n).map(|a| self.christoffel_deriv(x, a)).collect();
        let mut r = vec![0.0; n * n * n * n];
        for i in 0..n {
            for j in 0..n {
                for k in 0..n {
                    for l in 0..n {
                        let mut val = dgamma[k][i][(l, j)] - dgamma[l][i][(k, j)];
                        for m in 0..n {
                            val += gamma[i][(k, m)] * gamma[m][(l, j)]
                                - gamma[i][(l, m)] * gamma[m][(k, j)];
                        }
                        r[((i * n + j) * n + k) * n + l] = val;
                    }
                }
            }
        }
        r
    }

    /// Jacobi operator w -> R(w, v)v contracted from the Riemann tensor.
    pub fn jacobi_operator(&self, x: &DVector<f64>, v: &DVector<f64>) -> DMatrix<f64> {
        let n = self.dim();
        let r = self.riemann(x);
        let mut op = DMatrix::zeros(n, n);
        for i in 0..n {
            for j in 0..n {
                let mut sum = 0.0;
                for k in 0..n {
                    for l in 0..n {
                        sum += r[((i * n + k) * n + j) * n + l] * v[k] * v[l];
                    }
                }
                op[(i, j)] = sum;
            }
        }
        op
    }

    /// Sectional curvature of the plane spanned by (v, w) with the same
    /// normalization the flag curvature uses: g(R(w,v)v, w) over
    /// g(v,v)g(w,w) - g(v,w)^2.
    pub fn sectional(&self, x: &DVector<f64>, v: &DVector<f64>, w: &DVector<f64>) -> f64 {
        let g = self.metric(x);
        let rv = self.jacobi_operator(x, v) * w;
        let inner = |a: &DVector<f64>, b: &DVector<f64>| (a.transpose() * &g * b)[(0, 0)];
        let den = inner(v, v) * inner(w, w) - inner(v, w).powi(2);
        inner(&rv, w) / den
    }
}

pub const QUADRATIC_NAMES: [&str; 4] =
    ["minkowski", "de_sitter", "product_hyperbolic", "product_sphere"];
