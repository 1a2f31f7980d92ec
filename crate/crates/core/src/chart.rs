use nalgebra::DVector;
use serde::{Deserialize, Serialize};

/// Axis-aligned coordinate box on which a model's chart is declared valid.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChartBox {
    pub min: Vec<f64>,
    pub max: Vec<f64>,
}

impl ChartBox {
    pub fn new(min: Vec<f64>, max: Vec<f64>) -> Self {
        assert_eq!(min.len(), max.len());
        ChartBox { min, max }
    }

    /// Symmetric box [-h_i, h_i] per axis.
    pub fn symmetric(half_widths: &[f64]) -> Self {
        ChartBox {
            min: half_widths.iter().map(|h| -h).collect(),
            max: half_widths.to_vec(),
        }
    }

    pub fn dim(&self) -> usize {
        self.min.len()
    }

    pub fn contains(&self, x: &DVector<f64>) -> bool {
        x.len() == self.dim()
            && x.iter()
                .zip(self.min.iter().zip(self.max.iter()))
                .all(|(&xi, (&lo, &hi))| xi >= lo && xi <= hi)
    }

    /// Box grown by `frac` of each half-width; used for solver-internal slack.
    pub fn inflated(&self, frac: f64) -> ChartBox {
        let mut out = self.clone();
        for i in 0..self.dim() {
            let slack = 0.5 * frac * (self.max[i] - self.min[i]);
            out.min[i] -= slack;
            out.max[i] += slack;
        }
        out
    }

    /// Box shrunk toward the center by `frac` of each half-width.
    pub fn shrunk(&self, frac: f64) -> ChartBox {
        self.inflated(-frac)
    }

    pub fn center(&self) -> DVector<f64> {
        DVector::from_iterator(
            self.dim(),
            self.min.iter().zip(self.max.iter()).map(|(a, b)| 0.5 * (a + b)),
        )
    }
}

/// Coordinate cone {v : (v^0)^2 > c |v-hat|^2} on which a non-quadratic model
/// certifies smoothness and signature.  Symmetric under v -> -v.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ValidityCone {
    pub c: f64,
}

pub const DEFAULT_CONE_C: f64 = 4.0;

impl ValidityCone {
    pub fn contains(&self, v: &DVector<f64>) -> bool {
        let spatial: f64 = v.iter().skip(1).map(|a| a * a).sum();
        v[0] * v[0] > self.c * spatial
    }
}
