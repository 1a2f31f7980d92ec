//! Discrete optimal transport on finite-dimensional normed spaces.
//!
//! Measures are finite collections of weighted atoms.  Optimal couplings
//! are computed exactly: minimum-cost assignment for equal-size uniform
//! measures, transportation simplex otherwise.  Displacement interpolation
//! along an optimal coupling realizes the W2 geodesics, and the convexity
//! of sqrt-variance along such geodesics is checked on a parameter grid.

use serde::{Deserialize, Serialize};
use thiserror::Error as ThisError;

mod assignment;
mod simplex;
mod variance;
mod wasserstein;

pub use variance::variance;
pub use wasserstein::{
    check_sqrt_var_convexity, displacement, w2_distance, w2_geodesic, ConvexityReport, Coupling,
};

const WEIGHT_TOL: f64 = 1e-12;

#[derive(Debug, ThisError)]
pub enum Error {
    #[error("invalid measure: {0}")]
    BadMeasure(String),
    #[error("invalid ground space: {0}")]
    BadSpace(String),
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("invalid argument: {0}")]
    BadArgument(String),
}

pub type Result<T> = std::result::Result<T, Error>;

/// Norm on R^k.  Only strictly convex norms are admitted, so `P` requires
/// an exponent strictly between 1 and infinity.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum Norm {
    Euclidean,
    P(f64),
}

#[derive(Serialize, Deserialize)]
#[serde(untagged)]
enum NormRepr {
    Name(String),
    Exponent { p: f64 },
}

impl Serialize for Norm {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        match self {
            Norm::Euclidean => NormRepr::Name("euclidean".into()).serialize(s),
            Norm::P(p) => NormRepr::Exponent { p: *p }.serialize(s),
        }
    }
}

impl<'de> Deserialize<'de> for Norm {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        match NormRepr::deserialize(d)? {
            NormRepr::Name(s) if s == "euclidean" => Ok(Norm::Euclidean),
            NormRepr::Name(s) => Err(serde::de::Error::custom(format!("unknown norm {s:?}"))),
            NormRepr::Exponent { p } => Ok(Norm::P(p)),
        }
    }
}

#[derive(Clone, Copy, Debug, Serialize, Deserialize)]
pub struct GroundSpace {
    pub dim: usize,
    pub norm: Norm,
}

impl GroundSpace {
    pub fn new(dim: usize, norm: Norm) -> Result<Self> {
        let space = GroundSpace { dim, norm };
        space.check()?;
        Ok(space)
    }

    pub fn euclidean(dim: usize) -> Self {
        GroundSpace { dim, norm: Norm::Euclidean }
    }

    pub fn check(&self) -> Result<()> {
        if self.dim == 0 {
            return Err(Error::BadSpace("dimension must be at least 1".into()));
        }
        if let Norm::P(p) = self.norm {
            if !p.is_finite() || p <= 1.0 {
                return Err(Error::BadSpace(format!(
                    "p-norm exponent must lie in (1, inf), got {p}"
                )));
            }
        }
        Ok(())
    }

    pub fn distance(&self, x: &[f64], y: &[f64]) -> f64 {
        match self.norm {
            Norm::Euclidean => x
                .iter()
                .zip(y)
                .map(|(a, b)| (a - b) * (a - b))
                .sum::<f64>()
                .sqrt(),
            Norm::P(p) => x
                .iter()
                .zip(y)
                .map(|(a, b)| (a - b).abs().powf(p))
                .sum::<f64>()
                .powf(1.0 / p),
        }
    }
}

#[derive(Serialize, Deserialize)]
struct RawMeasure {
    atoms: Vec<Vec<f64>>,
    weights: Vec<f64>,
}

/// Finitely supported probability measure: atoms in R^k with nonnegative
/// weights summing to 1 within 1e-12.
#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(try_from = "RawMeasure", into = "RawMeasure")]
pub struct DiscreteMeasure {
    atoms: Vec<Vec<f64>>,
    weights: Vec<f64>,
}

impl TryFrom<RawMeasure> for DiscreteMeasure {
    type Error = Error;
    fn try_from(raw: RawMeasure) -> Result<Self> {
        DiscreteMeasure::new(raw.atoms, raw.weights)
    }
}

impl From<DiscreteMeasure> for RawMeasure {
    fn from(m: DiscreteMeasure) -> RawMeasure {
        RawMeasure { atoms: m.atoms, weights: m.weights }
    }
}

impl DiscreteMeasure {
    pub fn new(atoms: Vec<Vec<f64>>, weights: Vec<f64>) -> Result<Self> {
        if atoms.is_empty() {
            return Err(Error::BadMeasure("measure needs at least one atom".into()));
        }
        if atoms.len() != weights.len() {
            return Err(Error::BadMeasure(format!(
                "{} atoms but {} weights",
                atoms.len(),
                weights.len()
            )));
        }
        let dim = atoms[0].len();
        if dim == 0 {
            return Err(Error::BadMeasure("atoms must have positive dimension".into()));
        }
        for a in &atoms {
            if a.len() != dim {
                return Err(Error::BadMeasure("atoms of mixed dimension".into()));
            }
            if a.iter().any(|c| !c.is_finite()) {
                return Err(Error::BadMeasure("non-finite atom coordinate".into()));
            }
        }
        if weights.iter().any(|w| !w.is_finite() || *w < 0.0) {
            return Err(Error::BadMeasure("weights must be nonnegative".into()));
        }
        let total: f64 = weights.iter().sum();
        if (total - 1.0).abs() > WEIGHT_TOL {
            return Err(Error::BadMeasure(format!("weights sum to {total}, not 1")));
        }
        Ok(DiscreteMeasure { atoms, weights })
    }

    pub fn uniform(atoms: Vec<Vec<f64>>) -> Result<Self> {
        let n = atoms.len().max(1);
        let w = 1.0 / n as f64;
        DiscreteMeasure::new(atoms, vec![w; n])
    }

    pub fn dirac(atom: Vec<f64>) -> Result<Self> {
        DiscreteMeasure::new(vec![atom], vec![1.0])
    }

    pub fn atoms(&self) -> &[Vec<f64>] {
        &self.atoms
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn len(&self) -> usize {
        self.atoms.len()
    }

    pub fn is_empty(&self) -> bool {
        self.atoms.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.atoms[0].len()
    }

    /// True when every weight equals 1/n to within the weight tolerance.
    pub fn is_uniform(&self) -> bool {
        let w = 1.0 / self.len() as f64;
        self.weights.iter().all(|x| (x - w).abs() <= WEIGHT_TOL)
    }

    pub(crate) fn check_dim(&self, space: &GroundSpace) -> Result<()> {
        if self.dim() != space.dim {
            return Err(Error::DimensionMismatch { expected: space.dim, got: self.dim() });
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn measure_rejects_bad_weight_sum() {
        let err = DiscreteMeasure::new(vec![vec![0.0], vec![1.0]], vec![0.6, 0.6]);
        assert!(matches!(err, Err(Error::BadMeasure(_))));
    }

    #[test]
    fn measure_rejects_negative_weight() {
        let err = DiscreteMeasure::new(vec![vec![0.0], vec![1.0]], vec![1.5, -0.5]);
        assert!(matches!(err, Err(Error::BadMeasure(_))));
    }

    #[test]
    fn measure_rejects_mixed_dimensions() {
        let err = DiscreteMeasure::uniform(vec![vec![0.0, 1.0], vec![2.0]]);
        assert!(matches!(err, Err(Error::BadMeasure(_))));
    }

    #[test]
    fn space_rejects_degenerate_exponents() {
        assert!(GroundSpace::new(2, Norm::P(1.0)).is_err());
        assert!(GroundSpace::new(2, Norm::P(f64::INFINITY)).is_err());
        assert!(GroundSpace::new(2, Norm::P(3.0)).is_ok());
    }

    #[test]
    fn norm_serde_round_trip() {
        let s = GroundSpace { dim: 2, norm: Norm::Euclidean };
        let j = serde_json::to_string(&s).unwrap();
        assert_eq!(j, r#"{"dim":2,"norm":"euclidean"}"#);
        let back: GroundSpace = serde_json::from_str(&j).unwrap();
        assert_eq!(back.norm, Norm::Euclidean);

        let s = GroundSpace { dim: 3, norm: Norm::P(3.0) };
        let j = serde_json::to_string(&s).unwrap();
        let back: GroundSpace = serde_json::from_str(&j).unwrap();
        assert_eq!(back.norm, Norm::P(3.0));
    }

    #[test]
    fn p_norm_distance_matches_hand_value() {
        let s = GroundSpace::new(2, Norm::P(3.0)).unwrap();
        let d = s.distance(&[0.0, 0.0], &[1.0, 1.0]);
        assert!((d - 2.0_f64.powf(1.0 / 3.0)).abs() < 1e-14);
    }
}
