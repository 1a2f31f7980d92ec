//! Chart-local numerical Lorentz-Finsler geometry.
//!
//! Everything operates on a single coordinate chart: models expose a
//! 2-homogeneous Lagrangian L(x, v) through a derivative oracle, and the
//! layers above build the fundamental tensor, sprays and connections,
//! geodesics and boundary-value solvers, curvature, and finally an empirical
//! verification harness for the equivalence between nonnegative timelike flag
//! curvature, local concavity of the time separation, and convexity of
//! causal capsules.  A small discrete optimal-transport module checks the
//! companion statement that sqrt(variance) is convex along displacement
//! interpolation.

pub mod chart;
pub mod connection;
pub mod curvature;
pub mod deriv;
pub mod error;
pub mod fundamental;
pub mod geodesics;
pub mod models;
pub mod ode;
pub mod rng;
pub mod verify;

pub use chart::{ChartBox, ValidityCone};
pub use deriv::Deriv;
pub use error::{Error, Result};
pub use models::{build_model, eval_l, eval_partial, reverse_model, ModelConfig, Spacetime};
