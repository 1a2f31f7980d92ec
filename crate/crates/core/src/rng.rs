//! Deterministic RNG substreams and geometry-aware samplers.
//!
//! Every randomized routine takes (seed, label) and derives an independent
//! ChaCha8 stream, so adding a sampler or reordering calls never perturbs
//! other streams.

use nalgebra::DVector;
use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::chart::ChartBox;
use crate::error::{Error, Result};
use crate::fundamental::{metric_at, MetricAtV};
use crate::models::{eval_l, Spacetime};

fn fnv1a(label: &str) -> u64 {
    let mut h: u64 = 0xcbf2_9ce4_8422_2325;
    for b in label.bytes() {
        h ^= b as u64;
        h = h.wrapping_mul(0x0000_0100_0000_01b3);
    }
    h
}

/// Independent substream for (seed, label).
pub fn substream(seed: u64, label: &str) -> ChaCha8Rng {
    let mut key = [0u8; 32];
    key[..8].copy_from_slice(&seed.to_le_bytes());
    key[8..16].copy_from_slice(&fnv1a(label).to_le_bytes());
    ChaCha8Rng::from_seed(key)
}

/// Uniform point in a chart box.
pub fn point_in_box(rng: &mut ChaCha8Rng, chart: &ChartBox) -> DVector<f64> {
    DVector::from_iterator(
        chart.dim(),
        chart
            .min
            .iter()
            .zip(chart.max.iter())
            .map(|(lo, hi)| rng.gen_range(*lo..*hi)),
    )
}

/// Uniform direction on the Euclidean unit sphere.
pub fn sphere_dir(rng: &mut ChaCha8Rng, n: usize) -> DVector<f64> {
    loop {
        let v = DVector::from_iterator(n, (0..n).map(|_| standard_normal(rng)));
        let norm = v.norm();
        if norm > 1e-6 {
            return v / norm;
        }
    }
}

fn standard_normal(rng: &mut ChaCha8Rng) -> f64 {
    // Box-Muller; one draw per call keeps streams simple to reason about.
    let u1: f64 = rng.gen_range(f64::EPSILON..1.0);
    let u2: f64 = rng.gen_range(0.0..1.0);
    (-2.0 * u1.ln()).sqrt() * (std::f64::consts::TAU * u2).cos()
}

const SAMPLE_CAP: usize = 10_000;

/// Future-directed timelike direction at x, inside the validity cone when the
/// model declares one, normalized to g_v(v, v) = -1.
pub fn future_timelike(
    rng: &mut ChaCha8Rng,
    m: &dyn Spacetime,
    x: &DVector<f64>,
) -> Result<DVector<f64>> {
    let n = m.dim();
    for _ in 0..SAMPLE_CAP {
        let mut v = sphere_dir(rng, n);
        if v[0] < 0.0 {
            v = -v;
        }
        if let Some(cone) = m.cone() {
            if !cone.contains(&v) {
                continue;
            }
        }
        let l = match eval_l(m, x, &v) {
            Ok(l) => l,
            Err(_) => continue,
        };
        if l < -1e-8 {
            return Ok(v / (-2.0 * l).sqrt());
        }
    }
    Err(Error::SamplingExhausted { draws: SAMPLE_CAP, found: 0 })
}

/// A g_v-unit vector w with g_v(v, w) = 0, spanning a nondegenerate flag
/// with timelike v.  Orthogonality makes the flag denominator -g_v(w, w).
pub fn flag_complement(
    rng: &mut ChaCha8Rng,
    g: &MetricAtV,
    v: &DVector<f64>,
) -> Result<DVector<f64>> {
    let n = v.len();
    let gvv = g.inner(v, v);
    for _ in 0..SAMPLE_CAP {
        let w0 = sphere_dir(rng, n);
        let w = &w0 - v * (g.inner(v, &w0) / gvv);
        let ww = g.inner(&w, &w);
        if ww > 1e-6 {
            return Ok(w / ww.sqrt());
        }
    }
    Err(Error::SamplingExhausted { draws: SAMPLE_CAP, found: 0 })
}

/// Convenience: sample x in the chart interior and a timelike v there.
pub fn point_and_timelike(
    rng: &mut ChaCha8Rng,
    m: &dyn Spacetime,
    margin: f64,
) -> Result<(DVector<f64>, DVector<f64>)> {
    let chart = m.chart().shrunk(margin);
    let x = point_in_box(rng, &chart);
    let v = future_timelike(rng, m, &x)?;
    Ok((x, v))
}

/// Sampler used by the Berwald detector: directions on the unit g_X-sphere
/// intersected with the validity cone, future side.
pub fn cone_directions(
    rng: &mut ChaCha8Rng,
    m: &dyn Spacetime,
    x: &DVector<f64>,
    count: usize,
) -> Result<Vec<DVector<f64>>> {
    let _ = metric_at(m, x, &m.orientation(x))?;
    (0..count).map(|_| future_timelike(rng, m, x)).collect()
}
