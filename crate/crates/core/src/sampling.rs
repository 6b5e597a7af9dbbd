//! Point generation, fill distance, the analytic test field, and RK4 flow of
//! the circle map `x' = sin(2 pi x)`.

use std::f64::consts::PI;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::kernels::sq_dist;

/// Integration step used when generating trajectory pairs.
pub const DEFAULT_FLOW_STEP: f64 = 1e-3;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SamplingError {
    #[error("point cloud is empty")]
    EmptyCloud,
    #[error("grid resolution must be at least 2, got {0}")]
    GridTooCoarse(usize),
    #[error("integration step must be positive, got {0}")]
    NonpositiveStep(f64),
    #[error("duration must be nonnegative and finite, got {0}")]
    InvalidDuration(f64),
    #[error("need at least {needed} points, got {got}")]
    TooFewPoints { needed: usize, got: usize },
    #[error("point {index} has dimension {got}, expected {expected}")]
    DimensionMismatch {
        index: usize,
        expected: usize,
        got: usize,
    },
    #[error("coordinate outside [0, 1] in point {0}")]
    OutOfDomain(usize),
}

/// Points in the unit cube `[0, 1]^dim`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PointCloud {
    pub dim: usize,
    pub points: Vec<Vec<f64>>,
    pub seed: u64,
}

impl PointCloud {
    pub fn new(dim: usize, points: Vec<Vec<f64>>, seed: u64) -> Result<Self, SamplingError> {
        for (i, p) in points.iter().enumerate() {
            if p.len() != dim {
                return Err(SamplingError::DimensionMismatch {
                    index: i,
                    expected: dim,
                    got: p.len(),
                });
            }
            if p.iter().any(|c| !(0.0..=1.0).contains(c)) {
                return Err(SamplingError::OutOfDomain(i));
            }
        }
        Ok(Self { dim, points, seed })
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }
}

const PRIMES: [u64; 16] = [2, 3, 5, 7, 11, 13, 17, 19, 23, 29, 31, 37, 41, 43, 47, 53];

fn nth_prime(k: usize) -> u64 {
    if k < PRIMES.len() {
        return PRIMES[k];
    }
    let mut count = PRIMES.len() - 1;
    let mut candidate = PRIMES[PRIMES.len() - 1];
    while count < k {
        candidate += 2;
        if (3..).step_by(2).take_while(|d| d * d <= candidate).all(|d| !candidate.is_multiple_of(d)) {
            count += 1;
        }
    }
    candidate
}

/// Van der Corput radical inverse of `index` in `base`.
pub fn radical_inverse(mut index: u64, base: u64) -> f64 {
    let inv_base = 1.0 / base as f64;
    let mut scale = inv_base;
    let mut out = 0.0;
    while index > 0 {
        out += (index % base) as f64 * scale;
        index /= base;
        scale *= inv_base;
    }
    out
}

/// First `n` Halton points in `dim` dimensions, starting at sequence index `seed + 1`.
///
/// Index 0 (the origin) is always skipped, so `seed = 0` yields the classic
/// sequence `0.5, 0.25, 0.75, ...` in the first coordinate.
pub fn halton_points(n: usize, dim: usize, seed: u64) -> PointCloud {
    let bases: Vec<u64> = (0..dim).map(nth_prime).collect();
    let points = (0..n as u64)
        .map(|i| {
            let index = seed + i + 1;
            bases.iter().map(|&b| radical_inverse(index, b)).collect()
        })
        .collect();
    PointCloud { dim, points, seed }
}

/// `n` iid uniform points in `[0, 1)^dim` from a ChaCha8 stream seeded with `seed`.
pub fn uniform_points(n: usize, dim: usize, seed: u64) -> PointCloud {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let points = (0..n)
        .map(|_| (0..dim).map(|_| rng.random::<f64>()).collect())
        .collect();
    PointCloud { dim, points, seed }
}

/// Lower bound on the fill distance: the largest distance from a node of the
/// uniform `grid_resolution^dim` tensor grid on `[0, 1]^dim` to its nearest cloud point.
pub fn fill_distance(cloud: &PointCloud, grid_resolution: usize) -> Result<f64, SamplingError> {
    if cloud.is_empty() {
        return Err(SamplingError::EmptyCloud);
    }
    if grid_resolution < 2 {
        return Err(SamplingError::GridTooCoarse(grid_resolution));
    }
    let dim = cloud.dim;
    let total = grid_resolution.pow(dim as u32);
    let step = 1.0 / (grid_resolution - 1) as f64;
    let flat: Vec<f64> = cloud.points.concat();

    let worst = (0..total)
        .into_par_iter()
        .map_init(
            || vec![0.0; dim],
            |node, mut idx| {
                for c in node.iter_mut() {
                    *c = (idx % grid_resolution) as f64 * step;
                    idx /= grid_resolution;
                }
                flat.chunks_exact(dim)
                    .map(|p| sq_dist(node, p))
                    .fold(f64::INFINITY, f64::min)
            },
        )
        .reduce(|| 0.0, f64::max);
    Ok(worst.sqrt())
}

/// `F(x, t) = [sin(pi x) cos(pi t), cos(pi x) sin(pi t)]`.
pub fn eval_test_field(x: f64, t: f64) -> [f64; 2] {
    [(PI * x).sin() * (PI * t).cos(), (PI * x).cos() * (PI * t).sin()]
}

#[inline]
fn drift(x: f64) -> f64 {
    (2.0 * PI * x).sin()
}

fn wrap_unit(x: f64) -> f64 {
    let w = x.rem_euclid(1.0);
    // rem_euclid can round up to exactly 1.0 for tiny negative inputs
    if w >= 1.0 {
        0.0
    } else {
        w
    }
}

/// Classical RK4 for `x' = sin(2 pi x)` over `duration`, wrapped to `[0, 1)`.
///
/// The interval is split into `ceil(duration / step)` equal substeps, so the
/// effective step never exceeds `step`.
pub fn flow_rk4(x0: f64, duration: f64, step: f64) -> Result<f64, SamplingError> {
    if !(step > 0.0 && step.is_finite()) {
        return Err(SamplingError::NonpositiveStep(step));
    }
    if !(duration >= 0.0 && duration.is_finite()) {
        return Err(SamplingError::InvalidDuration(duration));
    }
    if duration == 0.0 {
        return Ok(wrap_unit(x0));
    }
    let substeps = (duration / step).ceil().max(1.0) as usize;
    let h = duration / substeps as f64;
    let mut x = x0;
    for _ in 0..substeps {
        let k1 = drift(x);
        let k2 = drift(x + 0.5 * h * k1);
        let k3 = drift(x + 0.5 * h * k2);
        let k4 = drift(x + h * k3);
        x += h / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
    }
    Ok(wrap_unit(x))
}

/// Snapshot pairs `(x_i, Phi_dt(x_i))`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrajectoryPairs {
    pub states: Vec<f64>,
    pub advanced: Vec<f64>,
    pub dt: f64,
}

impl TrajectoryPairs {
    pub fn new(states: Vec<f64>, advanced: Vec<f64>, dt: f64) -> Result<Self, SamplingError> {
        if states.len() != advanced.len() {
            return Err(SamplingError::TooFewPoints {
                needed: states.len(),
                got: advanced.len(),
            });
        }
        if !(dt > 0.0 && dt.is_finite()) {
            return Err(SamplingError::NonpositiveStep(dt));
        }
        Ok(Self { states, advanced, dt })
    }

    pub fn len(&self) -> usize {
        self.states.len()
    }

    pub fn is_empty(&self) -> bool {
        self.states.is_empty()
    }
}

/// Halton states in `[0, 1]` advanced by `dt` with [`flow_rk4`].
pub fn make_trajectory_pairs(n: usize, dt: f64, seed: u64) -> Result<TrajectoryPairs, SamplingError> {
    if n < 2 {
        return Err(SamplingError::TooFewPoints { needed: 2, got: n });
    }
    if !(dt > 0.0 && dt.is_finite()) {
        return Err(SamplingError::NonpositiveStep(dt));
    }
    let states: Vec<f64> = halton_points(n, 1, seed).points.into_iter().map(|p| p[0]).collect();
    let advanced = states
        .par_iter()
        .map(|&x| flow_rk4(x, dt, DEFAULT_FLOW_STEP))
        .collect::<Result<Vec<_>, _>>()?;
    TrajectoryPairs::new(states, advanced, dt)
}
