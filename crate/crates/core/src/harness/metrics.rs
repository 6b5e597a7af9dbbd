use std::num::NonZeroUsize;

use gauss_quad::GaussLegendre;
use rayon::prelude::*;
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum MetricError {
    #[error("need at least 2 points, got {0}")]
    TooFewPoints(usize),
    #[error("{counts} counts but {errors} errors")]
    LengthMismatch { counts: usize, errors: usize },
    #[error("value {value} at index {index} is not positive")]
    NonpositiveValue { index: usize, value: f64 },
    #[error("quadrature resolution must be at least 8, got {0}")]
    QuadratureTooCoarse(usize),
    #[error("fields return different output dimensions")]
    OutputDimension,
}

/// Gauss-Legendre nodes and weights on `[0, 1]`.
pub fn unit_gauss_legendre(resolution: usize) -> Vec<(f64, f64)> {
    let degree = NonZeroUsize::new(resolution).expect("resolution must be positive");
    GaussLegendre::new(degree)
        .as_node_weight_pairs()
        .iter()
        .map(|&(x, w)| (0.5 * (x + 1.0), 0.5 * w))
        .collect()
}

/// `(int_0^1 int_0^1 ||f(x, t) - g(x, t)||^2 dx dt)^(1/2)` on a tensor Gauss-Legendre grid.
pub fn l2_error_quadrature<F, G, V, W>(f: F, g: G, resolution: usize) -> Result<f64, MetricError>
where
    F: Fn(f64, f64) -> V + Sync,
    G: Fn(f64, f64) -> W + Sync,
    V: AsRef<[f64]>,
    W: AsRef<[f64]>,
{
    if resolution < 8 {
        return Err(MetricError::QuadratureTooCoarse(resolution));
    }
    let rule = unit_gauss_legendre(resolution);
    // per-row sums are combined in a fixed order so the result is reproducible
    let rows: Vec<Result<f64, MetricError>> = rule
        .par_iter()
        .map(|&(x, wx)| {
            let mut acc = 0.0;
            for &(t, wt) in &rule {
                let (a, b) = (f(x, t), g(x, t));
                let (a, b) = (a.as_ref(), b.as_ref());
                if a.len() != b.len() {
                    return Err(MetricError::OutputDimension);
                }
                let sq: f64 = a.iter().zip(b).map(|(u, v)| (u - v) * (u - v)).sum();
                acc += wt * sq;
            }
            Ok(wx * acc)
        })
        .collect();
    let mut total = 0.0;
    for r in rows {
        total += r?;
    }
    Ok(total.sqrt())
}

/// Least-squares slope of `log(err)` against `log(n)`.
pub fn loglog_slope(ns: &[f64], errs: &[f64]) -> Result<f64, MetricError> {
    if ns.len() != errs.len() {
        return Err(MetricError::LengthMismatch {
            counts: ns.len(),
            errors: errs.len(),
        });
    }
    if ns.len() < 2 {
        return Err(MetricError::TooFewPoints(ns.len()));
    }
    for (index, &value) in ns.iter().chain(errs).enumerate() {
        if !(value > 0.0 && value.is_finite()) {
            return Err(MetricError::NonpositiveValue {
                index: index % ns.len(),
                value,
            });
        }
    }
    let xs: Vec<f64> = ns.iter().map(|v| v.ln()).collect();
    let ys: Vec<f64> = errs.iter().map(|v| v.ln()).collect();
    let m = xs.len() as f64;
    let (mx, my) = (xs.iter().sum::<f64>() / m, ys.iter().sum::<f64>() / m);
    let sxy: f64 = xs.iter().zip(&ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let sxx: f64 = xs.iter().map(|x| (x - mx) * (x - mx)).sum();
    if sxx == 0.0 {
        return Err(MetricError::TooFewPoints(1));
    }
    Ok(sxy / sxx)
}

/// Root of the mean over rows of the squared row-wise Euclidean difference.
pub fn center_rms(a: &[Vec<f64>], b: &[Vec<f64>]) -> f64 {
    let total: f64 = a
        .iter()
        .zip(b)
        .map(|(u, v)| u.iter().zip(v).map(|(p, q)| (p - q) * (p - q)).sum::<f64>())
        .sum();
    (total / a.len().max(1) as f64).sqrt()
}

pub fn max_abs_diff(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max)
}
