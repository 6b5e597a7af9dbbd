//! Scalar Gaussian kernels, their temporal derivatives, and the scalar factor
//! of separable / time-aligned operator-valued kernels.
//!
//! Every operator-valued kernel here is a scalar multiple of the `d x d`
//! identity, so only the scalar factor is ever evaluated or stored.

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum KernelError {
    #[error("dimension mismatch: {left} vs {right}")]
    DimensionMismatch { left: usize, right: usize },
    #[error("operation not supported for kernel family {0:?}")]
    UnsupportedFamily(KernelFamily),
    #[error("bandwidth must be positive and finite, got {0}")]
    InvalidBandwidth(f64),
    #[error("alpha must be nonnegative and finite, got {0}")]
    InvalidAlpha(f64),
    #[error("output dimension must be positive")]
    ZeroOutputDim,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
#[non_exhaustive]
pub enum KernelFamily {
    /// `exp(-|u - v|^2 / sigma^2)`
    Gaussian,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ScalarKernelSpec {
    pub family: KernelFamily,
    pub bandwidth: f64,
}

impl ScalarKernelSpec {
    pub fn gaussian(bandwidth: f64) -> Result<Self, KernelError> {
        if !(bandwidth > 0.0 && bandwidth.is_finite()) {
            return Err(KernelError::InvalidBandwidth(bandwidth));
        }
        Ok(Self {
            family: KernelFamily::Gaussian,
            bandwidth,
        })
    }

    /// Kernel value as a function of the squared distance.
    #[inline]
    pub fn eval_sq_dist(&self, sq: f64) -> f64 {
        match self.family {
            KernelFamily::Gaussian => (-sq / (self.bandwidth * self.bandwidth)).exp(),
        }
    }
}

/// Evaluates `k(u, v)`.
pub fn eval_scalar(spec: &ScalarKernelSpec, u: &[f64], v: &[f64]) -> Result<f64, KernelError> {
    if u.len() != v.len() {
        return Err(KernelError::DimensionMismatch {
            left: u.len(),
            right: v.len(),
        });
    }
    Ok(spec.eval_sq_dist(sq_dist(u, v)))
}

#[inline]
pub(crate) fn sq_dist(u: &[f64], v: &[f64]) -> f64 {
    u.iter().zip(v).map(|(a, b)| (a - b) * (a - b)).sum()
}

/// Closed-form temporal derivatives of the 1-D Gaussian `g(u) = exp(-u^2/s^2)`, `u = t - t'`.
#[derive(Clone, Copy, Debug)]
struct GaussianTemporal {
    u: f64,
    inv_s2: f64,
    value: f64,
}

impl GaussianTemporal {
    fn new(bandwidth: f64, t: f64, t_prime: f64) -> Self {
        let u = t - t_prime;
        let inv_s2 = 1.0 / (bandwidth * bandwidth);
        Self {
            u,
            inv_s2,
            value: (-u * u * inv_s2).exp(),
        }
    }

    /// d/dt g = -2u/s^2 g
    fn dt(&self) -> f64 {
        -2.0 * self.u * self.inv_s2 * self.value
    }

    /// d/dt d/dt' g = (2/s^2 - 4u^2/s^4) g
    fn dt_dtprime(&self) -> f64 {
        let a = self.inv_s2;
        (2.0 * a - 4.0 * self.u * self.u * a * a) * self.value
    }

    /// d/dt of `dt_dtprime`: (-12u/s^4 + 8u^3/s^6) g
    fn dt_dt_dtprime(&self) -> f64 {
        let a = self.inv_s2;
        let u = self.u;
        (-12.0 * u * a * a + 8.0 * u * u * u * a * a * a) * self.value
    }
}

/// Mixed derivative `d^2/(dt dt') k_t(t, t')` of the temporal kernel.
///
/// Positive at `t = t'` (value `2/sigma^2`), as required for the derivative
/// kernel to be positive definite.
pub fn eval_dt_dtprime(spec: &ScalarKernelSpec, t: f64, t_prime: f64) -> Result<f64, KernelError> {
    match spec.family {
        KernelFamily::Gaussian => Ok(GaussianTemporal::new(spec.bandwidth, t, t_prime).dt_dtprime()),
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum KernelMode {
    /// `k_x(x, x') k_t(t, t')`
    Separable,
    /// `k_x(x, x') [k_t(t, t') + alpha d_t d_t' k_t(t, t')]`
    TimeAligned,
}

impl KernelMode {
    pub fn as_str(&self) -> &'static str {
        match self {
            KernelMode::Separable => "separable",
            KernelMode::TimeAligned => "time-aligned",
        }
    }
}

impl std::str::FromStr for KernelMode {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "separable" => Ok(KernelMode::Separable),
            "time-aligned" | "time_aligned" => Ok(KernelMode::TimeAligned),
            other => Err(format!("unknown kernel mode `{other}`")),
        }
    }
}

/// A space-time sample location `(x, t)`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SpaceTimePoint {
    pub x: Vec<f64>,
    pub t: f64,
}

impl SpaceTimePoint {
    pub fn new(x: Vec<f64>, t: f64) -> Self {
        Self { x, t }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct OperatorKernelSpec {
    pub spatial: ScalarKernelSpec,
    pub temporal: ScalarKernelSpec,
    pub mode: KernelMode,
    /// Weight of the derivative term; ignored in separable mode.
    pub alpha: f64,
    pub output_dim: usize,
}

impl OperatorKernelSpec {
    pub fn separable(spatial: ScalarKernelSpec, temporal: ScalarKernelSpec, output_dim: usize) -> Self {
        Self {
            spatial,
            temporal,
            mode: KernelMode::Separable,
            alpha: 0.0,
            output_dim,
        }
    }

    pub fn time_aligned(
        spatial: ScalarKernelSpec,
        temporal: ScalarKernelSpec,
        alpha: f64,
        output_dim: usize,
    ) -> Self {
        Self {
            spatial,
            temporal,
            mode: KernelMode::TimeAligned,
            alpha,
            output_dim,
        }
    }

    pub fn validate(&self) -> Result<(), KernelError> {
        ScalarKernelSpec::gaussian(self.spatial.bandwidth)?;
        ScalarKernelSpec::gaussian(self.temporal.bandwidth)?;
        if self.mode == KernelMode::TimeAligned && !(self.alpha >= 0.0 && self.alpha.is_finite()) {
            return Err(KernelError::InvalidAlpha(self.alpha));
        }
        if self.output_dim == 0 {
            return Err(KernelError::ZeroOutputDim);
        }
        Ok(())
    }

    /// Temporal factor of the kernel for the configured mode.
    #[inline]
    fn temporal_factor(&self, t: f64, t_prime: f64) -> f64 {
        let g = GaussianTemporal::new(self.temporal.bandwidth, t, t_prime);
        match self.mode {
            KernelMode::Separable => g.value,
            KernelMode::TimeAligned => g.value + self.alpha * g.dt_dtprime(),
        }
    }

    #[inline]
    fn temporal_factor_dt(&self, t: f64, t_prime: f64) -> f64 {
        let g = GaussianTemporal::new(self.temporal.bandwidth, t, t_prime);
        match self.mode {
            KernelMode::Separable => g.dt(),
            KernelMode::TimeAligned => g.dt() + self.alpha * g.dt_dt_dtprime(),
        }
    }
}

/// Scalar factor of `K((x, t), (x', t'))`; the full kernel is this value times `I_d`.
pub fn eval_operator(
    spec: &OperatorKernelSpec,
    p: &SpaceTimePoint,
    q: &SpaceTimePoint,
) -> Result<f64, KernelError> {
    let kx = eval_scalar(&spec.spatial, &p.x, &q.x)?;
    Ok(kx * spec.temporal_factor(p.t, q.t))
}

/// Scalar factor of `d/dt K((x, t), (x', t'))`, derivative in the first time argument.
pub fn eval_dt_operator(
    spec: &OperatorKernelSpec,
    p: &SpaceTimePoint,
    q: &SpaceTimePoint,
) -> Result<f64, KernelError> {
    match spec.temporal.family {
        KernelFamily::Gaussian => {}
        #[allow(unreachable_patterns)]
        other => return Err(KernelError::UnsupportedFamily(other)),
    }
    let kx = eval_scalar(&spec.spatial, &p.x, &q.x)?;
    Ok(kx * spec.temporal_factor_dt(p.t, q.t))
}
