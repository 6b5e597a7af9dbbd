//! Operator-valued kernel ridge regression for space-time vector fields.
//!
//! With a kernel of the form `k(p, q) I_d`, the `dN x dN` block system
//! `(K + lambda I) c = y` is the Kronecker product of the scalar `N x N`
//! system with `I_d`. Fitting therefore solves `d` independent scalar
//! systems sharing one Cholesky factorization.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::kernels::{
    eval_dt_operator, eval_operator, KernelError, OperatorKernelSpec, ScalarKernelSpec, SpaceTimePoint,
};
use crate::linalg::{spd_solve_detailed, DenseMatrix, LinalgError, SPD_RESIDUAL_TOL};
use crate::sampling::PointCloud;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum OvkrError {
    #[error("training set is empty")]
    EmptyTrainingSet,
    #[error("{inputs} inputs but {targets} targets")]
    LengthMismatch { inputs: usize, targets: usize },
    #[error("target {index} has dimension {got}, expected {expected}")]
    TargetDimension {
        index: usize,
        expected: usize,
        got: usize,
    },
    #[error("spatial dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("regularization must be positive and finite, got {0}")]
    InvalidLambda(f64),
    #[error("non-finite value in training data")]
    NonFinite,
    #[error(transparent)]
    Kernel(#[from] KernelError),
    #[error(transparent)]
    Linalg(#[from] LinalgError),
}

/// Space-time inputs with `d`-dimensional targets.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrainingSet {
    inputs: Vec<SpaceTimePoint>,
    targets: Vec<Vec<f64>>,
    output_dim: usize,
}

impl TrainingSet {
    pub fn new(inputs: Vec<SpaceTimePoint>, targets: Vec<Vec<f64>>) -> Result<Self, OvkrError> {
        if inputs.is_empty() {
            return Err(OvkrError::EmptyTrainingSet);
        }
        if inputs.len() != targets.len() {
            return Err(OvkrError::LengthMismatch {
                inputs: inputs.len(),
                targets: targets.len(),
            });
        }
        let output_dim = targets[0].len();
        let spatial_dim = inputs[0].x.len();
        for (i, (p, y)) in inputs.iter().zip(&targets).enumerate() {
            if y.len() != output_dim || output_dim == 0 {
                return Err(OvkrError::TargetDimension {
                    index: i,
                    expected: output_dim.max(1),
                    got: y.len(),
                });
            }
            if p.x.len() != spatial_dim {
                return Err(OvkrError::DimensionMismatch {
                    expected: spatial_dim,
                    got: p.x.len(),
                });
            }
            if !p.t.is_finite() || p.x.iter().chain(y).any(|v| !v.is_finite()) {
                return Err(OvkrError::NonFinite);
            }
        }
        Ok(Self {
            inputs,
            targets,
            output_dim,
        })
    }

    pub fn len(&self) -> usize {
        self.inputs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.inputs.is_empty()
    }

    pub fn inputs(&self) -> &[SpaceTimePoint] {
        &self.inputs
    }

    pub fn targets(&self) -> &[Vec<f64>] {
        &self.targets
    }

    pub fn output_dim(&self) -> usize {
        self.output_dim
    }

    pub fn spatial_dim(&self) -> usize {
        self.inputs[0].x.len()
    }

    fn target_matrix(&self) -> DenseMatrix {
        DenseMatrix::from_fn(self.len(), self.output_dim, |i, j| self.targets[i][j])
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct RidgeConfig {
    pub lambda: f64,
    pub kernel: OperatorKernelSpec,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct FitDiagnostics {
    /// `||(K + (lambda + jitter) I) c - y||_max`.
    pub residual: f64,
    /// Diagonal jitter added by the solver on top of `lambda`.
    pub jitter: f64,
    /// Residual bound `1e-8 (1 + ||y||_max)` the fit is held to.
    pub tolerance: f64,
}

/// Representer expansion `f(x, t) = sum_i k((x, t), p_i) c_i`.
#[derive(Clone, Debug, PartialEq)]
pub struct FittedField {
    kernel: OperatorKernelSpec,
    centers: Vec<SpaceTimePoint>,
    coefficients: Vec<Vec<f64>>,
    lambda: f64,
    gram: DenseMatrix,
    diagnostics: FitDiagnostics,
}

/// Serializable form of a [`FittedField`]; the Gram matrix is rebuilt on load.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ModelFile {
    pub kernel: OperatorKernelSpec,
    pub centers: Vec<SpaceTimePoint>,
    pub coefficients: Vec<Vec<f64>>,
    pub lambda: f64,
    pub diagnostics: FitDiagnostics,
}

impl FittedField {
    pub fn kernel(&self) -> &OperatorKernelSpec {
        &self.kernel
    }

    pub fn centers(&self) -> &[SpaceTimePoint] {
        &self.centers
    }

    pub fn coefficients(&self) -> &[Vec<f64>] {
        &self.coefficients
    }

    pub fn lambda(&self) -> f64 {
        self.lambda
    }

    pub fn gram(&self) -> &DenseMatrix {
        &self.gram
    }

    pub fn diagnostics(&self) -> &FitDiagnostics {
        &self.diagnostics
    }

    pub fn output_dim(&self) -> usize {
        self.kernel.output_dim
    }

    pub fn to_model_file(&self) -> ModelFile {
        ModelFile {
            kernel: self.kernel,
            centers: self.centers.clone(),
            coefficients: self.coefficients.clone(),
            lambda: self.lambda,
            diagnostics: self.diagnostics,
        }
    }

    pub fn from_model_file(file: ModelFile) -> Result<Self, OvkrError> {
        file.kernel.validate()?;
        if file.centers.is_empty() {
            return Err(OvkrError::EmptyTrainingSet);
        }
        if file.centers.len() != file.coefficients.len() {
            return Err(OvkrError::LengthMismatch {
                inputs: file.centers.len(),
                targets: file.coefficients.len(),
            });
        }
        if let Some((i, c)) = file
            .coefficients
            .iter()
            .enumerate()
            .find(|(_, c)| c.len() != file.kernel.output_dim)
        {
            return Err(OvkrError::TargetDimension {
                index: i,
                expected: file.kernel.output_dim,
                got: c.len(),
            });
        }
        let gram = assemble_block_gram(&file.kernel, &file.centers)?;
        Ok(Self {
            kernel: file.kernel,
            centers: file.centers,
            coefficients: file.coefficients,
            lambda: file.lambda,
            gram,
            diagnostics: file.diagnostics,
        })
    }

    /// Recomputes `||(K + (lambda + jitter) I) c - y||_max` against the given data.
    pub fn recheck_residual(&self, data: &TrainingSet) -> f64 {
        let shift = self.lambda + self.diagnostics.jitter;
        let mut worst: f64 = 0.0;
        for (i, y) in data.targets().iter().enumerate() {
            for (d, &yd) in y.iter().enumerate() {
                let kc: f64 = self
                    .gram
                    .row(i)
                    .iter()
                    .zip(&self.coefficients)
                    .map(|(k, c)| k * c[d])
                    .sum();
                worst = worst.max((kc + shift * self.coefficients[i][d] - yd).abs());
            }
        }
        worst
    }
}

/// Scalar `N x N` Gram matrix; the block Gram is its Kronecker product with `I_d`.
pub fn assemble_block_gram(
    kernel: &OperatorKernelSpec,
    points: &[SpaceTimePoint],
) -> Result<DenseMatrix, OvkrError> {
    let n = points.len();
    let rows: Vec<Vec<f64>> = (0..n)
        .into_par_iter()
        .map(|i| {
            (0..n)
                .map(|j| {
                    // evaluate the upper triangle only and mirror, so K is exactly symmetric
                    let (a, b) = if i <= j { (i, j) } else { (j, i) };
                    eval_operator(kernel, &points[a], &points[b])
                })
                .collect::<Result<Vec<f64>, _>>()
        })
        .collect::<Result<_, _>>()?;
    Ok(DenseMatrix::new(n, n, rows.concat())?)
}

/// Solves `(K + lambda I) c = y`, one scalar system per output component.
pub fn fit(data: &TrainingSet, cfg: &RidgeConfig) -> Result<FittedField, OvkrError> {
    if !(cfg.lambda > 0.0 && cfg.lambda.is_finite()) {
        return Err(OvkrError::InvalidLambda(cfg.lambda));
    }
    fit_with_shift(data, &cfg.kernel, cfg.lambda)
}

fn fit_with_shift(
    data: &TrainingSet,
    kernel: &OperatorKernelSpec,
    lambda: f64,
) -> Result<FittedField, OvkrError> {
    kernel.validate()?;
    if kernel.output_dim != data.output_dim() {
        return Err(OvkrError::TargetDimension {
            index: 0,
            expected: kernel.output_dim,
            got: data.output_dim(),
        });
    }
    let gram = assemble_block_gram(kernel, data.inputs())?;
    let y = data.target_matrix();
    let sol = spd_solve_detailed(&gram.add_diagonal(lambda), &y)?;
    let coefficients = (0..data.len()).map(|i| sol.solution.row(i).to_vec()).collect();
    Ok(FittedField {
        kernel: *kernel,
        centers: data.inputs().to_vec(),
        coefficients,
        lambda,
        gram,
        diagnostics: FitDiagnostics {
            residual: sol.residual,
            jitter: sol.jitter,
            tolerance: SPD_RESIDUAL_TOL * (1.0 + y.max_abs()),
        },
    })
}

fn check_query(model: &FittedField, x: &[f64]) -> Result<(), OvkrError> {
    let expected = model.centers[0].x.len();
    if x.len() != expected {
        return Err(OvkrError::DimensionMismatch {
            expected,
            got: x.len(),
        });
    }
    Ok(())
}

fn expand(
    model: &FittedField,
    query: &SpaceTimePoint,
    kernel_fn: fn(&OperatorKernelSpec, &SpaceTimePoint, &SpaceTimePoint) -> Result<f64, KernelError>,
) -> Result<Vec<f64>, OvkrError> {
    let mut out = vec![0.0; model.output_dim()];
    for (center, c) in model.centers.iter().zip(&model.coefficients) {
        let k = kernel_fn(&model.kernel, query, center)?;
        for (o, ci) in out.iter_mut().zip(c) {
            *o += k * ci;
        }
    }
    Ok(out)
}

/// Evaluates the fitted field at `(x, t)`.
pub fn predict(model: &FittedField, x: &[f64], t: f64) -> Result<Vec<f64>, OvkrError> {
    check_query(model, x)?;
    expand(model, &SpaceTimePoint::new(x.to_vec(), t), eval_operator)
}

/// Time derivative of the fitted field at `(x, t)`, from closed-form kernel derivatives.
pub fn predict_dt(model: &FittedField, x: &[f64], t: f64) -> Result<Vec<f64>, OvkrError> {
    check_query(model, x)?;
    expand(model, &SpaceTimePoint::new(x.to_vec(), t), eval_dt_operator)
}

/// `sum_d c_d^T K c_d`, the squared RKHS norm of the fitted field.
pub fn rkhs_norm_sq(model: &FittedField) -> f64 {
    quadratic_form(&model.gram, &model.coefficients)
}

fn quadratic_form(gram: &DenseMatrix, coefficients: &[Vec<f64>]) -> f64 {
    let d = coefficients.first().map_or(0, Vec::len);
    (0..d)
        .map(|dim| {
            (0..gram.rows())
                .map(|i| {
                    let kc: f64 = gram
                        .row(i)
                        .iter()
                        .zip(coefficients)
                        .map(|(k, c)| k * c[dim])
                        .sum();
                    coefficients[i][dim] * kc
                })
                .sum::<f64>()
        })
        .sum()
}

/// `J(c) = sum_i ||(K c)_i - y_i||^2 + lambda c^T K c` for arbitrary coefficients
/// on the model's centers.
pub fn regularized_objective(model: &FittedField, data: &TrainingSet, coefficients: &[Vec<f64>]) -> f64 {
    let fit_term: f64 = data
        .targets()
        .iter()
        .enumerate()
        .map(|(i, y)| {
            y.iter()
                .enumerate()
                .map(|(d, &yd)| {
                    let kc: f64 = model
                        .gram
                        .row(i)
                        .iter()
                        .zip(coefficients)
                        .map(|(k, c)| k * c[d])
                        .sum();
                    (kc - yd) * (kc - yd)
                })
                .sum::<f64>()
        })
        .sum();
    fit_term + model.lambda * quadratic_form(&model.gram, coefficients)
}

/// Per-time-slice kernel interpolants on a fixed spatial node set.
#[derive(Clone, Debug)]
pub struct SliceInterpolants {
    nodes: PointCloud,
    kernel: ScalarKernelSpec,
    /// One `N x d` coefficient matrix per slice.
    coefficients: Vec<DenseMatrix>,
    jitter: f64,
}

impl SliceInterpolants {
    pub fn slices(&self) -> usize {
        self.coefficients.len()
    }

    pub fn coefficients(&self, slice: usize) -> &DenseMatrix {
        &self.coefficients[slice]
    }

    pub fn jitter(&self) -> f64 {
        self.jitter
    }

    pub fn nodes(&self) -> &PointCloud {
        &self.nodes
    }

    /// Evaluates the interpolant of `slice` at spatial point `x`.
    pub fn eval(&self, slice: usize, x: &[f64]) -> Result<Vec<f64>, OvkrError> {
        if x.len() != self.nodes.dim {
            return Err(OvkrError::DimensionMismatch {
                expected: self.nodes.dim,
                got: x.len(),
            });
        }
        let coef = &self.coefficients[slice];
        let mut out = vec![0.0; coef.cols()];
        for (i, node) in self.nodes.points.iter().enumerate() {
            let k = crate::kernels::eval_scalar(&self.kernel, x, node)?;
            for (o, c) in out.iter_mut().zip(coef.row(i)) {
                *o += k * c;
            }
        }
        Ok(out)
    }
}

/// Interpolates each time slice `F(., t)` sampled at `nodes` by solving `K alpha(t) = F_X(t)`.
///
/// Each slice is an `N x d` matrix of nodal values. All slices share one
/// factorization; the solver's jitter is the only regularization.
pub fn interpolate_slices(
    nodes: &PointCloud,
    field_samples: &[DenseMatrix],
    kernel: &ScalarKernelSpec,
) -> Result<SliceInterpolants, OvkrError> {
    if nodes.is_empty() {
        return Err(OvkrError::EmptyTrainingSet);
    }
    let n = nodes.len();
    let d = field_samples.first().map_or(1, DenseMatrix::cols);
    for s in field_samples {
        if s.rows() != n || s.cols() != d {
            return Err(OvkrError::LengthMismatch {
                inputs: n,
                targets: s.rows(),
            });
        }
    }
    let gram = DenseMatrix::from_fn(n, n, |i, j| {
        let (a, b) = if i <= j { (i, j) } else { (j, i) };
        kernel.eval_sq_dist(crate::kernels::sq_dist(&nodes.points[a], &nodes.points[b]))
    });
    let total_cols = d * field_samples.len();
    let rhs = DenseMatrix::from_fn(n, total_cols, |i, j| field_samples[j / d].get(i, j % d));
    let sol = spd_solve_detailed(&gram, &rhs)?;
    let coefficients = (0..field_samples.len())
        .map(|s| DenseMatrix::from_fn(n, d, |i, j| sol.solution.get(i, s * d + j)))
        .collect();
    Ok(SliceInterpolants {
        nodes: nodes.clone(),
        kernel: *kernel,
        coefficients,
        jitter: sol.jitter,
    })
}
