//! Kernel Koopman operator estimated from snapshot pairs `(x_i, Phi_dt(x_i))`.
//!
//! An observable `g = sum_j a_j k(., x_j)` composed with the flow has values
//! `sum_j a_j k(Phi(x_i), x_j)` at the centers, so with
//! `G'_ij = k(Phi(x_i), x_j)` the coefficient-space operator is `K_N = G^+ G'`.
//! Eigenvectors `v_k` of `K_N` give eigenfunction samples `phi_k = G v_k`.

use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::kernels::ScalarKernelSpec;
use crate::linalg::{eig_general, truncated_pinv, DenseMatrix, LinalgError, SpectralDecomposition};
use crate::sampling::TrajectoryPairs;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum KoopmanError {
    #[error("need at least 2 snapshot pairs, got {0}")]
    TooFewPairs(usize),
    #[error("pseudoinverse tolerance {0} outside (0, 1)")]
    InvalidTolerance(f64),
    #[error("expected {expected} samples, got {got}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("rank {rank} outside 1..={max}")]
    RankOutOfRange { rank: usize, max: usize },
    #[error(transparent)]
    Linalg(#[from] LinalgError),
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct KoopmanModel {
    centers: Vec<f64>,
    kernel: ScalarKernelSpec,
    gram: DenseMatrix,
    advanced_gram: DenseMatrix,
    gram_pinv: DenseMatrix,
    operator: DenseMatrix,
    spectrum: SpectralDecomposition,
    dt: f64,
    pinv_tol: f64,
}

impl KoopmanModel {
    pub fn centers(&self) -> &[f64] {
        &self.centers
    }

    pub fn kernel(&self) -> &ScalarKernelSpec {
        &self.kernel
    }

    pub fn gram(&self) -> &DenseMatrix {
        &self.gram
    }

    pub fn advanced_gram(&self) -> &DenseMatrix {
        &self.advanced_gram
    }

    /// `K_N = G^+ G'`.
    pub fn operator(&self) -> &DenseMatrix {
        &self.operator
    }

    pub fn spectrum(&self) -> &SpectralDecomposition {
        &self.spectrum
    }

    pub fn dt(&self) -> f64 {
        self.dt
    }

    pub fn pinv_tol(&self) -> f64 {
        self.pinv_tol
    }

    pub fn dim(&self) -> usize {
        self.centers.len()
    }

    /// Orthogonal projection `G G^+ g` of center samples onto `range(G)`.
    pub fn project(&self, g: &[f64]) -> Result<Vec<f64>, KoopmanError> {
        self.check_len(g.len())?;
        let a = self.gram_pinv.matvec(g)?;
        Ok(self.gram.matvec(&a)?)
    }

    /// Samples `G v_k` of eigenfunction `k` at the centers.
    pub fn eigenfunction(&self, k: usize) -> Vec<Complex64> {
        let v = self.spectrum.eigenvector(k);
        (0..self.dim())
            .map(|i| self.gram.row(i).iter().zip(v).map(|(&g, &z)| z * g).sum())
            .collect()
    }

    fn check_len(&self, got: usize) -> Result<(), KoopmanError> {
        if got != self.dim() {
            return Err(KoopmanError::DimensionMismatch {
                expected: self.dim(),
                got,
            });
        }
        Ok(())
    }
}

fn cross_gram(kernel: &ScalarKernelSpec, rows: &[f64], cols: &[f64]) -> DenseMatrix {
    let n = cols.len();
    let mut data = vec![0.0; rows.len() * n];
    data.par_chunks_mut(n.max(1)).zip(rows).for_each(|(out, &r)| {
        for (o, &c) in out.iter_mut().zip(cols) {
            *o = kernel.eval_sq_dist((r - c) * (r - c));
        }
    });
    DenseMatrix::new(rows.len(), n, data).expect("kernel values are finite")
}

pub fn fit_koopman(
    pairs: &TrajectoryPairs,
    kernel: &ScalarKernelSpec,
    pinv_tol: f64,
) -> Result<KoopmanModel, KoopmanError> {
    if pairs.len() < 2 {
        return Err(KoopmanError::TooFewPairs(pairs.len()));
    }
    if !(pinv_tol > 0.0 && pinv_tol < 1.0) {
        return Err(KoopmanError::InvalidTolerance(pinv_tol));
    }
    let gram = cross_gram(kernel, &pairs.states, &pairs.states);
    let advanced_gram = cross_gram(kernel, &pairs.advanced, &pairs.states);
    let gram_pinv = truncated_pinv(&gram, pinv_tol)?;
    let operator = gram_pinv.matmul(&advanced_gram)?;
    let spectrum = eig_general(&operator)?;
    Ok(KoopmanModel {
        centers: pairs.states.clone(),
        kernel: *kernel,
        gram,
        advanced_gram,
        gram_pinv,
        operator,
        spectrum,
        dt: pairs.dt,
        pinv_tol,
    })
}

/// One empirical Koopman step on center samples: `G K_N G^+ g`.
pub fn koopman_apply(model: &KoopmanModel, g: &[f64]) -> Result<Vec<f64>, KoopmanError> {
    model.check_len(g.len())?;
    let a = model.gram_pinv.matvec(g)?;
    let stepped = model.operator.matvec(&a)?;
    Ok(model.gram.matvec(&stepped)?)
}

/// Rank-`r` expansion `f ~ Re sum_k phi_k lambda_k^s b_k` over the leading eigenpairs.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SpectralForecast {
    rank: usize,
    eigenvalues: Vec<Complex64>,
    /// Eigenfunction samples, `N x r`.
    modes_re: DenseMatrix,
    modes_im: DenseMatrix,
    /// Mode coefficients `b_k`, `r x d`.
    coefficients: Vec<Vec<Complex64>>,
}

/// Forecast values at the centers plus the discarded imaginary part.
#[derive(Clone, Debug, PartialEq)]
pub struct ForecastSnapshot {
    pub values: DenseMatrix,
    /// `max |Im| / max(1, max |Re|)` of the complex expansion.
    pub imag_residual: f64,
}

impl SpectralForecast {
    pub fn rank(&self) -> usize {
        self.rank
    }

    pub fn eigenvalues(&self) -> &[Complex64] {
        &self.eigenvalues
    }

    pub fn coefficients(&self) -> &[Vec<Complex64>] {
        &self.coefficients
    }

    pub fn output_dim(&self) -> usize {
        self.coefficients.first().map_or(0, Vec::len)
    }

    pub fn max_modulus(&self) -> f64 {
        self.eigenvalues.iter().map(|z| z.norm()).fold(0.0, f64::max)
    }
}

/// Fits `b` by real least squares so that `Re(Phi_r b)` matches the observable
/// (`N x d`). Writing `b = b_re + i b_im` gives the real design columns
/// `Re phi_k` and `-Im phi_k`. They are orthogonalized in eigenvalue order and
/// a column whose remainder falls below `pinv_tol` of its norm is dropped, so
/// the fitted subspace for rank `r` is contained in the one for `r + 1`.
pub fn build_forecast(
    model: &KoopmanModel,
    observable: &DenseMatrix,
    rank: usize,
) -> Result<SpectralForecast, KoopmanError> {
    let n = model.dim();
    if rank == 0 || rank > n {
        return Err(KoopmanError::RankOutOfRange { rank, max: n });
    }
    model.check_len(observable.rows())?;
    let phis: Vec<Vec<Complex64>> = (0..rank).map(|k| model.eigenfunction(k)).collect();
    let modes_re = DenseMatrix::from_fn(n, rank, |i, k| phis[k][i].re);
    let modes_im = DenseMatrix::from_fn(n, rank, |i, k| phis[k][i].im);

    // columns ordered Re phi_1, -Im phi_1, Re phi_2, ...
    let columns: Vec<Vec<f64>> = phis
        .iter()
        .flat_map(|p| [p.iter().map(|z| z.re).collect(), p.iter().map(|z| -z.im).collect()])
        .collect();
    let (basis, r_factor, kept) = orthogonalize(&columns, model.pinv_tol);

    let d = observable.cols();
    let mut solution = vec![vec![0.0; d]; columns.len()];
    for j in 0..d {
        let f = observable.column(j);
        let proj: Vec<f64> = basis.iter().map(|q| dot(q, &f)).collect();
        // back substitution R x = Q^T f over the kept columns
        let mut x = vec![0.0; kept.len()];
        for a in (0..kept.len()).rev() {
            let tail: f64 = (a + 1..kept.len()).map(|b| r_factor[a][b] * x[b]).sum();
            x[a] = (proj[a] - tail) / r_factor[a][a];
        }
        for (a, &c) in kept.iter().enumerate() {
            solution[c][j] = x[a];
        }
    }
    let coefficients = (0..rank)
        .map(|k| {
            (0..d)
                .map(|j| Complex64::new(solution[2 * k][j], solution[2 * k + 1][j]))
                .collect()
        })
        .collect();
    Ok(SpectralForecast {
        rank,
        eigenvalues: model.spectrum.eigenvalues()[..rank].to_vec(),
        modes_re,
        modes_im,
        coefficients,
    })
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Gram-Schmidt with one reorthogonalization pass. Returns the orthonormal
/// basis, the upper-triangular factor over kept columns, and their indices.
fn orthogonalize(columns: &[Vec<f64>], drop_tol: f64) -> (Vec<Vec<f64>>, Vec<Vec<f64>>, Vec<usize>) {
    let m = columns.len();
    let mut basis: Vec<Vec<f64>> = Vec::new();
    let mut coeffs: Vec<Vec<f64>> = Vec::new();
    let mut kept = Vec::new();
    for (c, col) in columns.iter().enumerate() {
        let norm0 = dot(col, col).sqrt();
        if norm0 == 0.0 {
            continue;
        }
        let mut w = col.clone();
        let mut h = vec![0.0; basis.len()];
        for _ in 0..2 {
            for (q, hq) in basis.iter().zip(h.iter_mut()) {
                let p = dot(q, &w);
                *hq += p;
                for (wi, qi) in w.iter_mut().zip(q) {
                    *wi -= p * qi;
                }
            }
        }
        let norm = dot(&w, &w).sqrt();
        if norm <= drop_tol * norm0 {
            continue;
        }
        w.iter_mut().for_each(|v| *v /= norm);
        for (row, &hq) in coeffs.iter_mut().zip(&h) {
            row.push(hq);
        }
        let mut row = vec![0.0; basis.len()];
        row.push(norm);
        coeffs.push(row);
        basis.push(w);
        kept.push(c);
    }
    // pad rows to a square triangle
    let k = kept.len();
    for row in coeffs.iter_mut() {
        row.resize(k, 0.0);
    }
    debug_assert!(kept.len() <= m);
    (basis, coeffs, kept)
}

pub fn forecast_at(fc: &SpectralForecast, steps: u32) -> ForecastSnapshot {
    let n = fc.modes_re.rows();
    let d = fc.output_dim();
    let scaled: Vec<Vec<Complex64>> = fc
        .coefficients
        .iter()
        .zip(&fc.eigenvalues)
        .map(|(b, lam)| {
            let p = lam.powu(steps);
            b.iter().map(|&z| z * p).collect()
        })
        .collect();
    let mut re = vec![0.0; n * d];
    let mut im_max: f64 = 0.0;
    for i in 0..n {
        for j in 0..d {
            let mut z = Complex64::new(0.0, 0.0);
            for (k, s) in scaled.iter().enumerate() {
                z += Complex64::new(fc.modes_re.get(i, k), fc.modes_im.get(i, k)) * s[j];
            }
            re[i * d + j] = z.re;
            im_max = im_max.max(z.im.abs());
        }
    }
    let re_max = re.iter().fold(0.0_f64, |m, v| m.max(v.abs()));
    ForecastSnapshot {
        values: DenseMatrix::new(n, d, re).expect("forecast overflowed"),
        imag_residual: im_max / re_max.max(1.0),
    }
}
