//! Dense linear algebra used by the regression and Koopman pipelines.
//!
//! Matrices are stored row-major in [`DenseMatrix`]. Factorizations are
//! delegated to `faer` running sequentially so that results are reproducible
//! bit-for-bit across runs on the same machine.

use std::sync::Once;

use faer::linalg::solvers::{Eigen, Solve};
use faer::{Mat, Par, Side};
use num_complex::Complex64;
use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Tolerance used by [`DenseMatrix::is_symmetric`] in [`spd_solve`].
pub const SYMMETRY_TOL: f64 = 1e-10;

/// Default relative cutoff for [`truncated_pinv`].
pub const DEFAULT_PINV_TOL: f64 = 1e-10;

/// Relative residual accepted from [`spd_solve`]: `||AX - B||_max <= tol * (1 + ||B||_max)`.
pub const SPD_RESIDUAL_TOL: f64 = 1e-8;

/// Eigenpair residual accepted from [`eig_general`], relative to `||A||_F`.
pub const EIG_RESIDUAL_TOL: f64 = 1e-6;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum LinalgError {
    #[error("entry count {len} does not match shape {rows}x{cols}")]
    ShapeMismatch { rows: usize, cols: usize, len: usize },
    #[error("matrix contains a non-finite entry at ({row}, {col})")]
    NonFinite { row: usize, col: usize },
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),
    #[error("matrix is not square ({rows}x{cols})")]
    NotSquare { rows: usize, cols: usize },
    #[error("matrix is not symmetric to tolerance {SYMMETRY_TOL}")]
    NotSymmetric,
    #[error("matrix is not positive definite (jitter {jitter:e} applied)")]
    NotPositiveDefinite { jitter: f64 },
    #[error("pseudoinverse of a zero matrix")]
    ZeroMatrix,
    #[error("relative tolerance {0} outside (0, 1)")]
    InvalidTolerance(f64),
    #[error("eigensolver failed: {0}")]
    ConvergenceFailure(String),
}

fn sequential() {
    static INIT: Once = Once::new();
    INIT.call_once(|| faer::set_global_parallelism(Par::Seq));
}

/// Row-major dense real matrix with finite entries.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawMatrix", into = "RawMatrix")]
pub struct DenseMatrix {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
}

#[derive(Serialize, Deserialize)]
struct RawMatrix {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
}

impl TryFrom<RawMatrix> for DenseMatrix {
    type Error = LinalgError;

    fn try_from(raw: RawMatrix) -> Result<Self, Self::Error> {
        DenseMatrix::new(raw.rows, raw.cols, raw.data)
    }
}

impl From<DenseMatrix> for RawMatrix {
    fn from(m: DenseMatrix) -> Self {
        RawMatrix {
            rows: m.rows,
            cols: m.cols,
            data: m.data,
        }
    }
}

impl DenseMatrix {
    pub fn new(rows: usize, cols: usize, data: Vec<f64>) -> Result<Self, LinalgError> {
        if rows * cols != data.len() {
            return Err(LinalgError::ShapeMismatch {
                rows,
                cols,
                len: data.len(),
            });
        }
        if let Some(idx) = data.iter().position(|v| !v.is_finite()) {
            return Err(LinalgError::NonFinite {
                row: idx / cols.max(1),
                col: idx % cols.max(1),
            });
        }
        Ok(Self { rows, cols, data })
    }

    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self {
            rows,
            cols,
            data: vec![0.0; rows * cols],
        }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Self::zeros(n, n);
        for i in 0..n {
            m.data[i * n + i] = 1.0;
        }
        m
    }

    /// Builds a matrix from a closure; panics if the closure yields a non-finite value.
    pub fn from_fn(rows: usize, cols: usize, mut f: impl FnMut(usize, usize) -> f64) -> Self {
        let mut data = Vec::with_capacity(rows * cols);
        for i in 0..rows {
            for j in 0..cols {
                data.push(f(i, j));
            }
        }
        Self::new(rows, cols, data).expect("from_fn produced a non-finite entry")
    }

    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self, LinalgError> {
        let cols = rows.first().map_or(0, Vec::len);
        if rows.iter().any(|r| r.len() != cols) {
            return Err(LinalgError::DimensionMismatch("ragged rows".into()));
        }
        Self::new(rows.len(), cols, rows.concat())
    }

    pub fn column_vector(values: &[f64]) -> Result<Self, LinalgError> {
        Self::new(values.len(), 1, values.to_vec())
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn is_square(&self) -> bool {
        self.rows == self.cols
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.data[i * self.cols + j]
    }

    #[inline]
    pub fn set(&mut self, i: usize, j: usize, value: f64) {
        assert!(value.is_finite(), "non-finite matrix entry");
        self.data[i * self.cols + j] = value;
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.cols..(i + 1) * self.cols]
    }

    pub fn column(&self, j: usize) -> Vec<f64> {
        (0..self.rows).map(|i| self.get(i, j)).collect()
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }

    pub fn transpose(&self) -> Self {
        Self::from_fn(self.cols, self.rows, |i, j| self.get(j, i))
    }

    pub fn matmul(&self, rhs: &DenseMatrix) -> Result<DenseMatrix, LinalgError> {
        if self.cols != rhs.rows {
            return Err(LinalgError::DimensionMismatch(format!(
                "{}x{} times {}x{}",
                self.rows, self.cols, rhs.rows, rhs.cols
            )));
        }
        let mut out = vec![0.0; self.rows * rhs.cols];
        for i in 0..self.rows {
            let out_row = &mut out[i * rhs.cols..(i + 1) * rhs.cols];
            for (k, &a) in self.row(i).iter().enumerate() {
                if a == 0.0 {
                    continue;
                }
                for (o, &b) in out_row.iter_mut().zip(rhs.row(k)) {
                    *o += a * b;
                }
            }
        }
        DenseMatrix::new(self.rows, rhs.cols, out)
    }

    pub fn matvec(&self, v: &[f64]) -> Result<Vec<f64>, LinalgError> {
        if self.cols != v.len() {
            return Err(LinalgError::DimensionMismatch(format!(
                "{}x{} times vector of length {}",
                self.rows,
                self.cols,
                v.len()
            )));
        }
        Ok((0..self.rows)
            .map(|i| self.row(i).iter().zip(v).map(|(a, b)| a * b).sum())
            .collect())
    }

    /// Returns `self + shift * I`.
    pub fn add_diagonal(&self, shift: f64) -> Self {
        let mut m = self.clone();
        for i in 0..self.rows.min(self.cols) {
            m.data[i * self.cols + i] += shift;
        }
        m
    }

    pub fn sub(&self, rhs: &DenseMatrix) -> Result<DenseMatrix, LinalgError> {
        if self.rows != rhs.rows || self.cols != rhs.cols {
            return Err(LinalgError::DimensionMismatch("subtraction shapes differ".into()));
        }
        let data = self.data.iter().zip(&rhs.data).map(|(a, b)| a - b).collect();
        DenseMatrix::new(self.rows, self.cols, data)
    }

    pub fn trace(&self) -> f64 {
        (0..self.rows.min(self.cols)).map(|i| self.get(i, i)).sum()
    }

    /// Largest absolute entry.
    pub fn max_abs(&self) -> f64 {
        self.data.iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    pub fn frobenius_norm(&self) -> f64 {
        self.data.iter().map(|v| v * v).sum::<f64>().sqrt()
    }

    pub fn is_symmetric(&self, tol: f64) -> bool {
        if !self.is_square() {
            return false;
        }
        let scale = self.max_abs().max(1.0);
        (0..self.rows)
            .all(|i| (0..i).all(|j| (self.get(i, j) - self.get(j, i)).abs() <= tol * scale))
    }

    fn to_faer(&self) -> Mat<f64> {
        Mat::from_fn(self.rows, self.cols, |i, j| self.get(i, j))
    }
}

/// Solution of an SPD system together with how it was obtained.
#[derive(Clone, Debug)]
pub struct SpdSolution {
    pub solution: DenseMatrix,
    /// Diagonal shift added before factorization (zero unless the first attempt failed).
    pub jitter: f64,
    /// `||(A + jitter I) X - B||_max`.
    pub residual: f64,
}

/// Solves `A X = B` for symmetric positive definite `A`.
pub fn spd_solve(a: &DenseMatrix, b: &DenseMatrix) -> Result<DenseMatrix, LinalgError> {
    spd_solve_detailed(a, b).map(|s| s.solution)
}

/// Cholesky solve with one deterministic jitter retry of `1e-10 * trace(A) / n`.
///
/// Each right-hand side column is solved on its own, so solving `[b1 b2]`
/// gives bit-identical columns to solving `b1` and `b2` separately.
pub fn spd_solve_detailed(a: &DenseMatrix, b: &DenseMatrix) -> Result<SpdSolution, LinalgError> {
    sequential();
    if !a.is_square() {
        return Err(LinalgError::NotSquare {
            rows: a.rows,
            cols: a.cols,
        });
    }
    if b.rows != a.rows {
        return Err(LinalgError::DimensionMismatch(format!(
            "system of size {} with right-hand side of {} rows",
            a.rows, b.rows
        )));
    }
    if !a.is_symmetric(SYMMETRY_TOL) {
        return Err(LinalgError::NotSymmetric);
    }
    let n = a.rows;
    if n == 0 {
        return Ok(SpdSolution {
            solution: DenseMatrix::zeros(0, b.cols),
            jitter: 0.0,
            residual: 0.0,
        });
    }

    let mut jitter = 0.0;
    let mut factored = a.to_faer();
    let llt = match factored.llt(Side::Lower) {
        Ok(llt) => llt,
        Err(_) => {
            jitter = 1e-10 * a.trace().abs() / n as f64;
            let shifted = a.add_diagonal(jitter);
            factored = shifted.to_faer();
            factored
                .llt(Side::Lower)
                .map_err(|_| LinalgError::NotPositiveDefinite { jitter })?
        }
    };

    let tol = SPD_RESIDUAL_TOL * (1.0 + b.max_abs());
    let mut solution = DenseMatrix::zeros(n, b.cols);
    let mut residual: f64 = 0.0;
    for j in 0..b.cols {
        let rhs: Vec<f64> = b.column(j);
        let mut x = Mat::from_fn(n, 1, |i, _| rhs[i]);
        llt.solve_in_place(x.as_mut());
        let mut col_res = column_residual(&factored, &x, &rhs);
        // Iterative refinement, used only when the first pass misses the tolerance.
        for _ in 0..2 {
            if col_res.iter().fold(0.0f64, |m, r| m.max(r.abs())) <= tol {
                break;
            }
            let mut d = Mat::from_fn(n, 1, |i, _| col_res[i]);
            llt.solve_in_place(d.as_mut());
            for i in 0..n {
                x[(i, 0)] += d[(i, 0)];
            }
            col_res = column_residual(&factored, &x, &rhs);
        }
        for i in 0..n {
            let v = x[(i, 0)];
            if !v.is_finite() {
                return Err(LinalgError::NotPositiveDefinite { jitter });
            }
            solution.data[i * b.cols + j] = v;
        }
        residual = residual.max(col_res.iter().fold(0.0f64, |m, r| m.max(r.abs())));
    }

    Ok(SpdSolution {
        solution,
        jitter,
        residual,
    })
}

// b - A x, with A the (possibly shifted) factored matrix.
fn column_residual(a: &Mat<f64>, x: &Mat<f64>, b: &[f64]) -> Vec<f64> {
    let n = a.nrows();
    (0..n)
        .map(|i| {
            let mut acc = b[i];
            for k in 0..n {
                acc -= a[(i, k)] * x[(k, 0)];
            }
            acc
        })
        .collect()
}

/// Moore-Penrose pseudoinverse discarding singular values below `rel_tol * sigma_max`.
pub fn truncated_pinv(a: &DenseMatrix, rel_tol: f64) -> Result<DenseMatrix, LinalgError> {
    truncated_pinv_with_rank(a, rel_tol).map(|(p, _)| p)
}

/// As [`truncated_pinv`], also returning the number of retained singular values.
pub fn truncated_pinv_with_rank(
    a: &DenseMatrix,
    rel_tol: f64,
) -> Result<(DenseMatrix, usize), LinalgError> {
    sequential();
    if !(rel_tol > 0.0 && rel_tol < 1.0) {
        return Err(LinalgError::InvalidTolerance(rel_tol));
    }
    if a.rows == 0 || a.cols == 0 || a.max_abs() == 0.0 {
        return Err(LinalgError::ZeroMatrix);
    }
    let svd = a
        .to_faer()
        .thin_svd()
        .map_err(|e| LinalgError::ConvergenceFailure(format!("svd: {e:?}")))?;
    let u = svd.U();
    let v = svd.V();
    let s = svd.S().column_vector();
    let sigma_max = s[0];
    if sigma_max == 0.0 {
        return Err(LinalgError::ZeroMatrix);
    }
    let cutoff = rel_tol * sigma_max;
    let rank = (0..s.nrows()).take_while(|&k| s[k] >= cutoff).count();

    // A^+ = V_r S_r^{-1} U_r^T
    let mut out = vec![0.0; a.cols * a.rows];
    for k in 0..rank {
        let inv = 1.0 / s[k];
        for i in 0..a.cols {
            let vik = v[(i, k)] * inv;
            if vik == 0.0 {
                continue;
            }
            let row = &mut out[i * a.rows..(i + 1) * a.rows];
            for (j, o) in row.iter_mut().enumerate() {
                *o += vik * u[(j, k)];
            }
        }
    }
    Ok((DenseMatrix::new(a.cols, a.rows, out)?, rank))
}

/// Eigenvalues of a symmetric matrix in nondecreasing order.
pub fn symmetric_eigenvalues(a: &DenseMatrix) -> Result<Vec<f64>, LinalgError> {
    sequential();
    if !a.is_square() {
        return Err(LinalgError::NotSquare {
            rows: a.rows,
            cols: a.cols,
        });
    }
    a.to_faer()
        .self_adjoint_eigenvalues(Side::Lower)
        .map_err(|e| LinalgError::ConvergenceFailure(format!("{e:?}")))
}

/// Eigenpairs sorted by descending modulus, with unit-norm phase-fixed eigenvectors.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SpectralDecomposition {
    values: Vec<Complex64>,
    /// Column-major: eigenvector `k` occupies `vectors[k * n..(k + 1) * n]`.
    vectors: Vec<Complex64>,
}

impl SpectralDecomposition {
    pub fn dim(&self) -> usize {
        self.values.len()
    }

    pub fn eigenvalues(&self) -> &[Complex64] {
        &self.values
    }

    pub fn eigenvalue(&self, k: usize) -> Complex64 {
        self.values[k]
    }

    pub fn eigenvector(&self, k: usize) -> &[Complex64] {
        let n = self.dim();
        &self.vectors[k * n..(k + 1) * n]
    }
}

/// Eigendecomposition of a general real square matrix.
///
/// Eigenvalues are ordered by descending modulus, ties broken by descending
/// real then imaginary part, so conjugate pairs sit next to each other with
/// the positive imaginary part first. Each eigenvector is scaled to unit norm
/// and rotated so that its largest-modulus entry (first such index) is real
/// and nonnegative.
pub fn eig_general(a: &DenseMatrix) -> Result<SpectralDecomposition, LinalgError> {
    sequential();
    if !a.is_square() {
        return Err(LinalgError::NotSquare {
            rows: a.rows,
            cols: a.cols,
        });
    }
    let n = a.rows;
    if n == 0 {
        return Ok(SpectralDecomposition {
            values: vec![],
            vectors: vec![],
        });
    }
    let fa = a.to_faer();
    let evd = Eigen::new_from_real(fa.as_ref())
        .map_err(|e| LinalgError::ConvergenceFailure(format!("{e:?}")))?;
    let s = evd.S().column_vector();
    let u = evd.U();

    let mut order: Vec<usize> = (0..n).collect();
    let raw: Vec<Complex64> = (0..n).map(|k| Complex64::new(s[k].re, s[k].im)).collect();
    order.sort_by(|&i, &j| {
        let (a, b) = (raw[i], raw[j]);
        b.norm()
            .total_cmp(&a.norm())
            .then(b.re.total_cmp(&a.re))
            .then(b.im.total_cmp(&a.im))
            .then(i.cmp(&j))
    });

    let mut values = Vec::with_capacity(n);
    let mut vectors = Vec::with_capacity(n * n);
    for &k in &order {
        let mut col: Vec<Complex64> = (0..n).map(|i| Complex64::new(u[(i, k)].re, u[(i, k)].im)).collect();
        normalize_phase(&mut col);
        if col.iter().any(|z| !z.re.is_finite() || !z.im.is_finite()) {
            return Err(LinalgError::ConvergenceFailure("non-finite eigenvector".into()));
        }
        values.push(raw[k]);
        vectors.extend(col);
    }

    let decomposition = SpectralDecomposition { values, vectors };
    let bound = EIG_RESIDUAL_TOL * a.frobenius_norm();
    for k in 0..n {
        let r = eigen_residual(a, decomposition.eigenvalue(k), decomposition.eigenvector(k));
        if r > bound {
            return Err(LinalgError::ConvergenceFailure(format!(
                "eigenpair {k} residual {r:e} exceeds {bound:e}"
            )));
        }
    }
    Ok(decomposition)
}

fn normalize_phase(v: &mut [Complex64]) {
    let norm = v.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
    if norm == 0.0 {
        return;
    }
    let mut pivot = 0;
    let mut best = -1.0;
    for (i, z) in v.iter().enumerate() {
        let m = z.norm();
        if m > best {
            best = m;
            pivot = i;
        }
    }
    let phase = v[pivot] / v[pivot].norm();
    let scale = phase.conj() / norm;
    for z in v.iter_mut() {
        *z *= scale;
    }
    v[pivot] = Complex64::new(v[pivot].norm(), 0.0);
}

/// `||A v - lambda v||_2` for a real matrix and complex eigenpair.
pub fn eigen_residual(a: &DenseMatrix, lambda: Complex64, v: &[Complex64]) -> f64 {
    (0..a.rows)
        .map(|i| {
            let av: Complex64 = a
                .row(i)
                .iter()
                .zip(v)
                .map(|(&aij, &vj)| vj * aij)
                .sum();
            (av - lambda * v[i]).norm_sqr()
        })
        .sum::<f64>()
        .sqrt()
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random_matrix(rng: &mut ChaCha8Rng, rows: usize, cols: usize) -> DenseMatrix {
        DenseMatrix::from_fn(rows, cols, |_, _| rng.random_range(-1.0..1.0))
    }

    // Partial-pivot Gaussian elimination kept independent of the Cholesky path.
    fn gauss_solve(a: &DenseMatrix, b: &[f64]) -> Vec<f64> {
        let n = a.rows();
        let mut m: Vec<Vec<f64>> = (0..n)
            .map(|i| {
                let mut r = a.row(i).to_vec();
                r.push(b[i]);
                r
            })
            .collect();
        for c in 0..n {
            let p = (c..n)
                .max_by(|&i, &j| m[i][c].abs().total_cmp(&m[j][c].abs()))
                .unwrap();
            m.swap(c, p);
            for r in c + 1..n {
                let f = m[r][c] / m[c][c];
                for k in c..=n {
                    m[r][k] -= f * m[c][k];
                }
            }
        }
        let mut x = vec![0.0; n];
        for i in (0..n).rev() {
            let s: f64 = (i + 1..n).map(|k| m[i][k] * x[k]).sum();
            x[i] = (m[i][n] - s) / m[i][i];
        }
        x
    }

    #[test]
    fn construction_rejects_bad_input() {
        assert!(matches!(
            DenseMatrix::new(2, 2, vec![1.0; 3]),
            Err(LinalgError::ShapeMismatch { .. })
        ));
        assert!(matches!(
            DenseMatrix::new(1, 2, vec![1.0, f64::NAN]),
            Err(LinalgError::NonFinite { row: 0, col: 1 })
        ));
    }

    #[test]
    fn spd_identity_and_two_by_two() {
        let b = DenseMatrix::column_vector(&[1.0, 2.0, 3.0]).unwrap();
        let x = spd_solve(&DenseMatrix::identity(3), &b).unwrap();
        assert_eq!(x.as_slice(), &[1.0, 2.0, 3.0]);

        let a = DenseMatrix::from_rows(&[vec![2.0, 1.0], vec![1.0, 2.0]]).unwrap();
        let x = spd_solve(&a, &DenseMatrix::column_vector(&[3.0, 3.0]).unwrap()).unwrap();
        assert!((x.get(0, 0) - 1.0).abs() < 1e-14);
        assert!((x.get(1, 0) - 1.0).abs() < 1e-14);
    }

    #[test]
    fn spd_random_matches_elimination_oracle() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let m = random_matrix(&mut rng, 20, 20);
        let a = m.transpose().matmul(&m).unwrap().add_diagonal(1.0);
        let b = random_matrix(&mut rng, 20, 1);
        let x = spd_solve(&a, &b).unwrap();
        let ax = a.matmul(&x).unwrap();
        let res = ax.sub(&b).unwrap().max_abs();
        assert!(res <= SPD_RESIDUAL_TOL * (1.0 + b.max_abs()));
        let oracle = gauss_solve(&a, &b.column(0));
        for (xi, oi) in x.column(0).iter().zip(&oracle) {
            assert!((xi - oi).abs() < 1e-10);
        }
    }

    #[test]
    fn spd_rejects_indefinite_and_asymmetric() {
        let a = DenseMatrix::from_rows(&[vec![1.0, 2.0], vec![2.0, 1.0]]).unwrap();
        let b = DenseMatrix::column_vector(&[1.0, 1.0]).unwrap();
        assert!(matches!(
            spd_solve(&a, &b),
            Err(LinalgError::NotPositiveDefinite { .. })
        ));
        let a = DenseMatrix::from_rows(&[vec![1.0, 0.5], vec![0.0, 1.0]]).unwrap();
        assert_eq!(spd_solve(&a, &b), Err(LinalgError::NotSymmetric));
    }

    #[test]
    fn spd_jitter_rescues_singular_psd() {
        // rank-1 PSD matrix: singular, so the first factorization fails.
        let a = DenseMatrix::from_rows(&[vec![1.0, 1.0], vec![1.0, 1.0]]).unwrap();
        let b = DenseMatrix::column_vector(&[1.0, 1.0]).unwrap();
        let sol = spd_solve_detailed(&a, &b).unwrap();
        assert!(sol.jitter > 0.0);
        assert!((sol.jitter - 1e-10).abs() < 1e-20);
    }

    #[test]
    fn spd_columns_are_solved_independently() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let m = random_matrix(&mut rng, 12, 12);
        let a = m.transpose().matmul(&m).unwrap().add_diagonal(0.5);
        let b = random_matrix(&mut rng, 12, 2);
        let joint = spd_solve(&a, &b).unwrap();
        for j in 0..2 {
            let single = spd_solve(&a, &DenseMatrix::column_vector(&b.column(j)).unwrap()).unwrap();
            assert_eq!(joint.column(j), single.column(0));
        }
    }

    #[test]
    fn pinv_identity_and_diagonal() {
        let p = truncated_pinv(&DenseMatrix::identity(2), DEFAULT_PINV_TOL).unwrap();
        assert!(p.sub(&DenseMatrix::identity(2)).unwrap().max_abs() < 1e-14);

        let d = DenseMatrix::from_rows(&[vec![2.0, 0.0], vec![0.0, 0.0]]).unwrap();
        let p = truncated_pinv(&d, DEFAULT_PINV_TOL).unwrap();
        let expected = DenseMatrix::from_rows(&[vec![0.5, 0.0], vec![0.0, 0.0]]).unwrap();
        assert!(p.sub(&expected).unwrap().max_abs() < 1e-14);
    }

    #[test]
    fn pinv_errors() {
        assert_eq!(
            truncated_pinv(&DenseMatrix::zeros(3, 3), DEFAULT_PINV_TOL),
            Err(LinalgError::ZeroMatrix)
        );
        assert_eq!(
            truncated_pinv(&DenseMatrix::identity(2), 0.0),
            Err(LinalgError::InvalidTolerance(0.0))
        );
    }

    #[test]
    fn pinv_rank_three_moore_penrose() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let left = random_matrix(&mut rng, 5, 3);
        let right = random_matrix(&mut rng, 3, 5);
        let a = left.matmul(&right).unwrap();
        let (p, rank) = truncated_pinv_with_rank(&a, DEFAULT_PINV_TOL).unwrap();
        assert_eq!(rank, 3);
        let apa = a.matmul(&p).unwrap().matmul(&a).unwrap();
        assert!(apa.sub(&a).unwrap().max_abs() < 1e-8);
        let pap = p.matmul(&a).unwrap().matmul(&p).unwrap();
        assert!(pap.sub(&p).unwrap().max_abs() < 1e-8 * p.max_abs().max(1.0));
        let ap = a.matmul(&p).unwrap();
        assert!(ap.sub(&ap.transpose()).unwrap().max_abs() < 1e-8);
    }

    #[test]
    fn eig_diagonal() {
        let a = DenseMatrix::from_rows(&[vec![1.0, 0.0], vec![0.0, 3.0]]).unwrap();
        let e = eig_general(&a).unwrap();
        assert!((e.eigenvalue(0) - Complex64::new(3.0, 0.0)).norm() < 1e-12);
        assert!((e.eigenvalue(1) - Complex64::new(1.0, 0.0)).norm() < 1e-12);
        assert!((e.eigenvector(0)[1] - Complex64::new(1.0, 0.0)).norm() < 1e-12);
        assert!(e.eigenvector(0)[0].norm() < 1e-12);
        assert!((e.eigenvector(1)[0] - Complex64::new(1.0, 0.0)).norm() < 1e-12);
    }

    #[test]
    fn eig_rotation_has_unit_imaginary_pair() {
        let a = DenseMatrix::from_rows(&[vec![0.0, -1.0], vec![1.0, 0.0]]).unwrap();
        let e = eig_general(&a).unwrap();
        assert!((e.eigenvalue(0) - Complex64::new(0.0, 1.0)).norm() < 1e-12);
        assert!((e.eigenvalue(1) - Complex64::new(0.0, -1.0)).norm() < 1e-12);
        for k in 0..2 {
            assert!((e.eigenvalue(k).norm() - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn eig_random_residual_order_and_phase() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let a = random_matrix(&mut rng, 8, 8);
        let e = eig_general(&a).unwrap();
        assert_eq!(e.dim(), 8);
        for k in 0..8 {
            let v = e.eigenvector(k);
            let r = eigen_residual(&a, e.eigenvalue(k), v);
            assert!(r <= EIG_RESIDUAL_TOL * a.frobenius_norm());
            let norm: f64 = v.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
            assert!((norm - 1.0).abs() < 1e-12);
            let pivot = v
                .iter()
                .copied()
                .max_by(|a, b| a.norm().total_cmp(&b.norm()))
                .unwrap();
            assert!(pivot.im.abs() < 1e-12 && pivot.re >= 0.0);
        }
        for w in e.eigenvalues().windows(2) {
            assert!(w[0].norm() >= w[1].norm() - 1e-12);
        }
    }

    #[test]
    fn eig_symmetric_is_real() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let m = random_matrix(&mut rng, 10, 10);
        let a = DenseMatrix::from_fn(10, 10, |i, j| m.get(i, j) + m.get(j, i));
        let e = eig_general(&a).unwrap();
        assert!(e.eigenvalues().iter().all(|z| z.im.abs() <= 1e-8));
    }

    #[test]
    fn symmetric_eigenvalues_ascending() {
        let a = DenseMatrix::from_rows(&[vec![2.0, 1.0], vec![1.0, 2.0]]).unwrap();
        let ev = symmetric_eigenvalues(&a).unwrap();
        assert!((ev[0] - 1.0).abs() < 1e-12 && (ev[1] - 3.0).abs() < 1e-12);
    }

    proptest::proptest! {
        #![proptest_config(proptest::prelude::ProptestConfig::with_cases(32))]
        #[test]
        fn pinv_commutes_with_transpose(seed in 0u64..10_000, rows in 1usize..7, cols in 1usize..7) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let a = random_matrix(&mut rng, rows, cols);
            let lhs = truncated_pinv(&a.transpose(), DEFAULT_PINV_TOL).unwrap();
            let rhs = truncated_pinv(&a, DEFAULT_PINV_TOL).unwrap().transpose();
            let scale = rhs.max_abs().max(1.0);
            proptest::prop_assert!(lhs.sub(&rhs).unwrap().max_abs() <= 1e-8 * scale);
        }

        #[test]
        fn spd_residual_contract(seed in 0u64..10_000, n in 1usize..25) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let m = random_matrix(&mut rng, n, n);
            let a = m.transpose().matmul(&m).unwrap().add_diagonal(1e-3);
            let b = random_matrix(&mut rng, n, 2);
            let x = spd_solve(&a, &b).unwrap();
            let res = a.matmul(&x).unwrap().sub(&b).unwrap().max_abs();
            proptest::prop_assert!(res <= SPD_RESIDUAL_TOL * (1.0 + b.max_abs()));
        }
    }
}
