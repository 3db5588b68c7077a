//! Dense and compressed-sparse-row design matrices, plus the power-iteration
//! estimate of their spectral constants.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::vecops::{dot, norm};

/// Row-major dense matrix.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DenseMatrix {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
}

impl DenseMatrix {
    pub fn new(rows: usize, cols: usize, data: Vec<f64>) -> Result<Self> {
        if data.len() != rows * cols {
            return Err(Error::invalid(format!(
                "dense matrix {rows}x{cols} needs {} entries, got {}",
                rows * cols,
                data.len()
            )));
        }
        if data.iter().any(|v| !v.is_finite()) {
            return Err(Error::invalid("matrix entries must be finite"));
        }
        Ok(Self { rows, cols, data })
    }

    pub fn identity(n: usize) -> Self {
        let mut data = vec![0.0; n * n];
        for i in 0..n {
            data[i * n + i] = 1.0;
        }
        Self {
            rows: n,
            cols: n,
            data,
        }
    }

    pub fn from_diagonal(diag: &[f64]) -> Self {
        let n = diag.len();
        let mut m = Self::identity(n);
        for (i, d) in diag.iter().enumerate() {
            m.data[i * n + i] = *d;
        }
        m
    }

    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let cols = rows.first().map_or(0, Vec::len);
        if rows.iter().any(|r| r.len() != cols) {
            return Err(Error::invalid("ragged rows"));
        }
        Self::new(rows.len(), cols, rows.concat())
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.data[i * self.cols + j]
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.cols..(i + 1) * self.cols]
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    /// Frobenius norm of `M − Mᵀ` relative to the Frobenius norm of `M`.
    pub fn asymmetry(&self) -> f64 {
        if self.rows != self.cols {
            return f64::INFINITY;
        }
        let n = self.rows;
        let mut diff = 0.0;
        for i in 0..n {
            for j in (i + 1)..n {
                let d = self.get(i, j) - self.get(j, i);
                diff += 2.0 * d * d;
            }
        }
        let total = norm(&self.data);
        if total == 0.0 {
            0.0
        } else {
            diff.sqrt() / total
        }
    }
}

/// Compressed sparse row matrix. Column indices are strictly increasing
/// within each row.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CsrMatrix {
    rows: usize,
    cols: usize,
    indptr: Vec<usize>,
    indices: Vec<usize>,
    values: Vec<f64>,
}

impl CsrMatrix {
    pub fn new(
        rows: usize,
        cols: usize,
        indptr: Vec<usize>,
        indices: Vec<usize>,
        values: Vec<f64>,
    ) -> Result<Self> {
        if indptr.len() != rows + 1 || indptr[0] != 0 || indptr[rows] != indices.len() {
            return Err(Error::invalid("malformed CSR row pointer"));
        }
        if indices.len() != values.len() {
            return Err(Error::invalid("CSR indices and values differ in length"));
        }
        for r in 0..rows {
            let (lo, hi) = (indptr[r], indptr[r + 1]);
            if lo > hi {
                return Err(Error::invalid("CSR row pointer decreases"));
            }
            let row = &indices[lo..hi];
            if row.windows(2).any(|w| w[0] >= w[1]) {
                return Err(Error::invalid(format!(
                    "row {r}: column indices not strictly increasing"
                )));
            }
            if row.last().is_some_and(|&c| c >= cols) {
                return Err(Error::invalid(format!("row {r}: column index out of range")));
            }
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(Error::invalid("matrix entries must be finite"));
        }
        Ok(Self {
            rows,
            cols,
            indptr,
            indices,
            values,
        })
    }

    /// Builds from per-row `(column, value)` lists.
    pub fn from_rows(cols: usize, rows: &[Vec<(usize, f64)>]) -> Result<Self> {
        let mut indptr = Vec::with_capacity(rows.len() + 1);
        let mut indices = Vec::new();
        let mut values = Vec::new();
        indptr.push(0);
        for row in rows {
            for &(c, v) in row {
                indices.push(c);
                values.push(v);
            }
            indptr.push(indices.len());
        }
        Self::new(rows.len(), cols, indptr, indices, values)
    }

    /// Entries of row `i` as parallel `(indices, values)` slices.
    pub fn row(&self, i: usize) -> (&[usize], &[f64]) {
        let (lo, hi) = (self.indptr[i], self.indptr[i + 1]);
        (&self.indices[lo..hi], &self.values[lo..hi])
    }

    pub fn nnz(&self) -> usize {
        self.values.len()
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }
}

/// A design matrix in dense or sparse storage.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "storage", rename_all = "lowercase")]
pub enum DesignMatrix {
    Dense(DenseMatrix),
    Sparse(CsrMatrix),
}

impl From<DenseMatrix> for DesignMatrix {
    fn from(m: DenseMatrix) -> Self {
        DesignMatrix::Dense(m)
    }
}

impl From<CsrMatrix> for DesignMatrix {
    fn from(m: CsrMatrix) -> Self {
        DesignMatrix::Sparse(m)
    }
}

impl DesignMatrix {
    pub fn rows(&self) -> usize {
        match self {
            DesignMatrix::Dense(m) => m.rows,
            DesignMatrix::Sparse(m) => m.rows,
        }
    }

    pub fn cols(&self) -> usize {
        match self {
            DesignMatrix::Dense(m) => m.cols,
            DesignMatrix::Sparse(m) => m.cols,
        }
    }

    /// `out ← M x`
    pub fn matvec(&self, x: &[f64], out: &mut [f64]) {
        debug_assert_eq!(x.len(), self.cols());
        debug_assert_eq!(out.len(), self.rows());
        match self {
            DesignMatrix::Dense(m) => {
                for (i, o) in out.iter_mut().enumerate() {
                    *o = dot(m.row(i), x);
                }
            }
            DesignMatrix::Sparse(m) => {
                for (i, o) in out.iter_mut().enumerate() {
                    let (idx, val) = m.row(i);
                    *o = idx.iter().zip(val).map(|(&j, v)| v * x[j]).sum();
                }
            }
        }
    }

    /// `out ← Mᵀ y`
    pub fn matvec_t(&self, y: &[f64], out: &mut [f64]) {
        debug_assert_eq!(y.len(), self.rows());
        debug_assert_eq!(out.len(), self.cols());
        out.iter_mut().for_each(|o| *o = 0.0);
        match self {
            DesignMatrix::Dense(m) => {
                for (i, yi) in y.iter().enumerate() {
                    if *yi != 0.0 {
                        for (o, a) in out.iter_mut().zip(m.row(i)) {
                            *o += a * yi;
                        }
                    }
                }
            }
            DesignMatrix::Sparse(m) => {
                for (i, yi) in y.iter().enumerate() {
                    let (idx, val) = m.row(i);
                    for (&j, v) in idx.iter().zip(val) {
                        out[j] += v * yi;
                    }
                }
            }
        }
    }

    pub fn is_zero(&self) -> bool {
        match self {
            DesignMatrix::Dense(m) => m.data.iter().all(|v| *v == 0.0),
            DesignMatrix::Sparse(m) => m.values.iter().all(|v| *v == 0.0),
        }
    }

    /// Dense copy, for small matrices and test oracles.
    pub fn to_dense(&self) -> DenseMatrix {
        match self {
            DesignMatrix::Dense(m) => m.clone(),
            DesignMatrix::Sparse(m) => {
                let mut data = vec![0.0; m.rows * m.cols];
                for i in 0..m.rows {
                    let (idx, val) = m.row(i);
                    for (&j, v) in idx.iter().zip(val) {
                        data[i * m.cols + j] = *v;
                    }
                }
                DenseMatrix {
                    rows: m.rows,
                    cols: m.cols,
                    data,
                }
            }
        }
    }
}

/// Which spectral constant [`estimate_lipschitz`] computes.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LipschitzMode {
    /// `λ_max(MᵀM)`, i.e. the squared spectral norm.
    Gram,
    /// `λ_max(M)` for a symmetric positive semidefinite `M`.
    Symmetric,
}

pub const POWER_ITERATION_CAP: usize = 5000;
const POWER_TARGET: f64 = 1e-10;
const POWER_ACCEPT: f64 = 1e-6;

/// Largest eigenvalue of a symmetric PSD operator by power iteration.
///
/// Starts from the normalized all-ones vector. Stops once the eigen-residual
/// `‖Gv − ρv‖` drops below `1e-10·ρ`; at the iteration cap a residual below
/// `1e-6·ρ` is still accepted, anything worse is a numeric failure carrying
/// the last Rayleigh quotient.
pub fn power_iteration(n: usize, mut apply: impl FnMut(&[f64], &mut [f64])) -> Result<f64> {
    if n == 0 {
        return Err(Error::invalid("empty operator"));
    }
    let mut v = vec![1.0 / (n as f64).sqrt(); n];
    let mut w = vec![0.0; n];
    let mut rho = 0.0;
    let mut resid = f64::INFINITY;
    for _ in 0..POWER_ITERATION_CAP {
        apply(&v, &mut w);
        rho = dot(&v, &w);
        resid = w
            .iter()
            .zip(&v)
            .map(|(wi, vi)| (wi - rho * vi).powi(2))
            .sum::<f64>()
            .sqrt();
        if !rho.is_finite() {
            return Err(Error::numeric("power iteration produced a non-finite value"));
        }
        if resid <= POWER_TARGET * rho.abs() {
            return Ok(rho);
        }
        let wn = norm(&w);
        if wn == 0.0 {
            // v lies in the null space of a PSD operator; nothing larger to find
            return Ok(0.0);
        }
        for (vi, wi) in v.iter_mut().zip(&w) {
            *vi = wi / wn;
        }
    }
    if resid <= POWER_ACCEPT * rho.abs() {
        Ok(rho)
    } else {
        Err(Error::NumericFailure {
            message: format!(
                "power iteration did not converge in {POWER_ITERATION_CAP} iterations (residual {resid:e})"
            ),
            best_estimate: Some(rho),
        })
    }
}

/// `λ_max(MᵀM)` or `λ_max(M)`, depending on `mode`.
pub fn estimate_lipschitz(m: &DesignMatrix, mode: LipschitzMode) -> Result<f64> {
    if m.rows() == 0 || m.cols() == 0 || m.is_zero() {
        return Err(Error::invalid("estimate_lipschitz needs a nonzero matrix"));
    }
    let est = match mode {
        LipschitzMode::Gram => {
            let mut tmp = vec![0.0; m.rows()];
            power_iteration(m.cols(), |v, out| {
                m.matvec(v, &mut tmp);
                m.matvec_t(&tmp, out);
            })
        }
        LipschitzMode::Symmetric => {
            if m.rows() != m.cols() {
                return Err(Error::invalid("symmetric mode needs a square matrix"));
            }
            power_iteration(m.cols(), |v, out| m.matvec(v, out))
        }
    }?;
    if est <= 0.0 {
        return Err(Error::numeric("estimated spectral constant is not positive"));
    }
    Ok(est)
}

/// Smallest eigenvalue of a symmetric PSD matrix, via power iteration on
/// the shifted operator `λ_max·I − M`.
pub fn estimate_lambda_min(m: &DesignMatrix) -> Result<f64> {
    let top = estimate_lipschitz(m, LipschitzMode::Symmetric)?;
    let shifted = power_iteration(m.cols(), |v, out| {
        m.matvec(v, out);
        for (o, vi) in out.iter_mut().zip(v) {
            *o = top * vi - *o;
        }
    })?;
    Ok((top - shifted).max(0.0))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn identity_gives_one() {
        let m: DesignMatrix = DenseMatrix::identity(4).into();
        let l = estimate_lipschitz(&m, LipschitzMode::Gram).unwrap();
        assert!((l - 1.0).abs() < 1e-12);
        let l = estimate_lipschitz(&m, LipschitzMode::Symmetric).unwrap();
        assert!((l - 1.0).abs() < 1e-12);
    }

    #[test]
    fn diagonal_gram_mode() {
        let m: DesignMatrix = DenseMatrix::from_diagonal(&[1.0, 2.0, 3.0]).into();
        let l = estimate_lipschitz(&m, LipschitzMode::Gram).unwrap();
        assert!((l - 9.0).abs() < 9e-6, "{l}");
    }

    #[test]
    fn zero_matrix_rejected() {
        let m: DesignMatrix = DenseMatrix::new(2, 2, vec![0.0; 4]).unwrap().into();
        assert!(matches!(
            estimate_lipschitz(&m, LipschitzMode::Gram),
            Err(Error::InvalidArgument(_))
        ));
    }

    #[test]
    fn csr_rejects_unsorted_columns() {
        let err = CsrMatrix::new(1, 4, vec![0, 2], vec![3, 1], vec![1.0, 2.0]);
        assert!(err.is_err());
    }

    #[test]
    fn sparse_and_dense_products_agree() {
        let rows = vec![vec![(0, 1.0), (2, -2.0)], vec![], vec![(1, 0.5)]];
        let sp: DesignMatrix = CsrMatrix::from_rows(3, &rows).unwrap().into();
        let de: DesignMatrix = sp.to_dense().into();
        let x = [0.3, -1.0, 2.0];
        let (mut a, mut b) = (vec![0.0; 3], vec![0.0; 3]);
        sp.matvec(&x, &mut a);
        de.matvec(&x, &mut b);
        assert_eq!(a, b);
        sp.matvec_t(&x, &mut a);
        de.matvec_t(&x, &mut b);
        assert_eq!(a, b);
    }

    #[test]
    fn lambda_min_of_diagonal() {
        let m: DesignMatrix = DenseMatrix::from_diagonal(&[0.25, 2.0, 5.0]).into();
        let l = estimate_lambda_min(&m).unwrap();
        assert!((l - 0.25).abs() < 1e-6, "{l}");
    }
}
