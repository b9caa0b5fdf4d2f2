//! Dense linear-algebra kernels: thin SVD, symmetric eigendecomposition and
//! SPD solve operators with a Woodbury fast path for the large Gram side.
//!
//! Factorizations are delegated to `faer`, run sequentially so results are
//! bitwise reproducible for a given input.

use faer::linalg::matmul::matmul;
use faer::linalg::solvers::{Llt, Solve};
use faer::prelude::ReborrowMut;
use faer::{Accum, Mat, MatMut, MatRef, Par, Side};

use crate::error::{Error, Result};

/// Singular values below this fraction of the largest one count as zero.
pub const RANK_RTOL: f64 = 1e-12;

/// Allowed relative asymmetry for inputs of [`sym_eig`].
pub const SYMMETRY_RTOL: f64 = 1e-10;

/// Column-major dense matrix with finite entries and nonzero dimensions.
#[derive(Clone, Debug, PartialEq)]
pub struct DenseMatrix(Mat<f64>);

impl DenseMatrix {
    /// Wraps a `faer` matrix, rejecting empty shapes and non-finite entries.
    pub fn from_mat(mat: Mat<f64>) -> Result<Self> {
        if mat.nrows() == 0 || mat.ncols() == 0 {
            return Err(Error::EmptyMatrix {
                rows: mat.nrows(),
                cols: mat.ncols(),
            });
        }
        check_finite(mat.as_ref())?;
        Ok(DenseMatrix(mat))
    }

    pub fn from_fn(rows: usize, cols: usize, f: impl FnMut(usize, usize) -> f64) -> Result<Self> {
        Self::from_mat(Mat::from_fn(rows, cols, f))
    }

    /// Builds a matrix from `cols` columns of length `rows` laid out back to back.
    pub fn from_col_major(rows: usize, cols: usize, data: &[f64]) -> Result<Self> {
        if data.len() != rows * cols {
            return Err(Error::dim(format!(
                "{} values cannot fill a {rows}x{cols} matrix",
                data.len()
            )));
        }
        Self::from_fn(rows, cols, |i, j| data[j * rows + i])
    }

    /// Builds a matrix whose rows are the given slices.
    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let ncols = rows.first().map_or(0, Vec::len);
        if let Some((i, r)) = rows.iter().enumerate().find(|(_, r)| r.len() != ncols) {
            return Err(Error::dim(format!(
                "row {i} has {} entries, expected {ncols}",
                r.len()
            )));
        }
        Self::from_fn(rows.len(), ncols, |i, j| rows[i][j])
    }

    /// # Panics
    /// If either dimension is zero.
    pub fn zeros(rows: usize, cols: usize) -> Self {
        assert!(rows > 0 && cols > 0, "empty matrix");
        DenseMatrix(Mat::zeros(rows, cols))
    }

    /// # Panics
    /// If `n` is zero.
    pub fn identity(n: usize) -> Self {
        assert!(n > 0, "empty matrix");
        DenseMatrix(Mat::identity(n, n))
    }

    /// Wraps a matrix already known to be finite and nonempty.
    pub(crate) fn from_mat_unchecked(mat: Mat<f64>) -> Self {
        debug_assert!(mat.nrows() > 0 && mat.ncols() > 0);
        DenseMatrix(mat)
    }

    pub fn nrows(&self) -> usize {
        self.0.nrows()
    }

    pub fn ncols(&self) -> usize {
        self.0.ncols()
    }

    pub fn shape(&self) -> (usize, usize) {
        (self.nrows(), self.ncols())
    }

    pub fn get(&self, row: usize, col: usize) -> f64 {
        self.0[(row, col)]
    }

    pub fn column(&self, col: usize) -> &[f64] {
        self.0.col_as_slice(col)
    }

    pub fn as_ref(&self) -> MatRef<'_, f64> {
        self.0.as_ref()
    }

    pub fn as_mat(&self) -> &Mat<f64> {
        &self.0
    }

    pub fn into_inner(self) -> Mat<f64> {
        self.0
    }

    pub fn transpose(&self) -> DenseMatrix {
        DenseMatrix(self.0.transpose().to_owned())
    }

    pub fn matmul(&self, rhs: &DenseMatrix) -> Result<DenseMatrix> {
        if self.ncols() != rhs.nrows() {
            return Err(Error::dim(format!(
                "cannot multiply {:?} by {:?}",
                self.shape(),
                rhs.shape()
            )));
        }
        Ok(DenseMatrix(mat_mul(self.as_ref(), rhs.as_ref())))
    }

    pub fn frobenius_norm(&self) -> f64 {
        self.0.norm_l2()
    }

    /// Copies of the columns selected by `indices`, in that order.
    pub fn select_columns(&self, indices: &[usize]) -> Result<DenseMatrix> {
        if indices.is_empty() {
            return Err(Error::EmptyMatrix {
                rows: self.nrows(),
                cols: 0,
            });
        }
        if let Some(&bad) = indices.iter().find(|&&j| j >= self.ncols()) {
            return Err(Error::invalid(format!(
                "column index {bad} out of range for {} columns",
                self.ncols()
            )));
        }
        Ok(DenseMatrix(Mat::from_fn(
            self.nrows(),
            indices.len(),
            |i, j| self.0[(i, indices[j])],
        )))
    }

    /// Horizontal concatenation `[self other]`.
    pub fn hstack(&self, other: &DenseMatrix) -> Result<DenseMatrix> {
        if self.nrows() != other.nrows() {
            return Err(Error::dim("hstack requires equal row counts"));
        }
        let left = self.ncols();
        Ok(DenseMatrix(Mat::from_fn(
            self.nrows(),
            left + other.ncols(),
            |i, j| {
                if j < left {
                    self.0[(i, j)]
                } else {
                    other.0[(i, j - left)]
                }
            },
        )))
    }
}

fn check_finite(m: MatRef<'_, f64>) -> Result<()> {
    for j in 0..m.ncols() {
        for i in 0..m.nrows() {
            let v = m[(i, j)];
            if !v.is_finite() {
                return Err(Error::NonFinite {
                    row: i,
                    col: j,
                    value: v,
                });
            }
        }
    }
    Ok(())
}

/// `lhs * rhs`, single-threaded.
pub fn mat_mul(lhs: MatRef<'_, f64>, rhs: MatRef<'_, f64>) -> Mat<f64> {
    let mut out = Mat::zeros(lhs.nrows(), rhs.ncols());
    matmul(out.as_mut(), Accum::Replace, lhs, rhs, 1.0, Par::Seq);
    out
}

/// `dst = beta_accum(dst) + alpha * lhs * rhs`, single-threaded.
pub fn mat_mul_into(
    dst: MatMut<'_, f64>,
    accum: Accum,
    lhs: MatRef<'_, f64>,
    rhs: MatRef<'_, f64>,
    alpha: f64,
) {
    matmul(dst, accum, lhs, rhs, alpha, Par::Seq);
}

/// Thin singular value decomposition truncated to `k` triplets.
#[derive(Clone, Debug)]
pub struct ThinSvd {
    pub u: DenseMatrix,
    /// Non-increasing.
    pub s: Vec<f64>,
    pub v: DenseMatrix,
}

impl ThinSvd {
    /// Number of singular values above `RANK_RTOL` times the largest.
    pub fn numerical_rank(&self) -> usize {
        numerical_rank(&self.s)
    }
}

pub fn numerical_rank(s: &[f64]) -> usize {
    match s.first() {
        Some(&top) if top > 0.0 => s.iter().take_while(|&&v| v > RANK_RTOL * top).count(),
        _ => 0,
    }
}

pub fn thin_svd(m: &DenseMatrix, k: usize) -> Result<ThinSvd> {
    let max_k = m.nrows().min(m.ncols());
    if k == 0 || k > max_k {
        return Err(Error::invalid(format!(
            "thin_svd rank {k} outside 1..={max_k}"
        )));
    }
    let svd = m
        .as_mat()
        .thin_svd()
        .map_err(|e| Error::Factorization(format!("svd: {e:?}")))?;
    let s_all = svd.S().column_vector();
    let s: Vec<f64> = (0..k).map(|i| s_all[i]).collect();
    let u = svd.U().subcols(0, k).to_owned();
    let v = svd.V().subcols(0, k).to_owned();
    Ok(ThinSvd {
        u: DenseMatrix::from_mat(u)?,
        s,
        v: DenseMatrix::from_mat(v)?,
    })
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum EigenEnd {
    Smallest,
    Largest,
}

#[derive(Clone, Debug)]
pub struct SymEig {
    /// Ascending for `Smallest`, descending for `Largest`.
    pub values: Vec<f64>,
    /// Column `i` pairs with `values[i]`.
    pub vectors: DenseMatrix,
}

/// Relative asymmetry `max|M - Mᵀ| / max|M|` (zero for the zero matrix).
pub fn asymmetry(m: MatRef<'_, f64>) -> f64 {
    let n = m.nrows();
    let mut scale = 0.0f64;
    let mut diff = 0.0f64;
    for j in 0..n {
        for i in 0..n {
            scale = scale.max(m[(i, j)].abs());
            if i < j {
                diff = diff.max((m[(i, j)] - m[(j, i)]).abs());
            }
        }
    }
    if scale == 0.0 {
        0.0
    } else {
        diff / scale
    }
}

/// `k` eigenpairs from one end of the spectrum of a symmetric matrix.
pub fn sym_eig(m: &DenseMatrix, k: usize, which: EigenEnd) -> Result<SymEig> {
    let n = m.nrows();
    if m.ncols() != n {
        return Err(Error::dim(format!(
            "sym_eig needs a square matrix, got {:?}",
            m.shape()
        )));
    }
    if k == 0 || k > n {
        return Err(Error::invalid(format!("sym_eig count {k} outside 1..={n}")));
    }
    let asym = asymmetry(m.as_ref());
    if asym > SYMMETRY_RTOL {
        return Err(Error::NotSymmetric(asym));
    }
    let evd = m
        .as_mat()
        .self_adjoint_eigen(Side::Lower)
        .map_err(|e| Error::Factorization(format!("eigendecomposition: {e:?}")))?;
    let s = evd.S().column_vector();
    let u = evd.U();
    let order: Vec<usize> = match which {
        EigenEnd::Smallest => (0..k).collect(),
        EigenEnd::Largest => (0..k).map(|i| n - 1 - i).collect(),
    };
    let values = order.iter().map(|&i| s[i]).collect();
    let vectors = Mat::from_fn(n, k, |i, j| u[(i, order[j])]);
    Ok(SymEig {
        values,
        vectors: DenseMatrix::from_mat(vectors)?,
    })
}

/// Which Gram-type matrix an [`SpdSolveOperator`] inverts for a wide `X` (r x M₂).
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum SolveSide {
    /// `I + c·XᵀX`, size M₂ x M₂, applied through the Woodbury identity.
    Gram,
    /// `I + c·XXᵀ`, size r x r, factored directly.
    Covariance,
}

#[derive(Clone, Debug)]
enum SolveMode {
    Direct,
    /// Holds `X` so that `(I + c XᵀX)⁻¹ = I - c Xᵀ (I + c XXᵀ)⁻¹ X`.
    Woodbury {
        basis: Mat<f64>,
    },
}

/// Immutable operator `scale · (I + c·M)⁻¹` where `M` is `XXᵀ` or `XᵀX`.
///
/// Only the small r x r matrix `I + c XXᵀ` is ever factored; the Gram side
/// costs two r x M₂ x n products per application and never builds an
/// M₂ x M₂ inverse.
#[derive(Debug)]
pub struct SpdSolveOperator {
    dim: usize,
    scale: f64,
    coefficient: f64,
    inner: Llt<f64>,
    mode: SolveMode,
}

impl SpdSolveOperator {
    /// Side length of the square operator.
    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn scale(&self) -> f64 {
        self.scale
    }

    pub fn coefficient(&self) -> f64 {
        self.coefficient
    }

    pub fn side(&self) -> SolveSide {
        match self.mode {
            SolveMode::Direct => SolveSide::Covariance,
            SolveMode::Woodbury { .. } => SolveSide::Gram,
        }
    }

    /// Applies `(I + c XXᵀ)⁻¹` (no scale) to `rhs` in place; `rhs` has r rows.
    pub(crate) fn solve_inner_in_place(&self, rhs: MatMut<'_, f64>) {
        self.inner.solve_in_place(rhs);
    }

    /// Overwrites `rhs` with `self · rhs`.
    pub fn apply_in_place(&self, mut rhs: MatMut<'_, f64>) {
        assert_eq!(rhs.nrows(), self.dim, "operator/rhs size mismatch");
        match &self.mode {
            SolveMode::Direct => self.inner.solve_in_place(rhs.rb_mut()),
            SolveMode::Woodbury { basis } => {
                let mut small = mat_mul(basis.as_ref(), rhs.as_ref());
                self.inner.solve_in_place(small.as_mut());
                mat_mul_into(
                    rhs.rb_mut(),
                    Accum::Add,
                    basis.transpose(),
                    small.as_ref(),
                    -self.coefficient,
                );
            }
        }
        let s = self.scale;
        for j in 0..rhs.ncols() {
            for v in rhs.rb_mut().col_mut(j).iter_mut() {
                *v *= s;
            }
        }
    }

    pub fn apply(&self, rhs: MatRef<'_, f64>) -> Mat<f64> {
        let mut out = rhs.to_owned();
        self.apply_in_place(out.as_mut());
        out
    }

    /// Dense form of the operator; only meant for small sizes and checks.
    pub fn to_dense(&self) -> DenseMatrix {
        DenseMatrix::from_mat_unchecked(
            self.apply(Mat::<f64>::identity(self.dim, self.dim).as_ref()),
        )
    }
}

/// Builds `mu⁻¹ (I + coefficient · XXᵀ)⁻¹` (covariance side) or
/// `mu⁻¹ (I + coefficient · XᵀX)⁻¹` (Gram side) for an r x M₂ matrix `X`.
pub fn make_spd_solver(
    x: &DenseMatrix,
    coefficient: f64,
    mu: f64,
    side: SolveSide,
) -> Result<SpdSolveOperator> {
    if !(coefficient > 0.0) || !coefficient.is_finite() {
        return Err(Error::invalid(format!(
            "coefficient must be positive, got {coefficient}"
        )));
    }
    if !(mu > 0.0) || !mu.is_finite() {
        return Err(Error::invalid(format!("mu must be positive, got {mu}")));
    }
    let (r, m2) = x.shape();
    if r > m2 {
        return Err(Error::dim(format!(
            "expected a wide matrix (r <= M2), got {r}x{m2}"
        )));
    }
    let mut small = Mat::<f64>::identity(r, r);
    mat_mul_into(
        small.as_mut(),
        Accum::Add,
        x.as_ref(),
        x.as_ref().transpose(),
        coefficient,
    );
    let inner = small
        .llt(Side::Lower)
        .map_err(|e| Error::Factorization(format!("cholesky: {e:?}")))?;
    let (dim, mode) = match side {
        SolveSide::Covariance => (r, SolveMode::Direct),
        SolveSide::Gram => (
            m2,
            SolveMode::Woodbury {
                basis: x.as_mat().clone(),
            },
        ),
    };
    Ok(SpdSolveOperator {
        dim,
        scale: 1.0 / mu,
        coefficient,
        inner,
        mode,
    })
}
