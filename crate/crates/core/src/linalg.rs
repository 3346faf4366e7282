//! Small dense linear-algebra helpers on top of nalgebra: sorted Hermitian
//! eigendecompositions, sorted SVDs with a full right basis, numerical null
//! spaces and Cholesky-based whitening.

use alloc::vec::Vec;

use nalgebra::{ComplexField, DMatrix, DVector};

use crate::{CMatrix, Error, Result, C64};

/// Eigendecomposition of a Hermitian matrix, eigenvalues sorted nonincreasing.
#[derive(Debug, Clone)]
pub struct HermitianEigen {
    pub values: Vec<f64>,
    /// Columns are the eigenvectors, in the same order as `values`.
    pub vectors: CMatrix,
}

/// Singular value decomposition `M = U diag(s) V^H`, singular values sorted
/// nonincreasing.
#[derive(Debug, Clone)]
pub struct Svd {
    pub u: CMatrix,
    pub singular_values: Vec<f64>,
    /// Right singular basis. Square (`cols x cols`) when built through
    /// [`svd_full_right`].
    pub v: CMatrix,
}

/// `(M + M^H) / 2`.
pub fn hermitian_part(m: &CMatrix) -> CMatrix {
    (m + m.adjoint()) * C64::new(0.5, 0.0)
}

/// Largest entry magnitude; 0 for an empty matrix.
pub fn max_abs(m: &CMatrix) -> f64 {
    m.iter().fold(0.0, |acc, z| acc.max(z.modulus()))
}

/// Real trace of a product `Tr(A B)` without forming the product.
pub fn trace_product(a: &CMatrix, b: &CMatrix) -> C64 {
    debug_assert_eq!(a.ncols(), b.nrows());
    debug_assert_eq!(a.nrows(), b.ncols());
    let mut acc = C64::new(0.0, 0.0);
    for i in 0..a.nrows() {
        for k in 0..a.ncols() {
            acc += a[(i, k)] * b[(k, i)];
        }
    }
    acc
}

pub fn hermitian_eigen(m: &CMatrix) -> HermitianEigen {
    let eig = hermitian_part(m).symmetric_eigen();
    let mut order: Vec<usize> = (0..eig.eigenvalues.len()).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[b].total_cmp(&eig.eigenvalues[a]));
    let values = order.iter().map(|&k| eig.eigenvalues[k]).collect();
    let vectors = CMatrix::from_fn(m.nrows(), order.len(), |r, c| eig.eigenvectors[(r, order[c])]);
    HermitianEigen { values, vectors }
}

/// Thin SVD, sorted.
pub fn svd(m: &CMatrix) -> Svd {
    let dec = m.clone().svd(true, true);
    let u = dec.u.expect("requested U");
    let v_t = dec.v_t.expect("requested V^H");
    let mut order: Vec<usize> = (0..dec.singular_values.len()).collect();
    order.sort_by(|&a, &b| dec.singular_values[b].total_cmp(&dec.singular_values[a]));
    Svd {
        u: CMatrix::from_fn(u.nrows(), order.len(), |r, c| u[(r, order[c])]),
        singular_values: order.iter().map(|&k| dec.singular_values[k]).collect(),
        v: CMatrix::from_fn(v_t.ncols(), order.len(), |r, c| v_t[(order[c], r)].conj()),
    }
}

/// SVD whose right basis spans the whole input space. Wide matrices are
/// padded with zero rows so that `v` is `cols x cols`; the padding adds exact
/// zero singular values, which is what a null-space extraction wants.
pub fn svd_full_right(m: &CMatrix) -> Svd {
    if m.nrows() >= m.ncols() {
        return svd(m);
    }
    let mut padded = CMatrix::zeros(m.ncols(), m.ncols());
    padded.view_mut((0, 0), (m.nrows(), m.ncols())).copy_from(m);
    svd(&padded)
}

/// Rank threshold used for null-space extraction:
/// `max(rows, cols) * eps * sigma_max * 1e3`.
pub fn rank_tolerance(rows: usize, cols: usize, sigma_max: f64) -> f64 {
    rows.max(cols) as f64 * f64::EPSILON * sigma_max * 1e3
}

/// Orthonormal basis of the numerical null space of `m`, one column per
/// basis vector. Fails unless the null space has exactly `expected`
/// dimensions.
///
/// The null space of `m` is the orthogonal complement of the column space of
/// `m^H`. A column-pivoted QR of `m^H`, padded with zero columns to a square
/// matrix so that `Q` is complete, reveals the rank on the diagonal of `R`;
/// the trailing columns of `Q` span the complement.
pub fn null_space(m: &CMatrix, expected: usize) -> Result<CMatrix> {
    let n = m.ncols();
    let mut padded = CMatrix::zeros(n, n.max(m.nrows()));
    padded.view_mut((0, 0), (n, m.nrows())).copy_from(&m.adjoint());
    let qr = padded.col_piv_qr();
    let r = qr.r();
    let diag: Vec<f64> = (0..n.min(r.ncols())).map(|k| r[(k, k)].modulus()).collect();
    let largest = diag.first().copied().unwrap_or(0.0);
    let tol = rank_tolerance(m.nrows(), n, largest);
    let rank = diag.iter().filter(|&&d| d > tol).count();
    let found = n - rank;
    if found != expected {
        return Err(Error::NullspaceDimensionMismatch { expected, found });
    }
    Ok(qr.q().columns(rank, found).into_owned())
}

/// Eigenvalues of the Gram matrix `G^H cov^{-1} G` sorted nonincreasing, with
/// their eigenvectors. These are the squared singular values and the right
/// singular basis of `cov^{-1/2} G` for any square root of `cov`, obtained
/// here through a Cholesky factor instead of an eigendecomposition of `cov`.
pub fn whitened_gram_eigen(cov: &CMatrix, g: &CMatrix) -> Result<HermitianEigen> {
    if cov.nrows() != g.nrows() {
        return Err(Error::DimensionMismatch { expected: cov.nrows(), found: g.nrows() });
    }
    let chol = hermitian_part(cov)
        .cholesky()
        .ok_or(Error::NotPositiveDefinite { eigenvalue: f64::NAN, floor: 0.0 })?;
    let x = chol
        .l_dirty()
        .solve_lower_triangular(g)
        .ok_or(Error::NotPositiveDefinite { eigenvalue: 0.0, floor: 0.0 })?;
    let mut eig = hermitian_eigen(&(x.adjoint() * x));
    for v in eig.values.iter_mut() {
        *v = v.max(0.0);
    }
    Ok(eig)
}

/// Diagonal complex matrix from real entries.
pub fn real_diag(d: &[f64]) -> CMatrix {
    CMatrix::from_diagonal(&DVector::from_iterator(d.len(), d.iter().map(|&x| C64::new(x, 0.0))))
}

/// Identity scaled by a real factor.
pub fn scaled_identity(n: usize, s: f64) -> CMatrix {
    DMatrix::from_diagonal_element(n, n, C64::new(s, 0.0))
}

/// Real part of the trace of a square matrix.
pub fn real_trace(m: &CMatrix) -> f64 {
    m.diagonal().iter().map(|z| z.real()).sum()
}
