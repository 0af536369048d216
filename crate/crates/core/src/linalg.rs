//! Dense complex linear algebra on `nalgebra` matrices.
//!
//! Tensor products use the big-endian convention: the leftmost factor is the
//! slowest-varying index, so `|a⟩⊗|b⟩` on two qubits lives at index `2a + b`.

use nalgebra::{DMatrix, DVector, SymmetricEigen, SVD};
use num_complex::Complex64;
use thiserror::Error;

pub type C64 = Complex64;
pub type ComplexMatrix = DMatrix<C64>;
pub type ComplexVector = DVector<C64>;

/// Relative tolerance used to flag a matrix as Hermitian.
pub const HERMITIAN_TOL: f64 = 1e-12;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum LinalgError {
    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },
    #[error("matrix is not square ({rows}x{cols})")]
    NotSquare { rows: usize, cols: usize },
    #[error("matrix is not Hermitian (max |M - M†| = {deviation:e})")]
    NotHermitian { deviation: f64 },
    #[error("invalid factor permutation {0:?}")]
    InvalidPermutation(Vec<usize>),
    #[error("factor index {index} out of range for {factors} factors")]
    FactorOutOfRange { index: usize, factors: usize },
}

/// Ordered tensor-factor dimensions of a square matrix.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct TensorShape(Vec<usize>);

impl TensorShape {
    pub fn new(factor_dims: impl Into<Vec<usize>>) -> Self {
        let dims = factor_dims.into();
        assert!(
            dims.iter().all(|&d| d >= 1),
            "factor dimensions must be positive"
        );
        Self(dims)
    }

    pub fn dims(&self) -> &[usize] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn total(&self) -> usize {
        self.0.iter().product()
    }

    fn check(&self, m: &ComplexMatrix) -> Result<(), LinalgError> {
        check_square(m)?;
        if m.nrows() != self.total() {
            return Err(LinalgError::DimensionMismatch {
                expected: self.total(),
                found: m.nrows(),
            });
        }
        Ok(())
    }
}

pub fn c(re: f64, im: f64) -> C64 {
    C64::new(re, im)
}

pub fn identity(n: usize) -> ComplexMatrix {
    ComplexMatrix::identity(n, n)
}

pub fn dagger(m: &ComplexMatrix) -> ComplexMatrix {
    m.adjoint()
}

pub fn trace(m: &ComplexMatrix) -> C64 {
    m.diagonal().iter().copied().sum()
}

/// `|ψ⟩⟨ψ|`
pub fn projector(psi: &ComplexVector) -> ComplexMatrix {
    psi * psi.adjoint()
}

pub fn max_abs(m: &ComplexMatrix) -> f64 {
    m.iter().map(|z| z.norm()).fold(0.0, f64::max)
}

/// Largest entrywise deviation between two matrices of the same shape.
pub fn max_abs_diff(a: &ComplexMatrix, b: &ComplexMatrix) -> f64 {
    assert_eq!(a.shape(), b.shape(), "shape mismatch");
    a.iter()
        .zip(b.iter())
        .map(|(x, y)| (x - y).norm())
        .fold(0.0, f64::max)
}

pub fn hermitian_deviation(m: &ComplexMatrix) -> f64 {
    let n = m.nrows();
    let mut dev = 0.0_f64;
    for i in 0..n {
        for j in i..n {
            dev = dev.max((m[(i, j)] - m[(j, i)].conj()).norm());
        }
    }
    dev
}

pub fn is_hermitian(m: &ComplexMatrix) -> bool {
    m.is_square() && hermitian_deviation(m) <= HERMITIAN_TOL * max_abs(m).max(f64::MIN_POSITIVE)
}

/// `(M + M†) / 2`
pub fn hermitize(m: &ComplexMatrix) -> ComplexMatrix {
    (m + m.adjoint()).scale(0.5)
}

fn check_square(m: &ComplexMatrix) -> Result<(), LinalgError> {
    if m.is_square() {
        Ok(())
    } else {
        Err(LinalgError::NotSquare {
            rows: m.nrows(),
            cols: m.ncols(),
        })
    }
}

/// Kronecker product with `a` as the slower factor.
pub fn kron(a: &ComplexMatrix, b: &ComplexMatrix) -> ComplexMatrix {
    a.kronecker(b)
}

/// Kronecker product of several matrices, left to right.
pub fn kron_all<'a>(factors: impl IntoIterator<Item = &'a ComplexMatrix>) -> ComplexMatrix {
    factors.into_iter().fold(
        ComplexMatrix::from_element(1, 1, C64::new(1.0, 0.0)),
        |acc, f| acc.kronecker(f),
    )
}

pub fn kron_vec(a: &ComplexVector, b: &ComplexVector) -> ComplexVector {
    a.kronecker(b)
}

fn multi_index(mut flat: usize, dims: &[usize], out: &mut [usize]) {
    for k in (0..dims.len()).rev() {
        out[k] = flat % dims[k];
        flat /= dims[k];
    }
}

fn flat_index(idx: &[usize], dims: &[usize]) -> usize {
    idx.iter().zip(dims).fold(0, |acc, (&i, &d)| acc * d + i)
}

fn validate_perm(perm: &[usize], n: usize) -> Result<(), LinalgError> {
    let mut seen = vec![false; n];
    if perm.len() != n {
        return Err(LinalgError::InvalidPermutation(perm.to_vec()));
    }
    for &p in perm {
        if p >= n || seen[p] {
            return Err(LinalgError::InvalidPermutation(perm.to_vec()));
        }
        seen[p] = true;
    }
    Ok(())
}

/// Index map for reordering tensor factors: entry `i` of the result is entry
/// `map[i]` of the source. Position `k` of the new order holds old factor `perm[k]`.
pub fn permutation_index_map(
    shape: &TensorShape,
    perm: &[usize],
) -> Result<Vec<usize>, LinalgError> {
    let dims = shape.dims();
    validate_perm(perm, dims.len())?;
    let new_dims: Vec<usize> = perm.iter().map(|&p| dims[p]).collect();
    let total = shape.total();
    let mut new_idx = vec![0; dims.len()];
    let mut old_idx = vec![0; dims.len()];
    let mut map = Vec::with_capacity(total);
    for flat in 0..total {
        multi_index(flat, &new_dims, &mut new_idx);
        for (k, &p) in perm.iter().enumerate() {
            old_idx[p] = new_idx[k];
        }
        map.push(flat_index(&old_idx, dims));
    }
    Ok(map)
}

/// Inverse of a factor permutation.
pub fn inverse_permutation(perm: &[usize]) -> Vec<usize> {
    let mut inv = vec![0; perm.len()];
    for (k, &p) in perm.iter().enumerate() {
        inv[p] = k;
    }
    inv
}

/// Conjugates `m` by the unitary that reorders its tensor factors so that new
/// factor `k` is old factor `perm[k]`.
pub fn permute_factors(
    m: &ComplexMatrix,
    shape: &TensorShape,
    perm: &[usize],
) -> Result<ComplexMatrix, LinalgError> {
    shape.check(m)?;
    let map = permutation_index_map(shape, perm)?;
    let n = map.len();
    Ok(ComplexMatrix::from_fn(n, n, |i, j| m[(map[i], map[j])]))
}

/// Reorders the tensor factors of a state vector.
pub fn permute_vector(
    v: &ComplexVector,
    shape: &TensorShape,
    perm: &[usize],
) -> Result<ComplexVector, LinalgError> {
    if v.len() != shape.total() {
        return Err(LinalgError::DimensionMismatch {
            expected: shape.total(),
            found: v.len(),
        });
    }
    let map = permutation_index_map(shape, perm)?;
    Ok(ComplexVector::from_fn(map.len(), |i, _| v[map[i]]))
}

/// The permutation unitary `P` with `P (⊗_k v_k) = ⊗_k v_{perm[k]}`.
pub fn permutation_unitary(
    shape: &TensorShape,
    perm: &[usize],
) -> Result<ComplexMatrix, LinalgError> {
    let map = permutation_index_map(shape, perm)?;
    let n = map.len();
    let mut p = ComplexMatrix::zeros(n, n);
    for (i, &src) in map.iter().enumerate() {
        p[(i, src)] = C64::new(1.0, 0.0);
    }
    Ok(p)
}

/// Traces out the factors listed in `traced`. Tracing every factor yields the
/// 1×1 matrix `[Tr m]`.
pub fn partial_trace(
    m: &ComplexMatrix,
    shape: &TensorShape,
    traced: &[usize],
) -> Result<ComplexMatrix, LinalgError> {
    shape.check(m)?;
    let dims = shape.dims();
    let mut is_traced = vec![false; dims.len()];
    for &t in traced {
        if t >= dims.len() {
            return Err(LinalgError::FactorOutOfRange {
                index: t,
                factors: dims.len(),
            });
        }
        is_traced[t] = true;
    }
    let kept_dims: Vec<usize> = (0..dims.len())
        .filter(|&k| !is_traced[k])
        .map(|k| dims[k])
        .collect();
    let traced_dims: Vec<usize> = (0..dims.len())
        .filter(|&k| is_traced[k])
        .map(|k| dims[k])
        .collect();
    let kept_total: usize = kept_dims.iter().product();
    let traced_total: usize = traced_dims.iter().product();

    // index[t][k] = flat index in m of (kept multi-index k, traced multi-index t)
    let mut idx = vec![0; dims.len()];
    let mut kept_idx = vec![0; kept_dims.len()];
    let mut traced_idx = vec![0; traced_dims.len()];
    let mut index = vec![vec![0usize; kept_total]; traced_total];
    for (t, row) in index.iter_mut().enumerate() {
        multi_index(t, &traced_dims, &mut traced_idx);
        for (k, slot) in row.iter_mut().enumerate() {
            multi_index(k, &kept_dims, &mut kept_idx);
            let (mut ki, mut ti) = (0, 0);
            for f in 0..dims.len() {
                if is_traced[f] {
                    idx[f] = traced_idx[ti];
                    ti += 1;
                } else {
                    idx[f] = kept_idx[ki];
                    ki += 1;
                }
            }
            *slot = flat_index(&idx, dims);
        }
    }

    let mut out = ComplexMatrix::zeros(kept_total, kept_total);
    for row in &index {
        for (i, &fi) in row.iter().enumerate() {
            for (j, &fj) in row.iter().enumerate() {
                out[(i, j)] += m[(fi, fj)];
            }
        }
    }
    Ok(out)
}

/// Eigen-decomposition of a Hermitian matrix. Eigenvalues are returned in
/// descending order; column `k` of the second value is the matching eigenvector.
pub fn eigh(m: &ComplexMatrix) -> Result<(Vec<f64>, ComplexMatrix), LinalgError> {
    check_square(m)?;
    let dev = hermitian_deviation(m);
    if dev > HERMITIAN_TOL * max_abs(m).max(f64::MIN_POSITIVE) {
        return Err(LinalgError::NotHermitian { deviation: dev });
    }
    Ok(eigh_unchecked(&hermitize(m)))
}

/// Like [`eigh`] but without the Hermiticity check; the input is used as is.
pub(crate) fn eigh_unchecked(m: &ComplexMatrix) -> (Vec<f64>, ComplexMatrix) {
    let n = m.nrows();
    let eig = SymmetricEigen::new(m.clone());
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[b].total_cmp(&eig.eigenvalues[a]));
    let values = order.iter().map(|&k| eig.eigenvalues[k]).collect();
    let vectors = ComplexMatrix::from_fn(n, n, |i, j| eig.eigenvectors[(i, order[j])]);
    (values, vectors)
}

/// Eigenvalues of a Hermitian matrix (symmetrized first), ascending.
pub(crate) fn eigvalsh(m: &ComplexMatrix) -> Vec<f64> {
    let mut vals: Vec<f64> = hermitize(m)
        .symmetric_eigenvalues()
        .iter()
        .copied()
        .collect();
    vals.sort_by(f64::total_cmp);
    vals
}

pub fn min_eigenvalue(m: &ComplexMatrix) -> f64 {
    eigvalsh(m).first().copied().unwrap_or(0.0)
}

pub fn singular_values(m: &ComplexMatrix) -> Vec<f64> {
    SVD::new(m.clone(), false, false)
        .singular_values
        .iter()
        .copied()
        .collect()
}

/// Sum of singular values.
pub fn trace_norm(m: &ComplexMatrix) -> f64 {
    if is_hermitian(m) {
        eigvalsh(m).iter().map(|l| l.abs()).sum()
    } else {
        singular_values(m).iter().sum()
    }
}

/// Largest singular value.
pub fn operator_norm(m: &ComplexMatrix) -> f64 {
    if m.is_empty() {
        return 0.0;
    }
    if is_hermitian(m) {
        eigvalsh(m).iter().fold(0.0, |acc, l| acc.max(l.abs()))
    } else {
        singular_values(m).iter().copied().fold(0.0, f64::max)
    }
}

/// Computational basis vector `|index⟩` in dimension `dim`.
pub fn basis_vector(dim: usize, index: usize) -> ComplexVector {
    let mut v = ComplexVector::zeros(dim);
    v[index] = C64::new(1.0, 0.0);
    v
}

/// `|i⟩⟨j|` in dimension `dim`.
pub fn unit_matrix(dim: usize, i: usize, j: usize) -> ComplexMatrix {
    let mut m = ComplexMatrix::zeros(dim, dim);
    m[(i, j)] = C64::new(1.0, 0.0);
    m
}

pub fn pauli_x() -> ComplexMatrix {
    ComplexMatrix::from_row_slice(2, 2, &[c(0., 0.), c(1., 0.), c(1., 0.), c(0., 0.)])
}

pub fn pauli_y() -> ComplexMatrix {
    ComplexMatrix::from_row_slice(2, 2, &[c(0., 0.), c(0., -1.), c(0., 1.), c(0., 0.)])
}

pub fn pauli_z() -> ComplexMatrix {
    ComplexMatrix::from_row_slice(2, 2, &[c(1., 0.), c(0., 0.), c(0., 0.), c(-1., 0.)])
}

pub fn diag_real(values: &[f64]) -> ComplexMatrix {
    let n = values.len();
    ComplexMatrix::from_fn(n, n, |i, j| {
        if i == j {
            C64::new(values[i], 0.0)
        } else {
            C64::new(0.0, 0.0)
        }
    })
}

/// Real inner product `Re Tr(A† B)`.
pub fn inner(a: &ComplexMatrix, b: &ComplexMatrix) -> f64 {
    a.iter()
        .zip(b.iter())
        .map(|(x, y)| x.re * y.re + x.im * y.im)
        .sum()
}
