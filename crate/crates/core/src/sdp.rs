//! Primal-dual interior-point solver for linear matrix inequalities over
//! complex Hermitian blocks.
//!
//! A problem has real scalar variables `w` and Hermitian matrix variables `Z_k`:
//!
//! ```text
//! minimize    cᵀw
//! subject to  S_b = G_b + Σ_j w_j F_bj + Σ_k σ_bk Z_k ⪰ 0     (every block b)
//!             Σ_j e_rj w_j + Σ_k ⟨R_rk, Z_k⟩ = f_r            (every row r)
//! ```
//!
//! Its dual is `maximize −Σ_b ⟨G_b, X_b⟩ + fᵀλ` subject to
//! `Σ_b A_b*(X_b) + Eᵀλ = c` and `X_b ⪰ 0`. Iterates follow the
//! Nesterov-Todd direction with a Mehrotra predictor-corrector.
//!
//! Matrix variables are either expanded into scalar coordinates (dense Schur
//! complement) or, when a single matrix variable appears as `±Z` in exactly two
//! blocks, eliminated through a simultaneous diagonalization of the two scaling
//! matrices, which keeps the linear algebra at `O(N³)` in the block size.

use std::f64::consts::FRAC_1_SQRT_2;

use nalgebra::{DMatrix, DVector};
use thiserror::Error;

use crate::linalg::{self, c, hermitize, identity, inner, ComplexMatrix, LinalgError, C64};

pub type RealMatrix = DMatrix<f64>;
pub type RealVector = DVector<f64>;

/// Matrix variables at least this large use the structured Newton solve
/// under [`NewtonMode::Auto`].
pub const STRUCTURED_MIN_DIM: usize = 24;

#[derive(Debug, Error)]
pub enum SdpError {
    #[error("invalid problem: {0}")]
    InvalidProblem(String),
    #[error("numerical failure: {0}")]
    Numerical(String),
    #[error(transparent)]
    Linalg(#[from] LinalgError),
}

/// Hermitian coefficient matrix stored as a list of nonzero entries (both triangles).
#[derive(Debug, Clone, PartialEq)]
pub struct SparseHermitian {
    dim: usize,
    entries: Vec<(usize, usize, C64)>,
}

impl SparseHermitian {
    pub fn new(dim: usize, entries: Vec<(usize, usize, C64)>) -> Self {
        debug_assert!(entries.iter().all(|&(p, q, _)| p < dim && q < dim));
        Self { dim, entries }
    }

    pub fn from_dense(m: &ComplexMatrix) -> Self {
        let mut entries = Vec::new();
        for q in 0..m.ncols() {
            for p in 0..m.nrows() {
                let v = m[(p, q)];
                if v.re != 0.0 || v.im != 0.0 {
                    entries.push((p, q, v));
                }
            }
        }
        Self {
            dim: m.nrows(),
            entries,
        }
    }

    pub fn identity(dim: usize) -> Self {
        Self::new(dim, (0..dim).map(|i| (i, i, c(1.0, 0.0))).collect())
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn entries(&self) -> &[(usize, usize, C64)] {
        &self.entries
    }

    pub fn nnz(&self) -> usize {
        self.entries.len()
    }

    pub fn scaled(&self, a: f64) -> Self {
        Self {
            dim: self.dim,
            entries: self
                .entries
                .iter()
                .map(|&(p, q, v)| (p, q, v * a))
                .collect(),
        }
    }

    pub fn to_dense(&self) -> ComplexMatrix {
        let mut m = ComplexMatrix::zeros(self.dim, self.dim);
        self.add_to(&mut m, 1.0);
        m
    }

    /// `target += a · self`
    pub fn add_to(&self, target: &mut ComplexMatrix, a: f64) {
        for &(p, q, v) in &self.entries {
            target[(p, q)] += v * a;
        }
    }

    /// `Re Tr(self · y)`, the real inner product with a Hermitian `y`.
    pub fn inner(&self, y: &ComplexMatrix) -> f64 {
        self.entries
            .iter()
            .map(|&(p, q, v)| v.re * y[(p, q)].re + v.im * y[(p, q)].im)
            .sum()
    }

    /// `left · self · left†`
    pub fn congruence(&self, left: &ComplexMatrix) -> ComplexMatrix {
        let m = left.nrows();
        if self.entries.len() > 2 * self.dim {
            return left * self.to_dense() * left.adjoint();
        }
        let mut out = ComplexMatrix::zeros(m, m);
        let lsl = left.as_slice();
        let out_sl = out.as_mut_slice();
        for &(p, q, v) in &self.entries {
            let col_p = &lsl[p * m..(p + 1) * m];
            let col_q = &lsl[q * m..(q + 1) * m];
            for j in 0..m {
                let f = v * col_q[j].conj();
                if f.re == 0.0 && f.im == 0.0 {
                    continue;
                }
                let dst = &mut out_sl[j * m..(j + 1) * m];
                for (d, &l) in dst.iter_mut().zip(col_p) {
                    *d += l * f;
                }
            }
        }
        out
    }
}

/// Orthonormal basis of `n×n` Hermitian matrices under `⟨A, B⟩ = Re Tr(A†B)`:
/// `E_ii`, `(E_ij + E_ji)/√2` and `i(E_ij − E_ji)/√2` for `i < j`.
pub fn hermitian_basis(n: usize) -> Vec<SparseHermitian> {
    let r = FRAC_1_SQRT_2;
    let mut out = Vec::with_capacity(n * n);
    for i in 0..n {
        out.push(SparseHermitian::new(n, vec![(i, i, c(1.0, 0.0))]));
        for j in i + 1..n {
            out.push(SparseHermitian::new(
                n,
                vec![(i, j, c(r, 0.0)), (j, i, c(r, 0.0))],
            ));
            out.push(SparseHermitian::new(
                n,
                vec![(i, j, c(0.0, r)), (j, i, c(0.0, -r))],
            ));
        }
    }
    out
}

/// Coordinates of a Hermitian matrix in [`hermitian_basis`].
pub fn hermitian_coordinates(m: &ComplexMatrix) -> Vec<f64> {
    let n = m.nrows();
    let s = std::f64::consts::SQRT_2;
    let mut out = Vec::with_capacity(n * n);
    for i in 0..n {
        out.push(m[(i, i)].re);
        for j in i + 1..n {
            let avg = (m[(i, j)] + m[(j, i)].conj()) * 0.5;
            out.push(s * avg.re);
            out.push(s * avg.im);
        }
    }
    out
}

/// Inverse of [`hermitian_coordinates`].
pub fn from_hermitian_coordinates(n: usize, coords: &[f64]) -> ComplexMatrix {
    assert_eq!(coords.len(), n * n, "need n² coordinates");
    let r = FRAC_1_SQRT_2;
    let mut m = ComplexMatrix::zeros(n, n);
    let mut k = 0;
    for i in 0..n {
        m[(i, i)] = c(coords[k], 0.0);
        k += 1;
        for j in i + 1..n {
            let z = c(r * coords[k], r * coords[k + 1]);
            m[(i, j)] = z;
            m[(j, i)] = z.conj();
            k += 2;
        }
    }
    m
}

/// `[[Re h, −Im h], [Im h, Re h]]`, PSD exactly when `h` is.
pub fn embed_hermitian(h: &ComplexMatrix) -> Result<RealMatrix, LinalgError> {
    if h.nrows() != h.ncols() {
        return Err(LinalgError::NotSquare {
            rows: h.nrows(),
            cols: h.ncols(),
        });
    }
    let dev = linalg::hermitian_deviation(h);
    if dev > linalg::HERMITIAN_TOL * linalg::max_abs(h).max(f64::MIN_POSITIVE) {
        return Err(LinalgError::NotHermitian { deviation: dev });
    }
    let n = h.nrows();
    Ok(RealMatrix::from_fn(2 * n, 2 * n, |i, j| {
        let z = h[(i % n, j % n)];
        match (i < n, j < n) {
            (true, true) | (false, false) => z.re,
            (true, false) => -z.im,
            (false, true) => z.im,
        }
    }))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct ScalarVar(pub usize);
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct MatrixVar(pub usize);
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct BlockId(pub usize);

#[derive(Debug, Clone)]
struct Block {
    constant: ComplexMatrix,
    scalar_terms: Vec<(usize, SparseHermitian)>,
    matrix_terms: Vec<(usize, f64)>,
}

impl Block {
    fn dim(&self) -> usize {
        self.constant.nrows()
    }
}

#[derive(Debug, Clone)]
struct Equality {
    scalar_terms: Vec<(usize, f64)>,
    matrix_terms: Vec<(usize, SparseHermitian)>,
    rhs: f64,
}

/// A linear matrix inequality program; see the module documentation.
#[derive(Debug, Clone, Default)]
pub struct SdpProblem {
    costs: Vec<f64>,
    matrix_dims: Vec<usize>,
    blocks: Vec<Block>,
    equalities: Vec<Equality>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum NewtonMode {
    /// Structured elimination for a single large matrix variable, dense otherwise.
    Auto,
    Dense,
    Structured,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SolverOptions {
    /// Relative duality gap `|p − d| / max(1, |p|)` at termination.
    pub tol: f64,
    /// Largest absolute primal and dual residual entry at termination.
    pub feas_tol: f64,
    pub max_iterations: usize,
    pub newton: NewtonMode,
}

impl Default for SolverOptions {
    fn default() -> Self {
        Self {
            tol: 1e-7,
            feas_tol: 1e-8,
            max_iterations: 100,
            newton: NewtonMode::Auto,
        }
    }
}

impl SolverOptions {
    pub fn with_tol(tol: f64) -> Self {
        Self {
            tol,
            feas_tol: (tol * 0.1).min(1e-8),
            ..Self::default()
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize)]
#[serde(rename_all = "snake_case")]
pub enum SdpStatus {
    Optimal,
    MaxIterations,
    Infeasible,
}

impl std::fmt::Display for SdpStatus {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Self::Optimal => "optimal",
            Self::MaxIterations => "max_iterations",
            Self::Infeasible => "infeasible",
        })
    }
}

#[derive(Debug, Clone)]
pub struct SdpSolution {
    pub status: SdpStatus,
    pub primal_value: f64,
    pub dual_value: f64,
    /// `|primal − dual| / max(1, |primal|)`
    pub gap: f64,
    pub scalars: Vec<f64>,
    pub matrices: Vec<ComplexMatrix>,
    /// Block values `S_b`.
    pub slacks: Vec<ComplexMatrix>,
    /// Dual block variables `X_b`.
    pub duals: Vec<ComplexMatrix>,
    pub multipliers: Vec<f64>,
    pub primal_infeasibility: f64,
    pub dual_infeasibility: f64,
    pub iterations: usize,
}

impl SdpSolution {
    pub fn scalar(&self, v: ScalarVar) -> f64 {
        self.scalars[v.0]
    }

    pub fn matrix(&self, z: MatrixVar) -> &ComplexMatrix {
        &self.matrices[z.0]
    }
}

impl SdpProblem {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn add_scalar(&mut self, cost: f64) -> ScalarVar {
        self.costs.push(cost);
        ScalarVar(self.costs.len() - 1)
    }

    pub fn add_scalars(&mut self, n: usize, cost: f64) -> Vec<ScalarVar> {
        (0..n).map(|_| self.add_scalar(cost)).collect()
    }

    pub fn add_matrix_var(&mut self, dim: usize) -> MatrixVar {
        self.matrix_dims.push(dim);
        MatrixVar(self.matrix_dims.len() - 1)
    }

    /// New PSD block with the given Hermitian constant term.
    pub fn add_block(&mut self, constant: ComplexMatrix) -> BlockId {
        self.blocks.push(Block {
            constant,
            scalar_terms: Vec::new(),
            matrix_terms: Vec::new(),
        });
        BlockId(self.blocks.len() - 1)
    }

    pub fn add_zero_block(&mut self, dim: usize) -> BlockId {
        self.add_block(ComplexMatrix::zeros(dim, dim))
    }

    pub fn add_scalar_term(&mut self, b: BlockId, v: ScalarVar, coeff: SparseHermitian) {
        self.blocks[b.0].scalar_terms.push((v.0, coeff));
    }

    /// Adds `sign · Z` to a block of the same dimension as `Z`.
    pub fn add_matrix_term(&mut self, b: BlockId, z: MatrixVar, sign: f64) {
        self.blocks[b.0].matrix_terms.push((z.0, sign));
    }

    pub fn add_equality(
        &mut self,
        scalar_terms: Vec<(ScalarVar, f64)>,
        matrix_terms: Vec<(MatrixVar, SparseHermitian)>,
        rhs: f64,
    ) {
        self.equalities.push(Equality {
            scalar_terms: scalar_terms.into_iter().map(|(v, a)| (v.0, a)).collect(),
            matrix_terms: matrix_terms.into_iter().map(|(z, r)| (z.0, r)).collect(),
            rhs,
        });
    }

    pub fn num_scalars(&self) -> usize {
        self.costs.len()
    }

    pub fn num_blocks(&self) -> usize {
        self.blocks.len()
    }

    pub fn num_equalities(&self) -> usize {
        self.equalities.len()
    }

    /// Multiplies the objective by `factor`.
    pub fn scale_objective(&mut self, factor: f64) {
        for c in &mut self.costs {
            *c *= factor;
        }
    }

    pub fn validate(&self) -> Result<(), SdpError> {
        let bad = |msg: String| Err(SdpError::InvalidProblem(msg));
        if self.blocks.is_empty() {
            return bad("no blocks".into());
        }
        if self.costs.iter().any(|c| !c.is_finite()) {
            return bad("non-finite cost".into());
        }
        for (b, block) in self.blocks.iter().enumerate() {
            let dim = block.dim();
            if dim == 0 || block.constant.ncols() != dim {
                return bad(format!("block {b} is not square and nonempty"));
            }
            if block
                .constant
                .iter()
                .any(|z| !z.re.is_finite() || !z.im.is_finite())
            {
                return bad(format!("block {b} has non-finite data"));
            }
            if linalg::hermitian_deviation(&block.constant)
                > 1e-10 * linalg::max_abs(&block.constant).max(1.0)
            {
                return bad(format!("block {b} constant is not Hermitian"));
            }
            for (v, f) in &block.scalar_terms {
                if *v >= self.costs.len() {
                    return bad(format!("block {b} references unknown scalar {v}"));
                }
                if f.dim != dim {
                    return bad(format!("block {b} coefficient has dimension {}", f.dim));
                }
                if f.entries
                    .iter()
                    .any(|&(_, _, z)| !z.re.is_finite() || !z.im.is_finite())
                {
                    return bad(format!("block {b} has non-finite data"));
                }
            }
            for (z, _) in &block.matrix_terms {
                if *z >= self.matrix_dims.len() || self.matrix_dims[*z] != dim {
                    return bad(format!("block {b} matrix term does not fit"));
                }
            }
        }
        for (r, eq) in self.equalities.iter().enumerate() {
            if !eq.rhs.is_finite() || eq.scalar_terms.iter().any(|(_, a)| !a.is_finite()) {
                return bad(format!("equality {r} has non-finite data"));
            }
            if eq.scalar_terms.iter().any(|(v, _)| *v >= self.costs.len()) {
                return bad(format!("equality {r} references unknown scalar"));
            }
            for (z, m) in &eq.matrix_terms {
                if *z >= self.matrix_dims.len() || self.matrix_dims[*z] != m.dim {
                    return bad(format!("equality {r} matrix term does not fit"));
                }
            }
        }
        Ok(())
    }

    pub fn solve(&self, opts: &SolverOptions) -> Result<SdpSolution, SdpError> {
        self.validate()?;
        let structured = match opts.newton {
            NewtonMode::Dense => false,
            NewtonMode::Structured => {
                if self.structured_layout().is_none() {
                    return Err(SdpError::InvalidProblem(
                        "structured solve needs one matrix variable appearing as ±Z in exactly two blocks".into(),
                    ));
                }
                true
            }
            NewtonMode::Auto => self
                .structured_layout()
                .is_some_and(|_| self.matrix_dims[0] >= STRUCTURED_MIN_DIM),
        };
        if structured {
            let layout = self.structured_layout().expect("checked above");
            return Ipm::new(self, Some(layout)).run(opts);
        }
        if self.matrix_dims.is_empty() {
            return Ipm::new(self, None).run(opts);
        }
        let (expanded, coords) = self.expand_matrix_vars();
        let mut sol = Ipm::new(&expanded, None).run(opts)?;
        let n_scalars = self.costs.len();
        sol.matrices = coords
            .iter()
            .zip(&self.matrix_dims)
            .map(|(idx, &dim)| {
                let vals: Vec<f64> = idx.iter().map(|&k| sol.scalars[k]).collect();
                from_hermitian_coordinates(dim, &vals)
            })
            .collect();
        sol.scalars.truncate(n_scalars);
        Ok(sol)
    }

    /// `(z, b1, σ1, b2, σ2)` when the single matrix variable sits in exactly two blocks.
    fn structured_layout(&self) -> Option<Layout> {
        if self.matrix_dims.len() != 1 {
            return None;
        }
        let mut hits = Vec::new();
        for (b, block) in self.blocks.iter().enumerate() {
            match block.matrix_terms.as_slice() {
                [] => {}
                [(0, s)] if s.abs() == 1.0 => hits.push((b, *s)),
                _ => return None,
            }
        }
        match hits.as_slice() {
            [(b1, s1), (b2, s2)] => Some(Layout {
                b1: *b1,
                s1: *s1,
                b2: *b2,
                s2: *s2,
            }),
            _ => None,
        }
    }

    /// Replaces each matrix variable by scalar coordinates in [`hermitian_basis`].
    fn expand_matrix_vars(&self) -> (SdpProblem, Vec<Vec<usize>>) {
        let mut out = SdpProblem {
            costs: self.costs.clone(),
            matrix_dims: Vec::new(),
            blocks: Vec::with_capacity(self.blocks.len()),
            equalities: Vec::with_capacity(self.equalities.len()),
        };
        let mut coords = Vec::new();
        let mut bases = Vec::new();
        for &dim in &self.matrix_dims {
            let start = out.costs.len();
            out.costs.extend(std::iter::repeat_n(0.0, dim * dim));
            coords.push((start..start + dim * dim).collect::<Vec<_>>());
            bases.push(hermitian_basis(dim));
        }
        for block in &self.blocks {
            let mut terms = block.scalar_terms.clone();
            for &(z, sign) in &block.matrix_terms {
                for (k, bk) in bases[z].iter().enumerate() {
                    terms.push((coords[z][k], bk.scaled(sign)));
                }
            }
            out.blocks.push(Block {
                constant: block.constant.clone(),
                scalar_terms: terms,
                matrix_terms: Vec::new(),
            });
        }
        for eq in &self.equalities {
            let mut terms = eq.scalar_terms.clone();
            for (z, r) in &eq.matrix_terms {
                let dense = r.to_dense();
                for (k, bk) in bases[*z].iter().enumerate() {
                    let a = bk.inner(&dense);
                    if a != 0.0 {
                        terms.push((coords[*z][k], a));
                    }
                }
            }
            out.equalities.push(Equality {
                scalar_terms: terms,
                matrix_terms: Vec::new(),
                rhs: eq.rhs,
            });
        }
        (out, coords)
    }

    fn block_linear(&self, b: usize, w: &RealVector, z: &[ComplexMatrix]) -> ComplexMatrix {
        let block = &self.blocks[b];
        let mut out = ComplexMatrix::zeros(block.dim(), block.dim());
        for (v, f) in &block.scalar_terms {
            if w[*v] != 0.0 {
                f.add_to(&mut out, w[*v]);
            }
        }
        for &(k, sign) in &block.matrix_terms {
            out += &z[k] * c(sign, 0.0);
        }
        out
    }

    fn adjoint_blocks(&self, xs: &[ComplexMatrix]) -> (RealVector, Vec<ComplexMatrix>) {
        let mut gw = RealVector::zeros(self.costs.len());
        let mut gz: Vec<ComplexMatrix> = self
            .matrix_dims
            .iter()
            .map(|&d| ComplexMatrix::zeros(d, d))
            .collect();
        for (block, x) in self.blocks.iter().zip(xs) {
            for (v, f) in &block.scalar_terms {
                gw[*v] += f.inner(x);
            }
            for &(k, sign) in &block.matrix_terms {
                gz[k] += x * c(sign, 0.0);
            }
        }
        (gw, gz)
    }

    fn eq_apply(&self, w: &RealVector, z: &[ComplexMatrix]) -> RealVector {
        RealVector::from_iterator(
            self.equalities.len(),
            self.equalities.iter().map(|eq| {
                eq.scalar_terms.iter().map(|&(v, a)| a * w[v]).sum::<f64>()
                    + eq.matrix_terms
                        .iter()
                        .map(|(k, r)| r.inner(&z[*k]))
                        .sum::<f64>()
            }),
        )
    }

    fn eq_adjoint(&self, lam: &RealVector) -> (RealVector, Vec<ComplexMatrix>) {
        let mut gw = RealVector::zeros(self.costs.len());
        let mut gz: Vec<ComplexMatrix> = self
            .matrix_dims
            .iter()
            .map(|&d| ComplexMatrix::zeros(d, d))
            .collect();
        for (eq, &l) in self.equalities.iter().zip(lam.iter()) {
            for &(v, a) in &eq.scalar_terms {
                gw[v] += a * l;
            }
            for (k, r) in &eq.matrix_terms {
                r.add_to(&mut gz[*k], l);
            }
        }
        (gw, gz)
    }

    fn eq_rhs(&self) -> RealVector {
        RealVector::from_iterator(self.equalities.len(), self.equalities.iter().map(|e| e.rhs))
    }

    /// Dense scalar block of the Schur complement, `Σ_b ⟨F_bi, W_b F_bj W_b⟩`.
    fn scalar_schur(&self, ws: &[ComplexMatrix]) -> RealMatrix {
        let n = self.costs.len();
        let mut m = RealMatrix::zeros(n, n);
        for (block, w) in self.blocks.iter().zip(ws) {
            for (j, fj) in &block.scalar_terms {
                let y = fj.congruence(w);
                for (i, fi) in &block.scalar_terms {
                    m[(*i, *j)] += fi.inner(&y);
                }
            }
        }
        let mt = m.transpose();
        (m + mt) * 0.5
    }

    fn eq_matrix_scalars(&self) -> RealMatrix {
        let mut e = RealMatrix::zeros(self.equalities.len(), self.costs.len());
        for (r, eq) in self.equalities.iter().enumerate() {
            for &(v, a) in &eq.scalar_terms {
                e[(r, v)] += a;
            }
        }
        e
    }
}

#[derive(Debug, Clone, Copy)]
struct Layout {
    b1: usize,
    s1: f64,
    b2: usize,
    s2: f64,
}

#[derive(Clone)]
struct Point {
    w: RealVector,
    z: Vec<ComplexMatrix>,
    lam: RealVector,
    s: Vec<ComplexMatrix>,
    x: Vec<ComplexMatrix>,
}

impl Point {
    fn is_finite(&self) -> bool {
        let fin = |m: &ComplexMatrix| m.iter().all(|z| z.re.is_finite() && z.im.is_finite());
        self.w.iter().chain(self.lam.iter()).all(|v| v.is_finite())
            && self.z.iter().chain(&self.s).chain(&self.x).all(fin)
    }
}

struct Residuals {
    rp: Vec<ComplexMatrix>,
    re: RealVector,
    rd_w: RealVector,
    rd_z: Vec<ComplexMatrix>,
}

impl Residuals {
    fn primal_max(&self) -> f64 {
        self.rp
            .iter()
            .map(linalg::max_abs)
            .chain(self.re.iter().map(|v| v.abs()))
            .fold(0.0, f64::max)
    }

    fn dual_max(&self) -> f64 {
        self.rd_w
            .iter()
            .map(|v| v.abs())
            .chain(self.rd_z.iter().map(linalg::max_abs))
            .fold(0.0, f64::max)
    }
}

/// Nesterov-Todd scaling of one block: `W = G G†` with `G†SG = G⁻¹XG⁻† = Σ`.
struct Scaling {
    g: ComplexMatrix,
    w: ComplexMatrix,
    sigma: Vec<f64>,
}

/// Some `L` with `L L† = m`: Cholesky, or the spectral square root if that fails.
fn psd_factor(m: &ComplexMatrix) -> ComplexMatrix {
    let h = hermitize(m);
    if let Some(ch) = nalgebra::Cholesky::new(h.clone()) {
        return ch.l();
    }
    let (vals, vecs) = linalg::eigh_unchecked(&h);
    let floor = vals
        .first()
        .copied()
        .unwrap_or(1.0)
        .abs()
        .max(f64::MIN_POSITIVE)
        * 1e-16;
    let mut out = vecs;
    for (k, &l) in vals.iter().enumerate() {
        let s = l.max(floor).sqrt();
        for i in 0..out.nrows() {
            out[(i, k)] *= s;
        }
    }
    out
}

fn nt_scaling(s: &ComplexMatrix, x: &ComplexMatrix) -> Result<Scaling, SdpError> {
    let ls = psd_factor(s);
    let lx = psd_factor(x);
    let prod = ls.adjoint() * &lx;
    let svd = prod.svd(false, true);
    let v_t = svd
        .v_t
        .ok_or_else(|| SdpError::Numerical("SVD failed in scaling".into()))?;
    let sigma: Vec<f64> = svd
        .singular_values
        .iter()
        .map(|&v| v.max(f64::MIN_POSITIVE))
        .collect();
    let mut g = lx * v_t.adjoint();
    for (k, &sv) in sigma.iter().enumerate() {
        let f = 1.0 / sv.sqrt();
        for i in 0..g.nrows() {
            g[(i, k)] *= f;
        }
    }
    let w = hermitize(&(&g * g.adjoint()));
    Ok(Scaling { g, w, sigma })
}

/// Largest `α` with `diag(σ) + α·d ⪰ 0` (infinite when `d ⪰ 0`).
fn max_step(sigma: &[f64], d: &ComplexMatrix) -> f64 {
    let n = sigma.len();
    let scaled = ComplexMatrix::from_fn(n, n, |i, j| d[(i, j)] / (sigma[i] * sigma[j]).sqrt());
    let lmin = linalg::min_eigenvalue(&scaled);
    if lmin >= 0.0 {
        f64::INFINITY
    } else {
        -1.0 / lmin
    }
}

fn diag_inner(
    sigma: &[f64],
    alpha_x: f64,
    dx: &ComplexMatrix,
    alpha_s: f64,
    ds: &ComplexMatrix,
) -> f64 {
    // ⟨Σ + α_x dX, Σ + α_s dS⟩
    let n = sigma.len();
    let mut acc = 0.0;
    for i in 0..n {
        acc += sigma[i] * sigma[i] + sigma[i] * (alpha_x * dx[(i, i)].re + alpha_s * ds[(i, i)].re);
    }
    acc + alpha_x * alpha_s * inner(dx, ds)
}

/// `L_Σ⁻¹(R)`: solves `(ΣY + YΣ)/2 = R` for diagonal `Σ`.
fn lyap_inverse(sigma: &[f64], r: &ComplexMatrix) -> ComplexMatrix {
    ComplexMatrix::from_fn(r.nrows(), r.ncols(), |i, j| {
        r[(i, j)] * (2.0 / (sigma[i] + sigma[j]))
    })
}

struct Direction {
    w: RealVector,
    z: Vec<ComplexMatrix>,
    lam: RealVector,
    s: Vec<ComplexMatrix>,
    x: Vec<ComplexMatrix>,
}

enum Newton {
    Dense(nalgebra::LU<f64, nalgebra::Dyn, nalgebra::Dyn>),
    Structured(Box<StructuredFactor>),
}

struct StructuredFactor {
    t: ComplexMatrix,
    t_adj: ComplexMatrix,
    weights: RealMatrix,
    c_items: Vec<usize>,
    r_items: Vec<usize>,
    phi: RealMatrix,
    lu: nalgebra::LU<f64, nalgebra::Dyn, nalgebra::Dyn>,
    n_scalars: usize,
}

/// Real coordinates of a Hermitian `X̂` weighted by `√D⁻¹`, so that
/// `φ(X̂)·φ(Ŷ) = Re Σ conj(X̂_ab) Ŷ_ab / D_ab`.
fn weighted_coords(xh: &ComplexMatrix, weights: &RealMatrix, out: &mut [f64]) {
    let n = xh.nrows();
    let mut k = 0;
    for a in 0..n {
        out[k] = xh[(a, a)].re * weights[(a, a)];
        k += 1;
        for b in a + 1..n {
            let z = (xh[(a, b)] + xh[(b, a)].conj()) * 0.5;
            let s = weights[(a, b)] * std::f64::consts::SQRT_2;
            out[k] = z.re * s;
            out[k + 1] = z.im * s;
            k += 2;
        }
    }
}

struct Ipm<'a> {
    p: &'a SdpProblem,
    layout: Option<Layout>,
    e_w: RealMatrix,
    f: RealVector,
    c: RealVector,
}

impl<'a> Ipm<'a> {
    fn new(p: &'a SdpProblem, layout: Option<Layout>) -> Self {
        Self {
            p,
            layout,
            e_w: p.eq_matrix_scalars(),
            f: p.eq_rhs(),
            c: RealVector::from_column_slice(&p.costs),
        }
    }

    fn initial_point(&self) -> Point {
        let p = self.p;
        let mut s = Vec::new();
        let mut x = Vec::new();
        for block in &p.blocks {
            let m = block.dim() as f64;
            let mut xi: f64 = 10f64.max(m.sqrt());
            let mut eta: f64 = 10f64.max(m.sqrt()).max(block.constant.norm());
            for (v, f) in &block.scalar_terms {
                let fnorm = f.entries.iter().map(|e| e.2.norm_sqr()).sum::<f64>().sqrt();
                xi = xi.max(m * (1.0 + p.costs[*v].abs()) / (1.0 + fnorm));
                eta = eta.max(fnorm);
            }
            x.push(identity(block.dim()) * c(xi, 0.0));
            s.push(identity(block.dim()) * c(eta, 0.0));
        }
        Point {
            w: RealVector::zeros(p.costs.len()),
            z: p.matrix_dims
                .iter()
                .map(|&d| ComplexMatrix::zeros(d, d))
                .collect(),
            lam: RealVector::zeros(p.equalities.len()),
            s,
            x,
        }
    }

    fn residuals(&self, pt: &Point) -> Residuals {
        let p = self.p;
        let rp = (0..p.blocks.len())
            .map(|b| &pt.s[b] - &p.blocks[b].constant - p.block_linear(b, &pt.w, &pt.z))
            .collect();
        let re = &self.f - p.eq_apply(&pt.w, &pt.z);
        let (aw, az) = p.adjoint_blocks(&pt.x);
        let (ew, ez) = p.eq_adjoint(&pt.lam);
        let rd_w = &self.c - aw - ew;
        let rd_z = az.iter().zip(&ez).map(|(a, e)| -(a + e)).collect();
        Residuals { rp, re, rd_w, rd_z }
    }

    fn primal_objective(&self, pt: &Point) -> f64 {
        self.c.dot(&pt.w)
    }

    fn dual_objective(&self, pt: &Point) -> f64 {
        -self
            .p
            .blocks
            .iter()
            .zip(&pt.x)
            .map(|(b, x)| inner(&b.constant, x))
            .sum::<f64>()
            + self.f.dot(&pt.lam)
    }

    fn factor(&self, scalings: &[Scaling]) -> Result<Newton, SdpError> {
        let ws: Vec<ComplexMatrix> = scalings.iter().map(|s| s.w.clone()).collect();
        let m_ww = self.p.scalar_schur(&ws);
        let n = m_ww.nrows();
        let q = self.e_w.nrows();
        match self.layout {
            None => {
                let mut kkt = RealMatrix::zeros(n + q, n + q);
                kkt.view_mut((0, 0), (n, n)).copy_from(&m_ww);
                kkt.view_mut((0, n), (n, q))
                    .copy_from(&(-self.e_w.transpose()));
                kkt.view_mut((n, 0), (q, n)).copy_from(&self.e_w);
                Ok(Newton::Dense(kkt.lu()))
            }
            Some(layout) => Ok(Newton::Structured(Box::new(
                self.structured_factor(layout, scalings, m_ww)?,
            ))),
        }
    }

    fn structured_factor(
        &self,
        layout: Layout,
        sc: &[Scaling],
        m_ww: RealMatrix,
    ) -> Result<StructuredFactor, SdpError> {
        let p = self.p;
        let g1 = &sc[layout.b1].g;
        let g2 = &sc[layout.b2].g;
        let nz = g1.nrows();
        let lu1 = g1.clone().lu();
        let b = lu1
            .solve(g2)
            .ok_or_else(|| SdpError::Numerical("singular scaling factor".into()))?;
        let svd = b.svd(true, false);
        let q = svd
            .u
            .ok_or_else(|| SdpError::Numerical("SVD failed in structured solve".into()))?;
        let lambda: Vec<f64> = svd.singular_values.iter().map(|s| s * s).collect();
        let t = g1
            .adjoint()
            .lu()
            .solve(&q)
            .ok_or_else(|| SdpError::Numerical("singular scaling factor".into()))?;
        let t_inv = q.adjoint() * g1.adjoint();
        let t_adj = t.adjoint();
        let d_inv = RealMatrix::from_fn(nz, nz, |a, b| 1.0 / (1.0 + lambda[a] * lambda[b]));
        let weights = d_inv.map(f64::sqrt);

        // coupling columns Ĉ_j = σ1 T⁻¹F1T⁻† + σ2 Λ T⁻¹F2T⁻† Λ
        let mut c_hat: Vec<Option<ComplexMatrix>> = vec![None; p.costs.len()];
        for (bidx, sign, scale_by_lambda) in
            [(layout.b1, layout.s1, false), (layout.b2, layout.s2, true)]
        {
            for (v, f) in &p.blocks[bidx].scalar_terms {
                let mut m = f.congruence(&t_inv);
                if scale_by_lambda {
                    for j in 0..nz {
                        for i in 0..nz {
                            m[(i, j)] *= lambda[i] * lambda[j];
                        }
                    }
                }
                m *= c(sign, 0.0);
                match &mut c_hat[*v] {
                    Some(acc) => *acc += m,
                    slot => *slot = Some(m),
                }
            }
        }
        let c_items: Vec<usize> = (0..p.costs.len()).filter(|&v| c_hat[v].is_some()).collect();
        let r_items: Vec<usize> = (0..p.equalities.len())
            .filter(|&r| !p.equalities[r].matrix_terms.is_empty())
            .collect();
        let n_items = c_items.len() + r_items.len();
        let mut phi = RealMatrix::zeros(nz * nz, n_items);
        for (col, &v) in c_items.iter().enumerate() {
            weighted_coords(
                c_hat[v].as_ref().expect("filtered"),
                &weights,
                phi.column_mut(col).as_mut_slice(),
            );
        }
        for (k, &r) in r_items.iter().enumerate() {
            let mut acc = ComplexMatrix::zeros(nz, nz);
            for (_, rm) in &p.equalities[r].matrix_terms {
                acc += rm.congruence(&t_adj);
            }
            weighted_coords(
                &acc,
                &weights,
                phi.column_mut(c_items.len() + k).as_mut_slice(),
            );
        }
        let gram = phi.tr_mul(&phi);

        let n = p.costs.len();
        let q_rows = p.equalities.len();
        let mut red = RealMatrix::zeros(n + q_rows, n + q_rows);
        red.view_mut((0, 0), (n, n)).copy_from(&m_ww);
        red.view_mut((0, n), (n, q_rows))
            .copy_from(&(-self.e_w.transpose()));
        red.view_mut((n, 0), (q_rows, n)).copy_from(&self.e_w);
        let nc = c_items.len();
        for (a, &va) in c_items.iter().enumerate() {
            for (b2, &vb) in c_items.iter().enumerate() {
                red[(va, vb)] -= gram[(a, b2)];
            }
            for (k, &r) in r_items.iter().enumerate() {
                red[(va, n + r)] += gram[(a, nc + k)];
                red[(n + r, va)] -= gram[(nc + k, a)];
            }
        }
        for (k, &r) in r_items.iter().enumerate() {
            for (k2, &r2) in r_items.iter().enumerate() {
                red[(n + r, n + r2)] += gram[(nc + k, nc + k2)];
            }
        }
        Ok(StructuredFactor {
            t,
            t_adj,
            weights,
            c_items,
            r_items,
            phi,
            lu: red.lu(),
            n_scalars: n,
        })
    }

    /// Solves the Newton system for the complementarity right-hand side `rc`.
    fn direction(
        &self,
        newton: &Newton,
        sc: &[Scaling],
        res: &Residuals,
        rc: &[ComplexMatrix],
    ) -> Result<Direction, SdpError> {
        let p = self.p;
        let u: Vec<ComplexMatrix> = (0..p.blocks.len())
            .map(|b| &rc[b] + &sc[b].w * &res.rp[b] * &sc[b].w)
            .collect();
        let (mut hw, mut hz) = p.adjoint_blocks(&u);
        hw -= &res.rd_w;
        for (h, r) in hz.iter_mut().zip(&res.rd_z) {
            *h -= r;
        }
        let n = p.costs.len();
        let fail = || SdpError::Numerical("singular Newton system".into());
        let (dw, dz, dlam) = match newton {
            Newton::Dense(lu) => {
                let mut rhs = RealVector::zeros(n + res.re.len());
                rhs.rows_mut(0, n).copy_from(&hw);
                rhs.rows_mut(n, res.re.len()).copy_from(&res.re);
                let sol = lu.solve(&rhs).ok_or_else(fail)?;
                (
                    sol.rows(0, n).into_owned(),
                    Vec::new(),
                    sol.rows(n, res.re.len()).into_owned(),
                )
            }
            Newton::Structured(f) => {
                let h = hermitize(&hz[0]);
                let h_hat = &f.t_adj * &h * &f.t;
                let nz = h.nrows();
                let mut h_coords = RealVector::zeros(nz * nz);
                weighted_coords(&h_hat, &f.weights, h_coords.as_mut_slice());
                let proj = f.phi.tr_mul(&h_coords);
                let q_rows = res.re.len();
                let mut rhs = RealVector::zeros(n + q_rows);
                rhs.rows_mut(0, n).copy_from(&hw);
                rhs.rows_mut(n, q_rows).copy_from(&res.re);
                let nc = f.c_items.len();
                for (a, &v) in f.c_items.iter().enumerate() {
                    rhs[v] -= proj[a];
                }
                for (k, &r) in f.r_items.iter().enumerate() {
                    rhs[n + r] -= proj[nc + k];
                }
                let sol = f.lu.solve(&rhs).ok_or_else(fail)?;
                let dw = sol.rows(0, f.n_scalars).into_owned();
                let dlam = sol.rows(n, q_rows).into_owned();
                // Ĥ − Σ Δw_j Ĉ_j + Σ Δλ_r R̂_r, assembled back from weighted coordinates
                let mut coef = RealVector::zeros(f.phi.ncols());
                for (a, &v) in f.c_items.iter().enumerate() {
                    coef[a] = -dw[v];
                }
                for (k, &r) in f.r_items.iter().enumerate() {
                    coef[nc + k] = dlam[r];
                }
                let combo = &h_coords + &f.phi * coef;
                let mut m = ComplexMatrix::zeros(nz, nz);
                let r2 = FRAC_1_SQRT_2;
                let mut k = 0;
                for a in 0..nz {
                    m[(a, a)] = c(combo[k] * f.weights[(a, a)], 0.0);
                    k += 1;
                    for b in a + 1..nz {
                        let s = r2 * f.weights[(a, b)];
                        let z = c(combo[k] * s, combo[k + 1] * s);
                        m[(a, b)] = z;
                        m[(b, a)] = z.conj();
                        k += 2;
                    }
                }
                let dz = hermitize(&(&f.t * m * &f.t_adj));
                (dw, vec![dz], dlam)
            }
        };
        let mut ds = Vec::with_capacity(p.blocks.len());
        let mut dx = Vec::with_capacity(p.blocks.len());
        for b in 0..p.blocks.len() {
            let dsb = hermitize(&(p.block_linear(b, &dw, &dz) - &res.rp[b]));
            let dxb = hermitize(&(&rc[b] - &sc[b].w * &dsb * &sc[b].w));
            ds.push(dsb);
            dx.push(dxb);
        }
        Ok(Direction {
            w: dw,
            z: dz,
            lam: dlam,
            s: ds,
            x: dx,
        })
    }

    /// How far `dir` is from solving the Newton equations for `res`.
    fn solve_error(&self, res: &Residuals, dir: &Direction) -> Residuals {
        let p = self.p;
        let (aw, az) = p.adjoint_blocks(&dir.x);
        let (ew, ez) = p.eq_adjoint(&dir.lam);
        Residuals {
            rp: dir
                .s
                .iter()
                .map(|s| ComplexMatrix::zeros(s.nrows(), s.ncols()))
                .collect(),
            re: &res.re - p.eq_apply(&dir.w, &dir.z),
            rd_w: &res.rd_w - aw - ew,
            rd_z: res
                .rd_z
                .iter()
                .zip(az.iter().zip(&ez))
                .map(|(r, (a, e))| r - a - e)
                .collect(),
        }
    }

    /// `direction` followed by iterative refinement against the same factorization;
    /// the structured solve loses digits once the scalings become ill-conditioned.
    fn refined_direction(
        &self,
        newton: &Newton,
        sc: &[Scaling],
        res: &Residuals,
        rc: &[ComplexMatrix],
    ) -> Result<Direction, SdpError> {
        const REFINEMENT_STEPS: usize = 3;
        let mut dir = self.direction(newton, sc, res, rc)?;
        let size = |r: &Residuals| r.primal_max().max(r.dual_max());
        let mut err = self.solve_error(res, &dir);
        let mut err_size = size(&err);
        let zero_rc: Vec<ComplexMatrix> = rc
            .iter()
            .map(|m| ComplexMatrix::zeros(m.nrows(), m.ncols()))
            .collect();
        for _ in 0..REFINEMENT_STEPS {
            if err_size <= f64::EPSILON * (1.0 + size(res)) {
                break;
            }
            let corr = self.direction(newton, sc, &err, &zero_rc)?;
            let candidate = Direction {
                w: &dir.w + &corr.w,
                z: dir.z.iter().zip(&corr.z).map(|(a, b)| a + b).collect(),
                lam: &dir.lam + &corr.lam,
                s: dir.s.iter().zip(&corr.s).map(|(a, b)| a + b).collect(),
                x: dir.x.iter().zip(&corr.x).map(|(a, b)| a + b).collect(),
            };
            let next = self.solve_error(res, &candidate);
            let next_size = size(&next);
            if next_size.is_nan() || next_size >= err_size {
                break;
            }
            dir = candidate;
            err = next;
            err_size = next_size;
        }
        Ok(dir)
    }

    fn run(&self, opts: &SolverOptions) -> Result<SdpSolution, SdpError> {
        const STEP_FRACTION: f64 = 0.98;
        let p = self.p;
        let total_dim: f64 = p.blocks.iter().map(|b| b.dim() as f64).sum();
        let mut pt = self.initial_point();
        let mut best: Option<(f64, Point)> = None;
        let mut status = SdpStatus::MaxIterations;
        let mut iterations = 0;
        for iter in 0..=opts.max_iterations {
            iterations = iter;
            let res = self.residuals(&pt);
            let pobj = self.primal_objective(&pt);
            let dobj = self.dual_objective(&pt);
            let gap = (pobj - dobj).abs() / pobj.abs().max(1.0);
            let (pinf, dinf) = (res.primal_max(), res.dual_max());
            let merit = (gap / opts.tol)
                .max(pinf / opts.feas_tol)
                .max(dinf / opts.feas_tol);
            if !pt.is_finite() || !gap.is_finite() {
                break;
            }
            if best.as_ref().is_none_or(|(m, _)| merit < *m) {
                best = Some((merit, pt.clone()));
            }
            if gap <= opts.tol && pinf <= opts.feas_tol && dinf <= opts.feas_tol {
                status = SdpStatus::Optimal;
                break;
            }
            if self.infeasibility_certificate(&pt, &res) {
                status = SdpStatus::Infeasible;
                best = Some((merit, pt.clone()));
                break;
            }
            if iter == opts.max_iterations {
                break;
            }
            let mu =
                pt.x.iter()
                    .zip(&pt.s)
                    .map(|(x, s)| inner(x, s))
                    .sum::<f64>()
                    / total_dim;

            let sc: Vec<Scaling> =
                pt.s.iter()
                    .zip(&pt.x)
                    .map(|(s, x)| nt_scaling(s, x))
                    .collect::<Result<_, _>>()?;
            let newton = match self.factor(&sc) {
                Ok(n) => n,
                Err(_) => break,
            };

            // predictor
            let rc_aff: Vec<ComplexMatrix> = pt.x.iter().map(|x| -x).collect();
            let aff = match self.refined_direction(&newton, &sc, &res, &rc_aff) {
                Ok(d) => d,
                Err(_) => break,
            };
            let ds_aff: Vec<ComplexMatrix> = sc
                .iter()
                .zip(&aff.s)
                .map(|(s, d)| s.g.adjoint() * d * &s.g)
                .collect();
            let dx_aff: Vec<ComplexMatrix> = sc
                .iter()
                .zip(&ds_aff)
                .map(|(s, d)| -d - linalg::diag_real(&s.sigma))
                .collect();
            let mut ap = 1f64;
            let mut ad = 1f64;
            for (b, s) in sc.iter().enumerate() {
                ap = ap.min(max_step(&s.sigma, &ds_aff[b]));
                ad = ad.min(max_step(&s.sigma, &dx_aff[b]));
            }
            let mu_aff = sc
                .iter()
                .enumerate()
                .map(|(b, s)| diag_inner(&s.sigma, ad, &dx_aff[b], ap, &ds_aff[b]))
                .sum::<f64>()
                / total_dim;
            let sigma_c = (mu_aff / mu).clamp(0.0, 1.0).powi(3);

            // corrector
            let mut rt = Vec::with_capacity(sc.len());
            let mut rc = Vec::with_capacity(sc.len());
            for (b, s) in sc.iter().enumerate() {
                let prod = &dx_aff[b] * &ds_aff[b];
                let mut r = -(&prod + prod.adjoint()) * c(0.5, 0.0);
                for (i, &sv) in s.sigma.iter().enumerate() {
                    r[(i, i)] += sigma_c * mu - sv * sv;
                }
                let l = lyap_inverse(&s.sigma, &r);
                rc.push(hermitize(&(&s.g * &l * s.g.adjoint())));
                rt.push(l);
            }
            let dir = match self.refined_direction(&newton, &sc, &res, &rc) {
                Ok(d) => d,
                Err(_) => break,
            };
            let mut ap = f64::INFINITY;
            let mut ad = f64::INFINITY;
            for (b, s) in sc.iter().enumerate() {
                let ds = s.g.adjoint() * &dir.s[b] * &s.g;
                let dx = &rt[b] - &ds;
                ap = ap.min(max_step(&s.sigma, &ds));
                ad = ad.min(max_step(&s.sigma, &dx));
            }
            let ap = (STEP_FRACTION * ap).min(1.0);
            let ad = (STEP_FRACTION * ad).min(1.0);
            if ap < 1e-12 && ad < 1e-12 {
                break;
            }
            pt.w += &dir.w * ap;
            for (z, dz) in pt.z.iter_mut().zip(&dir.z) {
                *z += dz * c(ap, 0.0);
            }
            for (s, ds) in pt.s.iter_mut().zip(&dir.s) {
                *s = hermitize(&(&*s + ds * c(ap, 0.0)));
            }
            for (x, dx) in pt.x.iter_mut().zip(&dir.x) {
                *x = hermitize(&(&*x + dx * c(ad, 0.0)));
            }
            pt.lam += &dir.lam * ad;
        }
        let (_, pt) = best.expect("at least one iterate");
        Ok(self.package(pt, status, iterations))
    }

    /// `(X, λ)` is (nearly) a dual improving ray: `A*X + Eᵀλ ≈ 0` relative to a
    /// positive dual objective, which certifies that no `w` satisfies the constraints.
    fn infeasibility_certificate(&self, pt: &Point, res: &Residuals) -> bool {
        let tau = self.dual_objective(pt);
        if tau <= 0.0 {
            return false;
        }
        let size: f64 = pt.x.iter().map(|x| linalg::trace(x).re).sum::<f64>() + pt.lam.amax();
        if size < 1e6 {
            return false;
        }
        let aw = (&self.c - &res.rd_w).amax();
        let az = res.rd_z.iter().map(linalg::max_abs).fold(0.0, f64::max);
        aw.max(az) <= 1e-8 * tau
    }

    fn package(&self, pt: Point, status: SdpStatus, iterations: usize) -> SdpSolution {
        let res = self.residuals(&pt);
        let primal_value = self.primal_objective(&pt);
        let dual_value = self.dual_objective(&pt);
        SdpSolution {
            status,
            primal_value,
            dual_value,
            gap: (primal_value - dual_value).abs() / primal_value.abs().max(1.0),
            scalars: pt.w.iter().copied().collect(),
            matrices: pt.z,
            slacks: pt.s,
            duals: pt.x,
            multipliers: pt.lam.iter().copied().collect(),
            primal_infeasibility: res.primal_max(),
            dual_infeasibility: res.dual_max(),
            iterations,
        }
    }
}

/// One constraint `Σ_b ⟨A_b, X_b⟩ = rhs` of a standard-form program.
#[derive(Debug, Clone)]
pub struct StandardConstraint {
    pub terms: Vec<(usize, ComplexMatrix)>,
    pub rhs: f64,
}

/// `minimize Σ_b ⟨C_b, X_b⟩` subject to linear equalities and `X_b ⪰ 0`,
/// solved through its LMI dual.
#[derive(Debug, Clone)]
pub struct StandardFormSdp {
    pub objective: Vec<ComplexMatrix>,
    pub constraints: Vec<StandardConstraint>,
}

#[derive(Debug, Clone)]
pub struct StandardSolution {
    pub status: SdpStatus,
    pub primal_value: f64,
    pub dual_value: f64,
    pub gap: f64,
    pub blocks: Vec<ComplexMatrix>,
    pub multipliers: Vec<f64>,
    pub iterations: usize,
}

impl StandardFormSdp {
    pub fn to_lmi(&self) -> SdpProblem {
        let mut p = SdpProblem::new();
        let blocks: Vec<BlockId> = self
            .objective
            .iter()
            .map(|cb| p.add_block(cb.clone()))
            .collect();
        for con in &self.constraints {
            let y = p.add_scalar(-con.rhs);
            for (b, a) in &con.terms {
                p.add_scalar_term(blocks[*b], y, SparseHermitian::from_dense(&(-a)));
            }
        }
        p
    }

    pub fn solve(&self, opts: &SolverOptions) -> Result<StandardSolution, SdpError> {
        let sol = self.to_lmi().solve(opts)?;
        Ok(StandardSolution {
            status: sol.status,
            primal_value: -sol.dual_value,
            dual_value: -sol.primal_value,
            gap: sol.gap,
            blocks: sol.duals,
            multipliers: sol.scalars,
            iterations: sol.iterations,
        })
    }

    /// The equivalent program over real symmetric blocks of twice the size.
    /// `Re Tr(CX) = ½ Tr(emb(C) emb(X))`, so all data carry a factor ½.
    pub fn embed_real(&self) -> Result<StandardFormSdp, LinalgError> {
        let emb = |m: &ComplexMatrix| -> Result<ComplexMatrix, LinalgError> {
            Ok(embed_hermitian(m)?.map(|v| c(0.5 * v, 0.0)))
        };
        Ok(StandardFormSdp {
            objective: self.objective.iter().map(emb).collect::<Result<_, _>>()?,
            constraints: self
                .constraints
                .iter()
                .map(|con| {
                    Ok(StandardConstraint {
                        terms: con
                            .terms
                            .iter()
                            .map(|(b, a)| Ok((*b, emb(a)?)))
                            .collect::<Result<_, LinalgError>>()?,
                        rhs: con.rhs,
                    })
                })
                .collect::<Result<_, LinalgError>>()?,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::{max_abs_diff, pauli_x, pauli_y};
    use crate::random::{random_hermitian, rng_from_seed};
    use proptest::prelude::*;

    fn opts() -> SolverOptions {
        SolverOptions::default()
    }

    #[test]
    fn hermitian_basis_is_orthonormal_and_coordinates_round_trip() {
        let basis = hermitian_basis(3);
        assert_eq!(basis.len(), 9);
        for (i, a) in basis.iter().enumerate() {
            for (j, b) in basis.iter().enumerate() {
                let ip = a.inner(&b.to_dense());
                assert!((ip - if i == j { 1.0 } else { 0.0 }).abs() < 1e-15);
            }
        }
        let h = random_hermitian(&mut rng_from_seed(1), 4);
        let back = from_hermitian_coordinates(4, &hermitian_coordinates(&h));
        assert!(max_abs_diff(&h, &back) < 1e-14);
    }

    #[test]
    fn sparse_congruence_matches_dense() {
        let mut rng = rng_from_seed(2);
        let l = crate::random::random_matrix(&mut rng, 5, 5);
        for f in hermitian_basis(5).iter().take(7) {
            let dense = &l * f.to_dense() * l.adjoint();
            assert!(max_abs_diff(&f.congruence(&l), &dense) < 1e-14);
        }
        let full = SparseHermitian::from_dense(&random_hermitian(&mut rng, 5));
        let dense = &l * full.to_dense() * l.adjoint();
        assert!(max_abs_diff(&full.congruence(&l), &dense) < 1e-13);
    }

    #[test]
    fn embed_examples() {
        let e = embed_hermitian(&identity(2)).unwrap();
        assert_eq!(e, RealMatrix::identity(4, 4));
        let mut vals: Vec<f64> = embed_hermitian(&pauli_y())
            .unwrap()
            .symmetric_eigenvalues()
            .iter()
            .copied()
            .collect();
        vals.sort_by(f64::total_cmp);
        let expected = [-1.0, -1.0, 1.0, 1.0];
        for (v, e) in vals.iter().zip(expected) {
            assert!((v - e).abs() < 1e-12);
        }
        assert!(embed_hermitian(&crate::linalg::unit_matrix(2, 0, 1)).is_err());
    }

    #[test]
    fn embedded_spectrum_is_doubled() {
        let h = random_hermitian(&mut rng_from_seed(3), 5);
        let mut orig: Vec<f64> = linalg::eigvalsh(&h)
            .into_iter()
            .flat_map(|v| [v, v])
            .collect();
        orig.sort_by(f64::total_cmp);
        let mut emb: Vec<f64> = embed_hermitian(&h)
            .unwrap()
            .symmetric_eigenvalues()
            .iter()
            .copied()
            .collect();
        emb.sort_by(f64::total_cmp);
        for (a, b) in orig.iter().zip(&emb) {
            assert!((a - b).abs() < 1e-12);
        }
    }

    fn trace_above_identity() -> StandardFormSdp {
        // minimize Tr X subject to X − Y = I, X, Y ⪰ 0
        let constraints = hermitian_basis(2)
            .iter()
            .map(|bk| {
                let d = bk.to_dense();
                StandardConstraint {
                    terms: vec![(0, d.clone()), (1, -&d)],
                    rhs: bk.inner(&identity(2)),
                }
            })
            .collect();
        StandardFormSdp {
            objective: vec![identity(2), ComplexMatrix::zeros(2, 2)],
            constraints,
        }
    }

    #[test]
    fn min_trace_above_identity_is_two() {
        let sol = trace_above_identity().solve(&opts()).unwrap();
        assert_eq!(sol.status, SdpStatus::Optimal);
        assert!(
            (sol.primal_value - 2.0).abs() < 1e-6,
            "{}",
            sol.primal_value
        );
        assert!(max_abs_diff(&sol.blocks[0], &identity(2)) < 1e-5);
    }

    #[test]
    fn real_embedding_reproduces_value() {
        let complex = trace_above_identity();
        let real = complex.embed_real().unwrap();
        let a = complex.solve(&opts()).unwrap();
        let b = real.solve(&opts()).unwrap();
        assert_eq!(b.status, SdpStatus::Optimal);
        assert!((a.primal_value - b.primal_value).abs() < 1e-6);
    }

    #[test]
    fn operator_norm_epigraph() {
        let mut p = SdpProblem::new();
        let t = p.add_scalar(1.0);
        let b = p.add_block(-pauli_x());
        p.add_scalar_term(b, t, SparseHermitian::identity(2));
        let sol = p.solve(&opts()).unwrap();
        assert_eq!(sol.status, SdpStatus::Optimal);
        assert!((sol.primal_value - 1.0).abs() < 1e-7);
        assert!((sol.scalar(t) - 1.0).abs() < 1e-6);
    }

    #[test]
    fn operator_norm_of_random_hermitian() {
        let h = random_hermitian(&mut rng_from_seed(7), 6);
        let mut p = SdpProblem::new();
        let t = p.add_scalar(1.0);
        let b1 = p.add_block(-&h);
        p.add_scalar_term(b1, t, SparseHermitian::identity(6));
        let b2 = p.add_block(h.clone());
        p.add_scalar_term(b2, t, SparseHermitian::identity(6));
        let sol = p.solve(&opts()).unwrap();
        assert!((sol.primal_value - linalg::operator_norm(&h)).abs() < 1e-6);
    }

    #[test]
    fn infeasible_problem_is_flagged() {
        // y ⪰ 0 and −1 − y ⪰ 0
        let mut p = SdpProblem::new();
        let y = p.add_scalar(0.0);
        let b1 = p.add_zero_block(1);
        p.add_scalar_term(b1, y, SparseHermitian::identity(1));
        let b2 = p.add_block(-identity(1));
        p.add_scalar_term(b2, y, SparseHermitian::identity(1).scaled(-1.0));
        let sol = p.solve(&opts()).unwrap();
        assert_eq!(sol.status, SdpStatus::Infeasible);
    }

    #[test]
    fn equality_constraints_hold() {
        // minimize ⟨H, Z⟩ over density matrices Z: the smallest eigenvalue
        let h = random_hermitian(&mut rng_from_seed(8), 4);
        let mut p = SdpProblem::new();
        let basis = hermitian_basis(4);
        let coords: Vec<ScalarVar> = basis.iter().map(|bk| p.add_scalar(bk.inner(&h))).collect();
        let b = p.add_zero_block(4);
        for (v, bk) in coords.iter().zip(&basis) {
            p.add_scalar_term(b, *v, bk.clone());
        }
        let trace_row = coords
            .iter()
            .zip(&basis)
            .map(|(v, bk)| (*v, bk.inner(&identity(4))))
            .collect();
        p.add_equality(trace_row, vec![], 1.0);
        let sol = p.solve(&opts()).unwrap();
        assert_eq!(sol.status, SdpStatus::Optimal);
        assert!((sol.primal_value - linalg::min_eigenvalue(&h)).abs() < 1e-6);
        assert!(sol.primal_infeasibility <= 1e-7);
    }

    #[test]
    fn matrix_variable_dense_and_structured_agree() {
        // minimize t with Z ⪰ 0, Z − H ⪰ 0, t − Tr Z ≥ 0: the positive part of H
        let h = random_hermitian(&mut rng_from_seed(9), 6);
        let build = || {
            let mut p = SdpProblem::new();
            let t = p.add_scalar(1.0);
            let s = p.add_scalar(0.0);
            let z = p.add_matrix_var(6);
            let b1 = p.add_zero_block(6);
            p.add_matrix_term(b1, z, 1.0);
            let b2 = p.add_block(-&h);
            p.add_matrix_term(b2, z, 1.0);
            let b3 = p.add_zero_block(1);
            p.add_scalar_term(b3, t, SparseHermitian::identity(1));
            p.add_scalar_term(b3, s, SparseHermitian::identity(1).scaled(-1.0));
            p.add_equality(
                vec![(s, -1.0)],
                vec![(z, SparseHermitian::identity(6))],
                0.0,
            );
            p
        };
        let expected: f64 = linalg::eigvalsh(&h).iter().filter(|&&l| l > 0.0).sum();
        let dense = build()
            .solve(&SolverOptions {
                newton: NewtonMode::Dense,
                ..opts()
            })
            .unwrap();
        let structured = build()
            .solve(&SolverOptions {
                newton: NewtonMode::Structured,
                ..opts()
            })
            .unwrap();
        assert_eq!(dense.status, SdpStatus::Optimal);
        assert_eq!(structured.status, SdpStatus::Optimal);
        assert!((dense.primal_value - expected).abs() < 1e-6);
        assert!((structured.primal_value - expected).abs() < 1e-6);
        assert!(max_abs_diff(&dense.matrices[0], &structured.matrices[0]) < 1e-4);
    }

    #[test]
    fn structured_mode_rejects_unsupported_layout() {
        let mut p = SdpProblem::new();
        let z = p.add_matrix_var(2);
        let b = p.add_zero_block(2);
        p.add_matrix_term(b, z, 1.0);
        let r = p.solve(&SolverOptions {
            newton: NewtonMode::Structured,
            ..opts()
        });
        assert!(matches!(r, Err(SdpError::InvalidProblem(_))));
    }

    #[test]
    fn solve_is_deterministic() {
        let p = trace_above_identity();
        let a = p.solve(&opts()).unwrap();
        let b = p.solve(&opts()).unwrap();
        assert_eq!(a.primal_value.to_bits(), b.primal_value.to_bits());
        assert_eq!(a.dual_value.to_bits(), b.dual_value.to_bits());
    }

    /// minimize cᵀy subject to I + Σ y_j F_j ⪰ 0 and |y_j| ≤ 1
    fn random_box_lmi(seed: u64, n: usize, m: usize) -> SdpProblem {
        let mut rng = rng_from_seed(seed);
        let mut p = SdpProblem::new();
        let main = p.add_block(identity(m));
        for _ in 0..n {
            let cost = random_hermitian(&mut rng, 1)[(0, 0)].re;
            let y = p.add_scalar(cost);
            p.add_scalar_term(
                main,
                y,
                SparseHermitian::from_dense(&random_hermitian(&mut rng, m)),
            );
            let up = p.add_block(identity(1));
            p.add_scalar_term(up, y, SparseHermitian::identity(1).scaled(-1.0));
            let down = p.add_block(identity(1));
            p.add_scalar_term(down, y, SparseHermitian::identity(1));
        }
        p
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(24))]

        #[test]
        fn weak_duality_and_scaling(seed in 0u64..10_000, n in 1usize..4, m in 1usize..5, lambda in 0.1f64..10.0) {
            let p = random_box_lmi(seed, n, m);
            let sol = p.solve(&opts()).unwrap();
            prop_assert_eq!(sol.status, SdpStatus::Optimal);
            prop_assert!(sol.dual_value <= sol.primal_value + 1e-9);
            prop_assert!(sol.gap <= 1e-7);
            let mut scaled = p.clone();
            scaled.scale_objective(lambda);
            let s2 = scaled.solve(&opts()).unwrap();
            let tol = 1e-6 * sol.primal_value.abs().max(1.0) * lambda;
            prop_assert!((s2.primal_value - lambda * sol.primal_value).abs() <= tol);
            prop_assert!((s2.dual_value - lambda * sol.dual_value).abs() <= tol);
        }
    }
}
