//! Diamond norms and the signalling / causal-influence quantifiers.
//!
//! For a trace-annihilating Hermitian-preserving map `Δ` (e.g. a difference of
//! channels) the diamond norm is `2·min ‖Tr_out Z‖∞` over `Z ⪰ 0, Z ⪰ J(Δ)`.
//! The quantifiers minimize this over a channel entering `J(Δ)` linearly, so
//! each is a single program whose dual value certifies the infimum from below.

use std::time::Instant;

use serde::Serialize;
use thiserror::Error;

use crate::channel::{
    discard_a_then, extend_with_identity, marginal_to_b, swap_probe, trace_preservation_residual,
    Channel, ChannelError, HermitianMap, SystemDims, UnitaryGate,
};
use crate::linalg::{self, c, identity, partial_trace, ComplexMatrix, ComplexVector, TensorShape};
use crate::random::{random_pure_state, rng_from_seed};
use crate::sdp::{
    hermitian_basis, SdpError, SdpProblem, SdpSolution, SdpStatus, SolverOptions, SparseHermitian,
};

/// Default duality-gap tolerance for every program solved here.
pub const DEFAULT_TOL: f64 = 1e-7;
/// Gap accepted when the solver stops on its iteration limit.
pub const CERTIFICATION_TOL: f64 = 1e-6;
/// Slack for the sandwich and lemma inequalities.
pub const BOUND_SLACK: f64 = 1e-4;

#[derive(Debug, Error)]
pub enum QuantifierError {
    #[error(transparent)]
    Channel(#[from] ChannelError),
    #[error(transparent)]
    Sdp(#[from] SdpError),
    #[error("solver stopped with status {status} (gap {gap:e})")]
    Solver { status: SdpStatus, gap: f64 },
    #[error("{0}")]
    Precondition(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SolveStats {
    pub iterations: usize,
    pub wall_ms: u128,
}

/// A certified optimum: `dual ≤ optimum ≤ primal`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Certificate {
    pub value: f64,
    pub primal: f64,
    pub dual: f64,
    pub gap: f64,
    pub status: SdpStatus,
    pub stats: SolveStats,
}

/// Value of `S(U)` or `C(U)` together with the optimal channel.
#[derive(Debug, Clone, PartialEq)]
pub struct QuantifierResult {
    /// Primal value clamped to `[0, 2]`.
    pub value: f64,
    pub primal: f64,
    pub dual: f64,
    pub gap: f64,
    pub status: SdpStatus,
    /// Choi matrix of the optimal `C: B → B'` (signalling) or `T': ĀA' → ĀA'` (causal influence).
    pub optimizer_choi: ComplexMatrix,
    pub optimizer_dims: SystemDims,
    pub stats: SolveStats,
}

impl QuantifierResult {
    pub fn optimizer(&self) -> Result<Channel, ChannelError> {
        Channel::from_choi(self.optimizer_dims.clone(), self.optimizer_choi.clone())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct BoundReport {
    pub s_value: f64,
    pub s_gap: f64,
    pub c_value: f64,
    pub c_gap: f64,
    /// `S ≤ C + slack`
    pub lower_ok: bool,
    /// `C ≤ 2√2·√S + slack`
    pub upper_ok: bool,
    pub slack: f64,
}

impl BoundReport {
    pub fn from_values(s_value: f64, s_gap: f64, c_value: f64, c_gap: f64, slack: f64) -> Self {
        Self {
            s_value,
            s_gap,
            c_value,
            c_gap,
            lower_ok: s_value <= c_value + slack,
            upper_ok: c_value <= 2.0 * std::f64::consts::SQRT_2 * s_value.max(0.0).sqrt() + slack,
            slack,
        }
    }

    pub fn all_ok(&self) -> bool {
        self.lower_ok && self.upper_ok
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct LemmaReport {
    /// `(inf_D ‖C − D ⊗ I_B‖⋄)²`
    pub lhs: f64,
    /// `4‖(Tr_{A'} ⊗ I_B)C − Tr_A ⊗ I_B‖⋄`
    pub rhs: f64,
    pub ok: bool,
    /// Largest duality gap of the two underlying programs.
    pub gap: f64,
}

fn accept(sol: &SdpSolution) -> Result<(), QuantifierError> {
    let usable = sol.status == SdpStatus::Optimal
        || (sol.status == SdpStatus::MaxIterations
            && sol.gap <= CERTIFICATION_TOL
            && sol.primal_infeasibility <= 1e-7
            && sol.dual_infeasibility <= 1e-7);
    if usable {
        Ok(())
    } else {
        Err(QuantifierError::Solver {
            status: sol.status,
            gap: sol.gap,
        })
    }
}

fn kron_identity_left(d: usize, m: &SparseHermitian) -> SparseHermitian {
    let n = m.dim();
    let entries = (0..d)
        .flat_map(|o| {
            m.entries()
                .iter()
                .map(move |&(p, q, v)| (o * n + p, o * n + q, v))
        })
        .collect();
    SparseHermitian::new(d * n, entries)
}

/// A channel variable `J_x` entering the difference as `J0 − L(J_x)`.
struct ChannelVariable<'a> {
    dims: SystemDims,
    embed: &'a dyn Fn(&ComplexMatrix) -> ComplexMatrix,
}

struct JointSolution {
    solution: SdpSolution,
    channel: Option<ComplexMatrix>,
    wall_ms: u128,
}

/// `min 2t` subject to `Z ⪰ 0`, `Z − J0 + L(J_x) ⪰ 0`, `tI ⪰ Tr_out Z`, and,
/// when a channel variable is present, `J_x ⪰ 0` with `Tr_out J_x = I`.
fn solve_joint(
    j0: &ComplexMatrix,
    d_out: usize,
    d_in: usize,
    var: Option<ChannelVariable<'_>>,
    tol: f64,
) -> Result<JointSolution, QuantifierError> {
    let start = Instant::now();
    let n = d_out * d_in;
    let mut p = SdpProblem::new();
    let t = p.add_scalar(2.0);
    let z = p.add_matrix_var(n);
    let b_psd = p.add_zero_block(n);
    p.add_matrix_term(b_psd, z, 1.0);
    let b_dom = p.add_block(-j0);
    p.add_matrix_term(b_dom, z, 1.0);

    let in_basis = hermitian_basis(d_in);
    let b_norm = p.add_zero_block(d_in);
    p.add_scalar_term(b_norm, t, SparseHermitian::identity(d_in));
    for br in &in_basis {
        let s = p.add_scalar(0.0);
        p.add_scalar_term(b_norm, s, br.scaled(-1.0));
        p.add_equality(
            vec![(s, -1.0)],
            vec![(z, kron_identity_left(d_out, br))],
            0.0,
        );
    }

    let mut x_vars = Vec::new();
    let mut x_basis = Vec::new();
    if let Some(var) = &var {
        let (xo, xi) = (var.dims.d_out(), var.dims.d_in());
        x_basis = hermitian_basis(xo * xi);
        let b_cp = p.add_zero_block(xo * xi);
        for bk in &x_basis {
            let v = p.add_scalar(0.0);
            p.add_scalar_term(b_cp, v, bk.clone());
            let lk = (var.embed)(&bk.to_dense());
            p.add_scalar_term(b_dom, v, SparseHermitian::from_dense(&lk));
            x_vars.push(v);
        }
        for br in &hermitian_basis(xi) {
            let row = kron_identity_left(xo, br).to_dense();
            let terms = x_vars
                .iter()
                .zip(&x_basis)
                .filter_map(|(v, bk)| {
                    let a = bk.inner(&row);
                    (a != 0.0).then_some((*v, a))
                })
                .collect();
            p.add_equality(terms, vec![], br.inner(&identity(xi)));
        }
    }

    let solution = p.solve(&SolverOptions::with_tol(tol))?;
    accept(&solution)?;
    let channel = var.map(|v| {
        let mut j = ComplexMatrix::zeros(x_basis[0].dim(), x_basis[0].dim());
        for (xv, bk) in x_vars.iter().zip(&x_basis) {
            bk.add_to(&mut j, solution.scalar(*xv));
        }
        project_to_channel(&v.dims, &j)
    });
    Ok(JointSolution {
        solution,
        channel,
        wall_ms: start.elapsed().as_millis(),
    })
}

/// Restores exact trace preservation and positivity after roundoff: the
/// trace defect is spread as `I_out/d_out ⊗ (I − Tr_out J)`, then negative
/// eigenvalues are removed by mixing in `I/d_out`.
fn project_to_channel(dims: &SystemDims, j: &ComplexMatrix) -> ComplexMatrix {
    let (d_out, d_in) = (dims.d_out(), dims.d_in());
    let shape = TensorShape::new([d_out, d_in]);
    let reduced = partial_trace(j, &shape, &[0]).expect("dims consistent");
    let defect = identity(d_in) - reduced;
    let mut fixed =
        linalg::hermitize(&(j + linalg::kron(&identity(d_out), &defect).unscale(d_out as f64)));
    let lmin = linalg::min_eigenvalue(&fixed);
    if lmin < 0.0 {
        let floor = 1.0 / d_out as f64;
        let eps = -lmin / (floor - lmin);
        fixed = fixed.scale(1.0 - eps) + identity(d_out * d_in).scale(eps / d_out as f64);
    }
    debug_assert!(trace_preservation_residual(dims, &fixed) < 1e-12);
    fixed
}

fn certificate(js: &JointSolution, scale: f64) -> Certificate {
    let s = &js.solution;
    Certificate {
        value: s.primal_value * scale,
        primal: s.primal_value * scale,
        dual: s.dual_value * scale,
        gap: s.gap,
        status: s.status,
        stats: SolveStats {
            iterations: s.iterations,
            wall_ms: js.wall_ms,
        },
    }
}

/// Diamond norm with its primal/dual bracket.
pub fn diamond_norm_certified(h: &HermitianMap, tol: f64) -> Result<Certificate, QuantifierError> {
    let scale = linalg::max_abs(h.choi()).max(1.0);
    if h.is_trace_annihilating(1e-9 * scale) {
        let js = solve_joint(h.choi(), h.dims().d_out(), h.dims().d_in(), None, tol)?;
        let mut cert = certificate(&js, 1.0);
        cert.value = cert.primal.max(0.0);
        return Ok(cert);
    }
    block_form(h, tol)
}

/// `‖h‖⋄`
pub fn diamond_norm(h: &HermitianMap, tol: f64) -> Result<f64, QuantifierError> {
    Ok(diamond_norm_certified(h, tol)?.value)
}

/// `‖c1 − c2‖⋄`
pub fn diamond_distance(c1: &Channel, c2: &Channel, tol: f64) -> Result<f64, QuantifierError> {
    diamond_norm(&c1.difference(c2)?, tol)
}

/// `min ½(t0 + t1)` subject to `[[Y0, −J], [−J, Y1]] ⪰ 0` and `Tr_out Y_i ⪯ t_i I`,
/// valid for any Hermitian-preserving map.
fn block_form(h: &HermitianMap, tol: f64) -> Result<Certificate, QuantifierError> {
    let start = Instant::now();
    let (d_out, d_in) = (h.dims().d_out(), h.dims().d_in());
    let n = d_out * d_in;
    let mut p = SdpProblem::new();
    let mut constant = ComplexMatrix::zeros(2 * n, 2 * n);
    constant.view_mut((0, n), (n, n)).copy_from(&(-h.choi()));
    constant.view_mut((n, 0), (n, n)).copy_from(&(-h.choi()));
    let big = p.add_block(constant);
    let basis = hermitian_basis(n);
    let shape = TensorShape::new([d_out, d_in]);
    for offset in [0, n] {
        let t = p.add_scalar(0.5);
        let b = p.add_zero_block(d_in);
        p.add_scalar_term(b, t, SparseHermitian::identity(d_in));
        for bk in &basis {
            let y = p.add_scalar(0.0);
            let shifted = bk
                .entries()
                .iter()
                .map(|&(r, s, v)| (r + offset, s + offset, v))
                .collect();
            p.add_scalar_term(big, y, SparseHermitian::new(2 * n, shifted));
            let reduced = partial_trace(&bk.to_dense(), &shape, &[0]).expect("dims consistent");
            p.add_scalar_term(b, y, SparseHermitian::from_dense(&(-reduced)));
        }
    }
    let sol = p.solve(&SolverOptions::with_tol(tol))?;
    accept(&sol)?;
    Ok(Certificate {
        value: sol.primal_value.max(0.0),
        primal: sol.primal_value,
        dual: sol.dual_value,
        gap: sol.gap,
        status: sol.status,
        stats: SolveStats {
            iterations: sol.iterations,
            wall_ms: start.elapsed().as_millis(),
        },
    })
}

/// `(id ⊗ Δ)(ψψ†)` for `ψ` on `R ⊗ in`, given as the matrix `ψ[r, i]`.
fn probe_output(
    j: &ComplexMatrix,
    d_out: usize,
    d_in: usize,
    psi: &ComplexMatrix,
) -> ComplexMatrix {
    let d_r = psi.nrows();
    let mut x = ComplexMatrix::zeros(d_r * d_out, d_r * d_out);
    // X[(r,o),(r',o')] = Σ_ij ψ[r,i] conj(ψ[r',j]) J[(o,i),(o',j)]
    for r in 0..d_r {
        for r2 in 0..d_r {
            for i in 0..d_in {
                let a = psi[(r, i)];
                for jj in 0..d_in {
                    let w = a * psi[(r2, jj)].conj();
                    for o in 0..d_out {
                        for o2 in 0..d_out {
                            x[(r * d_out + o, r2 * d_out + o2)] +=
                                w * j[(o * d_in + i, o2 * d_in + jj)];
                        }
                    }
                }
            }
        }
    }
    x
}

/// Seesaw over ancilla-assisted pure inputs and Helstrom measurements.
/// Returns the best `‖(id ⊗ Δ)(ψψ†)‖₁` found; each start is monotone.
pub fn dnorm_lower_bound_map(h: &HermitianMap, iters: usize, starts: usize, seed: u64) -> f64 {
    let (d_out, d_in) = (h.dims().d_out(), h.dims().d_in());
    let j = h.choi();
    let mut rng = rng_from_seed(seed);
    let mut best = 0.0f64;
    for start in 0..starts.max(1) {
        let v: ComplexVector = if start == 0 {
            // maximally entangled input
            ComplexVector::from_fn(d_in * d_in, |k, _| {
                if k / d_in == k % d_in {
                    c(1.0 / (d_in as f64).sqrt(), 0.0)
                } else {
                    c(0.0, 0.0)
                }
            })
        } else {
            random_pure_state(&mut rng, d_in * d_in)
        };
        let mut psi = ComplexMatrix::from_fn(d_in, d_in, |r, i| v[r * d_in + i]);
        let mut value = linalg::trace_norm(&probe_output(j, d_out, d_in, &psi));
        best = best.max(value);
        for _ in 0..iters {
            let x = linalg::hermitize(&probe_output(j, d_out, d_in, &psi));
            let (vals, vecs) = linalg::eigh_unchecked(&x);
            let mut o = ComplexMatrix::zeros(x.nrows(), x.ncols());
            for (k, &l) in vals.iter().enumerate() {
                let sign = if l >= 0.0 { 1.0 } else { -1.0 };
                let col = vecs.column(k);
                o += (col * col.adjoint()) * c(sign, 0.0);
            }
            // Q[(r',j),(r,i)] = Σ_{o,o'} O[(r',o'),(r,o)] J[(o,i),(o',j)]
            let n = d_in * d_in;
            let mut q = ComplexMatrix::zeros(n, n);
            for r2 in 0..d_in {
                for jj in 0..d_in {
                    for r in 0..d_in {
                        for i in 0..d_in {
                            let mut acc = c(0.0, 0.0);
                            for oo in 0..d_out {
                                for o2 in 0..d_out {
                                    acc += o[(r2 * d_out + o2, r * d_out + oo)]
                                        * j[(oo * d_in + i, o2 * d_in + jj)];
                                }
                            }
                            q[(r2 * d_in + jj, r * d_in + i)] = acc;
                        }
                    }
                }
            }
            let (_, qv) = linalg::eigh_unchecked(&linalg::hermitize(&q));
            psi = ComplexMatrix::from_fn(d_in, d_in, |r, i| qv[(r * d_in + i, 0)]);
            let next = linalg::trace_norm(&probe_output(j, d_out, d_in, &psi));
            if next <= value + 1e-15 {
                value = value.max(next);
                break;
            }
            value = next;
        }
        best = best.max(value);
    }
    best
}

/// Lower bound on `‖c1 − c2‖⋄` from the seesaw with a fixed set of starts.
pub fn dnorm_lower_bound(c1: &Channel, c2: &Channel, iters: usize) -> Result<f64, ChannelError> {
    Ok(dnorm_lower_bound_map(&c1.difference(c2)?, iters, 8, 0x5eed))
}

fn quantifier(js: JointSolution, dims: SystemDims) -> QuantifierResult {
    let s = &js.solution;
    QuantifierResult {
        value: s.primal_value.clamp(0.0, 2.0),
        primal: s.primal_value,
        dual: s.dual_value,
        gap: s.gap,
        status: s.status,
        optimizer_choi: js.channel.expect("joint program has a channel variable"),
        optimizer_dims: dims,
        stats: SolveStats {
            iterations: s.iterations,
            wall_ms: js.wall_ms,
        },
    }
}

/// `S(U) = inf_C ‖(Tr_{A'} ⊗ I)∘U − Tr_A ⊗ C‖⋄` over channels `C: B → B'`.
pub fn signalling(u: &UnitaryGate, tol: f64) -> Result<QuantifierResult, QuantifierError> {
    let (a, b, _, b_out) = u.split()?;
    let marginal = marginal_to_b(u)?;
    let dims = SystemDims::new([b], [b_out]);
    let embed = |jc: &ComplexMatrix| discard_a_then(a, jc, &dims);
    let js = solve_joint(
        marginal.choi(),
        b_out,
        a * b,
        Some(ChannelVariable {
            dims: dims.clone(),
            embed: &embed,
        }),
        tol,
    )?;
    Ok(quantifier(js, dims))
}

/// `C(U) = inf_{T'} ‖T(U) − T' ⊗ I_{B'}‖⋄` over channels `T'` on `Ā ⊗ A'`.
pub fn causal_influence(u: &UnitaryGate, tol: f64) -> Result<QuantifierResult, QuantifierError> {
    let (a, _, a_out, b_out) = u.split()?;
    let probe = swap_probe(u)?;
    let dims = SystemDims::square([a, a_out]);
    let embed = |jt: &ComplexMatrix| extend_with_identity(jt, &dims, b_out);
    let d = a * a_out * b_out;
    let js = solve_joint(
        probe.choi(),
        d,
        d,
        Some(ChannelVariable {
            dims: dims.clone(),
            embed: &embed,
        }),
        tol,
    )?;
    Ok(quantifier(js, dims))
}

/// Both quantifiers and the sandwich `S ≤ C` and `C ≤ 2√2·√S`, each up to [`BOUND_SLACK`].
pub fn check_bounds(u: &UnitaryGate, tol: f64) -> Result<BoundReport, QuantifierError> {
    let s = signalling(u, tol)?;
    let c = causal_influence(u, tol)?;
    Ok(BoundReport::from_values(
        s.value,
        s.gap,
        c.value,
        c.gap,
        BOUND_SLACK,
    ))
}

pub fn is_no_signalling(u: &UnitaryGate, tol: f64) -> Result<bool, QuantifierError> {
    Ok(signalling(u, DEFAULT_TOL)?.value <= tol)
}

pub fn is_no_causal_influence(u: &UnitaryGate, tol: f64) -> Result<bool, QuantifierError> {
    Ok(causal_influence(u, DEFAULT_TOL)?.value <= tol)
}

/// `inf_D ‖c − D ⊗ I_B‖⋄` over channels `D: A → A'`, for `c: A ⊗ B → A' ⊗ B`.
pub fn distance_to_local(c: &Channel, tol: f64) -> Result<QuantifierResult, QuantifierError> {
    let (a, b, a_out) = lemma_split(c)?;
    let dims = SystemDims::new([a], [a_out]);
    let embed = |jd: &ComplexMatrix| extend_with_identity(jd, &dims, b);
    let js = solve_joint(
        c.choi(),
        a_out * b,
        a * b,
        Some(ChannelVariable {
            dims: dims.clone(),
            embed: &embed,
        }),
        tol,
    )?;
    Ok(quantifier(js, dims))
}

fn lemma_split(c: &Channel) -> Result<(usize, usize, usize), QuantifierError> {
    match (c.dims().in_dims.as_slice(), c.dims().out_dims.as_slice()) {
        ([a, b], [a_out, b2]) if b == b2 => Ok((*a, *b, *a_out)),
        _ => Err(QuantifierError::Precondition(
            "channel must map A ⊗ B to A' ⊗ B with the same B factor".into(),
        )),
    }
}

/// `(inf_D ‖c − D ⊗ I‖⋄)² ≤ 4‖(Tr_{A'} ⊗ I)c − Tr_A ⊗ I‖⋄ + slack`
pub fn check_lemma1(c: &Channel, slack: f64) -> Result<LemmaReport, QuantifierError> {
    let (a, b, a_out) = lemma_split(c)?;
    let local = distance_to_local(c, DEFAULT_TOL)?;
    let lhs = local.value * local.value;
    let shape = TensorShape::new([a_out, b, a, b]);
    let marginal = partial_trace(c.choi(), &shape, &[0]).map_err(ChannelError::from)?;
    let id_b = Channel::identity([b]);
    let reference = discard_a_then(a, id_b.choi(), id_b.dims());
    let diff = HermitianMap::new(SystemDims::new([a, b], [b]), marginal - reference)?;
    let cert = diamond_norm_certified(&diff, DEFAULT_TOL)?;
    let rhs = 4.0 * cert.value;
    Ok(LemmaReport {
        lhs,
        rhs,
        ok: lhs <= rhs + slack,
        gap: local.gap.max(cert.gap),
    })
}
