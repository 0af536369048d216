//! Channels in the Choi representation.
//!
//! A map `Φ` from an input register to an output register is stored as
//! `J(Φ) = Σ_ij Φ(|i⟩⟨j|) ⊗ |i⟩⟨j|` on `output ⊗ input` (unnormalized), so
//! complete positivity is `J ⪰ 0` and trace preservation is `Tr_out J = I`.

use std::f64::consts::FRAC_1_SQRT_2;
use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::linalg::{
    self, c, dagger, hermitian_deviation, identity, kron, max_abs, max_abs_diff, min_eigenvalue,
    partial_trace, permute_factors, ComplexMatrix, LinalgError, TensorShape, C64,
};

/// Tolerance for the CPTP checks on Choi matrices.
pub const CPTP_TOL: f64 = 1e-9;
/// Tolerance for `u†u = I`.
pub const UNITARY_TOL: f64 = 1e-10;
/// Eigenvalues of a Choi matrix above this count towards its rank.
pub const CHOI_RANK_THRESHOLD: f64 = 1e-10;

#[derive(Debug, Error)]
pub enum ChannelError {
    #[error(transparent)]
    Linalg(#[from] LinalgError),
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),
    #[error("Choi matrix is not positive semidefinite (min eigenvalue {0:e})")]
    NotCompletelyPositive(f64),
    #[error("map is not trace preserving (residual {0:e})")]
    NotTracePreserving(f64),
    #[error("matrix is not unitary (residual {0:e})")]
    NotUnitary(f64),
    #[error("gate has no bipartite split: expected 2 input and 2 output factors")]
    MissingBipartiteSplit,
    #[error("unknown gate `{0}`")]
    UnknownGate(String),
    #[error("gate `{0}` needs an angle")]
    MissingAngle(String),
    #[error("gate file: {0}")]
    GateFile(String),
}

/// Ordered factor dimensions of a map's input and output registers.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct SystemDims {
    pub in_dims: Vec<usize>,
    pub out_dims: Vec<usize>,
}

impl SystemDims {
    pub fn new(in_dims: impl Into<Vec<usize>>, out_dims: impl Into<Vec<usize>>) -> Self {
        let dims = Self {
            in_dims: in_dims.into(),
            out_dims: out_dims.into(),
        };
        assert!(
            dims.in_dims.iter().chain(&dims.out_dims).all(|&d| d >= 1),
            "system dimensions must be positive"
        );
        dims
    }

    /// Same factors on input and output.
    pub fn square(dims: impl Into<Vec<usize>>) -> Self {
        let d = dims.into();
        Self::new(d.clone(), d)
    }

    pub fn d_in(&self) -> usize {
        self.in_dims.iter().product()
    }

    pub fn d_out(&self) -> usize {
        self.out_dims.iter().product()
    }

    /// Factor layout of the Choi matrix: output factors, then input factors.
    pub fn choi_shape(&self) -> TensorShape {
        TensorShape::new([self.out_dims.as_slice(), self.in_dims.as_slice()].concat())
    }

    pub fn choi_dim(&self) -> usize {
        self.d_in() * self.d_out()
    }
}

/// A completely positive trace-preserving map.
#[derive(Debug, Clone, PartialEq)]
pub struct Channel {
    dims: SystemDims,
    choi: ComplexMatrix,
}

/// A Hermitian-preserving map, e.g. a difference of two channels.
#[derive(Debug, Clone, PartialEq)]
pub struct HermitianMap {
    dims: SystemDims,
    choi: ComplexMatrix,
}

/// A unitary acting between registers of equal total dimension.
#[derive(Debug, Clone, PartialEq)]
pub struct UnitaryGate {
    dims: SystemDims,
    u: ComplexMatrix,
}

fn check_choi_dims(dims: &SystemDims, choi: &ComplexMatrix) -> Result<(), ChannelError> {
    if choi.nrows() != dims.choi_dim() || choi.ncols() != dims.choi_dim() {
        return Err(ChannelError::DimensionMismatch(format!(
            "Choi matrix is {}x{}, dims need {}",
            choi.nrows(),
            choi.ncols(),
            dims.choi_dim()
        )));
    }
    Ok(())
}

/// `Tr_out J − I_in`, measured entrywise.
pub fn trace_preservation_residual(dims: &SystemDims, choi: &ComplexMatrix) -> f64 {
    let shape = TensorShape::new([dims.d_out(), dims.d_in()]);
    let reduced = partial_trace(choi, &shape, &[0]).expect("shape checked by caller");
    max_abs_diff(&reduced, &identity(dims.d_in()))
}

impl Channel {
    /// Validates complete positivity and trace preservation.
    pub fn from_choi(dims: SystemDims, choi: ComplexMatrix) -> Result<Self, ChannelError> {
        check_choi_dims(&dims, &choi)?;
        let dev = hermitian_deviation(&choi);
        if dev > CPTP_TOL {
            return Err(LinalgError::NotHermitian { deviation: dev }.into());
        }
        let choi = linalg::hermitize(&choi);
        let min_eig = min_eigenvalue(&choi);
        if min_eig < -CPTP_TOL {
            return Err(ChannelError::NotCompletelyPositive(min_eig));
        }
        let tp = trace_preservation_residual(&dims, &choi);
        if tp > CPTP_TOL {
            return Err(ChannelError::NotTracePreserving(tp));
        }
        Ok(Self { dims, choi })
    }

    /// Builds `ρ ↦ Σ_k K_k ρ K_k†`; the Kraus operators map `d_in` to `d_out`.
    pub fn from_kraus(dims: SystemDims, kraus: &[ComplexMatrix]) -> Result<Self, ChannelError> {
        let (d_out, d_in) = (dims.d_out(), dims.d_in());
        let mut choi = ComplexMatrix::zeros(d_out * d_in, d_out * d_in);
        for k in kraus {
            if k.shape() != (d_out, d_in) {
                return Err(ChannelError::DimensionMismatch(format!(
                    "Kraus operator is {}x{}, expected {d_out}x{d_in}",
                    k.nrows(),
                    k.ncols()
                )));
            }
            let v = vectorize_kraus(k);
            choi += &v * v.adjoint();
        }
        Self::from_choi(dims, choi)
    }

    pub fn identity(dims: impl Into<Vec<usize>>) -> Self {
        let dims = SystemDims::square(dims);
        let d = dims.d_in();
        Self::from_kraus(dims, &[identity(d)]).expect("identity is a channel")
    }

    /// `ρ ↦ Tr(ρ) I/d`
    pub fn completely_depolarizing(d: usize) -> Self {
        let choi = identity(d * d).unscale(d as f64);
        Self::from_choi(SystemDims::square([d]), choi).expect("depolarizing is a channel")
    }

    /// The partial-trace map discarding a system of dimension `d`.
    pub fn discard(d: usize) -> Self {
        Self::from_choi(SystemDims::new([d], [1]), identity(d)).expect("trace is a channel")
    }

    pub fn dims(&self) -> &SystemDims {
        &self.dims
    }

    pub fn choi(&self) -> &ComplexMatrix {
        &self.choi
    }

    pub fn into_choi(self) -> ComplexMatrix {
        self.choi
    }

    /// `Φ(ρ)` by contracting the Choi matrix against `ρ`.
    pub fn apply(&self, rho: &ComplexMatrix) -> Result<ComplexMatrix, ChannelError> {
        apply_choi(&self.dims, &self.choi, rho)
    }

    /// `self ⊗ other`, input and output factors concatenated.
    pub fn tensor(&self, other: &Channel) -> Channel {
        let choi = choi_tensor(&self.choi, &self.dims, &other.choi, &other.dims);
        let dims = SystemDims::new(
            [self.dims.in_dims.as_slice(), other.dims.in_dims.as_slice()].concat(),
            [
                self.dims.out_dims.as_slice(),
                other.dims.out_dims.as_slice(),
            ]
            .concat(),
        );
        Channel { dims, choi }
    }

    /// `self ∘ first`: apply `first`, then `self`.
    pub fn compose(&self, first: &Channel) -> Result<Channel, ChannelError> {
        if first.dims.d_out() != self.dims.d_in() {
            return Err(ChannelError::DimensionMismatch(format!(
                "cannot compose: inner output {} vs outer input {}",
                first.dims.d_out(),
                self.dims.d_in()
            )));
        }
        let choi = choi_compose(&self.choi, &self.dims, &first.choi, &first.dims);
        let dims = SystemDims::new(first.dims.in_dims.clone(), self.dims.out_dims.clone());
        Ok(Channel { dims, choi })
    }

    /// `self − other` as a Hermitian-preserving map.
    pub fn difference(&self, other: &Channel) -> Result<HermitianMap, ChannelError> {
        if self.dims.d_in() != other.dims.d_in() || self.dims.d_out() != other.dims.d_out() {
            return Err(ChannelError::DimensionMismatch(
                "channels act on different systems".into(),
            ));
        }
        Ok(HermitianMap {
            dims: self.dims.clone(),
            choi: &self.choi - &other.choi,
        })
    }

    /// Numerical rank of the Choi matrix (the minimal number of Kraus operators).
    pub fn choi_rank(&self) -> usize {
        linalg::eigvalsh(&self.choi)
            .iter()
            .filter(|&&l| l > CHOI_RANK_THRESHOLD)
            .count()
    }
}

impl HermitianMap {
    pub fn new(dims: SystemDims, choi: ComplexMatrix) -> Result<Self, ChannelError> {
        check_choi_dims(&dims, &choi)?;
        let dev = hermitian_deviation(&choi);
        if dev > linalg::HERMITIAN_TOL * max_abs(&choi).max(1.0) {
            return Err(LinalgError::NotHermitian { deviation: dev }.into());
        }
        Ok(Self {
            dims,
            choi: linalg::hermitize(&choi),
        })
    }

    pub fn dims(&self) -> &SystemDims {
        &self.dims
    }

    pub fn choi(&self) -> &ComplexMatrix {
        &self.choi
    }

    /// True when `Tr Φ(X) = 0` for every `X`, i.e. `Tr_out J = 0`.
    pub fn is_trace_annihilating(&self, tol: f64) -> bool {
        let shape = TensorShape::new([self.dims.d_out(), self.dims.d_in()]);
        let reduced = partial_trace(&self.choi, &shape, &[0]).expect("dims checked");
        max_abs(&reduced) <= tol
    }

    pub fn apply(&self, rho: &ComplexMatrix) -> Result<ComplexMatrix, ChannelError> {
        apply_choi(&self.dims, &self.choi, rho)
    }
}

impl UnitaryGate {
    pub fn new(dims: SystemDims, u: ComplexMatrix) -> Result<Self, ChannelError> {
        if dims.d_in() != dims.d_out() || u.shape() != (dims.d_out(), dims.d_in()) {
            return Err(ChannelError::DimensionMismatch(format!(
                "unitary is {}x{}, dims are {:?} -> {:?}",
                u.nrows(),
                u.ncols(),
                dims.in_dims,
                dims.out_dims
            )));
        }
        let residual = max_abs_diff(&(u.adjoint() * &u), &identity(dims.d_in()));
        if residual > UNITARY_TOL {
            return Err(ChannelError::NotUnitary(residual));
        }
        Ok(Self { dims, u })
    }

    /// A two-party gate `A ⊗ B → A' ⊗ B'`.
    pub fn bipartite(
        a: usize,
        b: usize,
        a_out: usize,
        b_out: usize,
        u: ComplexMatrix,
    ) -> Result<Self, ChannelError> {
        Self::new(SystemDims::new([a, b], [a_out, b_out]), u)
    }

    pub fn dims(&self) -> &SystemDims {
        &self.dims
    }

    pub fn matrix(&self) -> &ComplexMatrix {
        &self.u
    }

    pub fn inverse(&self) -> UnitaryGate {
        UnitaryGate {
            dims: SystemDims::new(self.dims.out_dims.clone(), self.dims.in_dims.clone()),
            u: dagger(&self.u),
        }
    }

    /// `(a, b, a_out, b_out)` for a gate with a declared bipartite split.
    pub fn split(&self) -> Result<(usize, usize, usize, usize), ChannelError> {
        match (self.dims.in_dims.as_slice(), self.dims.out_dims.as_slice()) {
            ([a, b], [a2, b2]) => Ok((*a, *b, *a2, *b2)),
            _ => Err(ChannelError::MissingBipartiteSplit),
        }
    }

    pub fn to_channel(&self) -> Channel {
        channel_from_unitary(self)
    }
}

/// `|K⟩⟩` with entry `(o, i)` equal to `K[o, i]`.
fn vectorize_kraus(k: &ComplexMatrix) -> linalg::ComplexVector {
    let (d_out, d_in) = k.shape();
    linalg::ComplexVector::from_fn(d_out * d_in, |idx, _| k[(idx / d_in, idx % d_in)])
}

/// Rank-one Choi matrix `|u⟩⟩⟨⟨u|`.
pub fn channel_from_unitary(g: &UnitaryGate) -> Channel {
    let v = vectorize_kraus(&g.u);
    Channel {
        dims: g.dims.clone(),
        choi: &v * v.adjoint(),
    }
}

pub(crate) fn apply_choi(
    dims: &SystemDims,
    choi: &ComplexMatrix,
    rho: &ComplexMatrix,
) -> Result<ComplexMatrix, ChannelError> {
    let (d_out, d_in) = (dims.d_out(), dims.d_in());
    if rho.shape() != (d_in, d_in) {
        return Err(ChannelError::DimensionMismatch(format!(
            "input is {}x{}, channel expects {d_in}x{d_in}",
            rho.nrows(),
            rho.ncols()
        )));
    }
    let mut out = ComplexMatrix::zeros(d_out, d_out);
    for o in 0..d_out {
        for o2 in 0..d_out {
            let mut acc = C64::new(0.0, 0.0);
            for i in 0..d_in {
                for j in 0..d_in {
                    acc += choi[(o * d_in + i, o2 * d_in + j)] * rho[(i, j)];
                }
            }
            out[(o, o2)] = acc;
        }
    }
    Ok(out)
}

/// Choi matrix of `Φ₁ ⊗ Φ₂` from the two Choi matrices. Linear in each argument.
pub fn choi_tensor(
    j1: &ComplexMatrix,
    d1: &SystemDims,
    j2: &ComplexMatrix,
    d2: &SystemDims,
) -> ComplexMatrix {
    let shape = TensorShape::new([d1.d_out(), d1.d_in(), d2.d_out(), d2.d_in()]);
    permute_factors(&kron(j1, j2), &shape, &[0, 2, 1, 3]).expect("shape matches by construction")
}

/// Choi matrix of `outer ∘ inner`.
pub fn choi_compose(
    outer: &ComplexMatrix,
    outer_dims: &SystemDims,
    inner: &ComplexMatrix,
    inner_dims: &SystemDims,
) -> ComplexMatrix {
    let (d_in, d_mid, d_out) = (inner_dims.d_in(), inner_dims.d_out(), outer_dims.d_out());
    debug_assert_eq!(d_mid, outer_dims.d_in());
    let n = d_out * d_in;
    let mut out = ComplexMatrix::zeros(n, n);
    // J[(o,i),(o',j)] = Σ_{k,k'} inner[(k,i),(k',j)] outer[(o,k),(o',k')]
    for i in 0..d_in {
        for j in 0..d_in {
            for k in 0..d_mid {
                for k2 in 0..d_mid {
                    let w = inner[(k * d_in + i, k2 * d_in + j)];
                    if w == C64::new(0.0, 0.0) {
                        continue;
                    }
                    for o in 0..d_out {
                        for o2 in 0..d_out {
                            out[(o * d_in + i, o2 * d_in + j)] +=
                                w * outer[(o * d_mid + k, o2 * d_mid + k2)];
                        }
                    }
                }
            }
        }
    }
    out
}

/// `(Tr_{A'} ⊗ I_{B'}) ∘ U`: Bob's marginal of a bipartite gate, `A ⊗ B → B'`.
pub fn marginal_to_b(u: &UnitaryGate) -> Result<Channel, ChannelError> {
    let (a, b, a_out, b_out) = u.split()?;
    let choi = channel_from_unitary(u).choi;
    let shape = TensorShape::new([a_out, b_out, a, b]);
    let reduced = partial_trace(&choi, &shape, &[0])?;
    Ok(Channel {
        dims: SystemDims::new([a, b], [b_out]),
        choi: reduced,
    })
}

/// Choi matrix of `Tr_A ⊗ C` for a map `C: B → B'` given by its Choi matrix,
/// as a map `A ⊗ B → B'`. Linear in `choi_c`.
pub fn discard_a_then(d_a: usize, choi_c: &ComplexMatrix, c_dims: &SystemDims) -> ComplexMatrix {
    choi_tensor(&identity(d_a), &SystemDims::new([d_a], [1]), choi_c, c_dims)
}

/// Choi matrix of `X ⊗ I_d` for a map `X` given by its Choi matrix. Linear in `choi_x`.
pub fn extend_with_identity(
    choi_x: &ComplexMatrix,
    x_dims: &SystemDims,
    d: usize,
) -> ComplexMatrix {
    let id = Channel::identity([d]);
    choi_tensor(choi_x, x_dims, id.choi(), id.dims())
}

/// The swap probe `T(U) = (I_Ā ⊗ U)(S_{ĀA} ⊗ I_B)(I_Ā ⊗ U⁻¹)` as a unitary on
/// `Ā ⊗ A' ⊗ B'`, where `Ā` is a copy of Alice's input.
pub fn swap_probe_unitary(u: &UnitaryGate) -> Result<UnitaryGate, ChannelError> {
    let (a, b, a_out, b_out) = u.split()?;
    let lift = kron(&identity(a), u.matrix());
    let swap = linalg::permutation_unitary(&TensorShape::new([a, a, b]), &[1, 0, 2])?;
    let t = &lift * swap * dagger(&lift);
    UnitaryGate::new(SystemDims::square([a, a_out, b_out]), t)
}

pub fn swap_probe(u: &UnitaryGate) -> Result<Channel, ChannelError> {
    Ok(channel_from_unitary(&swap_probe_unitary(u)?))
}

/// Minimal Stinespring dilation `V: in → out ⊗ E`.
#[derive(Debug, Clone)]
pub struct Stinespring {
    pub isometry: ComplexMatrix,
    pub env_dim: usize,
    pub d_out: usize,
}

impl Stinespring {
    /// `Tr_E(V ρ V†)`
    pub fn apply(&self, rho: &ComplexMatrix) -> ComplexMatrix {
        let full = &self.isometry * rho * self.isometry.adjoint();
        partial_trace(&full, &TensorShape::new([self.d_out, self.env_dim]), &[1])
            .expect("dims consistent")
    }
}

/// Dilation from the spectral decomposition of the Choi matrix; the
/// environment dimension is the numerical Choi rank.
pub fn stinespring(ch: &Channel) -> Stinespring {
    let (d_out, d_in) = (ch.dims.d_out(), ch.dims.d_in());
    let (vals, vecs) = linalg::eigh_unchecked(&linalg::hermitize(&ch.choi));
    let kept: Vec<usize> = (0..vals.len())
        .filter(|&k| vals[k] > CHOI_RANK_THRESHOLD)
        .collect();
    let env = kept.len().max(1);
    let mut v = ComplexMatrix::zeros(d_out * env, d_in);
    for (e, &k) in kept.iter().enumerate() {
        let s = vals[k].sqrt();
        for o in 0..d_out {
            for i in 0..d_in {
                v[(o * env + e, i)] = vecs[(o * d_in + i, k)] * s;
            }
        }
    }
    Stinespring {
        isometry: v,
        env_dim: env,
        d_out,
    }
}

/// Named two-qubit gates, plus local products `U_A ⊗ U_B`.
#[derive(Debug, Clone, PartialEq)]
pub enum GateSpec {
    Identity,
    /// Target is the first qubit (Alice), control the second (Bob).
    Cnot,
    Swap,
    /// `diag(1, 1, 1, e^{iθ})`
    Cz(f64),
    /// `cos θ I + i sin θ SWAP`
    PartialSwap(f64),
    Local(ComplexMatrix, ComplexMatrix),
}

impl GateSpec {
    /// Parses `identity`, `cnot`, `swap`, `cz` and `pswap` (the last two need `theta`).
    pub fn parse(name: &str, theta: Option<f64>) -> Result<Self, ChannelError> {
        let need = |t: Option<f64>| t.ok_or_else(|| ChannelError::MissingAngle(name.to_string()));
        match name.to_ascii_lowercase().as_str() {
            "identity" | "id" => Ok(Self::Identity),
            "cnot" => Ok(Self::Cnot),
            "swap" => Ok(Self::Swap),
            "cz" => Ok(Self::Cz(need(theta)?)),
            "pswap" => Ok(Self::PartialSwap(need(theta)?)),
            _ => Err(ChannelError::UnknownGate(name.to_string())),
        }
    }

    pub fn label(&self) -> String {
        match self {
            Self::Identity => "identity".into(),
            Self::Cnot => "cnot".into(),
            Self::Swap => "swap".into(),
            Self::Cz(t) => format!("cz({t})"),
            Self::PartialSwap(t) => format!("pswap({t})"),
            Self::Local(..) => "local".into(),
        }
    }
}

fn swap_matrix(d: usize) -> ComplexMatrix {
    linalg::permutation_unitary(&TensorShape::new([d, d]), &[1, 0]).expect("valid permutation")
}

/// Builds a gate from the zoo with its `A ⊗ B → A' ⊗ B'` split declared.
pub fn gate_zoo(spec: &GateSpec) -> Result<UnitaryGate, ChannelError> {
    let one = c(1.0, 0.0);
    match spec {
        GateSpec::Identity => UnitaryGate::bipartite(2, 2, 2, 2, identity(4)),
        GateSpec::Cnot => {
            // |a b⟩ ↦ |a⊕b, b⟩
            let mut u = ComplexMatrix::zeros(4, 4);
            for a in 0..2 {
                for b in 0..2 {
                    u[(2 * (a ^ b) + b, 2 * a + b)] = one;
                }
            }
            UnitaryGate::bipartite(2, 2, 2, 2, u)
        }
        GateSpec::Swap => UnitaryGate::bipartite(2, 2, 2, 2, swap_matrix(2)),
        GateSpec::Cz(theta) => {
            let mut u = identity(4);
            u[(3, 3)] = C64::from_polar(1.0, *theta);
            UnitaryGate::bipartite(2, 2, 2, 2, u)
        }
        GateSpec::PartialSwap(theta) => {
            let u = identity(4).scale(theta.cos()) + swap_matrix(2) * c(0.0, theta.sin());
            UnitaryGate::bipartite(2, 2, 2, 2, u)
        }
        GateSpec::Local(ua, ub) => UnitaryGate::new(
            SystemDims::new([ua.ncols(), ub.ncols()], [ua.nrows(), ub.nrows()]),
            kron(ua, ub),
        ),
    }
}

/// `|±⟩ = (|0⟩ ± |1⟩)/√2`
pub fn plus_minus(sign: f64) -> linalg::ComplexVector {
    linalg::ComplexVector::from_vec(vec![c(FRAC_1_SQRT_2, 0.0), c(sign * FRAC_1_SQRT_2, 0.0)])
}

#[derive(Debug, Serialize, Deserialize)]
struct GateFileDims {
    a: usize,
    b: usize,
    a_out: usize,
    b_out: usize,
}

#[derive(Debug, Serialize, Deserialize)]
struct JsonComplex {
    re: f64,
    im: f64,
}

/// On-disk gate description: row-major matrix over the big-endian basis.
#[derive(Debug, Serialize, Deserialize)]
struct GateFile {
    dims: GateFileDims,
    matrix: Vec<Vec<JsonComplex>>,
}

pub fn gate_from_json(text: &str) -> Result<UnitaryGate, ChannelError> {
    let file: GateFile =
        serde_json::from_str(text).map_err(|e| ChannelError::GateFile(e.to_string()))?;
    let n = file.dims.a * file.dims.b;
    if file.matrix.len() != n || file.matrix.iter().any(|row| row.len() != n) {
        return Err(ChannelError::GateFile(format!("matrix must be {n}x{n}")));
    }
    let u = ComplexMatrix::from_fn(n, n, |i, j| {
        let z = &file.matrix[i][j];
        c(z.re, z.im)
    });
    UnitaryGate::bipartite(
        file.dims.a,
        file.dims.b,
        file.dims.a_out,
        file.dims.b_out,
        u,
    )
}

pub fn gate_to_json(g: &UnitaryGate) -> Result<String, ChannelError> {
    let (a, b, a_out, b_out) = g.split()?;
    let m = g.matrix();
    let file = GateFile {
        dims: GateFileDims { a, b, a_out, b_out },
        matrix: (0..m.nrows())
            .map(|i| {
                (0..m.ncols())
                    .map(|j| JsonComplex {
                        re: m[(i, j)].re,
                        im: m[(i, j)].im,
                    })
                    .collect()
            })
            .collect(),
    };
    serde_json::to_string_pretty(&file).map_err(|e| ChannelError::GateFile(e.to_string()))
}

pub fn load_gate_file(path: &Path) -> Result<UnitaryGate, ChannelError> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| ChannelError::GateFile(format!("{}: {e}", path.display())))?;
    gate_from_json(&text)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::{basis_vector, projector, ComplexVector};
    use crate::random::{haar_isometry, haar_unitary, random_density_matrix, rng_from_seed};

    fn ket2(a: usize, b: usize) -> ComplexVector {
        basis_vector(4, 2 * a + b)
    }

    fn cnot() -> UnitaryGate {
        gate_zoo(&GateSpec::Cnot).unwrap()
    }

    fn random_local(seed: u64) -> UnitaryGate {
        let mut rng = rng_from_seed(seed);
        let ua = haar_unitary(&mut rng, 2);
        let ub = haar_unitary(&mut rng, 2);
        gate_zoo(&GateSpec::Local(ua, ub)).unwrap()
    }

    #[test]
    fn identity_gate_choi_is_bell_projector() {
        let id = UnitaryGate::new(SystemDims::square([2]), identity(2)).unwrap();
        let ch = channel_from_unitary(&id);
        let bell = ket2(0, 0) + ket2(1, 1);
        assert!(max_abs_diff(ch.choi(), &projector(&bell)) < 1e-15);
        assert!((linalg::trace(ch.choi()).re - 2.0).abs() < 1e-15);
    }

    #[test]
    fn cnot_choi_is_rank_one() {
        let ch = channel_from_unitary(&cnot());
        assert_eq!(ch.choi_rank(), 1);
        assert!((linalg::trace(ch.choi()).re - 4.0).abs() < 1e-14);
        assert!(Channel::from_choi(ch.dims().clone(), ch.choi().clone()).is_ok());
    }

    #[test]
    fn cnot_targets_first_qubit() {
        let ch = cnot().to_channel();
        let out = ch.apply(&projector(&ket2(0, 1))).unwrap();
        assert!(max_abs_diff(&out, &projector(&ket2(1, 1))) < 1e-15);
        assert_eq!(cnot().matrix() * ket2(1, 1), ket2(0, 1));
    }

    #[test]
    fn non_unitary_rejected() {
        let m = identity(4).scale(2.0);
        assert!(matches!(
            UnitaryGate::bipartite(2, 2, 2, 2, m),
            Err(ChannelError::NotUnitary(_))
        ));
    }

    #[test]
    fn apply_examples() {
        let mut rng = rng_from_seed(4);
        let rho = random_density_matrix(&mut rng, 3);
        let out = Channel::identity([3]).apply(&rho).unwrap();
        assert!(max_abs_diff(&out, &rho) < 1e-15);

        let dep = Channel::completely_depolarizing(3).apply(&rho).unwrap();
        assert!(max_abs_diff(&dep, &identity(3).unscale(3.0)) < 1e-15);

        // direct matrix-vector oracle for CNOT on |+⟩|b⟩
        for bit in 0..2 {
            let input = kron(
                &projector(&plus_minus(1.0)),
                &projector(&basis_vector(2, bit)),
            );
            let psi = linalg::kron_vec(&plus_minus(1.0), &basis_vector(2, bit));
            let direct = projector(&(cnot().matrix() * psi));
            let out = cnot().to_channel().apply(&input).unwrap();
            assert!(max_abs_diff(&out, &direct) < 1e-15);
            assert!(max_abs_diff(&out, &input) < 1e-15);
        }
    }

    #[test]
    fn apply_rejects_wrong_dimension() {
        assert!(Channel::identity([2]).apply(&identity(3)).is_err());
    }

    #[test]
    fn tensor_and_compose_examples() {
        let id2 = Channel::identity([2]);
        let joint = id2.tensor(&id2);
        assert!(max_abs_diff(joint.choi(), Channel::identity([2, 2]).choi()) < 1e-15);

        let u = UnitaryGate::new(
            SystemDims::square([3]),
            haar_unitary(&mut rng_from_seed(9), 3),
        )
        .unwrap();
        let round = u.inverse().to_channel().compose(&u.to_channel()).unwrap();
        assert!(max_abs_diff(round.choi(), Channel::identity([3]).choi()) < 1e-10);

        let cc = cnot().to_channel().compose(&cnot().to_channel()).unwrap();
        assert!(max_abs_diff(cc.choi(), Channel::identity([2, 2]).choi()) < 1e-14);
    }

    #[test]
    fn tensor_acts_factorwise() {
        let mut rng = rng_from_seed(8);
        let u = UnitaryGate::new(SystemDims::square([2]), haar_unitary(&mut rng, 2))
            .unwrap()
            .to_channel();
        let dep = Channel::completely_depolarizing(3);
        let r1 = random_density_matrix(&mut rng, 2);
        let r2 = random_density_matrix(&mut rng, 3);
        let lhs = u.tensor(&dep).apply(&kron(&r1, &r2)).unwrap();
        let rhs = kron(&u.apply(&r1).unwrap(), &dep.apply(&r2).unwrap());
        assert!(max_abs_diff(&lhs, &rhs) < 1e-10);
    }

    #[test]
    fn compose_dimension_mismatch() {
        let r = Channel::identity([2]).compose(&Channel::identity([3]));
        assert!(matches!(r, Err(ChannelError::DimensionMismatch(_))));
    }

    #[test]
    fn marginal_of_local_gate_factorizes() {
        let mut rng = rng_from_seed(10);
        let ua = haar_unitary(&mut rng, 2);
        let ub = haar_unitary(&mut rng, 2);
        let g = gate_zoo(&GateSpec::Local(ua, ub.clone())).unwrap();
        let marg = marginal_to_b(&g).unwrap();
        let ub_ch = UnitaryGate::new(SystemDims::square([2]), ub)
            .unwrap()
            .to_channel();
        let expected = discard_a_then(2, ub_ch.choi(), ub_ch.dims());
        assert!(max_abs_diff(marg.choi(), &expected) <= 1e-10);
    }

    #[test]
    fn marginal_of_swap_returns_alice_state() {
        let marg = marginal_to_b(&gate_zoo(&GateSpec::Swap).unwrap()).unwrap();
        let mut rng = rng_from_seed(12);
        let rho = random_density_matrix(&mut rng, 4);
        let out = marg.apply(&rho).unwrap();
        // oracle: direct contraction Tr_B ρ
        let oracle = partial_trace(&rho, &TensorShape::new([2, 2]), &[1]).unwrap();
        assert!(max_abs_diff(&out, &oracle) < 1e-14);
    }

    #[test]
    fn marginal_of_cnot_kicks_back_phase() {
        let marg = marginal_to_b(&cnot()).unwrap();
        let input = kron(&projector(&plus_minus(-1.0)), &projector(&plus_minus(1.0)));
        let out = marg.apply(&input).unwrap();
        assert!(max_abs_diff(&out, &projector(&plus_minus(-1.0))) < 1e-14);
    }

    #[test]
    fn marginal_needs_bipartite_split() {
        let g = UnitaryGate::new(SystemDims::square([4]), identity(4)).unwrap();
        assert!(matches!(
            marginal_to_b(&g),
            Err(ChannelError::MissingBipartiteSplit)
        ));
    }

    #[test]
    fn swap_probe_of_local_gate_factorizes() {
        let mut rng = rng_from_seed(14);
        let ua = haar_unitary(&mut rng, 2);
        let ub = haar_unitary(&mut rng, 2);
        let g = gate_zoo(&GateSpec::Local(ua.clone(), ub)).unwrap();
        let t = swap_probe_unitary(&g).unwrap();
        let tprime = kron(&dagger(&ua), &ua) * swap_matrix(2);
        assert!(max_abs_diff(t.matrix(), &kron(&tprime, &identity(2))) < 1e-14);
    }

    #[test]
    fn swap_probe_of_swap_exchanges_outer_registers() {
        let t = swap_probe_unitary(&gate_zoo(&GateSpec::Swap).unwrap()).unwrap();
        let p = linalg::permutation_unitary(&TensorShape::new([2, 2, 2]), &[2, 1, 0]).unwrap();
        assert!(max_abs_diff(t.matrix(), &p) < 1e-15);
        // register chase on basis states: (x, y, z) -> (z, y, x)
        for idx in 0..8 {
            let (x, y, z) = (idx >> 2, (idx >> 1) & 1, idx & 1);
            let out = t.matrix() * basis_vector(8, idx);
            assert_eq!(out, basis_vector(8, (z << 2) | (y << 1) | x));
        }
    }

    #[test]
    fn swap_probe_of_cnot_maps_witness_state() {
        let t = swap_probe_unitary(&cnot()).unwrap();
        let (p, m) = (plus_minus(1.0), plus_minus(-1.0));
        let input = linalg::kron_vec(&linalg::kron_vec(&m, &p), &p);
        let expected = linalg::kron_vec(&linalg::kron_vec(&p, &m), &m);
        assert!((t.matrix() * input - expected).norm() < 1e-14);
        assert_eq!(swap_probe(&cnot()).unwrap().choi_rank(), 1);
    }

    #[test]
    fn stinespring_examples() {
        let u = UnitaryGate::new(
            SystemDims::square([2]),
            haar_unitary(&mut rng_from_seed(15), 2),
        )
        .unwrap();
        let dil = stinespring(&u.to_channel());
        assert_eq!(dil.env_dim, 1);
        let phase = dil.isometry[(0, 0)] / u.matrix()[(0, 0)];
        assert!((phase.norm() - 1.0).abs() < 1e-10);
        assert!(max_abs_diff(&dil.isometry, &u.matrix().map(|z| z * phase)) < 1e-10);

        assert_eq!(stinespring(&Channel::completely_depolarizing(2)).env_dim, 4);

        let dephase = Channel::from_kraus(
            SystemDims::square([2]),
            &[
                projector(&basis_vector(2, 0)),
                projector(&basis_vector(2, 1)),
            ],
        )
        .unwrap();
        assert_eq!(stinespring(&dephase).env_dim, 2);
    }

    #[test]
    fn stinespring_round_trip_on_operator_basis() {
        let mut rng = rng_from_seed(16);
        let v = haar_isometry(&mut rng, 6, 2);
        let kraus: Vec<ComplexMatrix> = (0..3).map(|e| v.rows(2 * e, 2).into_owned()).collect();
        let ch = Channel::from_kraus(SystemDims::square([2]), &kraus).unwrap();
        let dil = stinespring(&ch);
        assert!(max_abs_diff(&(dil.isometry.adjoint() * &dil.isometry), &identity(2)) < 1e-9);
        for i in 0..2 {
            for j in 0..2 {
                let e = linalg::unit_matrix(2, i, j);
                assert!(max_abs_diff(&dil.apply(&e), &ch.apply(&e).unwrap()) < 1e-9);
            }
        }
    }

    #[test]
    fn gate_zoo_examples() {
        assert!(max_abs_diff(gate_zoo(&GateSpec::Cz(0.0)).unwrap().matrix(), &identity(4)) < 1e-15);
        let ps = gate_zoo(&GateSpec::PartialSwap(std::f64::consts::FRAC_PI_2)).unwrap();
        let i_swap = swap_matrix(2) * c(0.0, 1.0);
        assert!(max_abs_diff(ps.matrix(), &i_swap) < 1e-15);
        // exp(iθS) = cos θ I + i sin θ S because S² = I; check against a truncated series
        let theta = 0.37;
        let gen = swap_matrix(2) * c(0.0, theta);
        let mut term = identity(4);
        let mut series = identity(4);
        for k in 1..30 {
            term = &term * &gen / c(k as f64, 0.0);
            series += &term;
        }
        let ps = gate_zoo(&GateSpec::PartialSwap(theta)).unwrap();
        assert!(max_abs_diff(ps.matrix(), &series) < 1e-14);
        assert!(matches!(
            GateSpec::parse("toffoli", None),
            Err(ChannelError::UnknownGate(_))
        ));
        assert!(matches!(
            GateSpec::parse("cz", None),
            Err(ChannelError::MissingAngle(_))
        ));
    }

    #[test]
    fn dephasing_after_cnot_forgets_target() {
        let dephase = Channel::from_kraus(
            SystemDims::square([2]),
            &[
                projector(&basis_vector(2, 0)),
                projector(&basis_vector(2, 1)),
            ],
        )
        .unwrap();
        let rhs = Channel::discard(2).tensor(&dephase);
        let lhs = rhs.compose(&cnot().to_channel()).unwrap();
        assert!(max_abs_diff(lhs.choi(), rhs.choi()) <= 1e-10);
    }

    #[test]
    fn gate_file_round_trip() {
        let g = random_local(3);
        let text = gate_to_json(&g).unwrap();
        let back = gate_from_json(&text).unwrap();
        assert!(max_abs_diff(back.matrix(), g.matrix()) < 1e-15);
        assert!(gate_from_json("{\"dims\": 3}").is_err());
    }
}
