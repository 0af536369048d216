//! Closed-form CNOT computations that certify the SDP values independently.

use thiserror::Error;

use crate::channel::{
    discard_a_then, gate_zoo, marginal_to_b, swap_probe_unitary, Channel, ChannelError, GateSpec,
    HermitianMap, SystemDims,
};
use crate::diamond::{diamond_norm_certified, Certificate, QuantifierError};
use crate::linalg::{
    self, basis_vector, c, identity, kron, max_abs_diff, partial_trace, projector, trace_norm,
    ComplexMatrix, ComplexVector, TensorShape,
};

#[derive(Debug, Error)]
pub enum WitnessError {
    #[error("state must be a normalized two-qubit vector (norm {0})")]
    NotNormalized(f64),
    #[error("expected a vector of length 4, got {0}")]
    WrongDimension(usize),
}

/// `ρ ↦ P₀ρP₀ + P₁ρP₁` with `P_k = |k⟩⟨k|`.
pub fn measurement_channel() -> Channel {
    Channel::from_kraus(
        SystemDims::square([2]),
        &[
            projector(&basis_vector(2, 0)),
            projector(&basis_vector(2, 1)),
        ],
    )
    .expect("projective measurement is a channel")
}

/// Product of `|+⟩`/`|−⟩` kets; `signs[k]` is `+1` or `−1`. Amplitudes are
/// exactly `±2^{-n/2}`.
pub fn sign_ket(signs: &[i8]) -> ComplexVector {
    let n = signs.len();
    let amp = 0.5f64.powi(n as i32).sqrt();
    ComplexVector::from_fn(1 << n, |idx, _| {
        let mut s = 1.0;
        for (k, &sign) in signs.iter().enumerate() {
            let bit = (idx >> (n - 1 - k)) & 1;
            if bit == 1 && sign < 0 {
                s = -s;
            }
        }
        c(s * amp, 0.0)
    })
}

#[derive(Debug, Clone)]
pub struct WitnessReport {
    /// `|+−++⟩⟨+−++|` on `E ⊗ Ā ⊗ A' ⊗ B'`.
    pub probe_state: ComplexMatrix,
    /// `(I_E ⊗ T(Cnot))` applied to the probe.
    pub true_output: ComplexMatrix,
    pub bprime_marginal_true: ComplexMatrix,
    /// `B'` marginal after any `I_E ⊗ T' ⊗ I_{B'}`.
    pub bprime_marginal_factorized: ComplexMatrix,
    /// Distance of the output from `|++−−⟩⟨++−−|`.
    pub output_residual: f64,
    /// Largest deviation of the `B'` marginal from `|+⟩⟨+|` over the sampled `T'`.
    pub factorized_residual: f64,
    /// `2·|Tr P(ρ_true − ρ_fact)|` with `P = I ⊗ |+⟩⟨+|`.
    pub certified_lower_bound: f64,
}

impl WitnessReport {
    pub fn holds(&self) -> bool {
        self.output_residual <= 1e-12 && self.factorized_residual <= 1e-12
    }
}

/// Marginal on the last qubit of a state on `E ⊗ Ā ⊗ A' ⊗ B'`.
fn bprime_marginal(rho: &ComplexMatrix) -> ComplexMatrix {
    partial_trace(rho, &TensorShape::new([2, 2, 2, 2]), &[0, 1, 2]).expect("four-qubit state")
}

/// The probe `|+−++⟩` through `I_E ⊗ T(Cnot)` and the projector argument
/// bounding `C(Cnot)` from below by 2.
///
/// For any channel `T'` on `Ā ⊗ A'`, the `B'` marginal of `(I_E ⊗ T' ⊗ I_{B'})(ρ)`
/// is the input marginal `|+⟩⟨+|`. This is checked on `sample_t_prime`
/// (identity, swap and random channels) rather than assumed.
pub fn cnot_causal_witness() -> WitnessReport {
    let probe = sign_ket(&[1, -1, 1, 1]);
    let rho = projector(&probe);
    let t = swap_probe_unitary(&gate_zoo(&GateSpec::Cnot).expect("zoo gate"))
        .expect("cnot is bipartite");
    let full = kron(&identity(2), t.matrix());
    let out_vec = &full * &probe;
    let expected = sign_ket(&[1, 1, -1, -1]);
    let true_output = projector(&out_vec);
    let output_residual = max_abs_diff(&true_output, &projector(&expected));
    let marg_true = bprime_marginal(&true_output);

    let plus = projector(&sign_ket(&[1]));
    let mut factorized_residual = 0.0f64;
    let mut marg_fact = plus.clone();
    for t_prime in sample_t_prime() {
        let lifted = Channel::identity([2])
            .tensor(&t_prime)
            .tensor(&Channel::identity([2]));
        let out = lifted.apply(&rho).expect("dims match");
        let m = bprime_marginal(&out);
        factorized_residual = factorized_residual.max(max_abs_diff(&m, &plus));
        marg_fact = m;
    }

    // Tr[P σ] for P = I ⊗ |+⟩⟨+| only sees the B' marginal
    let p_true = linalg::inner(&plus, &marg_true);
    let p_fact = linalg::inner(&plus, &marg_fact);
    let certified_lower_bound = (2.0 * (p_true - p_fact).abs()).min(2.0);
    WitnessReport {
        probe_state: rho,
        true_output,
        bprime_marginal_true: marg_true,
        bprime_marginal_factorized: marg_fact,
        output_residual,
        factorized_residual,
        certified_lower_bound,
    }
}

fn sample_t_prime() -> Vec<Channel> {
    let mut rng = crate::random::rng_from_seed(0x7e57);
    let dims = SystemDims::square([2, 2]);
    let mut out = vec![
        Channel::identity([2, 2]),
        gate_zoo(&GateSpec::Swap).expect("zoo gate").to_channel(),
        Channel::completely_depolarizing(4),
    ];
    for rank in 1..=4 {
        out.push(crate::random::random_channel(&mut rng, dims.clone(), rank));
    }
    out.into_iter()
        .map(|ch| Channel::from_choi(dims.clone(), ch.into_choi()).expect("valid channel"))
        .collect()
}

/// `2√(p(1−p))`
pub fn gap_formula(p: f64) -> f64 {
    2.0 * (p * (1.0 - p)).max(0.0).sqrt()
}

fn check_state(psi: &ComplexVector) -> Result<(), WitnessError> {
    if psi.len() != 4 {
        return Err(WitnessError::WrongDimension(psi.len()));
    }
    let norm = psi.norm();
    if (norm - 1.0).abs() > 1e-10 {
        return Err(WitnessError::NotNormalized(norm));
    }
    Ok(())
}

/// `‖ρ − (I_E ⊗ M)ρ‖₁` for `ψ = α|00⟩ + β|01⟩ + γ|10⟩ + δ|11⟩` on `E ⊗ B`,
/// via the eigenvalues `±√(p(1−p))` with `p = |α|² + |γ|²`.
pub fn dephasing_gap(psi: &ComplexVector) -> Result<f64, WitnessError> {
    check_state(psi)?;
    let p = psi[0].norm_sqr() + psi[2].norm_sqr();
    Ok(gap_formula(p))
}

/// Same quantity by building both states and taking the trace norm.
pub fn dephasing_gap_direct(psi: &ComplexVector) -> Result<f64, WitnessError> {
    check_state(psi)?;
    let rho = projector(psi);
    let dephased = Channel::identity([2])
        .tensor(&measurement_channel())
        .apply(&rho)
        .expect("dims match");
    Ok(trace_norm(&(rho - dephased)))
}

/// Analytic `S_M(Cnot) = ‖(Tr_{A'} ⊗ I)∘Cnot − Tr_A ⊗ M‖⋄`: the supremum of
/// `2√(p(1−p))` over pure inputs, attained at `p = ½`.
pub fn sm_cnot() -> f64 {
    gap_formula(0.5)
}

/// The Hermitian map whose diamond norm is `S_M(Cnot)`.
pub fn sm_cnot_map() -> HermitianMap {
    let cnot = gate_zoo(&GateSpec::Cnot).expect("zoo gate");
    let marginal = marginal_to_b(&cnot).expect("bipartite");
    let m = measurement_channel();
    let fixed = discard_a_then(2, m.choi(), m.dims());
    HermitianMap::new(marginal.dims().clone(), marginal.choi() - fixed)
        .expect("difference of channels")
}

/// `S_M(Cnot)` as a diamond-norm program.
pub fn sm_cnot_sdp(tol: f64) -> Result<Certificate, QuantifierError> {
    diamond_norm_certified(&sm_cnot_map(), tol)
}

/// Choi distance between `(Tr_A ⊗ M)∘Cnot` and `Tr_A ⊗ M`.
pub fn measurement_absorbs_cnot() -> Result<f64, ChannelError> {
    let m = measurement_channel();
    let fixed = Channel::discard(2).tensor(&m);
    let composed = fixed.compose(&gate_zoo(&GateSpec::Cnot)?.to_channel())?;
    Ok(max_abs_diff(composed.choi(), fixed.choi()))
}

/// Kets as `|+−…⟩` strings.
pub fn sign_label(signs: &[i8]) -> String {
    let body: String = signs
        .iter()
        .map(|&s| if s > 0 { '+' } else { '-' })
        .collect();
    format!("|{body}>")
}

pub const PROBE_SIGNS: [i8; 4] = [1, -1, 1, 1];
pub const OUTPUT_SIGNS: [i8; 4] = [1, 1, -1, -1];

#[cfg(test)]
mod tests {
    use super::*;
    use crate::diamond::DEFAULT_TOL;
    use crate::linalg::kron_vec;
    use crate::random::{random_pure_state, rng_from_seed};

    #[test]
    fn measurement_examples() {
        let m = measurement_channel();
        let zero = projector(&basis_vector(2, 0));
        assert!(max_abs_diff(&m.apply(&zero).unwrap(), &zero) < 1e-15);
        let plus = projector(&sign_ket(&[1]));
        assert!(max_abs_diff(&m.apply(&plus).unwrap(), &identity(2).unscale(2.0)) < 1e-15);
        let mm = m.compose(&m).unwrap();
        assert!(max_abs_diff(mm.choi(), m.choi()) < 1e-12);
    }

    #[test]
    fn sign_kets_are_exact() {
        let k = sign_ket(&PROBE_SIGNS);
        assert!(k.iter().all(|z| z.re.abs() == 0.25 && z.im == 0.0));
        assert_eq!(k[0].re, 0.25);
        assert_eq!(k[4].re, -0.25);
        assert_eq!(sign_label(&OUTPUT_SIGNS), "|++-->");
        let direct = kron_vec(
            &kron_vec(&sign_ket(&[1]), &sign_ket(&[-1])),
            &kron_vec(&sign_ket(&[1]), &sign_ket(&[1])),
        );
        assert!((direct - k).norm() < 1e-15);
    }

    #[test]
    fn witness_certifies_two() {
        let w = cnot_causal_witness();
        assert!(w.output_residual <= 1e-12);
        assert!(w.factorized_residual <= 1e-12);
        assert!((w.certified_lower_bound - 2.0).abs() <= 1e-12);
        let minus = projector(&sign_ket(&[-1]));
        assert!(max_abs_diff(&w.bprime_marginal_true, &minus) < 1e-12);
        assert!(
            (trace_norm(&(&w.bprime_marginal_true - &w.bprime_marginal_factorized)) - 2.0).abs()
                < 1e-12
        );
        for m in [
            &w.probe_state,
            &w.true_output,
            &w.bprime_marginal_true,
            &w.bprime_marginal_factorized,
        ] {
            assert!((linalg::trace(m).re - 1.0).abs() < 1e-10);
            assert!(linalg::min_eigenvalue(m) > -1e-10);
        }
    }

    #[test]
    fn dephasing_gap_examples() {
        let s = std::f64::consts::FRAC_1_SQRT_2;
        let zero = basis_vector(4, 0);
        assert_eq!(dephasing_gap(&zero).unwrap(), 0.0);
        let half = ComplexVector::from_vec(vec![c(s, 0.0), c(s, 0.0), c(0.0, 0.0), c(0.0, 0.0)]);
        assert!((dephasing_gap(&half).unwrap() - 1.0).abs() < 1e-12);
        assert!((dephasing_gap_direct(&half).unwrap() - 1.0).abs() < 1e-10);
        let bell = ComplexVector::from_vec(vec![c(s, 0.0), c(0.0, 0.0), c(0.0, 0.0), c(s, 0.0)]);
        assert!((dephasing_gap(&bell).unwrap() - 1.0).abs() < 1e-12);
        assert!((dephasing_gap_direct(&bell).unwrap() - 1.0).abs() < 1e-10);
        assert!(matches!(
            dephasing_gap(&(zero * c(2.0, 0.0))),
            Err(WitnessError::NotNormalized(_))
        ));
        assert!(matches!(
            dephasing_gap(&basis_vector(2, 0)),
            Err(WitnessError::WrongDimension(2))
        ));
    }

    #[test]
    fn dephasing_gap_matches_trace_norm_on_random_states() {
        let mut rng = rng_from_seed(21);
        for _ in 0..100 {
            let psi = random_pure_state(&mut rng, 4);
            let a = dephasing_gap(&psi).unwrap();
            let b = dephasing_gap_direct(&psi).unwrap();
            assert!((a - b).abs() < 1e-9);
        }
    }

    #[test]
    fn sm_cnot_analytic_and_sdp_agree() {
        assert_eq!(sm_cnot(), 1.0);
        let cert = sm_cnot_sdp(DEFAULT_TOL).unwrap();
        assert!((cert.value - 1.0).abs() < 1e-6, "{}", cert.value);
        assert!(measurement_absorbs_cnot().unwrap() <= 1e-10);
    }
}
