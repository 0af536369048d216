//! The CNOT gap: signalling at most 1, causal influence exactly 2.
//!
//! Run with `cargo run --release --example cnot_gap`.

use qcausal::channel::{gate_zoo, GateSpec};
use qcausal::diamond::{causal_influence, check_bounds, signalling, DEFAULT_TOL};
use qcausal::witness::{cnot_causal_witness, sm_cnot, sm_cnot_sdp};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let cnot = gate_zoo(&GateSpec::Cnot)?;

    let s = signalling(&cnot, DEFAULT_TOL)?;
    let c = causal_influence(&cnot, DEFAULT_TOL)?;
    println!(
        "S(cnot) = {:.9}  (primal {:.9}, dual {:.9}, {} iterations)",
        s.value, s.primal, s.dual, s.stats.iterations
    );
    println!(
        "C(cnot) = {:.9}  (primal {:.9}, dual {:.9}, {} iterations)",
        c.value, c.primal, c.dual, c.stats.iterations
    );

    // S is bounded above by the distance to the fixed candidate Tr_A ⊗ M
    let sdp = sm_cnot_sdp(DEFAULT_TOL)?;
    println!("S_M(cnot): analytic {}, SDP {:.9}", sm_cnot(), sdp.value);

    let w = cnot_causal_witness();
    println!(
        "witness lower bound on C(cnot): {}",
        w.certified_lower_bound
    );

    let b = check_bounds(&cnot, DEFAULT_TOL)?;
    println!(
        "S <= C: {}, C <= 2*sqrt(2)*sqrt(S): {}",
        b.lower_ok, b.upper_ok
    );
    println!(
        "C^2/8 = {:.3} <= S = {:.3} <= 1",
        c.value * c.value / 8.0,
        s.value
    );
    Ok(())
}
