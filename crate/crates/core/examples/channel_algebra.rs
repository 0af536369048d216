//! Choi matrices, Kraus operators, composition, tensor products and
//! Stinespring dilations.

use qcausal::channel::{
    gate_zoo, marginal_to_b, stinespring, swap_probe_unitary, Channel, GateSpec, SystemDims,
};
use qcausal::linalg::{max_abs_diff, partial_trace, TensorShape};
use qcausal::random::{random_channel, random_density_matrix, rng_from_seed};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let mut rng = rng_from_seed(7);
    let ch = random_channel(&mut rng, SystemDims::square([2, 2]), 3);
    println!("random channel on two qubits, Choi rank {}", ch.choi_rank());

    let dil = stinespring(&ch);
    let rho = random_density_matrix(&mut rng, 4);
    let direct = ch.apply(&rho)?;
    let dilated = dil.apply(&rho);
    println!(
        "Stinespring: isometry {}x{}, environment {}, output mismatch {:.1e}",
        dil.isometry.nrows(),
        dil.isometry.ncols(),
        dil.env_dim,
        max_abs_diff(&direct, &dilated)
    );

    let cnot = gate_zoo(&GateSpec::Cnot)?;
    let twice = cnot.to_channel().compose(&cnot.to_channel())?;
    println!(
        "cnot composed with itself is the identity: {:.1e}",
        max_abs_diff(twice.choi(), Channel::identity([2, 2]).choi())
    );

    let marginal = marginal_to_b(&cnot)?;
    println!(
        "marginal channel A x B -> B' has dims {:?} -> {:?}",
        marginal.dims().in_dims,
        marginal.dims().out_dims
    );

    let t = swap_probe_unitary(&cnot)?;
    println!("swap probe of cnot acts on {:?}", t.dims().in_dims);

    let pair = ch.tensor(&Channel::identity([2]));
    let reduced = partial_trace(
        &pair.apply(&qcausal::linalg::kron(
            &rho,
            &random_density_matrix(&mut rng, 2),
        ))?,
        &TensorShape::new([4, 2]),
        &[1],
    )?;
    println!(
        "(T x id) then discarding the spectator matches T: {:.1e}",
        max_abs_diff(&reduced, &direct)
    );
    Ok(())
}
