//! Diamond-norm distances between channels, with the seesaw lower bound
//! as an independent check.

use qcausal::channel::{Channel, SystemDims, UnitaryGate};
use qcausal::diamond::{diamond_distance, diamond_norm_certified, dnorm_lower_bound, DEFAULT_TOL};
use qcausal::linalg::{basis_vector, identity, pauli_z, projector, C64};
use qcausal::random::{random_channel, rng_from_seed};

fn unitary(u: qcausal::linalg::ComplexMatrix) -> Channel {
    let d = u.nrows();
    UnitaryGate::new(SystemDims::square([d]), u)
        .expect("unitary")
        .to_channel()
}

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let id = Channel::identity([2]);

    println!(
        "{:>8} {:>12} {:>12} {:>12}",
        "theta", "SDP", "seesaw", "2 sin(t/2)"
    );
    for k in 0..=4 {
        let theta = std::f64::consts::PI * k as f64 / 4.0;
        let mut u = identity(2);
        u[(1, 1)] = C64::from_polar(1.0, theta);
        let ph = unitary(u);
        let sdp = diamond_distance(&id, &ph, DEFAULT_TOL)?;
        let lb = dnorm_lower_bound(&id, &ph, 200)?;
        println!(
            "{theta:>8.4} {sdp:>12.9} {lb:>12.9} {:>12.9}",
            2.0 * (theta / 2.0).sin()
        );
    }

    let dephasing = Channel::from_kraus(
        SystemDims::square([2]),
        &[
            projector(&basis_vector(2, 0)),
            projector(&basis_vector(2, 1)),
        ],
    )?;
    println!(
        "identity vs dephasing: {:.9}",
        diamond_distance(&id, &dephasing, DEFAULT_TOL)?
    );
    println!(
        "identity vs Z:         {:.9}",
        diamond_distance(&id, &unitary(pauli_z()), DEFAULT_TOL)?
    );

    let mut rng = rng_from_seed(1);
    let a = random_channel(&mut rng, SystemDims::square([2, 2]), 2);
    let b = random_channel(&mut rng, SystemDims::square([2, 2]), 3);
    let cert = diamond_norm_certified(&a.difference(&b)?, DEFAULT_TOL)?;
    println!(
        "random two-qubit channels: {:.9} (gap {:.1e}, {} iterations, {} ms)",
        cert.value, cert.gap, cert.stats.iterations, cert.stats.wall_ms
    );
    Ok(())
}
