//! Sandwich bounds S <= C <= 2√2·√S on seeded Haar-random two-qubit gates.
//! Pass a seed and a count as arguments (defaults 42 and 5).

use qcausal::channel::UnitaryGate;
use qcausal::diamond::{check_bounds, DEFAULT_TOL};
use qcausal::random::{haar_unitary, rng_from_seed};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let mut args = std::env::args().skip(1);
    let seed: u64 = args.next().map(|s| s.parse()).transpose()?.unwrap_or(42);
    let count: usize = args.next().map(|s| s.parse()).transpose()?.unwrap_or(5);
    let mut rng = rng_from_seed(seed);
    println!(
        "{:>4} {:>10} {:>10} {:>12} {:>6}",
        "k", "S", "C", "2√2·√S", "ok"
    );
    for k in 0..count {
        let u = UnitaryGate::bipartite(2, 2, 2, 2, haar_unitary(&mut rng, 4))?;
        let b = check_bounds(&u, DEFAULT_TOL)?;
        let upper = 2.0 * 2f64.sqrt() * b.s_value.sqrt();
        println!(
            "{k:>4} {:>10.6} {:>10.6} {upper:>12.6} {:>6}",
            b.s_value,
            b.c_value,
            b.all_ok()
        );
    }
    Ok(())
}
