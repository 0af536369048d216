//! Using the SDP engine directly: the smallest eigenvalue of a Hermitian
//! matrix as `max t s.t. H − tI ⪰ 0`, and an equality-constrained variant.

use qcausal::linalg::min_eigenvalue;
use qcausal::random::{random_hermitian, rng_from_seed};
use qcausal::sdp::{SdpProblem, SolverOptions, SparseHermitian};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let h = random_hermitian(&mut rng_from_seed(5), 5);

    let mut p = SdpProblem::new();
    let t = p.add_scalar(-1.0);
    let b = p.add_block(h.clone());
    p.add_scalar_term(b, t, SparseHermitian::identity(5).scaled(-1.0));
    let sol = p.solve(&SolverOptions::default())?;
    println!(
        "lambda_min: SDP {:.10}, eigensolver {:.10} ({}, {} iterations, gap {:.1e})",
        sol.scalar(t),
        min_eigenvalue(&h),
        sol.status,
        sol.iterations,
        sol.gap
    );

    // min ⟨H, ρ⟩ over density matrices, with ρ a matrix variable
    let mut q = SdpProblem::new();
    let rho = q.add_matrix_var(5);
    let blk = q.add_zero_block(5);
    q.add_matrix_term(blk, rho, 1.0);
    q.add_equality(vec![], vec![(rho, SparseHermitian::identity(5))], 1.0);
    let obj = q.add_scalar(1.0);
    q.add_equality(
        vec![(obj, -1.0)],
        vec![(rho, SparseHermitian::from_dense(&h))],
        0.0,
    );
    let sol = q.solve(&SolverOptions::default())?;
    let r = sol.matrix(rho);
    println!(
        "min <H, rho> = {:.10}, trace {:.10}",
        sol.scalar(obj),
        r.trace().re
    );
    Ok(())
}
