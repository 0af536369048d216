//! Seeded random matrices, states, unitaries and channels.

use nalgebra::QR;
use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use crate::channel::{Channel, SystemDims};
use crate::linalg::{ComplexMatrix, ComplexVector, C64};

pub type SeededRng = ChaCha8Rng;

pub fn rng_from_seed(seed: u64) -> SeededRng {
    ChaCha8Rng::seed_from_u64(seed)
}

fn gaussian<R: Rng + ?Sized>(rng: &mut R) -> C64 {
    let re: f64 = rng.sample(StandardNormal);
    let im: f64 = rng.sample(StandardNormal);
    C64::new(re, im).scale(std::f64::consts::FRAC_1_SQRT_2)
}

/// Matrix with i.i.d. standard complex Gaussian entries.
pub fn random_matrix<R: Rng + ?Sized>(rng: &mut R, rows: usize, cols: usize) -> ComplexMatrix {
    let mut m = ComplexMatrix::zeros(rows, cols);
    for i in 0..rows {
        for j in 0..cols {
            m[(i, j)] = gaussian(rng);
        }
    }
    m
}

pub fn random_hermitian<R: Rng + ?Sized>(rng: &mut R, n: usize) -> ComplexMatrix {
    let g = random_matrix(rng, n, n);
    (&g + g.adjoint()).scale(0.5)
}

/// Full-rank density matrix `G G† / Tr(G G†)`.
pub fn random_density_matrix<R: Rng + ?Sized>(rng: &mut R, n: usize) -> ComplexMatrix {
    let g = random_matrix(rng, n, n);
    let p = &g * g.adjoint();
    let t = p.trace().re;
    p.unscale(t)
}

/// Haar-distributed pure state.
pub fn random_pure_state<R: Rng + ?Sized>(rng: &mut R, n: usize) -> ComplexVector {
    let v = ComplexVector::from_fn(n, |_, _| gaussian(rng));
    let norm = v.norm();
    v.unscale(norm)
}

/// Haar-random unitary: QR of a Ginibre matrix with the phases of `R`'s
/// diagonal absorbed into `Q`.
pub fn haar_unitary<R: Rng + ?Sized>(rng: &mut R, n: usize) -> ComplexMatrix {
    let g = random_matrix(rng, n, n);
    let qr = QR::new(g);
    let mut q = qr.q();
    let r = qr.r();
    for j in 0..n {
        let d = r[(j, j)];
        let phase = if d.norm() > 0.0 {
            d / d.norm()
        } else {
            C64::new(1.0, 0.0)
        };
        for i in 0..n {
            q[(i, j)] *= phase;
        }
    }
    q
}

/// Haar-random isometry from dimension `d_in` into dimension `d_out`
/// (the first `d_in` columns of a Haar unitary).
pub fn haar_isometry<R: Rng + ?Sized>(rng: &mut R, d_out: usize, d_in: usize) -> ComplexMatrix {
    assert!(d_out >= d_in, "isometry needs d_out >= d_in");
    haar_unitary(rng, d_out).columns(0, d_in).into_owned()
}

/// Random channel with `kraus_rank` Kraus operators, cut from a Haar isometry.
pub fn random_channel<R: Rng + ?Sized>(
    rng: &mut R,
    dims: SystemDims,
    kraus_rank: usize,
) -> Channel {
    let (d_out, d_in) = (dims.d_out(), dims.d_in());
    let v = haar_isometry(rng, d_out * kraus_rank, d_in);
    let kraus: Vec<ComplexMatrix> = (0..kraus_rank)
        .map(|e| ComplexMatrix::from_fn(d_out, d_in, |o, i| v[(o * kraus_rank + e, i)]))
        .collect();
    Channel::from_kraus(dims, &kraus).expect("isometry blocks form a channel")
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::{identity, max_abs_diff};

    #[test]
    fn haar_unitary_is_unitary_and_seeded() {
        let mut rng = rng_from_seed(42);
        let u = haar_unitary(&mut rng, 6);
        assert!(max_abs_diff(&(u.adjoint() * &u), &identity(6)) < 1e-12);
        let again = haar_unitary(&mut rng_from_seed(42), 6);
        assert_eq!(u, again);
    }

    #[test]
    fn density_matrix_has_unit_trace() {
        let rho = random_density_matrix(&mut rng_from_seed(1), 5);
        assert!((rho.trace().re - 1.0).abs() < 1e-14);
        assert!(crate::linalg::min_eigenvalue(&rho) > 0.0);
    }

    #[test]
    fn random_channel_is_cptp() {
        let ch = random_channel(&mut rng_from_seed(3), SystemDims::new([2, 2], [2, 2]), 3);
        assert!(ch.choi_rank() <= 3);
        assert!(Channel::from_choi(ch.dims().clone(), ch.choi().clone()).is_ok());
    }

    #[test]
    fn pure_state_is_normalized() {
        let v = random_pure_state(&mut rng_from_seed(2), 4);
        assert!((v.norm() - 1.0).abs() < 1e-14);
    }
}
