//! Seeded random matrices. All generators are deterministic given the seed.

use nalgebra::DMatrix;
use num_complex::Complex64;
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

pub type SeededRng = ChaCha8Rng;

pub fn rng(seed: u64) -> SeededRng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Entries i.i.d. with real and imaginary parts standard normal.
pub fn ginibre(rows: usize, cols: usize, rng: &mut impl Rng) -> DMatrix<Complex64> {
    DMatrix::from_fn(rows, cols, |_, _| {
        Complex64::new(rng.sample(StandardNormal), rng.sample(StandardNormal))
    })
}

/// A Haar-distributed isometry with `V† V = 1`; requires `rows >= cols`.
pub fn random_isometry(rows: usize, cols: usize, rng: &mut impl Rng) -> DMatrix<Complex64> {
    assert!(rows >= cols, "isometry needs rows >= cols");
    let g = ginibre(rows, cols, rng);
    let qr = g.qr();
    let mut q = qr.q();
    let r = qr.r();
    // fix column phases so the distribution is Haar rather than QR-biased
    for k in 0..cols {
        let diag = r[(k, k)];
        let phase = if diag.norm() > 0.0 {
            diag / diag.norm()
        } else {
            Complex64::new(1.0, 0.0)
        };
        for i in 0..rows {
            q[(i, k)] *= phase;
        }
    }
    q
}

pub fn random_unitary(d: usize, rng: &mut impl Rng) -> DMatrix<Complex64> {
    random_isometry(d, d, rng)
}

/// Full-rank density matrix `G G† / Tr[G G†]`.
pub fn random_density_matrix(d: usize, rng: &mut impl Rng) -> DMatrix<Complex64> {
    let g = ginibre(d, d, rng);
    let rho = &g * g.adjoint();
    let tr = rho.trace().re;
    rho.map(|z| z / tr)
}

/// `(G + G†)/2` for a Ginibre `G`.
pub fn random_hermitian(d: usize, rng: &mut impl Rng) -> DMatrix<Complex64> {
    let g = ginibre(d, d, rng);
    (&g + g.adjoint()).map(|z| z * 0.5)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn isometry_is_orthonormal() {
        let mut r = rng(7);
        let v = random_isometry(6, 3, &mut r);
        let err = (v.adjoint() * &v - DMatrix::<Complex64>::identity(3, 3)).norm();
        assert!(err < 1e-12, "{err}");
    }

    #[test]
    fn density_matrix_is_unit_trace_psd() {
        let mut r = rng(1);
        let rho = random_density_matrix(4, &mut r);
        assert!((rho.trace().re - 1.0).abs() < 1e-12);
        let ev = nalgebra::SymmetricEigen::new(rho).eigenvalues;
        assert!(ev.iter().all(|&e| e > 0.0));
    }

    #[test]
    fn same_seed_same_draw() {
        let a = random_unitary(3, &mut rng(42));
        let b = random_unitary(3, &mut rng(42));
        assert_eq!(a, b);
        assert_ne!(a, random_unitary(3, &mut rng(43)));
    }
}
