//! Seeded random matrices.
//!
//! All randomness flows through [`ChaCha8Rng`]. A stream is derived from a
//! 64-bit seed with `seed_from_u64` and split into independent substreams by
//! `set_stream`, so any consumer that follows the same recipe reproduces the
//! same samples.

use nalgebra::DVector;
use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use crate::operators::{c, trace, trace_norm, ComplexMatrix, DensityMatrix, HermitianMatrix};
use crate::superop::Superoperator;

pub type WitnessRng = ChaCha8Rng;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Independent substream `stream` of the generator seeded with `seed`.
pub fn split(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut r = ChaCha8Rng::seed_from_u64(seed);
    r.set_stream(stream);
    r
}

fn gaussian<R: Rng + ?Sized>(rng: &mut R) -> Complex64 {
    let re: f64 = rng.sample(StandardNormal);
    let im: f64 = rng.sample(StandardNormal);
    c(re, im) * std::f64::consts::FRAC_1_SQRT_2
}

/// Ginibre matrix with i.i.d. standard complex Gaussian entries.
pub fn ginibre<R: Rng + ?Sized>(rng: &mut R, rows: usize, cols: usize) -> ComplexMatrix {
    ComplexMatrix::from_fn(rows, cols, |_, _| gaussian(rng))
}

pub fn random_vector<R: Rng + ?Sized>(rng: &mut R, n: usize) -> DVector<Complex64> {
    DVector::from_fn(n, |_, _| gaussian(rng))
}

pub fn random_hermitian<R: Rng + ?Sized>(rng: &mut R, n: usize) -> HermitianMatrix {
    let g = ginibre(rng, n, n);
    HermitianMatrix::symmetrized(&g)
}

/// Random Hermitian matrix scaled to unit trace norm.
pub fn random_hermitian_unit_trace_norm<R: Rng + ?Sized>(rng: &mut R, n: usize) -> HermitianMatrix {
    let h = random_hermitian(rng, n);
    let norm = trace_norm(h.matrix()).expect("square");
    HermitianMatrix::symmetrized(&(h.matrix() / c(norm, 0.0)))
}

/// Haar-random unitary (QR of a Ginibre matrix with phase correction).
pub fn random_unitary<R: Rng + ?Sized>(rng: &mut R, n: usize) -> ComplexMatrix {
    let qr = ginibre(rng, n, n).qr();
    let (mut q, r) = (qr.q(), qr.r());
    for j in 0..n {
        let d = r[(j, j)];
        let phase = if d.norm() > 0.0 { d / d.norm() } else { c(1.0, 0.0) };
        for i in 0..n {
            q[(i, j)] *= phase;
        }
    }
    q
}

/// Positive semidefinite matrix `G G^dagger` of the given rank.
pub fn random_psd<R: Rng + ?Sized>(rng: &mut R, n: usize, rank: usize) -> HermitianMatrix {
    let g = ginibre(rng, n, rank);
    HermitianMatrix::symmetrized(&(&g * g.adjoint()))
}

/// Random full-rank density matrix (Hilbert-Schmidt measure).
pub fn random_density_matrix<R: Rng + ?Sized>(rng: &mut R, n: usize) -> DensityMatrix {
    let p = random_psd(rng, n, n);
    let tr = trace(p.matrix());
    DensityMatrix::new(p.matrix() / tr).expect("normalized PSD matrix")
}

pub fn random_pure_state<R: Rng + ?Sized>(rng: &mut R, n: usize) -> DensityMatrix {
    DensityMatrix::pure(&random_vector(rng, n)).expect("nonzero vector")
}

/// Two orthogonal pure states: the first two columns of a Haar unitary.
pub fn random_orthogonal_pair<R: Rng + ?Sized>(rng: &mut R, n: usize) -> (DensityMatrix, DensityMatrix) {
    let u = random_unitary(rng, n);
    let a = DensityMatrix::pure(&u.column(0).into_owned()).expect("unit column");
    let b = DensityMatrix::pure(&u.column(1).into_owned()).expect("unit column");
    (a, b)
}

/// Random CPTP map with `n_kraus` Kraus operators cut from a Haar isometry.
pub fn random_channel<R: Rng + ?Sized>(rng: &mut R, d: usize, n_kraus: usize) -> Superoperator {
    let u = random_unitary(rng, d * n_kraus);
    let kraus: Vec<ComplexMatrix> = (0..n_kraus)
        .map(|k| u.view((k * d, 0), (d, d)).into_owned())
        .collect();
    Superoperator::from_kraus(&kraus).expect("square Kraus operators")
}
