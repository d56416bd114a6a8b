//! Random matrices, states and measurements.
//!
//! Every generator takes an explicit RNG. [`rng_for`] derives independent
//! ChaCha streams from a `(seed, stream)` pair so that parallel restarts and
//! sweep points are reproducible regardless of scheduling.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use crate::error::Result;
use crate::linalg::eigen::inv_sqrt;
use crate::linalg::{kron_vec, polar_unitary, ComplexMatrix, C64};

pub fn rng_for(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

/// Matrix with i.i.d. standard complex Gaussian entries.
pub fn ginibre<R: Rng + ?Sized>(rows: usize, cols: usize, rng: &mut R) -> ComplexMatrix {
    ComplexMatrix::from_fn(rows, cols, |_, _| {
        let re: f64 = rng.sample(StandardNormal);
        let im: f64 = rng.sample(StandardNormal);
        C64::new(re, im) * std::f64::consts::FRAC_1_SQRT_2
    })
}

/// Haar-distributed unitary as the polar factor of a Ginibre matrix.
pub fn haar_unitary<R: Rng + ?Sized>(n: usize, rng: &mut R) -> Result<ComplexMatrix> {
    polar_unitary(&ginibre(n, n, rng))
}

/// Uniformly random unit vector.
pub fn random_unit_vector<R: Rng + ?Sized>(n: usize, rng: &mut R) -> Vec<C64> {
    let g = ginibre(n, 1, rng);
    let norm = g.frobenius_norm();
    g.data().iter().map(|z| z / norm).collect()
}

/// Random Schmidt spectrum with exactly `rank` nonzero coefficients, sorted
/// descending and bounded away from zero.
pub fn random_schmidt_coefficients<R: Rng + ?Sized>(rank: usize, rng: &mut R) -> Vec<f64> {
    let mut w: Vec<f64> = (0..rank).map(|_| rng.random_range(0.05..1.0)).collect();
    let total: f64 = w.iter().sum();
    w.iter_mut().for_each(|x| *x = (*x / total).sqrt());
    w.sort_by(|a, b| b.total_cmp(a));
    w
}

/// Random bipartite pure state of the given Schmidt rank: random coefficients
/// rotated by Haar-random local unitaries.
pub fn random_pure_with_rank<R: Rng + ?Sized>(
    d_a: usize,
    d_b: usize,
    rank: usize,
    rng: &mut R,
) -> Result<Vec<C64>> {
    let eta = random_schmidt_coefficients(rank, rng);
    let ua = haar_unitary(d_a, rng)?;
    let ub = haar_unitary(d_b, rng)?;
    let mut psi = vec![C64::new(0.0, 0.0); d_a * d_b];
    for (j, &e) in eta.iter().enumerate() {
        let term = kron_vec(&ua.column(j), &ub.column(j));
        for (p, t) in psi.iter_mut().zip(term) {
            *p += t * e;
        }
    }
    Ok(psi)
}

/// Random full-rank density matrix `G·G†/tr(G·G†)`.
pub fn random_density_matrix<R: Rng + ?Sized>(n: usize, rng: &mut R) -> ComplexMatrix {
    let g = ginibre(n, n, rng);
    let gg = &g * &g.dagger();
    let t = gg.trace().re;
    gg.scale(1.0 / t).hermitian_part()
}

/// Random full-rank POVM: effects `S^{-1/2} G_k G_k† S^{-1/2}` with `S = Σ_k G_k G_k†`.
pub fn random_povm_effects<R: Rng + ?Sized>(dim: usize, outcomes: usize, rng: &mut R) -> Result<Vec<ComplexMatrix>> {
    let raw: Vec<ComplexMatrix> = (0..outcomes)
        .map(|_| {
            let g = ginibre(dim, dim, rng);
            &g * &g.dagger()
        })
        .collect();
    let mut sum = ComplexMatrix::zeros(dim, dim);
    for r in &raw {
        sum = &sum + r;
    }
    let s = inv_sqrt(&sum)?;
    Ok(raw.iter().map(|r| (&(&s * r) * &s).hermitian_part()).collect())
}
