//! Shared helpers for unit tests.

use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::linalg::{Matrix, SpdMatrix};

pub fn seeded_rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Random well-conditioned SPD matrix: B Bᵀ + I with standard normal B.
pub fn random_spd(p: usize, rng: &mut impl Rng) -> SpdMatrix<f64> {
    let b = Matrix::from_fn(p, p, |_, _| {
        rng.sample::<f64, _>(rand_distr::StandardNormal)
    });
    let mut g = b.gram();
    for i in 0..p {
        g[(i, i)] += 1.0;
    }
    SpdMatrix::from_matrix(&g).expect("B Bᵀ + I is SPD")
}
