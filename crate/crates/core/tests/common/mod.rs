#![allow(dead_code)]

use nalgebra::DMatrix;
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use riocpd::manifold::SpdMatrix;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// `A·Aᵀ/dim + 0.1·I` from a column-major entry slice.
pub fn spd_from_entries(dim: usize, entries: &[f64]) -> SpdMatrix {
    let a = DMatrix::from_column_slice(dim, dim, &entries[..dim * dim]);
    let p = &a * a.transpose() / dim as f64 + DMatrix::identity(dim, dim) * 0.1;
    let p = (&p + p.transpose()) * 0.5;
    SpdMatrix::new(p).unwrap()
}

pub fn random_spd(rng: &mut impl Rng, dim: usize) -> SpdMatrix {
    let entries: Vec<f64> = (0..dim * dim).map(|_| StandardNormal.sample(rng)).collect();
    spd_from_entries(dim, &entries)
}

pub fn random_diagonal(rng: &mut impl Rng, dim: usize) -> Vec<f64> {
    (0..dim).map(|_| rng.random_range(0.05..20.0)).collect()
}

/// Symmetric matrix with i.i.d. Gaussian entries scaled to Frobenius norm `norm`.
pub fn symmetric_noise(rng: &mut impl Rng, dim: usize, norm: f64) -> DMatrix<f64> {
    let a = DMatrix::<f64>::from_fn(dim, dim, |_, _| StandardNormal.sample(rng));
    let s: DMatrix<f64> = (&a + a.transpose()) * 0.5;
    let n = s.norm();
    s * (norm / n)
}

pub fn rel_frobenius(a: &DMatrix<f64>, b: &DMatrix<f64>) -> f64 {
    (a - b).norm() / b.norm()
}
