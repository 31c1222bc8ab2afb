//! Shared helpers for unit tests.

use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::lti::{spectral_abscissa, StateSpace};

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn random_matrix(rng: &mut ChaCha8Rng, r: usize, c: usize) -> DMatrix<f64> {
    DMatrix::from_fn(r, c, |_, _| rng.gen_range(-1.0..1.0))
}

/// Random SISO system with spectral abscissa exactly `-margin`.
pub fn random_stable(seed: u64, n: usize, margin: f64) -> StateSpace {
    let mut r = rng(seed);
    let a0 = random_matrix(&mut r, n, n) * 2.0;
    let b = random_matrix(&mut r, n, 1);
    let c = random_matrix(&mut r, 1, n);
    let raw = StateSpace::new(a0.clone(), b.clone(), c.clone(), DMatrix::zeros(1, 1)).unwrap();
    let shift = spectral_abscissa(&raw).unwrap() + margin;
    let a = a0 - DMatrix::identity(n, n) * shift;
    StateSpace::new(a, b, c, DMatrix::zeros(1, 1)).unwrap()
}

pub fn random_spd(rng: &mut ChaCha8Rng, n: usize) -> DMatrix<f64> {
    let m = random_matrix(rng, n, n);
    &m * m.transpose() + DMatrix::identity(n, n) * 0.5
}

pub fn rel_close(a: f64, b: f64, rtol: f64) -> bool {
    (a - b).abs() <= rtol * a.abs().max(b.abs()).max(1e-300)
}
