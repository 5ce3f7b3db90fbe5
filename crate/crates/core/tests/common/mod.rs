#![allow(dead_code)]

use mislogit::{Covariates, Theta};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn normal_covariates<R: Rng>(rng: &mut R, n: usize, p: usize) -> Covariates {
    let vals = (0..n * p).map(|_| rng.sample(StandardNormal)).collect();
    Covariates::from_flat(n, p, vals).unwrap()
}

pub fn uniform_covariates<R: Rng>(rng: &mut R, n: usize, p: usize, lo: f64, hi: f64) -> Covariates {
    let vals = (0..n * p).map(|_| rng.random_range(lo..hi)).collect();
    Covariates::from_flat(n, p, vals).unwrap()
}

pub fn binary_covariates<R: Rng>(rng: &mut R, n: usize, p: usize) -> Covariates {
    let vals = (0..n * p).map(|_| if rng.random_bool(0.5) { 1.0 } else { 0.0 }).collect();
    Covariates::from_flat(n, p, vals).unwrap()
}

/// Rates with `α₁ + α₂ ≥ 1.1`, coefficients in `[-1.5, 1.5]`.
pub fn random_theta<R: Rng>(rng: &mut R, p: usize) -> Theta {
    loop {
        let a1 = rng.random_range(0.6..1.0);
        let a2 = rng.random_range(0.6..1.0);
        if a1 + a2 < 1.1 {
            continue;
        }
        let b0 = rng.random_range(-1.5..1.5);
        let beta = (0..p).map(|_| rng.random_range(-1.5..1.5)).collect();
        return Theta::new(a1, a2, b0, beta).unwrap();
    }
}

/// Sign-and-magnitude draw bounded away from zero.
pub fn nonzero<R: Rng>(rng: &mut R, lo: f64, hi: f64) -> f64 {
    let m = rng.random_range(lo..hi);
    if rng.random_bool(0.5) {
        m
    } else {
        -m
    }
}
