#![allow(dead_code)]

use jadce::instance::generate;
use jadce::{ComplexMatrix, InstanceConfig, JadceInstance, StructuredA};
use nalgebra::DMatrix;
use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// `A = Re(Q) ⊗ I₂ₘ + Im(Q) ⊗ [[0, −Iₘ], [Iₘ, 0]]`, built with nalgebra.
pub fn kron_oracle(q: &ComplexMatrix, m: usize) -> DMatrix<f64> {
    let (l, n) = (q.rows(), q.cols());
    let re = DMatrix::from_row_slice(l, n, q.re());
    let im = DMatrix::from_row_slice(l, n, q.im());
    let eye = DMatrix::<f64>::identity(2 * m, 2 * m);
    let mut j = DMatrix::<f64>::zeros(2 * m, 2 * m);
    for k in 0..m {
        j[(k, m + k)] = -1.0;
        j[(m + k, k)] = 1.0;
    }
    re.kronecker(&eye) + im.kronecker(&j)
}

pub fn random_q(rng: &mut ChaCha8Rng, l: usize, n: usize) -> ComplexMatrix {
    ComplexMatrix::from_fn(l, n, |_, _| Complex64::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0)))
}

pub fn random_vec(rng: &mut ChaCha8Rng, len: usize) -> Vec<f64> {
    (0..len).map(|_| rng.random_range(-2.0..2.0)).collect()
}

pub fn random_operator(seed: u64, max_l: usize, max_m: usize, max_n: usize) -> StructuredA {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let l = rng.random_range(1..=max_l);
    let m = rng.random_range(1..=max_m);
    let n = rng.random_range(1..=max_n);
    StructuredA::new(random_q(&mut rng, l, n), m).unwrap()
}

pub fn max_abs_diff(a: &[f64], b: &[f64]) -> f64 {
    assert_eq!(a.len(), b.len());
    a.iter().zip(b).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max)
}

pub fn rel_diff(a: f64, b: f64) -> f64 {
    (a - b).abs() / a.abs().max(b.abs()).max(f64::MIN_POSITIVE)
}

/// L in 4..=10, M in 2..=8, N in 20..=100, K in 2..=10.
pub fn desk_instance(seed: u64) -> JadceInstance {
    let mut rng = ChaCha8Rng::seed_from_u64(seed.wrapping_add(1 << 32));
    let l = rng.random_range(4..=10);
    let m = rng.random_range(2..=8);
    let n = rng.random_range(20..=100);
    let k = rng.random_range(2..=10);
    generate(&InstanceConfig::new(n, m, l, k, seed)).unwrap()
}
