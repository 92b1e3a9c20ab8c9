//! Shared pieces of the acceptance experiments.

use jadce::instance::generate;
use jadce::{ComplexMatrix, InstanceConfig, JadceInstance};
use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Dense `A = Re(Q) ⊗ I₂ₘ + Im(Q) ⊗ [[0, −Iₘ], [Iₘ, 0]]`.
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

/// L in 4..=10, M in 2..=8, N in 20..=100, K in 2..=10.
pub fn desk_instance(seed: u64) -> JadceInstance {
    let mut rng = ChaCha8Rng::seed_from_u64(seed.wrapping_add(1 << 32));
    let l = rng.random_range(4..=10);
    let m = rng.random_range(2..=8);
    let n = rng.random_range(20..=100);
    let k = rng.random_range(2..=10);
    generate(&InstanceConfig::new(n, m, l, k, seed)).unwrap()
}

pub fn max_abs_diff(a: &[f64], b: &[f64]) -> f64 {
    assert_eq!(a.len(), b.len());
    a.iter().zip(b).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max)
}

pub fn rel_diff(a: f64, b: f64) -> f64 {
    (a - b).abs() / a.abs().max(b.abs()).max(f64::MIN_POSITIVE)
}

pub fn median(mut v: Vec<f64>) -> f64 {
    assert!(!v.is_empty());
    v.sort_by(f64::total_cmp);
    let n = v.len();
    if n % 2 == 1 {
        v[n / 2]
    } else {
        0.5 * (v[n / 2 - 1] + v[n / 2])
    }
}

/// Least-squares `t ≈ a + b·n`.
pub fn linear_fit(points: &[(f64, f64)]) -> (f64, f64) {
    let k = points.len() as f64;
    let mx = points.iter().map(|p| p.0).sum::<f64>() / k;
    let my = points.iter().map(|p| p.1).sum::<f64>() / k;
    let sxy: f64 = points.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let sxx: f64 = points.iter().map(|p| (p.0 - mx).powi(2)).sum();
    let b = sxy / sxx;
    (my - b * mx, b)
}
