//! Block soft-thresholding and the per-agent local step.

use crate::error::Result;
use crate::model::StructuredA;
use crate::reduce;

/// `S_κ(a) = max(1 − κ/‖a‖₂, 0)·a`, the prox of `κ‖·‖₂`. Returns 0 for `a = 0`.
pub fn soft_threshold(a: &[f64], kappa: f64) -> Vec<f64> {
    let mut out = vec![0.0; a.len()];
    soft_threshold_into(a, kappa, &mut out);
    out
}

#[inline]
pub fn soft_threshold_into(a: &[f64], kappa: f64, out: &mut [f64]) {
    debug_assert!(kappa >= 0.0);
    let n = reduce::norm2(a);
    if n <= kappa || n == 0.0 {
        out.fill(0.0);
        return;
    }
    let s = 1.0 - kappa / n;
    for (o, v) in out.iter_mut().zip(a) {
        *o = s * v;
    }
}

/// One agent's parallel step: `ξᵢ = S_{γ/ρ}(zᵢ + Aᵢᵀλ/ρ)` and
/// `wᵢ = Aᵢ(zᵢ − ξᵢ)`.
pub fn local_step(
    a: &StructuredA,
    i: usize,
    z_i: &[f64],
    lambda: &[f64],
    gamma: f64,
    rho: f64,
) -> Result<(Vec<f64>, Vec<f64>)> {
    let atl = a.adjoint_block(i, lambda)?;
    let arg: Vec<f64> = z_i.iter().zip(&atl).map(|(z, g)| z + g / rho).collect();
    let xi = soft_threshold(&arg, gamma / rho);
    let d: Vec<f64> = z_i.iter().zip(&xi).map(|(z, x)| z - x).collect();
    let w = a.apply_block(i, &d)?;
    Ok((xi, w))
}

/// `gᵢ = ρ(zᵢ − ξᵢ) + Aᵢᵀλ`, an element of `γ ∂‖ξᵢ‖₂`.
pub fn subgradient(z_i: &[f64], xi: &[f64], at_lambda_i: &[f64], rho: f64) -> Vec<f64> {
    z_i.iter()
        .zip(xi)
        .zip(at_lambda_i)
        .map(|((z, x), g)| rho * (z - x) + g)
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::ComplexMatrix;
    use num_complex::Complex64;

    #[test]
    fn zero_threshold_is_identity() {
        let a = [0.3, -1.2, 4.0, 0.0];
        assert_eq!(soft_threshold(&a, 0.0), a.to_vec());
    }

    #[test]
    fn full_shrinkage() {
        assert_eq!(soft_threshold(&[1.0, 0.0], 2.0), vec![0.0, 0.0]);
        assert_eq!(soft_threshold(&[0.6, 0.8], 1.0), vec![0.0, 0.0]);
        assert_eq!(soft_threshold(&[0.0, 0.0], 0.0), vec![0.0, 0.0]);
    }

    #[test]
    fn radial_shrinkage() {
        let out = soft_threshold(&[3.0, 4.0], 1.0);
        assert!((out[0] - 2.4).abs() < 1e-15 && (out[1] - 3.2).abs() < 1e-15);
    }

    fn small_a() -> StructuredA {
        let q = ComplexMatrix::from_fn(3, 4, |r, c| {
            Complex64::new((1.0 + r as f64 * 0.7 + c as f64).sin(), (0.3 * c as f64 - r as f64).cos())
        });
        StructuredA::new(q, 2).unwrap()
    }

    #[test]
    fn local_step_zero_is_fixed_point() {
        let a = small_a();
        let (xi, w) = local_step(&a, 1, &[0.0; 4], &[0.0; 12], 1.0, 0.8).unwrap();
        assert!(xi.iter().chain(&w).all(|&v| v == 0.0));
    }

    #[test]
    fn local_step_threshold_dominates() {
        let a = small_a();
        let z = [0.1, -0.2, 0.05, 0.0];
        let lambda = vec![0.01; 12];
        let (xi, w) = local_step(&a, 2, &z, &lambda, 100.0, 1.0).unwrap();
        assert!(xi.iter().all(|&v| v == 0.0));
        let az = a.apply_block(2, &z).unwrap();
        for (u, v) in w.iter().zip(&az) {
            assert!((u - v).abs() < 1e-15);
        }
    }
}
