//! Closed-form consensus operator `Λ⁻¹ = (I + AAᵀ/ρ)⁻¹`.
//!
//! Because `AAᵀ = Re(QQᴴ) ⊗ I₂ ⊗ Iₘ + Im(QQᴴ) ⊗ J₂ ⊗ Iₘ` with
//! `J₂ = [[0, −1], [1, 0]]`, the inverse factors as `ρ·S⁻¹ ⊗ Iₘ` where
//! `S = (ρI + Re QQᴴ) ⊗ I₂ + Im QQᴴ ⊗ J₂` is only `2L × 2L`. Applying it to a
//! `2LM` vector costs `O(L²M)`: view the vector as a `2L × M` row-major
//! matrix (row `2l + c` holds the real (`c = 0`) or imaginary (`c = 1`) part
//! of received row `l`) and multiply by `S⁻¹` from the left.

use crate::error::{Error, Result};
use crate::model::ComplexMatrix;

/// Anything that can solve `(I + AAᵀ/ρ) y = v`.
pub trait ConsensusSolve: Sync {
    fn solve(&self, v: &[f64]) -> Vec<f64>;
}

/// Precomputed `S⁻¹` for a fixed `Q`, `M` and `ρ`.
#[derive(Debug, Clone)]
pub struct ConsensusFactor {
    rho: f64,
    sequence_length: usize,
    antennas: usize,
    // 2L x 2L, row-major, symmetric
    small_inverse: Vec<f64>,
}

impl ConsensusFactor {
    /// Builds `S` from `QQᴴ` and inverts it. `O(L²N + L³)`.
    pub fn precompute(q: &ComplexMatrix, antennas: usize, rho: f64) -> Result<Self> {
        if !(rho > 0.0 && rho.is_finite()) {
            return Err(Error::Config(format!("rho must be positive and finite, got {rho}")));
        }
        if antennas == 0 {
            return Err(Error::Dimension("antenna count must be >= 1".into()));
        }
        let s = consensus_matrix(q, rho);
        let small_inverse = spd_inverse(&s, 2 * q.rows())?;
        Ok(ConsensusFactor {
            rho,
            sequence_length: q.rows(),
            antennas,
            small_inverse,
        })
    }

    pub fn rho(&self) -> f64 {
        self.rho
    }

    /// The stored `(Λ₁ + Λ₂)⁻¹`, `2L × 2L` row-major.
    pub fn small_inverse(&self) -> &[f64] {
        &self.small_inverse
    }

    pub fn dim(&self) -> usize {
        2 * self.sequence_length * self.antennas
    }

    /// `Λ⁻¹v = ρ (S⁻¹ ⊗ Iₘ) v`.
    pub fn apply(&self, v: &[f64]) -> Result<Vec<f64>> {
        if v.len() != self.dim() {
            return Err(Error::Dimension(format!(
                "consensus vector has length {}, expected {}",
                v.len(),
                self.dim()
            )));
        }
        Ok(self.apply_unchecked(v))
    }

    fn apply_unchecked(&self, v: &[f64]) -> Vec<f64> {
        let p = 2 * self.sequence_length;
        let m = self.antennas;
        let mut out = vec![0.0; p * m];
        for (r, orow) in out.chunks_exact_mut(m).enumerate() {
            let coeffs = &self.small_inverse[r * p..(r + 1) * p];
            for (&s, vrow) in coeffs.iter().zip(v.chunks_exact(m)) {
                let s = self.rho * s;
                for (o, x) in orow.iter_mut().zip(vrow) {
                    *o += s * x;
                }
            }
        }
        out
    }
}

impl ConsensusSolve for ConsensusFactor {
    fn solve(&self, v: &[f64]) -> Vec<f64> {
        assert_eq!(v.len(), self.dim());
        self.apply_unchecked(v)
    }
}

/// `Λ₁ + Λ₂ = (ρI + Re QQᴴ) ⊗ I₂ + Im QQᴴ ⊗ [[0, −1], [1, 0]]`, row-major.
pub fn consensus_matrix(q: &ComplexMatrix, rho: f64) -> Vec<f64> {
    let l = q.rows();
    let n = q.cols();
    let p = 2 * l;
    let mut s = vec![0.0; p * p];
    for a in 0..l {
        for b in 0..l {
            // (QQᴴ)_ab = Σ_k q_ak · conj(q_bk)
            let (mut gr, mut gi) = (0.0, 0.0);
            for k in 0..n {
                let (ar, ai) = (q.re()[a * n + k], q.im()[a * n + k]);
                let (br, bi) = (q.re()[b * n + k], q.im()[b * n + k]);
                gr += ar * br + ai * bi;
                gi += ai * br - ar * bi;
            }
            if a == b {
                gr += rho;
            }
            s[(2 * a) * p + 2 * b] = gr;
            s[(2 * a + 1) * p + 2 * b + 1] = gr;
            s[(2 * a) * p + 2 * b + 1] = -gi;
            s[(2 * a + 1) * p + 2 * b] = gi;
        }
    }
    s
}

/// Inverse of a symmetric positive-definite matrix via Cholesky `S = GGᵀ`.
fn spd_inverse(s: &[f64], n: usize) -> Result<Vec<f64>> {
    let mut g = vec![0.0; n * n];
    for j in 0..n {
        let mut d = s[j * n + j];
        for k in 0..j {
            d -= g[j * n + k] * g[j * n + k];
        }
        if !(d > 0.0) || !d.is_finite() {
            return Err(Error::Numerical(format!(
                "consensus matrix is not positive definite (pivot {j} = {d:e})"
            )));
        }
        let djj = d.sqrt();
        g[j * n + j] = djj;
        for i in j + 1..n {
            let mut v = s[i * n + j];
            for k in 0..j {
                v -= g[i * n + k] * g[j * n + k];
            }
            g[i * n + j] = v / djj;
        }
    }
    // Solve G Gᵀ X = I column by column.
    let mut inv = vec![0.0; n * n];
    let mut y = vec![0.0; n];
    for col in 0..n {
        for i in 0..n {
            let mut v = if i == col { 1.0 } else { 0.0 };
            for k in 0..i {
                v -= g[i * n + k] * y[k];
            }
            y[i] = v / g[i * n + i];
        }
        for i in (0..n).rev() {
            let mut v = y[i];
            for k in i + 1..n {
                v -= g[k * n + i] * inv[k * n + col];
            }
            inv[i * n + col] = v / g[i * n + i];
        }
    }
    for i in 0..n {
        for j in i + 1..n {
            let avg = 0.5 * (inv[i * n + j] + inv[j * n + i]);
            inv[i * n + j] = avg;
            inv[j * n + i] = avg;
        }
    }
    Ok(inv)
}
