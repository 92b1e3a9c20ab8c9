//! Objective and optimality measures, activity detection and channel error.

use serde::{Deserialize, Serialize};

use crate::error::Result;
use crate::instance::{GroupLassoProblem, JadceInstance};
use crate::model::{mat_pair, BlockVector};
use crate::reduce;

/// `½‖Ax − b‖² + γ Σᵢ ‖xᵢ‖₂`.
pub fn objective(p: &GroupLassoProblem, x: &BlockVector) -> Result<f64> {
    let mut r = p.a.apply(x)?;
    for (ri, bi) in r.iter_mut().zip(&p.b) {
        *ri -= bi;
    }
    let penalty: f64 = x.block_norms().iter().sum();
    Ok(0.5 * reduce::dot(&r, &r) + p.gamma * penalty)
}

/// Largest blockwise violation of `0 ∈ Aᵢᵀ(Ax − b) + γ ∂‖xᵢ‖₂`.
///
/// For `xᵢ ≠ 0` this is `‖rᵢ + γ xᵢ/‖xᵢ‖‖`, for `xᵢ = 0` it is
/// `max(‖rᵢ‖ − γ, 0)`, with `rᵢ = Aᵢᵀ(Ax − b)`.
pub fn kkt_residual(p: &GroupLassoProblem, x: &BlockVector) -> Result<f64> {
    Ok(kkt_residuals(p, x)?.into_iter().fold(0.0, f64::max))
}

/// Per-block residuals behind [`kkt_residual`].
pub fn kkt_residuals(p: &GroupLassoProblem, x: &BlockVector) -> Result<Vec<f64>> {
    let mut r = p.a.apply(x)?;
    for (ri, bi) in r.iter_mut().zip(&p.b) {
        *ri -= bi;
    }
    let grad = p.a.adjoint(&r)?;
    Ok(x.iter_blocks()
        .zip(grad.iter_blocks())
        .map(|(xi, gi)| block_kkt(xi, gi, p.gamma))
        .collect())
}

pub(crate) fn block_kkt(xi: &[f64], gi: &[f64], gamma: f64) -> f64 {
    let nx = reduce::norm2(xi);
    if nx > 0.0 {
        let s = gamma / nx;
        xi.iter()
            .zip(gi)
            .map(|(x, g)| (g + s * x).powi(2))
            .sum::<f64>()
            .sqrt()
    } else {
        (reduce::norm2(gi) - gamma).max(0.0)
    }
}

/// Outcome of thresholding the recovered block norms.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DetectionResult {
    pub estimated_active: Vec<usize>,
    pub missed_detection_rate: f64,
    pub false_alarm_rate: f64,
    pub block_norms: Vec<f64>,
}

/// Declares device `i` active iff `‖xᵢ‖ > threshold_fraction · maxⱼ ‖xⱼ‖`.
///
/// `true_active` holds zero-based indices. Missed rate is over the `K`
/// active devices, false-alarm rate over the `N − K` inactive ones; an empty
/// population gives rate 0.
pub fn detect(x: &BlockVector, threshold_fraction: f64, true_active: &[usize]) -> DetectionResult {
    assert!(
        threshold_fraction > 0.0 && threshold_fraction < 1.0,
        "threshold fraction must lie in (0, 1)"
    );
    let norms = x.block_norms();
    let max = norms.iter().cloned().fold(0.0, f64::max);
    let estimated_active: Vec<usize> = if max > 0.0 {
        norms
            .iter()
            .enumerate()
            .filter(|(_, &v)| v > threshold_fraction * max)
            .map(|(i, _)| i)
            .collect()
    } else {
        Vec::new()
    };
    let n = norms.len();
    let mut is_true = vec![false; n];
    for &i in true_active {
        is_true[i] = true;
    }
    let mut is_est = vec![false; n];
    for &i in &estimated_active {
        is_est[i] = true;
    }
    let missed = (0..n).filter(|&i| is_true[i] && !is_est[i]).count();
    let false_alarms = (0..n).filter(|&i| !is_true[i] && is_est[i]).count();
    let k = true_active.len();
    let rate = |count: usize, pop: usize| if pop == 0 { 0.0 } else { count as f64 / pop as f64 };
    DetectionResult {
        estimated_active,
        missed_detection_rate: rate(missed, k),
        false_alarm_rate: rate(false_alarms, n - k),
        block_norms: norms,
    }
}

/// `‖X̂ − SH‖²_F / ‖SH‖²_F` with `X̂ = mat(x)`.
///
/// When `SH = 0` the ratio is 0 for `x = 0` and infinite otherwise.
pub fn nmse(x: &BlockVector, inst: &JadceInstance) -> Result<f64> {
    let sh = inst.signal();
    let est = mat_pair(x.as_slice(), sh.rows(), sh.cols())?;
    let err: f64 = est
        .re()
        .iter()
        .zip(sh.re())
        .chain(est.im().iter().zip(sh.im()))
        .map(|(a, b)| (a - b).powi(2))
        .sum();
    let den = sh.frobenius_norm_sq();
    Ok(if den > 0.0 {
        err / den
    } else if err == 0.0 {
        0.0
    } else {
        f64::INFINITY
    })
}
