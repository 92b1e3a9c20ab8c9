//! Small summary statistics over run results.

use serde::Serialize;

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Summary {
    pub median: f64,
    pub mean: f64,
    pub iqr: f64,
}

/// Linear-interpolation quantile of sorted data.
fn quantile(sorted: &[f64], q: f64) -> f64 {
    let pos = q * (sorted.len() - 1) as f64;
    let lo = pos.floor() as usize;
    let hi = pos.ceil() as usize;
    sorted[lo] + (pos - lo as f64) * (sorted[hi] - sorted[lo])
}

pub fn summarize(values: &[f64]) -> Option<Summary> {
    if values.is_empty() {
        return None;
    }
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    Some(Summary {
        median: quantile(&v, 0.5),
        mean: v.iter().sum::<f64>() / v.len() as f64,
        iqr: quantile(&v, 0.75) - quantile(&v, 0.25),
    })
}

/// Parallel and consensus shares of their sum, in percent.
pub fn split_pct(parallel: f64, consensus: f64) -> (f64, f64) {
    let t = parallel + consensus;
    if t > 0.0 {
        (100.0 * parallel / t, 100.0 * consensus / t)
    } else {
        (0.0, 0.0)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn summary_of_small_sets() {
        let s = summarize(&[4.0, 1.0, 3.0, 2.0]).unwrap();
        assert_eq!(s.median, 2.5);
        assert_eq!(s.mean, 2.5);
        assert_eq!(s.iqr, 1.5);
        assert_eq!(summarize(&[7.0]).unwrap().iqr, 0.0);
        assert!(summarize(&[]).is_none());
    }

    #[test]
    fn split_sums_to_hundred() {
        let (p, c) = split_pct(3.0, 1.0);
        assert_eq!((p, c), (75.0, 25.0));
        assert_eq!(split_pct(0.0, 0.0), (0.0, 0.0));
    }
}
