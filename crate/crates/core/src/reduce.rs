//! Order control for the vector sums that couple blocks (`Σᵢ Aᵢxᵢ`).
//!
//! Per-block work is split into fixed chunks of [`CHUNK_BLOCKS`] blocks. The
//! chunking never depends on the thread count, so with [`Reduction::Tree`] or
//! [`Reduction::Sequential`] the floating-point result is identical for any
//! number of worker threads.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

/// Number of consecutive blocks folded into one partial sum.
pub const CHUNK_BLOCKS: usize = 32;

/// How chunk partial sums are combined.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Reduction {
    /// Pairwise tree over chunk index. Bitwise reproducible.
    #[default]
    Tree,
    /// Left fold over chunk index. Bitwise reproducible.
    Sequential,
    /// Whatever order the work-stealing scheduler produces.
    Unordered,
}

impl Reduction {
    pub fn from_deterministic(flag: bool) -> Self {
        if flag {
            Reduction::Tree
        } else {
            Reduction::Unordered
        }
    }

    pub fn is_deterministic(self) -> bool {
        !matches!(self, Reduction::Unordered)
    }
}

/// Combines equally sized partial vectors into one.
///
/// Panics if `parts` is empty or the lengths disagree.
pub fn combine(parts: Vec<Vec<f64>>, mode: Reduction) -> Vec<f64> {
    assert!(!parts.is_empty(), "combine needs at least one partial");
    match mode {
        Reduction::Tree => pairwise_sum(parts),
        Reduction::Sequential => {
            let mut iter = parts.into_iter();
            let mut acc = iter.next().unwrap();
            for p in iter {
                add_assign(&mut acc, &p);
            }
            acc
        }
        Reduction::Unordered => parts
            .into_par_iter()
            .reduce_with(|mut a, b| {
                add_assign(&mut a, &b);
                a
            })
            .unwrap(),
    }
}

fn pairwise_sum(mut parts: Vec<Vec<f64>>) -> Vec<f64> {
    let n = parts.len();
    let mut stride = 1;
    while stride < n {
        let mut i = 0;
        while i + stride < n {
            let (head, tail) = parts.split_at_mut(i + stride);
            add_assign(&mut head[i], &tail[0]);
            i += 2 * stride;
        }
        stride *= 2;
    }
    parts.swap_remove(0)
}

#[inline]
pub(crate) fn add_assign(acc: &mut [f64], other: &[f64]) {
    assert_eq!(acc.len(), other.len());
    for (a, b) in acc.iter_mut().zip(other) {
        *a += *b;
    }
}

/// Euclidean norm, accumulated in index order.
pub fn norm2(v: &[f64]) -> f64 {
    dot(v, v).sqrt()
}

/// Inner product, accumulated in index order.
pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    assert_eq!(a.len(), b.len());
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}
