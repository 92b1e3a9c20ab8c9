//! The JADCE linear model and its real-valued group-Lasso expansion.
//!
//! A complex `K × M` matrix `Z` maps to the real vector
//! `vec([Re Z, Im Z]ᵀ)`: row `j` of `Z` becomes the contiguous chunk
//! `[Re Z[j, :], Im Z[j, :]]` of length `2M`. With this layout the unknown
//! `x` has one `2M` block per device and
//! `A = Re(Q) ⊗ I₂ₘ + Im(Q) ⊗ [[0, −Iₘ], [Iₘ, 0]]`, so `Ax` is just the
//! complex product `Q · mat(x)` and `Aᵀr` is `Qᴴ · mat(r)`.

use num_complex::Complex64;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::reduce::{self, Reduction, CHUNK_BLOCKS};

/// Largest dense expansion (in entries) [`StructuredA::dense`] builds by default.
pub const DENSE_ENTRY_CAP: usize = 1_000_000;

/// Row-major complex matrix stored as separate real and imaginary planes.
#[derive(Debug, Clone, PartialEq)]
pub struct ComplexMatrix {
    rows: usize,
    cols: usize,
    re: Vec<f64>,
    im: Vec<f64>,
}

impl ComplexMatrix {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        ComplexMatrix {
            rows,
            cols,
            re: vec![0.0; rows * cols],
            im: vec![0.0; rows * cols],
        }
    }

    pub fn from_planes(rows: usize, cols: usize, re: Vec<f64>, im: Vec<f64>) -> Result<Self> {
        if re.len() != rows * cols || im.len() != rows * cols {
            return Err(Error::Dimension(format!(
                "{}x{} matrix needs {} entries per plane, got {} and {}",
                rows,
                cols,
                rows * cols,
                re.len(),
                im.len()
            )));
        }
        if re.iter().chain(&im).any(|v| !v.is_finite()) {
            return Err(Error::Numerical("matrix entries must be finite".into()));
        }
        Ok(ComplexMatrix { rows, cols, re, im })
    }

    pub fn from_fn(rows: usize, cols: usize, mut f: impl FnMut(usize, usize) -> Complex64) -> Self {
        let mut out = ComplexMatrix::zeros(rows, cols);
        for r in 0..rows {
            for c in 0..cols {
                let v = f(r, c);
                out.re[r * cols + c] = v.re;
                out.im[r * cols + c] = v.im;
            }
        }
        out
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn re(&self) -> &[f64] {
        &self.re
    }

    pub fn im(&self) -> &[f64] {
        &self.im
    }

    pub fn get(&self, r: usize, c: usize) -> Complex64 {
        let k = r * self.cols + c;
        Complex64::new(self.re[k], self.im[k])
    }

    pub fn set(&mut self, r: usize, c: usize, v: Complex64) {
        let k = r * self.cols + c;
        self.re[k] = v.re;
        self.im[k] = v.im;
    }

    /// Plain triple-loop product.
    pub fn matmul(&self, other: &ComplexMatrix) -> Result<ComplexMatrix> {
        if self.cols != other.rows {
            return Err(Error::Dimension(format!(
                "cannot multiply {}x{} by {}x{}",
                self.rows, self.cols, other.rows, other.cols
            )));
        }
        let mut out = ComplexMatrix::zeros(self.rows, other.cols);
        for i in 0..self.rows {
            for k in 0..self.cols {
                let a = self.get(i, k);
                if a == Complex64::new(0.0, 0.0) {
                    continue;
                }
                for j in 0..other.cols {
                    let b = other.get(k, j);
                    let o = i * other.cols + j;
                    out.re[o] += a.re * b.re - a.im * b.im;
                    out.im[o] += a.re * b.im + a.im * b.re;
                }
            }
        }
        Ok(out)
    }

    pub fn conj_transpose(&self) -> ComplexMatrix {
        ComplexMatrix::from_fn(self.cols, self.rows, |r, c| self.get(c, r).conj())
    }

    pub fn frobenius_norm_sq(&self) -> f64 {
        self.re.iter().chain(&self.im).map(|v| v * v).sum()
    }

    pub fn is_zero(&self) -> bool {
        self.re.iter().chain(&self.im).all(|&v| v == 0.0)
    }
}

/// `N` blocks of `2M` reals, stored contiguously block after block.
#[derive(Debug, Clone, PartialEq)]
pub struct BlockVector {
    block_size: usize,
    data: Vec<f64>,
}

impl BlockVector {
    pub fn zeros(blocks: usize, block_size: usize) -> Self {
        BlockVector {
            block_size,
            data: vec![0.0; blocks * block_size],
        }
    }

    pub fn from_vec(block_size: usize, data: Vec<f64>) -> Result<Self> {
        if block_size == 0 || data.is_empty() || data.len() % block_size != 0 {
            return Err(Error::Dimension(format!(
                "length {} is not a positive multiple of block size {}",
                data.len(),
                block_size
            )));
        }
        Ok(BlockVector { block_size, data })
    }

    pub fn blocks(&self) -> usize {
        self.data.len() / self.block_size
    }

    pub fn block_size(&self) -> usize {
        self.block_size
    }

    pub fn block(&self, i: usize) -> &[f64] {
        &self.data[i * self.block_size..(i + 1) * self.block_size]
    }

    pub fn block_mut(&mut self, i: usize) -> &mut [f64] {
        &mut self.data[i * self.block_size..(i + 1) * self.block_size]
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }

    pub fn as_mut_slice(&mut self) -> &mut [f64] {
        &mut self.data
    }

    pub fn into_vec(self) -> Vec<f64> {
        self.data
    }

    pub fn iter_blocks(&self) -> std::slice::ChunksExact<'_, f64> {
        self.data.chunks_exact(self.block_size)
    }

    pub fn norm(&self) -> f64 {
        reduce::norm2(&self.data)
    }

    pub fn block_norms(&self) -> Vec<f64> {
        self.iter_blocks().map(reduce::norm2).collect()
    }

    pub fn is_finite(&self) -> bool {
        self.data.iter().all(|v| v.is_finite())
    }
}

/// `vec([Re Z, Im Z]ᵀ)` for a `K × M` complex matrix.
pub fn vec_pair(z: &ComplexMatrix) -> Vec<f64> {
    let m = z.cols;
    let mut out = Vec::with_capacity(2 * z.rows * m);
    for j in 0..z.rows {
        out.extend_from_slice(&z.re[j * m..(j + 1) * m]);
        out.extend_from_slice(&z.im[j * m..(j + 1) * m]);
    }
    out
}

/// Inverse of [`vec_pair`].
pub fn mat_pair(v: &[f64], rows: usize, cols: usize) -> Result<ComplexMatrix> {
    if v.len() != 2 * rows * cols {
        return Err(Error::Dimension(format!(
            "vector of length {} cannot be reshaped to {}x{} complex (needs {})",
            v.len(),
            rows,
            cols,
            2 * rows * cols
        )));
    }
    let mut out = ComplexMatrix::zeros(rows, cols);
    for (j, chunk) in v.chunks_exact(2 * cols).enumerate() {
        out.re[j * cols..(j + 1) * cols].copy_from_slice(&chunk[..cols]);
        out.im[j * cols..(j + 1) * cols].copy_from_slice(&chunk[cols..]);
    }
    Ok(out)
}

/// Row-major dense real matrix. Only used for small test-scale expansions.
#[derive(Debug, Clone, PartialEq)]
pub struct DenseMatrix {
    pub rows: usize,
    pub cols: usize,
    pub data: Vec<f64>,
}

impl DenseMatrix {
    pub fn get(&self, r: usize, c: usize) -> f64 {
        self.data[r * self.cols + c]
    }

    pub fn matvec(&self, x: &[f64]) -> Vec<f64> {
        assert_eq!(x.len(), self.cols);
        self.data
            .chunks_exact(self.cols)
            .map(|row| reduce::dot(row, x))
            .collect()
    }

    pub fn transpose_matvec(&self, y: &[f64]) -> Vec<f64> {
        assert_eq!(y.len(), self.rows);
        let mut out = vec![0.0; self.cols];
        for (row, &yr) in self.data.chunks_exact(self.cols).zip(y) {
            for (o, a) in out.iter_mut().zip(row) {
                *o += a * yr;
            }
        }
        out
    }
}

/// The real operator `A ∈ ℝ^{2LM × 2MN}` represented by `Q` and `M`.
#[derive(Debug, Clone)]
pub struct StructuredA {
    q: ComplexMatrix,
    antennas: usize,
    // Qᵀ planes, so the L coefficients of device i are contiguous.
    qt_re: Vec<f64>,
    qt_im: Vec<f64>,
}

impl StructuredA {
    pub fn new(q: ComplexMatrix, antennas: usize) -> Result<Self> {
        if q.rows == 0 || q.cols == 0 || antennas == 0 {
            return Err(Error::Dimension(format!(
                "need L, N, M >= 1, got L={}, N={}, M={}",
                q.rows, q.cols, antennas
            )));
        }
        let (l, n) = (q.rows, q.cols);
        let mut qt_re = vec![0.0; l * n];
        let mut qt_im = vec![0.0; l * n];
        for r in 0..l {
            for c in 0..n {
                qt_re[c * l + r] = q.re[r * n + c];
                qt_im[c * l + r] = q.im[r * n + c];
            }
        }
        Ok(StructuredA {
            q,
            antennas,
            qt_re,
            qt_im,
        })
    }

    pub fn q(&self) -> &ComplexMatrix {
        &self.q
    }

    /// `L`
    pub fn sequence_length(&self) -> usize {
        self.q.rows
    }

    /// `N`
    pub fn devices(&self) -> usize {
        self.q.cols
    }

    /// `M`
    pub fn antennas(&self) -> usize {
        self.antennas
    }

    pub fn block_size(&self) -> usize {
        2 * self.antennas
    }

    /// `2LM`
    pub fn rows(&self) -> usize {
        2 * self.q.rows * self.antennas
    }

    /// `2MN`
    pub fn cols(&self) -> usize {
        2 * self.q.cols * self.antennas
    }

    fn check_blocks(&self, x: &BlockVector) -> Result<()> {
        if x.block_size != self.block_size() || x.blocks() != self.devices() {
            return Err(Error::Dimension(format!(
                "expected {} blocks of size {}, got {} of size {}",
                self.devices(),
                self.block_size(),
                x.blocks(),
                x.block_size
            )));
        }
        Ok(())
    }

    fn check_range(&self, r: &[f64]) -> Result<()> {
        if r.len() != self.rows() {
            return Err(Error::Dimension(format!(
                "expected a range vector of length {}, got {}",
                self.rows(),
                r.len()
            )));
        }
        Ok(())
    }

    fn check_index(&self, i: usize) -> Result<()> {
        if i >= self.devices() {
            return Err(Error::BlockIndex {
                index: i,
                count: self.devices(),
            });
        }
        Ok(())
    }

    /// `out += Aᵢ xᵢ`. Zero blocks are skipped.
    #[inline]
    fn accumulate_block(&self, out: &mut [f64], i: usize, xb: &[f64]) {
        if xb.iter().all(|&v| v == 0.0) {
            return;
        }
        let m = self.antennas;
        let l = self.q.rows;
        let (xr, xi) = xb.split_at(m);
        let qr = &self.qt_re[i * l..(i + 1) * l];
        let qi = &self.qt_im[i * l..(i + 1) * l];
        for (row, (&a, &b)) in out.chunks_exact_mut(2 * m).zip(qr.iter().zip(qi)) {
            let (ore, oim) = row.split_at_mut(m);
            for k in 0..m {
                ore[k] += a * xr[k] - b * xi[k];
                oim[k] += a * xi[k] + b * xr[k];
            }
        }
    }

    /// `out = Aᵢᵀ r`.
    #[inline]
    fn adjoint_block_into(&self, out: &mut [f64], i: usize, r: &[f64]) {
        let m = self.antennas;
        let l = self.q.rows;
        let qr = &self.qt_re[i * l..(i + 1) * l];
        let qi = &self.qt_im[i * l..(i + 1) * l];
        out.fill(0.0);
        let (ore, oim) = out.split_at_mut(m);
        for (row, (&a, &b)) in r.chunks_exact(2 * m).zip(qr.iter().zip(qi)) {
            let (rr, ri) = row.split_at(m);
            for k in 0..m {
                ore[k] += a * rr[k] + b * ri[k];
                oim[k] += a * ri[k] - b * rr[k];
            }
        }
    }

    /// Partial sums `Σ_{i ∈ chunk} Aᵢxᵢ`, one per chunk of
    /// [`CHUNK_BLOCKS`] blocks, in chunk order.
    pub fn chunk_products(&self, x: &BlockVector) -> Result<Vec<Vec<f64>>> {
        self.check_blocks(x)?;
        let bs = self.block_size();
        let rows = self.rows();
        Ok(x
            .data
            .par_chunks(bs * CHUNK_BLOCKS)
            .enumerate()
            .map(|(c, chunk)| {
                let mut acc = vec![0.0; rows];
                for (j, xb) in chunk.chunks_exact(bs).enumerate() {
                    self.accumulate_block(&mut acc, c * CHUNK_BLOCKS + j, xb);
                }
                acc
            })
            .collect())
    }

    /// `Ax` with the deterministic tree reduction.
    pub fn apply(&self, x: &BlockVector) -> Result<Vec<f64>> {
        self.apply_with(x, Reduction::Tree)
    }

    pub fn apply_with(&self, x: &BlockVector, mode: Reduction) -> Result<Vec<f64>> {
        Ok(reduce::combine(self.chunk_products(x)?, mode))
    }

    /// `Aᵀr`, computed block by block (no cross-block reduction).
    pub fn adjoint(&self, r: &[f64]) -> Result<BlockVector> {
        let mut out = BlockVector::zeros(self.devices(), self.block_size());
        self.adjoint_into(r, &mut out)?;
        Ok(out)
    }

    pub fn adjoint_into(&self, r: &[f64], out: &mut BlockVector) -> Result<()> {
        self.check_range(r)?;
        self.check_blocks(out)?;
        let bs = self.block_size();
        out.data
            .par_chunks_mut(bs * CHUNK_BLOCKS)
            .enumerate()
            .for_each(|(c, chunk)| {
                for (j, ob) in chunk.chunks_exact_mut(bs).enumerate() {
                    self.adjoint_block_into(ob, c * CHUNK_BLOCKS + j, r);
                }
            });
        Ok(())
    }

    /// `Aᵢxᵢ` for a single device block.
    pub fn apply_block(&self, i: usize, xi: &[f64]) -> Result<Vec<f64>> {
        self.check_index(i)?;
        if xi.len() != self.block_size() {
            return Err(Error::Dimension(format!(
                "block of length {} given, expected {}",
                xi.len(),
                self.block_size()
            )));
        }
        let mut out = vec![0.0; self.rows()];
        self.accumulate_block(&mut out, i, xi);
        Ok(out)
    }

    /// `Aᵢᵀr` for a single device block.
    pub fn adjoint_block(&self, i: usize, r: &[f64]) -> Result<Vec<f64>> {
        self.check_index(i)?;
        self.check_range(r)?;
        let mut out = vec![0.0; self.block_size()];
        self.adjoint_block_into(&mut out, i, r);
        Ok(out)
    }

    pub fn dense(&self) -> Result<DenseMatrix> {
        self.dense_with_cap(DENSE_ENTRY_CAP)
    }

    /// Materializes `A`. Refuses when `2LM·2MN` exceeds `cap`.
    pub fn dense_with_cap(&self, cap: usize) -> Result<DenseMatrix> {
        let (rows, cols) = (self.rows(), self.cols());
        let entries = rows.saturating_mul(cols);
        if entries > cap {
            return Err(Error::DenseCap { entries, cap });
        }
        let m = self.antennas;
        let mut data = vec![0.0; entries];
        for l in 0..self.q.rows {
            for i in 0..self.q.cols {
                let q = self.q.get(l, i);
                for k in 0..m {
                    let (r_re, r_im) = (l * 2 * m + k, l * 2 * m + m + k);
                    let (c_re, c_im) = (i * 2 * m + k, i * 2 * m + m + k);
                    data[r_re * cols + c_re] = q.re;
                    data[r_re * cols + c_im] = -q.im;
                    data[r_im * cols + c_re] = q.im;
                    data[r_im * cols + c_im] = q.re;
                }
            }
        }
        Ok(DenseMatrix { rows, cols, data })
    }
}
