//! Dense complex matrices and the elementwise and product kernels built on them.

use std::ops::{Index, IndexMut};

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::parallel::WorkerPool;

/// Scalar type of every matrix entry.
pub type Complex = Complex64;

/// Relative magnitude below which a denominator counts as zero in an
/// unregularized division.
pub const NEAR_ZERO_RELATIVE: f64 = 1e-12;

/// Dense row-major complex matrix with finite entries.
#[derive(Debug, Clone, PartialEq)]
pub struct ComplexMatrix {
    rows: usize,
    cols: usize,
    data: Vec<Complex>,
}

impl ComplexMatrix {
    /// Builds a matrix from row-major data, rejecting empty shapes, length
    /// mismatches and non-finite entries.
    pub fn new(rows: usize, cols: usize, data: Vec<Complex>) -> Result<Self> {
        if rows == 0 || cols == 0 || data.len() != rows * cols {
            return Err(Error::InvalidShape {
                rows,
                cols,
                len: data.len(),
            });
        }
        if let Some(i) = data.iter().position(|z| !z.is_finite()) {
            return Err(Error::NonFinite {
                row: i / cols,
                col: i % cols,
            });
        }
        Ok(Self { rows, cols, data })
    }

    pub fn from_real(rows: usize, cols: usize, values: &[f64]) -> Result<Self> {
        Self::new(
            rows,
            cols,
            values.iter().map(|&re| Complex::new(re, 0.0)).collect(),
        )
    }

    /// Builds a matrix from nested real rows; all rows must have equal length.
    pub fn from_real_rows<R: AsRef<[f64]>>(rows: &[R]) -> Result<Self> {
        let cols = rows.first().map_or(0, |r| r.as_ref().len());
        let mut data = Vec::with_capacity(rows.len() * cols);
        for (i, row) in rows.iter().enumerate() {
            let row = row.as_ref();
            if row.len() != cols {
                return Err(Error::DimensionMismatch {
                    expected: (i, cols),
                    found: (i, row.len()),
                });
            }
            data.extend(row.iter().map(|&re| Complex::new(re, 0.0)));
        }
        Self::new(rows.len(), cols, data)
    }

    /// # Panics
    /// If either dimension is zero.
    pub fn zeros(rows: usize, cols: usize) -> Self {
        assert!(rows > 0 && cols > 0, "matrix dimensions must be positive");
        Self {
            rows,
            cols,
            data: vec![Complex::new(0.0, 0.0); rows * cols],
        }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Self::zeros(n, n);
        for i in 0..n {
            m[(i, i)] = Complex::new(1.0, 0.0);
        }
        m
    }

    /// Matrix with a single unit entry at `(row, col)`.
    pub fn delta(rows: usize, cols: usize, row: usize, col: usize) -> Self {
        let mut m = Self::zeros(rows, cols);
        m[(row, col)] = Complex::new(1.0, 0.0);
        m
    }

    /// # Panics
    /// If either dimension is zero.
    pub fn from_fn(rows: usize, cols: usize, mut f: impl FnMut(usize, usize) -> Complex) -> Self {
        assert!(rows > 0 && cols > 0, "matrix dimensions must be positive");
        let mut data = Vec::with_capacity(rows * cols);
        for r in 0..rows {
            for c in 0..cols {
                data.push(f(r, c));
            }
        }
        Self { rows, cols, data }
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn shape(&self) -> (usize, usize) {
        (self.rows, self.cols)
    }

    pub fn as_slice(&self) -> &[Complex] {
        &self.data
    }

    pub(crate) fn as_mut_slice(&mut self) -> &mut [Complex] {
        &mut self.data
    }

    pub fn into_vec(self) -> Vec<Complex> {
        self.data
    }

    pub fn row(&self, r: usize) -> &[Complex] {
        &self.data[r * self.cols..(r + 1) * self.cols]
    }

    pub fn column(&self, c: usize) -> Vec<Complex> {
        (0..self.rows).map(|r| self[(r, c)]).collect()
    }

    pub fn is_zero(&self) -> bool {
        self.data.iter().all(|z| z.re == 0.0 && z.im == 0.0)
    }

    pub fn frobenius_norm(&self) -> f64 {
        self.data.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt()
    }

    pub fn max_abs(&self) -> f64 {
        self.data.iter().map(|z| z.norm()).fold(0.0, f64::max)
    }

    pub fn max_abs_imag(&self) -> f64 {
        self.data.iter().map(|z| z.im.abs()).fold(0.0, f64::max)
    }

    pub fn map(&self, f: impl Fn(Complex) -> Complex) -> Self {
        Self {
            rows: self.rows,
            cols: self.cols,
            data: self.data.iter().map(|&z| f(z)).collect(),
        }
    }

    pub fn scale(&self, s: Complex) -> Self {
        self.map(|z| z * s)
    }

    pub fn conj(&self) -> Self {
        self.map(|z| z.conj())
    }

    pub fn add(&self, other: &Self) -> Result<Self> {
        self.zip_with(other, |a, b| a + b)
    }

    pub fn sub(&self, other: &Self) -> Result<Self> {
        self.zip_with(other, |a, b| a - b)
    }

    pub(crate) fn zip_with(
        &self,
        other: &Self,
        f: impl Fn(Complex, Complex) -> Complex,
    ) -> Result<Self> {
        self.check_same_shape(other)?;
        Ok(Self {
            rows: self.rows,
            cols: self.cols,
            data: self
                .data
                .iter()
                .zip(&other.data)
                .map(|(&a, &b)| f(a, b))
                .collect(),
        })
    }

    pub(crate) fn check_same_shape(&self, other: &Self) -> Result<()> {
        if self.shape() != other.shape() {
            return Err(Error::DimensionMismatch {
                expected: self.shape(),
                found: other.shape(),
            });
        }
        Ok(())
    }

    /// Elementwise real parts.
    pub fn real_part(&self) -> RealMatrix {
        RealMatrix {
            rows: self.rows,
            cols: self.cols,
            data: self.data.iter().map(|z| z.re).collect(),
        }
    }
}

impl Index<(usize, usize)> for ComplexMatrix {
    type Output = Complex;

    fn index(&self, (r, c): (usize, usize)) -> &Complex {
        assert!(
            r < self.rows && c < self.cols,
            "index ({r}, {c}) out of bounds"
        );
        &self.data[r * self.cols + c]
    }
}

impl IndexMut<(usize, usize)> for ComplexMatrix {
    fn index_mut(&mut self, (r, c): (usize, usize)) -> &mut Complex {
        assert!(
            r < self.rows && c < self.cols,
            "index ({r}, {c}) out of bounds"
        );
        &mut self.data[r * self.cols + c]
    }
}

/// Dense row-major real matrix, used for heatmaps and real kernel projections.
#[derive(Debug, Clone, PartialEq)]
pub struct RealMatrix {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
}

impl RealMatrix {
    pub fn new(rows: usize, cols: usize, data: Vec<f64>) -> Result<Self> {
        if rows == 0 || cols == 0 || data.len() != rows * cols {
            return Err(Error::InvalidShape {
                rows,
                cols,
                len: data.len(),
            });
        }
        Ok(Self { rows, cols, data })
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }

    pub fn row(&self, r: usize) -> &[f64] {
        &self.data[r * self.cols..(r + 1) * self.cols]
    }
}

impl Index<(usize, usize)> for RealMatrix {
    type Output = f64;

    fn index(&self, (r, c): (usize, usize)) -> &f64 {
        assert!(
            r < self.rows && c < self.cols,
            "index ({r}, {c}) out of bounds"
        );
        &self.data[r * self.cols + c]
    }
}

/// Largest absolute deviation from `reference`, relative to the largest
/// entry magnitude of `reference` (absolute when the reference is zero).
pub fn max_rel_error(actual: &ComplexMatrix, reference: &ComplexMatrix) -> f64 {
    assert_eq!(actual.shape(), reference.shape(), "shape mismatch");
    let diff = actual
        .as_slice()
        .iter()
        .zip(reference.as_slice())
        .map(|(a, b)| (a - b).norm())
        .fold(0.0, f64::max);
    let scale = reference.max_abs();
    if scale > 0.0 {
        diff / scale
    } else {
        diff
    }
}

/// Tile sizes for [`block_matmul`]. Output tiles are `block_rows × block_cols`
/// and the shared inner dimension is cut into runs of `block_cols`. Tiles at
/// the trailing edges may be smaller.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct BlockPartition {
    block_rows: usize,
    block_cols: usize,
}

impl BlockPartition {
    pub fn new(block_rows: usize, block_cols: usize) -> Result<Self> {
        if block_rows == 0 || block_cols == 0 {
            return Err(Error::InvalidParameter(format!(
                "block dimensions must be positive, got {block_rows}x{block_cols}"
            )));
        }
        Ok(Self {
            block_rows,
            block_cols,
        })
    }

    pub fn block_rows(&self) -> usize {
        self.block_rows
    }

    pub fn block_cols(&self) -> usize {
        self.block_cols
    }
}

impl Default for BlockPartition {
    fn default() -> Self {
        Self {
            block_rows: 64,
            block_cols: 64,
        }
    }
}

fn check_inner(a: &ComplexMatrix, b: &ComplexMatrix) -> Result<()> {
    if a.cols != b.rows {
        return Err(Error::DimensionMismatch {
            expected: (a.cols, b.cols),
            found: b.shape(),
        });
    }
    Ok(())
}

/// Triple-loop product, accumulating each entry in ascending inner index.
pub fn matmul_naive(a: &ComplexMatrix, b: &ComplexMatrix) -> Result<ComplexMatrix> {
    check_inner(a, b)?;
    Ok(ComplexMatrix::from_fn(a.rows, b.cols, |i, j| {
        let mut acc = Complex::new(0.0, 0.0);
        for k in 0..a.cols {
            acc += a[(i, k)] * b[(k, j)];
        }
        acc
    }))
}

/// Tiled product. Each output tile is one task on `pool`; within a tile the
/// partial products of successive inner blocks are summed in block order, so
/// the result depends only on the partition, not on scheduling.
pub fn block_matmul(
    a: &ComplexMatrix,
    b: &ComplexMatrix,
    part: BlockPartition,
    pool: &WorkerPool,
) -> Result<ComplexMatrix> {
    check_inner(a, b)?;
    let (m, inner, n) = (a.rows, a.cols, b.cols);
    let (br, bc) = (part.block_rows, part.block_cols);
    let tile_rows = m.div_ceil(br);
    let tile_cols = n.div_ceil(bc);

    let tiles = pool.map(tile_rows * tile_cols, |t| {
        let (r0, c0) = ((t / tile_cols) * br, (t % tile_cols) * bc);
        let (r1, c1) = ((r0 + br).min(m), (c0 + bc).min(n));
        let width = c1 - c0;
        let mut acc = vec![Complex::new(0.0, 0.0); (r1 - r0) * width];
        let mut partial = vec![Complex::new(0.0, 0.0); width];
        for k0 in (0..inner).step_by(bc) {
            let k1 = (k0 + bc).min(inner);
            for i in r0..r1 {
                partial.fill(Complex::new(0.0, 0.0));
                for k in k0..k1 {
                    let aik = a[(i, k)];
                    for (p, bkj) in partial.iter_mut().zip(&b.row(k)[c0..c1]) {
                        *p += aik * bkj;
                    }
                }
                let row = &mut acc[(i - r0) * width..(i - r0 + 1) * width];
                for (dst, p) in row.iter_mut().zip(&partial) {
                    *dst += p;
                }
            }
        }
        acc
    });

    let mut out = ComplexMatrix::zeros(m, n);
    for (t, tile) in tiles.into_iter().enumerate() {
        let (r0, c0) = ((t / tile_cols) * br, (t % tile_cols) * bc);
        let width = (c0 + bc).min(n) - c0;
        for (di, chunk) in tile.chunks(width).enumerate() {
            let start = (r0 + di) * n + c0;
            out.data[start..start + width].copy_from_slice(chunk);
        }
    }
    Ok(out)
}

pub fn hadamard(a: &ComplexMatrix, b: &ComplexMatrix) -> Result<ComplexMatrix> {
    a.zip_with(b, |x, y| x * y)
}

/// Elementwise `num · conj(den) / (|den|² + λ)`.
///
/// With `lambda == 0` this is plain elementwise division, and any denominator
/// with `|den| < 1e-12 · max|den|` is rejected as [`Error::DivisionNearZero`].
pub fn hadamard_div_regularized(
    num: &ComplexMatrix,
    den: &ComplexMatrix,
    lambda: f64,
) -> Result<ComplexMatrix> {
    let cross = num.zip_with(den, |n, d| n * d.conj())?;
    let power: Vec<f64> = den.data.iter().map(|d| d.norm_sqr()).collect();
    divide_by_power(cross, &power, lambda)
}

/// Divides a cross spectrum by `power + λ` entrywise, where `power` holds
/// squared denominator magnitudes.
pub(crate) fn divide_by_power(
    mut cross: ComplexMatrix,
    power: &[f64],
    lambda: f64,
) -> Result<ComplexMatrix> {
    debug_assert_eq!(cross.data.len(), power.len());
    if !(lambda.is_finite() && lambda >= 0.0) {
        return Err(Error::InvalidParameter(format!(
            "regularization strength must be finite and nonnegative, got {lambda}"
        )));
    }
    if lambda == 0.0 {
        let max = power.iter().copied().fold(0.0, f64::max).sqrt();
        let floor = NEAR_ZERO_RELATIVE * max;
        if let Some(i) = power.iter().position(|&p| p.sqrt() < floor || p == 0.0) {
            return Err(Error::DivisionNearZero {
                row: i / cross.cols,
                col: i % cross.cols,
                magnitude: power[i].sqrt(),
                max,
            });
        }
    }
    for (z, &p) in cross.data.iter_mut().zip(power) {
        *z /= p + lambda;
    }
    Ok(cross)
}
