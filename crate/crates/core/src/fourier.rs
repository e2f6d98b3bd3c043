//! Discrete Fourier transforms over [`ComplexMatrix`].
//!
//! The fast path is the row-column factorization `X = (W_M · x) · W_N`: a
//! product with the M×M Fourier matrix transforms every column, and a product
//! with the N×N Fourier matrix then transforms every row. Both stages work for
//! arbitrary (non power of two) sizes. The definitional sums are kept as
//! oracles.
//!
//! Convolution and deconvolution use [`Normalization::Unnormalized`], the
//! convention under which `dft(x ⊛ k) == dft(x) ∘ dft(k)` holds exactly.

use std::f64::consts::PI;
use std::ops::Range;

use crate::error::{Error, Result};
use crate::numeric::{hadamard, Complex, ComplexMatrix};

/// Scaling convention of a transform.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default)]
pub enum Normalization {
    /// No factor on the forward transform; the inverse carries `1/M` per stage.
    #[default]
    Unnormalized,
    /// `1/√M` per stage in both directions (`1/√(MN)` for a 2-D transform).
    Unitary,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Direction {
    Forward,
    Inverse,
}

impl Direction {
    fn sign(self) -> f64 {
        match self {
            Direction::Forward => -1.0,
            Direction::Inverse => 1.0,
        }
    }
}

/// `e^{±j2π r/order}` for `0 <= r < order`, exact at quarter turns.
fn twiddle(r: usize, order: usize, dir: Direction) -> Complex {
    let s = dir.sign();
    if (4 * r).is_multiple_of(order) {
        return match 4 * r / order {
            0 => Complex::new(1.0, 0.0),
            1 => Complex::new(0.0, s),
            2 => Complex::new(-1.0, 0.0),
            _ => Complex::new(0.0, -s),
        };
    }
    let angle = 2.0 * PI * r as f64 / order as f64;
    Complex::new(angle.cos(), s * angle.sin())
}

/// Per-stage factor for a transform of length `order`.
fn stage_scale(order: usize, norm: Normalization, dir: Direction) -> f64 {
    match (norm, dir) {
        (Normalization::Unnormalized, Direction::Forward) => 1.0,
        (Normalization::Unnormalized, Direction::Inverse) => 1.0 / order as f64,
        (Normalization::Unitary, _) => 1.0 / (order as f64).sqrt(),
    }
}

/// Scaled transform matrix for one stage; entry `[m, k]` is
/// `scale · e^{∓j2π·mk/order}`. Symmetric.
pub(crate) fn stage_matrix(order: usize, norm: Normalization, dir: Direction) -> ComplexMatrix {
    let scale = stage_scale(order, norm, dir);
    let table: Vec<Complex> = (0..order).map(|r| twiddle(r, order, dir)).collect();
    ComplexMatrix::from_fn(order, order, |m, k| {
        let t = table[(m * k) % order];
        if scale == 1.0 {
            t
        } else {
            t * scale
        }
    })
}

/// The M×M forward Fourier matrix `W_M`.
#[derive(Debug, Clone, PartialEq)]
pub struct FourierMatrix {
    order: usize,
    norm: Normalization,
    entries: ComplexMatrix,
}

impl FourierMatrix {
    pub fn order(&self) -> usize {
        self.order
    }

    pub fn norm(&self) -> Normalization {
        self.norm
    }

    pub fn entries(&self) -> &ComplexMatrix {
        &self.entries
    }

    pub fn into_entries(self) -> ComplexMatrix {
        self.entries
    }
}

pub fn fourier_matrix(order: usize, norm: Normalization) -> Result<FourierMatrix> {
    if order == 0 {
        return Err(Error::InvalidParameter(
            "Fourier matrix order must be positive".into(),
        ));
    }
    Ok(FourierMatrix {
        order,
        norm,
        entries: stage_matrix(order, norm, Direction::Forward),
    })
}

/// Definitional O(M²) 1-D transform.
pub fn dft_1d_direct(x: &[Complex], norm: Normalization) -> Vec<Complex> {
    let m = x.len();
    if m == 0 {
        return Vec::new();
    }
    let scale = stage_scale(m, norm, Direction::Forward);
    (0..m)
        .map(|k| {
            let sum: Complex = x
                .iter()
                .enumerate()
                .map(|(i, &v)| v * twiddle((i * k) % m, m, Direction::Forward))
                .sum();
            sum * scale
        })
        .collect()
}

/// Definitional O(M²N²) 2-D transform: every output bin is a single double
/// sum over `x[m,n] · e^{-j2π(mk/M + nl/N)}`, with the combined phase read
/// from one table of `MN`-th roots of unity.
pub fn dft_2d_direct(x: &ComplexMatrix, norm: Normalization) -> ComplexMatrix {
    let (rows, cols) = x.shape();
    let total = rows * cols;
    let roots: Vec<Complex> = (0..total)
        .map(|t| twiddle(t, total, Direction::Forward))
        .collect();
    let scale =
        stage_scale(rows, norm, Direction::Forward) * stage_scale(cols, norm, Direction::Forward);
    let data = x.as_slice();
    let mut col_phase = vec![0usize; cols];

    ComplexMatrix::from_fn(rows, cols, |k, l| {
        // phase index of e^{-j2π(mk/M + nl/N)} is (mk mod M)·N + (nl mod N)·M over MN
        for (n, p) in col_phase.iter_mut().enumerate() {
            *p = ((n * l) % cols) * rows;
        }
        let mut acc = Complex::new(0.0, 0.0);
        for m in 0..rows {
            let base = ((m * k) % rows) * cols;
            for (v, &p) in data[m * cols..(m + 1) * cols].iter().zip(&col_phase) {
                let mut idx = base + p;
                if idx >= total {
                    idx -= total;
                }
                acc += v * roots[idx];
            }
        }
        acc * scale
    })
}

/// `out[k, j - cols.start] = Σ_m w[k,m] · x[m,j]` for `j` in `cols`, with
/// each entry accumulated in ascending `m`. `out` is row-major with
/// `cols.len()` columns.
pub(crate) fn transform_column_range(
    w: &ComplexMatrix,
    x: &ComplexMatrix,
    cols: Range<usize>,
    out: &mut [Complex],
) {
    let width = cols.len();
    debug_assert_eq!(out.len(), w.rows() * width);
    if width == 0 {
        return;
    }
    out.fill(Complex::new(0.0, 0.0));
    for (k, out_row) in out.chunks_mut(width).enumerate() {
        for (m, &wkm) in w.row(k).iter().enumerate() {
            for (o, v) in out_row.iter_mut().zip(&x.row(m)[cols.clone()]) {
                *o += wkm * v;
            }
        }
    }
}

/// `out[i - rows.start, l] = Σ_n x[i,n] · w[n,l]` for `i` in `rows`, with
/// each entry accumulated in ascending `n`. `out` is row-major with
/// `w.cols()` columns.
pub(crate) fn transform_row_range(
    x: &ComplexMatrix,
    w: &ComplexMatrix,
    rows: Range<usize>,
    out: &mut [Complex],
) {
    let width = w.cols();
    debug_assert_eq!(out.len(), rows.len() * width);
    out.fill(Complex::new(0.0, 0.0));
    for (i, out_row) in rows.zip(out.chunks_mut(width)) {
        for (n, &xin) in x.row(i).iter().enumerate() {
            for (o, wnl) in out_row.iter_mut().zip(w.row(n)) {
                *o += xin * wnl;
            }
        }
    }
}

pub(crate) fn column_stage(
    x: &ComplexMatrix,
    norm: Normalization,
    dir: Direction,
) -> ComplexMatrix {
    let w = stage_matrix(x.rows(), norm, dir);
    let mut out = ComplexMatrix::zeros(x.rows(), x.cols());
    transform_column_range(&w, x, 0..x.cols(), out.as_mut_slice());
    out
}

pub(crate) fn row_stage(x: &ComplexMatrix, norm: Normalization, dir: Direction) -> ComplexMatrix {
    let w = stage_matrix(x.cols(), norm, dir);
    let mut out = ComplexMatrix::zeros(x.rows(), x.cols());
    transform_row_range(x, &w, 0..x.rows(), out.as_mut_slice());
    out
}

/// `W_M · x`: a 1-D transform of every column.
pub fn dft_rows(x: &ComplexMatrix, norm: Normalization) -> ComplexMatrix {
    column_stage(x, norm, Direction::Forward)
}

/// `x · W_N`: a 1-D transform of every row.
pub fn dft_cols(x: &ComplexMatrix, norm: Normalization) -> ComplexMatrix {
    row_stage(x, norm, Direction::Forward)
}

/// `(W_M · x) · W_N`.
pub fn dft_2d_two_stage(x: &ComplexMatrix, norm: Normalization) -> ComplexMatrix {
    dft_cols(&dft_rows(x, norm), norm)
}

/// Inverse of [`dft_2d_two_stage`] under the same normalization.
pub fn idft_2d(spectrum: &ComplexMatrix, norm: Normalization) -> ComplexMatrix {
    row_stage(
        &column_stage(spectrum, norm, Direction::Inverse),
        norm,
        Direction::Inverse,
    )
}

/// Definitional circular convolution,
/// `y[a,b] = Σ x[m,n] · k[(a−m) mod M, (b−n) mod N]`.
pub fn circular_convolve_direct(x: &ComplexMatrix, k: &ComplexMatrix) -> Result<ComplexMatrix> {
    x.check_same_shape(k)?;
    let (rows, cols) = x.shape();
    Ok(ComplexMatrix::from_fn(rows, cols, |a, b| {
        let mut acc = Complex::new(0.0, 0.0);
        for m in 0..rows {
            let km = (a + rows - m) % rows;
            for n in 0..cols {
                acc += x[(m, n)] * k[(km, (b + cols - n) % cols)];
            }
        }
        acc
    }))
}

/// Circular convolution through the convolution theorem with unnormalized
/// transforms.
pub fn circular_convolve_fft(x: &ComplexMatrix, k: &ComplexMatrix) -> Result<ComplexMatrix> {
    x.check_same_shape(k)?;
    let norm = Normalization::Unnormalized;
    let product = hadamard(&dft_2d_two_stage(x, norm), &dft_2d_two_stage(k, norm))?;
    Ok(idft_2d(&product, norm))
}
