use thiserror::Error;

/// Errors raised by matrix, transform, distillation and interpretation routines.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("dimension mismatch: expected {expected:?}, found {found:?}")]
    DimensionMismatch {
        expected: (usize, usize),
        found: (usize, usize),
    },

    #[error("invalid matrix shape {rows}x{cols} with {len} entries")]
    InvalidShape {
        rows: usize,
        cols: usize,
        len: usize,
    },

    #[error("non-finite entry at ({row}, {col})")]
    NonFinite { row: usize, col: usize },

    #[error(
        "denominator near zero at ({row}, {col}): |d| = {magnitude:e} vs max |d| = {max:e}; \
         use a positive regularization strength"
    )]
    DivisionNearZero {
        row: usize,
        col: usize,
        magnitude: f64,
        max: f64,
    },

    #[error("empty input")]
    EmptyInput,

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("kernel has imaginary residue {imag:e} relative to real scale {real:e}")]
    ImaginaryResidue { imag: f64, real: f64 },

    #[error("unknown feature {id} (segmentation has {count} features)")]
    UnknownFeature { id: usize, count: usize },

    #[error("segmentation covers {seg:?} but matrix is {matrix:?}")]
    SegmentationMismatch {
        seg: (usize, usize),
        matrix: (usize, usize),
    },

    #[error("invalid segmentation: {0}")]
    InvalidSegmentation(String),

    #[error("heatmaps are not defined for custom segmentations")]
    UnsupportedSegmentation,
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
