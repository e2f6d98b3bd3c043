//! Explaining a model by distilling it into one circular-convolution kernel.
//!
//! Given recorded input/output pairs `(X, Y)` of some model, [`distill`] finds
//! the kernel `K` with `X ⊛ K ≈ Y` in closed form in the frequency domain,
//! and [`explain`] scores input features by zeroing them and measuring the
//! change in output. Every 2-D transform is computed as two matrix products
//! with Fourier matrices, split by rows and columns across a [`WorkerPool`].

pub mod distill;
pub mod error;
pub mod explain;
pub mod fourier;
pub mod numeric;
pub mod parallel;

pub use distill::{
    fit_error, forward, solve_kernel, solve_kernel_batch, DistilledModel, Lambda, TrainingSet,
};
pub use error::{Error, Result};
pub use explain::{
    contribution, contribution_map, heatmap, isolate_feature, mask_feature, rank_features,
    ContributionMap, FeatureContribution, FeatureMask, FeatureSegmentation, SegmentationKind,
};
pub use fourier::{
    circular_convolve_direct, circular_convolve_fft, dft_1d_direct, dft_2d_direct,
    dft_2d_two_stage, dft_cols, dft_rows, fourier_matrix, idft_2d, Direction, FourierMatrix,
    Normalization,
};
pub use numeric::{
    block_matmul, hadamard, hadamard_div_regularized, matmul_naive, max_rel_error, BlockPartition,
    Complex, ComplexMatrix, RealMatrix,
};
pub use parallel::{
    parallel_batch_dft, parallel_batch_idft, parallel_dft_2d, parallel_idft_2d, plan_split,
    reduce_sum, Axis, DistributionTable, Shard, WorkerPool,
};
