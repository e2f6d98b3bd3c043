//! Fitting a single circular-convolution kernel `K` with `X ⊛ K ≈ Y`.
//!
//! For one pair the kernel is read off the spectra, `K = F⁻¹(F(Y) / F(X))`.
//! For several pairs each frequency bin is solved independently as a
//! regularized least-squares problem,
//!
//! ```text
//! K̂(ω) = Σᵢ F(Yᵢ)(ω)·conj(F(Xᵢ)(ω)) / (Σᵢ |F(Xᵢ)(ω)|² + λ)
//! ```
//!
//! which minimizes `Σᵢ ‖Xᵢ ⊛ K − Yᵢ‖² + λ‖K̂‖²` in one shot and reduces to the
//! single-pair formula when there is one pair.

use std::fmt;
use std::str::FromStr;

use crate::error::{Error, Result};
use crate::fourier::Normalization;
use crate::numeric::{divide_by_power, hadamard, ComplexMatrix, RealMatrix};
use crate::parallel::{
    parallel_batch_dft, parallel_dft_2d, parallel_idft_2d, reduce_sum, WorkerPool,
};

/// Multiplier on the mean input spectral power used by [`Lambda::Auto`].
pub const AUTO_LAMBDA_FACTOR: f64 = 1e-6;

/// Largest tolerated `max|imag| / max|real|` when projecting a kernel onto the reals.
pub const REAL_PROJECTION_TOLERANCE: f64 = 1e-8;

/// Regularization strength for the spectral division.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Lambda {
    Value(f64),
    /// `1e-6 ×` the mean of `|F(X)|²` over all bins and inputs.
    Auto,
}

impl From<f64> for Lambda {
    fn from(value: f64) -> Self {
        Lambda::Value(value)
    }
}

impl FromStr for Lambda {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        if s.eq_ignore_ascii_case("auto") {
            return Ok(Lambda::Auto);
        }
        let value: f64 = s.parse().map_err(|_| {
            Error::InvalidParameter(format!("invalid regularization strength {s:?}"))
        })?;
        check_lambda(value)?;
        Ok(Lambda::Value(value))
    }
}

impl fmt::Display for Lambda {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Lambda::Value(v) => write!(f, "{v}"),
            Lambda::Auto => f.write_str("auto"),
        }
    }
}

fn check_lambda(value: f64) -> Result<f64> {
    if value.is_finite() && value >= 0.0 {
        Ok(value)
    } else {
        Err(Error::InvalidParameter(format!(
            "regularization strength must be finite and nonnegative, got {value}"
        )))
    }
}

impl Lambda {
    fn resolve(self, power: &[f64]) -> Result<f64> {
        match self {
            Lambda::Value(v) => check_lambda(v),
            Lambda::Auto => Ok(AUTO_LAMBDA_FACTOR * power.iter().sum::<f64>() / power.len() as f64),
        }
    }
}

/// A fitted kernel together with its unnormalized spectrum.
#[derive(Debug, Clone, PartialEq)]
pub struct DistilledModel {
    kernel: ComplexMatrix,
    spectrum: ComplexMatrix,
    lambda: f64,
}

impl DistilledModel {
    /// Wraps an existing kernel, e.g. one loaded from disk.
    pub fn from_kernel(kernel: ComplexMatrix, lambda: f64, pool: &WorkerPool) -> Result<Self> {
        let lambda = check_lambda(lambda)?;
        let spectrum = parallel_dft_2d(&kernel, Normalization::Unnormalized, pool);
        Ok(Self {
            kernel,
            spectrum,
            lambda,
        })
    }

    pub fn kernel(&self) -> &ComplexMatrix {
        &self.kernel
    }

    pub fn spectrum(&self) -> &ComplexMatrix {
        &self.spectrum
    }

    /// The resolved regularization strength the kernel was fitted with.
    pub fn lambda(&self) -> f64 {
        self.lambda
    }

    /// Always [`Normalization::Unnormalized`]; the solver depends on it.
    pub fn norm(&self) -> Normalization {
        Normalization::Unnormalized
    }

    pub fn shape(&self) -> (usize, usize) {
        self.kernel.shape()
    }

    /// Real part of the kernel. Fails when the imaginary part is not
    /// negligible, which indicates inconsistent training data.
    pub fn real_kernel(&self) -> Result<RealMatrix> {
        let imag = self.kernel.max_abs_imag();
        let real = self
            .kernel
            .as_slice()
            .iter()
            .map(|z| z.re.abs())
            .fold(0.0, f64::max);
        if imag > REAL_PROJECTION_TOLERANCE * real {
            return Err(Error::ImaginaryResidue { imag, real });
        }
        Ok(self.kernel.real_part())
    }
}

/// Nonempty set of `(X, Y)` pairs sharing one shape.
#[derive(Debug, Clone, PartialEq)]
pub struct TrainingSet {
    pairs: Vec<(ComplexMatrix, ComplexMatrix)>,
}

impl TrainingSet {
    pub fn new(pairs: Vec<(ComplexMatrix, ComplexMatrix)>) -> Result<Self> {
        let shape = pairs.first().ok_or(Error::EmptyInput)?.0.shape();
        for (x, y) in &pairs {
            for m in [x, y] {
                if m.shape() != shape {
                    return Err(Error::DimensionMismatch {
                        expected: shape,
                        found: m.shape(),
                    });
                }
            }
        }
        Ok(Self { pairs })
    }

    pub fn single(x: ComplexMatrix, y: ComplexMatrix) -> Result<Self> {
        Self::new(vec![(x, y)])
    }

    pub fn pairs(&self) -> &[(ComplexMatrix, ComplexMatrix)] {
        &self.pairs
    }

    pub fn len(&self) -> usize {
        self.pairs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.pairs.is_empty()
    }

    pub fn shape(&self) -> (usize, usize) {
        self.pairs[0].0.shape()
    }
}

/// Closed-form kernel for one pair:
/// `K = F⁻¹(hadamard_div_regularized(F(Y), F(X), λ))`.
pub fn solve_kernel(
    x: &ComplexMatrix,
    y: &ComplexMatrix,
    lambda: impl Into<Lambda>,
    pool: &WorkerPool,
) -> Result<DistilledModel> {
    x.check_same_shape(y)?;
    let spectra = parallel_batch_dft(&[x.clone(), y.clone()], Normalization::Unnormalized, pool);
    let (fx, fy) = (&spectra[0], &spectra[1]);
    let cross = fy.zip_with(fx, |a, b| a * b.conj())?;
    let power: Vec<f64> = fx.as_slice().iter().map(|z| z.norm_sqr()).collect();
    finish(cross, &power, lambda.into(), pool)
}

/// Per-bin regularized least squares over every pair. Spectra of all inputs
/// are computed in one batch; cross spectra and powers are reduced in pair
/// order.
pub fn solve_kernel_batch(
    ts: &TrainingSet,
    lambda: impl Into<Lambda>,
    pool: &WorkerPool,
) -> Result<DistilledModel> {
    let inputs: Vec<ComplexMatrix> = ts
        .pairs
        .iter()
        .flat_map(|(x, y)| [x.clone(), y.clone()])
        .collect();
    let spectra = parallel_batch_dft(&inputs, Normalization::Unnormalized, pool);

    let crosses: Vec<ComplexMatrix> = spectra
        .chunks(2)
        .map(|s| s[1].zip_with(&s[0], |a, b| a * b.conj()))
        .collect::<Result<_>>()?;
    let cross = reduce_sum(&crosses)?;

    let mut power: Vec<f64> = spectra[0].as_slice().iter().map(|z| z.norm_sqr()).collect();
    for s in spectra.chunks(2).skip(1) {
        for (acc, z) in power.iter_mut().zip(s[0].as_slice()) {
            *acc += z.norm_sqr();
        }
    }
    finish(cross, &power, lambda.into(), pool)
}

fn finish(
    cross: ComplexMatrix,
    power: &[f64],
    lambda: Lambda,
    pool: &WorkerPool,
) -> Result<DistilledModel> {
    let lambda = lambda.resolve(power)?;
    let spectrum = divide_by_power(cross, power, lambda)?;
    let kernel = parallel_idft_2d(&spectrum, Normalization::Unnormalized, pool);
    Ok(DistilledModel {
        kernel,
        spectrum,
        lambda,
    })
}

/// `x ⊛ K`, evaluated through the kernel's stored spectrum.
pub fn forward(
    model: &DistilledModel,
    x: &ComplexMatrix,
    pool: &WorkerPool,
) -> Result<ComplexMatrix> {
    model.kernel.check_same_shape(x)?;
    let spectrum = parallel_dft_2d(x, Normalization::Unnormalized, pool);
    let product = hadamard(&spectrum, &model.spectrum)?;
    Ok(parallel_idft_2d(
        &product,
        Normalization::Unnormalized,
        pool,
    ))
}

/// Relative residual `√(Σ‖forward(Xᵢ) − Yᵢ‖² / Σ‖Yᵢ‖²)`.
pub fn fit_error(model: &DistilledModel, ts: &TrainingSet, pool: &WorkerPool) -> Result<f64> {
    let mut residual = 0.0;
    let mut reference = 0.0;
    for (x, y) in &ts.pairs {
        let diff = forward(model, x, pool)?.sub(y)?;
        residual += diff.frobenius_norm().powi(2);
        reference += y.frobenius_norm().powi(2);
    }
    if reference == 0.0 {
        return Err(Error::DivisionNearZero {
            row: 0,
            col: 0,
            magnitude: 0.0,
            max: 0.0,
        });
    }
    Ok((residual / reference).sqrt())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fourier::{circular_convolve_direct, dft_2d_direct};
    use crate::numeric::{max_rel_error, Complex};
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random(rng: &mut ChaCha8Rng, rows: usize, cols: usize) -> ComplexMatrix {
        ComplexMatrix::from_fn(rows, cols, |_, _| {
            Complex::new(rng.gen_range(-1.0..1.0), 0.0)
        })
    }

    /// Real random input whose spectrum stays above 1e-3 of its peak.
    fn conditioned(rng: &mut ChaCha8Rng, rows: usize, cols: usize) -> ComplexMatrix {
        loop {
            let x = random(rng, rows, cols);
            let spectrum = dft_2d_direct(&x, Normalization::Unnormalized);
            let max = spectrum.max_abs();
            if spectrum.as_slice().iter().all(|z| z.norm() >= 1e-3 * max) {
                return x;
            }
        }
    }

    fn pools() -> Vec<WorkerPool> {
        [1, 3, 4]
            .iter()
            .map(|&p| WorkerPool::new(p).unwrap())
            .collect()
    }

    #[test]
    fn delta_input_recovers_output() {
        let mut rng = ChaCha8Rng::seed_from_u64(30);
        let y = random(&mut rng, 5, 6);
        let model = solve_kernel(
            &ComplexMatrix::delta(5, 6, 0, 0),
            &y,
            0.0,
            &WorkerPool::single(),
        )
        .unwrap();
        assert!(max_rel_error(model.kernel(), &y) <= 1e-12);
    }

    #[test]
    fn identity_map_gives_delta_kernel() {
        let mut rng = ChaCha8Rng::seed_from_u64(31);
        let x = conditioned(&mut rng, 6, 6);
        let model = solve_kernel(&x, &x, 0.0, &WorkerPool::new(2).unwrap()).unwrap();
        assert!(max_rel_error(model.kernel(), &ComplexMatrix::delta(6, 6, 0, 0)) <= 1e-10);
    }

    #[test]
    fn recovers_true_kernel() {
        let mut rng = ChaCha8Rng::seed_from_u64(32);
        let x = conditioned(&mut rng, 8, 8);
        let truth = random(&mut rng, 8, 8);
        let y = circular_convolve_direct(&x, &truth).unwrap();
        for pool in pools() {
            let model = solve_kernel(&x, &y, 0.0, &pool).unwrap();
            assert!(max_rel_error(model.kernel(), &truth) <= 1e-8);
            let ts = TrainingSet::single(x.clone(), y.clone()).unwrap();
            assert!(fit_error(&model, &ts, &pool).unwrap() <= 1e-8);
            assert!(model.real_kernel().is_ok());
        }
    }

    #[test]
    fn singular_spectrum_is_reported() {
        // a constant input has energy only in the DC bin
        let x = ComplexMatrix::from_fn(4, 4, |_, _| Complex::new(1.0, 0.0));
        let y = ComplexMatrix::delta(4, 4, 1, 2);
        let err = solve_kernel(&x, &y, 0.0, &WorkerPool::single()).unwrap_err();
        assert!(matches!(err, Error::DivisionNearZero { .. }));
        assert!(solve_kernel(&x, &y, 1e-3, &WorkerPool::single()).is_ok());
        assert!(solve_kernel(&x, &y, Lambda::Auto, &WorkerPool::single()).is_ok());
    }

    #[test]
    fn shape_errors() {
        let pool = WorkerPool::single();
        let a = ComplexMatrix::zeros(2, 2);
        let b = ComplexMatrix::zeros(2, 3);
        assert!(matches!(
            solve_kernel(&a, &b, 0.0, &pool),
            Err(Error::DimensionMismatch { .. })
        ));
        assert!(matches!(
            TrainingSet::new(vec![(a.clone(), a.clone()), (b.clone(), b.clone())]),
            Err(Error::DimensionMismatch { .. })
        ));
        assert_eq!(TrainingSet::new(vec![]), Err(Error::EmptyInput));
        let model = DistilledModel::from_kernel(a, 0.0, &pool).unwrap();
        assert!(forward(&model, &b, &pool).is_err());
        assert!(solve_kernel(&b, &b, -1.0, &pool).is_err());
    }

    #[test]
    fn auto_lambda_scales_with_input_power() {
        let mut rng = ChaCha8Rng::seed_from_u64(33);
        let x = conditioned(&mut rng, 4, 4);
        let pool = WorkerPool::single();
        let model = solve_kernel(&x, &x, Lambda::Auto, &pool).unwrap();
        let spectrum = dft_2d_direct(&x, Normalization::Unnormalized);
        let mean_power = spectrum
            .as_slice()
            .iter()
            .map(|z| z.norm_sqr())
            .sum::<f64>()
            / 16.0;
        assert!((model.lambda() - 1e-6 * mean_power).abs() <= 1e-12 * mean_power);

        let scaled = x.scale(Complex::new(10.0, 0.0));
        let model2 = solve_kernel(&scaled, &scaled, Lambda::Auto, &pool).unwrap();
        assert!((model2.lambda() / model.lambda() - 100.0).abs() < 1e-9);
        assert!(max_rel_error(model2.kernel(), model.kernel()) < 1e-12);
    }

    #[test]
    fn lambda_parsing() {
        assert_eq!("auto".parse::<Lambda>().unwrap(), Lambda::Auto);
        assert_eq!("0.5".parse::<Lambda>().unwrap(), Lambda::Value(0.5));
        assert!("-1".parse::<Lambda>().is_err());
        assert!("abc".parse::<Lambda>().is_err());
        assert_eq!(Lambda::Value(0.25).to_string(), "0.25");
    }

    #[test]
    fn batch_examples() {
        let mut rng = ChaCha8Rng::seed_from_u64(34);
        let pool = WorkerPool::new(3).unwrap();
        let x = conditioned(&mut rng, 8, 8);
        let y = random(&mut rng, 8, 8);

        let single = solve_kernel(&x, &y, 0.0, &pool).unwrap();
        let ts = TrainingSet::single(x.clone(), y.clone()).unwrap();
        assert_eq!(solve_kernel_batch(&ts, 0.0, &pool).unwrap(), single);

        let doubled =
            TrainingSet::new(vec![(x.clone(), y.clone()), (x.clone(), y.clone())]).unwrap();
        let twice = solve_kernel_batch(&doubled, 0.0, &pool).unwrap();
        assert_eq!(twice.kernel(), single.kernel());

        let truth = random(&mut rng, 8, 8);
        let pairs = (0..5)
            .map(|_| {
                let x = random(&mut rng, 8, 8);
                let y = circular_convolve_direct(&x, &truth).unwrap();
                (x, y)
            })
            .collect();
        let ts = TrainingSet::new(pairs).unwrap();
        let model = solve_kernel_batch(&ts, 0.0, &pool).unwrap();
        assert!(max_rel_error(model.kernel(), &truth) <= 1e-8);
        assert!(fit_error(&model, &ts, &pool).unwrap() <= 1e-8);
    }

    #[test]
    fn forward_examples() {
        let mut rng = ChaCha8Rng::seed_from_u64(35);
        let pool = WorkerPool::new(2).unwrap();
        let x = random(&mut rng, 5, 7);
        let identity =
            DistilledModel::from_kernel(ComplexMatrix::delta(5, 7, 0, 0), 0.0, &pool).unwrap();
        assert!(max_rel_error(&forward(&identity, &x, &pool).unwrap(), &x) <= 1e-12);
        let zero = DistilledModel::from_kernel(ComplexMatrix::zeros(5, 7), 0.0, &pool).unwrap();
        assert!(forward(&zero, &x, &pool).unwrap().is_zero());

        let k = random(&mut rng, 5, 7);
        let model = DistilledModel::from_kernel(k.clone(), 0.0, &pool).unwrap();
        let expected = circular_convolve_direct(&x, &k).unwrap();
        assert!(max_rel_error(&forward(&model, &x, &pool).unwrap(), &expected) <= 1e-10);
    }

    #[test]
    fn fit_error_edge_cases() {
        let pool = WorkerPool::single();
        let mut rng = ChaCha8Rng::seed_from_u64(36);
        let x = random(&mut rng, 3, 3);
        let y = random(&mut rng, 3, 3);
        let zero = DistilledModel::from_kernel(ComplexMatrix::zeros(3, 3), 0.0, &pool).unwrap();
        let ts = TrainingSet::single(x.clone(), y).unwrap();
        assert!((fit_error(&zero, &ts, &pool).unwrap() - 1.0).abs() < 1e-15);
        let silent = TrainingSet::single(x, ComplexMatrix::zeros(3, 3)).unwrap();
        assert!(matches!(
            fit_error(&zero, &silent, &pool),
            Err(Error::DivisionNearZero { .. })
        ));
    }

    #[test]
    fn real_projection_rejects_complex_kernels() {
        let pool = WorkerPool::single();
        let k = ComplexMatrix::new(1, 2, vec![Complex::new(1.0, 0.0), Complex::new(0.0, 1e-6)])
            .unwrap();
        let model = DistilledModel::from_kernel(k, 0.0, &pool).unwrap();
        assert!(matches!(
            model.real_kernel(),
            Err(Error::ImaginaryResidue { .. })
        ));
        let k = ComplexMatrix::new(1, 2, vec![Complex::new(1.0, 0.0), Complex::new(2.0, 1e-12)])
            .unwrap();
        let model = DistilledModel::from_kernel(k, 0.0, &pool).unwrap();
        assert_eq!(model.real_kernel().unwrap().as_slice(), &[1.0, 2.0]);
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(40))]

        #[test]
        fn recovery_and_consistency(seed in any::<u64>(), rows in 1usize..=16, cols in 1usize..=16) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let x = conditioned(&mut rng, rows, cols);
            let truth = random(&mut rng, rows, cols);
            let y = circular_convolve_direct(&x, &truth).unwrap();
            let pool = WorkerPool::new(1 + (seed % 4) as usize).unwrap();
            let model = solve_kernel(&x, &y, 0.0, &pool).unwrap();
            prop_assert!(max_rel_error(model.kernel(), &truth) <= 1e-8);
            prop_assert!(max_rel_error(&forward(&model, &x, &pool).unwrap(), &y) <= 1e-8);
        }

        #[test]
        fn regularization_shrinks_kernel(seed in any::<u64>(), l1 in 0.0..10.0f64, dl in 0.0..10.0f64) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let x = random(&mut rng, 6, 5);
            let y = random(&mut rng, 6, 5);
            let pool = WorkerPool::single();
            let lo = solve_kernel(&x, &y, l1 + 1e-9, &pool).unwrap();
            let hi = solve_kernel(&x, &y, l1 + dl + 1e-9, &pool).unwrap();
            prop_assert!(hi.kernel().frobenius_norm() <= lo.kernel().frobenius_norm() * (1.0 + 1e-12));
        }
    }
}
