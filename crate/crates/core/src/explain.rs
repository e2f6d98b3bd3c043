//! Occlusion-based contribution factors.
//!
//! A feature is a set of input positions. Its contribution is the change in
//! the reference output when those positions are zeroed and the occluded
//! input is pushed through the distilled model:
//! `con(xᵢ) = Y − X′ ⊛ K`. When `Y = X ⊛ K` exactly this equals `Eᵢ ⊛ K`,
//! where `Eᵢ` keeps only feature `i`, so contributions over a partition sum
//! back to `Y`.

use crate::distill::{forward, DistilledModel};
use crate::error::{Error, Result};
use crate::numeric::{Complex, ComplexMatrix, RealMatrix};
use crate::parallel::WorkerPool;

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum SegmentationKind {
    /// Rectangular tiles in row-major order; edge tiles may be smaller.
    BlockGrid {
        block_rows: usize,
        block_cols: usize,
    },
    /// One feature per column.
    Columns,
    /// One feature per row.
    Rows,
    /// Caller-supplied `(row, col)` sets.
    Custom(Vec<Vec<(usize, usize)>>),
}

/// A partition of every position of an M×N input into features.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FeatureSegmentation {
    kind: SegmentationKind,
    rows: usize,
    cols: usize,
    // flat row-major indices per feature
    features: Vec<Vec<usize>>,
}

impl FeatureSegmentation {
    pub fn block_grid(
        rows: usize,
        cols: usize,
        block_rows: usize,
        block_cols: usize,
    ) -> Result<Self> {
        check_extent(rows, cols)?;
        if block_rows == 0 || block_cols == 0 {
            return Err(Error::InvalidSegmentation(format!(
                "block size must be positive, got {block_rows}x{block_cols}"
            )));
        }
        let mut features = Vec::new();
        for r0 in (0..rows).step_by(block_rows) {
            for c0 in (0..cols).step_by(block_cols) {
                features.push(
                    (r0..(r0 + block_rows).min(rows))
                        .flat_map(|r| (c0..(c0 + block_cols).min(cols)).map(move |c| r * cols + c))
                        .collect(),
                );
            }
        }
        Ok(Self {
            kind: SegmentationKind::BlockGrid {
                block_rows,
                block_cols,
            },
            rows,
            cols,
            features,
        })
    }

    pub fn columns(rows: usize, cols: usize) -> Result<Self> {
        check_extent(rows, cols)?;
        let features = (0..cols)
            .map(|c| (0..rows).map(|r| r * cols + c).collect())
            .collect();
        Ok(Self {
            kind: SegmentationKind::Columns,
            rows,
            cols,
            features,
        })
    }

    pub fn rows(rows: usize, cols: usize) -> Result<Self> {
        check_extent(rows, cols)?;
        let features = (0..rows)
            .map(|r| (r * cols..(r + 1) * cols).collect())
            .collect();
        Ok(Self {
            kind: SegmentationKind::Rows,
            rows,
            cols,
            features,
        })
    }

    /// Checks that `sets` are nonempty, in bounds, pairwise disjoint and
    /// jointly cover the whole extent.
    pub fn custom(rows: usize, cols: usize, sets: Vec<Vec<(usize, usize)>>) -> Result<Self> {
        check_extent(rows, cols)?;
        let mut owner = vec![None; rows * cols];
        let mut features = Vec::with_capacity(sets.len());
        for (id, set) in sets.iter().enumerate() {
            if set.is_empty() {
                return Err(Error::InvalidSegmentation(format!("feature {id} is empty")));
            }
            let mut flat = Vec::with_capacity(set.len());
            for &(r, c) in set {
                if r >= rows || c >= cols {
                    return Err(Error::InvalidSegmentation(format!(
                        "feature {id} position ({r}, {c}) outside {rows}x{cols}"
                    )));
                }
                let i = r * cols + c;
                if let Some(other) = owner[i].replace(id) {
                    return Err(Error::InvalidSegmentation(format!(
                        "position ({r}, {c}) in features {other} and {id}"
                    )));
                }
                flat.push(i);
            }
            features.push(flat);
        }
        if let Some(i) = owner.iter().position(Option::is_none) {
            return Err(Error::InvalidSegmentation(format!(
                "position ({}, {}) belongs to no feature",
                i / cols,
                i % cols
            )));
        }
        Ok(Self {
            kind: SegmentationKind::Custom(sets),
            rows,
            cols,
            features,
        })
    }

    pub fn kind(&self) -> &SegmentationKind {
        &self.kind
    }

    pub fn extent(&self) -> (usize, usize) {
        (self.rows, self.cols)
    }

    pub fn len(&self) -> usize {
        self.features.len()
    }

    pub fn is_empty(&self) -> bool {
        self.features.is_empty()
    }

    /// Row-major flat indices of feature `id`.
    pub fn positions(&self, id: usize) -> Result<&[usize]> {
        self.features
            .get(id)
            .map(Vec::as_slice)
            .ok_or(Error::UnknownFeature {
                id,
                count: self.features.len(),
            })
    }

    /// Layout of features for heatmaps; `None` for custom segmentations.
    pub fn grid_shape(&self) -> Option<(usize, usize)> {
        match self.kind {
            SegmentationKind::BlockGrid {
                block_rows,
                block_cols,
            } => Some((
                self.rows.div_ceil(block_rows),
                self.cols.div_ceil(block_cols),
            )),
            SegmentationKind::Columns => Some((1, self.cols)),
            SegmentationKind::Rows => Some((self.rows, 1)),
            SegmentationKind::Custom(_) => None,
        }
    }

    fn check_matches(&self, x: &ComplexMatrix) -> Result<()> {
        if x.shape() != self.extent() {
            return Err(Error::SegmentationMismatch {
                seg: self.extent(),
                matrix: x.shape(),
            });
        }
        Ok(())
    }
}

fn check_extent(rows: usize, cols: usize) -> Result<()> {
    if rows == 0 || cols == 0 {
        return Err(Error::InvalidSegmentation(format!(
            "empty extent {rows}x{cols}"
        )));
    }
    Ok(())
}

/// The input with one feature zeroed.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureMask {
    pub feature_id: usize,
    pub occluded: ComplexMatrix,
}

pub fn mask_feature(
    x: &ComplexMatrix,
    seg: &FeatureSegmentation,
    feature_id: usize,
) -> Result<FeatureMask> {
    seg.check_matches(x)?;
    let mut occluded = x.clone();
    let data = occluded.as_mut_slice();
    for &i in seg.positions(feature_id)? {
        data[i] = Complex::new(0.0, 0.0);
    }
    Ok(FeatureMask {
        feature_id,
        occluded,
    })
}

/// The input restricted to one feature (every other position zeroed).
pub fn isolate_feature(
    x: &ComplexMatrix,
    seg: &FeatureSegmentation,
    feature_id: usize,
) -> Result<ComplexMatrix> {
    seg.check_matches(x)?;
    let mut kept = ComplexMatrix::zeros(x.rows(), x.cols());
    let data = kept.as_mut_slice();
    for &i in seg.positions(feature_id)? {
        data[i] = x.as_slice()[i];
    }
    Ok(kept)
}

/// `y − forward(model, X′)` for the occlusion `X′` of `feature_id`.
pub fn contribution(
    x: &ComplexMatrix,
    y: &ComplexMatrix,
    model: &DistilledModel,
    seg: &FeatureSegmentation,
    feature_id: usize,
    pool: &WorkerPool,
) -> Result<ComplexMatrix> {
    x.check_same_shape(y)?;
    let mask = mask_feature(x, seg, feature_id)?;
    y.sub(&forward(model, &mask.occluded, pool)?)
}

#[derive(Debug, Clone, PartialEq)]
pub struct FeatureContribution {
    pub feature_id: usize,
    pub contribution: ComplexMatrix,
    /// Frobenius norm of `contribution`.
    pub weight: f64,
}

/// Contributions of every feature of a segmentation, in feature order.
#[derive(Debug, Clone, PartialEq)]
pub struct ContributionMap {
    segmentation: FeatureSegmentation,
    entries: Vec<FeatureContribution>,
}

impl ContributionMap {
    pub fn segmentation(&self) -> &FeatureSegmentation {
        &self.segmentation
    }

    pub fn entries(&self) -> &[FeatureContribution] {
        &self.entries
    }

    pub fn shape(&self) -> (usize, usize) {
        self.segmentation.extent()
    }

    pub fn weights(&self) -> Vec<f64> {
        self.entries.iter().map(|e| e.weight).collect()
    }

    /// Elementwise sum of all contribution matrices, in feature order.
    pub fn total(&self) -> ComplexMatrix {
        let (rows, cols) = self.shape();
        let mut acc = ComplexMatrix::zeros(rows, cols);
        for e in &self.entries {
            for (a, b) in acc.as_mut_slice().iter_mut().zip(e.contribution.as_slice()) {
                *a += b;
            }
        }
        acc
    }
}

/// Contribution of every feature. Features are spread over the pool; each
/// feature's own transforms run on a single worker.
pub fn contribution_map(
    x: &ComplexMatrix,
    y: &ComplexMatrix,
    model: &DistilledModel,
    seg: &FeatureSegmentation,
    pool: &WorkerPool,
) -> Result<ContributionMap> {
    seg.check_matches(x)?;
    x.check_same_shape(y)?;
    model.kernel().check_same_shape(x)?;
    let single = WorkerPool::single();
    let entries = pool
        .map(seg.len(), |id| {
            contribution(x, y, model, seg, id, &single).map(|contribution| FeatureContribution {
                feature_id: id,
                weight: contribution.frobenius_norm(),
                contribution,
            })
        })
        .into_iter()
        .collect::<Result<Vec<_>>>()?;
    Ok(ContributionMap {
        segmentation: seg.clone(),
        entries,
    })
}

/// `(feature_id, weight)` by descending weight, ties by ascending id.
pub fn rank_features(cm: &ContributionMap) -> Vec<(usize, f64)> {
    let mut ranked: Vec<(usize, f64)> = cm
        .entries
        .iter()
        .map(|e| (e.feature_id, e.weight))
        .collect();
    ranked.sort_by(|a, b| b.1.total_cmp(&a.1).then(a.0.cmp(&b.0)));
    ranked
}

/// Weights laid out on the segmentation grid and divided by the largest
/// weight. An all-zero map stays zero.
pub fn heatmap(cm: &ContributionMap) -> Result<RealMatrix> {
    let (rows, cols) = cm
        .segmentation
        .grid_shape()
        .ok_or(Error::UnsupportedSegmentation)?;
    let weights = cm.weights();
    let max = weights.iter().copied().fold(0.0, f64::max);
    let scaled = weights
        .into_iter()
        .map(|w| if max > 0.0 { w / max } else { 0.0 })
        .collect();
    RealMatrix::new(rows, cols, scaled)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fourier::circular_convolve_direct;
    use crate::numeric::max_rel_error;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random(rng: &mut ChaCha8Rng, rows: usize, cols: usize) -> ComplexMatrix {
        ComplexMatrix::from_fn(rows, cols, |_, _| {
            Complex::new(rng.gen_range(-1.0..1.0), 0.0)
        })
    }

    fn exact_setup(
        seed: u64,
        rows: usize,
        cols: usize,
    ) -> (ComplexMatrix, ComplexMatrix, DistilledModel) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let x = random(&mut rng, rows, cols);
        let k = random(&mut rng, rows, cols);
        let y = circular_convolve_direct(&x, &k).unwrap();
        let model = DistilledModel::from_kernel(k, 0.0, &WorkerPool::single()).unwrap();
        (x, y, model)
    }

    fn map_with(weights: &[f64], seg: FeatureSegmentation) -> ContributionMap {
        let (rows, cols) = seg.extent();
        ContributionMap {
            segmentation: seg,
            entries: weights
                .iter()
                .enumerate()
                .map(|(id, &weight)| FeatureContribution {
                    feature_id: id,
                    contribution: ComplexMatrix::zeros(rows, cols),
                    weight,
                })
                .collect(),
        }
    }

    #[test]
    fn segmentations_partition_the_extent() {
        let segs = [
            FeatureSegmentation::block_grid(5, 7, 2, 3).unwrap(),
            FeatureSegmentation::columns(5, 7).unwrap(),
            FeatureSegmentation::rows(5, 7).unwrap(),
        ];
        for seg in &segs {
            let mut seen = [0; 35];
            for id in 0..seg.len() {
                for &i in seg.positions(id).unwrap() {
                    seen[i] += 1;
                }
            }
            assert!(seen.iter().all(|&s| s == 1));
        }
        assert_eq!(segs[0].len(), 9);
        assert_eq!(segs[0].grid_shape(), Some((3, 3)));
        // ragged corner tile
        assert_eq!(segs[0].positions(8).unwrap(), &[4 * 7 + 6]);
        assert_eq!(segs[1].grid_shape(), Some((1, 7)));
        assert_eq!(segs[2].grid_shape(), Some((5, 1)));
    }

    #[test]
    fn custom_segmentation_validation() {
        let ok =
            FeatureSegmentation::custom(2, 2, vec![vec![(0, 0), (1, 1)], vec![(0, 1), (1, 0)]])
                .unwrap();
        assert_eq!(ok.len(), 2);
        assert_eq!(ok.grid_shape(), None);
        let overlap = FeatureSegmentation::custom(1, 2, vec![vec![(0, 0), (0, 1)], vec![(0, 1)]]);
        assert!(matches!(overlap, Err(Error::InvalidSegmentation(_))));
        let gap = FeatureSegmentation::custom(1, 2, vec![vec![(0, 0)]]);
        assert!(matches!(gap, Err(Error::InvalidSegmentation(_))));
        let outside = FeatureSegmentation::custom(1, 2, vec![vec![(0, 0), (0, 1), (1, 0)]]);
        assert!(matches!(outside, Err(Error::InvalidSegmentation(_))));
        assert!(FeatureSegmentation::custom(1, 1, vec![vec![(0, 0)], vec![]]).is_err());
        assert!(FeatureSegmentation::block_grid(2, 2, 0, 1).is_err());
    }

    #[test]
    fn mask_examples() {
        let x = ComplexMatrix::from_real_rows(&[[1.0, 2.0], [3.0, 4.0]]).unwrap();
        let all = FeatureSegmentation::block_grid(2, 2, 2, 2).unwrap();
        assert!(mask_feature(&x, &all, 0).unwrap().occluded.is_zero());

        let cols = FeatureSegmentation::columns(2, 2).unwrap();
        let masked = mask_feature(&x, &cols, 0).unwrap();
        assert_eq!(
            masked.occluded,
            ComplexMatrix::from_real_rows(&[[0.0, 2.0], [0.0, 4.0]]).unwrap()
        );

        let cells = FeatureSegmentation::block_grid(2, 2, 1, 1).unwrap();
        let masked = mask_feature(&x, &cells, 3).unwrap();
        assert_eq!(
            masked.occluded,
            ComplexMatrix::from_real_rows(&[[1.0, 2.0], [3.0, 0.0]]).unwrap()
        );

        assert_eq!(
            mask_feature(&x, &cols, 2),
            Err(Error::UnknownFeature { id: 2, count: 2 })
        );
        let wrong = FeatureSegmentation::columns(3, 2).unwrap();
        assert!(matches!(
            mask_feature(&x, &wrong, 0),
            Err(Error::SegmentationMismatch { .. })
        ));
    }

    #[test]
    fn contribution_examples() {
        let pool = WorkerPool::new(2).unwrap();
        let (mut x, _, model) = exact_setup(40, 4, 5);
        // column 2 carries no signal
        for r in 0..4 {
            x[(r, 2)] = Complex::new(0.0, 0.0);
        }
        let y = circular_convolve_direct(&x, model.kernel()).unwrap();
        let cols = FeatureSegmentation::columns(4, 5).unwrap();
        let silent = contribution(&x, &y, &model, &cols, 2, &pool).unwrap();
        assert!(silent.max_abs() <= 1e-10 * y.max_abs());

        let whole = FeatureSegmentation::block_grid(4, 5, 4, 5).unwrap();
        let full = contribution(&x, &y, &model, &whole, 0, &pool).unwrap();
        assert!(max_rel_error(&full, &y) <= 1e-12);

        let (x, y, model) = exact_setup(41, 6, 6);
        let cols = FeatureSegmentation::columns(6, 6).unwrap();
        for id in 0..6 {
            let got = contribution(&x, &y, &model, &cols, id, &pool).unwrap();
            let isolated = isolate_feature(&x, &cols, id).unwrap();
            let expected = circular_convolve_direct(&isolated, model.kernel()).unwrap();
            assert!(max_rel_error(&got, &expected) <= 1e-9);
        }
    }

    #[test]
    fn map_examples() {
        let pool = WorkerPool::new(3).unwrap();
        let (x, y, model) = exact_setup(42, 5, 6);
        let cols = FeatureSegmentation::columns(5, 6).unwrap();
        let cm = contribution_map(&x, &y, &model, &cols, &pool).unwrap();
        assert_eq!(cm.entries().len(), 6);
        assert!(max_rel_error(&cm.total(), &y) <= 1e-9);
        for e in cm.entries() {
            assert_eq!(e.weight, e.contribution.frobenius_norm());
        }
        assert_eq!(
            cm,
            contribution_map(&x, &y, &model, &cols, &WorkerPool::single()).unwrap()
        );

        let zero = ComplexMatrix::zeros(5, 6);
        let cm = contribution_map(&zero, &zero, &model, &cols, &pool).unwrap();
        assert!(cm.weights().iter().all(|&w| w == 0.0));

        let one = FeatureSegmentation::block_grid(5, 6, 5, 6).unwrap();
        let cm = contribution_map(&x, &y, &model, &one, &pool).unwrap();
        assert_eq!(cm.entries().len(), 1);
        assert_eq!(
            cm.entries()[0].contribution,
            contribution(&x, &y, &model, &one, 0, &pool).unwrap()
        );

        let bad = FeatureSegmentation::columns(5, 5).unwrap();
        assert!(contribution_map(&x, &y, &model, &bad, &pool).is_err());
    }

    #[test]
    fn ranking() {
        let seg = FeatureSegmentation::columns(1, 3).unwrap();
        let ids = |cm: &ContributionMap| {
            rank_features(cm)
                .into_iter()
                .map(|(id, _)| id)
                .collect::<Vec<_>>()
        };
        assert_eq!(ids(&map_with(&[3.0, 1.0, 2.0], seg.clone())), [0, 2, 1]);
        assert_eq!(ids(&map_with(&[1.0, 1.0, 1.0], seg)), [0, 1, 2]);
        let one = FeatureSegmentation::columns(2, 1).unwrap();
        assert_eq!(rank_features(&map_with(&[0.5], one)), [(0, 0.5)]);
    }

    #[test]
    fn heatmap_examples() {
        let two = FeatureSegmentation::columns(3, 2).unwrap();
        assert_eq!(
            heatmap(&map_with(&[4.0, 2.0], two.clone()))
                .unwrap()
                .as_slice(),
            &[1.0, 0.5]
        );
        assert_eq!(
            heatmap(&map_with(&[0.0, 0.0], two)).unwrap().as_slice(),
            &[0.0, 0.0]
        );
        let one = FeatureSegmentation::rows(1, 4).unwrap();
        assert_eq!(heatmap(&map_with(&[2.5], one)).unwrap().as_slice(), &[1.0]);

        let grid = FeatureSegmentation::block_grid(3, 4, 2, 2).unwrap();
        let hm = heatmap(&map_with(&[1.0, 2.0, 4.0, 0.0], grid)).unwrap();
        assert_eq!((hm.rows(), hm.cols()), (2, 2));
        assert_eq!(hm.row(1), &[1.0, 0.0]);

        let rows = FeatureSegmentation::rows(2, 3).unwrap();
        let hm = heatmap(&map_with(&[1.0, 3.0], rows)).unwrap();
        assert_eq!((hm.rows(), hm.cols()), (2, 1));

        let custom = FeatureSegmentation::custom(1, 1, vec![vec![(0, 0)]]).unwrap();
        assert_eq!(
            heatmap(&map_with(&[1.0], custom)),
            Err(Error::UnsupportedSegmentation)
        );
    }
}
