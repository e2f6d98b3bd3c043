//! Implementations behind each subcommand.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use convdistill::{
    contribution_map, fit_error, heatmap, max_rel_error, parallel_dft_2d, parallel_idft_2d,
    rank_features, solve_kernel_batch, DistilledModel, FeatureSegmentation, Lambda, Normalization,
    TrainingSet, WorkerPool,
};

use crate::error::{CliError, CliResult};
use crate::formats::{encode_cdm, format_csv, format_pgm, read_matrix, write_file};

/// Tolerance at which a contribution map is reported as reconstructing `Y`.
pub const COMPLETENESS_TOLERANCE: f64 = 1e-9;

pub fn pool(cores: usize) -> CliResult<WorkerPool> {
    WorkerPool::new(cores).map_err(|_| CliError::Usage("--cores must be at least 1".into()))
}

pub fn parse_norm(s: &str) -> Result<Normalization, String> {
    match s {
        "unnorm" | "unnormalized" => Ok(Normalization::Unnormalized),
        "unitary" => Ok(Normalization::Unitary),
        _ => Err(format!(
            "unknown normalization {s:?} (expected unitary or unnorm)"
        )),
    }
}

/// Segmentation as given on the command line, before the input shape is known.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SegSpec {
    Block(usize, usize),
    Cols,
    Rows,
}

impl FromStr for SegSpec {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        match s {
            "cols" => Ok(SegSpec::Cols),
            "rows" => Ok(SegSpec::Rows),
            _ => {
                let dims = s.strip_prefix("block:").ok_or_else(|| {
                    format!("unknown segmentation {s:?} (expected block:R,C, cols or rows)")
                })?;
                let (r, c) = dims
                    .split_once(',')
                    .ok_or_else(|| format!("block segmentation needs R,C, got {dims:?}"))?;
                let parse = |v: &str| {
                    v.trim()
                        .parse::<usize>()
                        .ok()
                        .filter(|&n| n > 0)
                        .ok_or_else(|| format!("invalid block size {v:?}"))
                };
                Ok(SegSpec::Block(parse(r)?, parse(c)?))
            }
        }
    }
}

impl SegSpec {
    pub fn build(self, rows: usize, cols: usize) -> convdistill::Result<FeatureSegmentation> {
        match self {
            SegSpec::Block(br, bc) => FeatureSegmentation::block_grid(rows, cols, br, bc),
            SegSpec::Cols => FeatureSegmentation::columns(rows, cols),
            SegSpec::Rows => FeatureSegmentation::rows(rows, cols),
        }
    }
}

pub fn fft(
    input: &Path,
    output: &Path,
    norm: Normalization,
    cores: usize,
    inverse: bool,
) -> CliResult<()> {
    let pool = pool(cores)?;
    let x = read_matrix(input)?;
    let result = if inverse {
        parallel_idft_2d(&x, norm, &pool)
    } else {
        parallel_dft_2d(&x, norm, &pool)
    };
    write_file(output, encode_cdm(&result))
}

/// Path of the text file written next to a model.
pub fn sidecar_path(model: &Path) -> PathBuf {
    let mut name = model.as_os_str().to_owned();
    name.push(".txt");
    PathBuf::from(name)
}

#[derive(Debug, Clone, PartialEq)]
pub struct DistillSummary {
    pub lambda: f64,
    pub rows: usize,
    pub cols: usize,
    pub pairs: usize,
    /// `None` when every reference output is zero.
    pub fit_error: Option<f64>,
}

impl DistillSummary {
    pub fn to_text(&self) -> String {
        let fit = self
            .fit_error
            .map_or_else(|| "undefined".to_string(), |e| e.to_string());
        format!(
            "lambda={}\nrows={}\ncols={}\npairs={}\nfit_error={fit}\n",
            self.lambda, self.rows, self.cols, self.pairs
        )
    }
}

pub fn distill(
    xs: &[PathBuf],
    ys: &[PathBuf],
    lambda: Lambda,
    cores: usize,
    out: &Path,
) -> CliResult<DistillSummary> {
    if xs.is_empty() || xs.len() != ys.len() {
        return Err(CliError::Usage(format!(
            "need matching nonempty --x and --y lists, got {} and {}",
            xs.len(),
            ys.len()
        )));
    }
    let pool = pool(cores)?;
    let pairs = xs
        .iter()
        .zip(ys)
        .map(|(x, y)| Ok((read_matrix(x)?, read_matrix(y)?)))
        .collect::<CliResult<Vec<_>>>()?;
    let ts = TrainingSet::new(pairs)?;
    let model = solve_kernel_batch(&ts, lambda, &pool)?;
    let fit = match fit_error(&model, &ts, &pool) {
        Ok(e) => Some(e),
        Err(convdistill::Error::DivisionNearZero { .. }) => None,
        Err(e) => return Err(e.into()),
    };
    let (rows, cols) = model.shape();
    let summary = DistillSummary {
        lambda: model.lambda(),
        rows,
        cols,
        pairs: ts.len(),
        fit_error: fit,
    };
    write_file(out, encode_cdm(model.kernel()))?;
    write_file(&sidecar_path(out), summary.to_text())?;
    Ok(summary)
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExplainSummary {
    pub features: usize,
    /// `max|Σ con − Y| / max|Y|`.
    pub completeness_residual: f64,
    pub weights_path: PathBuf,
    pub heatmap_path: PathBuf,
}

impl ExplainSummary {
    pub fn complete(&self) -> bool {
        self.completeness_residual <= COMPLETENESS_TOLERANCE
    }
}

fn with_suffix(prefix: &Path, suffix: &str) -> PathBuf {
    let mut name = prefix.as_os_str().to_owned();
    name.push(suffix);
    PathBuf::from(name)
}

pub fn explain(
    x: &Path,
    y: &Path,
    model: &Path,
    seg: SegSpec,
    cores: usize,
    out_prefix: &Path,
) -> CliResult<ExplainSummary> {
    let pool = pool(cores)?;
    let x = read_matrix(x)?;
    let y = read_matrix(y)?;
    let kernel = read_matrix(model)?;
    let model = DistilledModel::from_kernel(kernel, 0.0, &pool)?;
    let seg = seg.build(x.rows(), x.cols())?;
    let cm = contribution_map(&x, &y, &model, &seg, &pool)?;

    let mut rank = vec![0; cm.entries().len()];
    for (position, (id, _)) in rank_features(&cm).into_iter().enumerate() {
        rank[id] = position + 1;
    }
    let mut csv = String::from("feature_id,weight,rank\n");
    for e in cm.entries() {
        writeln!(csv, "{},{},{}", e.feature_id, e.weight, rank[e.feature_id]).unwrap();
    }

    let weights_path = with_suffix(out_prefix, ".weights.csv");
    let heatmap_path = with_suffix(out_prefix, ".heatmap.pgm");
    write_file(&weights_path, csv)?;
    write_file(&heatmap_path, format_pgm(&heatmap(&cm)?))?;

    Ok(ExplainSummary {
        features: cm.entries().len(),
        completeness_residual: max_rel_error(&cm.total(), &y),
        weights_path,
        heatmap_path,
    })
}

/// Rewrites a matrix file as CSV or CDM.
pub fn convert(input: &Path, output: &Path, to_csv: bool) -> CliResult<()> {
    let m = read_matrix(input)?;
    if to_csv {
        write_file(output, format_csv(&m)?)
    } else {
        write_file(output, encode_cdm(&m))
    }
}
