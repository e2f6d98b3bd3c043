//! Scalability benchmark: definitional 2-D DFT against the serial and
//! pooled row-column transforms on square random matrices.

use std::fmt;
use std::time::{Duration, Instant};

use convdistill::{
    dft_2d_direct, dft_2d_two_stage, max_rel_error, parallel_dft_2d, Complex, ComplexMatrix,
    Normalization,
};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::commands::pool;
use crate::error::{CliError, CliResult};

/// Largest size at which the O(M²N²) definitional transform is run.
pub const DIRECT_CUTOFF: usize = 256;

const MIN_SAMPLE_TIME: Duration = Duration::from_millis(100);
const MAX_REPEATS: usize = 20;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Method {
    Direct,
    TwoStageSerial,
    Parallel(usize),
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Method::Direct => f.write_str("direct"),
            Method::TwoStageSerial => f.write_str("two-stage-serial"),
            Method::Parallel(p) => write!(f, "parallel-p{p}"),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct BenchRow {
    pub size: usize,
    pub method: Method,
    pub workers: usize,
    pub wall_ms: f64,
    /// Against the direct transform; `None` above [`DIRECT_CUTOFF`].
    pub max_rel_error: Option<f64>,
}

/// Best-of wall time: repeats quick runs until about 100 ms have been spent.
fn measure<T>(mut f: impl FnMut() -> T) -> (f64, T) {
    let started = Instant::now();
    let t0 = Instant::now();
    let mut out = f();
    let mut best = t0.elapsed();
    let mut runs = 1;
    while started.elapsed() < MIN_SAMPLE_TIME && runs < MAX_REPEATS {
        let t = Instant::now();
        out = f();
        best = best.min(t.elapsed());
        runs += 1;
    }
    (best.as_secs_f64() * 1e3, out)
}

pub fn bench_input(size: usize) -> ComplexMatrix {
    let mut rng = ChaCha8Rng::seed_from_u64(size as u64);
    ComplexMatrix::from_fn(size, size, |_, _| {
        Complex::new(rng.gen_range(-1.0..1.0), 0.0)
    })
}

pub fn run(sizes: &[usize], cores: &[usize]) -> CliResult<Vec<BenchRow>> {
    if let Some(&s) = sizes.iter().find(|&&s| s < 2) {
        return Err(CliError::Usage(format!(
            "benchmark sizes must be at least 2, got {s}"
        )));
    }
    let pools = cores
        .iter()
        .map(|&p| pool(p))
        .collect::<CliResult<Vec<_>>>()?;
    let norm = Normalization::Unnormalized;
    let mut rows = Vec::new();

    for &size in sizes {
        let x = bench_input(size);
        let reference = (size <= DIRECT_CUTOFF).then(|| {
            let (ms, direct) = measure(|| dft_2d_direct(&x, norm));
            rows.push(BenchRow {
                size,
                method: Method::Direct,
                workers: 1,
                wall_ms: ms,
                max_rel_error: Some(0.0),
            });
            direct
        });
        let error = |m: &ComplexMatrix| reference.as_ref().map(|r| max_rel_error(m, r));

        let (ms, serial) = measure(|| dft_2d_two_stage(&x, norm));
        rows.push(BenchRow {
            size,
            method: Method::TwoStageSerial,
            workers: 1,
            wall_ms: ms,
            max_rel_error: error(&serial),
        });
        for pool in &pools {
            let (ms, out) = measure(|| parallel_dft_2d(&x, norm, pool));
            rows.push(BenchRow {
                size,
                method: Method::Parallel(pool.workers()),
                workers: pool.workers(),
                wall_ms: ms,
                max_rel_error: error(&out),
            });
        }
    }
    Ok(rows)
}

pub fn format_report(rows: &[BenchRow]) -> String {
    let mut out = String::from("size,method,workers,wall_ms,max_rel_error\n");
    for r in rows {
        let err = r
            .max_rel_error
            .map_or_else(|| "n/a".to_string(), |e| format!("{e:e}"));
        out.push_str(&format!(
            "{},{},{},{:.3},{}\n",
            r.size, r.method, r.workers, r.wall_ms, err
        ));
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn small_report_shape() {
        let rows = run(&[8], &[1, 2]).unwrap();
        let methods: Vec<String> = rows.iter().map(|r| r.method.to_string()).collect();
        assert_eq!(
            methods,
            ["direct", "two-stage-serial", "parallel-p1", "parallel-p2"]
        );
        assert!(rows.iter().all(|r| r.max_rel_error.unwrap() <= 1e-9));
        let report = format_report(&rows);
        assert!(report.starts_with("size,method,workers,wall_ms,max_rel_error\n8,direct,1,"));
        assert_eq!(report.lines().count(), 5);
    }

    #[test]
    fn rejects_tiny_sizes() {
        assert_eq!(run(&[1], &[1]).unwrap_err().exit_code(), 2);
        assert_eq!(run(&[4], &[0]).unwrap_err().exit_code(), 2);
    }

    #[test]
    fn skipped_direct_is_marked() {
        let row = BenchRow {
            size: 512,
            method: Method::Parallel(8),
            workers: 8,
            wall_ms: 1.5,
            max_rel_error: None,
        };
        assert_eq!(
            format_report(&[row]).lines().nth(1),
            Some("512,parallel-p8,8,1.500,n/a")
        );
    }
}
