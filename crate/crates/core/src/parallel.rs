//! Worker-pool execution of the row-column transform.
//!
//! A 2-D transform runs in two phases separated by a barrier. The first
//! phase hands each worker a contiguous run of columns to multiply by `W_M`;
//! the second hands each worker a contiguous run of rows of the merged
//! intermediate to multiply by `W_N`. No worker needs data held by another
//! within a phase. A [`DistributionTable`] records which shard of which
//! source went to which worker, and results are reassembled by walking the
//! table in order, never in completion order.
//!
//! Every 1-D transform is evaluated by the same kernel with the same
//! summation order whatever shard it lands in, so the output is bit-identical
//! for every worker count.

use std::collections::HashMap;
use std::ops::Range;
use std::thread;

use crate::error::{Error, Result};
use crate::fourier::{self, Direction, Normalization};
use crate::numeric::{Complex, ComplexMatrix};

/// A fixed number of logical workers. Threads are spawned per phase, one per
/// worker that has a nonempty share, so a pool may hold more workers than
/// the host has hardware threads.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct WorkerPool {
    workers: usize,
}

impl WorkerPool {
    pub fn new(workers: usize) -> Result<Self> {
        if workers == 0 {
            return Err(Error::InvalidParameter(
                "worker pool needs at least one worker".into(),
            ));
        }
        Ok(Self { workers })
    }

    pub fn single() -> Self {
        Self { workers: 1 }
    }

    /// One worker per hardware thread reported by the OS.
    pub fn available() -> Self {
        Self {
            workers: thread::available_parallelism().map_or(1, |n| n.get()),
        }
    }

    pub fn workers(&self) -> usize {
        self.workers
    }

    /// Runs `task` on every shard of `table`, each on the worker the table
    /// names. Results come back in table order.
    ///
    /// # Panics
    /// If a shard names a worker outside the pool, or a task panics.
    pub fn execute<T, F>(&self, table: &DistributionTable, task: F) -> Vec<T>
    where
        T: Send,
        F: Fn(&Shard) -> T + Sync,
    {
        let mut queues: Vec<Vec<usize>> = vec![Vec::new(); self.workers];
        for (i, shard) in table.shards.iter().enumerate() {
            assert!(
                shard.worker < self.workers,
                "shard assigned to worker {} but pool has {}",
                shard.worker,
                self.workers
            );
            queues[shard.worker].push(i);
        }
        queues.retain(|q| !q.is_empty());

        let run = |queue: &[usize]| -> Vec<(usize, T)> {
            queue.iter().map(|&i| (i, task(&table.shards[i]))).collect()
        };

        let mut slots: Vec<Option<T>> = table.shards.iter().map(|_| None).collect();
        let finished: Vec<Vec<(usize, T)>> = match queues.split_first() {
            None => Vec::new(),
            Some((local, [])) => vec![run(local)],
            Some((local, remote)) => thread::scope(|scope| {
                let handles: Vec<_> = remote
                    .iter()
                    .map(|queue| scope.spawn(|| run(queue)))
                    .collect();
                let mut done = vec![run(local)];
                for handle in handles {
                    match handle.join() {
                        Ok(results) => done.push(results),
                        Err(panic) => std::panic::resume_unwind(panic),
                    }
                }
                done
            }),
        };
        for (i, value) in finished.into_iter().flatten() {
            slots[i] = Some(value);
        }
        slots
            .into_iter()
            .map(|v| v.expect("every shard produces a result"))
            .collect()
    }

    /// Evaluates `f(0..n)` with the indices split into contiguous runs, one
    /// run per worker. Output is in index order.
    pub fn map<T, F>(&self, n: usize, f: F) -> Vec<T>
    where
        T: Send,
        F: Fn(usize) -> T + Sync,
    {
        if n == 0 {
            return Vec::new();
        }
        let table =
            plan_split(n, self.workers, Axis::Rows, 0).expect("positive extent and pool size");
        self.execute(&table, |shard| shard.range().map(&f).collect::<Vec<T>>())
            .into_iter()
            .flatten()
            .collect()
    }
}

impl Default for WorkerPool {
    fn default() -> Self {
        Self::single()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Axis {
    Rows,
    Columns,
}

/// A contiguous run of rows or columns of one source matrix, bound to a worker.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Shard {
    pub source_id: usize,
    pub axis: Axis,
    pub start: usize,
    pub count: usize,
    pub worker: usize,
}

impl Shard {
    pub fn range(&self) -> Range<usize> {
        self.start..self.start + self.count
    }
}

/// Ordered record of shard placement; reassembly follows this order.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct DistributionTable {
    shards: Vec<Shard>,
}

impl DistributionTable {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn shards(&self) -> &[Shard] {
        &self.shards
    }

    pub fn len(&self) -> usize {
        self.shards.len()
    }

    pub fn is_empty(&self) -> bool {
        self.shards.is_empty()
    }

    pub fn append(&mut self, other: DistributionTable) {
        self.shards.extend(other.shards);
    }

    /// Whether the shards of `(source_id, axis)` are pairwise disjoint and
    /// together cover `0..extent` exactly.
    pub fn covers(&self, source_id: usize, axis: Axis, extent: usize) -> bool {
        let mut hits = vec![0u32; extent];
        for shard in self
            .shards
            .iter()
            .filter(|s| s.source_id == source_id && s.axis == axis)
        {
            if shard.start + shard.count > extent {
                return false;
            }
            for i in shard.range() {
                hits[i] += 1;
            }
        }
        hits.iter().all(|&h| h == 1)
    }

    /// Largest number of items assigned to a single worker.
    pub fn max_load(&self) -> usize {
        let mut load: HashMap<usize, usize> = HashMap::new();
        for shard in &self.shards {
            *load.entry(shard.worker).or_default() += shard.count;
        }
        load.into_values().max().unwrap_or(0)
    }
}

/// Splits `0..extent` into `p` contiguous shards, shard `i` on worker `i`.
/// The first `extent mod p` shards get `⌈extent/p⌉` items and the rest
/// `⌊extent/p⌋`; when `p > extent` the trailing shards are empty.
pub fn plan_split(
    extent: usize,
    p: usize,
    axis: Axis,
    source_id: usize,
) -> Result<DistributionTable> {
    if extent == 0 || p == 0 {
        return Err(Error::InvalidParameter(format!(
            "cannot split extent {extent} across {p} workers"
        )));
    }
    let (base, extra) = (extent / p, extent % p);
    let mut start = 0;
    let shards = (0..p)
        .map(|worker| {
            let count = base + usize::from(worker < extra);
            let shard = Shard {
                source_id,
                axis,
                start,
                count,
                worker,
            };
            start += count;
            shard
        })
        .collect();
    Ok(DistributionTable { shards })
}

/// Applies one transform stage to every input. `Axis::Columns` multiplies by
/// the row-count Fourier matrix on the left; `Axis::Rows` multiplies by the
/// column-count Fourier matrix on the right.
fn stage(
    inputs: &[ComplexMatrix],
    axis: Axis,
    norm: Normalization,
    dir: Direction,
    pool: &WorkerPool,
) -> Vec<ComplexMatrix> {
    let order_of = |m: &ComplexMatrix| match axis {
        Axis::Columns => m.rows(),
        Axis::Rows => m.cols(),
    };
    let extent_of = |m: &ComplexMatrix| match axis {
        Axis::Columns => m.cols(),
        Axis::Rows => m.rows(),
    };

    let mut matrices: HashMap<usize, ComplexMatrix> = HashMap::new();
    let mut table = DistributionTable::new();
    for (id, x) in inputs.iter().enumerate() {
        matrices
            .entry(order_of(x))
            .or_insert_with(|| fourier::stage_matrix(order_of(x), norm, dir));
        table.append(plan_split(extent_of(x), pool.workers(), axis, id).expect("nonempty matrix"));
    }

    let pieces = pool.execute(&table, |shard| {
        let x = &inputs[shard.source_id];
        let w = &matrices[&order_of(x)];
        let mut buf = vec![Complex::new(0.0, 0.0); shard.count * order_of(x)];
        match axis {
            Axis::Columns => fourier::transform_column_range(w, x, shard.range(), &mut buf),
            Axis::Rows => fourier::transform_row_range(x, w, shard.range(), &mut buf),
        }
        buf
    });

    let mut outputs: Vec<ComplexMatrix> = inputs
        .iter()
        .map(|x| ComplexMatrix::zeros(x.rows(), x.cols()))
        .collect();
    for (shard, piece) in table.shards().iter().zip(pieces) {
        if shard.count == 0 {
            continue;
        }
        let out = &mut outputs[shard.source_id];
        let cols = out.cols();
        let data = out.as_mut_slice();
        match axis {
            Axis::Columns => {
                for (r, chunk) in piece.chunks(shard.count).enumerate() {
                    let at = r * cols + shard.start;
                    data[at..at + shard.count].copy_from_slice(chunk);
                }
            }
            Axis::Rows => {
                let at = shard.start * cols;
                data[at..at + piece.len()].copy_from_slice(&piece);
            }
        }
    }
    outputs
}

fn transform_batch(
    inputs: &[ComplexMatrix],
    norm: Normalization,
    dir: Direction,
    pool: &WorkerPool,
) -> Vec<ComplexMatrix> {
    if inputs.is_empty() {
        return Vec::new();
    }
    let intermediate = stage(inputs, Axis::Columns, norm, dir, pool);
    stage(&intermediate, Axis::Rows, norm, dir, pool)
}

/// Row-column 2-D transform on `pool`; equal bit-for-bit to
/// [`fourier::dft_2d_two_stage`].
pub fn parallel_dft_2d(x: &ComplexMatrix, norm: Normalization, pool: &WorkerPool) -> ComplexMatrix {
    transform_batch(std::slice::from_ref(x), norm, Direction::Forward, pool)
        .pop()
        .expect("one output per input")
}

/// Inverse counterpart of [`parallel_dft_2d`]; equal bit-for-bit to
/// [`fourier::idft_2d`].
pub fn parallel_idft_2d(
    spectrum: &ComplexMatrix,
    norm: Normalization,
    pool: &WorkerPool,
) -> ComplexMatrix {
    transform_batch(
        std::slice::from_ref(spectrum),
        norm,
        Direction::Inverse,
        pool,
    )
    .pop()
    .expect("one output per input")
}

/// Transforms several matrices at once. Shards of every input share one
/// distribution table per phase, so worker `i` processes shard `i` of each
/// input.
pub fn parallel_batch_dft(
    inputs: &[ComplexMatrix],
    norm: Normalization,
    pool: &WorkerPool,
) -> Vec<ComplexMatrix> {
    transform_batch(inputs, norm, Direction::Forward, pool)
}

pub fn parallel_batch_idft(
    inputs: &[ComplexMatrix],
    norm: Normalization,
    pool: &WorkerPool,
) -> Vec<ComplexMatrix> {
    transform_batch(inputs, norm, Direction::Inverse, pool)
}

/// Elementwise sum of partial results, accumulated in sequence order.
pub fn reduce_sum(partials: &[ComplexMatrix]) -> Result<ComplexMatrix> {
    let (first, rest) = partials.split_first().ok_or(Error::EmptyInput)?;
    let mut acc = first.clone();
    for partial in rest {
        acc.check_same_shape(partial)?;
        for (a, b) in acc.as_mut_slice().iter_mut().zip(partial.as_slice()) {
            *a += b;
        }
    }
    Ok(acc)
}
