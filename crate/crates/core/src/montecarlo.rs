//! Chunked Monte Carlo with deterministic per-chunk random streams.
//!
//! Chunk `c` always draws from `RngStream::new(seed, stream).derive(c)` and
//! chunk results are reduced in index order, so the parallel and sequential
//! paths produce bit-identical output.

use nalgebra::DVector;

use crate::error::{shape_err, Error, Result};
use crate::numerics::RngStream;

pub const DEFAULT_CHUNK_SIZE: usize = 2000;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Execution {
    Sequential,
    /// Uses rayon when the `parallel` feature is enabled, sequential otherwise.
    #[default]
    Parallel,
}

/// Running sums of per-coordinate estimates over one chunk.
#[derive(Debug, Clone, PartialEq)]
pub struct Moments {
    pub n: usize,
    pub sum: DVector<f64>,
    pub sum_sq: DVector<f64>,
}

impl Moments {
    pub fn new(p: usize) -> Self {
        Self { n: 0, sum: DVector::zeros(p), sum_sq: DVector::zeros(p) }
    }

    pub fn push(&mut self, x: &DVector<f64>) -> Result<()> {
        if x.len() != self.sum.len() {
            return Err(shape_err(format!("estimate of length {}, expected {}", x.len(), self.sum.len())));
        }
        if let Some(i) = x.iter().position(|v| !v.is_finite()) {
            return Err(Error::NonFinite(format!("estimate entry {i}")));
        }
        self.n += 1;
        self.sum += x;
        self.sum_sq += x.component_mul(x);
        Ok(())
    }

    pub fn merge(&mut self, other: &Moments) {
        self.n += other.n;
        self.sum += &other.sum;
        self.sum_sq += &other.sum_sq;
    }

    pub fn mean(&self) -> DVector<f64> {
        &self.sum / self.n as f64
    }

    /// `(1/N) sum x^2 - mean^2`; the uncentered second moment when `N = 1`.
    pub fn variance(&self) -> DVector<f64> {
        let n = self.n as f64;
        if self.n == 1 {
            return self.sum_sq.clone();
        }
        DVector::from_fn(self.sum.len(), |i, _| (self.sum_sq[i] / n - (self.sum[i] / n).powi(2)).max(0.0))
    }

    pub fn std_error(&self) -> DVector<f64> {
        let n = self.n as f64;
        self.variance().map(|v| (v / n).sqrt())
    }
}

/// Per-chunk moments in chunk order.
#[derive(Debug, Clone, PartialEq)]
pub struct ChunkedMoments {
    pub chunks: Vec<Moments>,
}

impl ChunkedMoments {
    pub fn total(&self) -> Moments {
        let p = self.chunks.first().map_or(0, |c| c.sum.len());
        let mut acc = Moments::new(p);
        for c in &self.chunks {
            acc.merge(c);
        }
        acc
    }
}

fn chunk_sizes(n_samples: usize, chunk_size: usize) -> Vec<usize> {
    let full = n_samples / chunk_size;
    let mut sizes = vec![chunk_size; full];
    if !n_samples.is_multiple_of(chunk_size) {
        sizes.push(n_samples % chunk_size);
    }
    sizes
}

/// Draw `n_samples` estimates of length `p` and accumulate per-chunk moments.
pub fn run_chunked<F>(
    n_samples: usize,
    p: usize,
    seed: u64,
    stream: u64,
    chunk_size: usize,
    exec: Execution,
    estimator: F,
) -> Result<ChunkedMoments>
where
    F: Fn(&mut RngStream) -> Result<DVector<f64>> + Sync + Send,
{
    if n_samples == 0 {
        return Err(Error::EmptyBatch);
    }
    if chunk_size == 0 {
        return Err(Error::InvalidParameter("chunk size must be >= 1".into()));
    }
    let base = RngStream::new(seed, stream);
    let sizes = chunk_sizes(n_samples, chunk_size);
    let run = |(c, size): (usize, &usize)| -> Result<Moments> {
        let mut rng = base.derive(c as u64);
        let mut m = Moments::new(p);
        for _ in 0..*size {
            m.push(&estimator(&mut rng)?)?;
        }
        Ok(m)
    };
    let chunks: Result<Vec<Moments>> = match exec {
        Execution::Sequential => sizes.iter().enumerate().map(run).collect(),
        Execution::Parallel => parallel_map(&sizes, run),
    };
    Ok(ChunkedMoments { chunks: chunks? })
}

#[cfg(feature = "parallel")]
fn parallel_map<F>(sizes: &[usize], run: F) -> Result<Vec<Moments>>
where
    F: Fn((usize, &usize)) -> Result<Moments> + Sync + Send,
{
    use rayon::prelude::*;
    sizes.par_iter().enumerate().map(run).collect()
}

#[cfg(not(feature = "parallel"))]
fn parallel_map<F>(sizes: &[usize], run: F) -> Result<Vec<Moments>>
where
    F: Fn((usize, &usize)) -> Result<Moments> + Sync + Send,
{
    sizes.iter().enumerate().map(run).collect()
}
