//! Reproducible chunked Gaussian sampling with ordered reduction.
//!
//! Chunk `c` of a run draws from its own ChaCha stream `(seed, c)`, so any
//! chunk can be regenerated in isolation. Per-chunk accumulators are merged
//! in ascending chunk order, which makes the result independent of how many
//! workers processed the chunks.

use rand::SeedableRng;
use rand_chacha::ChaCha12Rng;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;

use crate::error::{Error, Result};

pub const DEFAULT_CHUNK: usize = 16_384;
const AUX_STREAM: u64 = 1 << 63;

/// Neumaier-compensated running sum.
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct CompensatedSum {
    sum: f64,
    comp: f64,
}

impl CompensatedSum {
    pub fn add(&mut self, x: f64) {
        let t = self.sum + x;
        if self.sum.abs() >= x.abs() {
            self.comp += (self.sum - t) + x;
        } else {
            self.comp += (x - t) + self.sum;
        }
        self.sum = t;
    }

    pub fn merge(&mut self, other: &CompensatedSum) {
        self.add(other.sum);
        self.add(other.comp);
    }

    pub fn value(&self) -> f64 {
        self.sum + self.comp
    }
}

/// First and second empirical moments of a vector statistic.
///
/// Cross moments are kept only inside blocks: `blocks × block` statistics,
/// with the covariance of two entries available when they share a block.
#[derive(Clone, Debug)]
pub struct Moments {
    block: usize,
    count: u64,
    rejected: u64,
    sums: Vec<CompensatedSum>,
    cross: Vec<CompensatedSum>,
}

impl Moments {
    /// Full covariance between `k` statistics.
    pub fn full(k: usize) -> Self {
        Self::blocks(1, k)
    }

    /// Variances only.
    pub fn diagonal(k: usize) -> Self {
        Self::blocks(k, 1)
    }

    pub fn blocks(blocks: usize, block: usize) -> Self {
        let tri = block * (block + 1) / 2;
        Moments {
            block,
            count: 0,
            rejected: 0,
            sums: vec![CompensatedSum::default(); blocks * block],
            cross: vec![CompensatedSum::default(); blocks * tri],
        }
    }

    pub fn len(&self) -> usize {
        self.sums.len()
    }

    pub fn is_empty(&self) -> bool {
        self.sums.is_empty()
    }

    pub fn push(&mut self, x: &[f64]) {
        debug_assert_eq!(x.len(), self.sums.len());
        self.count += 1;
        let b = self.block;
        let tri = b * (b + 1) / 2;
        for (blk, xs) in x.chunks(b).enumerate() {
            let base = blk * tri;
            let mut t = 0;
            for i in 0..b {
                self.sums[blk * b + i].add(xs[i]);
                for j in i..b {
                    self.cross[base + t].add(xs[i] * xs[j]);
                    t += 1;
                }
            }
        }
    }

    pub fn reject(&mut self) {
        self.rejected += 1;
    }

    pub fn merge(&mut self, other: &Moments) {
        self.count += other.count;
        self.rejected += other.rejected;
        for (a, b) in self.sums.iter_mut().zip(&other.sums) {
            a.merge(b);
        }
        for (a, b) in self.cross.iter_mut().zip(&other.cross) {
            a.merge(b);
        }
    }

    pub fn count(&self) -> u64 {
        self.count
    }

    pub fn rejected(&self) -> u64 {
        self.rejected
    }

    pub fn mean(&self, i: usize) -> f64 {
        self.sums[i].value() / self.count as f64
    }

    pub fn means(&self) -> Vec<f64> {
        (0..self.len()).map(|i| self.mean(i)).collect()
    }

    /// Sample covariance of statistics `i` and `j` (same block).
    pub fn cov(&self, i: usize, j: usize) -> f64 {
        let b = self.block;
        assert_eq!(i / b, j / b, "covariance requested across blocks");
        let (lo, hi) = if i % b <= j % b { (i % b, j % b) } else { (j % b, i % b) };
        let tri = b * (b + 1) / 2;
        let t = lo * b - lo * (lo + 1) / 2 + hi;
        let n = self.count as f64;
        if self.count < 2 {
            return 0.0;
        }
        let s = self.cross[(i / b) * tri + t].value();
        let c = (s - n * self.mean(i) * self.mean(j)) / (n - 1.0);
        if i == j {
            c.max(0.0)
        } else {
            c
        }
    }

    pub fn var(&self, i: usize) -> f64 {
        self.cov(i, i)
    }

    /// Standard error of the mean of statistic `i`.
    pub fn stderr(&self, i: usize) -> f64 {
        (self.var(i) / self.count as f64).sqrt()
    }
}

/// The ChaCha stream for one chunk.
pub fn chunk_rng(seed: u64, chunk: u64) -> ChaCha12Rng {
    let mut rng = ChaCha12Rng::seed_from_u64(seed);
    rng.set_stream(chunk);
    rng
}

/// Sampling plan: `n` draws of standard Gaussian vectors of dimension `dim`.
#[derive(Clone, Copy, Debug)]
pub struct Sampler {
    pub n: usize,
    pub dim: usize,
    pub seed: u64,
    pub chunk: usize,
    /// 0 means the global rayon pool.
    pub workers: usize,
    /// Extra draws per sample from an independent auxiliary stream, so the
    /// main draws do not depend on whether auxiliary noise is requested.
    pub aux: usize,
}

impl Sampler {
    pub fn new(n: usize, dim: usize, seed: u64) -> Self {
        Sampler { n, dim, seed, chunk: DEFAULT_CHUNK, workers: 1, aux: 0 }
    }

    pub fn with_chunk(mut self, chunk: usize) -> Self {
        self.chunk = chunk.max(1);
        self
    }

    pub fn with_workers(mut self, workers: usize) -> Self {
        self.workers = workers;
        self
    }

    pub fn with_aux(mut self, aux: usize) -> Self {
        self.aux = aux;
        self
    }

    fn chunks(&self) -> usize {
        self.n.div_ceil(self.chunk)
    }

    fn run_chunk<A, M, F>(&self, c: usize, make: &M, body: &F) -> A
    where
        M: Fn() -> A,
        F: Fn(&[f64], &[f64], &mut A),
    {
        let mut acc = make();
        let mut rng = chunk_rng(self.seed, c as u64);
        let mut aux_rng = chunk_rng(self.seed, AUX_STREAM | c as u64);
        let mut w = vec![0.0; self.dim];
        let mut aux = vec![0.0; self.aux];
        let len = self.chunk.min(self.n - c * self.chunk);
        for _ in 0..len {
            for x in w.iter_mut() {
                *x = StandardNormal.sample(&mut rng);
            }
            for x in aux.iter_mut() {
                *x = StandardNormal.sample(&mut aux_rng);
            }
            body(&w, &aux, &mut acc);
        }
        acc
    }

    /// Runs `body` on every draw and returns the per-chunk accumulators in
    /// chunk order.
    pub fn map_chunks<A, M, F>(&self, make: M, body: F) -> Result<Vec<A>>
    where
        A: Send,
        M: Fn() -> A + Sync,
        F: Fn(&[f64], &mut A) + Sync,
    {
        self.map_chunks_aux(make, |w, _, acc| body(w, acc))
    }

    /// As [`Sampler::map_chunks`], also passing the auxiliary draws.
    pub fn map_chunks_aux<A, M, F>(&self, make: M, body: F) -> Result<Vec<A>>
    where
        A: Send,
        M: Fn() -> A + Sync,
        F: Fn(&[f64], &[f64], &mut A) + Sync,
    {
        if self.n == 0 {
            return Err(Error::NoSamples("sample count must be at least 1"));
        }
        let chunks = self.chunks();
        if self.workers == 1 || chunks == 1 {
            return Ok((0..chunks).map(|c| self.run_chunk(c, &make, &body)).collect());
        }
        let job = || {
            (0..chunks)
                .into_par_iter()
                .map(|c| self.run_chunk(c, &make, &body))
                .collect::<Vec<A>>()
        };
        if self.workers == 0 {
            return Ok(job());
        }
        let pool = rayon::ThreadPoolBuilder::new()
            .num_threads(self.workers)
            .build()
            .map_err(|e| Error::Range { name: "workers", reason: e.to_string() })?;
        Ok(pool.install(job))
    }

    /// Moment accumulation over all draws with ordered chunk reduction.
    pub fn moments<M, F>(&self, make: M, body: F) -> Result<Moments>
    where
        M: Fn() -> Moments + Sync,
        F: Fn(&[f64], &mut Moments) + Sync,
    {
        let parts = self.map_chunks(&make, body)?;
        let mut total = make();
        for p in &parts {
            total.merge(p);
        }
        Ok(total)
    }
}
