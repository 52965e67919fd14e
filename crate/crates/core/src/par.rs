//! Execution policy for data-parallel loops.
//!
//! Every parallel loop in the crate goes through [`Exec`] so that the same
//! call can be run sequentially or on the rayon pool. Reductions are done
//! over fixed-size chunks and combined in chunk order, which keeps floating
//! point results bit-identical across policies and thread counts.

use std::ops::Range;

#[cfg(feature = "parallel")]
use rayon::prelude::*;

/// Chunk length for deterministic reductions.
pub const REDUCE_CHUNK: usize = 4096;

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub enum Exec {
    Sequential,
    #[default]
    Parallel,
}

impl Exec {
    /// True when work will actually be spread over threads.
    pub fn is_parallel(self) -> bool {
        cfg!(feature = "parallel") && self == Exec::Parallel
    }

    pub fn map<T, R, F>(self, items: &[T], f: F) -> Vec<R>
    where
        T: Sync,
        R: Send,
        F: Fn(&T) -> R + Sync + Send,
    {
        #[cfg(feature = "parallel")]
        if self.is_parallel() {
            return items.par_iter().map(f).collect();
        }
        items.iter().map(f).collect()
    }

    pub fn map_range<R, F>(self, n: usize, f: F) -> Vec<R>
    where
        R: Send,
        F: Fn(usize) -> R + Sync + Send,
    {
        #[cfg(feature = "parallel")]
        if self.is_parallel() {
            return (0..n).into_par_iter().map(f).collect();
        }
        (0..n).map(f).collect()
    }

    /// Applies `f` to every element of `out` together with its index.
    pub fn for_each_mut<T, F>(self, out: &mut [T], f: F)
    where
        T: Send,
        F: Fn(usize, &mut T) + Sync + Send,
    {
        #[cfg(feature = "parallel")]
        if self.is_parallel() {
            out.par_iter_mut().enumerate().for_each(|(i, v)| f(i, v));
            return;
        }
        out.iter_mut().enumerate().for_each(|(i, v)| f(i, v));
    }

    /// Evaluates `f` on consecutive chunks of `0..n` and returns the
    /// per-chunk results in order.
    pub fn map_chunks<R, F>(self, n: usize, chunk: usize, f: F) -> Vec<R>
    where
        R: Send,
        F: Fn(Range<usize>) -> R + Sync + Send,
    {
        let chunk = chunk.max(1);
        let n_chunks = n.div_ceil(chunk);
        self.map_range(n_chunks, |c| f(c * chunk..((c + 1) * chunk).min(n)))
    }

    /// Runs `f(offset, chunk)` on consecutive mutable chunks of `out` and
    /// returns the per-chunk results in order.
    pub fn map_chunks_mut<T, R, F>(self, out: &mut [T], chunk: usize, f: F) -> Vec<R>
    where
        T: Send,
        R: Send,
        F: Fn(usize, &mut [T]) -> R + Sync + Send,
    {
        let chunk = chunk.max(1);
        #[cfg(feature = "parallel")]
        if self.is_parallel() {
            return out.par_chunks_mut(chunk).enumerate().map(|(c, s)| f(c * chunk, s)).collect();
        }
        out.chunks_mut(chunk).enumerate().map(|(c, s)| f(c * chunk, s)).collect()
    }

    /// Deterministic sum of `f(i)` over `0..n`.
    pub fn sum<F>(self, n: usize, f: F) -> f64
    where
        F: Fn(usize) -> f64 + Sync + Send,
    {
        self.map_chunks(n, REDUCE_CHUNK, |r| r.map(&f).sum::<f64>()).into_iter().sum()
    }
}
