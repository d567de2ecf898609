//! Thin switch between rayon and plain iteration.
//!
//! Every helper returns results in index order, and sums are formed from
//! fixed-size chunks combined left to right, so the output never depends on
//! how many worker threads ran.

/// Chunk length used by the deterministic reductions.
pub const SUM_CHUNK: usize = 4096;

/// `f(0), f(1), ..., f(n-1)` collected in order.
pub fn map_range<T, F>(n: usize, f: F) -> Vec<T>
where
    T: Send,
    F: Fn(usize) -> T + Sync + Send,
{
    #[cfg(feature = "parallel")]
    {
        use rayon::prelude::*;
        (0..n).into_par_iter().map(f).collect()
    }
    #[cfg(not(feature = "parallel"))]
    {
        (0..n).map(f).collect()
    }
}

/// Applies `f` to consecutive mutable chunks of `data`, passing the chunk index.
pub fn for_each_chunk_mut<T, F>(data: &mut [T], chunk: usize, f: F)
where
    T: Send,
    F: Fn(usize, &mut [T]) + Sync + Send,
{
    let chunk = chunk.max(1);
    #[cfg(feature = "parallel")]
    {
        use rayon::prelude::*;
        data.par_chunks_mut(chunk)
            .enumerate()
            .for_each(|(i, c)| f(i, c));
    }
    #[cfg(not(feature = "parallel"))]
    {
        data.chunks_mut(chunk).enumerate().for_each(|(i, c)| f(i, c));
    }
}

/// Sum of `f(i)` for `i < n`, reproducible across thread counts.
pub fn sum_range<F>(n: usize, f: F) -> f64
where
    F: Fn(usize) -> f64 + Sync + Send,
{
    let chunks = n.div_ceil(SUM_CHUNK);
    let partial = map_range(chunks, |c| {
        let lo = c * SUM_CHUNK;
        let hi = (lo + SUM_CHUNK).min(n);
        let mut acc = 0.0;
        for i in lo..hi {
            acc += f(i);
        }
        acc
    });
    partial.iter().sum()
}

/// Number of worker threads the current pool would use.
pub fn current_threads() -> usize {
    #[cfg(feature = "parallel")]
    {
        rayon::current_num_threads()
    }
    #[cfg(not(feature = "parallel"))]
    {
        1
    }
}
