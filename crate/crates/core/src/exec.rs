//! Execution backends with a fixed chunk decomposition.
//!
//! Floating-point addition is not associative, so a reduction over particles
//! would normally depend on how work is split across threads. Every
//! reduction in this crate therefore maps fixed-size chunks to partial
//! results and folds the partials in chunk order. The sequential and rayon
//! backends produce bit-identical output, and the chunked fold is also more
//! accurate than a naive running sum.

#[cfg(feature = "parallel")]
use rayon::prelude::*;

/// Particles per chunk. Fixed so the reduction tree never depends on the
/// backend or the thread count.
pub const CHUNK: usize = 1024;

/// Where chunked work runs.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Backend {
    Sequential,
    #[cfg(feature = "parallel")]
    Rayon,
}

impl Default for Backend {
    #[cfg(feature = "parallel")]
    fn default() -> Self {
        Backend::Rayon
    }

    #[cfg(not(feature = "parallel"))]
    fn default() -> Self {
        Backend::Sequential
    }
}

/// Maps chunks of `rows_per_chunk * stride` elements to partial results,
/// returned in chunk order. `f` receives the chunk index and the chunk
/// slice; chunk `c` starts at row `c * rows_per_chunk`.
pub fn map_chunks<R, F>(backend: Backend, data: &[f64], stride: usize, f: F) -> Vec<R>
where
    R: Send,
    F: Fn(usize, &[f64]) -> R + Sync,
{
    let elems = CHUNK * stride.max(1);
    match backend {
        Backend::Sequential => data.chunks(elems).enumerate().map(|(c, s)| f(c, s)).collect(),
        #[cfg(feature = "parallel")]
        Backend::Rayon => data.par_chunks(elems).enumerate().map(|(c, s)| f(c, s)).collect(),
    }
}

/// Applies `f` to disjoint mutable chunks of `rows_per_chunk * stride`
/// elements. Chunks are independent, so the backends differ only in
/// scheduling and the final data is identical.
pub fn for_each_chunk_mut<F>(backend: Backend, data: &mut [f64], stride: usize, f: F)
where
    F: Fn(usize, &mut [f64]) + Sync,
{
    let elems = CHUNK * stride.max(1);
    match backend {
        Backend::Sequential => {
            for (c, s) in data.chunks_mut(elems).enumerate() {
                f(c, s);
            }
        }
        #[cfg(feature = "parallel")]
        Backend::Rayon => {
            data.par_chunks_mut(elems).enumerate().for_each(|(c, s)| f(c, s));
        }
    }
}

/// Folds per-chunk partial sums of width `n` into one vector, in chunk order.
pub fn fold_partials(n: usize, partials: Vec<Vec<f64>>) -> Vec<f64> {
    let mut total = vec![0.0; n];
    for part in partials {
        debug_assert_eq!(part.len(), n);
        for (t, p) in total.iter_mut().zip(&part) {
            *t += p;
        }
    }
    total
}

/// Compensated (Neumaier) summation. Used where a sum feeds a tight
/// validation gate, so that the gate measures the data and not the
/// accumulation order.
pub fn neumaier_sum(xs: &[f64]) -> f64 {
    let mut sum = 0.0;
    let mut comp = 0.0;
    for &x in xs {
        let t = sum + x;
        if sum.abs() >= x.abs() {
            comp += (sum - t) + x;
        } else {
            comp += (x - t) + sum;
        }
        sum = t;
    }
    sum + comp
}
