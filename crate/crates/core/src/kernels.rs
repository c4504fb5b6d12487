//! Deterministic data-parallel kernels.
//!
//! Every reduction here is computed over fixed-size chunks: per-chunk
//! partials are produced (in parallel with the `parallel` feature, in order
//! without it) and then folded pairwise in a fixed sequential order. The
//! chunk layout does not depend on the thread count, so a given input
//! produces bit-identical results in both modes and across runs.

use std::ops::Range;

use num_complex::Complex64;

#[cfg(feature = "parallel")]
use rayon::prelude::*;

/// Fixed reduction chunk length.
pub const CHUNK: usize = 4096;

fn n_chunks(len: usize, chunk: usize) -> usize {
    len.div_ceil(chunk.max(1))
}

fn chunk_range(c: usize, len: usize, chunk: usize) -> Range<usize> {
    let lo = c * chunk;
    lo..((lo + chunk).min(len))
}

/// Map fixed chunks `[c*chunk, (c+1)*chunk)` of `0..len` to partials, in order.
pub fn chunked_partials<T, F>(len: usize, chunk: usize, f: F) -> Vec<T>
where
    T: Send,
    F: Fn(Range<usize>) -> T + Sync,
{
    let n = n_chunks(len, chunk);
    #[cfg(feature = "parallel")]
    {
        (0..n)
            .into_par_iter()
            .map(|c| f(chunk_range(c, len, chunk)))
            .collect()
    }
    #[cfg(not(feature = "parallel"))]
    {
        (0..n).map(|c| f(chunk_range(c, len, chunk))).collect()
    }
}

/// Sequential pairwise fold; deterministic and more accurate than a left fold.
pub fn pairwise_fold<T, F>(items: &mut Vec<T>, combine: F) -> T
where
    T: Copy + Default,
    F: Fn(T, T) -> T,
{
    if items.is_empty() {
        return T::default();
    }
    while items.len() > 1 {
        let mut next = Vec::with_capacity(items.len().div_ceil(2));
        for pair in items.chunks(2) {
            next.push(if pair.len() == 2 {
                combine(pair[0], pair[1])
            } else {
                pair[0]
            });
        }
        *items = next;
    }
    items[0]
}

/// Deterministic sum of an `f64` slice.
pub fn sum_f64(xs: &[f64]) -> f64 {
    let mut parts = chunked_partials(xs.len(), CHUNK, |r| xs[r].iter().sum::<f64>());
    pairwise_fold(&mut parts, |a, b| a + b)
}

/// Deterministic dot product of two real slices.
pub fn dot_f64(a: &[f64], b: &[f64]) -> f64 {
    debug_assert_eq!(a.len(), b.len());
    let mut parts = chunked_partials(a.len(), CHUNK, |r| {
        a[r.clone()]
            .iter()
            .zip(&b[r])
            .map(|(x, y)| x * y)
            .sum::<f64>()
    });
    pairwise_fold(&mut parts, |a, b| a + b)
}

/// Deterministic inner product ⟨a|b⟩ = Σ conj(a_i)·b_i.
pub fn dot_conj(a: &[Complex64], b: &[Complex64]) -> Complex64 {
    debug_assert_eq!(a.len(), b.len());
    let mut parts = chunked_partials(a.len(), CHUNK, |r| {
        a[r.clone()]
            .iter()
            .zip(&b[r])
            .map(|(x, y)| x.conj() * y)
            .sum::<Complex64>()
    });
    pairwise_fold(&mut parts, |a, b| a + b)
}

/// Deterministic squared norm of a complex slice.
pub fn norm_sq(xs: &[Complex64]) -> f64 {
    let mut parts = chunked_partials(xs.len(), CHUNK, |r| {
        xs[r].iter().map(|x| x.norm_sqr()).sum::<f64>()
    });
    pairwise_fold(&mut parts, |a, b| a + b)
}

/// Deterministic squared norm of a real slice.
pub fn norm_sq_f64(xs: &[f64]) -> f64 {
    dot_f64(xs, xs)
}

/// Apply `f(index, &mut x)` elementwise, chunked.
pub fn map_inplace<T, F>(xs: &mut [T], f: F)
where
    T: Send,
    F: Fn(usize, &mut T) + Sync,
{
    #[cfg(feature = "parallel")]
    {
        xs.par_chunks_mut(CHUNK).enumerate().for_each(|(c, chunk)| {
            let base = c * CHUNK;
            for (i, x) in chunk.iter_mut().enumerate() {
                f(base + i, x);
            }
        });
    }
    #[cfg(not(feature = "parallel"))]
    {
        for (i, x) in xs.iter_mut().enumerate() {
            f(i, x);
        }
    }
}

/// Process contiguous chunks of `chunk` elements; `f` receives the chunk's
/// base index and the chunk slice.
pub fn for_each_chunk_mut<T, F>(xs: &mut [T], chunk: usize, f: F)
where
    T: Send,
    F: Fn(usize, &mut [T]) + Sync,
{
    #[cfg(feature = "parallel")]
    {
        xs.par_chunks_mut(chunk)
            .enumerate()
            .for_each(|(c, s)| f(c * chunk, s));
    }
    #[cfg(not(feature = "parallel"))]
    {
        for (c, s) in xs.chunks_mut(chunk).enumerate() {
            f(c * chunk, s);
        }
    }
}

/// y += α·x over real slices.
pub fn axpy_f64(alpha: f64, x: &[f64], y: &mut [f64]) {
    debug_assert_eq!(x.len(), y.len());
    map_inplace(y, |i, yi| *yi += alpha * x[i]);
}

/// y += α·x over complex slices.
pub fn axpy_c64(alpha: Complex64, x: &[Complex64], y: &mut [Complex64]) {
    debug_assert_eq!(x.len(), y.len());
    map_inplace(y, |i, yi| *yi += alpha * x[i]);
}

/// Scale a complex slice in place.
pub fn scale_c64(alpha: Complex64, xs: &mut [Complex64]) {
    map_inplace(xs, |_, x| *x *= alpha);
}

// Explicit sequential twins, kept callable with the `parallel` feature on so
// benches can compare both paths in one build.

/// Sequential twin of [`sum_f64`]; same chunk/fold structure.
pub fn sum_f64_seq(xs: &[f64]) -> f64 {
    let n = n_chunks(xs.len(), CHUNK);
    let mut parts: Vec<f64> = (0..n)
        .map(|c| xs[chunk_range(c, xs.len(), CHUNK)].iter().sum())
        .collect();
    pairwise_fold(&mut parts, |a, b| a + b)
}

/// Sequential twin of [`norm_sq`].
pub fn norm_sq_seq(xs: &[Complex64]) -> f64 {
    let n = n_chunks(xs.len(), CHUNK);
    let mut parts: Vec<f64> = (0..n)
        .map(|c| {
            xs[chunk_range(c, xs.len(), CHUNK)]
                .iter()
                .map(|x| x.norm_sqr())
                .sum()
        })
        .collect();
    pairwise_fold(&mut parts, |a, b| a + b)
}

/// Sequential twin of [`map_inplace`].
pub fn map_inplace_seq<T, F>(xs: &mut [T], f: F)
where
    F: Fn(usize, &mut T),
{
    for (i, x) in xs.iter_mut().enumerate() {
        f(i, x);
    }
}
