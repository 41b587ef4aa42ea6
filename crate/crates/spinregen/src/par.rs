//! Deterministic parallel reductions.
//!
//! Sums are formed per fixed-size chunk and then combined in chunk order, so
//! the result is bitwise identical for any thread count.

use rayon::prelude::*;

pub(crate) const CHUNK: usize = 4096;

pub(crate) fn par_sum<T, F, const K: usize>(items: &[T], f: F) -> [f64; K]
where
    T: Sync,
    F: Fn(usize, &T) -> [f64; K] + Sync,
{
    let partial: Vec<[f64; K]> = items
        .par_chunks(CHUNK)
        .enumerate()
        .map(|(c, chunk)| {
            let mut acc = [0.0; K];
            for (i, item) in chunk.iter().enumerate() {
                let v = f(c * CHUNK + i, item);
                for k in 0..K {
                    acc[k] += v[k];
                }
            }
            acc
        })
        .collect();
    let mut total = [0.0; K];
    for p in partial {
        for k in 0..K {
            total[k] += p[k];
        }
    }
    total
}
