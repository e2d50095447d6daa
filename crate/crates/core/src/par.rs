//! Order-preserving data-parallel helpers.
//!
//! With the `parallel` feature these dispatch to rayon; without it they are
//! plain iterator loops. Results are always collected in input order and every
//! reduction in the crate folds fixed-size chunks sequentially, so output is
//! bit-identical across thread counts and across both builds.

/// Chunk length used for deterministic partial reductions.
pub const REDUCE_CHUNK: usize = 1024;

#[cfg(feature = "parallel")]
mod imp {
    use rayon::prelude::*;

    pub fn map_indexed<U, F>(len: usize, f: F) -> Vec<U>
    where
        U: Send,
        F: Fn(usize) -> U + Sync + Send,
    {
        (0..len).into_par_iter().map(f).collect()
    }

    pub fn map_slice<T, U, F>(items: &[T], f: F) -> Vec<U>
    where
        T: Sync,
        U: Send,
        F: Fn(&T) -> U + Sync + Send,
    {
        items.par_iter().map(f).collect()
    }

    pub fn map_chunks<T, U, F>(items: &[T], chunk: usize, f: F) -> Vec<U>
    where
        T: Sync,
        U: Send,
        F: Fn(usize, &[T]) -> U + Sync + Send,
    {
        items
            .par_chunks(chunk)
            .enumerate()
            .map(|(i, c)| f(i * chunk, c))
            .collect()
    }
}

#[cfg(not(feature = "parallel"))]
mod imp {
    pub fn map_indexed<U, F>(len: usize, f: F) -> Vec<U>
    where
        F: Fn(usize) -> U,
    {
        (0..len).map(f).collect()
    }

    pub fn map_slice<T, U, F>(items: &[T], f: F) -> Vec<U>
    where
        F: Fn(&T) -> U,
    {
        items.iter().map(f).collect()
    }

    pub fn map_chunks<T, U, F>(items: &[T], chunk: usize, f: F) -> Vec<U>
    where
        F: Fn(usize, &[T]) -> U,
    {
        items
            .chunks(chunk)
            .enumerate()
            .map(|(i, c)| f(i * chunk, c))
            .collect()
    }
}

pub use imp::{map_chunks, map_indexed, map_slice};

/// True when the crate was built with the rayon backend.
pub const fn is_parallel() -> bool {
    cfg!(feature = "parallel")
}
