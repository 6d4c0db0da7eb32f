//! Index-parallel map with a sequential fallback.
//!
//! With the `parallel` feature (default) work is spread over the current
//! rayon pool; without it everything runs on the calling thread. Output order
//! is always the index order, so reductions over the returned vector are
//! reproducible regardless of the worker count.

/// Maps `f` over `0..n`, in parallel when the `parallel` feature is enabled.
#[cfg(feature = "parallel")]
pub fn map_indexed<T, F>(n: usize, f: F) -> Vec<T>
where
    T: Send,
    F: Fn(usize) -> T + Sync + Send,
{
    use rayon::prelude::*;
    (0..n).into_par_iter().map(f).collect()
}

#[cfg(not(feature = "parallel"))]
pub fn map_indexed<T, F>(n: usize, f: F) -> Vec<T>
where
    T: Send,
    F: Fn(usize) -> T + Sync + Send,
{
    map_indexed_sequential(n, f)
}

/// Always-sequential variant, used as the baseline in benchmarks.
pub fn map_indexed_sequential<T, F>(n: usize, f: F) -> Vec<T>
where
    F: Fn(usize) -> T,
{
    (0..n).map(f).collect()
}

/// Fallible variant of [`map_indexed`]; the first error in index order wins.
pub fn try_map_indexed<T, E, F>(n: usize, f: F) -> Result<Vec<T>, E>
where
    T: Send,
    E: Send,
    F: Fn(usize) -> Result<T, E> + Sync + Send,
{
    map_indexed(n, f).into_iter().collect()
}

/// Number of worker threads the parallel map would use.
pub fn current_workers() -> usize {
    #[cfg(feature = "parallel")]
    {
        rayon::current_num_threads()
    }
    #[cfg(not(feature = "parallel"))]
    {
        1
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn preserves_index_order() {
        let v = map_indexed(100, |i| i * i);
        assert_eq!(v, (0..100).map(|i| i * i).collect::<Vec<_>>());
    }

    #[test]
    fn first_error_in_index_order() {
        let r: Result<Vec<usize>, usize> =
            try_map_indexed(10, |i| if i % 4 == 3 { Err(i) } else { Ok(i) });
        assert_eq!(r, Err(3));
    }
}
