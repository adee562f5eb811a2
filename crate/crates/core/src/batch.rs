//! Batch evaluation over independent work items.
//!
//! All heavy loops in this crate (codebook scans, per-trace synthesis,
//! feature extraction, per-pair SVM training) map an independent function
//! over a collection. `map` and `map_indices` dispatch to a rayon pool when
//! the `parallel` feature is enabled and iterate sequentially otherwise.
//! Results are always collected in input order and reduced sequentially by
//! the caller, so both backends produce bitwise-identical output.
//!
//! The `_seq`/`_par` variants are public so the bench suite can compare the
//! two backends on the same workload.

#[cfg(feature = "parallel")]
use rayon::prelude::*;

/// Sequential map preserving input order.
pub fn map_seq<T, U, F>(items: &[T], f: F) -> Vec<U>
where
    F: Fn(&T) -> U,
{
    items.iter().map(f).collect()
}

/// Parallel map on the rayon pool; output order matches input order.
#[cfg(feature = "parallel")]
pub fn map_par<T, U, F>(items: &[T], f: F) -> Vec<U>
where
    T: Sync,
    U: Send,
    F: Fn(&T) -> U + Sync + Send,
{
    items.par_iter().map(f).collect()
}

/// Map over a slice using the configured backend.
pub fn map<T, U, F>(items: &[T], f: F) -> Vec<U>
where
    T: Sync,
    U: Send,
    F: Fn(&T) -> U + Sync + Send,
{
    #[cfg(feature = "parallel")]
    {
        map_par(items, f)
    }
    #[cfg(not(feature = "parallel"))]
    {
        map_seq(items, f)
    }
}

/// Sequential map over `0..n`.
pub fn map_indices_seq<U, F>(n: usize, f: F) -> Vec<U>
where
    F: Fn(usize) -> U,
{
    (0..n).map(f).collect()
}

/// Parallel map over `0..n`; output order matches index order.
#[cfg(feature = "parallel")]
pub fn map_indices_par<U, F>(n: usize, f: F) -> Vec<U>
where
    U: Send,
    F: Fn(usize) -> U + Sync + Send,
{
    (0..n).into_par_iter().map(f).collect()
}

/// Map over `0..n` using the configured backend.
pub fn map_indices<U, F>(n: usize, f: F) -> Vec<U>
where
    U: Send,
    F: Fn(usize) -> U + Sync + Send,
{
    #[cfg(feature = "parallel")]
    {
        map_indices_par(n, f)
    }
    #[cfg(not(feature = "parallel"))]
    {
        map_indices_seq(n, f)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn map_preserves_order() {
        let items: Vec<u64> = (0..1000).collect();
        let out = map(&items, |&x| x * x);
        assert_eq!(out, map_seq(&items, |&x| x * x));
    }

    #[cfg(feature = "parallel")]
    #[test]
    fn parallel_matches_sequential_bitwise() {
        let items: Vec<f64> = (0..512).map(|i| i as f64 * 0.37).collect();
        let f = |x: &f64| (x.sin() * x.exp()).to_bits();
        assert_eq!(map_par(&items, f), map_seq(&items, f));
        let g = |i: usize| ((i as f64).sqrt().cos()).to_bits();
        assert_eq!(map_indices_par(512, g), map_indices_seq(512, g));
    }
}
