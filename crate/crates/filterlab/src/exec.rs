//! Data-parallel helpers with a sequential fallback.
//!
//! With the `parallel` feature (default) the indexed map runs on the rayon
//! pool; without it, the same call compiles to a plain sequential loop.
//! Results are always collected in index order, so output bytes never depend
//! on the thread count. `map_range_seq` is the explicit sequential path and
//! exists unconditionally; the criterion bench compares the two.

#[cfg(feature = "parallel")]
use rayon::prelude::*;

/// Applies `f` to every index in `0..len`, collecting results in order.
#[cfg(feature = "parallel")]
pub fn map_range<R, F>(len: usize, f: F) -> Vec<R>
where
    R: Send,
    F: Fn(usize) -> R + Sync + Send,
{
    (0..len).into_par_iter().map(f).collect()
}

/// Applies `f` to every index in `0..len`, collecting results in order.
#[cfg(not(feature = "parallel"))]
pub fn map_range<R, F>(len: usize, f: F) -> Vec<R>
where
    R: Send,
    F: Fn(usize) -> R + Sync + Send,
{
    (0..len).map(f).collect()
}

/// Sequential reference version of [`map_range`].
pub fn map_range_seq<R, F>(len: usize, f: F) -> Vec<R>
where
    F: Fn(usize) -> R,
{
    (0..len).map(f).collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parallel_and_sequential_agree() {
        let f = |i: usize| (i as f64).sqrt() + (i % 7) as f64;
        let a = map_range(257, f);
        let b = map_range_seq(257, f);
        assert_eq!(a, b);
    }
}
