//! Deterministic data-parallel execution over sample indices.
//!
//! Sample indices `0..n` are cut into fixed blocks of [`BLOCK_SIZE`]. Each
//! block is processed sequentially and produces one partial result; partials
//! come back in block order. Block boundaries depend only on `n`, so any
//! order-sensitive floating-point merge done by the caller is identical for
//! every thread count, and identical to the sequential fallback.

use std::cell::Cell;
use std::ops::Range;

/// Samples per work item.
pub const BLOCK_SIZE: u64 = 8192;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Mode {
    Sequential,
    Parallel,
}

impl Mode {
    /// Parallel when the `parallel` feature is compiled in.
    pub const fn default_mode() -> Mode {
        if cfg!(feature = "parallel") {
            Mode::Parallel
        } else {
            Mode::Sequential
        }
    }
}

thread_local! {
    static MODE: Cell<Mode> = const { Cell::new(Mode::default_mode()) };
}

/// Current execution mode of the calling thread.
pub fn mode() -> Mode {
    MODE.with(Cell::get)
}

/// Runs `f` with the given execution mode on this thread. `Parallel` falls
/// back to sequential execution when the `parallel` feature is off.
pub fn with_mode<R>(mode: Mode, f: impl FnOnce() -> R) -> R {
    let prev = MODE.with(|m| m.replace(mode));
    struct Restore(Mode);
    impl Drop for Restore {
        fn drop(&mut self) {
            MODE.with(|m| m.set(self.0));
        }
    }
    let _restore = Restore(prev);
    f()
}

fn block_range(n: u64, b: u64, size: u64) -> Range<u64> {
    let lo = b * size;
    lo..(lo + size).min(n)
}

/// Applies `f` to each block of `0..n` and returns the partials in order.
pub fn map_blocks<A, F>(n: u64, f: F) -> Vec<A>
where
    A: Send,
    F: Fn(Range<u64>) -> A + Sync + Send,
{
    map_blocks_sized(n, BLOCK_SIZE, f)
}

/// As [`map_blocks`] with an explicit block size (for expensive items).
pub fn map_blocks_sized<A, F>(n: u64, size: u64, f: F) -> Vec<A>
where
    A: Send,
    F: Fn(Range<u64>) -> A + Sync + Send,
{
    let size = size.max(1);
    let blocks = n.div_ceil(size);
    match mode() {
        #[cfg(feature = "parallel")]
        Mode::Parallel => {
            use rayon::prelude::*;
            (0..blocks)
                .into_par_iter()
                .map(|b| f(block_range(n, b, size)))
                .collect()
        }
        _ => (0..blocks).map(|b| f(block_range(n, b, size))).collect(),
    }
}

/// Maps `f` over `items` in the current mode, preserving order.
pub fn map_items<T, A, F>(items: &[T], f: F) -> Vec<A>
where
    T: Sync,
    A: Send,
    F: Fn(&T) -> A + Sync + Send,
{
    match mode() {
        #[cfg(feature = "parallel")]
        Mode::Parallel => {
            use rayon::prelude::*;
            items.par_iter().map(f).collect()
        }
        _ => items.iter().map(f).collect(),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn blocks_cover_range_in_order() {
        let parts = map_blocks(20_000, |r| (r.start, r.end));
        assert_eq!(parts.first().unwrap().0, 0);
        assert_eq!(parts.last().unwrap().1, 20_000);
        for w in parts.windows(2) {
            assert_eq!(w[0].1, w[1].0);
        }
        assert!(map_blocks(0, |r| r).is_empty());
    }

    #[test]
    fn sequential_and_parallel_agree() {
        let f = |r: Range<u64>| r.map(|i| (i as f64).sqrt()).sum::<f64>();
        let seq = with_mode(Mode::Sequential, || map_blocks(100_000, f));
        let par = with_mode(Mode::Parallel, || map_blocks(100_000, f));
        assert_eq!(seq, par);
        assert_eq!(mode(), Mode::default_mode());
    }
}
