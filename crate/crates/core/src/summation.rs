//! Pairwise (cascade) reductions with a fixed reduction tree.
//!
//! Every reduction over sample rows in this crate goes through
//! [`pairwise_reduce`]: ranges of at most [`LEAF`] rows are summed naively and
//! the partial results are combined along a binary tree whose shape depends
//! only on the range length. Results are therefore bit-reproducible, whatever
//! the thread count.

use std::ops::Range;

/// Rows summed sequentially at the leaves of the tree.
pub const LEAF: usize = 128;

/// Reduces `range` by splitting it in halves until the pieces hold at most
/// [`LEAF`] items, evaluating `leaf` on each piece and merging with `combine`.
pub fn pairwise_reduce<T, L, C>(range: Range<usize>, leaf: &L, combine: &C) -> T
where
    L: Fn(Range<usize>) -> T,
    C: Fn(T, T) -> T,
{
    let len = range.end - range.start;
    if len <= LEAF {
        return leaf(range);
    }
    let mid = range.start + len / 2;
    let left = pairwise_reduce(range.start..mid, leaf, combine);
    let right = pairwise_reduce(mid..range.end, leaf, combine);
    combine(left, right)
}

/// Pairwise sum of `term(k)` for `k` in `0..n`.
pub fn pairwise_sum<F: Fn(usize) -> f64>(n: usize, term: F) -> f64 {
    pairwise_reduce(
        0..n,
        &|r: Range<usize>| {
            let mut acc = 0.0;
            for k in r {
                acc += term(k);
            }
            acc
        },
        &|a, b| a + b,
    )
}
