//! Segment tree answering "leftmost empty run of length >= L" queries.
//!
//! Each node summarises its span by the longest empty prefix, the longest
//! empty suffix and the longest empty run. Leaves beyond the occupied region
//! are empty; the tree doubles on demand so that it always covers at least
//! two cells past the last occupied one.

use std::cell::Cell;

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
struct Summary {
    prefix: u32,
    suffix: u32,
    best: u32,
}

impl Summary {
    const EMPTY_LEAF: Summary = Summary { prefix: 1, suffix: 1, best: 1 };
    const FULL: Summary = Summary { prefix: 0, suffix: 0, best: 0 };

    fn empty(len: u32) -> Self {
        Summary { prefix: len, suffix: len, best: len }
    }

    fn merge(left: Summary, right: Summary, half: u32) -> Summary {
        Summary {
            prefix: if left.prefix == half { half + right.prefix } else { left.prefix },
            suffix: if right.suffix == half { half + left.suffix } else { right.suffix },
            best: left.best.max(right.best).max(left.suffix + right.prefix),
        }
    }
}

const MIN_CAPACITY: usize = 64;

#[derive(Clone, Debug)]
pub struct FitIndex {
    capacity: usize,
    // 1-indexed heap layout; leaves at [capacity, 2 * capacity).
    nodes: Vec<Summary>,
    touched: Cell<usize>,
}

impl Default for FitIndex {
    fn default() -> Self {
        Self::new()
    }
}

impl FitIndex {
    pub fn new() -> Self {
        Self::with_capacity(MIN_CAPACITY)
    }

    /// Empty index covering at least `capacity` cells (rounded up to a power of two).
    pub fn with_capacity(capacity: usize) -> Self {
        let capacity = capacity.max(2).next_power_of_two();
        let mut nodes = vec![Summary::default(); 2 * capacity];
        let mut len = 1u32;
        let mut level_start = capacity;
        while level_start >= 1 {
            nodes[level_start..2 * level_start].fill(Summary::empty(len));
            len *= 2;
            level_start /= 2;
        }
        Self {
            capacity,
            nodes,
            touched: Cell::new(0),
        }
    }

    #[inline]
    pub fn capacity(&self) -> usize {
        self.capacity
    }

    /// Tree nodes read or written by the most recent operation.
    pub fn last_op_touched(&self) -> usize {
        self.touched.get()
    }

    pub fn is_free(&self, cell: usize) -> bool {
        cell >= self.capacity || self.nodes[self.capacity + cell].best == 1
    }

    /// Smallest `s` with `[s, s + len)` empty.
    pub fn leftmost_fit(&self, len: usize) -> usize {
        assert!(len >= 1, "fit length must be positive");
        let root = self.nodes[1];
        let mut touched = 1;
        if (root.best as usize) < len {
            self.touched.set(touched);
            return self.capacity - root.suffix as usize;
        }
        let want = len as u32;
        let mut node = 1;
        let mut lo = 0usize;
        let mut span = self.capacity;
        while node < self.capacity {
            let half = span / 2;
            let left = self.nodes[2 * node];
            let right = self.nodes[2 * node + 1];
            touched += 2;
            if left.best >= want {
                node *= 2;
            } else if left.suffix + right.prefix >= want {
                self.touched.set(touched);
                return lo + half - left.suffix as usize;
            } else {
                node = 2 * node + 1;
                lo += half;
            }
            span = half;
        }
        self.touched.set(touched);
        lo
    }

    /// Marks `[start, start + len)` occupied. Panics if any cell is already occupied.
    pub fn set_occupied(&mut self, start: usize, len: usize) {
        let end = start + len;
        if end + 2 > self.capacity {
            self.grow((end + 2).max(2 * self.capacity));
        }
        for cell in start..end {
            assert!(self.is_free(cell), "cell {cell} is already occupied");
        }
        self.write_range(start, end, Summary::FULL);
    }

    /// Marks `[start, start + len)` empty. Panics if any cell is already empty.
    pub fn set_free(&mut self, start: usize, len: usize) {
        let end = start + len;
        for cell in start..end {
            assert!(!self.is_free(cell), "cell {cell} is already free");
        }
        self.write_range(start, end, Summary::EMPTY_LEAF);
    }

    fn write_range(&mut self, start: usize, end: usize, leaf: Summary) {
        let mut touched = 0;
        for cell in start..end {
            self.nodes[self.capacity + cell] = leaf;
        }
        // Refresh each ancestor once, level by level.
        let (mut lo, mut hi) = ((self.capacity + start) / 2, (self.capacity + end - 1) / 2);
        let mut half = 1u32;
        while lo >= 1 {
            for node in lo..=hi {
                self.nodes[node] = Summary::merge(self.nodes[2 * node], self.nodes[2 * node + 1], half);
                touched += 1;
            }
            lo /= 2;
            hi /= 2;
            half *= 2;
        }
        self.touched.set(touched + (end - start));
    }

    fn grow(&mut self, min_capacity: usize) {
        let mut grown = FitIndex::with_capacity(min_capacity);
        let old_leaves = &self.nodes[self.capacity..2 * self.capacity];
        let new_cap = grown.capacity;
        grown.nodes[new_cap..new_cap + self.capacity].copy_from_slice(old_leaves);
        for node in (1..new_cap).rev() {
            let half = (new_cap >> (usize::BITS - 1 - node.leading_zeros())) as u32 / 2;
            grown.nodes[node] = Summary::merge(grown.nodes[2 * node], grown.nodes[2 * node + 1], half);
        }
        *self = grown;
    }
}

/// Leftmost fit by a left-to-right scan. Cells past the end of `occupied` are empty.
pub fn naive_leftmost_fit(occupied: &[bool], len: usize) -> usize {
    assert!(len >= 1, "fit length must be positive");
    let mut run = 0;
    for (i, &taken) in occupied.iter().enumerate() {
        if taken {
            run = 0;
        } else {
            run += 1;
            if run == len {
                return i + 1 - len;
            }
        }
    }
    occupied.len() - run
}

#[cfg(test)]
mod tests {
    use super::*;

    fn occupied(cells: &[usize]) -> FitIndex {
        let mut index = FitIndex::new();
        for &c in cells {
            index.set_occupied(c, 1);
        }
        index
    }

    fn bitmap(cells: &[usize]) -> Vec<bool> {
        let mut bits = vec![false; cells.iter().max().map_or(0, |m| m + 1)];
        for &c in cells {
            bits[c] = true;
        }
        bits
    }

    #[test]
    fn leftmost_fit_examples() {
        assert_eq!(FitIndex::new().leftmost_fit(2), 0);
        assert_eq!(occupied(&[0, 2]).leftmost_fit(1), 1);
        assert_eq!(occupied(&[0, 1, 3, 4]).leftmost_fit(2), 5);
    }

    #[test]
    fn naive_examples() {
        assert_eq!(naive_leftmost_fit(&[], 2), 0);
        assert_eq!(naive_leftmost_fit(&bitmap(&[0, 2]), 1), 1);
        assert_eq!(naive_leftmost_fit(&bitmap(&[0, 1, 3, 4]), 2), 5);
        assert_eq!(naive_leftmost_fit(&bitmap(&[0, 1, 3]), 2), 4);
    }

    #[test]
    fn set_occupied_examples() {
        let mut index = FitIndex::new();
        index.set_occupied(0, 2);
        assert_eq!(index.leftmost_fit(1), 2);

        let mut index = FitIndex::new();
        index.set_occupied(3, 1);
        assert_eq!(index.leftmost_fit(2), 0);
    }

    #[test]
    fn set_free_examples() {
        let mut index = FitIndex::new();
        index.set_occupied(0, 2);
        index.set_free(0, 2);
        assert_eq!(index.leftmost_fit(2), 0);

        let mut index = FitIndex::new();
        index.set_occupied(0, 1);
        index.set_occupied(1, 2);
        index.set_occupied(3, 1);
        index.set_free(1, 2);
        assert_eq!(index.leftmost_fit(2), 1);

        let mut index = FitIndex::new();
        index.set_occupied(0, 1);
        index.set_occupied(2, 1);
        index.set_free(0, 1);
        // Cells 0 and 1 are both empty now.
        assert_eq!(index.leftmost_fit(2), 0);
        assert_eq!(naive_leftmost_fit(&[false, false, true], 2), 0);
    }

    #[test]
    #[should_panic(expected = "already occupied")]
    fn double_occupation_panics() {
        let mut index = FitIndex::new();
        index.set_occupied(4, 2);
        index.set_occupied(5, 1);
    }

    #[test]
    #[should_panic(expected = "already free")]
    fn freeing_empty_panics() {
        let mut index = FitIndex::new();
        index.set_free(0, 1);
    }

    #[test]
    fn grows_past_initial_capacity() {
        let mut index = FitIndex::with_capacity(4);
        for c in 0..100 {
            index.set_occupied(c, 1);
            assert!(index.capacity() >= c + 3);
        }
        assert_eq!(index.leftmost_fit(2), 100);
        index.set_free(50, 1);
        assert_eq!(index.leftmost_fit(1), 50);
        assert_eq!(index.leftmost_fit(2), 100);
    }

    #[test]
    fn long_runs_fall_back_to_tail() {
        let index = occupied(&[1, 5]);
        // Longer than anything inside the tree: must start at the tail.
        assert_eq!(index.leftmost_fit(1000), 6);
        assert_eq!(index.leftmost_fit(3), 2);
    }

    #[test]
    fn query_cost_is_logarithmic() {
        let mut index = FitIndex::with_capacity(1 << 12);
        for c in (0..4000).step_by(3) {
            index.set_occupied(c, 2);
            assert!(index.last_op_touched() <= 2 + 2 * 13);
        }
        index.leftmost_fit(2);
        assert!(index.last_op_touched() <= 1 + 2 * 12);
    }
}
