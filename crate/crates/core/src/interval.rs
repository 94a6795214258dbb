use std::fmt;

use serde::{Deserialize, Serialize};

/// Closed slot range `[lo, hi]`, 1-based. `lo > hi` is the empty set and
/// is always stored as [`Interval::EMPTY`].
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct Interval {
    lo: usize,
    hi: usize,
}

impl Interval {
    pub const EMPTY: Interval = Interval { lo: 1, hi: 0 };

    /// `[lo, hi]`, or `EMPTY` when `lo > hi`.
    pub fn new(lo: usize, hi: usize) -> Self {
        if lo > hi {
            Self::EMPTY
        } else {
            assert!(lo >= 1, "slot indices are 1-based");
            Self { lo, hi }
        }
    }

    #[inline]
    pub fn is_empty(self) -> bool {
        self.lo > self.hi
    }

    #[inline]
    pub fn lo(self) -> usize {
        self.lo
    }

    #[inline]
    pub fn hi(self) -> usize {
        self.hi
    }

    pub fn len(self) -> usize {
        if self.is_empty() {
            0
        } else {
            self.hi - self.lo + 1
        }
    }

    /// `other ⊆ self`. The empty set is contained in everything.
    pub fn contains(self, other: Interval) -> bool {
        other.is_empty() || (!self.is_empty() && self.lo <= other.lo && other.hi <= self.hi)
    }

    pub fn contains_slot(self, slot: usize) -> bool {
        !self.is_empty() && self.lo <= slot && slot <= self.hi
    }

    pub fn slots(self) -> impl Iterator<Item = usize> {
        self.lo..=self.hi
    }
}

impl fmt::Display for Interval {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.is_empty() {
            f.write_str("∅")
        } else {
            write!(f, "[{},{}]", self.lo, self.hi)
        }
    }
}

/// Lexicographic numbering of all non-empty `[a,b] ⊆ [1,N]`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct IntervalIndex {
    n: usize,
    /// Offset of the first interval starting at `a`, indexed by `a - 1`.
    starts: Vec<usize>,
    all: Vec<Interval>,
}

impl IntervalIndex {
    pub fn new(n: usize) -> Self {
        let mut starts = Vec::with_capacity(n);
        let mut all = Vec::with_capacity(n * (n + 1) / 2);
        for a in 1..=n {
            starts.push(all.len());
            for b in a..=n {
                all.push(Interval::new(a, b));
            }
        }
        Self { n, starts, all }
    }

    pub fn slots(&self) -> usize {
        self.n
    }

    /// Number of non-empty intervals, `N(N+1)/2`.
    pub fn len(&self) -> usize {
        self.all.len()
    }

    pub fn is_empty(&self) -> bool {
        self.all.is_empty()
    }

    /// Position of a non-empty interval inside `[1,N]`.
    pub fn index(&self, iv: Interval) -> usize {
        debug_assert!(!iv.is_empty() && iv.hi() <= self.n);
        self.starts[iv.lo() - 1] + (iv.hi() - iv.lo())
    }

    pub fn interval(&self, k: usize) -> Interval {
        self.all[k]
    }

    pub fn iter(&self) -> impl Iterator<Item = Interval> + '_ {
        self.all.iter().copied()
    }
}
