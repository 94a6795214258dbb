use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::error::Error;
use crate::interval::Interval;

/// Largest supported slot count; availability is packed into one `u64`.
pub const MAX_SLOTS: usize = 64;

/// Availability of one resource over slots `1..=N` (bit `i-1` is slot `i`).
///
/// Slots `0` and `N+1` are treated as unavailable, so runs of ones are
/// bounded on both sides.
#[derive(Clone, Copy, PartialEq, Eq, Hash)]
pub struct SlotState {
    n: usize,
    bits: u64,
}

fn mask(iv: Interval) -> u64 {
    if iv.is_empty() {
        return 0;
    }
    let width = iv.len();
    let ones = if width == 64 { u64::MAX } else { (1u64 << width) - 1 };
    ones << (iv.lo() - 1)
}

impl SlotState {
    pub fn full(n: usize) -> Self {
        assert!((1..=MAX_SLOTS).contains(&n), "slot count {n} outside 1..={MAX_SLOTS}");
        Self {
            n,
            bits: mask(Interval::new(1, n)),
        }
    }

    pub fn from_bits(bits: &[bool]) -> Self {
        let n = bits.len();
        assert!((1..=MAX_SLOTS).contains(&n), "slot count {n} outside 1..={MAX_SLOTS}");
        let bits = bits
            .iter()
            .enumerate()
            .fold(0u64, |acc, (i, &b)| acc | (u64::from(b) << i));
        Self { n, bits }
    }

    /// Packs the low `n` bits of `raw` (bit `i-1` = slot `i`).
    pub fn from_raw(n: usize, raw: u64) -> Self {
        assert!((1..=MAX_SLOTS).contains(&n), "slot count {n} outside 1..={MAX_SLOTS}");
        Self {
            n,
            bits: raw & mask(Interval::new(1, n)),
        }
    }

    #[inline]
    pub fn raw(self) -> u64 {
        self.bits
    }

    #[inline]
    pub fn slots(self) -> usize {
        self.n
    }

    #[inline]
    pub fn is_available(self, slot: usize) -> bool {
        (1..=self.n).contains(&slot) && self.bits >> (slot - 1) & 1 == 1
    }

    pub fn available_count(self) -> usize {
        self.bits.count_ones() as usize
    }

    /// Every slot of `iv` is available (vacuous for the empty interval).
    pub fn covers(self, iv: Interval) -> bool {
        iv.is_empty() || (iv.hi() <= self.n && self.bits & mask(iv) == mask(iv))
    }

    /// Slot-wise `self ≤ other`.
    pub fn is_within(self, other: SlotState) -> bool {
        self.bits & !other.bits == 0
    }

    /// Maximal runs of available slots, sorted by start.
    pub fn maximal_sequences(self) -> Vec<Interval> {
        let mut out = Vec::new();
        let mut rest = self.bits;
        while rest != 0 {
            let start = rest.trailing_zeros() as usize;
            let run = (rest >> start).trailing_ones() as usize;
            out.push(Interval::new(start + 1, start + run));
            rest &= !mask(Interval::new(start + 1, start + run));
        }
        out
    }

    /// The maximal sequence `[a,b]` with `iv ⊆ [a,b]`, if `iv` is available.
    pub fn containing_sequence(self, iv: Interval) -> Option<Interval> {
        if iv.is_empty() || !self.covers(iv) {
            return None;
        }
        let mut lo = iv.lo();
        while lo > 1 && self.is_available(lo - 1) {
            lo -= 1;
        }
        let mut hi = iv.hi();
        while hi < self.n && self.is_available(hi + 1) {
            hi += 1;
        }
        Some(Interval::new(lo, hi))
    }

    /// `[a,b]` is a maximal sequence of this state.
    pub fn has_sequence(self, iv: Interval) -> bool {
        !iv.is_empty()
            && self.covers(iv)
            && !self.is_available(iv.lo() - 1)
            && !self.is_available(iv.hi() + 1)
    }

    /// `s - 1_[iv]`; fails if some slot of `iv` is already taken.
    pub fn allocate(self, iv: Interval) -> Result<SlotState, Error> {
        if let Some(slot) = iv.slots().find(|&s| !self.is_available(s)) {
            return Err(Error::OccupiedSlot { slot });
        }
        Ok(Self {
            n: self.n,
            bits: self.bits & !mask(iv),
        })
    }
}

/// Fragments left of and right of `iv` inside `seq`.
pub fn split_effect(seq: Interval, iv: Interval) -> Result<(Interval, Interval), Error> {
    if iv.is_empty() || !seq.contains(iv) {
        return Err(Error::NotContained { outer: seq, inner: iv });
    }
    Ok((Interval::new(seq.lo(), iv.lo() - 1), Interval::new(iv.hi() + 1, seq.hi())))
}

impl fmt::Display for SlotState {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for i in 1..=self.n {
            f.write_str(if self.is_available(i) { "1" } else { "0" })?;
        }
        Ok(())
    }
}

impl fmt::Debug for SlotState {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "SlotState({self})")
    }
}

impl FromStr for SlotState {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let bits = s
            .chars()
            .map(|c| match c {
                '1' => Ok(true),
                '0' => Ok(false),
                other => Err(Error::Parse(format!("bad slot character {other:?}"))),
            })
            .collect::<Result<Vec<_>, _>>()?;
        if bits.is_empty() || bits.len() > MAX_SLOTS {
            return Err(Error::Parse(format!("slot string length {} outside 1..={MAX_SLOTS}", bits.len())));
        }
        Ok(Self::from_bits(&bits))
    }
}

impl Serialize for SlotState {
    fn serialize<S: Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        serializer.collect_str(self)
    }
}

impl<'de> Deserialize<'de> for SlotState {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        let s = String::deserialize(deserializer)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}
