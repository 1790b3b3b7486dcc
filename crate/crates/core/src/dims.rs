//! Subsets of the dimension index set `[d]`.
//!
//! Stored 0-based as a bitmask and serialized 0-based in files; displayed and
//! parsed 1-based, which is the convention of the command line.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Largest supported dimension.
pub const MAX_DIM: usize = 32;

/// A subset of `{0, .., d-1}`.
#[derive(Clone, Copy, PartialEq, Eq, Hash, Default, PartialOrd, Ord)]
pub struct DimSet(u32);

impl DimSet {
    pub const EMPTY: DimSet = DimSet(0);

    pub fn singleton(i: usize) -> Self {
        debug_assert!(i < MAX_DIM);
        DimSet(1 << i)
    }

    /// `{0, .., d-1}`.
    pub fn full(d: usize) -> Self {
        debug_assert!(d <= MAX_DIM);
        if d == MAX_DIM {
            DimSet(u32::MAX)
        } else {
            DimSet((1u32 << d) - 1)
        }
    }

    pub fn from_bits(bits: u32) -> Self {
        DimSet(bits)
    }

    pub fn bits(self) -> u32 {
        self.0
    }

    pub fn is_empty(self) -> bool {
        self.0 == 0
    }

    pub fn len(self) -> usize {
        self.0.count_ones() as usize
    }

    pub fn contains(self, i: usize) -> bool {
        i < MAX_DIM && self.0 & (1 << i) != 0
    }

    pub fn insert(&mut self, i: usize) {
        self.0 |= 1 << i;
    }

    pub fn union(self, other: DimSet) -> DimSet {
        DimSet(self.0 | other.0)
    }

    pub fn intersection(self, other: DimSet) -> DimSet {
        DimSet(self.0 & other.0)
    }

    pub fn difference(self, other: DimSet) -> DimSet {
        DimSet(self.0 & !other.0)
    }

    pub fn is_subset(self, other: DimSet) -> bool {
        self.0 & !other.0 == 0
    }

    /// Smallest element.
    pub fn first(self) -> Option<usize> {
        (self.0 != 0).then(|| self.0.trailing_zeros() as usize)
    }

    /// Elements in increasing order.
    pub fn iter(self) -> impl Iterator<Item = usize> {
        let mut bits = self.0;
        std::iter::from_fn(move || {
            if bits == 0 {
                None
            } else {
                let i = bits.trailing_zeros() as usize;
                bits &= bits - 1;
                Some(i)
            }
        })
    }

    /// Elements as 1-based indices.
    pub fn to_one_based(self) -> Vec<usize> {
        self.iter().map(|i| i + 1).collect()
    }

    /// Every nonempty subset of `[d]`, in increasing bitmask order.
    pub fn nonempty_subsets(d: usize) -> impl Iterator<Item = DimSet> {
        let full = DimSet::full(d).0 as u64;
        (1..=full).map(|b| DimSet(b as u32))
    }

    /// Every subset of `self` (including the empty set and `self`).
    pub fn subsets(self) -> impl Iterator<Item = DimSet> {
        let mask = self.0;
        let mut sub: Option<u32> = Some(0);
        std::iter::from_fn(move || {
            let cur = sub?;
            sub = if cur == mask {
                None
            } else {
                Some((cur.wrapping_sub(mask)) & mask)
            };
            Some(DimSet(cur))
        })
    }

    /// Parse a 1-based list such as `1,2` or `{1,2}` and check it against `d`.
    pub fn parse_one_based(text: &str, d: usize) -> Result<DimSet> {
        let set: DimSet = text.parse()?;
        if set.is_empty() {
            return Err(Error::EmptySet);
        }
        if !set.is_subset(DimSet::full(d)) {
            return Err(Error::InvalidIndexSet(format!(
                "{text}: indices must lie in 1..={d}"
            )));
        }
        Ok(set)
    }
}

impl FromIterator<usize> for DimSet {
    fn from_iter<T: IntoIterator<Item = usize>>(iter: T) -> Self {
        let mut s = DimSet::EMPTY;
        for i in iter {
            s.insert(i);
        }
        s
    }
}

impl FromStr for DimSet {
    type Err = Error;

    /// 1-based, comma separated, optional braces.
    fn from_str(s: &str) -> Result<Self> {
        let inner = s.trim().trim_start_matches('{').trim_end_matches('}');
        let mut set = DimSet::EMPTY;
        for tok in inner.split(',').map(str::trim).filter(|t| !t.is_empty()) {
            let k: usize = tok
                .parse()
                .map_err(|_| Error::InvalidIndexSet(format!("bad index `{tok}` in `{s}`")))?;
            if k == 0 || k > MAX_DIM {
                return Err(Error::InvalidIndexSet(format!(
                    "index {k} out of range 1..={MAX_DIM}"
                )));
            }
            set.insert(k - 1);
        }
        Ok(set)
    }
}

impl fmt::Display for DimSet {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str("{")?;
        for (n, i) in self.iter().enumerate() {
            if n > 0 {
                f.write_str(",")?;
            }
            write!(f, "{}", i + 1)?;
        }
        f.write_str("}")
    }
}

impl fmt::Debug for DimSet {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        fmt::Display::fmt(self, f)
    }
}

impl Serialize for DimSet {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        s.collect_seq(self.iter())
    }
}

impl<'de> Deserialize<'de> for DimSet {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let idx: Vec<usize> = Vec::deserialize(d)?;
        idx.into_iter()
            .map(|k| {
                if k >= MAX_DIM {
                    Err(serde::de::Error::custom(format!("index {k} out of range")))
                } else {
                    Ok(k)
                }
            })
            .collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parse_and_display_are_one_based() {
        let s: DimSet = "{1,3}".parse().unwrap();
        assert_eq!(s.iter().collect::<Vec<_>>(), vec![0, 2]);
        assert_eq!(s.to_string(), "{1,3}");
        assert_eq!("2".parse::<DimSet>().unwrap(), DimSet::singleton(1));
        assert!("0".parse::<DimSet>().is_err());
        assert!("a".parse::<DimSet>().is_err());
        assert!(matches!(DimSet::parse_one_based("", 2), Err(Error::EmptySet)));
        assert!(DimSet::parse_one_based("3", 2).is_err());
    }

    #[test]
    fn subsets_enumerates_power_set() {
        let s = DimSet::from_iter([0, 2, 3]);
        let subs: Vec<_> = s.subsets().collect();
        assert_eq!(subs.len(), 8);
        assert!(subs.iter().all(|x| x.is_subset(s)));
        assert_eq!(DimSet::nonempty_subsets(3).count(), 7);
    }
}
