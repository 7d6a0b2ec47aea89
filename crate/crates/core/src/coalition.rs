//! Coalitions of transactions as fixed-width bit sets.

use std::fmt;

use smallvec::{smallvec, SmallVec};

/// A subset of the transactions `0..width`. Bit `j` set means transaction `j` is present.
#[derive(Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct CoalitionMask {
    width: usize,
    words: SmallVec<[u64; 2]>,
}

impl CoalitionMask {
    pub fn empty(width: usize) -> Self {
        Self {
            width,
            words: smallvec![0; width.div_ceil(64).max(1)],
        }
    }

    pub fn full(width: usize) -> Self {
        let mut mask = Self::empty(width);
        for (i, w) in mask.words.iter_mut().enumerate() {
            let lo = i * 64;
            let bits = width.saturating_sub(lo).min(64);
            *w = if bits == 64 {
                u64::MAX
            } else {
                (1u64 << bits) - 1
            };
        }
        mask
    }

    /// Builds a mask from the low bits of `bits`. Panics if a bit at or above `width` is set.
    pub fn from_bits(width: usize, bits: u64) -> Self {
        assert!(width >= 64 || bits >> width == 0, "bits outside mask width");
        let mut mask = Self::empty(width);
        mask.words[0] = bits;
        mask
    }

    /// Panics if an index is out of range.
    pub fn from_indices<I: IntoIterator<Item = usize>>(width: usize, indices: I) -> Self {
        let mut mask = Self::empty(width);
        for i in indices {
            mask.insert(i);
        }
        mask
    }

    pub fn width(&self) -> usize {
        self.width
    }

    /// The mask as a single word, when the width allows it.
    pub fn as_u64(&self) -> Option<u64> {
        (self.width <= 64).then(|| self.words[0])
    }

    pub fn contains(&self, i: usize) -> bool {
        i < self.width && self.words[i / 64] >> (i % 64) & 1 == 1
    }

    pub fn insert(&mut self, i: usize) {
        assert!(
            i < self.width,
            "transaction {i} outside coalition width {}",
            self.width
        );
        self.words[i / 64] |= 1 << (i % 64);
    }

    pub fn remove(&mut self, i: usize) {
        if i < self.width {
            self.words[i / 64] &= !(1 << (i % 64));
        }
    }

    pub fn with(&self, i: usize) -> Self {
        let mut m = self.clone();
        m.insert(i);
        m
    }

    pub fn without(&self, i: usize) -> Self {
        let mut m = self.clone();
        m.remove(i);
        m
    }

    pub fn len(&self) -> usize {
        self.words.iter().map(|w| w.count_ones() as usize).sum()
    }

    pub fn is_empty(&self) -> bool {
        self.words.iter().all(|w| *w == 0)
    }

    pub fn is_subset_of(&self, other: &Self) -> bool {
        self.words
            .iter()
            .zip(other.words.iter().chain(std::iter::repeat(&0)))
            .all(|(a, b)| a & !b == 0)
    }

    pub fn intersects(&self, other: &Self) -> bool {
        self.words.iter().zip(&other.words).any(|(a, b)| a & b != 0)
    }

    pub fn union(&self, other: &Self) -> Self {
        let mut m = self.clone();
        for (a, b) in m.words.iter_mut().zip(&other.words) {
            *a |= b;
        }
        m
    }

    pub fn intersection(&self, other: &Self) -> Self {
        let mut m = self.clone();
        for (a, b) in m
            .words
            .iter_mut()
            .zip(other.words.iter().chain(std::iter::repeat(&0)))
        {
            *a &= b;
        }
        m
    }

    /// Members in ascending order.
    pub fn iter(&self) -> impl Iterator<Item = usize> + '_ {
        self.words.iter().enumerate().flat_map(|(wi, &w)| {
            let mut rest = w;
            std::iter::from_fn(move || {
                if rest == 0 {
                    return None;
                }
                let b = rest.trailing_zeros() as usize;
                rest &= rest - 1;
                Some(wi * 64 + b)
            })
        })
    }

    /// Lowercase hex of the whole mask, most significant word first.
    pub fn to_hex(&self) -> String {
        let mut s = String::new();
        for (i, w) in self.words.iter().rev().enumerate() {
            if i == 0 {
                s.push_str(&format!("{w:x}"));
            } else {
                s.push_str(&format!("{w:016x}"));
            }
        }
        s
    }
}

impl fmt::Debug for CoalitionMask {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_set().entries(self.iter()).finish()
    }
}
