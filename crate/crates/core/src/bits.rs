//! Points of `{-1,1}^k` and subsets of `[k]` as bit masks.
//!
//! Canonical point order: bit `i` of a point index is the sign of coordinate
//! `i`, with `0 ↦ +1` and `1 ↦ -1`. Coordinates and layers are 0-based.

use std::cmp::Ordering;
use std::fmt;

use crate::error::{Error, Result};

/// Sign of coordinate `i` of point `x`.
#[inline]
pub fn coord(x: u32, i: usize) -> i8 {
    if x >> i & 1 == 0 {
        1
    } else {
        -1
    }
}

/// `χ_S(x) = ∏_{i∈S} x_i`.
#[inline]
pub fn chi(set: u32, x: u32) -> i8 {
    if (set & x).count_ones() % 2 == 0 {
        1
    } else {
        -1
    }
}

/// Global negation `x ↦ -x` within `{-1,1}^k`.
#[inline]
pub fn negate(x: u32, k: usize) -> u32 {
    !x & full_mask(k)
}

#[inline]
pub fn full_mask(k: usize) -> u32 {
    if k >= 32 {
        u32::MAX
    } else {
        (1u32 << k) - 1
    }
}

pub fn point_to_signs(x: u32, k: usize) -> Vec<i8> {
    (0..k).map(|i| coord(x, i)).collect()
}

pub fn signs_to_point(signs: &[i64], k: usize) -> Result<u32> {
    if signs.len() != k {
        return Err(Error::DimensionMismatch { expected: k, got: signs.len() });
    }
    let mut x = 0u32;
    for (i, &s) in signs.iter().enumerate() {
        match s {
            1 => {}
            -1 => x |= 1 << i,
            other => return Err(Error::NotASign(other)),
        }
    }
    Ok(x)
}

/// A subset of `[k]` (k ≤ 32), ordered by size and then lexicographically
/// on the sorted element list.
#[derive(Clone, Copy, PartialEq, Eq, Hash, Default)]
pub struct VertexSet(pub u32);

impl VertexSet {
    pub const EMPTY: VertexSet = VertexSet(0);

    pub fn from_elements(elements: &[usize]) -> Self {
        VertexSet(elements.iter().fold(0, |m, &i| m | 1 << i))
    }

    pub fn full(k: usize) -> Self {
        VertexSet(full_mask(k))
    }

    pub fn mask(self) -> u32 {
        self.0
    }

    pub fn len(self) -> usize {
        self.0.count_ones() as usize
    }

    pub fn is_empty(self) -> bool {
        self.0 == 0
    }

    pub fn contains(self, i: usize) -> bool {
        i < 32 && self.0 >> i & 1 == 1
    }

    pub fn is_subset_of(self, other: VertexSet) -> bool {
        self.0 & !other.0 == 0
    }

    pub fn elements(self) -> Vec<usize> {
        self.iter().collect()
    }

    pub fn iter(self) -> impl Iterator<Item = usize> {
        let m = self.0;
        (0..32).filter(move |i| m >> i & 1 == 1)
    }

    /// All subsets of this set, as masks.
    pub fn subsets(self) -> impl Iterator<Item = VertexSet> {
        let m = self.0;
        let mut next = Some(0u32);
        std::iter::from_fn(move || {
            let cur = next?;
            next = if cur == m { None } else { Some((cur.wrapping_sub(m)) & m) };
            Some(VertexSet(cur))
        })
    }
}

impl Ord for VertexSet {
    fn cmp(&self, other: &Self) -> Ordering {
        self.len()
            .cmp(&other.len())
            .then_with(|| self.iter().cmp(other.iter()))
    }
}

impl PartialOrd for VertexSet {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl fmt::Debug for VertexSet {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_set().entries(self.iter()).finish()
    }
}

impl fmt::Display for VertexSet {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        fmt::Debug::fmt(self, f)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn point_encoding() {
        assert_eq!(point_to_signs(0b0101, 4), vec![-1, 1, -1, 1]);
        assert_eq!(signs_to_point(&[-1, 1, -1, 1], 4).unwrap(), 0b0101);
        assert!(matches!(signs_to_point(&[1, 0], 2), Err(Error::NotASign(0))));
        assert!(signs_to_point(&[1], 2).is_err());
        assert_eq!(negate(0b0101, 4), 0b1010);
        assert_eq!(chi(0b11, 0b01), -1);
        assert_eq!(chi(0b11, 0b11), 1);
    }

    #[test]
    fn set_order_is_size_then_lex() {
        let mut sets = vec![
            VertexSet::from_elements(&[1, 2]),
            VertexSet::from_elements(&[0, 3]),
            VertexSet::from_elements(&[2]),
            VertexSet::from_elements(&[0, 1, 2]),
            VertexSet::from_elements(&[0, 2]),
        ];
        sets.sort();
        let out: Vec<Vec<usize>> = sets.iter().map(|s| s.elements()).collect();
        assert_eq!(out, vec![vec![2], vec![0, 2], vec![0, 3], vec![1, 2], vec![0, 1, 2]]);
    }

    #[test]
    fn subsets_enumerates_power_set() {
        let s = VertexSet::from_elements(&[1, 3, 4]);
        let subs: Vec<u32> = s.subsets().map(|v| v.0).collect();
        assert_eq!(subs.len(), 8);
        assert!(subs.iter().all(|&m| m & !s.0 == 0));
    }
}
