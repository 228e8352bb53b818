//! Fixed-shape trees over rank slots and the cells hanging off them.
//!
//! Every facet coordinate of a cone gets a perfect binary tree over slots
//! `0..leaves` in heap numbering (root 1, children `2v` and `2v + 1`). Slot 0
//! is never occupied by a data point; a point of role rank `r` sits in slot
//! `r + 1`, which leaves room for an external apex below every point.
//!
//! For an apex in slot `a`, the slots `> a` are covered by the right siblings
//! `w + 1` of the left children `w` on the path from leaf `a` to the root.
//! A point in slot `b > a` lies in exactly one of those nodes, and that node
//! is a right child on the path from leaf `b`. Taking one such node per facet
//! coordinate yields a chain; the cell of a chain holds the points whose
//! right-child ancestors include the whole chain, so a cone query is a union
//! of disjoint cells and each cell pairs the apexes that query it (the `B`
//! side) with the points it stores (the `R` side).

use std::collections::BTreeMap;
use std::ops::Bound::{Excluded, Unbounded};

use crate::error::{Error, Result};

pub(crate) type ChainKey = u128;

#[derive(Debug, Clone)]
pub(crate) struct RankTree {
    leaves: usize,
    bits: u32,
}

impl RankTree {
    pub(crate) fn new(n: usize, levels: usize) -> Result<Self> {
        let leaves = (n + 1).next_power_of_two();
        let bits = (2 * leaves).trailing_zeros() + 1;
        if bits as usize * levels > 128 {
            return Err(Error::InvalidParameter(format!(
                "{n} points in dimension {levels} exceed the supported rank-tree size"
            )));
        }
        Ok(Self { leaves, bits })
    }

    /// Right-child nodes on the path from leaf `slot` to the root, the leaf
    /// itself included and the root excluded.
    pub(crate) fn right_ancestors(&self, slot: usize) -> Vec<u32> {
        let mut v = self.leaves + slot;
        let mut out = Vec::new();
        while v > 1 {
            if v % 2 == 1 {
                out.push(v as u32);
            }
            v /= 2;
        }
        out
    }

    /// Nodes covering exactly the slots `> slot`.
    pub(crate) fn suffix_cover(&self, slot: usize) -> Vec<u32> {
        let mut v = self.leaves + slot;
        let mut out = Vec::new();
        while v > 1 {
            if v % 2 == 0 {
                out.push(v as u32 + 1);
            }
            v /= 2;
        }
        out
    }

    /// Calls `f` with the key of every chain in the product of `sets`.
    pub(crate) fn for_each_chain(&self, sets: &[Vec<u32>], mut f: impl FnMut(ChainKey)) {
        if sets.iter().any(Vec::is_empty) {
            return;
        }
        let mut idx = vec![0usize; sets.len()];
        loop {
            let key = idx
                .iter()
                .zip(sets)
                .fold(0u128, |acc, (&i, s)| (acc << self.bits) | ChainKey::from(s[i]));
            f(key);
            let mut level = sets.len();
            loop {
                if level == 0 {
                    return;
                }
                level -= 1;
                idx[level] += 1;
                if idx[level] < sets[level].len() {
                    break;
                }
                idx[level] = 0;
            }
        }
    }
}

/// The `R` side of one chain: its points keyed by axis rank, and the cached
/// rank of the k-th of them.
#[derive(Debug, Clone, Default, PartialEq)]
pub(crate) struct Cell {
    pub(crate) members: BTreeMap<u32, u32>,
    pub(crate) kth: Option<u32>,
}

impl Cell {
    pub(crate) fn insert(&mut self, rank: u32, point: u32, k: usize) {
        self.members.insert(rank, point);
        match self.kth {
            None if self.members.len() == k => {
                self.kth = self.members.keys().next_back().copied();
            }
            Some(kk) if rank < kk => {
                self.kth = self.members.range(..kk).next_back().map(|(&r, _)| r);
            }
            _ => {}
        }
    }

    pub(crate) fn remove(&mut self, rank: u32, k: usize) {
        let before = self.members.len();
        if self.members.remove(&rank).is_none() {
            return;
        }
        if let Some(kk) = self.kth {
            if before == k {
                self.kth = None;
            } else if rank <= kk {
                self.kth = self.members.range((Excluded(kk), Unbounded)).next().map(|(&r, _)| r);
            }
        }
    }

    /// Moves `point` to an adjacent rank with no other member in between.
    pub(crate) fn rekey(&mut self, from: u32, to: u32, point: u32) {
        self.members.remove(&from);
        self.members.insert(to, point);
        if self.kth == Some(from) {
            self.kth = Some(to);
        }
    }

    /// Recomputes the cached k-th rank from scratch.
    pub(crate) fn expected_kth(&self, k: usize) -> Option<u32> {
        self.members.keys().nth(k - 1).copied()
    }
}
