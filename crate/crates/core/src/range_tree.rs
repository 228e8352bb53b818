//! Static augmented range tree for one cone.
//!
//! Levels `1..d` are balanced trees over the facet keys `u_1..u_d`; each node
//! of level `j < d` owns a level-`j+1` tree over its own subset, and each node
//! of level `d` owns the list `L(P(v))` of its subset sorted by the axis key.
//! A wedge `W_l(q)` is the dominance region `key_j(p) > key_j(q)` for all `j`,
//! so it decomposes into `O(log^d n)` canonical level-`d` nodes whose lists are
//! merged with a min-heap to emit points in axis order.

use std::cmp::Reverse;
use std::collections::{BinaryHeap, HashSet};

use crate::cone_geometry::{tag, ConeFamily, OrderKey};
use crate::error::{Error, Result};
use crate::{PointId, Site};

/// (axis rank, point index); ranks follow the axis key order.
type Entry = (u32, u32);

/// The first `k` points of `P ∩ W_l(q)` in ascending axis order.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct CandidateSet {
    pub points: Vec<PointId>,
}

impl CandidateSet {
    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    /// The k-th point, when the wedge holds at least `k` points.
    pub fn kth(&self, k: usize) -> Option<PointId> {
        self.points.get(k.wrapping_sub(1)).copied()
    }
}

/// One balanced tree over a subset, keyed by facet coordinate `j`.
///
/// Node ranges follow the usual halving of `0..m`. `blocks` holds one layer
/// of `m` entries per depth; the block `lo..hi` of layer `h` is the subset of
/// the depth-`h` node over `lo..hi`, sorted by coordinate `j + 1` (the axis
/// at the last facet level), so a whole tree costs a handful of allocations.
#[derive(Debug, Clone)]
struct Level {
    keys: Vec<OrderKey>,
    members: Vec<u32>,
    blocks: Vec<Entry>,
    // Below the last facet level: the next level of each node, by heap number.
    next: Vec<Option<Box<Level>>>,
}

/// A canonical level-`d` node: its subset sorted by the axis key.
#[derive(Clone, Copy)]
pub struct CanonicalNode<'a> {
    list: &'a [Entry],
    ids: &'a [PointId],
}

impl<'a> CanonicalNode<'a> {
    pub fn len(&self) -> usize {
        self.list.len()
    }

    pub fn is_empty(&self) -> bool {
        self.list.is_empty()
    }

    /// Point ids in ascending axis order.
    pub fn ids(&self) -> impl Iterator<Item = PointId> + 'a {
        let ids = self.ids;
        self.list.iter().map(move |&(_, i)| ids[i as usize])
    }
}

/// Range tree for cone `l`, with the axis level on top.
#[derive(Debug, Clone)]
pub struct AugmentedRangeTree {
    cone: usize,
    dimension: usize,
    ids: Vec<PointId>,
    root: Option<Level>,
    storage: usize,
}

impl AugmentedRangeTree {
    pub fn build(points: &[Site], family: &ConeFamily, cone: usize) -> Result<Self> {
        let d = family.dimension();
        if cone >= family.len() {
            return Err(Error::InvalidParameter(format!("cone index {cone} out of range")));
        }
        let mut seen = HashSet::with_capacity(points.len());
        for (id, pos) in points {
            if !seen.insert(*id) {
                return Err(Error::InvalidInput(format!("duplicate point id {id}")));
            }
            if pos.len() != d || pos.iter().any(|x| !x.is_finite()) {
                return Err(Error::InvalidInput(format!("point {id} has an invalid position")));
            }
        }
        let ids: Vec<PointId> = points.iter().map(|(id, _)| *id).collect();
        // keys[j][i]: key of point i for coordinate j (j == d is the axis).
        let keys: Vec<Vec<OrderKey>> = (0..=d)
            .map(|j| points.iter().map(|(id, pos)| family.key(cone, j, pos, tag(*id))).collect())
            .collect();
        let mut storage = 0;
        let root = if points.is_empty() {
            None
        } else {
            let keys = Keys::new(keys);
            let mut all: Vec<u32> = (0..points.len() as u32).collect();
            all.sort_unstable_by_key(|&i| keys.ranks[0][i as usize]);
            Some(Level::build(0, d, all, &keys, &mut storage))
        };
        Ok(Self {
            cone,
            dimension: d,
            ids,
            root,
            storage,
        })
    }

    pub fn cone(&self) -> usize {
        self.cone
    }

    pub fn len(&self) -> usize {
        self.ids.len()
    }

    pub fn is_empty(&self) -> bool {
        self.ids.is_empty()
    }

    /// Total length of all `L(P(v))` lists.
    pub fn storage(&self) -> usize {
        self.storage
    }

    /// Canonical level-`d` nodes whose subsets partition `P ∩ W_l(apex)`.
    pub fn canonical_nodes(&self, family: &ConeFamily, apex: &[f64], apex_tag: i64) -> Vec<CanonicalNode<'_>> {
        let mut out = Vec::new();
        if let Some(root) = &self.root {
            let keys: Vec<OrderKey> = (0..self.dimension)
                .map(|j| family.key(self.cone, j, apex, apex_tag))
                .collect();
            root.collect(&keys, 0, &mut |list| {
                out.push(CanonicalNode { list, ids: &self.ids })
            });
        }
        out
    }

    /// The first `k` points of `L(P ∩ W_l(apex))`.
    pub fn first_k(&self, family: &ConeFamily, apex: &[f64], apex_tag: i64, k: usize) -> Result<CandidateSet> {
        if k < 1 {
            return Err(Error::InvalidParameter("k must be at least 1".into()));
        }
        let nodes = self.canonical_nodes(family, apex, apex_tag);
        let mut heap: BinaryHeap<Reverse<(u32, usize, usize)>> = nodes
            .iter()
            .enumerate()
            .filter(|(_, n)| !n.list.is_empty())
            .map(|(i, n)| Reverse((n.list[0].0, i, 0)))
            .collect();
        let mut points = Vec::with_capacity(k);
        while points.len() < k {
            let Some(Reverse((_, node, pos))) = heap.pop() else {
                break;
            };
            let list = nodes[node].list;
            points.push(self.ids[list[pos].1 as usize]);
            if pos + 1 < list.len() {
                heap.push(Reverse((list[pos + 1].0, node, pos + 1)));
            }
        }
        Ok(CandidateSet { points })
    }
}

/// Per-point keys for every coordinate, and their ranks for cheap merging.
struct Keys {
    keys: Vec<Vec<OrderKey>>,
    ranks: Vec<Vec<u32>>,
}

impl Keys {
    fn new(keys: Vec<Vec<OrderKey>>) -> Self {
        let ranks = keys
            .iter()
            .map(|coord| {
                let mut order: Vec<u32> = (0..coord.len() as u32).collect();
                order.sort_unstable_by_key(|&i| coord[i as usize]);
                let mut rank = vec![0; coord.len()];
                for (r, &i) in order.iter().enumerate() {
                    rank[i as usize] = r as u32;
                }
                rank
            })
            .collect();
        Self { keys, ranks }
    }
}

/// Merges two runs sorted by their first component into `out`.
fn merge_into(a: &[Entry], b: &[Entry], out: &mut [Entry]) {
    let (mut i, mut j) = (0, 0);
    for slot in out.iter_mut() {
        if j == b.len() || (i < a.len() && a[i].0 < b[j].0) {
            *slot = a[i];
            i += 1;
        } else {
            *slot = b[j];
            j += 1;
        }
    }
}

fn layer_count(m: usize) -> usize {
    let (mut layers, mut size) = (1, m);
    while size > 1 {
        size = size.div_ceil(2);
        layers += 1;
    }
    layers
}

impl Level {
    /// Builds level `j` over `members`, which must be sorted by key `j`.
    fn build(j: usize, d: usize, members: Vec<u32>, keys: &Keys, storage: &mut usize) -> Level {
        let m = members.len();
        let mut level = Level {
            keys: members.iter().map(|&i| keys.keys[j][i as usize]).collect(),
            members,
            blocks: vec![(0, 0); m * layer_count(m)],
            next: Vec::new(),
        };
        if j + 1 < d {
            level.next.resize_with(4 * m.max(1), || None);
        }
        level.build_nodes(1, 0, m, 0, j, d, keys, storage);
        level
    }

    #[allow(clippy::too_many_arguments)]
    fn build_nodes(&mut self, node: usize, lo: usize, hi: usize, h: usize, j: usize, d: usize, keys: &Keys, storage: &mut usize) {
        let m = self.members.len();
        if hi - lo > 1 {
            let mid = (lo + hi) / 2;
            self.build_nodes(2 * node, lo, mid, h + 1, j, d, keys, storage);
            self.build_nodes(2 * node + 1, mid, hi, h + 1, j, d, keys, storage);
            let (upper, lower) = self.blocks.split_at_mut((h + 1) * m);
            merge_into(&lower[lo..mid], &lower[mid..hi], &mut upper[h * m + lo..h * m + hi]);
        } else {
            let i = self.members[lo];
            self.blocks[h * m + lo] = (keys.ranks[j + 1][i as usize], i);
        }
        if j + 1 == d {
            *storage += hi - lo;
        } else {
            let subset = self.blocks[h * m + lo..h * m + hi].iter().map(|e| e.1).collect();
            self.next[node] = Some(Box::new(Level::build(j + 1, d, subset, keys, storage)));
        }
    }

    fn collect<'a>(&'a self, apex: &[OrderKey], j: usize, out: &mut dyn FnMut(&'a [Entry])) {
        let start = self.keys.partition_point(|k| *k <= apex[j]);
        self.suffix(1, 0, self.members.len(), 0, start, apex, j, out);
    }

    #[allow(clippy::too_many_arguments)]
    fn suffix<'a>(
        &'a self,
        node: usize,
        lo: usize,
        hi: usize,
        h: usize,
        start: usize,
        apex: &[OrderKey],
        j: usize,
        out: &mut dyn FnMut(&'a [Entry]),
    ) {
        if start >= hi {
            return;
        }
        if start <= lo {
            match self.next.get(node) {
                Some(next) => next.as_ref().expect("every node owns a next level").collect(apex, j + 1, out),
                None => {
                    let m = self.members.len();
                    out(&self.blocks[h * m + lo..h * m + hi]);
                }
            }
            return;
        }
        let mid = (lo + hi) / 2;
        self.suffix(2 * node, lo, mid, h + 1, start, apex, j, out);
        self.suffix(2 * node + 1, mid, hi, h + 1, start, apex, j, out);
    }

    #[cfg(test)]
    fn for_each_list(&self, node: usize, lo: usize, hi: usize, h: usize, f: &mut dyn FnMut(&[u32], &[Entry])) {
        match self.next.get(node) {
            Some(next) => {
                let next = next.as_ref().unwrap();
                next.for_each_list(1, 0, next.members.len(), 0, f);
            }
            None => {
                let m = self.members.len();
                f(&self.members[lo..hi], &self.blocks[h * m + lo..h * m + hi]);
            }
        }
        if hi - lo > 1 {
            let mid = (lo + hi) / 2;
            self.for_each_list(2 * node, lo, mid, h + 1, f);
            self.for_each_list(2 * node + 1, mid, hi, h + 1, f);
        }
    }
}
