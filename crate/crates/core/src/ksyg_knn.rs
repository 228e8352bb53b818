//! k-Semi-Yao graph construction and all-kNN reporting.
//!
//! Each point `p` is joined, in every cone `W_l(p)`, to the first `k` points
//! of `P ∩ W_l(p)` by axis projection. Every k-nearest-neighbor edge appears
//! in this graph, so sorting the incident edges of each point by length
//! yields its ordered k nearest neighbors.

use std::collections::{BTreeMap, BTreeSet, HashMap};

use crate::cone_geometry::{tag, ConeFamily};
use crate::error::{Error, Result};
use crate::oracle;
use crate::range_tree::AugmentedRangeTree;
use crate::{squared_distance, PointId, Site};

/// Which endpoint selected an edge, and in which of its cones.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Origin {
    pub from: PointId,
    pub cone: usize,
}

/// Undirected graph with per-edge selection records.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct ProximityGraph {
    edges: BTreeMap<(PointId, PointId), Vec<Origin>>,
    adjacency: BTreeMap<PointId, BTreeSet<PointId>>,
}

fn edge_key(a: PointId, b: PointId) -> (PointId, PointId) {
    if a < b {
        (a, b)
    } else {
        (b, a)
    }
}

impl ProximityGraph {
    pub fn new() -> Self {
        Self::default()
    }

    /// Records that `from` selected `to` in cone `cone`.
    pub fn insert(&mut self, from: PointId, to: PointId, cone: usize) {
        let origins = self.edges.entry(edge_key(from, to)).or_default();
        let origin = Origin { from, cone };
        if let Err(pos) = origins.binary_search(&origin) {
            origins.insert(pos, origin);
        }
        self.adjacency.entry(from).or_default().insert(to);
        self.adjacency.entry(to).or_default().insert(from);
    }

    /// Inserts an undirected edge without origin information.
    pub fn insert_undirected(&mut self, a: PointId, b: PointId) {
        self.edges.entry(edge_key(a, b)).or_default();
        self.adjacency.entry(a).or_default().insert(b);
        self.adjacency.entry(b).or_default().insert(a);
    }

    pub fn remove_edge(&mut self, a: PointId, b: PointId) -> bool {
        if self.edges.remove(&edge_key(a, b)).is_none() {
            return false;
        }
        for (x, y) in [(a, b), (b, a)] {
            if let Some(set) = self.adjacency.get_mut(&x) {
                set.remove(&y);
            }
        }
        true
    }

    pub fn contains(&self, a: PointId, b: PointId) -> bool {
        self.edges.contains_key(&edge_key(a, b))
    }

    pub fn edge_count(&self) -> usize {
        self.edges.len()
    }

    /// Edges as `(smaller id, larger id)`, ascending.
    pub fn edges(&self) -> impl Iterator<Item = (PointId, PointId)> + '_ {
        self.edges.keys().copied()
    }

    pub fn origins(&self, a: PointId, b: PointId) -> &[Origin] {
        self.edges.get(&edge_key(a, b)).map_or(&[], Vec::as_slice)
    }

    /// `E_p`: the neighbors of `p`.
    pub fn neighbors(&self, p: PointId) -> impl Iterator<Item = PointId> + '_ {
        self.adjacency.get(&p).into_iter().flatten().copied()
    }

    pub fn vertices(&self) -> impl Iterator<Item = PointId> + '_ {
        self.adjacency.keys().copied()
    }

    /// Whether both graphs have the same undirected edge set.
    pub fn same_edges(&self, other: &ProximityGraph) -> bool {
        self.edges.keys().eq(other.edges.keys())
    }
}

/// Per point, its nearest neighbors in ascending distance (ties by id).
#[derive(Debug, Clone, PartialEq, Default)]
pub struct KnnTable {
    rows: BTreeMap<PointId, Vec<(PointId, f64)>>,
}

impl KnnTable {
    pub fn from_rows(rows: BTreeMap<PointId, Vec<(PointId, f64)>>) -> Self {
        Self { rows }
    }

    pub fn row(&self, p: PointId) -> Option<&[(PointId, f64)]> {
        self.rows.get(&p).map(Vec::as_slice)
    }

    pub fn rows(&self) -> impl Iterator<Item = (PointId, &[(PointId, f64)])> + '_ {
        self.rows.iter().map(|(p, r)| (*p, r.as_slice()))
    }

    /// `|p p_k|`, the distance to the last listed neighbor.
    pub fn kth_distance(&self, p: PointId) -> Option<f64> {
        self.rows.get(&p).and_then(|r| r.last()).map(|&(_, d)| d)
    }

    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }
}

pub(crate) fn check_k(n: usize, k: usize) -> Result<()> {
    if n < 2 {
        return Err(Error::InvalidInput(format!("need at least two points, got {n}")));
    }
    if k < 1 || k > n - 1 {
        return Err(Error::InvalidParameter(format!("k = {k} outside [1, {}]", n - 1)));
    }
    Ok(())
}

/// One range tree per cone.
pub fn build_trees(points: &[Site], family: &ConeFamily) -> Result<Vec<AugmentedRangeTree>> {
    (0..family.len())
        .map(|l| AugmentedRangeTree::build(points, family, l))
        .collect()
}

/// The k-SYG of `points`.
pub fn build_ksyg(points: &[Site], k: usize, family: &ConeFamily) -> Result<ProximityGraph> {
    check_k(points.len(), k)?;
    let trees = build_trees(points, family)?;
    ksyg_from_trees(points, k, family, &trees)
}

pub fn ksyg_from_trees(points: &[Site], k: usize, family: &ConeFamily, trees: &[AugmentedRangeTree]) -> Result<ProximityGraph> {
    let mut graph = ProximityGraph::new();
    for (id, pos) in points {
        for tree in trees {
            let cands = tree.first_k(family, pos, tag(*id), k + 1)?;
            for q in cands.points.into_iter().filter(|q| q != id).take(k) {
                graph.insert(*id, q, tree.cone());
            }
        }
    }
    Ok(graph)
}

pub(crate) fn sort_row(row: &mut [(PointId, f64)]) {
    row.sort_by(|a, b| a.1.total_cmp(&b.1).then(a.0.cmp(&b.0)));
}

/// All k nearest neighbors, read off the incident edges of each point.
pub fn all_knn(graph: &ProximityGraph, points: &[Site], k: usize) -> Result<KnnTable> {
    let pos: HashMap<PointId, &[f64]> = points.iter().map(|(id, p)| (*id, p.as_slice())).collect();
    if let Some(v) = graph.vertices().find(|v| !pos.contains_key(v)) {
        return Err(Error::InvalidInput(format!("graph vertex {v} has no position")));
    }
    let mut rows = BTreeMap::new();
    for (id, p) in points {
        let mut row: Vec<(PointId, f64)> = graph
            .neighbors(*id)
            .map(|q| (q, squared_distance(p, pos[&q])))
            .collect();
        sort_row(&mut row);
        row.truncate(k);
        for e in &mut row {
            e.1 = e.1.sqrt();
        }
        rows.insert(*id, row);
    }
    Ok(KnnTable { rows })
}

/// Whether every k-nearest-neighbor edge is present in `graph`.
pub fn knng_subgraph_check(graph: &ProximityGraph, points: &[Site], k: usize) -> bool {
    let Ok(table) = oracle::brute_knn(points, k) else {
        return false;
    };
    let ok = table
        .rows()
        .all(|(p, row)| row.iter().all(|&(q, _)| graph.contains(p, q)));
    ok
}
