//! Reverse k-nearest-neighbor queries.
//!
//! A point `p` has `q` among its k nearest neighbors only if `p` is one of the
//! first `k` points of `P ∩ W_l(q)` for some cone `l`, so the union of those
//! per-cone heads is a complete candidate set of size at most `c·k`.

use std::collections::{BTreeSet, HashMap};

use crate::cone_geometry::{ConeFamily, QUERY_TAG};
use crate::error::{Error, Result};
use crate::kinetic::KineticState;
use crate::ksyg_knn::{self, KnnTable, ProximityGraph};
use crate::range_tree::AugmentedRangeTree;
use crate::{squared_distance, PointId, Site};

#[derive(Debug, Clone, PartialEq)]
pub struct RknnAnswer {
    pub query: Vec<f64>,
    pub time: f64,
    /// Ascending ids.
    pub members: Vec<PointId>,
    pub candidates_examined: usize,
    /// Set when the query sits exactly on a data point.
    pub coincident: bool,
}

/// Filters candidates by `|pq|² ≤ |p p_k|²`.
fn filter<'a>(
    candidates: BTreeSet<PointId>,
    query: &[f64],
    position: impl Fn(PointId) -> &'a [f64],
    kth: impl Fn(PointId) -> Option<PointId>,
) -> Result<(Vec<PointId>, bool)> {
    let mut members = Vec::new();
    let mut coincident = false;
    for p in candidates {
        let pp = position(p);
        let d2 = squared_distance(pp, query);
        coincident |= d2 == 0.0;
        let pk = kth(p).ok_or_else(|| Error::InvalidInput(format!("no neighbor row for {p}")))?;
        if d2 <= squared_distance(pp, position(pk)) {
            members.push(p);
        }
    }
    Ok((members, coincident))
}

/// The first `k` heads of a cone that do not sit exactly on the query.
///
/// Points coincident with the query tie with it at distance zero, so they
/// cannot shield anything behind them; extra heads are fetched for each one.
fn cone_candidates<'a>(
    query: &[f64],
    k: usize,
    position: impl Fn(PointId) -> &'a [f64],
    mut heads: impl FnMut(usize) -> Result<Vec<PointId>>,
) -> Result<Vec<PointId>> {
    let mut want = k;
    loop {
        let got = heads(want)?;
        let on_query = got.iter().filter(|&&p| squared_distance(position(p), query) == 0.0).count();
        if got.len() < want || got.len() >= k + on_query {
            return Ok(got);
        }
        want = k + on_query;
    }
}

fn check_query(family: &ConeFamily, query: &[f64]) -> Result<()> {
    if query.len() != family.dimension() {
        return Err(Error::InvalidInput(format!(
            "query has dimension {}, expected {}",
            query.len(),
            family.dimension()
        )));
    }
    if query.iter().any(|c| !c.is_finite()) {
        return Err(Error::InvalidInput("query coordinates must be finite".into()));
    }
    Ok(())
}

/// Answers a query against static structures built for `points`.
pub fn rknn_static(
    points: &[Site],
    knn: &KnnTable,
    trees: &[AugmentedRangeTree],
    family: &ConeFamily,
    query: &[f64],
    k: usize,
) -> Result<RknnAnswer> {
    check_query(family, query)?;
    ksyg_knn::check_k(points.len(), k)?;
    let pos: HashMap<PointId, &[f64]> = points.iter().map(|(id, p)| (*id, p.as_slice())).collect();
    let mut candidates = BTreeSet::new();
    for tree in trees {
        candidates.extend(cone_candidates(query, k, |p| pos[&p], |m| {
            Ok(tree.first_k(family, query, QUERY_TAG, m)?.points)
        })?);
    }
    let examined = candidates.len();
    let (members, coincident) = filter(
        candidates,
        query,
        |p| pos[&p],
        |p| knn.row(p).and_then(|r| r.get(k - 1)).map(|e| e.0),
    )?;
    Ok(RknnAnswer {
        query: query.to_vec(),
        time: 0.0,
        members,
        candidates_examined: examined,
        coincident,
    })
}

/// Trees and kNN table for one snapshot, ready for repeated queries.
#[derive(Debug, Clone)]
pub struct StaticIndex {
    family: ConeFamily,
    points: Vec<Site>,
    trees: Vec<AugmentedRangeTree>,
    graph: ProximityGraph,
    knn: KnnTable,
    k: usize,
}

impl StaticIndex {
    pub fn build(points: Vec<Site>, k: usize, family: ConeFamily) -> Result<Self> {
        ksyg_knn::check_k(points.len(), k)?;
        let trees = ksyg_knn::build_trees(&points, &family)?;
        let graph = ksyg_knn::ksyg_from_trees(&points, k, &family, &trees)?;
        let knn = ksyg_knn::all_knn(&graph, &points, k)?;
        Ok(Self { family, points, trees, graph, knn, k })
    }

    pub fn graph(&self) -> &ProximityGraph {
        &self.graph
    }

    pub fn knn(&self) -> &KnnTable {
        &self.knn
    }

    pub fn trees(&self) -> &[AugmentedRangeTree] {
        &self.trees
    }

    pub fn points(&self) -> &[Site] {
        &self.points
    }

    pub fn query(&self, query: &[f64]) -> Result<RknnAnswer> {
        rknn_static(&self.points, &self.knn, &self.trees, &self.family, query, self.k)
    }
}

/// Advances `state` to `time` and answers on the kinetic structures.
pub fn rknn_kinetic(state: &mut KineticState, query: &[f64], k: usize, time: f64) -> Result<RknnAnswer> {
    check_query(state.family(), query)?;
    if k != state.k() {
        return Err(Error::InvalidParameter(format!(
            "state maintains k = {}, query asked for {k}",
            state.k()
        )));
    }
    state.advance(time)?;
    let positions = state.positions();
    let pos: HashMap<PointId, &[f64]> = positions.iter().map(|(id, p)| (*id, p.as_slice())).collect();
    let mut candidates = BTreeSet::new();
    for l in 0..state.family().len() {
        candidates.extend(cone_candidates(query, k, |p| pos[&p], |m| {
            Ok(state.external_first_k(l, query, m))
        })?);
    }
    let examined = candidates.len();
    let (members, coincident) = filter(candidates, query, |p| pos[&p], |p| state.kth_neighbor(p))?;
    Ok(RknnAnswer {
        query: query.to_vec(),
        time,
        members,
        candidates_examined: examined,
        coincident,
    })
}
