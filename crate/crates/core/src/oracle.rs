//! Brute-force reference implementations.
//!
//! Nothing here touches the range trees, the graph builder or the kinetic
//! engine; only distances and cone membership are shared. Everything is
//! quadratic or worse and meant for tests and validation runs.

use std::collections::BTreeMap;

use crate::cone_geometry::{tag, ConeFamily};
use crate::error::{Error, Result};
use crate::ksyg_knn::{KnnTable, ProximityGraph};
use crate::rknn_query::RknnAnswer;
use crate::{squared_distance, PointId, Site};

fn validate_k(n: usize, k: usize) -> Result<()> {
    if n < 2 || k < 1 || k > n - 1 {
        return Err(Error::InvalidParameter(format!("k = {k} invalid for n = {n}")));
    }
    Ok(())
}

/// Per point, the other points sorted by (squared distance, id).
fn sorted_others(points: &[Site]) -> BTreeMap<PointId, Vec<(PointId, f64)>> {
    let mut out = BTreeMap::new();
    for (p, pp) in points {
        let mut row: Vec<(PointId, f64)> = points
            .iter()
            .filter(|(q, _)| q != p)
            .map(|(q, qp)| (*q, squared_distance(pp, qp)))
            .collect();
        row.sort_by(|a, b| a.1.total_cmp(&b.1).then(a.0.cmp(&b.0)));
        out.insert(*p, row);
    }
    out
}

/// All-pairs k nearest neighbors.
pub fn brute_knn(points: &[Site], k: usize) -> Result<KnnTable> {
    validate_k(points.len(), k)?;
    let rows = sorted_others(points)
        .into_iter()
        .map(|(p, mut row)| {
            row.truncate(k);
            (p, row.into_iter().map(|(q, d2)| (q, d2.sqrt())).collect())
        })
        .collect();
    Ok(KnnTable::from_rows(rows))
}

/// The first `k` points of `points ∩ W_l(apex)` by axis projection.
pub fn brute_first_k(points: &[Site], family: &ConeFamily, l: usize, apex: &[f64], apex_tag: i64, k: usize) -> Vec<PointId> {
    let axis = family.dimension();
    let mut inside: Vec<_> = points
        .iter()
        .filter(|(id, pos)| family.contains(l, apex, apex_tag, pos, tag(*id)))
        .map(|(id, pos)| (family.key(l, axis, pos, tag(*id)), *id))
        .collect();
    inside.sort();
    inside.into_iter().take(k).map(|(_, id)| id).collect()
}

/// The k-SYG by a linear wedge scan per point and cone.
pub fn brute_ksyg(points: &[Site], k: usize, family: &ConeFamily) -> Result<ProximityGraph> {
    validate_k(points.len(), k)?;
    let mut graph = ProximityGraph::new();
    for (id, pos) in points {
        for l in 0..family.len() {
            for q in brute_first_k(points, family, l, pos, tag(*id), k) {
                graph.insert(*id, q, l);
            }
        }
    }
    Ok(graph)
}

/// `{p : |pq| ≤ |p p_k|}` evaluated directly.
pub fn brute_rknn(points: &[Site], query: &[f64], k: usize) -> Result<RknnAnswer> {
    validate_k(points.len(), k)?;
    let pos: BTreeMap<PointId, &[f64]> = points.iter().map(|(id, p)| (*id, p.as_slice())).collect();
    let mut members = Vec::new();
    let mut coincident = false;
    for (p, row) in sorted_others(points) {
        let kth = row[k - 1].1;
        let d2 = squared_distance(pos[&p], query);
        coincident |= d2 == 0.0;
        if d2 <= kth {
            members.push(p);
        }
    }
    Ok(RknnAnswer {
        query: query.to_vec(),
        time: 0.0,
        candidates_examined: points.len(),
        members,
        coincident,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn site(id: u32, pos: &[f64]) -> Site {
        (PointId(id), pos.to_vec())
    }

    #[test]
    fn two_points_are_mutual_neighbors() {
        let pts = vec![site(0, &[0.0, 0.0]), site(1, &[3.0, 4.0])];
        let t = brute_knn(&pts, 1).unwrap();
        assert_eq!(t.row(PointId(0)).unwrap(), &[(PointId(1), 5.0)]);
        assert_eq!(t.row(PointId(1)).unwrap(), &[(PointId(0), 5.0)]);
    }

    #[test]
    fn equilateral_ties_prefer_lower_id() {
        let h = 3f64.sqrt() / 2.0;
        let pts = vec![site(0, &[0.0, 0.0]), site(1, &[1.0, 0.0]), site(2, &[0.5, h])];
        let t = brute_knn(&pts, 1).unwrap();
        // Exact ties only where the rounded distances agree.
        assert_eq!(t.row(PointId(2)).unwrap()[0].0, PointId(0));
        let sq = vec![site(0, &[0.0, 0.0]), site(1, &[1.0, 0.0]), site(2, &[0.0, 1.0])];
        let t = brute_knn(&sq, 1).unwrap();
        assert_eq!(t.row(PointId(0)).unwrap()[0].0, PointId(1));
    }

    #[test]
    fn rows_have_length_k() {
        let pts: Vec<Site> = (0..5).map(|i| site(i, &[i as f64 * 0.7, (i * i) as f64])).collect();
        for k in 1..5 {
            let t = brute_knn(&pts, k).unwrap();
            assert!(t.rows().all(|(_, r)| r.len() == k));
        }
        assert!(brute_knn(&pts, 5).is_err());
    }

    #[test]
    fn ksyg_two_points_one_edge() {
        let fam = ConeFamily::with_default_angle(2).unwrap();
        let pts = vec![site(0, &[0.0, 0.0]), site(1, &[1.0, 0.2])];
        assert_eq!(brute_ksyg(&pts, 1, &fam).unwrap().edge_count(), 1);
    }

    #[test]
    fn rknn_definition_examples() {
        let pts = vec![site(0, &[0.0, 0.0]), site(1, &[1.0, 0.0])];
        let ans = brute_rknn(&pts, &[-0.5, 0.0], 1).unwrap();
        assert_eq!(ans.members, vec![PointId(0)]);
        assert!(!ans.coincident);
        let far = brute_rknn(&pts, &[1e6, 1e6], 1).unwrap();
        assert!(far.members.is_empty());
        let on = brute_rknn(&pts, &[1.0, 0.0], 1).unwrap();
        assert!(on.coincident);
        assert_eq!(on.members, vec![PointId(0), PointId(1)]);
    }
}
