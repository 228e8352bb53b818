//! Reverse k-nearest-neighbor (RkNN) queries over points that move along
//! polynomial trajectories.
//!
//! The static pipeline partitions space into a family of narrow cones
//! ([`cone_geometry`]), builds one augmented range tree per cone
//! ([`range_tree`]), reports the k-Semi-Yao graph (k-SYG) and derives every
//! point's ordered k nearest neighbors from it ([`ksyg_knn`]). The kinetic
//! engine ([`kinetic`]) keeps the same structures valid while the points move
//! by processing swap certificates in time order, and [`rknn_query`] answers
//! RkNN queries from either representation.
//!
//! [`oracle`] holds brute-force reference implementations used by the tests
//! and by the `validate` command of the CLI.

pub mod cone_geometry;
pub mod dataset;
pub mod error;
pub mod kinetic;
pub mod ksyg_knn;
pub mod oracle;
pub mod range_tree;
pub mod rknn_query;
pub mod trajectories;

pub use cone_geometry::{Cone, ConeFamily, OrderKey};
pub use error::{Error, Result};
pub use kinetic::{KineticState, EventReport, KineticStats};
pub use ksyg_knn::{KnnTable, ProximityGraph};
pub use range_tree::{AugmentedRangeTree, CandidateSet};
pub use rknn_query::RknnAnswer;
pub use trajectories::{Polynomial, RootList, Trajectory};

use std::fmt;

/// Identity of a data point. Ties in every ordering are broken by this value.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct PointId(pub u32);

impl fmt::Display for PointId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

/// A point id together with its position at some fixed time.
pub type Site = (PointId, Vec<f64>);

/// Squared Euclidean distance.
#[inline]
pub fn squared_distance(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}
