//! Certificates and the event queue ordering.

use std::cmp::Ordering;

use crate::trajectories::{real_roots, Polynomial};

/// What a scheduled certificate guards.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
pub(crate) enum Cert {
    /// `a` directly precedes `b` in the sorted list of a projection line.
    Line { line: u32, a: u32, b: u32 },
    /// `a` directly precedes `b` in `owner`'s neighbor list.
    Distance { owner: u32, a: u32, b: u32 },
}

pub(crate) const KIND_U: u8 = 0;
pub(crate) const KIND_X: u8 = 1;
pub(crate) const KIND_DISTANCE: u8 = 2;

#[derive(Debug, Clone, Copy)]
pub(crate) struct Event {
    pub(crate) time: f64,
    pub(crate) kind: u8,
    pub(crate) cone: u32,
    pub(crate) lo: u32,
    pub(crate) hi: u32,
    pub(crate) cert: Cert,
    pub(crate) generation: u64,
}

impl Event {
    fn sort_key(&self) -> (u8, u32, u32, u32, Cert, u64) {
        (self.kind, self.cone, self.lo, self.hi, self.cert, self.generation)
    }
}

impl PartialEq for Event {
    fn eq(&self, other: &Self) -> bool {
        self.cmp(other) == Ordering::Equal
    }
}

impl Eq for Event {}

impl PartialOrd for Event {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for Event {
    fn cmp(&self, other: &Self) -> Ordering {
        self.time
            .total_cmp(&other.time)
            .then_with(|| self.sort_key().cmp(&other.sort_key()))
    }
}

/// First time after `t` at which an ordered pair stops being ordered.
///
/// `gap` is positive while the pair is in order. When it vanishes
/// identically, `fallback` (the tie-breaking projection) decides instead.
/// Even roots, where the gap touches zero and recovers, are not failures.
pub(crate) fn failure_time(gap: &Polynomial, fallback: Option<&Polynomial>, t: f64) -> Option<f64> {
    let f = if !gap.is_zero() {
        gap
    } else {
        fallback.filter(|h| !h.is_zero())?
    };
    let bound = f.root_bound();
    if !(bound > t) {
        return None;
    }
    let roots = real_roots(f, t, bound).times();
    for (i, &r) in roots.iter().enumerate() {
        let next = roots.get(i + 1).copied().unwrap_or(r + 1.0);
        if f.eval(r + 0.5 * (next - r)) < 0.0 {
            return Some(r);
        }
    }
    None
}
