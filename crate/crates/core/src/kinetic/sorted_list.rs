//! Kinetic sorted lists.
//!
//! Each element carries the generation of the certificate guarding the pair
//! it forms with its current successor. A queued certificate is live only if
//! the pair is still adjacent and the generation still matches, so replaced
//! certificates never need to be removed from the queue.

/// Dense list over all points, ordered along one projection line.
#[derive(Debug, Clone)]
pub(crate) struct LineList {
    pub(crate) order: Vec<u32>,
    pub(crate) rank: Vec<u32>,
    pub(crate) generation: Vec<u64>,
}

impl LineList {
    pub(crate) fn new(order: Vec<u32>) -> Self {
        let mut rank = vec![0; order.len()];
        for (r, &i) in order.iter().enumerate() {
            rank[i as usize] = r as u32;
        }
        let generation = vec![0; order.len()];
        Self { order, rank, generation }
    }

    pub(crate) fn len(&self) -> usize {
        self.order.len()
    }

    /// Whether `a` directly precedes `b` under certificate `generation`.
    pub(crate) fn is_live(&self, a: u32, b: u32, generation: u64) -> bool {
        let ra = self.rank[a as usize];
        self.generation[a as usize] == generation && ra as usize + 1 < self.len() && self.order[ra as usize + 1] == b
    }

    /// Exchanges the elements at `pos` and `pos + 1`.
    pub(crate) fn swap(&mut self, pos: usize) {
        self.order.swap(pos, pos + 1);
        self.rank[self.order[pos] as usize] = pos as u32;
        self.rank[self.order[pos + 1] as usize] = pos as u32 + 1;
    }
}

/// Short list of one point's graph neighbors, ordered by distance.
#[derive(Debug, Clone, Default)]
pub(crate) struct NeighborList {
    pub(crate) entries: Vec<(u32, u64)>,
}

impl NeighborList {
    pub(crate) fn position(&self, x: u32) -> Option<usize> {
        self.entries.iter().position(|e| e.0 == x)
    }

    pub(crate) fn is_live(&self, a: u32, b: u32, generation: u64) -> bool {
        match self.position(a) {
            Some(i) => self.entries[i].1 == generation && self.entries.get(i + 1).is_some_and(|e| e.0 == b),
            None => false,
        }
    }

    pub(crate) fn ids(&self) -> impl Iterator<Item = u32> + '_ {
        self.entries.iter().map(|e| e.0)
    }

    pub(crate) fn len(&self) -> usize {
        self.entries.len()
    }
}
