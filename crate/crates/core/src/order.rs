//! Strict partial orders over event identifiers.

use std::collections::{BTreeSet, HashMap};

use fixedbitset::FixedBitSet;

use crate::event::EventId;

#[derive(Debug, Clone, Copy, PartialEq, Eq, thiserror::Error)]
#[error("ordering {0} before {1} closes a cycle")]
pub struct CycleError(pub EventId, pub EventId);

/// A strict partial order, kept transitively closed.
///
/// `succ[i]` holds every `j` with `elems[i] < elems[j]`.
#[derive(Clone, Debug)]
pub struct PartialOrder {
    elems: Vec<EventId>,
    index: HashMap<EventId, usize>,
    succ: Vec<FixedBitSet>,
}

impl PartialOrder {
    /// The empty relation over `elems` (duplicates are dropped).
    pub fn new(elems: impl IntoIterator<Item = EventId>) -> Self {
        let mut order = Vec::new();
        let mut index = HashMap::new();
        for e in elems {
            if let std::collections::hash_map::Entry::Vacant(slot) = index.entry(e) {
                slot.insert(order.len());
                order.push(e);
            }
        }
        let n = order.len();
        PartialOrder {
            elems: order,
            index,
            succ: vec![FixedBitSet::with_capacity(n); n],
        }
    }

    /// Program order over `elems`: events of one thread are ordered by
    /// index and init events (thread 0) precede every program event.
    pub fn program_order(elems: impl IntoIterator<Item = EventId>) -> Self {
        let mut p = PartialOrder::new(elems);
        let n = p.elems.len();
        for i in 0..n {
            for j in 0..n {
                let (a, b) = (p.elems[i], p.elems[j]);
                let ordered = if a.is_init() {
                    !b.is_init()
                } else {
                    a.thread == b.thread && a.index < b.index
                };
                if ordered {
                    p.succ[i].insert(j);
                }
            }
        }
        p
    }

    /// The total order of a sequence.
    pub fn total(seq: &[EventId]) -> Self {
        let mut p = PartialOrder::new(seq.iter().copied());
        let n = p.elems.len();
        for i in 0..n {
            for j in i + 1..n {
                p.succ[i].insert(j);
            }
        }
        p
    }

    /// Builds the order from per-element strict-predecessor sets, which
    /// must already be transitively closed.
    pub(crate) fn from_predecessors(elems: Vec<EventId>, preds: &[FixedBitSet]) -> Self {
        let mut p = PartialOrder::new(elems);
        for (j, pj) in preds.iter().enumerate() {
            for i in pj.ones() {
                p.succ[i].insert(j);
            }
        }
        p
    }

    pub fn len(&self) -> usize {
        self.elems.len()
    }

    pub fn is_empty(&self) -> bool {
        self.elems.is_empty()
    }

    pub fn elements(&self) -> &[EventId] {
        &self.elems
    }

    pub fn contains(&self, e: EventId) -> bool {
        self.index.contains_key(&e)
    }

    pub fn position(&self, e: EventId) -> Option<usize> {
        self.index.get(&e).copied()
    }

    /// `a <_P b`. False when either element is unknown.
    pub fn lt(&self, a: EventId, b: EventId) -> bool {
        match (self.index.get(&a), self.index.get(&b)) {
            (Some(&i), Some(&j)) => self.succ[i].contains(j),
            _ => false,
        }
    }

    pub fn le(&self, a: EventId, b: EventId) -> bool {
        a == b || self.lt(a, b)
    }

    pub fn unordered(&self, a: EventId, b: EventId) -> bool {
        a != b && !self.lt(a, b) && !self.lt(b, a)
    }

    /// Adds `a < b` and everything transitivity then requires. Returns
    /// whether the relation grew.
    pub fn add(&mut self, a: EventId, b: EventId) -> Result<bool, CycleError> {
        let (i, j) = match (self.index.get(&a), self.index.get(&b)) {
            (Some(&i), Some(&j)) => (i, j),
            _ => panic!("ordering unknown events {a} and {b}"),
        };
        self.add_idx(i, j)
    }

    pub(crate) fn add_idx(&mut self, i: usize, j: usize) -> Result<bool, CycleError> {
        if i == j || self.succ[j].contains(i) {
            return Err(CycleError(self.elems[i], self.elems[j]));
        }
        if self.succ[i].contains(j) {
            return Ok(false);
        }
        let mut below = self.succ[j].clone();
        below.insert(j);
        for x in 0..self.elems.len() {
            if x == i || self.succ[x].contains(i) {
                self.succ[x].union_with(&below);
            }
        }
        Ok(true)
    }

    /// All ordered pairs `(a, b)` with `a < b`.
    pub fn pairs(&self) -> impl Iterator<Item = (EventId, EventId)> + '_ {
        self.succ
            .iter()
            .enumerate()
            .flat_map(move |(i, s)| s.ones().map(move |j| (self.elems[i], self.elems[j])))
    }

    /// Strict successors of `e`.
    pub fn successors(&self, e: EventId) -> Vec<EventId> {
        match self.index.get(&e) {
            Some(&i) => self.succ[i].ones().map(|j| self.elems[j]).collect(),
            None => Vec::new(),
        }
    }

    /// Strict predecessors of `e`.
    pub fn predecessors(&self, e: EventId) -> Vec<EventId> {
        match self.index.get(&e) {
            Some(&j) => (0..self.elems.len())
                .filter(|&i| self.succ[i].contains(j))
                .map(|i| self.elems[i])
                .collect(),
            None => Vec::new(),
        }
    }

    /// `self ⊑ other`: every pair ordered by `other` is ordered the same
    /// way by `self`.
    pub fn refines(&self, other: &PartialOrder) -> bool {
        other.pairs().all(|(a, b)| self.lt(a, b))
    }

    /// Restriction to the elements of `ys` that belong to `self`.
    pub fn project(&self, ys: &[EventId]) -> PartialOrder {
        let mut p = PartialOrder::new(ys.iter().copied().filter(|y| self.contains(*y)));
        let n = p.elems.len();
        for i in 0..n {
            for j in 0..n {
                if self.lt(p.elems[i], p.elems[j]) {
                    p.succ[i].insert(j);
                }
            }
        }
        p
    }

    /// Irreflexive and transitive (antisymmetry follows).
    pub fn is_strict_order(&self) -> bool {
        let n = self.elems.len();
        (0..n).all(|i| !self.succ[i].contains(i))
            && (0..n).all(|i| {
                self.succ[i]
                    .ones()
                    .all(|j| self.succ[j].is_subset(&self.succ[i]))
            })
    }
}

/// Whether `xs` is downward closed in `p`: every `p`-predecessor of a
/// member of `xs` is also in `xs`.
pub fn is_lower_set(xs: &[EventId], p: &PartialOrder) -> bool {
    let set: BTreeSet<EventId> = xs.iter().copied().collect();
    xs.iter()
        .all(|&x| p.predecessors(x).into_iter().all(|y| set.contains(&y)))
}

/// `q ⊑ p`.
pub fn refines(q: &PartialOrder, p: &PartialOrder) -> bool {
    q.refines(p)
}

/// `p | ys`.
pub fn project(p: &PartialOrder, ys: &[EventId]) -> PartialOrder {
    p.project(ys)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn id(t: u32, i: u32) -> EventId {
        EventId::new(t, i)
    }

    #[test]
    fn empty_set_is_lower_set() {
        let po = PartialOrder::program_order([id(1, 1), id(1, 2)]);
        assert!(is_lower_set(&[], &po));
    }

    #[test]
    fn missing_predecessor_breaks_lower_set() {
        let po = PartialOrder::program_order([id(1, 1), id(1, 2), id(2, 1)]);
        assert!(!is_lower_set(&[id(1, 2)], &po));
        assert!(is_lower_set(&[id(1, 1), id(2, 1)], &po));
    }

    #[test]
    fn total_order_refines_its_sub_orders() {
        let seq = [id(1, 1), id(2, 1), id(1, 2), id(2, 2)];
        let total = PartialOrder::total(&seq);
        let sub = total.project(&[id(1, 1), id(1, 2), id(2, 2)]);
        assert!(total.refines(&sub));
        assert!(refines(&total, &PartialOrder::program_order(seq)));
        assert!(!PartialOrder::program_order(seq).refines(&total));
    }

    #[test]
    fn add_closes_transitively_and_detects_cycles() {
        let mut p = PartialOrder::new([id(1, 1), id(2, 1), id(3, 1)]);
        assert!(p.add(id(1, 1), id(2, 1)).unwrap());
        assert!(p.add(id(2, 1), id(3, 1)).unwrap());
        assert!(p.lt(id(1, 1), id(3, 1)));
        assert!(!p.add(id(1, 1), id(3, 1)).unwrap());
        assert!(p.add(id(3, 1), id(1, 1)).is_err());
        assert!(p.is_strict_order());
    }

    proptest! {
        #[test]
        fn random_additions_stay_strict(edges in proptest::collection::vec((0u32..6, 0u32..6), 0..20)) {
            let elems: Vec<EventId> = (0..6).map(|i| id(1 + i % 2, i)).collect();
            let mut p = PartialOrder::new(elems.iter().copied());
            for (a, b) in edges {
                let _ = p.add(elems[a as usize], elems[b as usize]);
                prop_assert!(p.is_strict_order());
            }
        }
    }
}
