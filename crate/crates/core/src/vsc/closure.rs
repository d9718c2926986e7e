use std::collections::BTreeSet;

use crate::event::{Event, EventId};
use crate::order::PartialOrder;
use crate::semantics::visible_writes;

use super::VscInstance;

/// The weakest order refining program order that every witness of `inst`
/// must also refine, or `None` when no such order exists (and hence no
/// witness exists either).
pub fn closure(inst: &VscInstance) -> Option<PartialOrder> {
    let xs = inst.events_with_init();
    let mut p = inst.program_order();
    let reads: Vec<Event> = inst.reads().copied().collect();
    loop {
        let mut changed = false;
        for r in &reads {
            changed |= close_read(inst, &xs, &mut p, r)?;
        }
        if !changed {
            return Some(p);
        }
    }
}

fn close_read(inst: &VscInstance, xs: &[Event], p: &mut PartialOrder, r: &Event) -> Option<bool> {
    let good = inst.good_writes(r.id);
    let mut changed = false;

    let cl = candidates(good, p, xs, r)?;
    if let Some(w) = least(p, &cl) {
        if !p.lt(w, r.id) {
            p.add(w, r.id).ok()?;
            changed = true;
        }
    }

    let cl = candidates(good, p, xs, r)?;
    if let Some(g) = greatest(p, &cl) {
        let bad: Vec<EventId> = bad_writes(good, xs, r)
            .filter(|&b| p.lt(b, r.id) && !p.lt(b, g))
            .collect();
        for b in bad {
            if !p.lt(b, g) {
                p.add(b, g).ok()?;
                changed = true;
            }
        }
    }

    let cl = candidates(good, p, xs, r)?;
    let covered: Vec<EventId> = bad_writes(good, xs, r)
        .filter(|&b| cl.iter().all(|&w| p.lt(w, b)))
        .collect();
    for b in covered {
        if !p.lt(r.id, b) {
            p.add(r.id, b).ok()?;
            changed = true;
        }
    }
    Some(changed)
}

fn candidates(
    good: &BTreeSet<EventId>,
    p: &PartialOrder,
    xs: &[Event],
    r: &Event,
) -> Option<Vec<EventId>> {
    let vis = visible_writes(p, xs, r);
    let cl: Vec<EventId> = good.iter().copied().filter(|w| vis.contains(w)).collect();
    (!cl.is_empty()).then_some(cl)
}

fn bad_writes<'a>(
    good: &'a BTreeSet<EventId>,
    xs: &'a [Event],
    r: &'a Event,
) -> impl Iterator<Item = EventId> + 'a {
    xs.iter()
        .filter(move |w| w.is_write() && w.var == r.var && !good.contains(&w.id))
        .map(|w| w.id)
}

fn least(p: &PartialOrder, set: &[EventId]) -> Option<EventId> {
    set.iter()
        .copied()
        .find(|&w| set.iter().all(|&o| o == w || p.lt(w, o)))
}

fn greatest(p: &PartialOrder, set: &[EventId]) -> Option<EventId> {
    set.iter()
        .copied()
        .find(|&w| set.iter().all(|&o| o == w || p.lt(o, w)))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::event::{EventKind, VarId};
    use std::collections::BTreeMap;

    fn ev(t: u32, i: u32, kind: EventKind, var: u32) -> Event {
        Event::new(EventId::new(t, i), kind, VarId(var), 1)
    }

    fn inst(events: Vec<Event>, good: &[(EventId, &[EventId])]) -> VscInstance {
        let map: BTreeMap<EventId, BTreeSet<EventId>> = good
            .iter()
            .map(|(r, ws)| (*r, ws.iter().copied().collect()))
            .collect();
        VscInstance::new(events, map).unwrap()
    }

    #[test]
    fn cyclic_instance_has_no_closure() {
        let x = EventId::init(VarId(0));
        let y = EventId::init(VarId(1));
        let i = inst(
            vec![
                ev(1, 1, EventKind::Write, 0),
                ev(1, 2, EventKind::Read, 1),
                ev(2, 1, EventKind::Write, 1),
                ev(2, 2, EventKind::Read, 0),
            ],
            &[(EventId::new(1, 2), &[y]), (EventId::new(2, 2), &[x])],
        );
        assert!(closure(&i).is_none());
    }

    #[test]
    fn single_good_write_precedes_read() {
        let w = EventId::new(1, 1);
        let r = EventId::new(2, 1);
        let i = inst(
            vec![ev(1, 1, EventKind::Write, 0), ev(2, 1, EventKind::Read, 0)],
            &[(r, &[w])],
        );
        let p = closure(&i).unwrap();
        assert!(p.lt(w, r));
    }

    #[test]
    fn release_precedes_acquire_reading_it() {
        let m = VarId(0);
        let acq1 = EventId::new(1, 1);
        let rel1 = EventId::new(1, 2);
        let acq2 = EventId::new(2, 1);
        let i = inst(
            vec![
                ev(1, 1, EventKind::Acquire, 0),
                ev(1, 2, EventKind::Release, 0),
                ev(2, 1, EventKind::Acquire, 0),
            ],
            &[(acq1, &[EventId::init(m)]), (acq2, &[rel1])],
        );
        let p = closure(&i).unwrap();
        assert!(p.lt(rel1, acq2));
        assert!(p.lt(acq1, acq2));
    }

    #[test]
    fn covered_bad_write_is_ordered_after_read() {
        // r must read init; the write of the other thread is bad, and the
        // only candidate (init) precedes it, so r < w.
        let w = EventId::new(1, 1);
        let r = EventId::new(2, 1);
        let i = inst(
            vec![ev(1, 1, EventKind::Write, 0), ev(2, 1, EventKind::Read, 0)],
            &[(r, &[EventId::init(VarId(0))])],
        );
        let p = closure(&i).unwrap();
        assert!(p.lt(r, w));
    }

    #[test]
    fn singleton_candidate_is_least_and_greatest() {
        // t1: w1(x) w2(x); t2: r(x) with GoodW = {w2}. The bad w1 is below
        // r once w2 < r, and must stay below w2 (already true by PO).
        let w1 = EventId::new(1, 1);
        let w2 = EventId::new(1, 2);
        let r = EventId::new(2, 1);
        let i = inst(
            vec![
                ev(1, 1, EventKind::Write, 0),
                ev(1, 2, EventKind::Write, 0),
                ev(2, 1, EventKind::Read, 0),
            ],
            &[(r, &[w2])],
        );
        let p = closure(&i).unwrap();
        assert!(p.lt(w2, r) && p.lt(w1, r));
        assert!(p.is_strict_order());
    }
}
