//! Derived relations over traces: reads-from, causal order, visible writes
//! and canonical keys of the trace equivalences.

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::fmt;
use std::hash::{DefaultHasher, Hash, Hasher};

use fixedbitset::FixedBitSet;

use crate::event::{Event, EventId, EventKind, VarId};
use crate::order::PartialOrder;

/// Maps each read of `trace` to the write it observes. Reads with no
/// earlier conflicting write map to the init write of their variable.
pub fn reads_from(trace: &[Event]) -> BTreeMap<EventId, EventId> {
    let mut last: BTreeMap<VarId, EventId> = BTreeMap::new();
    let mut rf = BTreeMap::new();
    for e in trace {
        if e.is_read() {
            let w = last.get(&e.var).copied().unwrap_or(EventId::init(e.var));
            rf.insert(e.id, w);
        } else {
            last.insert(e.var, e.id);
        }
    }
    rf
}

/// Init writes of every variable touched by `events`, in variable order.
pub fn init_writes<'a>(events: impl IntoIterator<Item = &'a Event>) -> Vec<Event> {
    let vars: BTreeSet<VarId> = events.into_iter().map(|e| e.var).collect();
    vars.into_iter().map(Event::init).collect()
}

/// Causal order of a trace, over the trace's events plus the init writes
/// of the variables it touches.
pub fn causal_order(trace: &[Event]) -> PartialOrder {
    let inits = init_writes(trace);
    let mut elems: Vec<EventId> = inits.iter().map(|e| e.id).collect();
    elems.extend(trace.iter().map(|e| e.id));
    let n = elems.len();
    let base = inits.len();

    let mut pos: BTreeMap<EventId, usize> = BTreeMap::new();
    for (i, id) in elems.iter().enumerate() {
        pos.insert(*id, i);
    }
    let mut init_set = FixedBitSet::with_capacity(n);
    init_set.insert_range(0..base);

    let rf = reads_from(trace);
    let mut last_of_thread: BTreeMap<u32, usize> = BTreeMap::new();
    let mut preds = vec![FixedBitSet::with_capacity(n); n];
    for (k, e) in trace.iter().enumerate() {
        let i = base + k;
        let mut p = init_set.clone();
        if let Some(&prev) = last_of_thread.get(&e.thread()) {
            p.union_with(&preds[prev]);
            p.insert(prev);
        }
        if let Some(w) = rf.get(&e.id) {
            let j = pos[w];
            if j != i {
                let pj = preds[j].clone();
                p.union_with(&pj);
                p.insert(j);
            }
        }
        preds[i] = p;
        last_of_thread.insert(e.thread(), i);
    }
    PartialOrder::from_predecessors(elems, &preds)
}

/// Writes of `xs` that `r` may still observe under `p`: conflicting with
/// `r`, not after `r`, and not hidden behind another conflicting write
/// that is itself before `r`.
pub fn visible_writes(p: &PartialOrder, xs: &[Event], r: &Event) -> BTreeSet<EventId> {
    let writes: Vec<EventId> = xs
        .iter()
        .filter(|w| w.is_write() && w.conflicts(r))
        .map(|w| w.id)
        .collect();
    writes
        .iter()
        .copied()
        .filter(|&w| !p.lt(r.id, w))
        .filter(|&w| writes.iter().all(|&w2| !(p.lt(w, w2) && p.lt(w2, r.id))))
        .collect()
}

fn fingerprint_of<T: Hash>(value: &T) -> u128 {
    let mut a = DefaultHasher::new();
    value.hash(&mut a);
    let mut b = DefaultHasher::new();
    0x9e37_79b9_7f4a_7c15u64.hash(&mut b);
    value.hash(&mut b);
    ((a.finish() as u128) << 64) | b.finish() as u128
}

fn sorted_events(trace: &[Event]) -> Vec<(EventId, EventKind, VarId)> {
    let mut ev: Vec<_> = trace.iter().map(|e| (e.id, e.kind, e.var)).collect();
    ev.sort();
    ev
}

fn write_events(f: &mut fmt::Formatter<'_>, events: &[(EventId, EventKind, VarId)]) -> fmt::Result {
    write!(f, "events=[")?;
    for (i, (id, kind, var)) in events.iter().enumerate() {
        if i > 0 {
            write!(f, " ")?;
        }
        let k = match kind {
            EventKind::Read => 'R',
            EventKind::Write => 'W',
            EventKind::Acquire => 'A',
            EventKind::Release => 'U',
        };
        write!(f, "{id}{k}{var}")?;
    }
    write!(f, "]")
}

/// Same events, same values, same causal order among reads.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct RvfKey {
    pub events: Vec<(EventId, EventKind, VarId)>,
    pub values: Vec<(EventId, i64)>,
    pub read_order: Vec<(EventId, EventId)>,
}

/// Same events, same reads-from function.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct RfKey {
    pub events: Vec<(EventId, EventKind, VarId)>,
    pub reads_from: Vec<(EventId, EventId)>,
}

/// Same events, same orientation of every conflicting pair.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct MazKey {
    pub events: Vec<(EventId, EventKind, VarId)>,
    pub conflicts: Vec<(EventId, EventId)>,
}

impl RvfKey {
    pub fn fingerprint(&self) -> u128 {
        fingerprint_of(self)
    }
}

impl RfKey {
    pub fn fingerprint(&self) -> u128 {
        fingerprint_of(self)
    }
}

impl MazKey {
    pub fn fingerprint(&self) -> u128 {
        fingerprint_of(self)
    }
}

pub fn rvf_key(trace: &[Event]) -> RvfKey {
    let mut values: Vec<(EventId, i64)> = trace.iter().map(|e| (e.id, e.value)).collect();
    values.sort();

    // Forward pass: the reads (by trace position) below each event.
    let n = trace.len();
    let mut below = vec![FixedBitSet::with_capacity(n); n];
    let mut last_of_thread: HashMap<u32, usize> = HashMap::new();
    let mut last_write: HashMap<VarId, usize> = HashMap::new();
    for (i, e) in trace.iter().enumerate() {
        let mut set = FixedBitSet::with_capacity(n);
        if let Some(&prev) = last_of_thread.get(&e.thread()) {
            set.union_with(&below[prev]);
            if trace[prev].is_read() {
                set.insert(prev);
            }
        }
        if e.is_read() {
            if let Some(&w) = last_write.get(&e.var) {
                set.union_with(&below[w]);
            }
        } else {
            last_write.insert(e.var, i);
        }
        below[i] = set;
        last_of_thread.insert(e.thread(), i);
    }
    let mut read_order: Vec<(EventId, EventId)> = trace
        .iter()
        .enumerate()
        .filter(|(_, e)| e.is_read())
        .flat_map(|(i, b)| below[i].ones().map(move |a| (a, b.id)))
        .map(|(a, b)| (trace[a].id, b))
        .collect();
    read_order.sort();
    RvfKey {
        events: sorted_events(trace),
        values,
        read_order,
    }
}

pub fn rf_key(trace: &[Event]) -> RfKey {
    RfKey {
        events: sorted_events(trace),
        reads_from: reads_from(trace).into_iter().collect(),
    }
}

pub fn maz_key(trace: &[Event]) -> MazKey {
    let mut conflicts = Vec::new();
    for (i, a) in trace.iter().enumerate() {
        for b in &trace[i + 1..] {
            if a.thread() != b.thread() && a.conflicts(b) {
                conflicts.push((a.id, b.id));
            }
        }
    }
    conflicts.sort();
    MazKey {
        events: sorted_events(trace),
        conflicts,
    }
}

/// Fingerprints of the rvf, rf and maz keys of `trace`, in that order.
///
/// Equal to fingerprinting the keys themselves up to the choice of
/// encoding: two traces get equal fingerprints exactly when the
/// corresponding keys are equal (barring hash collisions). Conflicting-pair
/// orientation is encoded as each variable's access sequence with adjacent
/// reads sorted, which determines and is determined by those orientations.
pub fn key_fingerprints(trace: &[Event]) -> [u128; 3] {
    let n = trace.len();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by_key(|&i| trace[i].id);

    let mut base: Vec<u32> = Vec::with_capacity(4 * n + 8);
    base.push(n as u32);
    for &i in &order {
        let e = &trace[i];
        base.extend([e.id.thread, e.id.index, e.kind as u32 | (e.var.0 << 2)]);
    }

    // Per position: rank among reads (sorted by id) of the reads below it.
    let mut read_rank = vec![u32::MAX; n];
    let mut reads = 0u32;
    for &i in &order {
        if trace[i].is_read() {
            read_rank[i] = reads;
            reads += 1;
        }
    }
    let mut below = vec![FixedBitSet::with_capacity(reads as usize); n];
    let mut src = vec![EventId::new(0, 0); n];
    let mut last_of_thread: HashMap<u32, usize> = HashMap::new();
    let mut last_write: HashMap<VarId, usize> = HashMap::new();
    for (i, e) in trace.iter().enumerate() {
        let mut set = FixedBitSet::with_capacity(reads as usize);
        if let Some(&prev) = last_of_thread.get(&e.thread()) {
            set.union_with(&below[prev]);
            if trace[prev].is_read() {
                set.insert(read_rank[prev] as usize);
            }
        }
        if e.is_read() {
            match last_write.get(&e.var) {
                Some(&w) => {
                    set.union_with(&below[w]);
                    src[i] = trace[w].id;
                }
                None => src[i] = EventId::init(e.var),
            }
        } else {
            last_write.insert(e.var, i);
        }
        below[i] = set;
        last_of_thread.insert(e.thread(), i);
    }

    let mut rvf = base.clone();
    rvf.push(u32::MAX);
    for &i in &order {
        let v = trace[i].value as u64;
        rvf.extend([v as u32, (v >> 32) as u32]);
    }
    rvf.push(u32::MAX);
    let mut rf = base.clone();
    rf.push(u32::MAX);
    for &i in order.iter().filter(|&&i| trace[i].is_read()) {
        rvf.extend(
            below[i]
                .as_slice()
                .iter()
                .flat_map(|&b| [b as u32, (b as u64 >> 32) as u32]),
        );
        rf.extend([src[i].thread, src[i].index]);
    }

    let mut maz = base;
    maz.push(u32::MAX);
    let mut by_var: BTreeMap<VarId, Vec<usize>> = BTreeMap::new();
    for (i, e) in trace.iter().enumerate() {
        by_var.entry(e.var).or_default().push(i);
    }
    for (var, accesses) in by_var {
        maz.push(var.0);
        let mut run: Vec<EventId> = Vec::new();
        let flush = |run: &mut Vec<EventId>, out: &mut Vec<u32>| {
            if !run.is_empty() {
                run.sort();
                out.extend([2, run.len() as u32]);
                out.extend(run.iter().flat_map(|id| [id.thread, id.index]));
                run.clear();
            }
        };
        for i in accesses {
            let e = &trace[i];
            if e.is_read() {
                run.push(e.id);
            } else {
                flush(&mut run, &mut maz);
                maz.extend([1, e.id.thread, e.id.index]);
            }
        }
        flush(&mut run, &mut maz);
        maz.push(3);
    }
    [
        fingerprint_of(&rvf),
        fingerprint_of(&rf),
        fingerprint_of(&maz),
    ]
}

impl fmt::Display for RvfKey {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "rvf ")?;
        write_events(f, &self.events)?;
        write!(f, " values=[")?;
        for (i, (id, v)) in self.values.iter().enumerate() {
            if i > 0 {
                write!(f, " ")?;
            }
            write!(f, "{id}={v}")?;
        }
        write!(f, "] order=[")?;
        for (i, (a, b)) in self.read_order.iter().enumerate() {
            if i > 0 {
                write!(f, " ")?;
            }
            write!(f, "{a}<{b}")?;
        }
        write!(f, "]")
    }
}

impl fmt::Display for RfKey {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "rf ")?;
        write_events(f, &self.events)?;
        write!(f, " rf=[")?;
        for (i, (r, w)) in self.reads_from.iter().enumerate() {
            if i > 0 {
                write!(f, " ")?;
            }
            write!(f, "{r}<-{w}")?;
        }
        write!(f, "]")
    }
}

impl fmt::Display for MazKey {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "maz ")?;
        write_events(f, &self.events)?;
        write!(f, " conflicts=[")?;
        for (i, (a, b)) in self.conflicts.iter().enumerate() {
            if i > 0 {
                write!(f, " ")?;
            }
            write!(f, "{a}<{b}")?;
        }
        write!(f, "]")
    }
}
