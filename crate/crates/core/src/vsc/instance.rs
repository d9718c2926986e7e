use std::collections::{BTreeMap, BTreeSet, HashMap};

use crate::event::{Event, EventId, VarId};
use crate::order::PartialOrder;

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum InstanceError {
    #[error("event {0} appears twice")]
    DuplicateEvent(EventId),
    #[error("event {0} belongs to the init thread")]
    InitEvent(EventId),
    #[error("thread {thread} is not a prefix: expected index {expected}, found {found}")]
    NotProper {
        thread: u32,
        expected: u32,
        found: u32,
    },
    #[error("read {0} has no good-writes")]
    MissingGoodWrites(EventId),
    #[error("read {0} has an empty good-writes set")]
    EmptyGoodWrites(EventId),
    #[error("good-writes given for {0}, which is not a read of the instance")]
    NotARead(EventId),
    #[error("good-write {write} of read {read} is not a conflicting write")]
    BadGoodWrite { read: EventId, write: EventId },
}

/// A VSC instance: a proper event set and, per read, the writes it may
/// observe. Init writes are implicit and referenced by [`EventId::init`].
#[derive(Clone, Debug)]
pub struct VscInstance {
    events: Vec<Event>,
    good_writes: BTreeMap<EventId, BTreeSet<EventId>>,
    by_id: HashMap<EventId, usize>,
}

impl VscInstance {
    pub fn new(
        mut events: Vec<Event>,
        good_writes: BTreeMap<EventId, BTreeSet<EventId>>,
    ) -> Result<Self, InstanceError> {
        events.sort_by_key(|e| e.id);
        let mut by_id = HashMap::new();
        for (i, e) in events.iter().enumerate() {
            if e.id.is_init() {
                return Err(InstanceError::InitEvent(e.id));
            }
            if by_id.insert(e.id, i).is_some() {
                return Err(InstanceError::DuplicateEvent(e.id));
            }
        }
        let mut expected: BTreeMap<u32, u32> = BTreeMap::new();
        for e in &events {
            let next = expected.entry(e.thread()).or_insert(1);
            if e.id.index != *next {
                return Err(InstanceError::NotProper {
                    thread: e.thread(),
                    expected: *next,
                    found: e.id.index,
                });
            }
            *next += 1;
        }
        for (&r, ws) in &good_writes {
            let read = match by_id.get(&r) {
                Some(&i) if events[i].is_read() => events[i],
                _ => return Err(InstanceError::NotARead(r)),
            };
            if ws.is_empty() {
                return Err(InstanceError::EmptyGoodWrites(r));
            }
            for &w in ws {
                let ok = if w.is_init() {
                    w == EventId::init(read.var)
                } else {
                    by_id
                        .get(&w)
                        .is_some_and(|&i| events[i].is_write() && events[i].var == read.var)
                };
                if !ok {
                    return Err(InstanceError::BadGoodWrite { read: r, write: w });
                }
            }
        }
        if let Some(r) = events
            .iter()
            .find(|e| e.is_read() && !good_writes.contains_key(&e.id))
        {
            return Err(InstanceError::MissingGoodWrites(r.id));
        }
        Ok(VscInstance {
            events,
            good_writes,
            by_id,
        })
    }

    /// Events sorted by `(thread, index)`.
    pub fn events(&self) -> &[Event] {
        &self.events
    }

    pub fn event(&self, id: EventId) -> Option<&Event> {
        if id.is_init() {
            return None;
        }
        self.by_id.get(&id).map(|&i| &self.events[i])
    }

    pub(crate) fn position(&self, id: EventId) -> Option<usize> {
        self.by_id.get(&id).copied()
    }

    pub fn good_writes(&self, read: EventId) -> &BTreeSet<EventId> {
        &self.good_writes[&read]
    }

    pub fn good_writes_map(&self) -> &BTreeMap<EventId, BTreeSet<EventId>> {
        &self.good_writes
    }

    pub fn reads(&self) -> impl Iterator<Item = &Event> {
        self.events.iter().filter(|e| e.is_read())
    }

    /// Variables accessed by the instance, ascending.
    pub fn variables(&self) -> Vec<VarId> {
        let vars: BTreeSet<VarId> = self.events.iter().map(|e| e.var).collect();
        vars.into_iter().collect()
    }

    /// Threads with at least one event, ascending.
    pub fn threads(&self) -> Vec<u32> {
        let ts: BTreeSet<u32> = self.events.iter().map(|e| e.thread()).collect();
        ts.into_iter().collect()
    }

    /// Init writes of the instance variables followed by the events.
    pub fn events_with_init(&self) -> Vec<Event> {
        let mut xs: Vec<Event> = self.variables().into_iter().map(Event::init).collect();
        xs.extend(self.events.iter().copied());
        xs
    }

    /// Program order over the events and the init writes.
    pub fn program_order(&self) -> PartialOrder {
        PartialOrder::program_order(self.events_with_init().iter().map(|e| e.id))
    }

    /// The largest number of processed witness states a search can reach:
    /// `prod_t (n_t + 1) * (k + 1)^d`.
    pub fn state_bound(&self) -> u128 {
        let threads = self.threads();
        let mut bound: u128 = 1;
        for t in &threads {
            let n = self.events.iter().filter(|e| e.thread() == *t).count() as u128;
            bound = bound.saturating_mul(n + 1);
        }
        let k = threads.len() as u128;
        for _ in 0..self.variables().len() {
            bound = bound.saturating_mul(k + 1);
        }
        bound
    }
}

/// Independent check that `seq` is a witness of `inst`: a permutation of
/// the events, in program order per thread, where every read observes one
/// of its good-writes and every acquire finds its mutex free.
pub fn check_witness(inst: &VscInstance, seq: &[EventId]) -> Result<(), String> {
    if seq.len() != inst.events().len() {
        return Err(format!(
            "witness has {} events, instance has {}",
            seq.len(),
            inst.events().len()
        ));
    }
    let mut seen = BTreeSet::new();
    let mut next_index: BTreeMap<u32, u32> = BTreeMap::new();
    let mut last_write: BTreeMap<VarId, EventId> = BTreeMap::new();
    let mut owner: BTreeMap<VarId, u32> = BTreeMap::new();
    for &id in seq {
        let e = inst
            .event(id)
            .ok_or_else(|| format!("{id} is not an event of the instance"))?;
        if !seen.insert(id) {
            return Err(format!("{id} occurs twice"));
        }
        let next = next_index.entry(id.thread).or_insert(1);
        if id.index != *next {
            return Err(format!("{id} breaks program order"));
        }
        *next += 1;
        if e.is_read() {
            let src = last_write
                .get(&e.var)
                .copied()
                .unwrap_or(EventId::init(e.var));
            if !inst.good_writes(id).contains(&src) {
                return Err(format!("{id} reads from {src}, not a good-write"));
            }
        } else {
            last_write.insert(e.var, id);
        }
        match e.kind {
            crate::event::EventKind::Acquire => {
                if owner.contains_key(&e.var) {
                    return Err(format!("{id} acquires a held mutex"));
                }
                owner.insert(e.var, id.thread);
            }
            crate::event::EventKind::Release => {
                if owner.get(&e.var) != Some(&id.thread) {
                    return Err(format!("{id} releases a mutex it does not hold"));
                }
                owner.remove(&e.var);
            }
            _ => {}
        }
    }
    Ok(())
}
