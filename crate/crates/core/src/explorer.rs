//! Exploration of a program's maximal traces up to reads-value-from
//! equivalence.
//!
//! Each recursion node holds an event set, the good-writes of its reads, a
//! witness trace and a causal map. A node first extends its witness with
//! every enabled non-read, then mutates each enabled read over the value
//! classes of its viable sources, asking the VSC solver for a witness of
//! each mutation.

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::time::{Duration, Instant};

use crate::event::{Event, EventId, EventKind};
use crate::oracle::{value_function, ValueFunction};
use crate::program::{AssertId, Program, Trace};
use crate::semantics::{rvf_key, RvfKey};
use crate::vsc::{verify_sc, VscInstance, VscOptions};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct ExploreOptions {
    /// Stop mutating a read once no descendant reported a new write for it.
    pub backtrack_signals: bool,
    pub vsc: VscOptions,
}

impl Default for ExploreOptions {
    fn default() -> Self {
        ExploreOptions {
            backtrack_signals: true,
            vsc: VscOptions::default(),
        }
    }
}

impl ExploreOptions {
    /// All sixteen combinations of the switches.
    pub fn all() -> Vec<ExploreOptions> {
        VscOptions::all()
            .into_iter()
            .flat_map(|vsc| {
                [true, false].map(|backtrack_signals| ExploreOptions {
                    backtrack_signals,
                    vsc,
                })
            })
            .collect()
    }
}

/// A recorded maximal trace.
#[derive(Clone, Debug)]
pub struct Leaf {
    pub events: Vec<Event>,
    pub deadlock: bool,
    pub violations: BTreeSet<AssertId>,
}

impl Leaf {
    pub fn ids(&self) -> Vec<EventId> {
        self.events.iter().map(|e| e.id).collect()
    }

    pub fn rvf_key(&self) -> RvfKey {
        rvf_key(&self.events)
    }
}

#[derive(Clone, Debug, Default)]
pub struct ExplorationReport {
    pub leaves: Vec<Leaf>,
    pub vsc_calls: u64,
    /// Witness states processed across all solver calls.
    pub witness_states: u64,
    pub wall_time: Duration,
}

impl ExplorationReport {
    pub fn maximal_traces(&self) -> usize {
        self.leaves.len()
    }

    pub fn deadlocks(&self) -> usize {
        self.leaves.iter().filter(|l| l.deadlock).count()
    }

    pub fn violations(&self) -> BTreeSet<AssertId> {
        self.leaves
            .iter()
            .flat_map(|l| l.violations.iter().copied())
            .collect()
    }

    /// Every `(read, value)` pair seen on some leaf.
    pub fn observations(&self) -> BTreeSet<(EventId, i64)> {
        self.leaves
            .iter()
            .flat_map(|l| {
                l.events
                    .iter()
                    .filter(|e| e.is_read())
                    .map(|e| (e.id, e.value))
            })
            .collect()
    }

    pub fn value_functions(&self) -> BTreeSet<ValueFunction> {
        self.leaves
            .iter()
            .map(|l| value_function(&l.events))
            .collect()
    }
}

/// Per read, per thread (index 0 is the init pseudo-thread), how many of
/// that thread's first events are forbidden as reads-from sources.
#[derive(Clone, Debug, Default)]
pub struct CausalMap {
    bounds: BTreeMap<EventId, Vec<u32>>,
}

impl CausalMap {
    pub fn contains(&self, r: EventId) -> bool {
        self.bounds.contains_key(&r)
    }

    /// Whether `w` is a forbidden source for `r`.
    pub fn forbids(&self, r: EventId, w: EventId) -> bool {
        match self.bounds.get(&r) {
            None => false,
            Some(b) if w.is_init() => b[0] >= 1,
            Some(b) => b.get(w.thread as usize).is_some_and(|&c| w.index <= c),
        }
    }

    /// Forbids for `r` every event currently in `trace`, init included.
    pub fn forbid_all(&mut self, r: EventId, trace: &Trace<'_>) {
        let k = trace.program().num_threads();
        let mut b = vec![0u32; k + 1];
        b[0] = 1;
        for (t, slot) in b.iter_mut().enumerate().skip(1) {
            *slot = trace.thread_len(t as u32);
        }
        self.bounds.insert(r, b);
    }
}

/// Appends enabled non-read events, one per thread per round in thread
/// order, until only reads remain enabled. Returns the appended events.
pub fn extend_nonreads(trace: &mut Trace<'_>) -> Vec<Event> {
    let mut ext = Vec::new();
    let k = trace.program().num_threads() as u32;
    loop {
        let mut progressed = false;
        for t in 1..=k {
            if let Some(e) = trace.enabled_of(t) {
                if !e.is_read() {
                    let done = *trace.extend(e.id).expect("enabled event extends");
                    ext.push(done);
                    progressed = true;
                }
            }
        }
        if !progressed {
            return ext;
        }
    }
}

/// Sets the signal of every registered read that conflicts with a write of
/// `extension` from another thread.
pub fn update_backtrack_signals(
    extension: &[Event],
    signals: &mut HashMap<EventId, (Event, bool)>,
) {
    for w in extension.iter().filter(|e| e.is_write()) {
        for (r, flag) in signals.values_mut() {
            if r.var == w.var && r.thread() != w.thread() {
                *flag = true;
            }
        }
    }
}

/// Writes of `trace` and the init write that `r` may read, minus those
/// `causal` forbids. Ordered init first, then by trace position.
pub fn viable_sources(trace: &Trace<'_>, r: &Event, causal: &CausalMap) -> Vec<Event> {
    std::iter::once(Event::init(r.var))
        .chain(
            trace
                .events()
                .iter()
                .filter(|w| w.is_write() && w.var == r.var)
                .copied(),
        )
        .filter(|w| !causal.forbids(r.id, w.id))
        .collect()
}

/// Partitions `sources` by written value, in order of first occurrence.
pub fn group_by_value(sources: &[Event]) -> Vec<(i64, Vec<Event>)> {
    let mut groups: Vec<(i64, Vec<Event>)> = Vec::new();
    for w in sources {
        match groups.iter_mut().find(|(v, _)| *v == w.value) {
            Some((_, g)) => g.push(*w),
            None => groups.push((w.value, vec![*w])),
        }
    }
    groups
}

/// Source groups for `r`. Lock acquires get one group per source: which
/// release an acquire follows changes the causal order among reads.
fn source_groups(r: &Event, sources: &[Event]) -> Vec<Vec<Event>> {
    if r.kind == EventKind::Acquire {
        sources.iter().map(|w| vec![*w]).collect()
    } else {
        group_by_value(sources)
            .into_iter()
            .map(|(_, g)| g)
            .collect()
    }
}

pub fn explore(program: &Program, opts: ExploreOptions) -> ExplorationReport {
    let start = Instant::now();
    let mut ex = Explorer {
        program,
        opts,
        signals: HashMap::new(),
        report: ExplorationReport::default(),
    };
    ex.visit(Trace::empty(program), BTreeMap::new(), CausalMap::default());
    let mut report = ex.report;
    report.wall_time = start.elapsed();
    report
}

struct Explorer<'p> {
    program: &'p Program,
    opts: ExploreOptions,
    signals: HashMap<EventId, (Event, bool)>,
    report: ExplorationReport,
}

type GoodWrites = BTreeMap<EventId, BTreeSet<EventId>>;

impl<'p> Explorer<'p> {
    fn visit(&mut self, mut trace: Trace<'p>, good: GoodWrites, mut causal: CausalMap) {
        let ext = extend_nonreads(&mut trace);
        update_backtrack_signals(&ext, &mut self.signals);

        let mut reads = trace.enabled();
        if reads.is_empty() {
            self.report.leaves.push(Leaf {
                events: trace.events().to_vec(),
                deadlock: trace.is_deadlocked(),
                violations: trace.violations().clone(),
            });
            return;
        }
        reads.sort_by_key(|r| (causal.contains(r.id), r.id));

        for r in reads {
            let registered = self.opts.backtrack_signals && !causal.contains(r.id);
            if registered {
                self.signals.insert(r.id, (r, false));
            }
            let sources = viable_sources(&trace, &r, &causal);
            for group in source_groups(&r, &sources) {
                self.mutate(&trace, &good, &causal, &r, &group);
            }
            let backtrack = if registered {
                self.signals.remove(&r.id).is_some_and(|(_, b)| b)
            } else {
                true
            };
            if !backtrack {
                break;
            }
            causal.forbid_all(r.id, &trace);
        }
    }

    fn mutate(
        &mut self,
        trace: &Trace<'p>,
        good: &GoodWrites,
        causal: &CausalMap,
        r: &Event,
        group: &[Event],
    ) {
        let mut good = good.clone();
        good.insert(r.id, group.iter().map(|w| w.id).collect());

        let last = trace
            .events()
            .iter()
            .rev()
            .find(|w| w.is_write() && w.var == r.var)
            .map_or(EventId::init(r.var), |w| w.id);
        let child = if good[&r.id].contains(&last) {
            trace.extended(r.id).expect("enabled read extends")
        } else {
            let mut events = trace.events().to_vec();
            events.push(*r);
            let inst = VscInstance::new(events, good.clone()).expect("well-formed mutation");
            let mut aux = trace.ids();
            aux.push(r.id);
            let out = verify_sc(&inst, self.opts.vsc, Some(&aux));
            self.report.vsc_calls += 1;
            self.report.witness_states += out.stats.states_processed;
            match out.witness {
                Some(w) => Trace::replay(self.program, &w).expect("witness replays"),
                None => return,
            }
        };
        self.visit(child, good, causal.clone());
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::event::VarId;
    use crate::program::parse_program;

    const FIG1: &str = "thread t1 { write x 1; write y 1 }
        thread t2 { write x 1; write y 1; a = read x }
        thread t3 { write x 1; write y 1; b = read y }";

    #[test]
    fn figure_one_single_leaf() {
        let p = parse_program(FIG1).unwrap();
        for opts in ExploreOptions::all() {
            assert_eq!(explore(&p, opts).maximal_traces(), 1, "{opts:?}");
        }
    }

    #[test]
    fn root_extension_flushes_writes() {
        let p = parse_program(FIG1).unwrap();
        let mut t = Trace::empty(&p);
        let ext = extend_nonreads(&mut t);
        assert_eq!(ext.len(), 6);
        let enabled: Vec<EventId> = t.enabled().iter().map(|e| e.id).collect();
        assert_eq!(enabled, vec![EventId::new(2, 3), EventId::new(3, 3)]);
        assert!(extend_nonreads(&mut t).is_empty());
    }

    #[test]
    fn extension_appends_release() {
        let p = parse_program("thread a { lock m; write x 1; unlock m; r = read x }").unwrap();
        let mut t = Trace::empty(&p);
        assert!(extend_nonreads(&mut t).is_empty());
        t.extend(EventId::new(1, 1)).unwrap();
        let ext = extend_nonreads(&mut t);
        assert_eq!(ext.len(), 2);
        assert_eq!(ext[1].kind, EventKind::Release);
    }

    #[test]
    fn single_thread_single_leaf() {
        let p =
            parse_program("thread a { write x 1; r = read x; if r == 1 { write y 2 } }").unwrap();
        assert_eq!(explore(&p, ExploreOptions::default()).maximal_traces(), 1);
    }

    #[test]
    fn signals_only_for_foreign_conflicting_writes() {
        let x = VarId(0);
        let y = VarId(1);
        let r = Event::new(EventId::new(1, 2), EventKind::Read, x, 0);
        let mut signals = HashMap::from([(r.id, (r, false))]);
        let own = Event::new(EventId::new(1, 3), EventKind::Write, x, 1);
        let other_var = Event::new(EventId::new(3, 1), EventKind::Write, y, 1);
        update_backtrack_signals(&[own, other_var], &mut signals);
        assert!(!signals[&r.id].1);
        let hit = Event::new(EventId::new(3, 2), EventKind::Write, x, 1);
        update_backtrack_signals(&[hit], &mut signals);
        assert!(signals[&r.id].1);
    }

    #[test]
    fn grouping_by_value() {
        let x = VarId(0);
        let w = |t, v| Event::new(EventId::new(t, 1), EventKind::Write, x, v);
        let groups = group_by_value(&[w(1, 1), w(2, 1), w(3, 2)]);
        assert_eq!(groups.len(), 2);
        assert_eq!(groups[0].0, 1);
        assert_eq!(groups[0].1.len(), 2);
        assert_eq!(group_by_value(&[w(1, 1), w(2, 1)]).len(), 1);
        assert!(group_by_value(&[]).is_empty());
    }

    #[test]
    fn viable_sources_respect_causal_map() {
        let p = parse_program(
            "thread a { write x 1; write x 2 }\nthread b { r = read x }\nthread c { s = read y }",
        )
        .unwrap();
        let mut t = Trace::empty(&p);
        extend_nonreads(&mut t);
        let r = t.enabled_of(2).unwrap();
        let mut c = CausalMap::default();
        assert_eq!(viable_sources(&t, &r, &c).len(), 3);
        c.forbid_all(r.id, &t);
        assert!(viable_sources(&t, &r, &c).is_empty());
        let ry = t.enabled_of(3).unwrap();
        let only_init = viable_sources(&t, &ry, &CausalMap::default());
        assert_eq!(only_init, vec![Event::init(VarId(1))]);
    }

    #[test]
    fn conditional_write_signals_ancestor() {
        // t2 writes x only after seeing y = 1, which creates a new source
        // for t1's read of x.
        let p = parse_program(
            "thread t1 { a = read x }
             thread t2 { b = read y; if b == 1 { write x 2 } }
             thread t3 { write y 1 }",
        )
        .unwrap();
        let report = explore(&p, ExploreOptions::default());
        let seen: BTreeSet<i64> = report
            .leaves
            .iter()
            .flat_map(|l| {
                l.events
                    .iter()
                    .filter(|e| e.id == EventId::new(1, 1))
                    .map(|e| e.value)
            })
            .collect();
        assert_eq!(seen, BTreeSet::from([0, 2]));
    }
}
