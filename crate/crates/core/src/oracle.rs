//! Exhaustive reference engines: every schedule of a program, and every
//! linearization of a VSC instance.

use std::collections::{BTreeMap, BTreeSet, HashSet};
use std::fmt;

use crate::event::{Event, EventId, EventKind, VarId};
use crate::program::{AssertId, Program, Trace};
use crate::semantics::{key_fingerprints, maz_key, rf_key, rvf_key};
use crate::vsc::VscInstance;

pub const DEFAULT_BUDGET: u64 = 10_000_000;

/// Largest instance the brute-force VSC oracle accepts.
pub const MAX_BRUTE_FORCE_EVENTS: usize = 12;

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum OracleError {
    #[error("schedule budget of {0} maximal traces exceeded")]
    BudgetExceeded(u64),
    #[error("instance has {0} events; brute force is limited to {MAX_BRUTE_FORCE_EVENTS}")]
    TooLarge(usize),
}

/// Calls `visit` on every maximal trace, in depth-first order with
/// children by ascending thread id. Returns the number of traces.
pub fn for_each_maximal_trace(
    program: &Program,
    budget: u64,
    mut visit: impl FnMut(&Trace<'_>),
) -> Result<u64, OracleError> {
    let mut count = 0;
    let root = Trace::empty(program);
    dfs(&root, budget, &mut count, &mut visit)?;
    Ok(count)
}

fn dfs(
    trace: &Trace<'_>,
    budget: u64,
    count: &mut u64,
    visit: &mut impl FnMut(&Trace<'_>),
) -> Result<(), OracleError> {
    let enabled = trace.enabled();
    if enabled.is_empty() {
        if *count >= budget {
            return Err(OracleError::BudgetExceeded(budget));
        }
        *count += 1;
        visit(trace);
        return Ok(());
    }
    for e in enabled {
        let child = trace.extended(e.id).expect("enabled event extends");
        dfs(&child, budget, count, visit)?;
    }
    Ok(())
}

pub fn enumerate_maximal_traces(
    program: &Program,
    budget: u64,
) -> Result<Vec<Vec<Event>>, OracleError> {
    let mut out = Vec::new();
    for_each_maximal_trace(program, budget, |t| out.push(t.events().to_vec()))?;
    Ok(out)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Equivalence {
    Rvf,
    Rf,
    Maz,
}

impl Equivalence {
    pub const ALL: [Equivalence; 3] = [Equivalence::Maz, Equivalence::Rf, Equivalence::Rvf];

    pub fn name(self) -> &'static str {
        match self {
            Equivalence::Rvf => "rvf",
            Equivalence::Rf => "rf",
            Equivalence::Maz => "maz",
        }
    }
}

impl fmt::Display for Equivalence {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// Event set and values of a trace, sorted by event id.
pub type ValueFunction = Vec<(EventId, i64)>;

pub fn value_function(trace: &[Event]) -> ValueFunction {
    let mut vf: ValueFunction = trace.iter().map(|e| (e.id, e.value)).collect();
    vf.sort();
    vf
}

/// Class counts and reachable local behaviour over all maximal traces.
#[derive(Clone, Debug, Default)]
pub struct Census {
    pub maximal_traces: u64,
    pub rvf_classes: usize,
    pub rf_classes: usize,
    pub maz_classes: usize,
    pub deadlocks: u64,
    pub violations: BTreeSet<AssertId>,
    /// Every `(read, value)` observed by some trace.
    pub observations: BTreeSet<(EventId, i64)>,
    pub value_functions: BTreeSet<ValueFunction>,
}

impl Census {
    pub fn classes(&self, eq: Equivalence) -> usize {
        match eq {
            Equivalence::Rvf => self.rvf_classes,
            Equivalence::Rf => self.rf_classes,
            Equivalence::Maz => self.maz_classes,
        }
    }

    /// `equivalence,count` lines.
    pub fn to_csv(&self) -> String {
        let mut s = String::from("equivalence,count\n");
        for eq in Equivalence::ALL {
            s.push_str(&format!("{eq},{}\n", self.classes(eq)));
        }
        s
    }
}

pub fn census(program: &Program, budget: u64) -> Result<Census, OracleError> {
    let mut rvf = HashSet::new();
    let mut rf = HashSet::new();
    let mut maz = HashSet::new();
    let mut c = Census::default();
    let n = for_each_maximal_trace(program, budget, |t| {
        let ev = t.events();
        let [a, b, m] = key_fingerprints(ev);
        rvf.insert(a);
        rf.insert(b);
        maz.insert(m);
        if t.is_deadlocked() {
            c.deadlocks += 1;
        }
        c.violations.extend(t.violations().iter().copied());
        c.observations
            .extend(ev.iter().filter(|e| e.is_read()).map(|e| (e.id, e.value)));
        c.value_functions.insert(value_function(ev));
    })?;
    c.maximal_traces = n;
    c.rvf_classes = rvf.len();
    c.rf_classes = rf.len();
    c.maz_classes = maz.len();
    Ok(c)
}

/// One maximal trace per class of `eq`, in enumeration order.
pub fn class_representatives(
    program: &Program,
    eq: Equivalence,
    budget: u64,
) -> Result<Vec<Vec<Event>>, OracleError> {
    let mut seen = HashSet::new();
    let mut reps = Vec::new();
    for_each_maximal_trace(program, budget, |t| {
        let ev = t.events();
        let key = match eq {
            Equivalence::Rvf => rvf_key(ev).fingerprint(),
            Equivalence::Rf => rf_key(ev).fingerprint(),
            Equivalence::Maz => maz_key(ev).fingerprint(),
        };
        if seen.insert(key) {
            reps.push(ev.to_vec());
        }
    })?;
    Ok(reps)
}

/// First witness in lexicographic thread order, if any.
pub fn brute_force_vsc(inst: &VscInstance) -> Result<Option<Vec<EventId>>, OracleError> {
    let mut found = None;
    linearize(inst, &mut |seq| {
        found = Some(seq.to_vec());
        false
    })?;
    Ok(found)
}

/// Every witness of the instance.
pub fn all_vsc_witnesses(inst: &VscInstance) -> Result<Vec<Vec<EventId>>, OracleError> {
    let mut all = Vec::new();
    linearize(inst, &mut |seq| {
        all.push(seq.to_vec());
        true
    })?;
    Ok(all)
}

struct Lin<'a> {
    lanes: Vec<Vec<&'a Event>>,
    good: &'a BTreeMap<EventId, BTreeSet<EventId>>,
    pos: Vec<usize>,
    last: BTreeMap<VarId, EventId>,
    owner: BTreeMap<VarId, u32>,
    seq: Vec<EventId>,
}

fn linearize(
    inst: &VscInstance,
    found: &mut dyn FnMut(&[EventId]) -> bool,
) -> Result<(), OracleError> {
    let n = inst.events().len();
    if n > MAX_BRUTE_FORCE_EVENTS {
        return Err(OracleError::TooLarge(n));
    }
    let mut lanes: BTreeMap<u32, Vec<&Event>> = BTreeMap::new();
    for e in inst.events() {
        lanes.entry(e.thread()).or_default().push(e);
    }
    let mut lanes: Vec<Vec<&Event>> = lanes.into_values().collect();
    for lane in &mut lanes {
        lane.sort_by_key(|e| e.id.index);
    }
    let k = lanes.len();
    let mut st = Lin {
        lanes,
        good: inst.good_writes_map(),
        pos: vec![0; k],
        last: BTreeMap::new(),
        owner: BTreeMap::new(),
        seq: Vec::with_capacity(n),
    };
    step(&mut st, n, found);
    Ok(())
}

/// Returns false once the callback asks to stop.
fn step(st: &mut Lin<'_>, n: usize, found: &mut dyn FnMut(&[EventId]) -> bool) -> bool {
    if st.seq.len() == n {
        return found(&st.seq);
    }
    for t in 0..st.lanes.len() {
        let Some(&e) = st.lanes[t].get(st.pos[t]) else {
            continue;
        };
        if e.is_read() {
            let src = st.last.get(&e.var).copied().unwrap_or(EventId::init(e.var));
            if !st.good[&e.id].contains(&src) {
                continue;
            }
        }
        let saved_last = st.last.get(&e.var).copied();
        match e.kind {
            EventKind::Acquire => {
                if st.owner.contains_key(&e.var) {
                    continue;
                }
                st.owner.insert(e.var, e.thread());
            }
            EventKind::Release => {
                if st.owner.get(&e.var) != Some(&e.thread()) {
                    continue;
                }
                st.owner.remove(&e.var);
            }
            _ => {}
        }
        if e.is_write() {
            st.last.insert(e.var, e.id);
        }
        st.pos[t] += 1;
        st.seq.push(e.id);

        let go_on = step(st, n, found);

        st.seq.pop();
        st.pos[t] -= 1;
        match saved_last {
            Some(w) => st.last.insert(e.var, w),
            None => st.last.remove(&e.var),
        };
        match e.kind {
            EventKind::Acquire => {
                st.owner.remove(&e.var);
            }
            EventKind::Release => {
                st.owner.insert(e.var, e.thread());
            }
            _ => {}
        }
        if !go_on {
            return false;
        }
    }
    true
}
