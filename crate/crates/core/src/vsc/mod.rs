//! Deciding whether an event set admits a sequentially consistent
//! linearization in which every read observes one of its good-writes.

mod closure;
mod format;
mod instance;

use std::collections::{HashMap, HashSet};

use crate::event::{EventId, EventKind, VarId};
use crate::order::PartialOrder;

pub use closure::closure;
pub use format::{format_witness, parse_instance, FormatError};
pub use instance::{check_witness, InstanceError, VscInstance};

/// Independently toggleable search heuristics.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct VscOptions {
    pub greedy: bool,
    pub closure: bool,
    pub aux_trace: bool,
}

impl Default for VscOptions {
    fn default() -> Self {
        VscOptions {
            greedy: true,
            closure: true,
            aux_trace: true,
        }
    }
}

impl VscOptions {
    pub const NONE: VscOptions = VscOptions {
        greedy: false,
        closure: false,
        aux_trace: false,
    };

    /// All eight combinations.
    pub fn all() -> Vec<VscOptions> {
        (0..8)
            .map(|m| VscOptions {
                greedy: m & 1 != 0,
                closure: m & 2 != 0,
                aux_trace: m & 4 != 0,
            })
            .collect()
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct VscStats {
    /// Witness states popped from the worklist.
    pub states_processed: u64,
    /// Distinct witness states ever inserted.
    pub states_discovered: u64,
    /// The closure alone proved the instance unrealizable.
    pub closure_rejected: bool,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct VscOutcome {
    pub witness: Option<Vec<EventId>>,
    pub stats: VscStats,
}

/// Searches for a witness of `inst`. `aux` is a hint sequence; events are
/// tried in its order when the aux-trace option is on.
pub fn verify_sc(inst: &VscInstance, opts: VscOptions, aux: Option<&[EventId]>) -> VscOutcome {
    let mut stats = VscStats::default();
    let order = if opts.closure {
        match closure(inst) {
            Some(p) => Some(p),
            None => {
                stats.closure_rejected = true;
                return VscOutcome {
                    witness: None,
                    stats,
                };
            }
        }
    } else {
        None
    };
    let search = Search::new(inst, order.as_ref());
    let aux = if opts.aux_trace { aux } else { None };
    let witness = search.run(opts.greedy, aux, &mut stats);
    if let Some(w) = &witness {
        if let Err(msg) = check_witness(inst, w) {
            panic!("solver produced an invalid witness: {msg}");
        }
    }
    VscOutcome { witness, stats }
}

/// Pack of per-thread executed counts followed by, per variable, the
/// thread slot of the active write (0 for init, slot + 1 otherwise).
pub type WitnessState = Vec<u32>;

/// Precomputed tables over an instance.
struct Search<'a> {
    inst: &'a VscInstance,
    /// Thread slot -> event positions in program order.
    lanes: Vec<Vec<usize>>,
    /// Event position -> (thread slot, position within the lane).
    slot_of: Vec<(usize, usize)>,
    var_slot: HashMap<VarId, usize>,
    ev_var: Vec<usize>,
    /// `[t][c][x]`: last write to `x` among the first `c` events of `t`.
    last_write: Vec<Vec<Vec<Option<usize>>>>,
    /// `[t][c][x]`: `t` holds mutex `x` after its first `c` events.
    holds: Vec<Vec<Vec<bool>>>,
    /// Read position -> good-writes (`None` is the init write).
    good: Vec<Vec<Option<usize>>>,
    reads_of_var: Vec<Vec<usize>>,
    /// Event position -> per-slot count that must be reached first.
    need: Option<Vec<Vec<u32>>>,
}

#[derive(Clone, Copy)]
enum Write {
    Init,
    Event(usize),
}

impl<'a> Search<'a> {
    fn new(inst: &'a VscInstance, order: Option<&PartialOrder>) -> Self {
        let events = inst.events();
        let threads = inst.threads();
        let vars = inst.variables();
        let var_slot: HashMap<VarId, usize> =
            vars.iter().enumerate().map(|(i, v)| (*v, i)).collect();
        let thread_slot: HashMap<u32, usize> =
            threads.iter().enumerate().map(|(i, t)| (*t, i)).collect();
        let k = threads.len();
        let d = vars.len();

        let mut lanes = vec![Vec::new(); k];
        let mut slot_of = Vec::with_capacity(events.len());
        for (i, e) in events.iter().enumerate() {
            let t = thread_slot[&e.thread()];
            slot_of.push((t, lanes[t].len()));
            lanes[t].push(i);
        }
        let ev_var: Vec<usize> = events.iter().map(|e| var_slot[&e.var]).collect();

        let mut last_write = Vec::with_capacity(k);
        let mut holds = Vec::with_capacity(k);
        for lane in &lanes {
            let mut lw = vec![vec![None; d]];
            let mut hd = vec![vec![false; d]];
            for &i in lane {
                let mut row = lw.last().unwrap().clone();
                let mut h = hd.last().unwrap().clone();
                let e = &events[i];
                if e.is_write() {
                    row[ev_var[i]] = Some(i);
                }
                match e.kind {
                    EventKind::Acquire => h[ev_var[i]] = true,
                    EventKind::Release => h[ev_var[i]] = false,
                    _ => {}
                }
                lw.push(row);
                hd.push(h);
            }
            last_write.push(lw);
            holds.push(hd);
        }

        let mut good = vec![Vec::new(); events.len()];
        let mut reads_of_var = vec![Vec::new(); d];
        for (i, e) in events.iter().enumerate() {
            if e.is_read() {
                reads_of_var[ev_var[i]].push(i);
                good[i] = inst
                    .good_writes(e.id)
                    .iter()
                    .map(|w| if w.is_init() { None } else { inst.position(*w) })
                    .collect();
            }
        }

        let need = order.map(|p| {
            events
                .iter()
                .map(|e| {
                    let mut row = vec![0u32; k];
                    for pred in p.predecessors(e.id) {
                        if let Some(&t) = thread_slot.get(&pred.thread) {
                            row[t] = row[t].max(pred.index);
                        }
                    }
                    row
                })
                .collect()
        });

        Search {
            inst,
            lanes,
            slot_of,
            var_slot,
            ev_var,
            last_write,
            holds,
            good,
            reads_of_var,
            need,
        }
    }

    fn k(&self) -> usize {
        self.lanes.len()
    }

    fn initial(&self) -> WitnessState {
        vec![0; self.k() + self.var_slot.len()]
    }

    fn executed(&self, s: &WitnessState, i: usize) -> bool {
        let (t, pos) = self.slot_of[i];
        (s[t] as usize) > pos
    }

    fn active(&self, s: &WitnessState, x: usize) -> Write {
        match s[self.k() + x] {
            0 => Write::Init,
            m => {
                let t = m as usize - 1;
                match self.last_write[t][s[t] as usize][x] {
                    Some(i) => Write::Event(i),
                    None => unreachable!("active-write slot without a write"),
                }
            }
        }
    }

    fn is_good(&self, r: usize, w: Write) -> bool {
        self.good[r].iter().any(|g| match (g, w) {
            (None, Write::Init) => true,
            (Some(a), Write::Event(b)) => *a == b,
            _ => false,
        })
    }

    fn held(&self, s: &WitnessState, x: usize) -> bool {
        self.reads_of_var[x].iter().any(|&r| {
            !self.executed(s, r)
                && self.good[r]
                    .iter()
                    .all(|g| g.is_none_or(|w| self.executed(s, w)))
        })
    }

    fn mutex_free(&self, s: &WitnessState, x: usize) -> bool {
        (0..self.k()).all(|t| !self.holds[t][s[t] as usize][x])
    }

    /// Useless: not a good-write of any unexecuted read of `x`.
    fn useless(&self, s: &WitnessState, x: usize, w: Write) -> bool {
        self.reads_of_var[x]
            .iter()
            .all(|&r| self.executed(s, r) || !self.is_good(r, w))
    }

    fn next_of(&self, s: &WitnessState, t: usize) -> Option<usize> {
        self.lanes[t].get(s[t] as usize).copied()
    }

    fn executable(&self, s: &WitnessState, i: usize) -> bool {
        let (t, pos) = self.slot_of[i];
        if s[t] as usize != pos {
            return false;
        }
        if let Some(need) = &self.need {
            if need[i].iter().enumerate().any(|(u, &c)| s[u] < c) {
                return false;
            }
        }
        let e = &self.inst.events()[i];
        let x = self.ev_var[i];
        if e.is_read() {
            self.is_good(i, self.active(s, x))
                && (e.kind != EventKind::Acquire || self.mutex_free(s, x))
        } else {
            !self.held(s, x)
        }
    }

    fn apply(&self, s: &WitnessState, i: usize) -> WitnessState {
        let mut next = s.clone();
        let (t, _) = self.slot_of[i];
        next[t] += 1;
        if self.inst.events()[i].is_write() {
            next[self.k() + self.ev_var[i]] = t as u32 + 1;
        }
        next
    }

    fn executables(&self, s: &WitnessState) -> Vec<usize> {
        (0..self.k())
            .filter_map(|t| self.next_of(s, t))
            .filter(|&i| self.executable(s, i))
            .collect()
    }

    /// Single forced successor chosen by the greedy rules, if any.
    fn greedy(&self, s: &WitnessState, cands: &[usize]) -> Option<usize> {
        let events = self.inst.events();
        let read = cands.iter().copied().find(|&i| {
            let e = &events[i];
            e.kind == EventKind::Read || (e.kind == EventKind::Acquire && self.good[i].len() == 1)
        });
        if read.is_some() {
            return read;
        }
        cands.iter().copied().find(|&i| {
            let x = self.ev_var[i];
            events[i].is_write()
                && self.useless(s, x, self.active(s, x))
                && self.useless(s, x, Write::Event(i))
        })
    }

    fn done(&self, s: &WitnessState) -> bool {
        (0..self.k()).all(|t| s[t] as usize == self.lanes[t].len())
    }

    fn run(
        &self,
        greedy: bool,
        aux: Option<&[EventId]>,
        stats: &mut VscStats,
    ) -> Option<Vec<EventId>> {
        let events = self.inst.events();
        let aux_pos: Option<HashMap<EventId, usize>> =
            aux.map(|a| a.iter().enumerate().map(|(i, e)| (*e, i)).collect());

        // Arena of (state, parent, event) so witnesses can be rebuilt.
        let mut arena: Vec<(WitnessState, usize, usize)> = Vec::new();
        let mut seen: HashSet<WitnessState> = HashSet::new();
        let root = self.initial();
        seen.insert(root.clone());
        arena.push((root, usize::MAX, usize::MAX));
        let mut stack = vec![0usize];
        stats.states_discovered = 1;

        while let Some(node) = stack.pop() {
            stats.states_processed += 1;
            let state = arena[node].0.clone();
            if self.done(&state) {
                let mut seq = Vec::new();
                let mut cur = node;
                while arena[cur].1 != usize::MAX {
                    seq.push(events[arena[cur].2].id);
                    cur = arena[cur].1;
                }
                seq.reverse();
                return Some(seq);
            }
            let mut cands = self.executables(&state);
            if greedy {
                if let Some(i) = self.greedy(&state, &cands) {
                    cands = vec![i];
                }
            }
            let ids: Vec<EventId> = cands.iter().map(|&i| events[i].id).collect();
            let order = match &aux_pos {
                Some(pos) => guided_order_by(&ids, pos),
                None => ids.iter().rev().copied().collect(),
            };
            for id in order {
                let i = self.inst.position(id).unwrap();
                let next = self.apply(&state, i);
                if seen.insert(next.clone()) {
                    stats.states_discovered += 1;
                    arena.push((next, node, i));
                    stack.push(arena.len() - 1);
                }
            }
        }
        None
    }
}

/// Push order for a LIFO worklist so that pops follow `aux`: candidates
/// absent from `aux` first, then by decreasing position in `aux`.
pub fn guided_order(candidates: &[EventId], aux: &[EventId]) -> Vec<EventId> {
    let pos: HashMap<EventId, usize> = aux.iter().enumerate().map(|(i, e)| (*e, i)).collect();
    guided_order_by(candidates, &pos)
}

fn guided_order_by(candidates: &[EventId], pos: &HashMap<EventId, usize>) -> Vec<EventId> {
    let mut out = candidates.to_vec();
    out.sort_by_key(|e| std::cmp::Reverse(pos.get(e).copied().unwrap_or(usize::MAX)));
    out
}

/// Rebuilds the witness state reached by executing `prefix`.
fn state_of(search: &Search<'_>, prefix: &[EventId]) -> WitnessState {
    let mut s = search.initial();
    for id in prefix {
        let i = search
            .inst
            .position(*id)
            .unwrap_or_else(|| panic!("{id} is not an event of the instance"));
        s = search.apply(&s, i);
    }
    s
}

/// Active write of `var` after `prefix`.
pub fn active_write(inst: &VscInstance, prefix: &[EventId], var: VarId) -> EventId {
    let search = Search::new(inst, None);
    let s = state_of(&search, prefix);
    match search.var_slot.get(&var) {
        Some(&x) => match search.active(&s, x) {
            Write::Init => EventId::init(var),
            Write::Event(i) => inst.events()[i].id,
        },
        None => EventId::init(var),
    }
}

/// Whether some unexecuted read of `var` has all its good-writes in
/// `prefix`.
pub fn is_held(inst: &VscInstance, prefix: &[EventId], var: VarId) -> bool {
    let search = Search::new(inst, None);
    let s = state_of(&search, prefix);
    search
        .var_slot
        .get(&var)
        .is_some_and(|&x| search.held(&s, x))
}

/// Whether `e` may extend `prefix` without leaving the witness-prefix set.
pub fn executable(inst: &VscInstance, prefix: &[EventId], e: EventId) -> bool {
    let search = Search::new(inst, None);
    let s = state_of(&search, prefix);
    inst.position(e).is_some_and(|i| search.executable(&s, i))
}

/// The event the greedy rules force after `prefix`, if any.
pub fn greedy_extension(inst: &VscInstance, prefix: &[EventId]) -> Option<EventId> {
    let search = Search::new(inst, None);
    let s = state_of(&search, prefix);
    let cands = search.executables(&s);
    search.greedy(&s, &cands).map(|i| inst.events()[i].id)
}
