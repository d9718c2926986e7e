//! Deterministic execution of a [`Program`] under a caller-chosen schedule.

use std::collections::BTreeSet;

use super::{AssertId, Instr, Program};
use crate::event::{Event, EventId, EventKind, VarId};

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum ExtendError {
    #[error("event {0} is not enabled")]
    NotEnabled(EventId),
}

#[derive(Clone, Debug)]
struct ThreadState {
    pc: usize,
    locals: Vec<i64>,
    /// Number of global accesses executed so far.
    executed: u32,
    /// Mutexes currently held by this thread.
    held: Vec<VarId>,
}

/// A trace of a program: the executed event sequence with its value
/// function, plus the interpreter state needed to compute the enabled
/// events and extend it.
///
/// Every thread is kept parked at its next global access (or at the end of
/// its code); local statements, including assertions, are executed eagerly.
#[derive(Clone, Debug)]
pub struct Trace<'p> {
    program: &'p Program,
    events: Vec<Event>,
    threads: Vec<ThreadState>,
    memory: Vec<i64>,
    owner: Vec<Option<u32>>,
    violations: BTreeSet<AssertId>,
}

impl<'p> Trace<'p> {
    /// The empty trace: only the (implicit) init writes have happened.
    pub fn empty(program: &'p Program) -> Self {
        let mut t = Trace {
            program,
            events: Vec::new(),
            threads: program
                .threads
                .iter()
                .map(|tc| ThreadState {
                    pc: 0,
                    locals: vec![0; tc.slots],
                    executed: 0,
                    held: Vec::new(),
                })
                .collect(),
            memory: vec![0; program.vars.len()],
            owner: vec![None; program.vars.len()],
            violations: BTreeSet::new(),
        };
        for i in 0..t.threads.len() {
            t.advance(i);
        }
        t
    }

    /// Replays `schedule` from the empty trace.
    pub fn replay(program: &'p Program, schedule: &[EventId]) -> Result<Self, ExtendError> {
        let mut t = Trace::empty(program);
        for &id in schedule {
            t.extend(id)?;
        }
        Ok(t)
    }

    pub fn program(&self) -> &'p Program {
        self.program
    }

    pub fn events(&self) -> &[Event] {
        &self.events
    }

    pub fn ids(&self) -> Vec<EventId> {
        self.events.iter().map(|e| e.id).collect()
    }

    pub fn len(&self) -> usize {
        self.events.len()
    }

    pub fn is_empty(&self) -> bool {
        self.events.is_empty()
    }

    /// Number of events of `thread` in the trace.
    pub fn thread_len(&self, thread: u32) -> u32 {
        match (thread as usize).checked_sub(1) {
            Some(i) => self.threads[i].executed,
            None => 0,
        }
    }

    /// Assertions that failed along this trace.
    pub fn violations(&self) -> &BTreeSet<AssertId> {
        &self.violations
    }

    /// The next event `thread` would execute, enabled or not.
    fn pending(&self, ti: usize) -> Option<Event> {
        let ts = &self.threads[ti];
        let code = &self.program.threads[ti].code;
        let id = EventId::new(ti as u32 + 1, ts.executed + 1);
        let ev = match code.get(ts.pc)? {
            Instr::Write { var, value } => {
                Event::new(id, EventKind::Write, *var, value.eval(&ts.locals))
            }
            Instr::Read { var, .. } => {
                Event::new(id, EventKind::Read, *var, self.memory[var.0 as usize])
            }
            Instr::Lock(m) => Event::new(id, EventKind::Acquire, *m, self.memory[m.0 as usize]),
            Instr::Unlock(m) => Event::new(id, EventKind::Release, *m, 0),
            _ => unreachable!("threads are parked at accesses"),
        };
        Some(ev)
    }

    fn is_blocked(&self, ev: &Event) -> bool {
        ev.kind == EventKind::Acquire && self.owner[ev.var.0 as usize].is_some()
    }

    /// Events that can be appended, in thread order. Reads carry the value
    /// they would observe if executed now.
    pub fn enabled(&self) -> Vec<Event> {
        (0..self.threads.len())
            .filter_map(|i| self.pending(i))
            .filter(|e| !self.is_blocked(e))
            .collect()
    }

    /// The enabled event of `thread`, if any.
    pub fn enabled_of(&self, thread: u32) -> Option<Event> {
        let i = (thread as usize).checked_sub(1)?;
        if i >= self.threads.len() {
            return None;
        }
        self.pending(i).filter(|e| !self.is_blocked(e))
    }

    pub fn is_maximal(&self) -> bool {
        self.enabled().is_empty()
    }

    /// Maximal, but some thread still has an access it can never perform.
    pub fn is_deadlocked(&self) -> bool {
        self.is_maximal() && (0..self.threads.len()).any(|i| self.pending(i).is_some())
    }

    /// Appends the enabled event `id`, then runs its thread's local
    /// statements up to the next global access.
    pub fn extend(&mut self, id: EventId) -> Result<&Event, ExtendError> {
        let ev = self
            .enabled_of(id.thread)
            .filter(|e| e.id == id)
            .ok_or(ExtendError::NotEnabled(id))?;
        let ti = id.thread as usize - 1;
        let v = ev.var.0 as usize;
        match ev.kind {
            EventKind::Write => self.memory[v] = ev.value,
            EventKind::Read => {
                if let Instr::Read { dst, .. } = self.program.threads[ti].code[self.threads[ti].pc]
                {
                    self.threads[ti].locals[dst] = ev.value;
                }
            }
            EventKind::Acquire => {
                self.owner[v] = Some(id.thread);
                self.threads[ti].held.push(ev.var);
            }
            EventKind::Release => {
                self.owner[v] = None;
                self.memory[v] = ev.value;
                self.threads[ti].held.retain(|m| *m != ev.var);
            }
        }
        let ts = &mut self.threads[ti];
        ts.executed += 1;
        ts.pc += 1;
        self.events.push(ev);
        self.advance(ti);
        Ok(self.events.last().expect("just pushed"))
    }

    /// Like [`extend`](Self::extend) but leaves `self` untouched.
    pub fn extended(&self, id: EventId) -> Result<Self, ExtendError> {
        let mut t = self.clone();
        t.extend(id)?;
        Ok(t)
    }

    /// Runs local statements of thread `ti` until its next access or the
    /// end of its code. Unlocking a mutex the thread does not hold is a
    /// local no-op.
    fn advance(&mut self, ti: usize) {
        let program = self.program;
        let code = &program.threads[ti].code;
        let ts = &mut self.threads[ti];
        while let Some(instr) = code.get(ts.pc) {
            match instr {
                Instr::Unlock(m) if !ts.held.contains(m) => ts.pc += 1,
                i if i.is_access() => return,
                Instr::Assign { dst, value } => {
                    ts.locals[*dst] = value.eval(&ts.locals);
                    ts.pc += 1;
                }
                Instr::JumpUnless { cond, target } => {
                    ts.pc = if cond.eval(&ts.locals) {
                        ts.pc + 1
                    } else {
                        *target
                    };
                }
                Instr::Jump(target) => ts.pc = *target,
                Instr::LoopInit { counter, count } => {
                    ts.locals[*counter] = *count as i64;
                    ts.pc += 1;
                }
                Instr::LoopNext { counter, exit } => {
                    if ts.locals[*counter] <= 0 {
                        ts.pc = *exit;
                    } else {
                        ts.locals[*counter] -= 1;
                        ts.pc += 1;
                    }
                }
                Instr::Assert { cond, id } => {
                    if !cond.eval(&ts.locals) {
                        self.violations.insert(*id);
                    }
                    ts.pc += 1;
                }
                _ => unreachable!(),
            }
        }
    }
}
