//! Events: single accesses of a thread to a global variable.
//!
//! An event is identified by its thread and its 1-based position among the
//! global accesses of that thread. Thread `0` is reserved for the salient
//! initial write of every variable; the init write of variable `v` has
//! index `v`.

use std::fmt;
use std::str::FromStr;

/// Dense identifier of a global variable (data variable or mutex).
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct VarId(pub u32);

impl fmt::Display for VarId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "v{}", self.0)
    }
}

/// Thread identifier used for the init pseudo-thread.
pub const INIT_THREAD: u32 = 0;

/// `(thread, index)` identity of an event.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct EventId {
    pub thread: u32,
    pub index: u32,
}

impl EventId {
    pub const fn new(thread: u32, index: u32) -> Self {
        Self { thread, index }
    }

    /// Identifier of the initial write of `var`.
    pub const fn init(var: VarId) -> Self {
        Self {
            thread: INIT_THREAD,
            index: var.0,
        }
    }

    pub const fn is_init(&self) -> bool {
        self.thread == INIT_THREAD
    }
}

impl fmt::Display for EventId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}:{}", self.thread, self.index)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
#[error("malformed event id `{0}` (expected `<thread>:<index>`)")]
pub struct ParseEventIdError(String);

impl FromStr for EventId {
    type Err = ParseEventIdError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let err = || ParseEventIdError(s.to_string());
        let (t, i) = s.split_once(':').ok_or_else(err)?;
        Ok(EventId::new(
            t.trim().parse().map_err(|_| err())?,
            i.trim().parse().map_err(|_| err())?,
        ))
    }
}

/// What an event does to its variable.
///
/// Lock acquire is a read of the mutex variable and lock release a write of
/// it; the model treats them as such everywhere except that an acquire is
/// only enabled while the mutex is free.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum EventKind {
    Read,
    Write,
    Acquire,
    Release,
}

impl EventKind {
    pub const fn is_read(self) -> bool {
        matches!(self, EventKind::Read | EventKind::Acquire)
    }

    pub const fn is_write(self) -> bool {
        matches!(self, EventKind::Write | EventKind::Release)
    }

    pub const fn is_mutex(self) -> bool {
        matches!(self, EventKind::Acquire | EventKind::Release)
    }
}

/// An event together with the value it reads or writes.
///
/// Outside of a concrete trace (e.g. in a VSC instance) the value of a read
/// carries no meaning.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Event {
    pub id: EventId,
    pub kind: EventKind,
    pub var: VarId,
    pub value: i64,
}

impl Event {
    pub const fn new(id: EventId, kind: EventKind, var: VarId, value: i64) -> Self {
        Self {
            id,
            kind,
            var,
            value,
        }
    }

    /// The salient initial write of `var` (value 0).
    pub const fn init(var: VarId) -> Self {
        Self {
            id: EventId::init(var),
            kind: EventKind::Write,
            var,
            value: 0,
        }
    }

    pub const fn thread(&self) -> u32 {
        self.id.thread
    }

    pub const fn is_read(&self) -> bool {
        self.kind.is_read()
    }

    pub const fn is_write(&self) -> bool {
        self.kind.is_write()
    }

    /// Same variable and at least one of the two is a write.
    pub fn conflicts(&self, other: &Event) -> bool {
        self.var == other.var && (self.is_write() || other.is_write())
    }
}

impl fmt::Display for Event {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.kind {
            EventKind::Read => write!(f, "r({})@{}", self.var, self.id),
            EventKind::Write => write!(f, "w({},{})@{}", self.var, self.value, self.id),
            EventKind::Acquire => write!(f, "acq({})@{}", self.var, self.id),
            EventKind::Release => write!(f, "rel({})@{}", self.var, self.id),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn event_id_text_round_trip() {
        let id = EventId::new(3, 12);
        assert_eq!(id.to_string(), "3:12");
        assert_eq!("3:12".parse::<EventId>().unwrap(), id);
        assert!("3-12".parse::<EventId>().is_err());
        assert!("x:1".parse::<EventId>().is_err());
    }

    #[test]
    fn conflicts_needs_a_write() {
        let x = VarId(0);
        let r1 = Event::new(EventId::new(1, 1), EventKind::Read, x, 0);
        let r2 = Event::new(EventId::new(2, 1), EventKind::Read, x, 0);
        let w = Event::new(EventId::new(2, 2), EventKind::Write, x, 1);
        let wy = Event::new(EventId::new(2, 3), EventKind::Write, VarId(1), 1);
        assert!(!r1.conflicts(&r2));
        assert!(r1.conflicts(&w));
        assert!(!w.conflicts(&wy));
        assert!(Event::init(x).conflicts(&r1));
    }
}
