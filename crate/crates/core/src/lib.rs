//! Stateless model checking of concurrent programs up to
//! reads-value-from equivalence.

pub mod event;
pub mod explorer;
pub mod oracle;
pub mod order;
pub mod program;
pub mod semantics;
pub mod vsc;

pub use event::{Event, EventId, EventKind, VarId};
pub use order::PartialOrder;
pub use program::{parse_program, Program, Trace};
