//! Concurrent programs: a small DSL of deterministic threads over shared
//! global variables and mutexes, compiled to a flat instruction list and
//! executed event-by-event by [`Trace`].

mod interp;
mod parse;

use std::fmt;

use crate::event::VarId;

pub use interp::{ExtendError, Trace};
pub use parse::{parse_program, ParseError};

/// Index of an assertion site, in source order across the whole program.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct AssertId(pub u32);

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Variable {
    pub name: String,
    pub is_mutex: bool,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct AssertSite {
    /// 1-based thread id.
    pub thread: u32,
    pub line: usize,
    pub col: usize,
}

/// A parsed, immutable concurrent program.
#[derive(Clone, Debug)]
pub struct Program {
    pub(crate) threads: Vec<ThreadCode>,
    pub(crate) vars: Vec<Variable>,
    pub(crate) asserts: Vec<AssertSite>,
}

#[derive(Clone, Debug)]
pub(crate) struct ThreadCode {
    pub(crate) name: String,
    pub(crate) code: Vec<Instr>,
    pub(crate) slots: usize,
    /// Global-access statements as written (loops not unrolled).
    pub(crate) access_stmts: usize,
    /// Upper bound on the events one execution of this thread produces.
    pub(crate) max_events: usize,
}

impl Program {
    pub fn num_threads(&self) -> usize {
        self.threads.len()
    }

    pub fn thread_name(&self, thread: u32) -> Option<&str> {
        let i = (thread as usize).checked_sub(1)?;
        self.threads.get(i).map(|t| t.name.as_str())
    }

    /// 1-based id of the thread called `name`.
    pub fn thread_id(&self, name: &str) -> Option<u32> {
        self.threads
            .iter()
            .position(|t| t.name == name)
            .map(|i| i as u32 + 1)
    }

    pub fn variables(&self) -> &[Variable] {
        &self.vars
    }

    pub fn var_id(&self, name: &str) -> Option<VarId> {
        self.vars
            .iter()
            .position(|v| v.name == name)
            .map(|i| VarId(i as u32))
    }

    pub fn var_name(&self, var: VarId) -> &str {
        &self.vars[var.0 as usize].name
    }

    pub fn is_mutex(&self, var: VarId) -> bool {
        self.vars[var.0 as usize].is_mutex
    }

    pub fn asserts(&self) -> &[AssertSite] {
        &self.asserts
    }

    /// Human-readable label of an assertion, `<thread>:<line>`.
    pub fn assert_label(&self, id: AssertId) -> String {
        let site = &self.asserts[id.0 as usize];
        format!(
            "{}:{}",
            self.thread_name(site.thread).unwrap_or("?"),
            site.line
        )
    }

    /// Number of read/write/lock/unlock statements in the source text.
    pub fn access_statements(&self) -> usize {
        self.threads.iter().map(|t| t.access_stmts).sum()
    }

    /// Static bound on the length of any trace, from the loop bounds.
    pub fn max_trace_len(&self) -> usize {
        self.threads.iter().map(|t| t.max_events).sum()
    }
}

pub(crate) type Slot = usize;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub(crate) enum BinOp {
    Add,
    Sub,
    Mul,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub(crate) enum CmpOp {
    Eq,
    Ne,
    Lt,
    Le,
    Gt,
    Ge,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub(crate) enum Expr {
    Const(i64),
    Local(Slot),
    Neg(Box<Expr>),
    Bin(BinOp, Box<Expr>, Box<Expr>),
}

impl Expr {
    pub(crate) fn eval(&self, locals: &[i64]) -> i64 {
        match self {
            Expr::Const(c) => *c,
            Expr::Local(s) => locals[*s],
            Expr::Neg(e) => e.eval(locals).wrapping_neg(),
            Expr::Bin(op, a, b) => {
                let (a, b) = (a.eval(locals), b.eval(locals));
                match op {
                    BinOp::Add => a.wrapping_add(b),
                    BinOp::Sub => a.wrapping_sub(b),
                    BinOp::Mul => a.wrapping_mul(b),
                }
            }
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub(crate) enum Cond {
    Cmp(CmpOp, Expr, Expr),
    Not(Box<Cond>),
    And(Box<Cond>, Box<Cond>),
    Or(Box<Cond>, Box<Cond>),
}

impl Cond {
    pub(crate) fn eval(&self, locals: &[i64]) -> bool {
        match self {
            Cond::Cmp(op, a, b) => {
                let (a, b) = (a.eval(locals), b.eval(locals));
                match op {
                    CmpOp::Eq => a == b,
                    CmpOp::Ne => a != b,
                    CmpOp::Lt => a < b,
                    CmpOp::Le => a <= b,
                    CmpOp::Gt => a > b,
                    CmpOp::Ge => a >= b,
                }
            }
            Cond::Not(c) => !c.eval(locals),
            Cond::And(a, b) => a.eval(locals) && b.eval(locals),
            Cond::Or(a, b) => a.eval(locals) || b.eval(locals),
        }
    }
}

/// Flat thread code. Loops use a hidden counter slot:
/// `LoopInit; top: LoopNext(exit); body; Jump(top); exit:`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub(crate) enum Instr {
    Write { var: VarId, value: Expr },
    Read { dst: Slot, var: VarId },
    Lock(VarId),
    Unlock(VarId),
    Assign { dst: Slot, value: Expr },
    JumpUnless { cond: Cond, target: usize },
    Jump(usize),
    LoopInit { counter: Slot, count: u32 },
    LoopNext { counter: Slot, exit: usize },
    Assert { cond: Cond, id: AssertId },
}

impl Instr {
    pub(crate) fn is_access(&self) -> bool {
        matches!(
            self,
            Instr::Write { .. } | Instr::Read { .. } | Instr::Lock(_) | Instr::Unlock(_)
        )
    }
}

impl fmt::Display for Program {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "program: {} threads, {} variables, {} asserts",
            self.threads.len(),
            self.vars.len(),
            self.asserts.len()
        )
    }
}
