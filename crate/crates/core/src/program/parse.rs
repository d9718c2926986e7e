//! Lexer and single-pass compiler for the program DSL.
//!
//! ```text
//! program   := thread*
//! thread    := "thread" IDENT "{" stmt* "}"
//! stmt      := "write" VAR expr ";" | LOCAL "=" "read" VAR ";"
//!            | LOCAL "=" expr ";" | "if" cond "{" stmt* "}" ("else" "{" stmt* "}")?
//!            | "repeat" INT "{" stmt* "}" | "lock" MUTEX ";" | "unlock" MUTEX ";"
//!            | "assert" cond ";"
//! ```
//!
//! The trailing `;` of simple statements is optional. `//` and `#` start
//! line comments.

use std::collections::HashMap;

use super::{
    AssertId, AssertSite, BinOp, CmpOp, Cond, Expr, Instr, Program, Slot, ThreadCode, Variable,
};
use crate::event::VarId;

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
#[error("{line}:{col}: {message}")]
pub struct ParseError {
    pub line: usize,
    pub col: usize,
    pub message: String,
}

#[derive(Debug, Clone, PartialEq, Eq)]
enum Tok {
    Ident(String),
    Int(i64),
    Sym(&'static str),
    Eof,
}

#[derive(Debug, Clone)]
struct Token {
    tok: Tok,
    line: usize,
    col: usize,
}

const SYMBOLS: &[&str] = &[
    "==", "!=", "<=", ">=", "&&", "||", "{", "}", "(", ")", ";", "=", "<", ">", "+", "-", "*", "!",
];

fn lex(src: &str) -> Result<Vec<Token>, ParseError> {
    let mut out = Vec::new();
    for (lineno, line) in src.lines().enumerate() {
        let line_no = lineno + 1;
        let chars: Vec<char> = line.chars().collect();
        let mut i = 0;
        while i < chars.len() {
            let c = chars[i];
            let col = i + 1;
            if c.is_whitespace() {
                i += 1;
                continue;
            }
            if c == '#' || (c == '/' && chars.get(i + 1) == Some(&'/')) {
                break;
            }
            if c.is_ascii_digit() {
                let start = i;
                while i < chars.len() && chars[i].is_ascii_digit() {
                    i += 1;
                }
                let text: String = chars[start..i].iter().collect();
                let value = text.parse::<i64>().map_err(|_| ParseError {
                    line: line_no,
                    col,
                    message: format!("integer literal `{text}` out of range"),
                })?;
                out.push(Token {
                    tok: Tok::Int(value),
                    line: line_no,
                    col,
                });
                continue;
            }
            if c.is_alphabetic() || c == '_' {
                let start = i;
                while i < chars.len() && (chars[i].is_alphanumeric() || chars[i] == '_') {
                    i += 1;
                }
                out.push(Token {
                    tok: Tok::Ident(chars[start..i].iter().collect()),
                    line: line_no,
                    col,
                });
                continue;
            }
            let rest: String = chars[i..chars.len().min(i + 2)].iter().collect();
            match SYMBOLS.iter().find(|s| rest.starts_with(**s)) {
                Some(sym) => {
                    out.push(Token {
                        tok: Tok::Sym(sym),
                        line: line_no,
                        col,
                    });
                    i += sym.len();
                }
                None => {
                    return Err(ParseError {
                        line: line_no,
                        col,
                        message: format!("unexpected character `{c}`"),
                    })
                }
            }
        }
    }
    let (line, col) = out.last().map_or((1, 1), |t| (t.line, t.col + 1));
    out.push(Token {
        tok: Tok::Eof,
        line,
        col,
    });
    Ok(out)
}

const KEYWORDS: &[&str] = &[
    "thread", "write", "read", "if", "else", "repeat", "lock", "unlock", "assert",
];

struct Parser {
    toks: Vec<Token>,
    pos: usize,
    vars: Vec<Variable>,
    var_ids: HashMap<String, VarId>,
    asserts: Vec<AssertSite>,
}

/// Per-thread compilation state.
struct ThreadCx {
    id: u32,
    code: Vec<Instr>,
    locals: HashMap<String, Slot>,
    slots: usize,
    access_stmts: usize,
}

impl ThreadCx {
    fn fresh_slot(&mut self) -> Slot {
        self.slots += 1;
        self.slots - 1
    }
}

/// Parses and compiles DSL source into a [`Program`].
pub fn parse_program(src: &str) -> Result<Program, ParseError> {
    let mut p = Parser {
        toks: lex(src)?,
        pos: 0,
        vars: Vec::new(),
        var_ids: HashMap::new(),
        asserts: Vec::new(),
    };
    let mut threads: Vec<ThreadCode> = Vec::new();
    while !p.at_eof() {
        let kw = p.peek().clone();
        p.expect_keyword("thread")?;
        let name = p.ident("thread name")?;
        if threads.iter().any(|t| t.name == name) {
            return Err(p.error_at(&kw, format!("duplicate thread name `{name}`")));
        }
        let mut cx = ThreadCx {
            id: threads.len() as u32 + 1,
            code: Vec::new(),
            locals: HashMap::new(),
            slots: 0,
            access_stmts: 0,
        };
        let max_events = p.block(&mut cx)?;
        threads.push(ThreadCode {
            name,
            code: cx.code,
            slots: cx.slots,
            access_stmts: cx.access_stmts,
            max_events,
        });
    }
    Ok(Program {
        threads,
        vars: p.vars,
        asserts: p.asserts,
    })
}

impl Parser {
    fn peek(&self) -> &Token {
        &self.toks[self.pos]
    }

    fn at_eof(&self) -> bool {
        self.peek().tok == Tok::Eof
    }

    fn bump(&mut self) -> Token {
        let t = self.toks[self.pos].clone();
        if t.tok != Tok::Eof {
            self.pos += 1;
        }
        t
    }

    fn error_at(&self, t: &Token, message: impl Into<String>) -> ParseError {
        ParseError {
            line: t.line,
            col: t.col,
            message: message.into(),
        }
    }

    fn describe(t: &Tok) -> String {
        match t {
            Tok::Ident(s) => format!("`{s}`"),
            Tok::Int(i) => format!("`{i}`"),
            Tok::Sym(s) => format!("`{s}`"),
            Tok::Eof => "end of input".into(),
        }
    }

    fn is_sym(&self, s: &str) -> bool {
        matches!(&self.peek().tok, Tok::Sym(x) if *x == s)
    }

    fn is_keyword(&self, kw: &str) -> bool {
        matches!(&self.peek().tok, Tok::Ident(x) if x == kw)
    }

    fn eat_sym(&mut self, s: &str) -> bool {
        if self.is_sym(s) {
            self.bump();
            true
        } else {
            false
        }
    }

    fn expect_sym(&mut self, s: &str) -> Result<(), ParseError> {
        if self.eat_sym(s) {
            Ok(())
        } else {
            let t = self.peek().clone();
            Err(self.error_at(
                &t,
                format!("expected `{s}`, found {}", Self::describe(&t.tok)),
            ))
        }
    }

    fn expect_keyword(&mut self, kw: &str) -> Result<(), ParseError> {
        if self.is_keyword(kw) {
            self.bump();
            Ok(())
        } else {
            let t = self.peek().clone();
            Err(self.error_at(
                &t,
                format!("expected `{kw}`, found {}", Self::describe(&t.tok)),
            ))
        }
    }

    fn ident(&mut self, what: &str) -> Result<String, ParseError> {
        let t = self.bump();
        match t.tok {
            Tok::Ident(ref s) if !KEYWORDS.contains(&s.as_str()) => Ok(s.clone()),
            ref other => Err(self.error_at(
                &t,
                format!("expected {what}, found {}", Self::describe(other)),
            )),
        }
    }

    fn end_stmt(&mut self) {
        self.eat_sym(";");
    }

    fn global(&mut self, t: &Token, name: &str, mutex: bool) -> Result<VarId, ParseError> {
        if let Some(&id) = self.var_ids.get(name) {
            let v = &self.vars[id.0 as usize];
            if v.is_mutex != mutex {
                let (a, b) = if mutex {
                    ("mutex", "variable")
                } else {
                    ("variable", "mutex")
                };
                return Err(
                    self.error_at(t, format!("`{name}` used as a {a} but previously as a {b}"))
                );
            }
            return Ok(id);
        }
        let id = VarId(self.vars.len() as u32);
        self.vars.push(Variable {
            name: name.to_string(),
            is_mutex: mutex,
        });
        self.var_ids.insert(name.to_string(), id);
        Ok(id)
    }

    /// `{ stmt* }`; returns the maximum number of events the block emits.
    fn block(&mut self, cx: &mut ThreadCx) -> Result<usize, ParseError> {
        self.expect_sym("{")?;
        let mut total = 0usize;
        while !self.eat_sym("}") {
            if self.at_eof() {
                let t = self.peek().clone();
                return Err(self.error_at(&t, "unterminated block, expected `}`"));
            }
            total = total.saturating_add(self.stmt(cx)?);
        }
        Ok(total)
    }

    fn stmt(&mut self, cx: &mut ThreadCx) -> Result<usize, ParseError> {
        let t = self.peek().clone();
        let Tok::Ident(word) = &t.tok else {
            return Err(self.error_at(
                &t,
                format!("expected a statement, found {}", Self::describe(&t.tok)),
            ));
        };
        match word.as_str() {
            "write" => {
                self.bump();
                let vt = self.peek().clone();
                let name = self.ident("variable name")?;
                let var = self.global(&vt, &name, false)?;
                let value = self.expr(cx)?;
                self.end_stmt();
                cx.code.push(Instr::Write { var, value });
                cx.access_stmts += 1;
                Ok(1)
            }
            "lock" | "unlock" => {
                self.bump();
                let vt = self.peek().clone();
                let name = self.ident("mutex name")?;
                let var = self.global(&vt, &name, true)?;
                self.end_stmt();
                cx.code.push(if word == "lock" {
                    Instr::Lock(var)
                } else {
                    Instr::Unlock(var)
                });
                cx.access_stmts += 1;
                Ok(1)
            }
            "assert" => {
                self.bump();
                let cond = self.cond(cx)?;
                self.end_stmt();
                let id = AssertId(self.asserts.len() as u32);
                self.asserts.push(AssertSite {
                    thread: cx.id,
                    line: t.line,
                    col: t.col,
                });
                cx.code.push(Instr::Assert { cond, id });
                Ok(0)
            }
            "if" => {
                self.bump();
                let cond = self.cond(cx)?;
                let branch = cx.code.len();
                cx.code.push(Instr::JumpUnless { cond, target: 0 });
                let then_len = self.block(cx)?;
                let else_len = if self.is_keyword("else") {
                    self.bump();
                    let jump = cx.code.len();
                    cx.code.push(Instr::Jump(0));
                    let else_start = cx.code.len();
                    let len = if self.is_keyword("if") {
                        self.stmt(cx)?
                    } else {
                        self.block(cx)?
                    };
                    let end = cx.code.len();
                    cx.code[jump] = Instr::Jump(end);
                    patch_target(&mut cx.code[branch], else_start);
                    len
                } else {
                    let end = cx.code.len();
                    patch_target(&mut cx.code[branch], end);
                    0
                };
                Ok(then_len.max(else_len))
            }
            "repeat" => {
                self.bump();
                let nt = self.bump();
                let count = match nt.tok {
                    Tok::Int(n) if n >= 0 && n <= u32::MAX as i64 => n as u32,
                    ref other => {
                        return Err(self.error_at(
                            &nt,
                            format!("expected loop bound, found {}", Self::describe(other)),
                        ))
                    }
                };
                let counter = cx.fresh_slot();
                cx.code.push(Instr::LoopInit { counter, count });
                let top = cx.code.len();
                cx.code.push(Instr::LoopNext { counter, exit: 0 });
                let body = self.block(cx)?;
                cx.code.push(Instr::Jump(top));
                let exit = cx.code.len();
                cx.code[top] = Instr::LoopNext { counter, exit };
                Ok(body.saturating_mul(count as usize))
            }
            "while" | "loop" | "for" | "do" => Err(self.error_at(
                &t,
                format!(
                    "unbounded loop `{word}`: only `repeat <bound> {{ ... }}` loops are allowed"
                ),
            )),
            _ if KEYWORDS.contains(&word.as_str()) => {
                Err(self.error_at(&t, format!("unexpected keyword `{word}`")))
            }
            _ => {
                let name = word.clone();
                self.bump();
                self.expect_sym("=")?;
                if self.is_keyword("read") {
                    self.bump();
                    let vt = self.peek().clone();
                    let gname = self.ident("variable name")?;
                    let var = self.global(&vt, &gname, false)?;
                    self.end_stmt();
                    let dst = local_slot(cx, &name);
                    cx.code.push(Instr::Read { dst, var });
                    cx.access_stmts += 1;
                    Ok(1)
                } else {
                    let value = self.expr(cx)?;
                    self.end_stmt();
                    let dst = local_slot(cx, &name);
                    cx.code.push(Instr::Assign { dst, value });
                    Ok(0)
                }
            }
        }
    }

    fn cond(&mut self, cx: &ThreadCx) -> Result<Cond, ParseError> {
        let mut lhs = self.conj(cx)?;
        while self.eat_sym("||") {
            let rhs = self.conj(cx)?;
            lhs = Cond::Or(Box::new(lhs), Box::new(rhs));
        }
        Ok(lhs)
    }

    fn conj(&mut self, cx: &ThreadCx) -> Result<Cond, ParseError> {
        let mut lhs = self.cond_atom(cx)?;
        while self.eat_sym("&&") {
            let rhs = self.cond_atom(cx)?;
            lhs = Cond::And(Box::new(lhs), Box::new(rhs));
        }
        Ok(lhs)
    }

    fn cond_atom(&mut self, cx: &ThreadCx) -> Result<Cond, ParseError> {
        if self.eat_sym("!") {
            return Ok(Cond::Not(Box::new(self.cond_atom(cx)?)));
        }
        if self.is_sym("(") {
            // Either a parenthesised condition or a comparison whose left
            // operand starts with a parenthesised expression.
            let save = self.pos;
            if let Ok(c) = self.comparison(cx) {
                return Ok(c);
            }
            self.pos = save;
            self.bump();
            let c = self.cond(cx)?;
            self.expect_sym(")")?;
            return Ok(c);
        }
        self.comparison(cx)
    }

    fn comparison(&mut self, cx: &ThreadCx) -> Result<Cond, ParseError> {
        let lhs = self.expr(cx)?;
        let t = self.bump();
        let op = match t.tok {
            Tok::Sym("==") => CmpOp::Eq,
            Tok::Sym("!=") => CmpOp::Ne,
            Tok::Sym("<") => CmpOp::Lt,
            Tok::Sym("<=") => CmpOp::Le,
            Tok::Sym(">") => CmpOp::Gt,
            Tok::Sym(">=") => CmpOp::Ge,
            ref other => {
                return Err(self.error_at(
                    &t,
                    format!(
                        "expected a comparison operator, found {}",
                        Self::describe(other)
                    ),
                ))
            }
        };
        let rhs = self.expr(cx)?;
        Ok(Cond::Cmp(op, lhs, rhs))
    }

    fn expr(&mut self, cx: &ThreadCx) -> Result<Expr, ParseError> {
        let mut lhs = self.term(cx)?;
        loop {
            let op = if self.eat_sym("+") {
                BinOp::Add
            } else if self.eat_sym("-") {
                BinOp::Sub
            } else {
                return Ok(lhs);
            };
            let rhs = self.term(cx)?;
            lhs = Expr::Bin(op, Box::new(lhs), Box::new(rhs));
        }
    }

    fn term(&mut self, cx: &ThreadCx) -> Result<Expr, ParseError> {
        let mut lhs = self.unary(cx)?;
        while self.eat_sym("*") {
            let rhs = self.unary(cx)?;
            lhs = Expr::Bin(BinOp::Mul, Box::new(lhs), Box::new(rhs));
        }
        Ok(lhs)
    }

    fn unary(&mut self, cx: &ThreadCx) -> Result<Expr, ParseError> {
        if self.eat_sym("-") {
            return Ok(Expr::Neg(Box::new(self.unary(cx)?)));
        }
        let t = self.bump();
        match t.tok {
            Tok::Int(v) => Ok(Expr::Const(v)),
            Tok::Sym("(") => {
                let e = self.expr(cx)?;
                self.expect_sym(")")?;
                Ok(e)
            }
            Tok::Ident(ref name) if !KEYWORDS.contains(&name.as_str()) => match cx.locals.get(name)
            {
                Some(&slot) => Ok(Expr::Local(slot)),
                None => Err(self.error_at(&t, format!("local `{name}` used before assignment"))),
            },
            ref other => Err(self.error_at(
                &t,
                format!("expected an expression, found {}", Self::describe(other)),
            )),
        }
    }
}

fn local_slot(cx: &mut ThreadCx, name: &str) -> Slot {
    if let Some(&s) = cx.locals.get(name) {
        return s;
    }
    let s = cx.fresh_slot();
    cx.locals.insert(name.to_string(), s);
    s
}

fn patch_target(instr: &mut Instr, to: usize) {
    if let Instr::JumpUnless { target, .. } = instr {
        *target = to;
    }
}
