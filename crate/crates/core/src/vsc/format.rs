//! Line-oriented text form of VSC instances.
//!
//! ```text
//! # comment
//! E 1 1 W x 1
//! E 2 1 R x
//! G 2 1 : 1:1 init
//! ```
//!
//! Kinds are `R`, `W`, `A` (lock acquire) and `U` (lock release). Write
//! references are `<thread>:<index>`, or `init` for the initial write of the
//! read's variable. Variables are numbered by first appearance.

use std::collections::{BTreeMap, BTreeSet, HashMap};

use crate::event::{Event, EventId, EventKind, VarId};

use super::{InstanceError, VscInstance};

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum FormatError {
    #[error("line {line}: {message}")]
    Syntax { line: usize, message: String },
    #[error(transparent)]
    Instance(#[from] InstanceError),
}

fn syntax(line: usize, message: impl Into<String>) -> FormatError {
    FormatError::Syntax {
        line,
        message: message.into(),
    }
}

/// Parses an instance. Returns it along with the variable names in id order.
pub fn parse_instance(src: &str) -> Result<(VscInstance, Vec<String>), FormatError> {
    let mut vars: HashMap<String, VarId> = HashMap::new();
    let mut names = Vec::new();
    let mut events = Vec::new();
    let mut good: Vec<(usize, EventId, Vec<String>)> = Vec::new();

    for (n, raw) in src.lines().enumerate() {
        let line = n + 1;
        let text = raw.split('#').next().unwrap_or("").trim();
        if text.is_empty() {
            continue;
        }
        let toks: Vec<&str> = text.split_whitespace().collect();
        let num = |s: &str| -> Result<u32, FormatError> {
            s.parse()
                .map_err(|_| syntax(line, format!("expected a number, found `{s}`")))
        };
        match toks[0] {
            "E" => {
                if toks.len() < 5 || toks.len() > 6 {
                    return Err(syntax(
                        line,
                        "expected `E <thread> <index> <kind> <var> [<value>]`",
                    ));
                }
                let id = EventId::new(num(toks[1])?, num(toks[2])?);
                let kind = match toks[3] {
                    "R" => EventKind::Read,
                    "W" => EventKind::Write,
                    "A" => EventKind::Acquire,
                    "U" => EventKind::Release,
                    k => return Err(syntax(line, format!("unknown event kind `{k}`"))),
                };
                let next = VarId(names.len() as u32);
                let var = *vars.entry(toks[4].to_string()).or_insert_with(|| {
                    names.push(toks[4].to_string());
                    next
                });
                let value = match toks.get(5) {
                    Some(v) => v
                        .parse()
                        .map_err(|_| syntax(line, format!("bad value `{v}`")))?,
                    None => 0,
                };
                events.push(Event::new(id, kind, var, value));
            }
            "G" => {
                if toks.len() < 5 || toks[3] != ":" {
                    return Err(syntax(line, "expected `G <thread> <index> : <writes...>`"));
                }
                let id = EventId::new(num(toks[1])?, num(toks[2])?);
                good.push((line, id, toks[4..].iter().map(|s| s.to_string()).collect()));
            }
            other => return Err(syntax(line, format!("unknown directive `{other}`"))),
        }
    }

    let var_of: HashMap<EventId, VarId> = events.iter().map(|e| (e.id, e.var)).collect();
    let mut map: BTreeMap<EventId, BTreeSet<EventId>> = BTreeMap::new();
    for (line, r, refs) in good {
        let var = *var_of
            .get(&r)
            .ok_or_else(|| syntax(line, format!("unknown read {r}")))?;
        let set = map.entry(r).or_default();
        for s in refs {
            let w = if s == "init" {
                EventId::init(var)
            } else {
                s.parse::<EventId>()
                    .map_err(|e| syntax(line, e.to_string()))?
            };
            set.insert(w);
        }
    }
    Ok((VscInstance::new(events, map)?, names))
}

/// Whitespace-separated event ids.
pub fn format_witness(seq: &[EventId]) -> String {
    seq.iter()
        .map(|e| e.to_string())
        .collect::<Vec<_>>()
        .join(" ")
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::vsc::{verify_sc, VscOptions};

    #[test]
    fn parse_and_solve() {
        let src = "# two threads\nE 1 1 W x 1\nE 2 1 R x\nG 2 1 : 1:1\n";
        let (inst, names) = parse_instance(src).unwrap();
        assert_eq!(names, vec!["x"]);
        let w = verify_sc(&inst, VscOptions::default(), None)
            .witness
            .unwrap();
        assert_eq!(format_witness(&w), "1:1 2:1");
    }

    #[test]
    fn init_reference() {
        let src = "E 1 1 R y\nG 1 1 : init\n";
        let (inst, _) = parse_instance(src).unwrap();
        assert!(inst
            .good_writes(EventId::new(1, 1))
            .contains(&EventId::init(VarId(0))));
    }

    #[test]
    fn rejects_malformed() {
        assert!(matches!(
            parse_instance("E 1 1 Q x"),
            Err(FormatError::Syntax { line: 1, .. })
        ));
        assert!(matches!(
            parse_instance("E 1 2 W x 1"),
            Err(FormatError::Instance(InstanceError::NotProper { .. }))
        ));
        assert!(matches!(
            parse_instance("E 1 1 R x"),
            Err(FormatError::Instance(InstanceError::MissingGoodWrites(_)))
        ));
        assert!(matches!(
            parse_instance("E 1 1 W x 1\nE 2 1 R y\nG 2 1 : 1:1"),
            Err(FormatError::Instance(InstanceError::BadGoodWrite { .. }))
        ));
    }
}
