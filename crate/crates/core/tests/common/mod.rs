#![allow(dead_code)]

use std::collections::{BTreeMap, BTreeSet};
use std::path::PathBuf;

use rand::seq::SliceRandom;
use rand::Rng;
use rvf_core::event::{Event, EventId, EventKind, VarId};
use rvf_core::program::{parse_program, Program};
use rvf_core::vsc::VscInstance;

pub fn corpus_dir() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("tests/programs")
}

/// Every `.prog` file of the corpus, sorted by name.
pub fn corpus() -> Vec<(String, Program)> {
    let mut files: Vec<PathBuf> = std::fs::read_dir(corpus_dir())
        .expect("corpus directory")
        .map(|e| e.unwrap().path())
        .filter(|p| p.extension().is_some_and(|x| x == "prog"))
        .collect();
    files.sort();
    files
        .into_iter()
        .map(|p| {
            let src = std::fs::read_to_string(&p).unwrap();
            let name = p.file_stem().unwrap().to_string_lossy().into_owned();
            let prog = parse_program(&src).unwrap_or_else(|e| panic!("{name}: {e}"));
            (name, prog)
        })
        .collect()
}

/// Three threads hammering one variable; `n` operations each.
pub fn one_var_many_ops(n: usize) -> Program {
    let w = "write x 1; ".repeat(n);
    let wr = "write x 1; a = read x; ".repeat(n);
    parse_program(&format!(
        "thread t1 {{ {w}}}\nthread t2 {{ {wr}}}\nthread t3 {{ {w}}}"
    ))
    .unwrap()
}

/// `n` threads, each writing then reading one shared variable.
pub fn many_threads_one_var(n: usize) -> Program {
    let src: String = (1..=n)
        .map(|i| format!("thread t{i} {{ write x 1; a = read x }}\n"))
        .collect();
    parse_program(&src).unwrap()
}

/// Random VSC instance with at most `max_events` events over at most three
/// threads and two variables. About a fifth of the instances turn the
/// second variable into a mutex with well-nested lock/unlock pairs.
pub fn random_instance<R: Rng>(rng: &mut R, max_events: usize) -> VscInstance {
    let k = rng.gen_range(1..=3u32);
    let d = rng.gen_range(1..=2u32);
    let with_mutex = d == 2 && rng.gen_bool(0.2);
    let total = rng.gen_range(1..=max_events);

    let mut lanes: Vec<Vec<(EventKind, VarId, i64)>> = vec![Vec::new(); k as usize];
    let mut budget = total;
    let mut t = 0usize;
    while budget > 0 {
        let lane = &mut lanes[t % k as usize];
        if with_mutex && budget >= 3 && rng.gen_bool(0.3) {
            lane.push((EventKind::Acquire, VarId(1), 0));
            lane.push((EventKind::Write, VarId(0), rng.gen_range(0..3)));
            lane.push((EventKind::Release, VarId(1), 0));
            budget -= 3;
        } else {
            let var = if with_mutex {
                VarId(0)
            } else {
                VarId(rng.gen_range(0..d))
            };
            if rng.gen_bool(0.5) {
                lane.push((EventKind::Write, var, rng.gen_range(0..3)));
            } else {
                lane.push((EventKind::Read, var, 0));
            }
            budget -= 1;
        }
        t += rng.gen_range(0..=1);
    }

    let mut events = Vec::new();
    for (ti, lane) in lanes.iter().enumerate() {
        for (i, &(kind, var, v)) in lane.iter().enumerate() {
            events.push(Event::new(
                EventId::new(ti as u32 + 1, i as u32 + 1),
                kind,
                var,
                v,
            ));
        }
    }

    // Half the time seed good-writes from a random schedule, so the
    // instance is likely realizable; then sprinkle extra writes.
    let seeded = rng.gen_bool(0.5);
    let schedule = random_schedule(rng, &lanes);
    let mut rf: BTreeMap<EventId, EventId> = BTreeMap::new();
    let mut last: BTreeMap<VarId, EventId> = BTreeMap::new();
    for id in &schedule {
        let e = events.iter().find(|e| e.id == *id).unwrap();
        if e.is_read() {
            rf.insert(
                e.id,
                last.get(&e.var).copied().unwrap_or(EventId::init(e.var)),
            );
        } else {
            last.insert(e.var, e.id);
        }
    }

    let mut good: BTreeMap<EventId, BTreeSet<EventId>> = BTreeMap::new();
    for r in events.iter().filter(|e| e.is_read()) {
        let mut pool: Vec<EventId> = std::iter::once(EventId::init(r.var))
            .chain(
                events
                    .iter()
                    .filter(|w| w.is_write() && w.var == r.var)
                    .map(|w| w.id),
            )
            .collect();
        pool.shuffle(rng);
        let size = rng.gen_range(1..=3.min(pool.len()));
        let mut set: BTreeSet<EventId> = pool.into_iter().take(size).collect();
        if seeded {
            let extra = set.len() > 1;
            if extra {
                let drop = *set.iter().next().unwrap();
                set.remove(&drop);
            }
            set.insert(rf[&r.id]);
        }
        good.insert(r.id, set);
    }
    VscInstance::new(events, good).expect("generated instance is valid")
}

/// A random interleaving of the lanes that honours lock ownership when it
/// can; lanes that would block are skipped until the lock frees.
fn random_schedule<R: Rng>(rng: &mut R, lanes: &[Vec<(EventKind, VarId, i64)>]) -> Vec<EventId> {
    let mut pos = vec![0usize; lanes.len()];
    let mut owner: Option<usize> = None;
    let mut out = Vec::new();
    loop {
        let ready: Vec<usize> = (0..lanes.len())
            .filter(|&t| {
                lanes[t]
                    .get(pos[t])
                    .is_some_and(|(k, _, _)| *k != EventKind::Acquire || owner.is_none())
            })
            .collect();
        let Some(&t) = ready.choose(rng) else {
            return out;
        };
        match lanes[t][pos[t]].0 {
            EventKind::Acquire => owner = Some(t),
            EventKind::Release => owner = None,
            _ => {}
        }
        pos[t] += 1;
        out.push(EventId::new(t as u32 + 1, pos[t] as u32));
    }
}

/// A program-order-respecting shuffle of the instance, used as a hint.
pub fn random_aux<R: Rng>(rng: &mut R, inst: &VscInstance) -> Vec<EventId> {
    let threads = inst.threads();
    let mut pos: Vec<u32> = vec![0; threads.len()];
    let mut out = Vec::new();
    loop {
        let live: Vec<usize> = (0..threads.len())
            .filter(|&i| inst.event(EventId::new(threads[i], pos[i] + 1)).is_some())
            .collect();
        let Some(&i) = live.choose(rng) else {
            return out;
        };
        pos[i] += 1;
        out.push(EventId::new(threads[i], pos[i]));
    }
}
