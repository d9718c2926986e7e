mod common;

use std::collections::HashSet;

use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rvf_core::explorer::{explore, ExploreOptions};
use rvf_core::oracle::{
    all_vsc_witnesses, brute_force_vsc, census, for_each_maximal_trace, DEFAULT_BUDGET,
};
use rvf_core::order::PartialOrder;
use rvf_core::program::{parse_program, Program, Trace};
use rvf_core::semantics::{causal_order, init_writes, reads_from, visible_writes};
use rvf_core::vsc::{check_witness, closure, verify_sc, VscOptions};

#[derive(Clone, Debug)]
enum Stmt {
    Write(u8, u8),
    Read(u8),
    Branch(u8, u8, u8),
    WriteLocal(u8),
    Locked(u8, u8),
    Check(u8),
}

fn stmt() -> impl Strategy<Value = Stmt> {
    prop_oneof![
        (0u8..2, 0u8..3).prop_map(|(g, c)| Stmt::Write(g, c)),
        (0u8..2).prop_map(Stmt::Read),
        (0u8..3, 0u8..2, 0u8..3).prop_map(|(c, g, d)| Stmt::Branch(c, g, d)),
        (0u8..2).prop_map(Stmt::WriteLocal),
        (0u8..2, 0u8..3).prop_map(|(g, c)| Stmt::Locked(g, c)),
        (0u8..3).prop_map(Stmt::Check),
    ]
}

/// Renders statements; ones that need a local fall back to a plain write
/// until the thread has read something.
fn render(threads: &[Vec<Stmt>]) -> String {
    let var = |g: u8| ["x", "y"][g as usize];
    let mut src = String::new();
    for (t, body) in threads.iter().enumerate() {
        src.push_str(&format!("thread t{t} {{\n"));
        let mut locals = 0;
        for s in body {
            let last = format!("a{}", locals.max(1) - 1);
            let line = match s {
                Stmt::Read(g) => {
                    locals += 1;
                    format!("a{} = read {}", locals - 1, var(*g))
                }
                Stmt::Write(g, c) => format!("write {} {c}", var(*g)),
                Stmt::Branch(c, g, d) if locals > 0 => format!(
                    "if {last} == {c} {{ write {} {d} }} else {{ write {} 1 }}",
                    var(*g),
                    var(1 - *g)
                ),
                Stmt::WriteLocal(g) if locals > 0 => format!("write {} {last} + 1", var(*g)),
                Stmt::Locked(g, c) => format!("lock m; write {} {c}; unlock m", var(*g)),
                Stmt::Check(c) if locals > 0 => format!("assert {last} != {c}"),
                Stmt::Branch(_, g, d) => format!("write {} {d}", var(*g)),
                Stmt::WriteLocal(g) | Stmt::Check(g) => format!("write {} 2", var(*g % 2)),
            };
            src.push_str(&format!("  {line}\n"));
        }
        src.push_str("}\n");
    }
    src
}

fn program() -> impl Strategy<Value = (String, Program)> {
    proptest::collection::vec(proptest::collection::vec(stmt(), 1..=3), 2..=3).prop_map(|ts| {
        let src = render(&ts);
        let p = parse_program(&src).unwrap_or_else(|e| panic!("{e}\n{src}"));
        (src, p)
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn explorer_matches_oracle_on_random_programs((src, p) in program()) {
        let c = census(&p, DEFAULT_BUDGET).unwrap();
        prop_assert!(c.maz_classes >= c.rf_classes && c.rf_classes >= c.rvf_classes);
        let mut counts = HashSet::new();
        for opts in ExploreOptions::all() {
            let rep = explore(&p, opts);
            prop_assert_eq!(&rep.value_functions(), &c.value_functions, "{}\n{:?}", src, opts);
            prop_assert_eq!(rep.violations(), c.violations.clone());
            let keys: HashSet<_> = rep.leaves.iter().map(|l| l.rvf_key()).collect();
            prop_assert_eq!(keys.len(), rep.leaves.len());
            prop_assert!(rep.maximal_traces() <= c.rvf_classes);
            counts.insert(rep.maximal_traces());
        }
        prop_assert_eq!(counts.len(), 1);
    }

    #[test]
    fn traces_replay_and_respect_bounds((_src, p) in program()) {
        let mut bad = None;
        for_each_maximal_trace(&p, DEFAULT_BUDGET, |t| {
            let ids = t.ids();
            let again = Trace::replay(&p, &ids).expect("replays");
            if again.events() != t.events() || !again.is_maximal() || t.len() > p.max_trace_len() {
                bad = Some(ids.clone());
            }
            // Each read observes a visible write of its own trace.
            let order = causal_order(t.events());
            let mut xs = init_writes(t.events());
            xs.extend(t.events().iter().copied());
            for (r, w) in reads_from(t.events()) {
                let ev = t.events().iter().find(|e| e.id == r).unwrap();
                if !visible_writes(&order, &xs, ev).contains(&w) {
                    bad = Some(ids.clone());
                }
            }
        }).unwrap();
        prop_assert_eq!(bad, None);
    }

    #[test]
    fn solver_agrees_with_brute_force(seed in any::<u64>()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let inst = common::random_instance(&mut rng, 10);
        let expected = brute_force_vsc(&inst).unwrap().is_some();
        let aux = common::random_aux(&mut rng, &inst);
        for opts in VscOptions::all() {
            let out = verify_sc(&inst, opts, Some(&aux));
            prop_assert_eq!(out.witness.is_some(), expected);
            if let Some(w) = &out.witness {
                prop_assert!(check_witness(&inst, w).is_ok());
            }
            prop_assert!(out.stats.states_processed as u128 <= inst.state_bound());
        }
    }

    #[test]
    fn witnesses_refine_closure(seed in any::<u64>()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let inst = common::random_instance(&mut rng, 8);
        let witnesses = all_vsc_witnesses(&inst).unwrap();
        match closure(&inst) {
            None => prop_assert!(witnesses.is_empty()),
            Some(p) => {
                prop_assert!(p.is_strict_order());
                prop_assert!(p.refines(&inst.program_order()));
                let inits: Vec<_> = init_writes(inst.events()).iter().map(|e| e.id).collect();
                for w in witnesses {
                    let mut seq = inits.clone();
                    seq.extend(w);
                    prop_assert!(PartialOrder::total(&seq).refines(&p));
                }
            }
        }
    }
}

#[test]
fn corpus_class_counts_are_ordered() {
    for (name, p) in common::corpus() {
        let c = census(&p, DEFAULT_BUDGET).unwrap();
        assert!(
            c.maz_classes >= c.rf_classes && c.rf_classes >= c.rvf_classes,
            "{name}: {} {} {}",
            c.maz_classes,
            c.rf_classes,
            c.rvf_classes
        );
    }
}
