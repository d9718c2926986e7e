mod common;

use std::path::PathBuf;

use rvf_core::explorer::{explore, ExploreOptions};
use rvf_core::oracle::{census, DEFAULT_BUDGET};
use rvf_core::program::parse_program;
use rvf_core::semantics::{maz_key, rf_key, rvf_key};

fn golden(name: &str) -> String {
    let path = PathBuf::from(env!("CARGO_MANIFEST_DIR"))
        .join("tests/golden")
        .join(name);
    std::fs::read_to_string(&path).unwrap_or_else(|e| panic!("{}: {e}", path.display()))
}

fn fig1() -> rvf_core::program::Program {
    let src = std::fs::read_to_string(common::corpus_dir().join("fig1.prog")).unwrap();
    parse_program(&src).unwrap()
}

#[test]
fn figure_one_census_csv() {
    let c = census(&fig1(), DEFAULT_BUDGET).unwrap();
    assert_eq!(c.to_csv(), golden("fig1_census.csv"));
}

#[test]
fn figure_one_leaf_keys() {
    let rep = explore(&fig1(), ExploreOptions::default());
    assert_eq!(rep.leaves.len(), 1);
    let ev = &rep.leaves[0].events;
    let text = format!("{}\n{}\n{}\n", rvf_key(ev), rf_key(ev), maz_key(ev));
    assert_eq!(text, golden("fig1_leaf_keys.txt"));
}
