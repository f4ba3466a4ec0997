//! Generators, oracle-verified runners, ledgers and benchmarks for the
//! facility location algorithms in `facloc-core`.

pub mod bench;
pub mod gen;
pub mod ledger;
pub mod runner;
