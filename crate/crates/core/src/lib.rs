//! Seven-player hidden-role team game (Avalon) as a benchmark for ad hoc
//! teamwork: a deterministic rules engine, pluggable agents, exact
//! possible-worlds deduction, a sandboxed code-writing leader, a tournament
//! harness with metrics, and a transcript analyzer.

pub mod agents;
pub mod analyzer;
pub mod codeact;
pub mod deduction;
pub mod event;
pub mod game;
pub mod harness;
pub mod info;
pub mod llm;
pub mod memory;
pub mod sync;
