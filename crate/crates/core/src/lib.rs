//! Core engine for norm-based accident cause detection: a rule DSL with
//! classical negation and defaults, stratified forward-chaining evaluation
//! with derivation traces, a desk-scale Reiter-extension oracle, and the
//! car-crash knowledge base with its linguistic mapping stage.
//!
//! The crate is `no_std` + `alloc`; IO, the CLI and file handling live in
//! the companion `normengine` binary crate.

#![cfg_attr(not(test), no_std)]

extern crate alloc;

pub mod engine;
pub mod ground;
pub mod kb;
pub mod mapping;
pub mod oracle;
pub mod parser;
pub mod pipeline;
pub mod printer;
pub mod program;
pub mod report;
pub mod stratify;
pub mod term;
pub mod validate;

pub use engine::{run_stratified, Database, EngineError, Trace};
pub use parser::{parse_literal, parse_program};
pub use printer::serialize_program;
pub use program::{ParseDiagnostic, Program, Rule, RuleKind, Severity};
pub use stratify::{
    check_constraints, compute_strata, dependency_graph, stratify, StratumAssignment,
};
pub use term::{combine, complement, Atom, Literal, Modality, Property, Sign, Substitution, Term};
pub use validate::validate_program;
