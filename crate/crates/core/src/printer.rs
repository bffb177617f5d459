//! Canonical serialization of programs. `parse_program(serialize_program(p))`
//! reconstructs `p` exactly.

use alloc::string::String;
use alloc::vec::Vec;
use core::fmt::Write;

use crate::program::{DeclKind, Program, Rule, RuleKind};

/// Renders a rule on one line, label included.
pub fn format_rule(rule: &Rule) -> String {
    let mut out = String::new();
    let _ = write!(out, "@{} ", rule.label);
    if rule.body.is_empty() {
        out.push_str("true");
    } else {
        let parts: Vec<String> = rule.body.iter().map(|b| alloc::format!("{b}")).collect();
        out.push_str(&parts.join(", "));
    }
    match rule.kind {
        RuleKind::Implication => {
            let _ = write!(out, " => {}", rule.head);
        }
        RuleKind::NormalDefault => {
            let _ = write!(out, " : {}", rule.head);
        }
        RuleKind::SemiNormalDefault => {
            let _ = write!(out, " : {}", rule.head);
            if let Some(c) = &rule.constraint {
                let _ = write!(out, " [{c}]");
            }
        }
    }
    out.push('.');
    out
}

/// Serializes a program to its canonical text: a declaration header,
/// then static and modal facts (facts in state order), then rules, one
/// clause per line.
pub fn serialize_program(program: &Program) -> String {
    let mut out = String::new();
    out.push_str("% declarations\n");
    for d in &program.declarations {
        match &d.kind {
            DeclKind::Prop { name, arity } => {
                let _ = writeln!(out, "prop {name}/{arity}.");
            }
            DeclKind::Static { name, arity } => {
                let _ = writeln!(out, "static {name}/{arity}.");
            }
        }
    }
    if !program.static_facts.is_empty() || !program.facts.is_empty() {
        out.push_str("\n% facts\n");
        for f in &program.static_facts {
            let _ = writeln!(out, "{f}.");
        }
        for f in &program.facts {
            let _ = writeln!(out, "{f}.");
        }
    }
    if !program.rules.is_empty() {
        out.push_str("\n% rules\n");
        for r in &program.rules {
            let _ = writeln!(out, "{}", format_rule(r));
        }
    }
    out
}
