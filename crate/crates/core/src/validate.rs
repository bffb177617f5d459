//! Post-parse validation: the duty kernel and unused-declaration lint.

use alloc::collections::BTreeSet;
use alloc::format;
use alloc::vec::Vec;

use crate::program::{ParseDiagnostic, Program};
use crate::term::{Atom, Literal, Modality, Property};

/// The atomic properties eligible as duties, plus `combine(disruptive_factor, _)`.
pub const KERNEL_PROPERTIES: &[&str] =
    &["stop", "control", "run_slowly_enough", "start", "move_back"];

/// The property name whose `combine` forms are duty-eligible.
pub const KERNEL_COMBINE: &str = "disruptive_factor";

/// True if a property may appear under the `must` modality.
pub fn is_kernel_property(prop: &Property) -> bool {
    match prop {
        Property::Atomic(name) => KERNEL_PROPERTIES.contains(&name.as_str()),
        // A property variable ranges over derived duties, which themselves
        // passed this check where they were introduced.
        Property::Variable(_) => true,
        Property::Combine(base, _) => {
            matches!(&**base, Property::Atomic(name) if name == KERNEL_COMBINE)
        }
    }
}

fn check_must(
    lit: &Literal,
    where_: &str,
    diags: &mut Vec<ParseDiagnostic>,
    span: crate::program::Span,
) {
    if let Atom::Modal {
        modality: Modality::Must,
        property,
        ..
    } = &lit.atom
    {
        if !is_kernel_property(property) {
            diags.push(ParseDiagnostic::error(
                format!(
                    "{where_} puts `{property}` under must, but only the kernel properties \
                     ({}, combine({KERNEL_COMBINE}, _)) are duty-eligible",
                    KERNEL_PROPERTIES.join(", ")
                ),
                span,
            ));
        }
    }
}

/// Checks kernel eligibility of every must-headed rule and must fact, and
/// warns about declared-but-unused predicates. Diagnostics are returned,
/// never thrown; errors here mean the program must not be run.
pub fn validate_program(program: &Program) -> Vec<ParseDiagnostic> {
    let mut diags = Vec::new();

    for fact in &program.facts {
        check_must(fact, "fact", &mut diags, Default::default());
    }
    for rule in &program.rules {
        check_must(
            &rule.head,
            &format!("rule {}", rule.label),
            &mut diags,
            rule.span,
        );
    }

    // Unused declarations.
    let mut used: BTreeSet<&str> = BTreeSet::new();
    for lit in program.all_literals() {
        collect_used(&lit.atom, &mut used);
    }
    for decl in &program.declarations {
        let name = decl.kind.name();
        if !used.contains(name) {
            diags.push(ParseDiagnostic::warning(
                format!("`{name}` is declared but never used"),
                decl.span,
            ));
        }
    }
    diags
}

fn collect_used<'p>(atom: &'p Atom, used: &mut BTreeSet<&'p str>) {
    fn prop_names<'p>(p: &'p Property, used: &mut BTreeSet<&'p str>) {
        match p {
            Property::Atomic(name) => {
                used.insert(name);
            }
            Property::Variable(_) => {}
            Property::Combine(base, _) => prop_names(base, used),
        }
    }
    match atom {
        Atom::Modal { property, .. } => prop_names(property, used),
        Atom::Static { predicate, args } => {
            used.insert(predicate);
            for a in args {
                if let crate::term::Arg::Property(p) = a {
                    prop_names(p, used);
                }
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::parser::parse_program;

    #[test]
    fn kernel_duties_pass() {
        let p = parse_program(
            "prop stop/0. prop follow/1.\n\
             holds(combine(follow, V), W, T), holds(stop, V, T) => must(stop, W, T).",
        )
        .unwrap();
        assert!(validate_program(&p).iter().all(|d| !d.is_error()));
    }

    #[test]
    fn non_kernel_duty_heads_are_errors() {
        let p = parse_program(
            "prop turn_left/0. prop follow/1.\n\
             holds(combine(follow, V), W, T) => must(turn_left, W, T).",
        )
        .unwrap();
        let diags = validate_program(&p);
        assert!(diags
            .iter()
            .any(|d| d.is_error() && d.message.contains("turn_left")));
    }

    #[test]
    fn disruptive_factor_combine_is_duty_eligible() {
        let p = parse_program(
            "prop disruptive_factor/1. prop follow/1.\n\
             holds(combine(follow, V), W, T) => must(combine(disruptive_factor, ice), W, T).",
        )
        .unwrap();
        assert!(validate_program(&p).iter().all(|d| !d.is_error()));
    }

    #[test]
    fn unused_declarations_warn_once() {
        let p = parse_program("prop stop/0. prop ghost/0.\nholds(stop, a, 1).").unwrap();
        let diags = validate_program(&p);
        assert_eq!(diags.len(), 1);
        assert!(!diags[0].is_error());
        assert!(diags[0].message.contains("ghost"));
    }
}
