//! Programs: declarations, facts, static facts and rules of the three kinds.

use alloc::string::String;
use alloc::vec::Vec;
use core::fmt;

use crate::term::{Arg, Atom, Literal, Term};

/// A (line, column) position in the source text, 1-based.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct Span {
    pub line: u32,
    pub column: u32,
}

impl fmt::Display for Span {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}:{}", self.line, self.column)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Severity {
    Error,
    Warning,
}

/// A parser or validator message anchored to a source position.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ParseDiagnostic {
    pub severity: Severity,
    pub message: String,
    pub span: Span,
}

impl ParseDiagnostic {
    pub fn error(message: impl Into<String>, span: Span) -> Self {
        ParseDiagnostic {
            severity: Severity::Error,
            message: message.into(),
            span,
        }
    }

    pub fn warning(message: impl Into<String>, span: Span) -> Self {
        ParseDiagnostic {
            severity: Severity::Warning,
            message: message.into(),
            span,
        }
    }

    pub fn is_error(&self) -> bool {
        self.severity == Severity::Error
    }
}

impl fmt::Display for ParseDiagnostic {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let sev = match self.severity {
            Severity::Error => "error",
            Severity::Warning => "warning",
        };
        write!(f, "{}: {} at {}", sev, self.message, self.span)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord)]
pub enum RuleKind {
    Implication,
    NormalDefault,
    SemiNormalDefault,
}

impl RuleKind {
    pub fn name(&self) -> &'static str {
        match self {
            RuleKind::Implication => "implication",
            RuleKind::NormalDefault => "normal-default",
            RuleKind::SemiNormalDefault => "semi-normal-default",
        }
    }
}

/// A body conjunct. `naf` marks negation-as-failure: the positive atom must be
/// absent rather than the literal present. NAF literals never bind variables.
#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord)]
pub struct BodyLiteral {
    pub literal: Literal,
    pub naf: bool,
}

impl BodyLiteral {
    pub fn plain(literal: Literal) -> Self {
        BodyLiteral {
            literal,
            naf: false,
        }
    }

    pub fn naf(literal: Literal) -> Self {
        BodyLiteral { literal, naf: true }
    }
}

impl fmt::Display for BodyLiteral {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.naf {
            write!(f, "not ")?;
        }
        write!(f, "{}", self.literal)
    }
}

/// One rule: an implication, a normal default or a semi-normal default.
///
/// An empty body stands for the trivially satisfied prerequisite (`true` in
/// the surface syntax). For a normal default the justification is the head
/// itself; a semi-normal default additionally carries its constraint.
#[derive(Clone, Debug)]
pub struct Rule {
    pub kind: RuleKind,
    pub label: String,
    pub body: Vec<BodyLiteral>,
    pub head: Literal,
    pub constraint: Option<Literal>,
    pub span: Span,
}

// Spans are layout metadata; two rules that differ only in where they were
// written are the same rule.
impl PartialEq for Rule {
    fn eq(&self, other: &Self) -> bool {
        self.kind == other.kind
            && self.label == other.label
            && self.body == other.body
            && self.head == other.head
            && self.constraint == other.constraint
    }
}

impl Eq for Rule {}

impl Rule {
    pub fn is_default(&self) -> bool {
        self.kind != RuleKind::Implication
    }
}

#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord)]
pub enum DeclKind {
    /// A reified property with its number of `combine` arguments (0..=2).
    Prop { name: String, arity: u8 },
    /// A static predicate with its argument count.
    Static { name: String, arity: u8 },
}

impl DeclKind {
    pub fn name(&self) -> &str {
        match self {
            DeclKind::Prop { name, .. } | DeclKind::Static { name, .. } => name,
        }
    }
}

#[derive(Clone, Debug)]
pub struct Declaration {
    pub kind: DeclKind,
    pub span: Span,
}

impl PartialEq for Declaration {
    fn eq(&self, other: &Self) -> bool {
        self.kind == other.kind
    }
}

impl Eq for Declaration {}

/// Argument sort of a static predicate position.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ArgSort {
    Term,
    Property,
}

/// Signatures of the built-in static predicates. User-declared statics take
/// term arguments in every position.
pub fn builtin_static_sig(name: &str) -> Option<&'static [ArgSort]> {
    use ArgSort::{Property as P, Term as T};
    Some(match name {
        "incompatible" => &[P, P],
        "action" => &[T],
        "pcb" => &[P, T],
        "available" => &[T, P, T, T],
        "an" | "dan" => &[T, T, P],
        "subject" | "object" | "qualif_n" | "qualif_v" | "support" | "verb_state" => &[T, T],
        "compl_n" | "compl_v" => &[T, T, T],
        _ => return None,
    })
}

/// The linguistic input predicates accepted in fixture files.
pub const LINGUISTIC_PREDICATES: &[&str] = &[
    "subject", "object", "qualif_n", "qualif_v", "compl_n", "compl_v", "support",
];

/// A validated program.
///
/// Facts are kept canonically sorted by (state, literal) and static facts in
/// structural order, so programs compare equal independently of the clause
/// order they were written in. Declarations and rules preserve authored order,
/// which is semantics-bearing: stratification breaks sub-layer ties by first
/// appearance.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct Program {
    pub declarations: Vec<Declaration>,
    pub facts: Vec<Literal>,
    pub static_facts: Vec<Literal>,
    pub rules: Vec<Rule>,
}

impl Program {
    /// Sorts facts into their canonical order and groups declarations by kind
    /// (properties before statics, authored order within each kind). Called
    /// after construction.
    pub fn canonicalize(&mut self) {
        self.facts
            .sort_by(|a, b| (a.atom.ground_state(), a).cmp(&(b.atom.ground_state(), b)));
        self.facts.dedup();
        self.static_facts.sort();
        self.static_facts.dedup();
        self.declarations
            .sort_by_key(|d| matches!(d.kind, DeclKind::Static { .. }));
    }

    pub fn declared_prop_arity(&self, name: &str) -> Option<u8> {
        self.declarations.iter().find_map(|d| match &d.kind {
            DeclKind::Prop { name: n, arity } if n == name => Some(*arity),
            _ => None,
        })
    }

    /// Argument sorts for a static predicate: built-ins first, then user
    /// declarations (all-term).
    pub fn static_arity(&self, name: &str) -> Option<usize> {
        if let Some(sig) = builtin_static_sig(name) {
            return Some(sig.len());
        }
        self.declarations.iter().find_map(|d| match &d.kind {
            DeclKind::Static { name: n, arity } if n == name => Some(*arity as usize),
            _ => None,
        })
    }

    /// Largest state number mentioned in facts and static facts, the `T_max`
    /// of grounding.
    pub fn max_state(&self) -> Option<u32> {
        self.facts
            .iter()
            .chain(self.static_facts.iter())
            .filter_map(|l| max_state_in_atom(&l.atom))
            .max()
    }

    /// Every literal occurring in the program, including rule parts.
    pub fn all_literals(&self) -> impl Iterator<Item = &Literal> {
        self.facts
            .iter()
            .chain(self.static_facts.iter())
            .chain(self.rules.iter().flat_map(|r| {
                r.body
                    .iter()
                    .map(|b| &b.literal)
                    .chain(core::iter::once(&r.head))
                    .chain(r.constraint.iter())
            }))
    }

    /// Static facts that carry variables: the universally quantified
    /// incompatibility schemas.
    pub fn schema_facts(&self) -> impl Iterator<Item = &Literal> {
        self.static_facts.iter().filter(|l| !l.is_ground())
    }
}

fn max_state_in_term(term: &Term) -> Option<u32> {
    match term {
        Term::State(n) => Some(*n),
        _ => None,
    }
}

fn max_state_in_atom(atom: &Atom) -> Option<u32> {
    match atom {
        Atom::Modal {
            property,
            agent,
            state,
            ..
        } => {
            let mut best = max_state_in_term(state);
            best = best.max(max_state_in_term(agent));
            if let crate::term::Property::Combine(_, arg) = property {
                best = best.max(max_state_in_term(arg));
            }
            best
        }
        Atom::Static { args, .. } => args
            .iter()
            .filter_map(|a| match a {
                Arg::Term(t) => max_state_in_term(t),
                Arg::Property(_) => None,
            })
            .max(),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::term::{cst, Atom, Literal, Property, Term};

    fn fact(prop: &str, agent: &str, state: u32) -> Literal {
        Literal::positive(Atom::holds(
            Property::atomic(prop),
            cst(agent),
            Term::State(state),
        ))
    }

    #[test]
    fn facts_canonicalize_by_state_then_structure() {
        let mut p = Program {
            facts: [
                fact("stop", "b", 2),
                fact("stop", "a", 1),
                fact("stop", "b", 2),
            ]
            .into(),
            ..Default::default()
        };
        p.canonicalize();
        assert_eq!(p.facts, [fact("stop", "a", 1), fact("stop", "b", 2)]);
        assert_eq!(p.max_state(), Some(2));
    }

    #[test]
    fn builtin_signatures_cover_the_kernel_statics() {
        assert_eq!(
            builtin_static_sig("incompatible").map(<[ArgSort]>::len),
            Some(2)
        );
        assert_eq!(
            builtin_static_sig("available").map(<[ArgSort]>::len),
            Some(4)
        );
        assert_eq!(builtin_static_sig("an").map(<[ArgSort]>::len), Some(3));
        assert!(builtin_static_sig("unknown_pred").is_none());
    }

    #[test]
    fn rules_compare_ignoring_spans() {
        let head = fact("stop", "a", 1);
        let r1 = Rule {
            kind: RuleKind::NormalDefault,
            label: "r1".into(),
            body: Vec::new(),
            head: head.clone(),
            constraint: None,
            span: Span { line: 1, column: 1 },
        };
        let r2 = Rule {
            span: Span { line: 9, column: 4 },
            ..r1.clone()
        };
        assert_eq!(r1, r2);
    }
}
