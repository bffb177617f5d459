//! Terms, properties, atoms and literals — the shared vocabulary of the engine.
//!
//! Everything here is immutable after construction, structurally comparable and
//! hashable, so values can be shared freely across threads.

use alloc::borrow::ToOwned;
use alloc::boxed::Box;
use alloc::collections::{BTreeMap, BTreeSet};
use alloc::format;
use alloc::string::String;
use alloc::vec::Vec;
use core::fmt;

/// Maximum nesting depth of `combine` properties.
pub const MAX_COMBINE_DEPTH: usize = 2;

/// A first-order term: a constant symbol, a variable, or a state expression.
///
/// State numbering starts at 1. Symbolic state arithmetic is restricted to a
/// single variable plus an offset of -1, 0 or +1; offset 0 is canonicalized to
/// a plain [`Term::Variable`] at parse time.
#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Term {
    /// A constant symbol, case-normalized to lowercase.
    Constant(String),
    /// A variable, case-normalized to lowercase (printed with a leading capital).
    Variable(String),
    /// A ground state number (>= 1).
    State(u32),
    /// A shifted state variable, e.g. `T-1` or `T+1`.
    StateOffset { var: String, offset: i8 },
}

impl Term {
    pub fn constant(name: impl Into<String>) -> Self {
        Term::Constant(name.into())
    }

    pub fn variable(name: impl Into<String>) -> Self {
        Term::Variable(name.into())
    }

    pub fn is_ground(&self) -> bool {
        matches!(self, Term::Constant(_) | Term::State(_))
    }

    pub fn collect_vars(&self, out: &mut BTreeSet<String>) {
        match self {
            Term::Variable(v) | Term::StateOffset { var: v, .. } => {
                out.insert(v.clone());
            }
            _ => {}
        }
    }
}

/// A reified property: atomic, a property variable, or a `combine` application.
#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Property {
    Atomic(String),
    /// A property-sorted variable, as used by the anomaly and capacity schemas.
    Variable(String),
    Combine(Box<Property>, Term),
}

/// Construction failed because a structural bound was exceeded.
#[derive(Clone, Debug, PartialEq, Eq)]
pub enum TermError {
    CombineDepthExceeded { property: String },
}

impl fmt::Display for TermError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            TermError::CombineDepthExceeded { property } => write!(
                f,
                "combine nesting deeper than {} in property {}",
                MAX_COMBINE_DEPTH, property
            ),
        }
    }
}

impl Property {
    pub fn atomic(name: impl Into<String>) -> Self {
        Property::Atomic(name.into())
    }

    /// Nesting depth: 0 for atomic properties and variables, +1 per `combine`.
    pub fn depth(&self) -> usize {
        match self {
            Property::Atomic(_) | Property::Variable(_) => 0,
            Property::Combine(base, _) => base.depth() + 1,
        }
    }

    /// Name of the innermost atomic property, if there is one.
    pub fn base_name(&self) -> Option<&str> {
        match self {
            Property::Atomic(name) => Some(name),
            Property::Variable(_) => None,
            Property::Combine(base, _) => base.base_name(),
        }
    }

    pub fn is_ground(&self) -> bool {
        match self {
            Property::Atomic(_) => true,
            Property::Variable(_) => false,
            Property::Combine(base, arg) => base.is_ground() && arg.is_ground(),
        }
    }

    pub fn collect_vars(&self, out: &mut BTreeSet<String>) {
        match self {
            Property::Atomic(_) => {}
            Property::Variable(v) => {
                out.insert(v.clone());
            }
            Property::Combine(base, arg) => {
                base.collect_vars(out);
                arg.collect_vars(out);
            }
        }
    }
}

/// Builds `combine(base, arg)`, rejecting properties nested deeper than
/// [`MAX_COMBINE_DEPTH`].
pub fn combine(base: Property, arg: Term) -> Result<Property, TermError> {
    if base.depth() + 1 > MAX_COMBINE_DEPTH {
        return Err(TermError::CombineDepthExceeded {
            property: format!("combine({base}, {arg})"),
        });
    }
    Ok(Property::Combine(Box::new(base), arg))
}

/// The modality of a reified atom.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Modality {
    Holds,
    Must,
    AbleTo,
}

impl Modality {
    pub fn name(&self) -> &'static str {
        match self {
            Modality::Holds => "holds",
            Modality::Must => "must",
            Modality::AbleTo => "able_to",
        }
    }
}

/// An argument of a static predicate: either a term or a property.
#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Arg {
    Term(Term),
    Property(Property),
}

impl Arg {
    pub fn is_ground(&self) -> bool {
        match self {
            Arg::Term(t) => t.is_ground(),
            Arg::Property(p) => p.is_ground(),
        }
    }

    pub fn collect_vars(&self, out: &mut BTreeSet<String>) {
        match self {
            Arg::Term(t) => t.collect_vars(out),
            Arg::Property(p) => p.collect_vars(out),
        }
    }
}

/// An atom: a reified modal predicate or a static predicate application.
#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Atom {
    Modal {
        modality: Modality,
        property: Property,
        agent: Term,
        state: Term,
    },
    Static {
        predicate: String,
        args: Vec<Arg>,
    },
}

impl Atom {
    pub fn modal(modality: Modality, property: Property, agent: Term, state: Term) -> Self {
        Atom::Modal {
            modality,
            property,
            agent,
            state,
        }
    }

    pub fn holds(property: Property, agent: Term, state: Term) -> Self {
        Atom::modal(Modality::Holds, property, agent, state)
    }

    pub fn stat(predicate: impl Into<String>, args: Vec<Arg>) -> Self {
        Atom::Static {
            predicate: predicate.into(),
            args,
        }
    }

    pub fn is_ground(&self) -> bool {
        match self {
            Atom::Modal {
                property,
                agent,
                state,
                ..
            } => property.is_ground() && agent.is_ground() && state.is_ground(),
            Atom::Static { args, .. } => args.iter().all(Arg::is_ground),
        }
    }

    pub fn vars(&self) -> BTreeSet<String> {
        let mut out = BTreeSet::new();
        self.collect_vars(&mut out);
        out
    }

    pub fn collect_vars(&self, out: &mut BTreeSet<String>) {
        match self {
            Atom::Modal {
                property,
                agent,
                state,
                ..
            } => {
                property.collect_vars(out);
                agent.collect_vars(out);
                state.collect_vars(out);
            }
            Atom::Static { args, .. } => {
                for a in args {
                    a.collect_vars(out);
                }
            }
        }
    }

    /// The ground state number carried by this atom, when it is a modal atom
    /// with a ground state.
    pub fn ground_state(&self) -> Option<u32> {
        match self {
            Atom::Modal {
                state: Term::State(n),
                ..
            } => Some(*n),
            _ => None,
        }
    }
}

/// The sign of a literal: classical truth or classical falsity of its atom.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Sign {
    Positive,
    Negative,
}

/// A signed atom.
#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Literal {
    pub sign: Sign,
    pub atom: Atom,
}

impl Literal {
    pub fn positive(atom: Atom) -> Self {
        Literal {
            sign: Sign::Positive,
            atom,
        }
    }

    pub fn negative(atom: Atom) -> Self {
        Literal {
            sign: Sign::Negative,
            atom,
        }
    }

    pub fn is_positive(&self) -> bool {
        self.sign == Sign::Positive
    }

    pub fn is_ground(&self) -> bool {
        self.atom.is_ground()
    }

    pub fn vars(&self) -> BTreeSet<String> {
        self.atom.vars()
    }
}

/// Flips the sign of a literal, preserving its atom.
pub fn complement(l: &Literal) -> Literal {
    Literal {
        sign: match l.sign {
            Sign::Positive => Sign::Negative,
            Sign::Negative => Sign::Positive,
        },
        atom: l.atom.clone(),
    }
}

/// A value a variable can be bound to.
#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Binding {
    Term(Term),
    Property(Property),
}

/// A mapping from variable names to ground values.
#[derive(Clone, Debug, Default, PartialEq, Eq, PartialOrd, Ord)]
pub struct Substitution {
    bindings: BTreeMap<String, Binding>,
}

/// Why applying a substitution failed or produced no instance.
#[derive(Clone, Debug, PartialEq, Eq)]
pub enum SubstError {
    /// A variable in the item has no binding.
    Unbound { var: String },
    /// State arithmetic left the valid range `[1, ..]`; the caller discards
    /// the instance.
    StateOutOfRange { var: String, value: i64 },
    /// A variable was bound to a property where a term was required, or vice
    /// versa.
    SortMismatch { var: String },
}

impl fmt::Display for SubstError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            SubstError::Unbound { var } => write!(f, "unbound variable {}", display_var(var)),
            SubstError::StateOutOfRange { var, value } => write!(
                f,
                "state expression over {} evaluates to {} (states start at 1)",
                display_var(var),
                value
            ),
            SubstError::SortMismatch { var } => {
                write!(f, "variable {} bound to the wrong sort", display_var(var))
            }
        }
    }
}

impl Substitution {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn bind_term(&mut self, var: impl Into<String>, term: Term) {
        self.bindings.insert(var.into(), Binding::Term(term));
    }

    pub fn bind_property(&mut self, var: impl Into<String>, prop: Property) {
        self.bindings.insert(var.into(), Binding::Property(prop));
    }

    pub fn get(&self, var: &str) -> Option<&Binding> {
        self.bindings.get(var)
    }

    pub fn is_empty(&self) -> bool {
        self.bindings.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = (&String, &Binding)> {
        self.bindings.iter()
    }

    pub fn apply_term(&self, term: &Term) -> Result<Term, SubstError> {
        match term {
            Term::Constant(_) | Term::State(_) => Ok(term.clone()),
            Term::Variable(v) => match self.bindings.get(v) {
                Some(Binding::Term(t)) => Ok(t.clone()),
                Some(Binding::Property(_)) => Err(SubstError::SortMismatch { var: v.clone() }),
                None => Err(SubstError::Unbound { var: v.clone() }),
            },
            Term::StateOffset { var, offset } => match self.bindings.get(var) {
                Some(Binding::Term(Term::State(n))) => {
                    let value = i64::from(*n) + i64::from(*offset);
                    if value < 1 {
                        Err(SubstError::StateOutOfRange {
                            var: var.clone(),
                            value,
                        })
                    } else {
                        Ok(Term::State(value as u32))
                    }
                }
                Some(_) => Err(SubstError::SortMismatch { var: var.clone() }),
                None => Err(SubstError::Unbound { var: var.clone() }),
            },
        }
    }

    pub fn apply_property(&self, prop: &Property) -> Result<Property, SubstError> {
        match prop {
            Property::Atomic(_) => Ok(prop.clone()),
            Property::Variable(v) => match self.bindings.get(v) {
                Some(Binding::Property(p)) => Ok(p.clone()),
                Some(Binding::Term(_)) => Err(SubstError::SortMismatch { var: v.clone() }),
                None => Err(SubstError::Unbound { var: v.clone() }),
            },
            Property::Combine(base, arg) => Ok(Property::Combine(
                Box::new(self.apply_property(base)?),
                self.apply_term(arg)?,
            )),
        }
    }

    pub fn apply_atom(&self, atom: &Atom) -> Result<Atom, SubstError> {
        match atom {
            Atom::Modal {
                modality,
                property,
                agent,
                state,
            } => Ok(Atom::Modal {
                modality: *modality,
                property: self.apply_property(property)?,
                agent: self.apply_term(agent)?,
                state: self.apply_term(state)?,
            }),
            Atom::Static { predicate, args } => {
                let mut out = Vec::with_capacity(args.len());
                for a in args {
                    out.push(match a {
                        Arg::Term(t) => Arg::Term(self.apply_term(t)?),
                        Arg::Property(p) => Arg::Property(self.apply_property(p)?),
                    });
                }
                Ok(Atom::Static {
                    predicate: predicate.clone(),
                    args: out,
                })
            }
        }
    }

    pub fn apply_literal(&self, lit: &Literal) -> Result<Literal, SubstError> {
        Ok(Literal {
            sign: lit.sign,
            atom: self.apply_atom(&lit.atom)?,
        })
    }
}

/// Renders a normalized variable name with its leading capital, e.g. `t` as
/// `T` and `act` as `Act`.
pub fn display_var(name: &str) -> String {
    let mut chars = name.chars();
    match chars.next() {
        Some(first) => first.to_uppercase().chain(chars).collect(),
        None => String::new(),
    }
}

impl fmt::Display for Term {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Term::Constant(name) => write!(f, "{name}"),
            Term::Variable(name) => write!(f, "{}", display_var(name)),
            Term::State(n) => write!(f, "{n}"),
            Term::StateOffset { var, offset } => {
                if *offset >= 0 {
                    write!(f, "{}+{}", display_var(var), offset)
                } else {
                    write!(f, "{}-{}", display_var(var), -offset)
                }
            }
        }
    }
}

impl fmt::Display for Property {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Property::Atomic(name) => write!(f, "{name}"),
            Property::Variable(name) => write!(f, "{}", display_var(name)),
            Property::Combine(base, arg) => write!(f, "combine({base}, {arg})"),
        }
    }
}

impl fmt::Display for Arg {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Arg::Term(t) => write!(f, "{t}"),
            Arg::Property(p) => write!(f, "{p}"),
        }
    }
}

impl fmt::Display for Atom {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Atom::Modal {
                modality,
                property,
                agent,
                state,
            } => write!(f, "{}({}, {}, {})", modality.name(), property, agent, state),
            Atom::Static { predicate, args } => {
                write!(f, "{predicate}(")?;
                for (i, a) in args.iter().enumerate() {
                    if i > 0 {
                        write!(f, ", ")?;
                    }
                    write!(f, "{a}")?;
                }
                write!(f, ")")
            }
        }
    }
}

impl fmt::Display for Literal {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.sign == Sign::Negative {
            write!(f, "-")?;
        }
        write!(f, "{}", self.atom)
    }
}

/// Convenience constructor used across the crate and in tests: a ground
/// constant term from a name that is already normalized.
pub fn cst(name: &str) -> Term {
    Term::Constant(name.to_owned())
}

/// Convenience constructor: a variable term from a normalized name.
pub fn var(name: &str) -> Term {
    Term::Variable(name.to_owned())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn shock_a() -> Property {
        combine(Property::atomic("shock"), cst("a")).unwrap()
    }

    #[test]
    fn combine_builds_complex_properties() {
        let p = combine(Property::atomic("shock"), cst("a")).unwrap();
        assert_eq!(p, shock_a());
        let nested = combine(combine(Property::atomic("q"), var("x")).unwrap(), var("t")).unwrap();
        assert_eq!(nested.depth(), 2);
        assert_eq!(nested.base_name(), Some("q"));
    }

    #[test]
    fn combine_rejects_depth_beyond_two() {
        let two = combine(combine(Property::atomic("q"), var("x")).unwrap(), var("t")).unwrap();
        let err = combine(two, var("u")).unwrap_err();
        assert!(matches!(err, TermError::CombineDepthExceeded { .. }));
    }

    #[test]
    fn complement_is_a_sign_only_involution() {
        let l = Literal::positive(Atom::holds(
            Property::atomic("stop"),
            cst("a"),
            Term::State(2),
        ));
        let c = complement(&l);
        assert_eq!(c.sign, Sign::Negative);
        assert_eq!(c.atom, l.atom);
        assert_eq!(complement(&c), l);
    }

    #[test]
    fn substitution_evaluates_state_arithmetic() {
        // (V = B, W = A, t = 2) applied to holds(combine(follow, V), W, T-1)
        let mut s = Substitution::new();
        s.bind_term("v", cst("b"));
        s.bind_term("w", cst("a"));
        s.bind_term("t", Term::State(2));
        let lit = Literal::positive(Atom::holds(
            combine(Property::atomic("follow"), var("v")).unwrap(),
            var("w"),
            Term::StateOffset {
                var: "t".into(),
                offset: -1,
            },
        ));
        let ground = s.apply_literal(&lit).unwrap();
        assert_eq!(
            ground,
            Literal::positive(Atom::holds(
                combine(Property::atomic("follow"), cst("b")).unwrap(),
                cst("a"),
                Term::State(1),
            ))
        );
        assert!(ground.is_ground());
    }

    #[test]
    fn substitution_identity_on_ground_atoms() {
        let s = Substitution::new();
        let atom = Atom::holds(Property::atomic("stop"), cst("b"), Term::State(1));
        assert_eq!(s.apply_atom(&atom).unwrap(), atom);
    }

    #[test]
    fn substitution_signals_out_of_range_states() {
        let mut s = Substitution::new();
        s.bind_term("t", Term::State(1));
        let atom = Atom::holds(
            Property::atomic("p"),
            cst("a"),
            Term::StateOffset {
                var: "t".into(),
                offset: -1,
            },
        );
        assert_eq!(
            s.apply_atom(&atom),
            Err(SubstError::StateOutOfRange {
                var: "t".into(),
                value: 0
            })
        );
    }

    #[test]
    fn substitution_reports_unbound_variables() {
        let s = Substitution::new();
        let atom = Atom::holds(Property::atomic("p"), var("w"), Term::State(1));
        assert_eq!(
            s.apply_atom(&atom),
            Err(SubstError::Unbound { var: "w".into() })
        );
    }

    #[test]
    fn display_round_trips_case_convention() {
        assert_eq!(
            Atom::holds(
                combine(Property::atomic("bump"), var("v")).unwrap(),
                var("w"),
                var("t"),
            )
            .to_string(),
            "holds(combine(bump, V), W, T)"
        );
        assert_eq!(
            Term::StateOffset {
                var: "t".into(),
                offset: 1
            }
            .to_string(),
            "T+1"
        );
    }
}
