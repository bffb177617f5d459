//! Deterministic stratum-by-stratum forward chaining with default
//! justification checks and full derivation traces.

use alloc::boxed::Box;
use alloc::collections::{BTreeMap, BTreeSet};
use alloc::string::String;
use alloc::vec::Vec;
use core::fmt;

use crate::ground::{GroundProgram, GroundRule};
use crate::program::RuleKind;
use crate::term::{complement, Arg, Atom, Binding, Literal, Property, Substitution, Term};

/// The set of derived ground literals. Monotone during a run; never holds a
/// literal together with its complement.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct Database {
    literals: BTreeSet<Literal>,
}

impl FromIterator<Literal> for Database {
    fn from_iter<I: IntoIterator<Item = Literal>>(iter: I) -> Self {
        Database {
            literals: iter.into_iter().collect(),
        }
    }
}

impl Database {
    pub fn contains(&self, lit: &Literal) -> bool {
        self.literals.contains(lit)
    }

    pub fn len(&self) -> usize {
        self.literals.len()
    }

    pub fn is_empty(&self) -> bool {
        self.literals.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = &Literal> {
        self.literals.iter()
    }

    pub fn literals(&self) -> &BTreeSet<Literal> {
        &self.literals
    }

    /// All ground literals matching a pattern (variables allowed), in
    /// deterministic order.
    pub fn query(&self, pattern: &Literal) -> Vec<Literal> {
        self.literals
            .iter()
            .filter(|l| match_literal(pattern, l).is_some())
            .cloned()
            .collect()
    }
}

/// How a trace node came to be.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Origin {
    InputFact,
    Implication,
    NormalDefault,
    SemiNormalDefault,
}

impl Origin {
    pub fn name(&self) -> &'static str {
        match self {
            Origin::InputFact => "input-fact",
            Origin::Implication => "implication",
            Origin::NormalDefault => "normal-default",
            Origin::SemiNormalDefault => "semi-normal-default",
        }
    }
}

/// One derived literal with the rule instance and premises that produced it.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct TraceNode {
    pub literal: Literal,
    pub origin: Origin,
    pub rule: Option<String>,
    pub substitution: Option<Substitution>,
    /// Node ids of the premises, all derived at earlier steps.
    pub premises: Vec<usize>,
    /// Literals whose absence was verified when a default fired (the
    /// justification's and constraint's complements) or a NAF check passed.
    pub checked_absent: Vec<Literal>,
    /// (layer, sublayer) of the deriving stratum; input facts carry none.
    pub stratum: Option<(u8, u32)>,
    pub step: usize,
}

/// The full derivation record of a run.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct Trace {
    nodes: Vec<TraceNode>,
    by_literal: BTreeMap<Literal, usize>,
}

impl Trace {
    pub fn nodes(&self) -> &[TraceNode] {
        &self.nodes
    }

    pub fn node_of(&self, lit: &Literal) -> Option<&TraceNode> {
        self.by_literal.get(lit).map(|&i| &self.nodes[i])
    }

    pub fn node_id(&self, lit: &Literal) -> Option<usize> {
        self.by_literal.get(lit).copied()
    }

    fn push(&mut self, mut node: TraceNode) -> usize {
        let id = self.nodes.len();
        node.step = id;
        self.by_literal.insert(node.literal.clone(), id);
        self.nodes.push(node);
        id
    }
}

/// The two clashing derivations reported when a run hits a contradiction.
#[derive(Clone, Debug)]
pub struct InconsistencyReport {
    pub existing: TraceNode,
    pub attempted: Literal,
    pub by_rule: String,
    pub trace: Trace,
}

#[derive(Clone, Debug)]
pub enum EngineError {
    Inconsistent(Box<InconsistencyReport>),
}

impl fmt::Display for EngineError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            EngineError::Inconsistent(r) => write!(
                f,
                "inconsistent database: rule {} derives {}, but {} was derived by {} (step {})",
                r.by_rule,
                r.attempted,
                r.existing.literal,
                r.existing
                    .rule
                    .as_deref()
                    .unwrap_or(r.existing.origin.name()),
                r.existing.step
            ),
        }
    }
}

struct Run {
    db: Database,
    trace: Trace,
}

impl Run {
    fn body_satisfied(&self, rule: &GroundRule) -> bool {
        rule.body.iter().all(|(lit, naf)| {
            if *naf {
                !self.db.contains(lit)
            } else {
                self.db.contains(lit)
            }
        })
    }

    fn premises_of(&self, rule: &GroundRule) -> (Vec<usize>, Vec<Literal>) {
        let mut premises = Vec::new();
        let mut checked = Vec::new();
        for (lit, naf) in &rule.body {
            if *naf {
                checked.push(lit.clone());
            } else if let Some(id) = self.trace.node_id(lit) {
                premises.push(id);
            }
        }
        (premises, checked)
    }

    fn insert(
        &mut self,
        lit: Literal,
        origin: Origin,
        rule: &GroundRule,
        extra_checked: Vec<Literal>,
    ) -> Result<bool, EngineError> {
        if self.db.contains(&lit) {
            return Ok(false);
        }
        let neg = complement(&lit);
        if self.db.contains(&neg) {
            let existing = self
                .trace
                .node_of(&neg)
                .cloned()
                .expect("complement in db must be traced");
            return Err(EngineError::Inconsistent(Box::new(InconsistencyReport {
                existing,
                attempted: lit,
                by_rule: rule.label.clone(),
                trace: self.trace.clone(),
            })));
        }
        let (premises, mut checked) = self.premises_of(rule);
        checked.extend(extra_checked);
        self.db.literals.insert(lit.clone());
        self.trace.push(TraceNode {
            literal: lit,
            origin,
            rule: Some(rule.label.clone()),
            substitution: Some(rule.substitution.clone()),
            premises,
            checked_absent: checked,
            stratum: Some(rule.stratum),
            step: 0,
        });
        Ok(true)
    }

    /// Closes the given implication instances under forward chaining.
    fn close_implications(&mut self, implications: &[&GroundRule]) -> Result<(), EngineError> {
        loop {
            let mut changed = false;
            for rule in implications {
                if self.db.contains(&rule.head) {
                    continue;
                }
                if self.body_satisfied(rule) {
                    self.insert(rule.head.clone(), Origin::Implication, rule, Vec::new())?;
                    changed = true;
                }
            }
            if !changed {
                return Ok(());
            }
        }
    }

    /// The highest-priority default whose prerequisite holds, whose
    /// conclusion is new, and whose justification (and constraint, for
    /// semi-normal defaults) is consistent with the current database.
    fn first_eligible<'r>(&self, defaults: &[&'r GroundRule]) -> Option<&'r GroundRule> {
        defaults.iter().copied().find(|rule| {
            if self.db.contains(&rule.head) {
                return false;
            }
            if !self.body_satisfied(rule) {
                return false;
            }
            if self.db.contains(&complement(&rule.head)) {
                return false;
            }
            if let Some(c) = &rule.constraint {
                if self.db.contains(&complement(c)) {
                    return false;
                }
            }
            true
        })
    }
}

/// Runs the ground program stratum by stratum. Within a stratum,
/// implications close first; then defaults fire one at a time in priority
/// order (stratum, rule label, substitution), implications re-closing after
/// every firing, until fixpoint. Fired conclusions are permanent.
pub fn run_stratified(ground: &GroundProgram) -> Result<(Database, Trace), EngineError> {
    let mut run = Run {
        db: Database::default(),
        trace: Trace::default(),
    };

    // Input facts: static facts first, then modal facts, both in canonical
    // order. Contradictory inputs abort immediately.
    for lit in ground.static_facts.iter().chain(ground.facts.iter()) {
        if run.db.contains(lit) {
            continue;
        }
        let neg = complement(lit);
        if let Some(existing) = run.trace.node_of(&neg).cloned() {
            return Err(EngineError::Inconsistent(Box::new(InconsistencyReport {
                existing,
                attempted: lit.clone(),
                by_rule: "input".into(),
                trace: run.trace.clone(),
            })));
        }
        run.db.literals.insert(lit.clone());
        run.trace.push(TraceNode {
            literal: lit.clone(),
            origin: Origin::InputFact,
            rule: None,
            substitution: None,
            premises: Vec::new(),
            checked_absent: Vec::new(),
            stratum: None,
            step: 0,
        });
    }

    // Group instances by stratum position, with the in-stratum priority
    // order (rule label, then substitution).
    let mut by_stratum: BTreeMap<usize, Vec<&GroundRule>> = BTreeMap::new();
    for rule in &ground.rules {
        by_stratum.entry(rule.stratum_pos).or_default().push(rule);
    }
    for rules in by_stratum.values_mut() {
        rules.sort_by(|a, b| (&a.label, &a.substitution).cmp(&(&b.label, &b.substitution)));
    }

    for rules in by_stratum.values() {
        let implications: Vec<&GroundRule> = rules
            .iter()
            .copied()
            .filter(|r| r.kind == RuleKind::Implication)
            .collect();
        let defaults: Vec<&GroundRule> = rules
            .iter()
            .copied()
            .filter(|r| r.kind != RuleKind::Implication)
            .collect();

        run.close_implications(&implications)?;
        while let Some(rule) = run.first_eligible(&defaults) {
            let origin = match rule.kind {
                RuleKind::NormalDefault => Origin::NormalDefault,
                RuleKind::SemiNormalDefault => Origin::SemiNormalDefault,
                RuleKind::Implication => unreachable!("defaults only"),
            };
            let mut checked = alloc::vec![complement(&rule.head)];
            if let Some(c) = &rule.constraint {
                checked.push(complement(c));
            }
            run.insert(rule.head.clone(), origin, rule, checked)?;
            run.close_implications(&implications)?;
        }
    }

    Ok((run.db, run.trace))
}

/// One-way matching of a pattern atom against a ground atom, extending the
/// given substitution (existing bindings must agree).
pub fn match_atom_into(pattern: &Atom, ground: &Atom, subst: &mut Substitution) -> Option<()> {
    match_atom(pattern, ground, subst)
}

/// One-way matching of a pattern literal against a ground literal.
pub fn match_literal(pattern: &Literal, ground: &Literal) -> Option<Substitution> {
    if pattern.sign != ground.sign {
        return None;
    }
    let mut subst = Substitution::new();
    match_atom(&pattern.atom, &ground.atom, &mut subst)?;
    Some(subst)
}

fn match_atom(pattern: &Atom, ground: &Atom, subst: &mut Substitution) -> Option<()> {
    match (pattern, ground) {
        (
            Atom::Modal {
                modality: pm,
                property: pp,
                agent: pa,
                state: ps,
            },
            Atom::Modal {
                modality: gm,
                property: gp,
                agent: ga,
                state: gs,
            },
        ) => {
            if pm != gm {
                return None;
            }
            match_property(pp, gp, subst)?;
            match_term(pa, ga, subst)?;
            match_term(ps, gs, subst)
        }
        (
            Atom::Static {
                predicate: p,
                args: pargs,
            },
            Atom::Static {
                predicate: g,
                args: gargs,
            },
        ) => {
            if p != g || pargs.len() != gargs.len() {
                return None;
            }
            for (pa, ga) in pargs.iter().zip(gargs) {
                match (pa, ga) {
                    (Arg::Term(pt), Arg::Term(gt)) => match_term(pt, gt, subst)?,
                    (Arg::Property(pp), Arg::Property(gp)) => match_property(pp, gp, subst)?,
                    _ => return None,
                }
            }
            Some(())
        }
        _ => None,
    }
}

fn bind_term(subst: &mut Substitution, var: &str, value: Term) -> Option<()> {
    match subst.get(var) {
        Some(Binding::Term(existing)) if *existing == value => Some(()),
        Some(_) => None,
        None => {
            subst.bind_term(var, value);
            Some(())
        }
    }
}

fn match_term(pattern: &Term, ground: &Term, subst: &mut Substitution) -> Option<()> {
    match pattern {
        Term::Variable(v) => bind_term(subst, v, ground.clone()),
        Term::StateOffset { var, offset } => {
            let Term::State(g) = ground else { return None };
            match subst.get(var) {
                Some(Binding::Term(Term::State(n))) => {
                    let expected = i64::from(*n) + i64::from(*offset);
                    (expected == i64::from(*g)).then_some(())
                }
                Some(_) => None,
                None => {
                    let base = i64::from(*g) - i64::from(*offset);
                    if base < 1 {
                        return None;
                    }
                    bind_term(subst, var, Term::State(base as u32))
                }
            }
        }
        _ => (pattern == ground).then_some(()),
    }
}

fn match_property(pattern: &Property, ground: &Property, subst: &mut Substitution) -> Option<()> {
    match (pattern, ground) {
        (Property::Variable(v), _) => match subst.get(v) {
            Some(Binding::Property(existing)) if existing == ground => Some(()),
            Some(_) => None,
            None => {
                subst.bind_property(v.clone(), ground.clone());
                Some(())
            }
        },
        (Property::Atomic(p), Property::Atomic(g)) => (p == g).then_some(()),
        (Property::Combine(pb, pa), Property::Combine(gb, ga)) => {
            match_property(pb, gb, subst)?;
            match_term(pa, ga, subst)
        }
        _ => None,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ground::{ground, DEFAULT_INSTANCE_CAP};
    use crate::parser::{parse_literal, parse_program};
    use crate::stratify::stratify;

    fn run_text(text: &str) -> (Database, Trace, crate::program::Program) {
        let p = parse_program(text).unwrap();
        let s = stratify(&p).unwrap();
        let g = ground(&p, Some(&s), DEFAULT_INSTANCE_CAP).unwrap();
        let (db, trace) = run_stratified(&g).unwrap();
        (db, trace, p)
    }

    #[test]
    fn no_defaults_means_classical_closure() {
        let (db, _, p) = run_text(
            "prop a/0. prop b/0. prop c/0.\n\
             holds(a, x, 1).\n\
             holds(a, V, T) => holds(b, V, T).\n\
             holds(b, V, T) => holds(c, V, T).",
        );
        for lit in ["holds(a, x, 1)", "holds(b, x, 1)", "holds(c, x, 1)"] {
            let lit = parse_literal(lit, &p).unwrap();
            assert!(db.contains(&lit), "missing {lit}");
        }
        assert_eq!(db.len(), 3);
    }

    #[test]
    fn competing_prerequisite_free_defaults_fire_by_label_order() {
        let (db, trace, p) = run_text(
            "prop a/0.\nholds(a, seed, 1).\n\
             @r1 true : holds(a, x, 1).\n\
             @r2 true : -holds(a, x, 1).",
        );
        let pos = parse_literal("holds(a, x, 1)", &p).unwrap();
        let neg = parse_literal("-holds(a, x, 1)", &p).unwrap();
        assert!(db.contains(&pos));
        assert!(!db.contains(&neg));
        let node = trace.node_of(&pos).unwrap();
        assert_eq!(node.origin, Origin::NormalDefault);
        assert_eq!(node.rule.as_deref(), Some("r1"));
        assert_eq!(node.checked_absent, [neg]);
    }

    #[test]
    fn defaults_are_blocked_by_present_complements() {
        let (db, _, p) = run_text(
            "prop stop/0. prop bump/1.\n\
             holds(stop, c, 1).\n\
             holds(combine(bump, d), c, 2).\n\
             holds(stop, c, 3).\n\
             @bump_not_stop holds(combine(bump, V), W, T) => -holds(stop, W, T).\n\
             @stop_back holds(stop, V, T) : holds(stop, V, T-1).",
        );
        // Backward persistence from state 3 is blocked at the bump state.
        let blocked = parse_literal("holds(stop, c, 2)", &p).unwrap();
        assert!(!db.contains(&blocked));
        assert!(db.contains(&parse_literal("-holds(stop, c, 2)", &p).unwrap()));
    }

    #[test]
    fn implications_reclose_between_default_firings() {
        // Firing r1 derives a, the implication derives -b, so r2 is blocked.
        let (db, _, p) = run_text(
            "prop a/0. prop b/0.\n\
             holds(a, seed, 1).\n\
             @imp holds(a, x, 1) => -holds(b, x, 1).\n\
             @r1 true : holds(a, x, 1).\n\
             @r2 true : holds(b, x, 1).",
        );
        assert!(db.contains(&parse_literal("holds(a, x, 1)", &p).unwrap()));
        assert!(db.contains(&parse_literal("-holds(b, x, 1)", &p).unwrap()));
        assert!(!db.contains(&parse_literal("holds(b, x, 1)", &p).unwrap()));
    }

    #[test]
    fn contradictory_implications_abort_with_both_nodes() {
        let p = parse_program(
            "prop a/0. prop b/0.\n\
             holds(a, x, 1).\n\
             @i1 holds(a, V, T) => holds(b, V, T).\n\
             @i2 holds(a, V, T) => -holds(b, V, T).",
        )
        .unwrap();
        let s = stratify(&p).unwrap();
        let g = ground(&p, Some(&s), DEFAULT_INSTANCE_CAP).unwrap();
        let err = run_stratified(&g).unwrap_err();
        let EngineError::Inconsistent(report) = err;
        assert_eq!(report.by_rule, "i2");
        assert_eq!(report.existing.rule.as_deref(), Some("i1"));
    }

    #[test]
    fn naf_bodies_read_finished_strata() {
        let (db, _, p) = run_text(
            "prop a/0. prop b/0. prop c/0.\n\
             holds(a, x, 1). holds(a, y, 1).\n\
             holds(a, x, 1) => holds(b, x, 1).\n\
             @naf holds(a, V, T), not holds(b, V, T) => holds(c, V, T).",
        );
        assert!(!db.contains(&parse_literal("holds(c, x, 1)", &p).unwrap()));
        assert!(db.contains(&parse_literal("holds(c, y, 1)", &p).unwrap()));
    }

    #[test]
    fn query_matches_patterns_deterministically() {
        let (db, _, p) = run_text(
            "prop stop/0. prop follow/1.\n\
             holds(stop, a, 1). holds(stop, b, 2).\n\
             holds(combine(follow, b), a, 2).",
        );
        let hits = db.query(&parse_literal("holds(stop, X, T)", &p).unwrap());
        assert_eq!(hits.len(), 2);
        assert!(hits[0] < hits[1]);
        // Ground pattern: membership test.
        let hits = db.query(&parse_literal("holds(stop, a, 1)", &p).unwrap());
        assert_eq!(hits.len(), 1);
        // Pattern with a shifted state variable.
        let hits = db.query(&parse_literal("holds(combine(follow, V), W, T+1)", &p).unwrap());
        assert_eq!(hits.len(), 1);
        assert!(db
            .query(&parse_literal("holds(stop, zzz, 1)", &p).unwrap())
            .is_empty());
    }

    #[test]
    fn traces_are_monotone_and_premises_precede() {
        let (_, trace, _) = run_text(
            "prop a/0. prop b/0.\n\
             holds(a, x, 1).\n\
             holds(a, V, T) => holds(b, V, T).\n\
             holds(b, V, T) : holds(b, V, T-1).",
        );
        for (i, node) in trace.nodes().iter().enumerate() {
            assert_eq!(node.step, i);
            for &p in &node.premises {
                assert!(p < i, "premise {p} not before node {i}");
            }
        }
    }
}
