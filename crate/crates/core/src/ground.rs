//! Finite-domain instantiation of a program: schemas and rules are expanded
//! over the constants, states and properties the program mentions.

use alloc::collections::{BTreeMap, BTreeSet};
use alloc::string::String;
use alloc::vec::Vec;
use core::fmt;

use crate::program::{Program, RuleKind};
use crate::stratify::{key_of, StratumAssignment};
use crate::term::{Arg, Atom, Binding, Literal, Property, SubstError, Substitution, Term};

/// Default cap on the number of enumerated rule instances.
pub const DEFAULT_INSTANCE_CAP: usize = 100_000;

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum GroundError {
    /// No facts at all: there is nothing to range over.
    EmptyDomain,
    /// The instance count exceeds the configured cap.
    InstanceCapExceeded { cap: usize },
    /// A rule head's predicate key received no stratum (internal invariant).
    UnstratifiedRule { label: String },
}

impl fmt::Display for GroundError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            GroundError::EmptyDomain => {
                write!(f, "cannot ground a program without facts (empty domain)")
            }
            GroundError::InstanceCapExceeded { cap } => {
                write!(f, "grounding exceeds the instance cap of {cap}")
            }
            GroundError::UnstratifiedRule { label } => {
                write!(f, "rule {label} has no stratum assignment")
            }
        }
    }
}

/// One fully ground rule instance, carrying its origin label and the
/// substitution that produced it.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct GroundRule {
    pub label: String,
    pub kind: RuleKind,
    /// Body conjuncts with their NAF flag.
    pub body: Vec<(Literal, bool)>,
    pub head: Literal,
    pub constraint: Option<Literal>,
    pub substitution: Substitution,
    /// Evaluation-order position of the originating rule's head key.
    pub stratum_pos: usize,
    /// Stratum slot (layer, sublayer) of the originating rule's head key.
    pub stratum: (u8, u32),
}

/// A ground program: facts plus ground rule instances over finite domains.
#[derive(Clone, Debug, Default)]
pub struct GroundProgram {
    pub facts: Vec<Literal>,
    pub static_facts: Vec<Literal>,
    pub rules: Vec<GroundRule>,
    pub t_max: u32,
    pub constants: BTreeSet<String>,
    pub properties: BTreeSet<Property>,
}

impl GroundProgram {
    pub fn defaults(&self) -> impl Iterator<Item = &GroundRule> {
        self.rules
            .iter()
            .filter(|r| r.kind != RuleKind::Implication)
    }

    pub fn implications(&self) -> impl Iterator<Item = &GroundRule> {
        self.rules
            .iter()
            .filter(|r| r.kind == RuleKind::Implication)
    }
}

/// Variable sorts inferred from the positions a variable occupies.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
enum VarSort {
    Property,
    State,
    Constant,
}

fn collect_constants_term(term: &Term, out: &mut BTreeSet<String>) {
    if let Term::Constant(name) = term {
        out.insert(name.clone());
    }
}

fn collect_constants_prop(prop: &Property, out: &mut BTreeSet<String>) {
    if let Property::Combine(base, arg) = prop {
        collect_constants_prop(base, out);
        collect_constants_term(arg, out);
    }
}

fn collect_constants(atom: &Atom, out: &mut BTreeSet<String>) {
    match atom {
        Atom::Modal {
            property,
            agent,
            state,
            ..
        } => {
            collect_constants_prop(property, out);
            collect_constants_term(agent, out);
            collect_constants_term(state, out);
        }
        Atom::Static { args, .. } => {
            for a in args {
                match a {
                    Arg::Term(t) => collect_constants_term(t, out),
                    Arg::Property(p) => collect_constants_prop(p, out),
                }
            }
        }
    }
}

/// Property patterns occurring in an atom (for the property domain).
fn collect_prop_patterns(atom: &Atom, out: &mut BTreeSet<Property>) {
    match atom {
        Atom::Modal { property, .. } => {
            if !matches!(property, Property::Variable(_)) {
                out.insert(property.clone());
            }
        }
        Atom::Static { args, .. } => {
            for a in args {
                if let Arg::Property(p) = a {
                    if !matches!(p, Property::Variable(_)) {
                        out.insert(p.clone());
                    }
                }
            }
        }
    }
}

/// Sorts of each variable in an atom.
fn collect_sorts(atom: &Atom, sorts: &mut BTreeMap<String, VarSort>) {
    fn term_sort(term: &Term, sort: VarSort, sorts: &mut BTreeMap<String, VarSort>) {
        match term {
            Term::Variable(v) => {
                let entry = sorts.entry(v.clone()).or_insert(sort);
                // State is more specific than Constant.
                if sort == VarSort::State {
                    *entry = VarSort::State;
                }
            }
            Term::StateOffset { var, .. } => {
                sorts.insert(var.clone(), VarSort::State);
            }
            _ => {}
        }
    }
    fn prop_sort(prop: &Property, sorts: &mut BTreeMap<String, VarSort>) {
        match prop {
            Property::Variable(v) => {
                sorts.insert(v.clone(), VarSort::Property);
            }
            Property::Combine(base, arg) => {
                prop_sort(base, sorts);
                term_sort(arg, VarSort::Constant, sorts);
            }
            Property::Atomic(_) => {}
        }
    }
    match atom {
        Atom::Modal {
            property,
            agent,
            state,
            ..
        } => {
            prop_sort(property, sorts);
            term_sort(agent, VarSort::Constant, sorts);
            term_sort(state, VarSort::State, sorts);
        }
        Atom::Static { args, .. } => {
            for a in args {
                match a {
                    Arg::Term(t) => term_sort(t, VarSort::Constant, sorts),
                    Arg::Property(p) => prop_sort(p, sorts),
                }
            }
        }
    }
}

/// Ground instances of a property pattern over the constant domain.
fn instantiate_pattern(
    pattern: &Property,
    constants: &BTreeSet<String>,
    out: &mut BTreeSet<Property>,
) {
    let mut vars = BTreeSet::new();
    pattern.collect_vars(&mut vars);
    if vars.is_empty() {
        out.insert(pattern.clone());
        return;
    }
    let vars: Vec<String> = vars.into_iter().collect();
    let mut assign = alloc::vec![0usize; vars.len()];
    let consts: Vec<&String> = constants.iter().collect();
    if consts.is_empty() {
        return;
    }
    loop {
        let mut s = Substitution::new();
        for (vi, v) in vars.iter().enumerate() {
            s.bind_term(v.clone(), Term::Constant(consts[assign[vi]].clone()));
        }
        if let Ok(p) = s.apply_property(pattern) {
            out.insert(p);
        }
        // Odometer step.
        let mut i = 0;
        loop {
            if i == vars.len() {
                return;
            }
            assign[i] += 1;
            if assign[i] < consts.len() {
                break;
            }
            assign[i] = 0;
            i += 1;
        }
    }
}

/// Static predicates that no rule derives are fixed by the program's facts;
/// instances whose fixed-static bodies cannot hold are dropped at grounding.
fn given_static_holds(
    lit: &Literal,
    naf: bool,
    ground_statics: &BTreeSet<Literal>,
) -> Option<bool> {
    let Atom::Static { .. } = &lit.atom else {
        return None;
    };
    if naf {
        return Some(!ground_statics.contains(lit));
    }
    if !lit.is_positive() {
        // Static facts are positive; a negative static body literal can
        // never be satisfied.
        return Some(false);
    }
    Some(ground_statics.contains(lit))
}

/// Grounds a validated, stratified program. Rule variables range over the
/// property, state and constant domains assembled from the program text;
/// instances whose state arithmetic leaves `[1, t_max]` are absent.
///
/// Without a stratum assignment (oracle use: extension enumeration does not
/// evaluate in stratum order) every instance sits at position 0.
pub fn ground(
    program: &Program,
    strata: Option<&StratumAssignment>,
    cap: usize,
) -> Result<GroundProgram, GroundError> {
    if program.facts.is_empty() && program.static_facts.is_empty() {
        return Err(GroundError::EmptyDomain);
    }
    let t_max = program.max_state().unwrap_or(1);

    // Constant domain.
    let mut constants = BTreeSet::new();
    for lit in program.all_literals() {
        collect_constants(&lit.atom, &mut constants);
    }

    // Property domain: ground instances of every pattern in the program.
    let mut patterns = BTreeSet::new();
    for lit in program.all_literals() {
        collect_prop_patterns(&lit.atom, &mut patterns);
    }
    let mut properties = BTreeSet::new();
    for pattern in &patterns {
        instantiate_pattern(pattern, &constants, &mut properties);
    }

    // Ground static facts, instantiating incompatible schemas.
    let mut ground_statics: BTreeSet<Literal> = BTreeSet::new();
    for fact in &program.static_facts {
        if fact.is_ground() {
            ground_statics.insert(fact.clone());
            continue;
        }
        let mut sorts = BTreeMap::new();
        collect_sorts(&fact.atom, &mut sorts);
        let vars: Vec<(String, VarSort)> = sorts.into_iter().collect();
        enumerate(
            &Substitution::new(),
            &vars,
            &constants,
            t_max,
            &properties,
            cap,
            &mut 0,
            |subst| {
                if let Ok(lit) = subst.apply_literal(fact) {
                    ground_statics.insert(lit);
                }
                Ok(())
            },
        )?;
    }

    // Which statics are derivable (appear as a rule head)?
    let derivable: BTreeSet<&str> = program
        .rules
        .iter()
        .filter_map(|r| match &r.head.atom {
            Atom::Static { predicate, .. } => Some(predicate.as_str()),
            _ => None,
        })
        .collect();

    let mut rules = Vec::new();
    let mut candidates: usize = 0;
    for rule in &program.rules {
        let mut sorts = BTreeMap::new();
        for b in &rule.body {
            collect_sorts(&b.literal.atom, &mut sorts);
        }
        if let Some(c) = &rule.constraint {
            collect_sorts(&c.atom, &mut sorts);
        }
        collect_sorts(&rule.head.atom, &mut sorts);

        // Seed substitutions by joining the fixed-static body atoms against
        // the static facts; only the residual variables are enumerated over
        // the full domains.
        let mut seeds: Vec<Substitution> = alloc::vec![Substitution::new()];
        let mut seeded_vars: BTreeSet<String> = BTreeSet::new();
        for b in &rule.body {
            if b.naf || !b.literal.is_positive() {
                continue;
            }
            let Atom::Static { predicate, .. } = &b.literal.atom else {
                continue;
            };
            if derivable.contains(predicate.as_str()) {
                continue;
            }
            let mut next: BTreeSet<Substitution> = BTreeSet::new();
            for fact in &ground_statics {
                for seed in &seeds {
                    let mut s = seed.clone();
                    if crate::engine::match_atom_into(&b.literal.atom, &fact.atom, &mut s).is_some()
                    {
                        next.insert(s);
                    }
                }
            }
            seeds = next.into_iter().collect();
            b.literal.atom.collect_vars(&mut seeded_vars);
            if seeds.is_empty() {
                break;
            }
            if seeds.len() > cap {
                return Err(GroundError::InstanceCapExceeded { cap });
            }
        }
        if seeds.is_empty() {
            continue;
        }

        let head_key = key_of(&rule.head.atom);
        let (stratum, stratum_pos) =
            match strata {
                Some(strata) => {
                    let stratum = strata.stratum_of(&head_key).ok_or_else(|| {
                        GroundError::UnstratifiedRule {
                            label: rule.label.clone(),
                        }
                    })?;
                    let pos = strata.position(&head_key).ok_or_else(|| {
                        GroundError::UnstratifiedRule {
                            label: rule.label.clone(),
                        }
                    })?;
                    (stratum, pos)
                }
                None => ((0, 0), 0),
            };

        // Variables in first-occurrence order for a lexicographic
        // substitution order.
        let mut order: Vec<String> = Vec::new();
        let mut seen = BTreeSet::new();
        let mut note = |atom: &Atom| {
            let mut ordered: Vec<String> = Vec::new();
            collect_var_order(atom, &mut ordered);
            for v in ordered {
                if seen.insert(v.clone()) {
                    order.push(v);
                }
            }
        };
        for b in &rule.body {
            note(&b.literal.atom);
        }
        if let Some(c) = &rule.constraint {
            note(&c.atom);
        }
        note(&rule.head.atom);

        let vars: Vec<(String, VarSort)> = order
            .into_iter()
            .filter(|v| !seeded_vars.contains(v))
            .map(|v| {
                let sort = sorts.get(&v).copied().unwrap_or(VarSort::Constant);
                (v, sort)
            })
            .collect();

        enumerate_seeded(
            &seeds,
            &vars,
            &constants,
            t_max,
            &properties,
            cap,
            &mut candidates,
            |subst| {
                let head = match subst.apply_literal(&rule.head) {
                    Ok(h) => h,
                    Err(SubstError::StateOutOfRange { .. }) => return Ok(()),
                    Err(_) => return Ok(()),
                };
                if let Some(n) = head.atom.ground_state() {
                    if n > t_max {
                        return Ok(());
                    }
                }
                let mut body = Vec::with_capacity(rule.body.len());
                for b in &rule.body {
                    match subst.apply_literal(&b.literal) {
                        Ok(lit) => {
                            if let Some(n) = lit.atom.ground_state() {
                                if n > t_max {
                                    return Ok(());
                                }
                            }
                            // Prune on fixed statics.
                            if let Atom::Static { predicate, .. } = &lit.atom {
                                if !derivable.contains(predicate.as_str()) {
                                    match given_static_holds(&lit, b.naf, &ground_statics) {
                                        Some(true) => {}
                                        Some(false) => return Ok(()),
                                        None => {}
                                    }
                                }
                            }
                            body.push((lit, b.naf));
                        }
                        Err(SubstError::StateOutOfRange { .. }) => return Ok(()),
                        Err(_) => return Ok(()),
                    }
                }
                let constraint = match &rule.constraint {
                    None => None,
                    Some(c) => match subst.apply_literal(c) {
                        Ok(lit) => {
                            if let Some(n) = lit.atom.ground_state() {
                                if n > t_max {
                                    return Ok(());
                                }
                            }
                            Some(lit)
                        }
                        Err(SubstError::StateOutOfRange { .. }) => return Ok(()),
                        Err(_) => return Ok(()),
                    },
                };
                rules.push(GroundRule {
                    label: rule.label.clone(),
                    kind: rule.kind,
                    body,
                    head,
                    constraint,
                    substitution: subst.clone(),
                    stratum_pos,
                    stratum,
                });
                Ok(())
            },
        )?;
    }

    Ok(GroundProgram {
        facts: program.facts.clone(),
        static_facts: ground_statics.into_iter().collect(),
        rules,
        t_max,
        constants,
        properties,
    })
}

/// Variables of an atom in left-to-right occurrence order.
fn collect_var_order(atom: &Atom, out: &mut Vec<String>) {
    fn term_vars(term: &Term, out: &mut Vec<String>) {
        match term {
            Term::Variable(v) | Term::StateOffset { var: v, .. } => out.push(v.clone()),
            _ => {}
        }
    }
    fn prop_vars(prop: &Property, out: &mut Vec<String>) {
        match prop {
            Property::Variable(v) => out.push(v.clone()),
            Property::Combine(base, arg) => {
                prop_vars(base, out);
                term_vars(arg, out);
            }
            Property::Atomic(_) => {}
        }
    }
    match atom {
        Atom::Modal {
            property,
            agent,
            state,
            ..
        } => {
            prop_vars(property, out);
            term_vars(agent, out);
            term_vars(state, out);
        }
        Atom::Static { args, .. } => {
            for a in args {
                match a {
                    Arg::Term(t) => term_vars(t, out),
                    Arg::Property(p) => prop_vars(p, out),
                }
            }
        }
    }
}

/// Enumerates all substitutions over the typed domains in lexicographic
/// order (extending `base`), charging each candidate against the cap.
#[allow(clippy::too_many_arguments)]
fn enumerate<F>(
    base: &Substitution,
    vars: &[(String, VarSort)],
    constants: &BTreeSet<String>,
    t_max: u32,
    properties: &BTreeSet<Property>,
    cap: usize,
    candidates: &mut usize,
    mut visit: F,
) -> Result<(), GroundError>
where
    F: FnMut(&Substitution) -> Result<(), GroundError>,
{
    let const_domain: Vec<Binding> = constants
        .iter()
        .map(|c| Binding::Term(Term::Constant(c.clone())))
        .collect();
    let state_domain: Vec<Binding> = (1..=t_max).map(|n| Binding::Term(Term::State(n))).collect();
    let prop_domain: Vec<Binding> = properties
        .iter()
        .map(|p| Binding::Property(p.clone()))
        .collect();

    let domains: Vec<&[Binding]> = vars
        .iter()
        .map(|(_, sort)| match sort {
            VarSort::Constant => const_domain.as_slice(),
            VarSort::State => state_domain.as_slice(),
            VarSort::Property => prop_domain.as_slice(),
        })
        .collect();

    // Total candidate count for this enumeration, checked against the cap.
    let mut total: usize = 1;
    for d in &domains {
        total = total.saturating_mul(d.len());
    }
    *candidates = candidates.saturating_add(total);
    if *candidates > cap {
        return Err(GroundError::InstanceCapExceeded { cap });
    }
    if domains.iter().any(|d| d.is_empty()) {
        return Ok(());
    }

    let mut idx = alloc::vec![0usize; vars.len()];
    loop {
        let mut s = base.clone();
        for (vi, (name, _)) in vars.iter().enumerate() {
            match &domains[vi][idx[vi]] {
                Binding::Term(t) => s.bind_term(name.clone(), t.clone()),
                Binding::Property(p) => s.bind_property(name.clone(), p.clone()),
            }
        }
        visit(&s)?;
        // Odometer: rightmost variable varies fastest so substitutions come
        // out in lexicographic order of the variable list.
        let mut i = vars.len();
        loop {
            if i == 0 {
                return Ok(());
            }
            i -= 1;
            idx[i] += 1;
            if idx[i] < domains[i].len() {
                break;
            }
            idx[i] = 0;
            if i == 0 {
                return Ok(());
            }
        }
    }
}

/// Runs [`enumerate`] once per seed substitution.
#[allow(clippy::too_many_arguments)]
fn enumerate_seeded<F>(
    seeds: &[Substitution],
    vars: &[(String, VarSort)],
    constants: &BTreeSet<String>,
    t_max: u32,
    properties: &BTreeSet<Property>,
    cap: usize,
    candidates: &mut usize,
    mut visit: F,
) -> Result<(), GroundError>
where
    F: FnMut(&Substitution) -> Result<(), GroundError>,
{
    for seed in seeds {
        enumerate(
            seed, vars, constants, t_max, properties, cap, candidates, &mut visit,
        )?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::parser::parse_program;
    use crate::stratify::stratify;
    use crate::term::cst;

    fn ground_text(text: &str) -> GroundProgram {
        let p = parse_program(text).unwrap();
        let s = stratify(&p).unwrap();
        ground(&p, Some(&s), DEFAULT_INSTANCE_CAP).unwrap()
    }

    #[test]
    fn facts_only_means_zero_instances() {
        let g = ground_text("prop stop/0.\nholds(stop, b, 1).");
        assert!(g.rules.is_empty());
        assert_eq!(g.t_max, 1);
    }

    #[test]
    fn empty_program_is_an_error() {
        let p = parse_program("prop stop/0.").unwrap();
        let s = stratify(&p).unwrap();
        assert_eq!(
            ground(&p, Some(&s), DEFAULT_INSTANCE_CAP).unwrap_err(),
            GroundError::EmptyDomain
        );
    }

    #[test]
    fn bump_rule_has_exactly_one_satisfiable_instance() {
        let g = ground_text(
            "prop stop/0. prop bump/1.\n\
             holds(combine(bump, b_narrator), a, 2).\n\
             holds(stop, b_narrator, 1).\n\
             @bump holds(combine(bump, V), W, T) => -holds(stop, W, T).",
        );
        let facts: BTreeSet<Literal> = g.facts.iter().cloned().collect();
        let satisfiable: Vec<&GroundRule> = g
            .rules
            .iter()
            .filter(|r| r.body.iter().all(|(l, _)| facts.contains(l)))
            .collect();
        assert_eq!(satisfiable.len(), 1);
        let inst = satisfiable[0];
        assert_eq!(
            inst.substitution.get("v"),
            Some(&Binding::Term(cst("b_narrator")))
        );
        assert_eq!(inst.substitution.get("w"), Some(&Binding::Term(cst("a"))));
        assert_eq!(
            inst.substitution.get("t"),
            Some(&Binding::Term(Term::State(2)))
        );
    }

    #[test]
    fn backward_persistence_at_state_one_is_discarded() {
        let g = ground_text(
            "prop follow/1.\n\
             holds(combine(follow, b), a, 1).\n\
             @persist holds(combine(follow, V), W, T) : holds(combine(follow, V), W, T-1).",
        );
        // t only ranges over {1}; the single candidate's head lands at state
        // 0 and is discarded.
        assert!(g.rules.is_empty());
    }

    #[test]
    fn incompatible_schemas_instantiate_over_constants() {
        let g = ground_text(
            "prop stop/0. prop bump/1.\n\
             holds(combine(bump, b), a, 2).\n\
             incompatible(stop, combine(bump, V)).",
        );
        let schemas: Vec<&Literal> = g
            .static_facts
            .iter()
            .filter(|l| matches!(&l.atom, Atom::Static { predicate, .. } if predicate == "incompatible"))
            .collect();
        // Constants are {a, b}: two instances.
        assert_eq!(schemas.len(), 2);
        assert!(schemas.iter().all(|l| l.is_ground()));
    }

    #[test]
    fn instance_cap_is_enforced_and_named() {
        let p = parse_program(
            "prop stop/0.\n\
             holds(stop, a, 1). holds(stop, b, 1). holds(stop, c, 1).\n\
             holds(stop, V, T), holds(stop, W, T) => holds(stop, V, T).",
        )
        .unwrap();
        let s = stratify(&p).unwrap();
        let err = ground(&p, Some(&s), 5).unwrap_err();
        assert_eq!(err, GroundError::InstanceCapExceeded { cap: 5 });
        assert!(err.to_string().contains('5'));
    }

    #[test]
    fn fixed_static_bodies_prune_instances() {
        let g = ground_text(
            "prop stop/0.\n\
             holds(stop, b, 1).\n\
             action(brake).\n\
             pcb(stop, brake).\n\
             @avail must(stop, V, T), action(Act), pcb(P, Act) : available(Act, P, V, T).",
        );
        // Act is pinned to brake and P to stop by the fixed statics; only V
        // still ranges over the two constants.
        assert_eq!(g.rules.len(), 2);
        assert!(g
            .rules
            .iter()
            .all(|r| r.substitution.get("act") == Some(&Binding::Term(cst("brake")))));
    }
}
