//! The linguistic stage: referent resolution, state segmentation, and the
//! engine-driven mapping from linguistic relations to semantic facts.

use alloc::collections::{BTreeMap, BTreeSet};
use alloc::format;
use alloc::string::{String, ToString};
use alloc::vec::Vec;
use core::fmt;

use crate::engine::{run_stratified, EngineError};
use crate::ground::{ground, GroundError};
use crate::program::{ParseDiagnostic, Program, Span, LINGUISTIC_PREDICATES};
use crate::stratify::{stratify, StratificationDiagnostic};
use crate::term::{Arg, Atom, Literal, Term};

/// The reserved constant every narrator word resolves to; rendered as `B`.
pub const NARRATOR: &str = "b_narrator";

/// Lexemes that denote the narrator.
pub const NARRATOR_WORDS: &[&str] = &["j", "je", "m", "me", "moi"];

/// Noun lexemes that denote a vehicle; a name qualifier rewrites them.
pub const VEHICLE_NOUNS: &[&str] = &["vehicule", "voiture", "camion"];

/// Temporal connectives that advance the state counter.
pub const TEMPORAL_CONNECTIVES: &[&str] = &["lorsque", "quand", "puis", "alors", "ensuite"];

/// A fixture's content: linguistic relations in clause order, plus any
/// semantic facts the fixture states directly (passed through unchanged).
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct LinguisticFactSet {
    /// Linguistic static atoms with their clause-order index.
    pub atoms: Vec<Atom>,
    /// Ground modal facts stated directly in the fixture.
    pub passthrough: Vec<Literal>,
}

impl LinguisticFactSet {
    pub fn is_empty(&self) -> bool {
        self.atoms.is_empty() && self.passthrough.is_empty()
    }
}

#[derive(Debug)]
pub enum MapError {
    Fixture(Vec<ParseDiagnostic>),
    Stratification(Vec<StratificationDiagnostic>),
    Ground(GroundError),
    Engine(EngineError),
}

impl fmt::Display for MapError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            MapError::Fixture(diags) => {
                write!(f, "fixture rejected with {} diagnostic(s)", diags.len())
            }
            MapError::Stratification(diags) => {
                write!(
                    f,
                    "linguistic KB failed stratification ({} diagnostics)",
                    diags.len()
                )
            }
            MapError::Ground(e) => write!(f, "{e}"),
            MapError::Engine(e) => write!(f, "{e}"),
        }
    }
}

/// Builds a [`LinguisticFactSet`] from parsed fixture facts, checking that
/// static facts use the linguistic vocabulary.
pub fn fixture_facts(
    parsed: Vec<(Literal, Span)>,
) -> Result<LinguisticFactSet, Vec<ParseDiagnostic>> {
    let mut set = LinguisticFactSet::default();
    let mut diags = Vec::new();
    for (lit, span) in parsed {
        match &lit.atom {
            Atom::Modal { .. } => set.passthrough.push(lit),
            Atom::Static { predicate, .. } => {
                if LINGUISTIC_PREDICATES.contains(&predicate.as_str()) {
                    set.atoms.push(lit.atom);
                } else {
                    diags.push(ParseDiagnostic::error(
                        format!("`{predicate}` is not a linguistic input predicate"),
                        span,
                    ));
                }
            }
        }
    }
    if diags.is_empty() {
        Ok(set)
    } else {
        Err(diags)
    }
}

fn static_args(atom: &Atom) -> Option<(&str, Vec<&Term>)> {
    match atom {
        Atom::Static { predicate, args } => {
            let terms = args
                .iter()
                .map(|a| match a {
                    Arg::Term(t) => Some(t),
                    Arg::Property(_) => None,
                })
                .collect::<Option<Vec<_>>>()?;
            Some((predicate.as_str(), terms))
        }
        Atom::Modal { .. } => None,
    }
}

fn constant(term: &Term) -> Option<&str> {
    match term {
        Term::Constant(name) => Some(name),
        _ => None,
    }
}

fn rewrite_atom(atom: &Atom, map: &BTreeMap<String, String>) -> Atom {
    fn rewrite_term(term: &Term, map: &BTreeMap<String, String>) -> Term {
        match term {
            Term::Constant(name) => match map.get(name) {
                Some(to) => Term::Constant(to.clone()),
                None => term.clone(),
            },
            _ => term.clone(),
        }
    }
    match atom {
        Atom::Static { predicate, args } => Atom::Static {
            predicate: predicate.clone(),
            args: args
                .iter()
                .map(|a| match a {
                    Arg::Term(t) => Arg::Term(rewrite_term(t, map)),
                    Arg::Property(p) => Arg::Property(p.clone()),
                })
                .collect(),
        },
        Atom::Modal { .. } => atom.clone(),
    }
}

/// Referent resolution: support-verb collapse, narrator words, and vehicle
/// nouns named by a qualifier. Returns the rewritten atoms (consumed
/// support/qualifier atoms dropped).
pub fn resolve_referents(atoms: &[Atom]) -> Vec<Atom> {
    // Support collapse: Support(x, y) merges the support verb x into y.
    let mut verb_map: BTreeMap<String, String> = BTreeMap::new();
    for atom in atoms {
        if let Some(("support", args)) = static_args(atom) {
            if let (Some(x), Some(y)) = (constant(args[0]), constant(args[1])) {
                verb_map.insert(x.to_string(), y.to_string());
            }
        }
    }

    // Narrator words and vehicle-noun naming rewrite noun positions.
    let mut noun_map: BTreeMap<String, String> = BTreeMap::new();
    for w in NARRATOR_WORDS {
        noun_map.insert((*w).to_string(), NARRATOR.to_string());
    }
    for atom in atoms {
        if let Some(("qualif_n", args)) = static_args(atom) {
            if let (Some(noun), Some(name)) = (constant(args[0]), constant(args[1])) {
                if VEHICLE_NOUNS.contains(&noun) {
                    noun_map.insert(noun.to_string(), name.to_string());
                }
            }
        }
    }

    let mut out = Vec::new();
    for atom in atoms {
        if let Some((pred, args)) = static_args(atom) {
            match pred {
                "support" => continue,
                "qualif_n" => {
                    // Drop the naming qualifier that was consumed above.
                    if let Some(noun) = constant(args[0]) {
                        if VEHICLE_NOUNS.contains(&noun) {
                            continue;
                        }
                    }
                }
                _ => {}
            }
        }
        // Verb slots rewrite via the support map, noun slots via the noun
        // map. Verb slots: subject/object/qualif_v arg 0, compl_v args 1..2.
        let rewritten = rewrite_atom(atom, &noun_map);
        let rewritten = match static_args(&rewritten) {
            Some((pred @ ("subject" | "object" | "qualif_v"), _)) => {
                rewrite_slot(&rewritten, pred, &[0], &verb_map)
            }
            Some(("compl_v", _)) => rewrite_slot(&rewritten, "compl_v", &[1, 2], &verb_map),
            _ => rewritten,
        };
        out.push(rewritten);
    }
    out
}

fn rewrite_slot(atom: &Atom, pred: &str, slots: &[usize], map: &BTreeMap<String, String>) -> Atom {
    let Atom::Static { predicate, args } = atom else {
        return atom.clone();
    };
    debug_assert_eq!(predicate, pred);
    let args = args
        .iter()
        .enumerate()
        .map(|(i, a)| {
            if !slots.contains(&i) {
                return a.clone();
            }
            match a {
                Arg::Term(Term::Constant(name)) => match map.get(name) {
                    Some(to) => Arg::Term(Term::Constant(to.clone())),
                    None => a.clone(),
                },
                _ => a.clone(),
            }
        })
        .collect();
    Atom::Static {
        predicate: predicate.clone(),
        args,
    }
}

/// The verbs of a resolved fact set, each with its first clause index.
fn verbs_in_order(atoms: &[Atom]) -> Vec<String> {
    let mut seen = BTreeSet::new();
    let mut out = Vec::new();
    for atom in atoms {
        let Some((pred, args)) = static_args(atom) else {
            continue;
        };
        let slot = match pred {
            "subject" | "object" | "qualif_v" => 0,
            "compl_v" => 1,
            _ => continue,
        };
        if let Some(verb) = constant(args[slot]) {
            if seen.insert(verb.to_string()) {
                out.push(verb.to_string());
            }
        }
    }
    out
}

/// Assigns a state to every verb: the counter starts at 1 and increments
/// where a temporal connective links two verbs; unlinked clauses share the
/// previous clause's state.
pub fn segment_states(lf: &LinguisticFactSet) -> BTreeMap<String, u32> {
    let atoms = resolve_referents(&lf.atoms);
    segment_resolved(&atoms)
}

fn segment_resolved(atoms: &[Atom]) -> BTreeMap<String, u32> {
    let verbs = verbs_in_order(atoms);
    let verb_set: BTreeSet<&str> = verbs.iter().map(String::as_str).collect();

    // Temporal links introduced by a connective between two verbs.
    let mut links: Vec<(String, String)> = Vec::new();
    for atom in atoms {
        if let Some(("compl_v", args)) = static_args(atom) {
            if let (Some(conn), Some(v1), Some(v2)) =
                (constant(args[0]), constant(args[1]), constant(args[2]))
            {
                if TEMPORAL_CONNECTIVES.contains(&conn)
                    && verb_set.contains(v1)
                    && verb_set.contains(v2)
                {
                    links.push((v1.to_string(), v2.to_string()));
                }
            }
        }
    }

    let mut states: BTreeMap<String, u32> = BTreeMap::new();
    let mut previous: Option<u32> = None;
    for verb in &verbs {
        let linked_from = links
            .iter()
            .filter(|(from, to)| to == verb && states.contains_key(from))
            .map(|(from, _)| states[from])
            .max();
        let state = match (linked_from, previous) {
            (Some(base), _) => base + 1,
            (None, Some(prev)) => prev,
            (None, None) => 1,
        };
        states.insert(verb.clone(), state);
        previous = Some(state);
    }
    states
}

/// The verb lexemes the mapping KB knows: constants in verb slots of its
/// rule bodies.
pub fn known_verbs(linguistic_kb: &Program) -> BTreeSet<String> {
    let mut verbs = BTreeSet::new();
    for rule in &linguistic_kb.rules {
        for b in &rule.body {
            if let Some((pred, args)) = static_args(&b.literal.atom) {
                let slot = match pred {
                    "subject" | "object" | "qualif_v" => 0,
                    "compl_v" => 1,
                    _ => continue,
                };
                if let Some(verb) = constant(args[slot]) {
                    verbs.insert(verb.to_string());
                }
            }
        }
    }
    verbs
}

/// The outcome of the linguistic stage: the semantic facts plus warnings
/// (e.g. unmapped verb lexemes, which are skipped).
#[derive(Clone, Debug, Default)]
pub struct Mapped {
    pub facts: Vec<Literal>,
    pub warnings: Vec<String>,
}

/// Runs the linguistic rule set over a fixture's relations: referent
/// resolution, state segmentation (emitting `verb_state` facts), then a
/// stratified run of the mapping KB; the modal literals of the result are
/// the semantic facts.
pub fn map_linguistic(
    lf: &LinguisticFactSet,
    linguistic_kb: &Program,
    instance_cap: usize,
) -> Result<Mapped, MapError> {
    if lf.is_empty() {
        return Ok(Mapped::default());
    }

    let atoms = resolve_referents(&lf.atoms);
    let states = segment_resolved(&atoms);

    let mut warnings = Vec::new();

    // A vehicle noun named twice is ambiguous; the last naming wins. Use
    // distinct noun lexemes (vehicule, voiture, camion) per vehicle.
    let mut namings: BTreeMap<&str, BTreeSet<&str>> = BTreeMap::new();
    for atom in &lf.atoms {
        if let Some(("qualif_n", args)) = static_args(atom) {
            if let (Some(noun), Some(name)) = (constant(args[0]), constant(args[1])) {
                if VEHICLE_NOUNS.contains(&noun) {
                    namings.entry(noun).or_default().insert(name);
                }
            }
        }
    }
    for (noun, names) in namings {
        if names.len() > 1 {
            let names: Vec<&str> = names.into_iter().collect();
            warnings.push(format!(
                "vehicle noun `{noun}` is named more than once ({}); the last naming wins",
                names.join(", ")
            ));
        }
    }

    let known = known_verbs(linguistic_kb);
    for verb in states.keys() {
        if !known.contains(verb) {
            warnings.push(format!("unmapped verb lexeme `{verb}` (skipped)"));
        }
    }

    let mut program = linguistic_kb.clone();
    for atom in &atoms {
        program.static_facts.push(Literal::positive(atom.clone()));
    }
    for (verb, state) in &states {
        program.static_facts.push(Literal::positive(Atom::stat(
            "verb_state",
            alloc::vec![
                Arg::Term(Term::Constant(verb.clone())),
                Arg::Term(Term::State(*state)),
            ],
        )));
    }
    program.facts.extend(lf.passthrough.iter().cloned());
    program.canonicalize();

    let strata = stratify(&program).map_err(MapError::Stratification)?;
    let ground = ground(&program, Some(&strata), instance_cap).map_err(MapError::Ground)?;
    let (db, _) = run_stratified(&ground).map_err(MapError::Engine)?;

    let facts: Vec<Literal> = db
        .iter()
        .filter(|l| matches!(l.atom, Atom::Modal { .. }))
        .cloned()
        .collect();
    Ok(Mapped { facts, warnings })
}
