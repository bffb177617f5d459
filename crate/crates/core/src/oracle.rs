//! Brute-force Reiter-extension oracle for desk-scale ground theories.
//!
//! Candidate extensions are the forward-chaining closures of the facts plus
//! the conclusions of each subset of defaults; each candidate is kept iff it
//! passes the fixed-point characterization. Deliberately independent of the
//! stratified evaluator it verifies.

use alloc::collections::BTreeSet;
use alloc::vec::Vec;
use core::fmt;

use crate::engine::Database;
use crate::ground::{GroundProgram, GroundRule};
use crate::term::{complement, Literal};

/// Default enumeration limits; the oracle is for desk-scale verification
/// only.
pub const MAX_ORACLE_DEFAULTS: usize = 12;
pub const MAX_ORACLE_ATOMS: usize = 64;

/// Enumeration limits for one oracle invocation.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct OracleLimits {
    pub max_defaults: usize,
    pub max_atoms: usize,
}

impl Default for OracleLimits {
    fn default() -> Self {
        OracleLimits {
            max_defaults: MAX_ORACLE_DEFAULTS,
            max_atoms: MAX_ORACLE_ATOMS,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum OracleError {
    TooManyDefaults {
        count: usize,
        limit: usize,
    },
    TooManyAtoms {
        count: usize,
        limit: usize,
    },
    /// Negation-as-failure has no Reiter reading; NAF rules must be
    /// restricted away first.
    NafUnsupported,
    /// The facts (with implications) are already contradictory.
    InconsistentFacts,
}

impl fmt::Display for OracleError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            OracleError::TooManyDefaults { count, limit } => {
                write!(
                    f,
                    "theory has {count} defaults; the oracle limit is {limit}"
                )
            }
            OracleError::TooManyAtoms { count, limit } => {
                write!(
                    f,
                    "theory mentions {count} atoms; the oracle limit is {limit}"
                )
            }
            OracleError::NafUnsupported => {
                write!(f, "the oracle does not support negation-as-failure rules")
            }
            OracleError::InconsistentFacts => {
                write!(f, "facts and implications are contradictory")
            }
        }
    }
}

/// All distinct Reiter extensions of a ground theory.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct ExtensionSet {
    extensions: Vec<BTreeSet<Literal>>,
}

impl ExtensionSet {
    pub fn len(&self) -> usize {
        self.extensions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.extensions.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = &BTreeSet<Literal>> {
        self.extensions.iter()
    }

    pub fn contains(&self, db: &Database) -> bool {
        self.extensions.iter().any(|e| e == db.literals())
    }
}

fn literal_set_consistent(set: &BTreeSet<Literal>) -> bool {
    set.iter().all(|l| !set.contains(&complement(l)))
}

/// Forward-chaining closure of a literal set under ground implications.
/// Returns None if the closure is contradictory.
fn close(mut set: BTreeSet<Literal>, implications: &[&GroundRule]) -> Option<BTreeSet<Literal>> {
    if !literal_set_consistent(&set) {
        return None;
    }
    loop {
        let mut changed = false;
        for rule in implications {
            if set.contains(&rule.head) {
                continue;
            }
            if rule.body.iter().all(|(lit, _)| set.contains(lit)) {
                if set.contains(&complement(&rule.head)) {
                    return None;
                }
                set.insert(rule.head.clone());
                changed = true;
            }
        }
        if !changed {
            return Some(set);
        }
    }
}

fn justifications_consistent(rule: &GroundRule, against: &BTreeSet<Literal>) -> bool {
    // Normal default A : B — justification B; semi-normal A : B [C] —
    // justification B and C.
    if against.contains(&complement(&rule.head)) {
        return false;
    }
    if let Some(c) = &rule.constraint {
        if against.contains(&complement(c)) {
            return false;
        }
    }
    true
}

type TheoryParts<'g> = (BTreeSet<Literal>, Vec<&'g GroundRule>, Vec<&'g GroundRule>);

fn theory_parts(g: &GroundProgram, limits: OracleLimits) -> Result<TheoryParts<'_>, OracleError> {
    if g.rules.iter().any(|r| r.body.iter().any(|(_, naf)| *naf)) {
        return Err(OracleError::NafUnsupported);
    }
    let facts: BTreeSet<Literal> = g
        .static_facts
        .iter()
        .chain(g.facts.iter())
        .cloned()
        .collect();
    let implications: Vec<&GroundRule> = g.implications().collect();
    let defaults: Vec<&GroundRule> = g.defaults().collect();
    if defaults.len() > limits.max_defaults {
        return Err(OracleError::TooManyDefaults {
            count: defaults.len(),
            limit: limits.max_defaults,
        });
    }
    let mut atoms = BTreeSet::new();
    for lit in facts.iter() {
        atoms.insert(&lit.atom);
    }
    for rule in &g.rules {
        for (lit, _) in &rule.body {
            atoms.insert(&lit.atom);
        }
        atoms.insert(&rule.head.atom);
        if let Some(c) = &rule.constraint {
            atoms.insert(&c.atom);
        }
    }
    if atoms.len() > limits.max_atoms {
        return Err(OracleError::TooManyAtoms {
            count: atoms.len(),
            limit: limits.max_atoms,
        });
    }
    Ok((facts, implications, defaults))
}

/// The Reiter operator: the least set closed under facts, implications and
/// every default whose prerequisite is reached and whose justifications are
/// consistent with `against`. Returns None on contradiction.
fn gamma(
    facts: &BTreeSet<Literal>,
    implications: &[&GroundRule],
    defaults: &[&GroundRule],
    against: &BTreeSet<Literal>,
) -> Option<BTreeSet<Literal>> {
    let mut set = close(facts.clone(), implications)?;
    loop {
        let mut changed = false;
        for rule in defaults {
            if set.contains(&rule.head) {
                continue;
            }
            if rule.body.iter().all(|(lit, _)| set.contains(lit))
                && justifications_consistent(rule, against)
            {
                if set.contains(&complement(&rule.head)) {
                    return None;
                }
                set.insert(rule.head.clone());
                set = close(set, implications)?;
                changed = true;
            }
        }
        if !changed {
            return Some(set);
        }
    }
}

/// Enumerates every Reiter extension of the ground theory, under the
/// default limits.
pub fn reiter_extensions(g: &GroundProgram) -> Result<ExtensionSet, OracleError> {
    reiter_extensions_with_limits(g, OracleLimits::default())
}

/// Enumerates every Reiter extension of the ground theory.
pub fn reiter_extensions_with_limits(
    g: &GroundProgram,
    limits: OracleLimits,
) -> Result<ExtensionSet, OracleError> {
    let (facts, implications, defaults) = theory_parts(g, limits)?;
    if close(facts.clone(), &implications).is_none() {
        return Err(OracleError::InconsistentFacts);
    }

    let mut found: BTreeSet<BTreeSet<Literal>> = BTreeSet::new();
    let n = defaults.len().min(63);
    for mask in 0u64..(1u64 << n) {
        let mut candidate = facts.clone();
        for (i, rule) in defaults.iter().enumerate() {
            if mask & (1 << i) != 0 {
                candidate.insert(rule.head.clone());
            }
        }
        let Some(candidate) = close(candidate, &implications) else {
            continue;
        };
        if let Some(fixed) = gamma(&facts, &implications, &defaults, &candidate) {
            if fixed == candidate {
                found.insert(candidate);
            }
        }
    }
    Ok(ExtensionSet {
        extensions: found.into_iter().collect(),
    })
}

/// Fixed-point test: true iff `db` equals the least set closed under the
/// facts, the implications, and every default applicable with respect to
/// `db` itself.
pub fn check_extension(db: &Database, g: &GroundProgram) -> Result<bool, OracleError> {
    check_extension_with_limits(db, g, OracleLimits::default())
}

/// Fixed-point test under explicit limits.
pub fn check_extension_with_limits(
    db: &Database,
    g: &GroundProgram,
    limits: OracleLimits,
) -> Result<bool, OracleError> {
    let (facts, implications, defaults) = theory_parts(g, limits)?;
    if !literal_set_consistent(db.literals()) {
        return Ok(false);
    }
    match gamma(&facts, &implications, &defaults, db.literals()) {
        Some(fixed) => Ok(&fixed == db.literals()),
        None => Ok(false),
    }
}

/// Restricts a ground program to the oracle-checkable part relative to a
/// finished run: only instances whose bodies the database satisfies are
/// kept (non-applicable instances never generate and cannot change
/// membership), and the NAF guards that held are dropped from the kept
/// bodies, leaving a classical theory.
pub fn restrict_for_oracle(g: &GroundProgram, db: &Database) -> GroundProgram {
    let rules: Vec<GroundRule> = g
        .rules
        .iter()
        .filter_map(|r| {
            let mut body = Vec::with_capacity(r.body.len());
            for (lit, naf) in &r.body {
                if *naf {
                    if db.contains(lit) {
                        return None;
                    }
                } else {
                    if !db.contains(lit) {
                        return None;
                    }
                    body.push((lit.clone(), false));
                }
            }
            Some(GroundRule { body, ..r.clone() })
        })
        .collect();
    GroundProgram {
        facts: g.facts.clone(),
        static_facts: g.static_facts.clone(),
        rules,
        t_max: g.t_max,
        constants: g.constants.clone(),
        properties: g.properties.clone(),
    }
}
