//! Stratification: the modality layers, the dependency graph over predicate
//! keys, sub-layer assignment and the constraint checks that make default
//! evaluation retraction-free.

use alloc::collections::{BTreeMap, BTreeSet};
use alloc::format;
use alloc::string::String;
use alloc::vec::Vec;

use crate::program::{DeclKind, Program, Rule};
use crate::term::{Atom, Literal, Modality, Property};

/// The modality dimension of a predicate key. The order is the layer order:
/// given statics evaluate first, anomalies last.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum KeyModality {
    Static,
    Holds,
    Must,
    AbleTo,
    Anomaly,
}

impl KeyModality {
    /// The layer number: 0 for given statics, then the four modality layers.
    pub fn layer(&self) -> u8 {
        match self {
            KeyModality::Static => 0,
            KeyModality::Holds => 1,
            KeyModality::Must => 2,
            KeyModality::AbleTo => 3,
            KeyModality::Anomaly => 4,
        }
    }
}

/// The name dimension: the outer atomic property (or static predicate) name,
/// or the per-modality wildcard for atoms whose property is a variable.
#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum KeyName {
    Named(String),
    AnyProperty,
}

/// Every literal in a program maps to exactly one key.
#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct PredicateKey {
    pub modality: KeyModality,
    pub name: KeyName,
}

impl PredicateKey {
    pub fn named(modality: KeyModality, name: impl Into<String>) -> Self {
        PredicateKey {
            modality,
            name: KeyName::Named(name.into()),
        }
    }

    pub fn display(&self) -> String {
        let name = match &self.name {
            KeyName::Named(n) => n.clone(),
            KeyName::AnyProperty => "*".into(),
        };
        match self.modality {
            KeyModality::Holds | KeyModality::Static | KeyModality::Anomaly => name,
            KeyModality::Must => format!("must({name})"),
            KeyModality::AbleTo => {
                if name == "available" {
                    name
                } else {
                    format!("able_to({name})")
                }
            }
        }
    }
}

/// Maps an atom to its key.
pub fn key_of(atom: &Atom) -> PredicateKey {
    match atom {
        Atom::Modal {
            modality, property, ..
        } => {
            let modality = match modality {
                Modality::Holds => KeyModality::Holds,
                Modality::Must => KeyModality::Must,
                Modality::AbleTo => KeyModality::AbleTo,
            };
            let name = match property_base(property) {
                Some(n) => KeyName::Named(n.into()),
                None => KeyName::AnyProperty,
            };
            PredicateKey { modality, name }
        }
        Atom::Static { predicate, .. } => match predicate.as_str() {
            "an" | "dan" => PredicateKey::named(KeyModality::Anomaly, predicate.clone()),
            // Available is derivable; it evaluates in the capacity layer.
            "available" => PredicateKey::named(KeyModality::AbleTo, "available"),
            _ => PredicateKey::named(KeyModality::Static, predicate.clone()),
        },
    }
}

fn property_base(p: &Property) -> Option<&str> {
    p.base_name()
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord)]
pub enum EdgeKind {
    /// Positive body dependency: the source must not evaluate later.
    Weak,
    /// Constraint, NAF or negated-body dependency: the source must be final
    /// strictly before the target's stratum.
    Strict,
}

/// The predicate dependency graph of a program. Node order is first
/// appearance in the file (declarations, then facts, then rules), which
/// breaks sub-layer ties deterministically.
#[derive(Clone, Debug, Default)]
pub struct DependencyGraph {
    nodes: Vec<PredicateKey>,
    index: BTreeMap<PredicateKey, usize>,
    /// (from, to) -> (kind, contributing rule labels); strict wins on merge.
    edges: BTreeMap<(usize, usize), (EdgeKind, BTreeSet<String>)>,
}

impl DependencyGraph {
    fn intern(&mut self, key: PredicateKey) -> usize {
        if let Some(&i) = self.index.get(&key) {
            return i;
        }
        let i = self.nodes.len();
        self.nodes.push(key.clone());
        self.index.insert(key, i);
        i
    }

    fn add_edge(&mut self, from: usize, to: usize, kind: EdgeKind, label: &str) {
        let entry = self
            .edges
            .entry((from, to))
            .or_insert((kind, BTreeSet::new()));
        if kind == EdgeKind::Strict {
            entry.0 = EdgeKind::Strict;
        }
        entry.1.insert(label.into());
    }

    pub fn nodes(&self) -> &[PredicateKey] {
        &self.nodes
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn edge_kind(&self, from: &PredicateKey, to: &PredicateKey) -> Option<EdgeKind> {
        let f = *self.index.get(from)?;
        let t = *self.index.get(to)?;
        self.edges.get(&(f, t)).map(|(k, _)| *k)
    }

    /// All keys of a modality that are named (used to expand wildcard keys).
    fn named_of(&self, modality: KeyModality) -> Vec<usize> {
        self.nodes
            .iter()
            .enumerate()
            .filter(|(_, k)| k.modality == modality && matches!(k.name, KeyName::Named(_)))
            .map(|(i, _)| i)
            .collect()
    }
}

/// Builds the dependency graph: one edge body→head per rule dependency,
/// weak for positive body atoms, strict for constraints, NAF and negated
/// body atoms. Self-edges (persistence rules) are allowed.
pub fn dependency_graph(program: &Program) -> DependencyGraph {
    let mut g = DependencyGraph::default();

    for decl in &program.declarations {
        match &decl.kind {
            DeclKind::Prop { name, .. } => {
                g.intern(PredicateKey::named(KeyModality::Holds, name.clone()));
            }
            DeclKind::Static { name, .. } => {
                g.intern(PredicateKey::named(KeyModality::Static, name.clone()));
            }
        }
    }
    for fact in program.facts.iter().chain(program.static_facts.iter()) {
        g.intern(key_of(&fact.atom));
    }

    // Intern rule keys in file order first so appearance order is stable,
    // then add edges (wildcard expansion needs the full node set).
    for rule in &program.rules {
        for b in &rule.body {
            g.intern(key_of(&b.literal.atom));
        }
        if let Some(c) = &rule.constraint {
            g.intern(key_of(&c.atom));
        }
        g.intern(key_of(&rule.head.atom));
    }

    for rule in &program.rules {
        let head_key = key_of(&rule.head.atom);
        let heads = expand(&mut g, &head_key);
        let mut deps: Vec<(PredicateKey, EdgeKind)> = Vec::new();
        for b in &rule.body {
            let kind = if b.naf || !b.literal.is_positive() {
                EdgeKind::Strict
            } else {
                EdgeKind::Weak
            };
            deps.push((key_of(&b.literal.atom), kind));
        }
        if let Some(c) = &rule.constraint {
            deps.push((key_of(&c.atom), EdgeKind::Strict));
        }
        for (dep, kind) in deps {
            for from in expand(&mut g, &dep) {
                for &to in &heads {
                    g.add_edge(from, to, kind, &rule.label);
                }
            }
        }
    }
    g
}

/// A wildcard key stands for every named key of its modality plus itself.
fn expand(g: &mut DependencyGraph, key: &PredicateKey) -> Vec<usize> {
    match &key.name {
        KeyName::Named(_) => alloc::vec![g.intern(key.clone())],
        KeyName::AnyProperty => {
            let mut out = g.named_of(key.modality);
            out.push(g.intern(key.clone()));
            out
        }
    }
}

/// Why a program cannot be stratified, or why a rule violates the layer
/// conditions.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ViolatedCondition {
    BodyAfterHead,
    ConstraintNotEarlier,
    CyclicStrictDependency,
}

impl ViolatedCondition {
    pub fn name(&self) -> &'static str {
        match self {
            ViolatedCondition::BodyAfterHead => "body-after-head",
            ViolatedCondition::ConstraintNotEarlier => "constraint-not-earlier",
            ViolatedCondition::CyclicStrictDependency => "cyclic-strict-dependency",
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct StratificationDiagnostic {
    pub condition: ViolatedCondition,
    /// The rules involved; never empty.
    pub rules: Vec<String>,
    pub explanation: String,
}

impl core::fmt::Display for StratificationDiagnostic {
    fn fmt(&self, f: &mut core::fmt::Formatter<'_>) -> core::fmt::Result {
        write!(
            f,
            "{} (rules {}): {}",
            self.condition.name(),
            self.rules.join(", "),
            self.explanation
        )
    }
}

/// One evaluation stratum: the keys sharing a (layer, sub-layer) slot.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Stratum {
    pub layer: u8,
    pub sublayer: u32,
    pub keys: Vec<PredicateKey>,
}

/// The computed layer/sub-layer assignment with its total evaluation order.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct StratumAssignment {
    assignment: BTreeMap<PredicateKey, (u8, u32)>,
    strata: Vec<Stratum>,
}

impl StratumAssignment {
    pub fn stratum_of(&self, key: &PredicateKey) -> Option<(u8, u32)> {
        self.assignment.get(key).copied()
    }

    /// Rank of the key's stratum in the total evaluation order.
    pub fn position(&self, key: &PredicateKey) -> Option<usize> {
        let slot = self.stratum_of(key)?;
        self.strata
            .iter()
            .position(|s| (s.layer, s.sublayer) == slot)
    }

    /// Strata in evaluation order.
    pub fn strata(&self) -> &[Stratum] {
        &self.strata
    }

    pub fn layer_of(&self, key: &PredicateKey) -> Option<u8> {
        self.stratum_of(key).map(|(l, _)| l)
    }
}

/// Condenses strongly connected components within each modality layer and
/// orders them topologically; fails iff a strict edge lies inside a
/// component (firing would require retraction).
pub fn compute_strata(
    graph: &DependencyGraph,
) -> Result<StratumAssignment, Vec<StratificationDiagnostic>> {
    let n = graph.nodes.len();
    let mut diags = Vec::new();
    let mut assignment = BTreeMap::new();
    let mut strata = Vec::new();

    for layer in 0u8..=4 {
        let members: Vec<usize> = (0..n)
            .filter(|&i| graph.nodes[i].modality.layer() == layer)
            .collect();
        if members.is_empty() {
            continue;
        }
        let local: BTreeMap<usize, usize> = members
            .iter()
            .enumerate()
            .map(|(li, &gi)| (gi, li))
            .collect();
        let m = members.len();

        // Reachability closure over the layer-internal subgraph.
        let mut reach = alloc::vec![alloc::vec![false; m]; m];
        for &(f, t) in graph.edges.keys() {
            if let (Some(&lf), Some(&lt)) = (local.get(&f), local.get(&t)) {
                reach[lf][lt] = true;
            }
        }
        for k in 0..m {
            for i in 0..m {
                if reach[i][k] {
                    #[allow(clippy::needless_range_loop)]
                    for j in 0..m {
                        reach[i][j] = reach[i][j] || reach[k][j];
                    }
                }
            }
        }

        // Components: mutual reachability.
        let mut comp_of = alloc::vec![usize::MAX; m];
        let mut comps: Vec<Vec<usize>> = Vec::new();
        for i in 0..m {
            if comp_of[i] != usize::MAX {
                continue;
            }
            let id = comps.len();
            let mut comp = alloc::vec![i];
            comp_of[i] = id;
            for j in (i + 1)..m {
                if comp_of[j] == usize::MAX && reach[i][j] && reach[j][i] {
                    comp_of[j] = id;
                    comp.push(j);
                }
            }
            comps.push(comp);
        }

        // A strict edge inside a component means no evaluation order can
        // avoid retracting a fired conclusion.
        for (&(f, t), (kind, labels)) in graph.edges.iter() {
            if *kind != EdgeKind::Strict {
                continue;
            }
            if let (Some(&lf), Some(&lt)) = (local.get(&f), local.get(&t)) {
                if comp_of[lf] == comp_of[lt] {
                    let comp_keys: Vec<String> = comps[comp_of[lf]]
                        .iter()
                        .map(|&li| graph.nodes[members[li]].display())
                        .collect();
                    diags.push(StratificationDiagnostic {
                        condition: ViolatedCondition::CyclicStrictDependency,
                        rules: labels.iter().cloned().collect(),
                        explanation: format!(
                            "{} must be final strictly before {}, but they are mutually \
                             dependent (component: {})",
                            graph.nodes[f].display(),
                            graph.nodes[t].display(),
                            comp_keys.join(", ")
                        ),
                    });
                }
            }
        }
        if !diags.is_empty() {
            continue;
        }

        // Kahn over the condensation, ready components popped by first
        // appearance so the shipped KB reproduces its authored enumeration.
        let c = comps.len();
        let mut indeg = alloc::vec![0usize; c];
        let mut succs: Vec<BTreeSet<usize>> = alloc::vec![BTreeSet::new(); c];
        for &(f, t) in graph.edges.keys() {
            if let (Some(&lf), Some(&lt)) = (local.get(&f), local.get(&t)) {
                let (cf, ct) = (comp_of[lf], comp_of[lt]);
                if cf != ct && succs[cf].insert(ct) {
                    indeg[ct] += 1;
                }
            }
        }
        let appearance = |cid: usize| -> usize {
            comps[cid]
                .iter()
                .map(|&li| members[li])
                .min()
                .unwrap_or(usize::MAX)
        };
        let mut ready: BTreeSet<(usize, usize)> = (0..c)
            .filter(|&cid| indeg[cid] == 0)
            .map(|cid| (appearance(cid), cid))
            .collect();
        let mut sublayer = 0u32;
        while let Some(&(app, cid)) = ready.iter().next() {
            ready.remove(&(app, cid));
            sublayer += 1;
            let mut keys: Vec<PredicateKey> = Vec::new();
            let mut ordered = comps[cid].clone();
            ordered.sort_by_key(|&li| members[li]);
            for &li in &ordered {
                let key = graph.nodes[members[li]].clone();
                assignment.insert(key.clone(), (layer, sublayer));
                keys.push(key);
            }
            strata.push(Stratum {
                layer,
                sublayer,
                keys,
            });
            for &succ in &succs[cid] {
                indeg[succ] -= 1;
                if indeg[succ] == 0 {
                    ready.insert((appearance(succ), succ));
                }
            }
        }
    }

    if diags.is_empty() {
        Ok(StratumAssignment { assignment, strata })
    } else {
        Err(diags)
    }
}

/// Checks the per-rule layer conditions against a computed assignment: every
/// body key's position must not exceed the head's, and constraint and NAF
/// keys must sit strictly earlier. Returns the (possibly empty) violations.
pub fn check_constraints(
    program: &Program,
    assignment: &StratumAssignment,
) -> Vec<StratificationDiagnostic> {
    let mut diags = Vec::new();
    for rule in &program.rules {
        let head_key = key_of(&rule.head.atom);
        let Some(h) = assignment.position(&head_key) else {
            continue;
        };
        for b in &rule.body {
            let key = key_of(&b.literal.atom);
            let Some(p) = assignment.position(&key) else {
                continue;
            };
            if b.naf {
                if p >= h {
                    diags.push(strict_violation(
                        rule,
                        &key,
                        &head_key,
                        "negation-as-failure",
                    ));
                }
            } else if p > h {
                diags.push(StratificationDiagnostic {
                    condition: ViolatedCondition::BodyAfterHead,
                    rules: alloc::vec![rule.label.clone()],
                    explanation: format!(
                        "body predicate {} evaluates after head predicate {}",
                        key.display(),
                        head_key.display()
                    ),
                });
            }
        }
        if let Some(c) = &rule.constraint {
            let key = key_of(&c.atom);
            if let Some(p) = assignment.position(&key) {
                if p >= h {
                    diags.push(strict_violation(rule, &key, &head_key, "constraint"));
                }
            }
        }
    }
    diags
}

fn strict_violation(
    rule: &Rule,
    key: &PredicateKey,
    head: &PredicateKey,
    what: &str,
) -> StratificationDiagnostic {
    StratificationDiagnostic {
        condition: ViolatedCondition::ConstraintNotEarlier,
        rules: alloc::vec![rule.label.clone()],
        explanation: format!(
            "{what} predicate {} must be final strictly before head predicate {}",
            key.display(),
            head.display()
        ),
    }
}

/// Convenience: graph, strata and constraint check in one call.
pub fn stratify(program: &Program) -> Result<StratumAssignment, Vec<StratificationDiagnostic>> {
    let graph = dependency_graph(program);
    let assignment = compute_strata(&graph)?;
    let diags = check_constraints(program, &assignment);
    if diags.is_empty() {
        Ok(assignment)
    } else {
        Err(diags)
    }
}

/// Positions of a literal pattern's key, used by tests and the CLI listing.
pub fn key_of_literal(lit: &Literal) -> PredicateKey {
    key_of(&lit.atom)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::parser::parse_program;

    #[test]
    fn bump_rule_gives_a_weak_edge() {
        let p = parse_program(
            "prop stop/0. prop bump/1.\n\
             holds(combine(bump, V), W, T) => -holds(stop, W, T).",
        )
        .unwrap();
        let g = dependency_graph(&p);
        assert_eq!(
            g.edge_kind(
                &PredicateKey::named(KeyModality::Holds, "bump"),
                &PredicateKey::named(KeyModality::Holds, "stop"),
            ),
            Some(EdgeKind::Weak)
        );
    }

    #[test]
    fn shock_rule_gives_strict_constraint_edge_and_weak_body_edges() {
        let p = parse_program(
            "prop shock/1. prop shock_pos/1. prop follow/1. prop control/0.\n\
             holds(combine(shock,V),W,T), holds(combine(shock_pos,V),back,T) \
             : holds(combine(follow,W),V,T) [holds(control,V,T-1)].",
        )
        .unwrap();
        let g = dependency_graph(&p);
        let follow = PredicateKey::named(KeyModality::Holds, "follow");
        assert_eq!(
            g.edge_kind(&PredicateKey::named(KeyModality::Holds, "control"), &follow),
            Some(EdgeKind::Strict)
        );
        assert_eq!(
            g.edge_kind(&PredicateKey::named(KeyModality::Holds, "shock"), &follow),
            Some(EdgeKind::Weak)
        );
        assert_eq!(
            g.edge_kind(
                &PredicateKey::named(KeyModality::Holds, "shock_pos"),
                &follow
            ),
            Some(EdgeKind::Weak)
        );
    }

    #[test]
    fn empty_program_gives_an_empty_graph() {
        let p = parse_program("").unwrap();
        assert!(dependency_graph(&p).is_empty());
    }

    #[test]
    fn one_rule_one_fact_orders_as_a_path() {
        let p = parse_program(
            "prop a/0. prop b/0.\nholds(a, x, 1).\nholds(a, V, T) => holds(b, V, T).",
        )
        .unwrap();
        let s = stratify(&p).unwrap();
        let pa = s
            .position(&PredicateKey::named(KeyModality::Holds, "a"))
            .unwrap();
        let pb = s
            .position(&PredicateKey::named(KeyModality::Holds, "b"))
            .unwrap();
        assert!(pa < pb);
    }

    #[test]
    fn strict_cycle_is_rejected() {
        // a : b [c].  and  b => c.  — c must precede b but depends on b.
        let p = parse_program(
            "prop a/0. prop b/0. prop c/0.\n\
             holds(a, x, 1).\n\
             @d1 holds(a, V, T) : holds(b, V, T) [holds(c, V, T)].\n\
             @d2 holds(b, V, T) => holds(c, V, T).",
        )
        .unwrap();
        let g = dependency_graph(&p);
        let diags = compute_strata(&g).unwrap_err();
        assert_eq!(
            diags[0].condition,
            ViolatedCondition::CyclicStrictDependency
        );
        assert!(!diags[0].rules.is_empty());
    }

    #[test]
    fn modality_order_is_fixed() {
        // A rule with a Must body and a Holds head violates body<=head.
        let p = parse_program(
            "prop stop/0. prop bump/1.\n\
             must(stop, V, T) => holds(combine(bump, V), V, T).",
        )
        .unwrap();
        let g = dependency_graph(&p);
        let s = compute_strata(&g).unwrap();
        let diags = check_constraints(&p, &s);
        assert_eq!(diags.len(), 1);
        assert_eq!(diags[0].condition, ViolatedCondition::BodyAfterHead);
    }

    #[test]
    fn persistence_self_edges_are_weak_and_allowed() {
        let p = parse_program("prop stop/0.\nholds(stop, V, T) : holds(stop, V, T-1).").unwrap();
        assert!(stratify(&p).is_ok());
    }

    #[test]
    fn strata_are_deterministic() {
        let text = "prop a/0. prop b/0. prop c/0.\n\
                    holds(a, x, 1).\n\
                    holds(a, V, T) => holds(b, V, T).\n\
                    holds(b, V, T) : holds(c, V, T).";
        let p = parse_program(text).unwrap();
        let s1 = stratify(&p).unwrap();
        let s2 = stratify(&parse_program(text).unwrap()).unwrap();
        assert_eq!(s1, s2);
    }
}
