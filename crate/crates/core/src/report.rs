//! Anomaly selection and the cause report: primary/derived anomalies,
//! rendered sentences, and the exported trace.

use alloc::collections::BTreeSet;
use alloc::format;
use alloc::string::{String, ToString};
use alloc::vec::Vec;

use serde::Serialize;

use crate::engine::{Database, Trace, TraceNode};
use crate::mapping::NARRATOR;
use crate::term::{Arg, Atom, Literal, Modality, Property, Term};

/// How the primary anomaly is chosen; printed in every report header.
pub const SELECTION_RULE: &str = "minimal state, then agent, then property";

/// One anomaly, primary or derived.
#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct AnomalyEntry {
    pub schema: String,
    pub agent: String,
    pub agent_display: String,
    pub state: u32,
    pub property: String,
    pub incompatible_observation: Option<String>,
    pub sentence: String,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct TraceNodeExport {
    pub id: usize,
    pub literal: String,
    pub origin: String,
    pub rule: Option<String>,
    pub premises: Vec<usize>,
    pub checked_absent: Vec<String>,
    pub stratum: Option<String>,
    pub step: usize,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct TraceExport {
    pub nodes: Vec<TraceNodeExport>,
}

/// The rendered run outcome. `schema_version` is 1.
#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct AnomalyReport {
    pub schema_version: u32,
    pub selection_rule: String,
    pub cause_sentence: String,
    pub primary: Option<AnomalyEntry>,
    pub derived: Vec<AnomalyEntry>,
    pub facts: Vec<String>,
    pub derived_facts: Vec<String>,
    pub warnings: Vec<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub trace: Option<TraceExport>,
}

/// Renders an agent symbol for sentences: the narrator constant prints as
/// `B`, other symbols with a leading capital.
pub fn agent_display(agent: &str) -> String {
    if agent == NARRATOR {
        "B".to_string()
    } else {
        crate::term::display_var(agent)
    }
}

fn property_phrase(property: &Property) -> String {
    match property {
        Property::Atomic(name) => name.replace('_', " "),
        other => other.to_string(),
    }
}

/// The (agent, state, violated property) carried by an `an` or `dan` atom.
fn anomaly_parts(lit: &Literal) -> Option<(&str, String, u32, Property)> {
    let Atom::Static { predicate, args } = &lit.atom else {
        return None;
    };
    if predicate != "an" && predicate != "dan" {
        return None;
    }
    let [Arg::Term(Term::Constant(agent)), Arg::Term(Term::State(state)), Arg::Property(prop)] =
        args.as_slice()
    else {
        return None;
    };
    Some((predicate.as_str(), agent.clone(), *state, prop.clone()))
}

fn disruptive_factor_of(property: &Property) -> Option<&Term> {
    match property {
        Property::Combine(base, arg) if matches!(&**base, Property::Atomic(n) if n == crate::validate::KERNEL_COMBINE) => {
            Some(arg)
        }
        _ => None,
    }
}

fn sentence_for(kind: &str, agent: &str, property: &Property) -> String {
    let display = agent_display(agent);
    if let Some(factor) = disruptive_factor_of(property) {
        return format!("a disruptive factor ({factor}) affected {display}");
    }
    let phrase = property_phrase(property);
    match kind {
        "an" => format!("{display} did not {phrase} in a situation in which it had to"),
        _ => format!("{display} could not {phrase} as a consequence"),
    }
}

fn schema_for(kind: &str, property: &Property, rule: Option<&str>) -> String {
    match (kind, rule) {
        ("an", Some("an_form1")) => "primary_form_1".into(),
        ("an", Some("an_form2")) => "primary_form_2".into(),
        ("dan", Some("dan")) => "derived".into(),
        ("an", _) if disruptive_factor_of(property).is_some() => "primary_form_2".into(),
        ("an", _) => "primary_form_1".into(),
        _ => "derived".into(),
    }
}

/// The observation that clashed with the duty: among the anomaly node's
/// premises, the positive factual literal at the following state.
fn observation_of(node: &TraceNode, state: u32, trace: &Trace) -> Option<String> {
    node.premises.iter().find_map(|&id| {
        let premise = &trace.nodes()[id];
        match &premise.literal.atom {
            Atom::Modal {
                modality: Modality::Holds,
                state: Term::State(s),
                ..
            } if premise.literal.is_positive() && *s == state + 1 => {
                Some(premise.literal.to_string())
            }
            _ => None,
        }
    })
}

fn entry_for(lit: &Literal, trace: &Trace) -> Option<AnomalyEntry> {
    let (kind, agent, state, property) = anomaly_parts(lit)?;
    let node = trace.node_of(lit);
    let rule = node.and_then(|n| n.rule.as_deref());
    let incompatible_observation = match disruptive_factor_of(&property) {
        Some(_) => None,
        None => node.and_then(|n| observation_of(n, state, trace)),
    };
    Some(AnomalyEntry {
        schema: schema_for(kind, &property, rule),
        agent_display: agent_display(&agent),
        sentence: sentence_for(kind, &agent, &property),
        agent,
        state,
        property: property.to_string(),
        incompatible_observation,
    })
}

fn anomaly_sort_key(lit: &Literal) -> (u32, String, String) {
    anomaly_parts(lit)
        .map(|(_, agent, state, prop)| (state, agent, prop.to_string()))
        .unwrap_or((u32::MAX, String::new(), String::new()))
}

/// Splits the anomaly facts of a run into the primary anomaly and the
/// ordered derived list: the primary is the `an` fact with minimal state
/// (ties by agent, then property); every `dan` fact and the remaining `an`
/// facts are derived, sorted by state.
pub fn select_primary(anomalies: &[Literal]) -> (Option<Literal>, Vec<Literal>) {
    let mut an: Vec<&Literal> = anomalies
        .iter()
        .filter(|l| matches!(anomaly_parts(l), Some(("an", ..))))
        .collect();
    let mut dan: Vec<&Literal> = anomalies
        .iter()
        .filter(|l| matches!(anomaly_parts(l), Some(("dan", ..))))
        .collect();
    an.sort_by_key(|l| anomaly_sort_key(l));
    dan.sort_by_key(|l| anomaly_sort_key(l));
    let primary = if an.is_empty() {
        None
    } else {
        Some(an.remove(0).clone())
    };
    let mut derived: Vec<Literal> = an.into_iter().cloned().collect();
    derived.extend(dan.into_iter().cloned());
    derived.sort_by_key(anomaly_sort_key);
    (primary, derived)
}

/// All `an` and `dan` facts of a database, in deterministic order.
pub fn anomaly_facts(db: &Database) -> Vec<Literal> {
    db.iter()
        .filter(|l| l.is_positive() && anomaly_parts(l).is_some())
        .cloned()
        .collect()
}

pub fn export_trace(trace: &Trace) -> TraceExport {
    TraceExport {
        nodes: trace
            .nodes()
            .iter()
            .enumerate()
            .map(|(id, n)| TraceNodeExport {
                id,
                literal: n.literal.to_string(),
                origin: n.origin.name().to_string(),
                rule: n.rule.clone(),
                premises: n.premises.clone(),
                checked_absent: n.checked_absent.iter().map(Literal::to_string).collect(),
                stratum: n.stratum.map(|(l, s)| format!("L{l}.{s}")),
                step: n.step,
            })
            .collect(),
    }
}

/// Assembles the report for a finished run. `inputs` are the literals fed
/// into the run (mapped + passthrough facts); everything else in the
/// database is listed as derived, in derivation order.
pub fn build_report(
    db: &Database,
    trace: &Trace,
    inputs: &[Literal],
    warnings: Vec<String>,
    with_trace: bool,
) -> AnomalyReport {
    let (primary, derived) = select_primary(&anomaly_facts(db));
    let primary = primary.and_then(|l| entry_for(&l, trace));
    let derived: Vec<AnomalyEntry> = derived.iter().filter_map(|l| entry_for(l, trace)).collect();
    let cause_sentence = primary
        .as_ref()
        .map(|e| e.sentence.clone())
        .unwrap_or_else(|| "no cause identified".to_string());

    let input_set: BTreeSet<&Literal> = inputs.iter().collect();
    let facts: Vec<String> = inputs.iter().map(Literal::to_string).collect();
    let derived_facts: Vec<String> = trace
        .nodes()
        .iter()
        .filter(|n| !input_set.contains(&n.literal))
        .map(|n| n.literal.to_string())
        .collect();

    AnomalyReport {
        schema_version: 1,
        selection_rule: SELECTION_RULE.to_string(),
        cause_sentence,
        primary,
        derived,
        facts,
        derived_facts,
        warnings,
        trace: with_trace.then(|| export_trace(trace)),
    }
}

/// Renders the report as human-readable text.
pub fn render_text(report: &AnomalyReport) -> String {
    let mut out = String::new();
    out.push_str(&format!(
        "norm-based cause report (primary-anomaly selection: {})\n",
        report.selection_rule
    ));
    out.push_str(&format!("cause: {}\n", report.cause_sentence));
    match &report.primary {
        Some(p) => {
            out.push_str(&format!(
                "primary anomaly: agent {}, state {}, violated {} ({})\n",
                p.agent_display, p.state, p.property, p.schema
            ));
            if let Some(obs) = &p.incompatible_observation {
                out.push_str(&format!("incompatible observation: {obs}\n"));
            }
        }
        None => out.push_str("primary anomaly: none\n"),
    }
    if report.derived.is_empty() {
        out.push_str("derived anomalies: none\n");
    } else {
        out.push_str("derived anomalies:\n");
        for d in &report.derived {
            out.push_str(&format!(
                "  - agent {}, state {}, violated {} ({}): {}\n",
                d.agent_display, d.state, d.property, d.schema, d.sentence
            ));
        }
    }
    for w in &report.warnings {
        out.push_str(&format!("warning: {w}\n"));
    }
    out
}

/// Renders the derivation subtree of every database literal matching the
/// pattern; literals not derived render as a note.
pub fn render_explanation(pattern: &Literal, db: &Database, trace: &Trace) -> String {
    let hits = db.query(pattern);
    if hits.is_empty() {
        return format!("{pattern}: not derived\n");
    }
    let mut out = String::new();
    for lit in hits {
        if let Some(id) = trace.node_id(&lit) {
            render_node(id, 0, trace, &mut out);
        }
    }
    out
}

fn render_node(id: usize, depth: usize, trace: &Trace, out: &mut String) {
    let node = &trace.nodes()[id];
    for _ in 0..depth {
        out.push_str("  ");
    }
    out.push_str(&node.literal.to_string());
    out.push_str("  [");
    out.push_str(node.origin.name());
    if let Some(rule) = &node.rule {
        out.push_str(&format!(" @{rule}"));
    }
    if let Some((l, s)) = node.stratum {
        out.push_str(&format!(", L{l}.{s}"));
    }
    out.push_str(&format!(", step {}", node.step));
    if !node.checked_absent.is_empty() {
        let checks: Vec<String> = node.checked_absent.iter().map(Literal::to_string).collect();
        out.push_str(&format!("; checked absent: {}", checks.join(", ")));
    }
    out.push_str("]\n");
    for &p in &node.premises {
        render_node(p, depth + 1, trace, out);
    }
}
