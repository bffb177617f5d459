//! The end-to-end pipeline: fixture ingestion, linguistic mapping,
//! stratified inference, anomaly selection, report assembly.

use alloc::vec::Vec;
use core::fmt;

use crate::engine::{run_stratified, Database, EngineError, Trace};
use crate::ground::{ground, GroundError, GroundProgram, DEFAULT_INSTANCE_CAP};
use crate::mapping::{fixture_facts, map_linguistic, MapError};
use crate::oracle::{check_extension, restrict_for_oracle, OracleError};
use crate::parser::{parse_fixture, parse_program};
use crate::program::{ParseDiagnostic, Program};
use crate::report::{build_report, AnomalyReport};
use crate::stratify::{stratify, StratificationDiagnostic};
use crate::term::Literal;
use crate::validate::validate_program;

#[derive(Clone, Copy, Debug)]
pub struct PipelineConfig {
    pub instance_cap: usize,
    pub with_trace: bool,
    pub verify_oracle: bool,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        PipelineConfig {
            instance_cap: DEFAULT_INSTANCE_CAP,
            with_trace: false,
            verify_oracle: false,
        }
    }
}

#[derive(Debug)]
pub enum PipelineError {
    /// Parse or validation errors in the KB or fixture.
    Static(Vec<ParseDiagnostic>),
    Stratification(Vec<StratificationDiagnostic>),
    Ground(GroundError),
    /// Inconsistent database: the run aborted.
    Engine(EngineError),
    Oracle(OracleError),
}

impl fmt::Display for PipelineError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            PipelineError::Static(diags) => {
                writeln!(f, "static errors:")?;
                for d in diags {
                    writeln!(f, "  {d}")?;
                }
                Ok(())
            }
            PipelineError::Stratification(diags) => {
                writeln!(f, "stratification errors:")?;
                for d in diags {
                    writeln!(f, "  {d}")?;
                }
                Ok(())
            }
            PipelineError::Ground(e) => write!(f, "{e}"),
            PipelineError::Engine(e) => write!(f, "{e}"),
            PipelineError::Oracle(e) => write!(f, "{e}"),
        }
    }
}

impl From<MapError> for PipelineError {
    fn from(e: MapError) -> Self {
        match e {
            MapError::Fixture(d) => PipelineError::Static(d),
            MapError::Stratification(d) => PipelineError::Stratification(d),
            MapError::Ground(g) => PipelineError::Ground(g),
            MapError::Engine(g) => PipelineError::Engine(g),
        }
    }
}

/// Everything a run produces; the report is the user-facing part.
#[derive(Debug)]
pub struct PipelineOutcome {
    pub report: AnomalyReport,
    pub database: Database,
    pub trace: Trace,
    /// Semantic facts fed into the domain run (mapped + passthrough).
    pub mapped_facts: Vec<Literal>,
    /// The domain program with the mapped facts installed.
    pub program: Program,
    pub ground: GroundProgram,
    /// Result of the extension-membership check, when requested.
    pub oracle_verified: Option<bool>,
}

/// Parses and validates a KB text; validation errors are static errors,
/// warnings are returned alongside.
pub fn load_kb(text: &str) -> Result<(Program, Vec<ParseDiagnostic>), PipelineError> {
    let program = parse_program(text).map_err(PipelineError::Static)?;
    let diags = validate_program(&program);
    if diags.iter().any(ParseDiagnostic::is_error) {
        return Err(PipelineError::Static(diags));
    }
    Ok((program, diags))
}

/// Runs the full pipeline over KB and fixture texts: ingest linguistic
/// facts, map them to semantic facts, run stratified inference over the
/// domain KB, select the primary anomaly and assemble the report.
pub fn run_pipeline(
    kb_text: &str,
    linguistic_kb_text: &str,
    fixture_text: &str,
    cfg: PipelineConfig,
) -> Result<PipelineOutcome, PipelineError> {
    let (kb, _) = load_kb(kb_text)?;
    let (ling_kb, _) = load_kb(linguistic_kb_text)?;

    let parsed = parse_fixture(fixture_text, &[&ling_kb, &kb]).map_err(PipelineError::Static)?;
    let lf = fixture_facts(parsed).map_err(PipelineError::Static)?;
    let mapped = map_linguistic(&lf, &ling_kb, cfg.instance_cap)?;

    let mut program = kb;
    program.facts.extend(mapped.facts.iter().cloned());
    program.canonicalize();

    let strata = stratify(&program).map_err(PipelineError::Stratification)?;
    let ground =
        ground(&program, Some(&strata), cfg.instance_cap).map_err(PipelineError::Ground)?;
    let (database, trace) = run_stratified(&ground).map_err(PipelineError::Engine)?;

    let oracle_verified = if cfg.verify_oracle {
        let restricted = restrict_for_oracle(&ground, &database);
        Some(check_extension(&database, &restricted).map_err(PipelineError::Oracle)?)
    } else {
        None
    };

    let inputs: Vec<Literal> = ground
        .static_facts
        .iter()
        .chain(ground.facts.iter())
        .cloned()
        .collect();
    let report = build_report(&database, &trace, &inputs, mapped.warnings, cfg.with_trace);

    Ok(PipelineOutcome {
        report,
        database,
        trace,
        mapped_facts: mapped.facts,
        program,
        ground,
        oracle_verified,
    })
}

/// Convenience for the common case: the embedded KBs.
pub fn run_pipeline_embedded(
    fixture_text: &str,
    cfg: PipelineConfig,
) -> Result<PipelineOutcome, PipelineError> {
    run_pipeline(
        crate::kb::CRASH_KB,
        crate::kb::LINGUISTIC_KB,
        fixture_text,
        cfg,
    )
}
