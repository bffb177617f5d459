//! normengine: command-line pipeline from crash-report fixtures to cause
//! reports.
//!
//! Exit codes: 0 success (with or without anomalies), 2 static errors
//! (parse, validation, stratification, grounding), 3 inconsistent database.

use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};

use normengine_core::ground::{ground, DEFAULT_INSTANCE_CAP};
use normengine_core::kb::{CRASH_KB, LINGUISTIC_KB};
use normengine_core::oracle::{reiter_extensions, OracleError};
use normengine_core::pipeline::{
    load_kb, run_pipeline, PipelineConfig, PipelineError, PipelineOutcome,
};
use normengine_core::report::{render_explanation, render_text};
use normengine_core::stratify::{check_constraints, compute_strata, dependency_graph};
use normengine_core::{parse_literal, parse_program, serialize_program};

const EXIT_STATIC: u8 = 2;
const EXIT_INCONSISTENT: u8 = 3;

#[derive(Parser)]
#[command(
    name = "normengine",
    version,
    about = "Stratified default-logic engine for norm-based cause detection in crash reports"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
enum Format {
    Text,
    Json,
}

#[derive(Subcommand)]
enum Command {
    /// Parse and validate a knowledge base (.nkb) or fixture (.nfx) file,
    /// printing the canonical form.
    Parse {
        /// File to parse; fixtures are recognized by the .nfx extension.
        file: PathBuf,
    },
    /// Print the stratum assignment of a knowledge base.
    Stratify {
        /// Knowledge base; defaults to the embedded crash KB.
        #[arg(long)]
        kb: Option<PathBuf>,
        #[arg(long, value_enum, default_value = "text")]
        format: Format,
    },
    /// Run the full pipeline: linguistic mapping, stratified inference,
    /// anomaly selection, cause report.
    Run {
        /// Domain knowledge base; defaults to the embedded crash KB.
        #[arg(long)]
        kb: Option<PathBuf>,
        /// Linguistic mapping KB; defaults to the embedded one.
        #[arg(long)]
        linguistic_kb: Option<PathBuf>,
        /// Fixture file(s) with the report's linguistic facts; repeatable,
        /// concatenated in order.
        #[arg(long, required = true)]
        facts: Vec<PathBuf>,
        /// Include the derivation trace in the report.
        #[arg(long)]
        trace: bool,
        #[arg(long, value_enum, default_value = "text")]
        format: Format,
        /// Check the database against the Reiter oracle (desk scale).
        #[arg(long)]
        verify_oracle: bool,
        /// Grounding instance cap (also: NORMENGINE_INSTANCE_CAP).
        #[arg(long)]
        instance_cap: Option<usize>,
    },
    /// Run the pipeline and print the derivation tree of every database
    /// literal matching a pattern.
    Explain {
        #[arg(long)]
        kb: Option<PathBuf>,
        #[arg(long)]
        linguistic_kb: Option<PathBuf>,
        #[arg(long, required = true)]
        facts: Vec<PathBuf>,
        /// Literal pattern, e.g. "must(stop, X, T)".
        pattern: String,
    },
    /// Enumerate the Reiter extensions of a desk-scale ground theory.
    Oracle {
        /// Theory file (.nkb with ground facts and rules).
        file: PathBuf,
        #[arg(long)]
        instance_cap: Option<usize>,
    },
}

fn read(path: &Path) -> Result<String, ExitCode> {
    fs::read_to_string(path).map_err(|e| {
        eprintln!("error: cannot read {}: {e}", path.display());
        ExitCode::from(EXIT_STATIC)
    })
}

fn kb_text(path: &Option<PathBuf>) -> Result<String, ExitCode> {
    match path {
        Some(p) => read(p),
        None => Ok(CRASH_KB.to_string()),
    }
}

fn linguistic_text(path: &Option<PathBuf>) -> Result<String, ExitCode> {
    match path {
        Some(p) => read(p),
        None => Ok(LINGUISTIC_KB.to_string()),
    }
}

fn instance_cap(flag: Option<usize>) -> usize {
    flag.or_else(|| {
        std::env::var("NORMENGINE_INSTANCE_CAP")
            .ok()
            .and_then(|v| v.parse().ok())
    })
    .unwrap_or(DEFAULT_INSTANCE_CAP)
    .max(1)
}

fn exit_for(err: &PipelineError) -> u8 {
    match err {
        PipelineError::Engine(_) => EXIT_INCONSISTENT,
        _ => EXIT_STATIC,
    }
}

fn run_outcome(
    kb: &Option<PathBuf>,
    linguistic_kb: &Option<PathBuf>,
    facts: &[PathBuf],
    cfg: PipelineConfig,
) -> Result<PipelineOutcome, ExitCode> {
    let kb = kb_text(kb)?;
    let ling = linguistic_text(linguistic_kb)?;
    let mut fixture = String::new();
    for path in facts {
        fixture.push_str(&read(path)?);
        fixture.push('\n');
    }
    run_pipeline(&kb, &ling, &fixture, cfg).map_err(|e| {
        eprintln!("error: {e}");
        ExitCode::from(exit_for(&e))
    })
}

fn cmd_parse(file: &Path) -> Result<(), ExitCode> {
    let text = read(file)?;
    let is_fixture = file.extension().is_some_and(|e| e == "nfx");
    if is_fixture {
        let crash = parse_program(CRASH_KB).expect("embedded KB");
        let ling = parse_program(LINGUISTIC_KB).expect("embedded KB");
        match normengine_core::parser::parse_fixture(&text, &[&ling, &crash]) {
            Ok(facts) => {
                for (lit, _) in facts {
                    println!("{lit}.");
                }
                Ok(())
            }
            Err(diags) => {
                for d in diags {
                    eprintln!("{d}");
                }
                Err(ExitCode::from(EXIT_STATIC))
            }
        }
    } else {
        match load_kb(&text) {
            Ok((program, warnings)) => {
                for w in warnings {
                    eprintln!("{w}");
                }
                print!("{}", serialize_program(&program));
                Ok(())
            }
            Err(e) => {
                eprintln!("{e}");
                Err(ExitCode::from(EXIT_STATIC))
            }
        }
    }
}

fn cmd_stratify(kb: &Option<PathBuf>, format: Format) -> Result<(), ExitCode> {
    let text = kb_text(kb)?;
    let (program, warnings) = load_kb(&text).map_err(|e| {
        eprintln!("{e}");
        ExitCode::from(EXIT_STATIC)
    })?;
    for w in warnings {
        eprintln!("{w}");
    }
    let graph = dependency_graph(&program);
    let assignment = match compute_strata(&graph) {
        Ok(a) => a,
        Err(diags) => {
            for d in diags {
                eprintln!("{d}");
            }
            return Err(ExitCode::from(EXIT_STATIC));
        }
    };
    let diags = check_constraints(&program, &assignment);
    for d in &diags {
        eprintln!("{d}");
    }
    match format {
        Format::Text => {
            for stratum in assignment.strata() {
                let names: Vec<String> = stratum.keys.iter().map(|k| k.display()).collect();
                println!(
                    "L{}.{}: {}",
                    stratum.layer,
                    stratum.sublayer,
                    names.join(", ")
                );
            }
        }
        Format::Json => {
            let strata: Vec<serde_json::Value> = assignment
                .strata()
                .iter()
                .map(|s| {
                    serde_json::json!({
                        "layer": s.layer,
                        "sublayer": s.sublayer,
                        "predicates": s.keys.iter().map(|k| k.display()).collect::<Vec<_>>(),
                    })
                })
                .collect();
            let doc = serde_json::json!({
                "schema_version": 1,
                "strata": strata,
                "diagnostics": diags.iter().map(|d| d.to_string()).collect::<Vec<_>>(),
            });
            println!("{}", serde_json::to_string_pretty(&doc).expect("json"));
        }
    }
    if diags.is_empty() {
        Ok(())
    } else {
        Err(ExitCode::from(EXIT_STATIC))
    }
}

fn cmd_run(
    kb: &Option<PathBuf>,
    linguistic_kb: &Option<PathBuf>,
    facts: &[PathBuf],
    trace: bool,
    format: Format,
    verify_oracle: bool,
    cap: Option<usize>,
) -> Result<(), ExitCode> {
    let cfg = PipelineConfig {
        instance_cap: instance_cap(cap),
        with_trace: trace,
        verify_oracle,
    };
    let outcome = run_outcome(kb, linguistic_kb, facts, cfg)?;
    match format {
        Format::Text => {
            print!("{}", render_text(&outcome.report));
            if let Some(verified) = outcome.oracle_verified {
                println!("oracle check: database is a Reiter extension: {verified}");
            }
            if let Some(trace) = &outcome.report.trace {
                println!("trace ({} nodes):", trace.nodes.len());
                for n in &trace.nodes {
                    let rule = n
                        .rule
                        .as_ref()
                        .map(|r| format!(" @{r}"))
                        .unwrap_or_default();
                    let premises = if n.premises.is_empty() {
                        String::new()
                    } else {
                        format!(
                            " <- {}",
                            n.premises
                                .iter()
                                .map(usize::to_string)
                                .collect::<Vec<_>>()
                                .join(",")
                        )
                    };
                    println!(
                        "  #{} {} [{}{}]{}",
                        n.id, n.literal, n.origin, rule, premises
                    );
                }
            }
        }
        Format::Json => {
            let mut doc = serde_json::to_value(&outcome.report).expect("report json");
            if let Some(verified) = outcome.oracle_verified {
                doc.as_object_mut()
                    .expect("object")
                    .insert("oracle_verified".into(), serde_json::json!(verified));
            }
            println!("{}", serde_json::to_string_pretty(&doc).expect("json"));
        }
    }
    Ok(())
}

fn cmd_explain(
    kb: &Option<PathBuf>,
    linguistic_kb: &Option<PathBuf>,
    facts: &[PathBuf],
    pattern: &str,
) -> Result<(), ExitCode> {
    let cfg = PipelineConfig {
        with_trace: true,
        ..Default::default()
    };
    let outcome = run_outcome(kb, linguistic_kb, facts, cfg)?;
    let literal = parse_literal(pattern, &outcome.program).map_err(|diags| {
        for d in diags {
            eprintln!("{d}");
        }
        ExitCode::from(EXIT_STATIC)
    })?;
    print!(
        "{}",
        render_explanation(&literal, &outcome.database, &outcome.trace)
    );
    Ok(())
}

fn cmd_oracle(file: &Path, cap: Option<usize>) -> Result<(), ExitCode> {
    let text = read(file)?;
    let (program, warnings) = load_kb(&text).map_err(|e| {
        eprintln!("{e}");
        ExitCode::from(EXIT_STATIC)
    })?;
    for w in warnings {
        eprintln!("{w}");
    }
    let ground = ground(&program, None, instance_cap(cap)).map_err(|e| {
        eprintln!("error: {e}");
        ExitCode::from(EXIT_STATIC)
    })?;
    match reiter_extensions(&ground) {
        Ok(extensions) => {
            println!("extensions: {}", extensions.len());
            for (i, ext) in extensions.iter().enumerate() {
                println!("extension {}:", i + 1);
                for lit in ext {
                    println!("  {lit}");
                }
            }
            Ok(())
        }
        Err(e @ OracleError::InconsistentFacts) => {
            eprintln!("error: {e}");
            Err(ExitCode::from(EXIT_INCONSISTENT))
        }
        Err(e) => {
            eprintln!("error: {e}");
            Err(ExitCode::from(EXIT_STATIC))
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match &cli.command {
        Command::Parse { file } => cmd_parse(file),
        Command::Stratify { kb, format } => cmd_stratify(kb, *format),
        Command::Run {
            kb,
            linguistic_kb,
            facts,
            trace,
            format,
            verify_oracle,
            instance_cap,
        } => cmd_run(
            kb,
            linguistic_kb,
            facts,
            *trace,
            *format,
            *verify_oracle,
            *instance_cap,
        ),
        Command::Explain {
            kb,
            linguistic_kb,
            facts,
            pattern,
        } => cmd_explain(kb, linguistic_kb, facts, pattern),
        Command::Oracle { file, instance_cap } => cmd_oracle(file, *instance_cap),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(code) => code,
    }
}
