//! Parser for the rule DSL (`.nkb` knowledge bases and `.nfx` fixtures).
//!
//! The surface syntax is Prolog-adjacent: clauses end with `.`, `%` starts a
//! line comment, variables start with an uppercase letter, constants and
//! predicate names are lowercase. `=>` writes an implication, `body : head.`
//! a normal default, `body : head [constraint].` a semi-normal default, `-`
//! classical negation and `not` negation-as-failure in rule bodies. `@name`
//! before a clause assigns a rule label. The normative grammar ships in
//! `docs/grammar.ebnf`.

use alloc::collections::{BTreeMap, BTreeSet};
use alloc::format;
use alloc::string::{String, ToString};
use alloc::vec::Vec;

use crate::program::{
    builtin_static_sig, ArgSort, BodyLiteral, DeclKind, Declaration, ParseDiagnostic, Program,
    Rule, RuleKind, Span,
};
use crate::term::{combine, Arg, Atom, Literal, Modality, Property, Sign, Term};

const RESERVED: &[&str] = &[
    "prop", "static", "true", "not", "combine", "holds", "must", "able_to",
];

#[derive(Clone, Debug, PartialEq, Eq)]
enum TokKind {
    Ident(String),
    Var(String),
    Nat(u32),
    LParen,
    RParen,
    Comma,
    Dot,
    Arrow,
    Colon,
    LBracket,
    RBracket,
    Minus,
    Plus,
    At,
    Slash,
}

impl TokKind {
    fn describe(&self) -> String {
        match self {
            TokKind::Ident(s) => format!("`{s}`"),
            TokKind::Var(s) => format!("variable `{}`", crate::term::display_var(s)),
            TokKind::Nat(n) => format!("`{n}`"),
            TokKind::LParen => "`(`".into(),
            TokKind::RParen => "`)`".into(),
            TokKind::Comma => "`,`".into(),
            TokKind::Dot => "`.`".into(),
            TokKind::Arrow => "`=>`".into(),
            TokKind::Colon => "`:`".into(),
            TokKind::LBracket => "`[`".into(),
            TokKind::RBracket => "`]`".into(),
            TokKind::Minus => "`-`".into(),
            TokKind::Plus => "`+`".into(),
            TokKind::At => "`@`".into(),
            TokKind::Slash => "`/`".into(),
        }
    }
}

#[derive(Clone, Debug)]
struct Tok {
    kind: TokKind,
    span: Span,
}

fn lex(text: &str) -> Result<Vec<Tok>, Vec<ParseDiagnostic>> {
    let mut toks = Vec::new();
    let mut diags = Vec::new();
    let mut line: u32 = 1;
    let mut col: u32 = 1;
    let mut chars = text.chars().peekable();

    while let Some(&c) = chars.peek() {
        let span = Span { line, column: col };
        let bump = |chars: &mut core::iter::Peekable<core::str::Chars>, col: &mut u32| {
            chars.next();
            *col += 1;
        };
        match c {
            '\n' => {
                chars.next();
                line += 1;
                col = 1;
            }
            c if c.is_whitespace() => bump(&mut chars, &mut col),
            '%' => {
                while let Some(&c) = chars.peek() {
                    if c == '\n' {
                        break;
                    }
                    chars.next();
                    col += 1;
                }
            }
            '(' => {
                bump(&mut chars, &mut col);
                toks.push(Tok {
                    kind: TokKind::LParen,
                    span,
                });
            }
            ')' => {
                bump(&mut chars, &mut col);
                toks.push(Tok {
                    kind: TokKind::RParen,
                    span,
                });
            }
            ',' => {
                bump(&mut chars, &mut col);
                toks.push(Tok {
                    kind: TokKind::Comma,
                    span,
                });
            }
            '.' => {
                bump(&mut chars, &mut col);
                toks.push(Tok {
                    kind: TokKind::Dot,
                    span,
                });
            }
            '[' => {
                bump(&mut chars, &mut col);
                toks.push(Tok {
                    kind: TokKind::LBracket,
                    span,
                });
            }
            ']' => {
                bump(&mut chars, &mut col);
                toks.push(Tok {
                    kind: TokKind::RBracket,
                    span,
                });
            }
            ':' => {
                bump(&mut chars, &mut col);
                toks.push(Tok {
                    kind: TokKind::Colon,
                    span,
                });
            }
            '-' => {
                bump(&mut chars, &mut col);
                toks.push(Tok {
                    kind: TokKind::Minus,
                    span,
                });
            }
            '+' => {
                bump(&mut chars, &mut col);
                toks.push(Tok {
                    kind: TokKind::Plus,
                    span,
                });
            }
            '@' => {
                bump(&mut chars, &mut col);
                toks.push(Tok {
                    kind: TokKind::At,
                    span,
                });
            }
            '/' => {
                bump(&mut chars, &mut col);
                toks.push(Tok {
                    kind: TokKind::Slash,
                    span,
                });
            }
            '=' => {
                bump(&mut chars, &mut col);
                if chars.peek() == Some(&'>') {
                    bump(&mut chars, &mut col);
                    toks.push(Tok {
                        kind: TokKind::Arrow,
                        span,
                    });
                } else {
                    diags.push(ParseDiagnostic::error("expected `=>`", span));
                }
            }
            c if c.is_ascii_digit() => {
                let mut value: u64 = 0;
                let mut overflow = false;
                while let Some(&d) = chars.peek() {
                    if let Some(v) = d.to_digit(10) {
                        value = value.saturating_mul(10).saturating_add(u64::from(v));
                        overflow = overflow || value > u64::from(u32::MAX);
                        chars.next();
                        col += 1;
                    } else {
                        break;
                    }
                }
                if overflow {
                    diags.push(ParseDiagnostic::error("number out of range", span));
                } else {
                    toks.push(Tok {
                        kind: TokKind::Nat(value as u32),
                        span,
                    });
                }
            }
            c if c.is_alphabetic() || c == '_' => {
                let upper = c.is_uppercase();
                let mut name = String::new();
                while let Some(&d) = chars.peek() {
                    if d.is_alphanumeric() || d == '_' {
                        name.push(d);
                        chars.next();
                        col += 1;
                    } else {
                        break;
                    }
                }
                let normalized = name.to_lowercase();
                toks.push(Tok {
                    kind: if upper {
                        TokKind::Var(normalized)
                    } else {
                        TokKind::Ident(normalized)
                    },
                    span,
                });
            }
            other => {
                diags.push(ParseDiagnostic::error(
                    format!("unexpected character `{other}`"),
                    span,
                ));
                chars.next();
                col += 1;
            }
        }
    }

    if diags.is_empty() {
        Ok(toks)
    } else {
        Err(diags)
    }
}

/// Declaration table gathered in a first pass, so declarations may appear
/// anywhere in the file.
#[derive(Default)]
struct DeclTable {
    props: BTreeMap<String, u8>,
    statics: BTreeMap<String, u8>,
}

impl DeclTable {
    fn static_sig(&self, name: &str) -> Option<Vec<ArgSort>> {
        if let Some(sig) = builtin_static_sig(name) {
            return Some(sig.to_vec());
        }
        self.statics
            .get(name)
            .map(|&arity| alloc::vec![ArgSort::Term; arity as usize])
    }
}

struct Parser<'a> {
    toks: &'a [Tok],
    pos: usize,
    decls: &'a DeclTable,
    diags: Vec<ParseDiagnostic>,
    eof_span: Span,
}

type ClauseResult<T> = Result<T, ()>;

impl<'a> Parser<'a> {
    fn peek(&self) -> Option<&Tok> {
        self.toks.get(self.pos)
    }

    fn peek_kind(&self) -> Option<&TokKind> {
        self.peek().map(|t| &t.kind)
    }

    fn next(&mut self) -> Option<Tok> {
        let t = self.toks.get(self.pos).cloned();
        if t.is_some() {
            self.pos += 1;
        }
        t
    }

    fn here(&self) -> Span {
        self.peek().map(|t| t.span).unwrap_or(self.eof_span)
    }

    fn error_here(&mut self, msg: impl Into<String>) {
        let span = self.here();
        self.diags.push(ParseDiagnostic::error(msg, span));
    }

    fn expect(&mut self, kind: TokKind, what: &str) -> ClauseResult<Span> {
        match self.peek() {
            Some(t) if t.kind == kind => {
                let span = t.span;
                self.pos += 1;
                Ok(span)
            }
            Some(t) => {
                let found = t.kind.describe();
                self.error_here(format!("expected {what}, found {found}"));
                Err(())
            }
            None => {
                self.error_here(format!("expected {what}, found end of input"));
                Err(())
            }
        }
    }

    fn expect_ident(&mut self, what: &str) -> ClauseResult<(String, Span)> {
        match self.peek().cloned() {
            Some(Tok {
                kind: TokKind::Ident(name),
                span,
            }) => {
                self.pos += 1;
                Ok((name, span))
            }
            Some(t) => {
                self.error_here(format!("expected {what}, found {}", t.kind.describe()));
                Err(())
            }
            None => {
                self.error_here(format!("expected {what}, found end of input"));
                Err(())
            }
        }
    }

    /// Skips past the next `.` so parsing can resume at the following clause.
    fn recover(&mut self) {
        while let Some(t) = self.next() {
            if t.kind == TokKind::Dot {
                break;
            }
        }
    }

    fn parse_term(&mut self) -> ClauseResult<Term> {
        match self.next() {
            Some(Tok {
                kind: TokKind::Ident(name),
                span,
            }) => {
                if RESERVED.contains(&name.as_str()) {
                    self.diags.push(ParseDiagnostic::error(
                        format!("`{name}` is reserved and cannot be used as a constant"),
                        span,
                    ));
                    return Err(());
                }
                Ok(Term::Constant(name))
            }
            Some(Tok {
                kind: TokKind::Var(name),
                ..
            }) => Ok(Term::Variable(name)),
            Some(Tok {
                kind: TokKind::Nat(n),
                ..
            }) => Ok(Term::State(n)),
            Some(t) => {
                self.pos -= 1;
                self.error_here(format!("expected a term, found {}", t.kind.describe()));
                Err(())
            }
            None => {
                self.error_here("expected a term, found end of input");
                Err(())
            }
        }
    }

    fn parse_state_term(&mut self) -> ClauseResult<Term> {
        match self.next() {
            Some(Tok {
                kind: TokKind::Nat(n),
                span,
            }) => {
                if n == 0 {
                    self.diags
                        .push(ParseDiagnostic::error("states start at 1", span));
                    return Err(());
                }
                Ok(Term::State(n))
            }
            Some(Tok {
                kind: TokKind::Var(name),
                ..
            }) => {
                let offset = match self.peek_kind() {
                    Some(TokKind::Plus) => Some(1i8),
                    Some(TokKind::Minus) => Some(-1i8),
                    _ => None,
                };
                if let Some(sign) = offset {
                    self.pos += 1;
                    let span = self.here();
                    match self.next() {
                        Some(Tok {
                            kind: TokKind::Nat(n),
                            ..
                        }) => match n {
                            0 => Ok(Term::Variable(name)),
                            1 => Ok(Term::StateOffset {
                                var: name,
                                offset: sign,
                            }),
                            _ => {
                                self.diags.push(ParseDiagnostic::error(
                                    "state offsets are limited to +1 and -1",
                                    span,
                                ));
                                Err(())
                            }
                        },
                        _ => {
                            self.diags.push(ParseDiagnostic::error(
                                "expected a number after the state offset sign",
                                span,
                            ));
                            Err(())
                        }
                    }
                } else {
                    Ok(Term::Variable(name))
                }
            }
            Some(t) => {
                self.pos -= 1;
                self.error_here(format!(
                    "expected a state (number or variable), found {}",
                    t.kind.describe()
                ));
                Err(())
            }
            None => {
                self.error_here("expected a state, found end of input");
                Err(())
            }
        }
    }

    fn parse_property(&mut self) -> ClauseResult<Property> {
        match self.peek().cloned() {
            Some(Tok {
                kind: TokKind::Ident(name),
                span,
            }) => {
                self.pos += 1;
                if name == "combine" {
                    self.expect(TokKind::LParen, "`(` after combine")?;
                    let base = self.parse_property()?;
                    self.expect(TokKind::Comma, "`,` inside combine")?;
                    let arg = self.parse_term()?;
                    self.expect(TokKind::RParen, "`)` closing combine")?;
                    match combine(base, arg) {
                        Ok(p) => Ok(p),
                        Err(e) => {
                            self.diags.push(ParseDiagnostic::error(e.to_string(), span));
                            Err(())
                        }
                    }
                } else if RESERVED.contains(&name.as_str()) {
                    self.diags.push(ParseDiagnostic::error(
                        format!("`{name}` is reserved and cannot be used as a property"),
                        span,
                    ));
                    Err(())
                } else {
                    Ok(Property::Atomic(name))
                }
            }
            Some(Tok {
                kind: TokKind::Var(name),
                ..
            }) => {
                self.pos += 1;
                Ok(Property::Variable(name))
            }
            Some(t) => {
                self.error_here(format!("expected a property, found {}", t.kind.describe()));
                Err(())
            }
            None => {
                self.error_here("expected a property, found end of input");
                Err(())
            }
        }
    }

    /// Checks an atomic property usage against the declaration table: the
    /// name must be declared and its combine depth must match the declared
    /// arity.
    fn check_property(&mut self, prop: &Property, span: Span) {
        if let Some(base) = prop.base_name() {
            match self.decls.props.get(base) {
                None => self.diags.push(ParseDiagnostic::error(
                    format!("undeclared property `{base}`"),
                    span,
                )),
                Some(&arity) => {
                    let depth = prop.depth() as u8;
                    if depth != arity {
                        self.diags.push(ParseDiagnostic::error(
                            format!(
                                "property `{base}` declared with arity {arity} but used with {depth} combine argument(s)"
                            ),
                            span,
                        ));
                    }
                }
            }
        }
    }

    fn parse_atom(&mut self) -> ClauseResult<Atom> {
        let (name, span) = match self.peek().cloned() {
            Some(Tok {
                kind: TokKind::Ident(name),
                span,
            }) => {
                self.pos += 1;
                (name, span)
            }
            Some(t) => {
                self.error_here(format!(
                    "expected a predicate name, found {}",
                    t.kind.describe()
                ));
                return Err(());
            }
            None => {
                self.error_here("expected a predicate, found end of input");
                return Err(());
            }
        };

        let modality = match name.as_str() {
            "holds" => Some(Modality::Holds),
            "must" => Some(Modality::Must),
            "able_to" => Some(Modality::AbleTo),
            _ => None,
        };

        if let Some(modality) = modality {
            self.expect(TokKind::LParen, &format!("`(` after {name}"))?;
            let prop_span = self.here();
            let property = self.parse_property()?;
            self.check_property(&property, prop_span);
            self.expect(TokKind::Comma, "`,` after the property")?;
            let agent = self.parse_term()?;
            self.expect(TokKind::Comma, "`,` after the agent")?;
            let state = self.parse_state_term()?;
            self.expect(TokKind::RParen, "`)` closing the atom")?;
            return Ok(Atom::Modal {
                modality,
                property,
                agent,
                state,
            });
        }

        // Static predicate application, parsed against its signature.
        let sig = self.decls.static_sig(&name);
        if sig.is_none() {
            let hint = if self.decls.props.contains_key(&name) {
                format!("`{name}` is a property; properties appear inside holds/must/able_to")
            } else {
                format!("undeclared static predicate `{name}`")
            };
            self.diags.push(ParseDiagnostic::error(hint, span));
        }
        self.expect(TokKind::LParen, &format!("`(` after {name}"))?;
        let mut args = Vec::new();
        loop {
            let sort = sig
                .as_deref()
                .and_then(|s| s.get(args.len()))
                .copied()
                .unwrap_or(ArgSort::Term);
            let arg = match sort {
                ArgSort::Property => {
                    let prop_span = self.here();
                    let p = self.parse_property()?;
                    self.check_property(&p, prop_span);
                    Arg::Property(p)
                }
                ArgSort::Term => Arg::Term(self.parse_term()?),
            };
            args.push(arg);
            match self.peek_kind() {
                Some(TokKind::Comma) => {
                    self.pos += 1;
                }
                _ => break,
            }
        }
        self.expect(TokKind::RParen, "`)` closing the atom")?;
        if let Some(sig) = sig {
            if sig.len() != args.len() {
                self.diags.push(ParseDiagnostic::error(
                    format!(
                        "`{name}` takes {} argument(s), found {}",
                        sig.len(),
                        args.len()
                    ),
                    span,
                ));
                return Err(());
            }
            Ok(Atom::Static {
                predicate: name,
                args,
            })
        } else {
            Err(())
        }
    }

    fn parse_literal(&mut self) -> ClauseResult<Literal> {
        let sign = if self.peek_kind() == Some(&TokKind::Minus) {
            self.pos += 1;
            Sign::Negative
        } else {
            Sign::Positive
        };
        Ok(Literal {
            sign,
            atom: self.parse_atom()?,
        })
    }

    fn parse_body_literal(&mut self) -> ClauseResult<BodyLiteral> {
        if let Some(TokKind::Ident(name)) = self.peek_kind() {
            if name == "not" {
                let span = self.here();
                self.pos += 1;
                if self.peek_kind() == Some(&TokKind::Minus) {
                    self.diags.push(ParseDiagnostic::error(
                        "`not` applies to positive atoms only",
                        span,
                    ));
                    return Err(());
                }
                return Ok(BodyLiteral::naf(self.parse_literal()?));
            }
        }
        Ok(BodyLiteral::plain(self.parse_literal()?))
    }
}

/// First pass: scan the token stream for declaration clauses.
fn collect_declarations(
    toks: &[Tok],
    diags: &mut Vec<ParseDiagnostic>,
) -> (DeclTable, Vec<Declaration>) {
    let mut table = DeclTable::default();
    let mut decls = Vec::new();
    let mut clause_start = true;
    let mut i = 0;
    while i < toks.len() {
        if clause_start {
            if let TokKind::Ident(kw) = &toks[i].kind {
                if kw == "prop" || kw == "static" {
                    let span = toks[i].span;
                    let name = match toks.get(i + 1).map(|t| &t.kind) {
                        Some(TokKind::Ident(name)) => name.clone(),
                        _ => {
                            // Leave the error to the main pass.
                            clause_start = false;
                            i += 1;
                            continue;
                        }
                    };
                    let arity = match (
                        toks.get(i + 2).map(|t| &t.kind),
                        toks.get(i + 3).map(|t| &t.kind),
                    ) {
                        (Some(TokKind::Slash), Some(TokKind::Nat(n))) => *n,
                        _ => {
                            clause_start = false;
                            i += 1;
                            continue;
                        }
                    };
                    let is_prop = kw == "prop";
                    if RESERVED.contains(&name.as_str()) {
                        diags.push(ParseDiagnostic::error(
                            format!("`{name}` is reserved and cannot be declared"),
                            span,
                        ));
                    } else if is_prop && arity > 2 {
                        diags.push(ParseDiagnostic::error(
                            "property arity is limited to 2 combine arguments",
                            span,
                        ));
                    } else if is_prop && table.props.contains_key(&name)
                        || !is_prop && table.statics.contains_key(&name)
                    {
                        diags.push(ParseDiagnostic::error(
                            format!("duplicate declaration of `{name}`"),
                            span,
                        ));
                    } else if !is_prop && builtin_static_sig(&name).is_some() {
                        diags.push(ParseDiagnostic::error(
                            format!("`{name}` is a built-in static predicate"),
                            span,
                        ));
                    } else {
                        let arity = arity as u8;
                        if is_prop {
                            table.props.insert(name.clone(), arity);
                            decls.push(Declaration {
                                kind: DeclKind::Prop { name, arity },
                                span,
                            });
                        } else {
                            table.statics.insert(name.clone(), arity);
                            decls.push(Declaration {
                                kind: DeclKind::Static { name, arity },
                                span,
                            });
                        }
                    }
                }
            }
        }
        clause_start = toks[i].kind == TokKind::Dot;
        i += 1;
    }
    (table, decls)
}

/// Variable sort usage within one rule, for conflict detection.
#[derive(Default)]
struct SortUsage {
    as_property: BTreeSet<String>,
    as_term: BTreeSet<String>,
}

fn record_sorts(lit: &Literal, usage: &mut SortUsage) {
    fn term_sorts(term: &Term, usage: &mut SortUsage) {
        match term {
            Term::Variable(v) | Term::StateOffset { var: v, .. } => {
                usage.as_term.insert(v.clone());
            }
            _ => {}
        }
    }
    fn prop_sorts(prop: &Property, usage: &mut SortUsage) {
        match prop {
            Property::Variable(v) => {
                usage.as_property.insert(v.clone());
            }
            Property::Combine(base, arg) => {
                prop_sorts(base, usage);
                term_sorts(arg, usage);
            }
            Property::Atomic(_) => {}
        }
    }
    match &lit.atom {
        Atom::Modal {
            property,
            agent,
            state,
            ..
        } => {
            prop_sorts(property, usage);
            term_sorts(agent, usage);
            term_sorts(state, usage);
        }
        Atom::Static { args, .. } => {
            for a in args {
                match a {
                    Arg::Term(t) => term_sorts(t, usage),
                    Arg::Property(p) => prop_sorts(p, usage),
                }
            }
        }
    }
}

fn validate_rule_structure(rule: &Rule, diags: &mut Vec<ParseDiagnostic>) {
    // Range restriction: every variable in head, constraint and NAF body
    // literals must be bound by a non-NAF body literal.
    let mut bound = BTreeSet::new();
    for b in rule.body.iter().filter(|b| !b.naf) {
        b.literal.atom.collect_vars(&mut bound);
    }
    let mut needed = BTreeSet::new();
    rule.head.atom.collect_vars(&mut needed);
    if let Some(c) = &rule.constraint {
        c.atom.collect_vars(&mut needed);
    }
    for b in rule.body.iter().filter(|b| b.naf) {
        b.literal.atom.collect_vars(&mut needed);
    }
    for v in needed.difference(&bound) {
        diags.push(ParseDiagnostic::error(
            format!(
                "rule {} is not range-restricted: variable {} does not occur in its body",
                rule.label,
                crate::term::display_var(v)
            ),
            rule.span,
        ));
    }

    // Sort consistency: a variable cannot stand for both a property and a term.
    let mut usage = SortUsage::default();
    for b in &rule.body {
        record_sorts(&b.literal, &mut usage);
    }
    record_sorts(&rule.head, &mut usage);
    if let Some(c) = &rule.constraint {
        record_sorts(c, &mut usage);
    }
    for v in usage.as_property.intersection(&usage.as_term) {
        diags.push(ParseDiagnostic::error(
            format!(
                "variable {} is used both as a property and as a term in rule {}",
                crate::term::display_var(v),
                rule.label
            ),
            rule.span,
        ));
    }
}

/// Parses and structurally validates a program. On success the result
/// serializes back to an equal program; on failure every error carries a span.
pub fn parse_program(text: &str) -> Result<Program, Vec<ParseDiagnostic>> {
    let toks = lex(text)?;
    let last_line = text.lines().count().max(1) as u32;
    let eof_span = Span {
        line: last_line,
        column: text
            .lines()
            .last()
            .map(|l| l.chars().count() as u32 + 1)
            .unwrap_or(1),
    };

    let mut diags = Vec::new();
    let (table, declarations) = collect_declarations(&toks, &mut diags);

    let mut parser = Parser {
        toks: &toks,
        pos: 0,
        decls: &table,
        diags,
        eof_span,
    };

    let mut program = Program {
        declarations,
        ..Default::default()
    };
    let mut labels = BTreeSet::new();
    let mut ordinal: usize = 0;

    while parser.peek().is_some() {
        // Declaration clauses were consumed semantically in the first pass;
        // here we just skip over them (re-checking their shape).
        if let Some(TokKind::Ident(kw)) = parser.peek_kind() {
            if kw == "prop" || kw == "static" {
                let ok = (|| -> ClauseResult<()> {
                    parser.pos += 1;
                    parser.expect_ident("a predicate name")?;
                    parser.expect(TokKind::Slash, "`/` before the arity")?;
                    match parser.next() {
                        Some(Tok {
                            kind: TokKind::Nat(_),
                            ..
                        }) => {}
                        _ => {
                            parser.pos -= 1;
                            parser.error_here("expected an arity");
                            return Err(());
                        }
                    }
                    parser.expect(TokKind::Dot, "`.` ending the declaration")?;
                    Ok(())
                })();
                if ok.is_err() {
                    parser.recover();
                }
                continue;
            }
        }

        let clause = parse_clause(&mut parser, &mut ordinal, &mut labels);
        match clause {
            Ok(Clause::Fact(lit, span)) => {
                add_fact(&mut program, lit, span, &mut parser.diags);
            }
            Ok(Clause::Rule(rule)) => {
                validate_rule_structure(&rule, &mut parser.diags);
                program.rules.push(rule);
            }
            Err(()) => parser.recover(),
        }
    }

    let diags = parser.diags;
    if diags.iter().any(ParseDiagnostic::is_error) {
        return Err(diags);
    }
    program.canonicalize();
    Ok(program)
}

enum Clause {
    Fact(Literal, Span),
    Rule(Rule),
}

fn parse_clause(
    parser: &mut Parser<'_>,
    ordinal: &mut usize,
    labels: &mut BTreeSet<String>,
) -> ClauseResult<Clause> {
    let clause_span = parser.here();

    let explicit_label = if parser.peek_kind() == Some(&TokKind::At) {
        parser.pos += 1;
        let (name, span) = parser.expect_ident("a rule label")?;
        Some((name, span))
    } else {
        None
    };

    // Body: `true`, or a comma-separated conjunction.
    let mut body = Vec::new();
    let mut empty_body = false;
    if let Some(TokKind::Ident(kw)) = parser.peek_kind() {
        if kw == "true" {
            parser.pos += 1;
            empty_body = true;
        }
    }
    if !empty_body {
        loop {
            body.push(parser.parse_body_literal()?);
            if parser.peek_kind() == Some(&TokKind::Comma) {
                parser.pos += 1;
            } else {
                break;
            }
        }
    }

    let kind_tok = parser.peek_kind().cloned();
    match kind_tok {
        Some(TokKind::Dot) if !empty_body => {
            parser.pos += 1;
            if body.len() != 1 || body[0].naf {
                parser.diags.push(ParseDiagnostic::error(
                    "a fact is a single literal; expected `=>` or `:` after a conjunction",
                    clause_span,
                ));
                return Err(());
            }
            if let Some((_, span)) = explicit_label {
                parser
                    .diags
                    .push(ParseDiagnostic::error("facts cannot carry labels", span));
                return Err(());
            }
            Ok(Clause::Fact(body.remove(0).literal, clause_span))
        }
        Some(TokKind::Arrow) | Some(TokKind::Colon) => {
            let is_implication = kind_tok == Some(TokKind::Arrow);
            parser.pos += 1;
            let head = parser.parse_literal()?;
            let constraint = if !is_implication && parser.peek_kind() == Some(&TokKind::LBracket) {
                parser.pos += 1;
                let c = parser.parse_literal()?;
                parser.expect(TokKind::RBracket, "`]` closing the constraint")?;
                Some(c)
            } else {
                None
            };
            parser.expect(TokKind::Dot, "`.` ending the rule")?;
            *ordinal += 1;
            let label = match explicit_label {
                Some((name, span)) => {
                    if !labels.insert(name.clone()) {
                        parser.diags.push(ParseDiagnostic::error(
                            format!("duplicate rule label `{name}`"),
                            span,
                        ));
                    }
                    name
                }
                None => {
                    let name = format!("r{ordinal}");
                    labels.insert(name.clone());
                    name
                }
            };
            let kind = if is_implication {
                RuleKind::Implication
            } else if constraint.is_some() {
                RuleKind::SemiNormalDefault
            } else {
                RuleKind::NormalDefault
            };
            Ok(Clause::Rule(Rule {
                kind,
                label,
                body,
                head,
                constraint,
                span: clause_span,
            }))
        }
        _ => {
            parser.error_here("expected `.`, `=>` or `:`");
            Err(())
        }
    }
}

fn add_fact(program: &mut Program, lit: Literal, span: Span, diags: &mut Vec<ParseDiagnostic>) {
    match &lit.atom {
        Atom::Modal { .. } => {
            if !lit.is_ground() {
                diags.push(ParseDiagnostic::error(
                    "facts must be ground (only incompatible schemas may contain variables)",
                    span,
                ));
                return;
            }
            program.facts.push(lit);
        }
        Atom::Static { predicate, args } => {
            if lit.sign == Sign::Negative {
                diags.push(ParseDiagnostic::error(
                    "static facts must be positive",
                    span,
                ));
                return;
            }
            let has_prop_var = args.iter().any(|a| {
                fn prop_has_var(p: &Property) -> bool {
                    match p {
                        Property::Variable(_) => true,
                        Property::Combine(base, _) => prop_has_var(base),
                        Property::Atomic(_) => false,
                    }
                }
                matches!(a, Arg::Property(p) if prop_has_var(p))
            });
            if has_prop_var {
                diags.push(ParseDiagnostic::error(
                    "property variables are not allowed in facts",
                    span,
                ));
                return;
            }
            if !lit.is_ground() && predicate != "incompatible" {
                diags.push(ParseDiagnostic::error(
                    "facts must be ground (only incompatible schemas may contain variables)",
                    span,
                ));
                return;
            }
            program.static_facts.push(lit);
        }
    }
}

/// Parses a fixture file: ground fact clauses only, in file order (the
/// clause order drives state segmentation). Predicate sorts resolve against
/// the given context programs' declarations plus the built-in statics.
pub fn parse_fixture(
    text: &str,
    contexts: &[&Program],
) -> Result<Vec<(Literal, Span)>, Vec<ParseDiagnostic>> {
    let toks = lex(text)?;
    let mut table = DeclTable::default();
    for context in contexts {
        for d in &context.declarations {
            match &d.kind {
                DeclKind::Prop { name, arity } => {
                    table.props.insert(name.clone(), *arity);
                }
                DeclKind::Static { name, arity } => {
                    table.statics.insert(name.clone(), *arity);
                }
            }
        }
    }
    let mut parser = Parser {
        toks: &toks,
        pos: 0,
        decls: &table,
        diags: Vec::new(),
        eof_span: Span { line: 1, column: 1 },
    };
    let mut facts = Vec::new();
    while parser.peek().is_some() {
        if let Some(TokKind::Ident(kw)) = parser.peek_kind() {
            if kw == "prop" || kw == "static" || kw == "true" {
                parser.error_here("fixture files contain ground facts only");
                parser.recover();
                continue;
            }
        }
        let span = parser.here();
        let clause = (|p: &mut Parser<'_>| -> ClauseResult<Literal> {
            if p.peek_kind() == Some(&TokKind::At) {
                p.error_here("fixture files contain ground facts only, not rules");
                return Err(());
            }
            let lit = p.parse_literal()?;
            match p.peek_kind() {
                Some(TokKind::Dot) => {
                    p.pos += 1;
                    Ok(lit)
                }
                _ => {
                    p.error_here("fixture files contain ground facts only, not rules");
                    Err(())
                }
            }
        })(&mut parser);
        match clause {
            Ok(lit) => {
                if !lit.is_ground() {
                    parser
                        .diags
                        .push(ParseDiagnostic::error("fixture facts must be ground", span));
                } else if matches!(&lit.atom, Atom::Static { .. }) && lit.sign == Sign::Negative {
                    parser.diags.push(ParseDiagnostic::error(
                        "static facts must be positive",
                        span,
                    ));
                } else {
                    facts.push((lit, span));
                }
            }
            Err(()) => parser.recover(),
        }
    }
    if parser.diags.iter().any(ParseDiagnostic::is_error) {
        Err(parser.diags)
    } else {
        Ok(facts)
    }
}

/// Parses a single literal (variables allowed) against a program's
/// declarations; used for query patterns and `explain` arguments.
pub fn parse_literal(text: &str, context: &Program) -> Result<Literal, Vec<ParseDiagnostic>> {
    let toks = lex(text)?;
    let mut table = DeclTable::default();
    for d in &context.declarations {
        match &d.kind {
            DeclKind::Prop { name, arity } => {
                table.props.insert(name.clone(), *arity);
            }
            DeclKind::Static { name, arity } => {
                table.statics.insert(name.clone(), *arity);
            }
        }
    }
    let mut parser = Parser {
        toks: &toks,
        pos: 0,
        decls: &table,
        diags: Vec::new(),
        eof_span: Span { line: 1, column: 1 },
    };
    let lit = parser.parse_literal();
    if parser.peek_kind() == Some(&TokKind::Dot) {
        parser.pos += 1;
    }
    if parser.peek().is_some() {
        parser.error_here("unexpected trailing input after the literal");
    }
    match (lit, parser.diags) {
        (Ok(l), diags) if !diags.iter().any(ParseDiagnostic::is_error) => Ok(l),
        (_, diags) => Err(diags),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::term::{cst, var};

    const HEADER: &str = "prop stop/0. prop bump/1. prop shock/1. prop shock_pos/1. \
                          prop follow/1. prop control/0.\n";

    fn parse_ok(text: &str) -> Program {
        match parse_program(text) {
            Ok(p) => p,
            Err(diags) => panic!("unexpected diagnostics: {diags:?}"),
        }
    }

    #[test]
    fn parses_the_bump_implication() {
        let p = parse_ok(&format!(
            "{HEADER}holds(combine(bump,V), W, T) => -holds(stop, W, T)."
        ));
        assert_eq!(p.rules.len(), 1);
        let r = &p.rules[0];
        assert_eq!(r.kind, RuleKind::Implication);
        assert_eq!(r.label, "r1");
        assert_eq!(
            r.head,
            Literal::negative(Atom::holds(Property::atomic("stop"), var("w"), var("t")))
        );
        assert_eq!(r.body.len(), 1);
    }

    #[test]
    fn parses_a_semi_normal_rule_with_shifted_constraint() {
        // A rule variant concluding at T-1: the parser represents exactly
        // what is written.
        let p = parse_ok(&format!(
            "{HEADER}holds(combine(shock,V),W,T), holds(combine(shock_pos,V),back,T) : \
             holds(combine(follow,V),W,T-1) [holds(control,W,T-1)]."
        ));
        let r = &p.rules[0];
        assert_eq!(r.kind, RuleKind::SemiNormalDefault);
        assert_eq!(
            r.constraint,
            Some(Literal::positive(Atom::holds(
                Property::atomic("control"),
                var("w"),
                Term::StateOffset {
                    var: "t".into(),
                    offset: -1
                },
            )))
        );
        assert_eq!(r.body.len(), 2);
    }

    #[test]
    fn empty_input_gives_an_empty_program() {
        let p = parse_ok("");
        assert!(p.facts.is_empty());
        assert!(p.rules.is_empty());
        assert!(p.declarations.is_empty());
    }

    #[test]
    fn malformed_clause_yields_one_spanned_error() {
        let diags = parse_program("prop stop/0.\nholds(stop, A.").unwrap_err();
        assert_eq!(diags.len(), 1);
        assert_eq!(diags[0].span.line, 2);
        assert_eq!(diags[0].span.column, 14);
        assert!(diags[0].message.contains("`.`"));
    }

    #[test]
    fn facts_with_variables_are_rejected_except_incompatible_schemas() {
        let err = parse_program(&format!("{HEADER}holds(stop, V, 1).")).unwrap_err();
        assert!(err[0].message.contains("ground"));

        let p = parse_ok(&format!("{HEADER}incompatible(stop, combine(bump, V))."));
        assert_eq!(p.static_facts.len(), 1);
        assert!(!p.static_facts[0].is_ground());
        assert_eq!(p.schema_facts().count(), 1);
    }

    #[test]
    fn range_restriction_is_enforced() {
        let err =
            parse_program(&format!("{HEADER}holds(stop, V, T) => holds(stop, W, T).")).unwrap_err();
        assert!(err[0].message.contains("range-restricted"));
        assert!(err[0].message.contains('W'));
    }

    #[test]
    fn undeclared_predicates_are_reported() {
        let err = parse_program("holds(stop, a, 1).").unwrap_err();
        assert!(err[0].message.contains("undeclared property `stop`"));
        let err = parse_program("mystery(a, b).").unwrap_err();
        assert!(err[0].message.contains("undeclared static predicate"));
    }

    #[test]
    fn arity_mismatches_are_reported() {
        let err = parse_program("prop stop/0.\nholds(combine(stop, a), b, 1).").unwrap_err();
        assert!(err[0].message.contains("arity 0"));
        let err = parse_program("action(brake, stop).").unwrap_err();
        assert!(err[0].message.contains("takes 1 argument(s)"));
    }

    #[test]
    fn naf_body_literals_parse_and_never_bind() {
        let p =
            parse_ok("prop stop/0.\nmust(stop, V, T), not able_to(stop, V, T) => an(V, T, stop).");
        assert!(p.rules[0].body[1].naf);
        // A NAF literal introducing a fresh variable is not range-restricted.
        let err = parse_program(
            "prop stop/0.\nmust(stop, V, T), not able_to(stop, W, T) => an(V, T, stop).",
        )
        .unwrap_err();
        assert!(err[0].message.contains("range-restricted"));
    }

    #[test]
    fn prerequisite_free_defaults_use_true() {
        let p = parse_ok("prop a/0.\ntrue : holds(a, x, 1).\ntrue : -holds(a, x, 1).");
        assert_eq!(p.rules.len(), 2);
        assert!(p.rules[0].body.is_empty());
        assert_eq!(p.rules[0].kind, RuleKind::NormalDefault);
        assert_eq!(p.rules[1].head.sign, Sign::Negative);
    }

    #[test]
    fn labels_are_user_assignable_and_unique() {
        let p = parse_ok("prop a/0.\n@mine true : holds(a, x, 1).");
        assert_eq!(p.rules[0].label, "mine");
        let err = parse_program("prop a/0.\n@m true : holds(a, x, 1).\n@m true : -holds(a, x, 1).")
            .unwrap_err();
        assert!(err[0].message.contains("duplicate rule label"));
    }

    #[test]
    fn fact_order_is_canonical() {
        let a = parse_ok(&format!("{HEADER}holds(stop, b, 2).\nholds(stop, a, 1).\n"));
        let b = parse_ok(&format!("{HEADER}holds(stop, a, 1).\nholds(stop, b, 2).\n"));
        assert_eq!(a, b);
    }

    #[test]
    fn parse_literal_resolves_sorts_from_context() {
        let p = parse_ok(HEADER);
        let lit = parse_literal("must(stop, X, T)", &p).unwrap();
        assert_eq!(
            lit,
            Literal::positive(Atom::modal(
                Modality::Must,
                Property::atomic("stop"),
                var("x"),
                var("t"),
            ))
        );
        let lit = parse_literal("an(a, 1, stop)", &p).unwrap();
        assert_eq!(
            lit,
            Literal::positive(Atom::stat(
                "an",
                [
                    Arg::Term(cst("a")),
                    Arg::Term(Term::State(1)),
                    Arg::Property(Property::atomic("stop")),
                ]
                .into(),
            ))
        );
    }

    #[test]
    fn comments_and_case_are_normalized() {
        let p = parse_ok("prop stop/0. % trailing comment\nholds(stop, a_CAR, 1).");
        assert_eq!(
            p.facts[0],
            Literal::positive(Atom::holds(
                Property::atomic("stop"),
                cst("a_car"),
                Term::State(1)
            ))
        );
    }
}
