//! Property tests over generated terms, literals and programs.

use proptest::prelude::*;

use normengine_core::parser::parse_program;
use normengine_core::printer::serialize_program;
use normengine_core::term::{
    combine, complement, cst, var, Atom, Literal, Modality, Property, Sign, Substitution, Term,
};

fn name_strategy() -> impl Strategy<Value = String> {
    "[a-z][a-z0-9_]{0,6}".prop_filter("reserved", |s| {
        !matches!(
            s.as_str(),
            "prop" | "static" | "true" | "not" | "combine" | "holds" | "must" | "able_to"
        )
    })
}

fn term_strategy() -> impl Strategy<Value = Term> {
    prop_oneof![
        name_strategy().prop_map(Term::Constant),
        name_strategy().prop_map(Term::Variable),
        (1u32..5).prop_map(Term::State),
        (name_strategy(), prop_oneof![Just(-1i8), Just(1i8)])
            .prop_map(|(v, offset)| Term::StateOffset { var: v, offset }),
    ]
}

fn property_strategy() -> impl Strategy<Value = Property> {
    prop_oneof![
        name_strategy().prop_map(Property::Atomic),
        name_strategy().prop_map(Property::Variable),
        (name_strategy(), term_strategy())
            .prop_map(|(n, t)| combine(Property::Atomic(n), t).expect("depth 1")),
    ]
}

fn literal_strategy() -> impl Strategy<Value = Literal> {
    let modality = prop_oneof![
        Just(Modality::Holds),
        Just(Modality::Must),
        Just(Modality::AbleTo)
    ];
    (
        any::<bool>(),
        modality,
        property_strategy(),
        term_strategy(),
        term_strategy(),
    )
        .prop_map(|(neg, m, p, agent, state)| Literal {
            sign: if neg { Sign::Negative } else { Sign::Positive },
            atom: Atom::modal(m, p, agent, state),
        })
}

proptest! {
    #[test]
    fn complement_is_an_involution(lit in literal_strategy()) {
        let c = complement(&lit);
        prop_assert_eq!(c.atom.clone(), lit.atom.clone());
        prop_assert_ne!(c.sign, lit.sign);
        prop_assert_eq!(complement(&c), lit);
    }

    #[test]
    fn full_substitutions_ground_every_atom(lit in literal_strategy(), seed in 1u32..4) {
        let mut subst = Substitution::new();
        for v in lit.vars() {
            // States bind states; other sorts bind constants. Binding both
            // ways per sort usage is resolved by giving state-shaped terms a
            // state and everything else a constant; sort conflicts abort.
            subst.bind_term(v.clone(), Term::State(seed));
        }
        let needs_constants = matches!(
            &lit.atom,
            Atom::Modal { property, agent, .. }
                if !property.is_ground() || !agent.is_ground()
        );
        if needs_constants {
            // Re-bind everything as constants instead; state slots then
            // fail with a sort mismatch, which is also acceptable here.
            let mut alt = Substitution::new();
            for v in lit.vars() {
                alt.bind_term(v.clone(), cst("k"));
            }
            if let Ok(ground) = alt.apply_literal(&lit) {
                prop_assert!(ground.vars().is_empty());
            }
        }
        // Errors mean out-of-range state arithmetic or a property-sorted
        // variable; a successful application must be fully ground.
        if let Ok(ground) = subst.apply_literal(&lit) {
            prop_assert!(ground.vars().is_empty());
        }
    }
}

/// A generated program: declarations, ground facts, and rules of the three
/// kinds over a tiny vocabulary, rendered as source text.
fn program_text_strategy() -> impl Strategy<Value = String> {
    let lit = (any::<bool>(), 0usize..4, 0usize..2, 1u32..3)
        .prop_map(|(neg, p, a, t)| format!("{}holds(p{p}, x{a}, {t})", if neg { "-" } else { "" }));
    let body_lit = lit.clone();
    let rule = (
        proptest::collection::vec(body_lit, 0..3),
        lit.clone(),
        proptest::option::of(lit.clone()),
        any::<bool>(),
    )
        .prop_map(|(body, head, constraint, implication)| {
            let body = if body.is_empty() {
                "true".to_string()
            } else {
                body.join(", ")
            };
            match (implication, constraint) {
                (true, _) => format!("{body} => {head}."),
                (false, None) => format!("{body} : {head}."),
                (false, Some(c)) => format!("{body} : {head} [{c}]."),
            }
        });
    (
        proptest::collection::vec(lit, 0..4),
        proptest::collection::vec(rule, 0..5),
    )
        .prop_map(|(facts, rules)| {
            let mut text = String::from("prop p0/0. prop p1/0. prop p2/0. prop p3/0.\n");
            for f in facts {
                text.push_str(&f);
                text.push_str(".\n");
            }
            for r in rules {
                text.push_str(&r);
                text.push('\n');
            }
            text
        })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(128))]
    #[test]
    fn parse_serialize_is_the_identity_on_generated_programs(text in program_text_strategy()) {
        let program = parse_program(&text).expect("generated programs are valid");
        let serialized = serialize_program(&program);
        let reparsed = parse_program(&serialized).expect("canonical text parses");
        prop_assert_eq!(&program, &reparsed);
        // Serialization is idempotent.
        prop_assert_eq!(serialized, serialize_program(&reparsed));
    }
}

#[test]
fn var_display_round_trips_through_the_parser() {
    // Variables print with a leading capital and re-parse to the same name.
    let v = var("act2");
    assert_eq!(v.to_string(), "Act2");
    let p = parse_program(&format!(
        "prop stop/0.\nholds(stop, {v}, T) => holds(stop, {v}, T)."
    ))
    .unwrap();
    let rule = &p.rules[0];
    let mut vars = rule.head.vars();
    assert!(vars.remove("act2"));
}
