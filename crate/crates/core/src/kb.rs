//! The shipped knowledge bases: the car-crash domain rules and the
//! linguistic mapping rules, embedded at build time.

use crate::parser::parse_program;
use crate::program::Program;

/// The domain knowledge base (`crash.nkb`).
pub const CRASH_KB: &str = include_str!("../kb/crash.nkb");

/// The linguistic mapping knowledge base (`linguistic.nkb`).
pub const LINGUISTIC_KB: &str = include_str!("../kb/linguistic.nkb");

/// Parses the embedded domain KB. The content is static and covered by
/// tests; a parse failure here is a build defect.
pub fn domain_rules() -> Program {
    parse_program(CRASH_KB).expect("embedded crash.nkb must parse")
}

/// Parses the embedded linguistic mapping KB.
pub fn linguistic_rules() -> Program {
    parse_program(LINGUISTIC_KB).expect("embedded linguistic.nkb must parse")
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::printer::serialize_program;
    use crate::stratify::{check_constraints, compute_strata, dependency_graph};
    use crate::validate::validate_program;

    #[test]
    fn both_kbs_parse_validate_and_round_trip() {
        for kb in [domain_rules(), linguistic_rules()] {
            assert!(validate_program(&kb).iter().all(|d| !d.is_error()));
            let reparsed = parse_program(&serialize_program(&kb)).unwrap();
            assert_eq!(kb, reparsed);
        }
    }

    #[test]
    fn domain_kb_stratifies_with_zero_diagnostics() {
        let kb = domain_rules();
        let g = dependency_graph(&kb);
        let s = compute_strata(&g).expect("domain KB must stratify");
        assert!(check_constraints(&kb, &s).is_empty());
    }

    #[test]
    fn the_kbs_ship_at_least_twenty_five_rules() {
        let total = domain_rules().rules.len() + linguistic_rules().rules.len();
        assert!(total >= 25, "shipped rule count {total}");
    }

    #[test]
    fn availability_sits_first_in_the_capacity_layer() {
        use crate::stratify::{stratify, KeyModality, PredicateKey};
        let kb = domain_rules();
        let strata = stratify(&kb).unwrap();
        let available = PredicateKey::named(KeyModality::AbleTo, "available");
        let able_to_any = PredicateKey {
            modality: KeyModality::AbleTo,
            name: crate::stratify::KeyName::AnyProperty,
        };
        assert_eq!(strata.stratum_of(&available).map(|(_, s)| s), Some(1));
        let pa = strata.position(&available).unwrap();
        let pw = strata.position(&able_to_any).unwrap();
        assert!(pa < pw, "available must evaluate before able_to");
    }

    #[test]
    fn static_facts_sit_before_every_modal_stratum() {
        use crate::stratify::{key_of_literal, stratify};
        let kb = domain_rules();
        let strata = stratify(&kb).unwrap();
        let first_modal = kb
            .rules
            .iter()
            .map(|r| strata.position(&key_of_literal(&r.head)).unwrap())
            .min()
            .unwrap();
        for fact in &kb.static_facts {
            let pos = strata.position(&key_of_literal(fact)).unwrap();
            assert!(pos < first_modal, "{fact} placed after a rule head");
        }
    }

    #[test]
    fn only_kernel_properties_carry_duties() {
        let kb = domain_rules();
        let duty_heads: alloc::collections::BTreeSet<alloc::string::String> = kb
            .rules
            .iter()
            .filter_map(|r| match &r.head.atom {
                crate::term::Atom::Modal {
                    modality: crate::term::Modality::Must,
                    property,
                    ..
                } => property.base_name().map(alloc::borrow::ToOwned::to_owned),
                _ => None,
            })
            .collect();
        for name in duty_heads {
            assert!(
                crate::validate::KERNEL_PROPERTIES.contains(&name.as_str()),
                "{name} is not duty-eligible"
            );
        }
    }
}
