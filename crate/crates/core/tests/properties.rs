mod common;

use std::sync::OnceLock;

use clssmt::grammar::{delayout, enumerate_words, layout, member, Term, TreeGrammar};
use clssmt::inhabitation::{inhabit, inhabit_pruned, prune, InhabitationRequest};
use clssmt::repository::{parse_repository, Repository};
use clssmt::smt::{assign_tables, translate_grammar, CombinatorTable, TranslateOptions};
use clssmt::types::{apply_substitution, parse_type, paths, subtype, Substitution, Taxonomy, Type};
use common::*;
use proptest::prelude::*;

fn atom() -> impl Strategy<Value = Type> {
    prop::sample::select(vec!["a", "b", "c", "d"]).prop_map(Type::constant)
}

/// Closed types over four atoms, nesting depth at most four.
fn closed_type() -> impl Strategy<Value = Type> {
    atom().prop_recursive(3, 24, 3, |inner| {
        prop_oneof![
            (inner.clone(), inner.clone()).prop_map(|(a, b)| Type::arrow(a, b)),
            (inner.clone(), inner.clone()).prop_map(|(a, b)| Type::intersection(a, b)),
            inner.clone().prop_map(|a| Type::constructor("L", vec![a])),
            (inner.clone(), inner).prop_map(|(a, b)| Type::constructor("P", vec![a, b])),
        ]
    })
}

fn open_type() -> impl Strategy<Value = Type> {
    let leaf = prop_oneof![atom(), prop::sample::select(vec!["'x", "'y"]).prop_map(Type::variable)];
    leaf.prop_recursive(3, 16, 2, |inner| {
        prop_oneof![
            (inner.clone(), inner.clone()).prop_map(|(a, b)| Type::arrow(a, b)),
            (inner.clone(), inner.clone()).prop_map(|(a, b)| Type::intersection(a, b)),
            inner.prop_map(|a| Type::constructor("L", vec![a])),
        ]
    })
}

fn taxonomy() -> impl Strategy<Value = Taxonomy> {
    prop_oneof![
        Just(Taxonomy::default()),
        Just(Taxonomy::new([("a".to_string(), "b".to_string())])),
        Just(Taxonomy::new([
            ("a".to_string(), "b".to_string()),
            ("b".to_string(), "c".to_string())
        ])),
    ]
}

fn le(a: &Type, b: &Type, t: &Taxonomy) -> bool {
    subtype(a, b, t).unwrap()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(1000))]

    #[test]
    fn subtype_is_reflexive(a in closed_type(), t in taxonomy()) {
        prop_assert!(le(&a, &a, &t));
    }

    #[test]
    fn subtype_is_transitive(a in closed_type(), b in closed_type(), c in closed_type(), t in taxonomy()) {
        // Chains built by construction, so the antecedent holds.
        let ab = Type::intersection(a.clone(), b.clone());
        let abc = Type::intersection(ab.clone(), c.clone());
        prop_assert!(le(&abc, &ab, &t) && le(&ab, &a, &t) && le(&abc, &a, &t));
        if le(&a, &b, &t) && le(&b, &c, &t) {
            prop_assert!(le(&a, &c, &t));
        }
    }

    #[test]
    fn intersection_is_a_lower_bound(a in closed_type(), b in closed_type(), t in taxonomy()) {
        let ab = Type::intersection(a.clone(), b.clone());
        prop_assert!(le(&ab, &a, &t));
        prop_assert!(le(&ab, &b, &t));
        // and the greatest one
        prop_assert!(le(&ab, &Type::intersection(b.clone(), a.clone()), &t));
    }

    #[test]
    fn arrows_are_contravariant_and_covariant(
        a1 in closed_type(), extra in closed_type(), b1 in closed_type(), wider in closed_type(), t in taxonomy()
    ) {
        let a2 = Type::intersection(a1.clone(), extra);
        let b2 = b1.clone();
        let b1 = Type::intersection(b1, wider);
        prop_assert!(le(&a2, &a1, &t) && le(&b1, &b2, &t));
        prop_assert!(le(&Type::arrow(a1, b1), &Type::arrow(a2, b2), &t));
    }

    #[test]
    fn arrows_distribute_over_intersection(a in closed_type(), b in closed_type(), c in closed_type(), t in taxonomy()) {
        let split = Type::intersection(Type::arrow(a.clone(), b.clone()), Type::arrow(a.clone(), c.clone()));
        let joined = Type::arrow(a, Type::intersection(b, c));
        prop_assert!(le(&split, &joined, &t));
        prop_assert!(le(&joined, &split, &t));
    }

    #[test]
    fn constructors_are_covariant(a in closed_type(), b in closed_type(), t in taxonomy()) {
        let narrow = Type::intersection(a.clone(), b);
        prop_assert!(le(&Type::constructor("L", vec![narrow]), &Type::constructor("L", vec![a]), &t));
    }

    #[test]
    fn canonical_forms_are_equivalent(a in closed_type(), t in taxonomy()) {
        let c = a.canonical();
        prop_assert!(le(&a, &c, &t) && le(&c, &a, &t));
        prop_assert_eq!(c.canonical(), c.clone());
        prop_assert_eq!(parse_type(&c.to_string()).unwrap().canonical(), c);
    }

    #[test]
    fn printed_types_reparse(a in closed_type()) {
        prop_assert_eq!(parse_type(&a.to_string()).unwrap(), a);
    }

    #[test]
    fn substitution_commutes_with_canonical(t in open_type(), x in closed_type(), y in closed_type()) {
        let s = Substitution::from_pairs([("'x".to_string(), x), ("'y".to_string(), y)]).unwrap();
        let direct = apply_substitution(&s, &t).unwrap();
        let via = apply_substitution(&s, &t.canonical()).unwrap();
        prop_assert_eq!(direct.canonical(), via.canonical());
        prop_assert!(direct.is_closed());
    }

    #[test]
    fn paths_reassemble_to_an_equivalent_type(a in closed_type()) {
        // Zero-ary paths are the components.
        let zero: Vec<Type> = paths(&a, 0).into_iter().map(|p| p.target).collect();
        let back = Type::intersect_all(zero);
        let t = Taxonomy::default();
        prop_assert!(le(&a, &back, &t) && le(&back, &a, &t));
        // Every unary path is a supertype of the type itself.
        for p in paths(&a, 1) {
            prop_assert!(le(&a, &Type::arrow(p.sources[0].clone(), p.target.clone()), &t));
        }
    }
}

// ---------------------------------------------------------------------------
// Agreement with the saturation oracle, sampled. The acceptance suite checks
// every pair.

fn oracle(tax: bool) -> &'static BcdOracle {
    static PLAIN: OnceLock<BcdOracle> = OnceLock::new();
    static WITH_TAX: OnceLock<BcdOracle> = OnceLock::new();
    if tax {
        WITH_TAX.get_or_init(|| BcdOracle::standard(&Taxonomy::new([("a".into(), "b".into())])))
    } else {
        PLAIN.get_or_init(|| BcdOracle::standard(&Taxonomy::default()))
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(2000))]

    #[test]
    fn subtype_agrees_with_saturation(i in 0usize..1_000_000, j in 0usize..1_000_000, tax in any::<bool>()) {
        let o = oracle(tax);
        let (i, j) = (i % o.len(), j % o.len());
        let t = if tax { Taxonomy::new([("a".into(), "b".into())]) } else { Taxonomy::default() };
        prop_assert_eq!(
            le(&o.universe[i], &o.universe[j], &t),
            o.leq(i, j),
            "{} <= {}", o.universe[i], o.universe[j]
        );
    }
}

// ---------------------------------------------------------------------------
// Terms and grammars

fn term_strategy() -> impl Strategy<Value = Term> {
    let leaf = prop::sample::select(vec!["f", "g", "h", "x", "y"]).prop_map(Term::leaf);
    leaf.prop_recursive(6, 40, 3, |inner| {
        (prop::sample::select(vec!["f", "g", "h", "x", "y"]), prop::collection::vec(inner, 1..=3))
            .prop_map(|(c, args)| Term::apply(c, args))
    })
}

fn table() -> CombinatorTable {
    CombinatorTable::from_names(["f", "g", "h", "x", "y"])
}

fn grammar_strategy() -> impl Strategy<Value = TreeGrammar> {
    let nts = ["A", "B", "C", "D"];
    let rule = (
        prop::sample::select(nts.to_vec()),
        prop::sample::select(vec!["f", "g", "h"]),
        prop::collection::vec(prop::sample::select(nts.to_vec()), 0..=2),
    );
    prop::collection::vec(rule, 0..10).prop_map(move |rules| {
        let mut g = TreeGrammar::empty("A");
        for nt in nts {
            g.rules.entry(nt.to_string()).or_default();
        }
        for (lhs, c, args) in rules {
            g.add_rule(lhs, clssmt::Rule::new(c, args.into_iter().map(String::from).collect()));
        }
        g
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(1000))]

    #[test]
    fn layout_round_trips(t in term_strategy()) {
        let l = layout(&t, &table()).unwrap();
        prop_assert_eq!(delayout(&l, &table()).unwrap(), t.clone());
        prop_assert_eq!(l.assignments.len(), 2 * t.size() - 1);
        prop_assert_eq!(Term::parse(&t.to_sexpr()).unwrap(), t.clone());
        prop_assert_eq!(Term::parse(&t.to_string()).unwrap(), t);
    }

    #[test]
    fn grammar_json_round_trips(g in grammar_strategy()) {
        prop_assert_eq!(TreeGrammar::from_json(&g.to_json()).unwrap(), g);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(200))]

    #[test]
    fn enumeration_is_sound_and_prefix_stable(g in grammar_strategy(), d in 1u32..4) {
        let small = enumerate_words(&g, "A", d, usize::MAX).unwrap();
        let large = enumerate_words(&g, "A", d + 1, usize::MAX).unwrap();
        for w in &small {
            prop_assert!(member(&g, "A", w).unwrap());
            prop_assert!(w.layout_depth() <= d);
        }
        let prefix: Vec<&Term> = large.iter().filter(|w| w.layout_depth() <= d).collect();
        prop_assert_eq!(prefix, small.iter().collect::<Vec<_>>());
        let limited = enumerate_words(&g, "A", d + 1, 3).unwrap();
        prop_assert_eq!(&limited[..], &large[..large.len().min(3)]);
    }

    #[test]
    fn pruning_keeps_the_language(g in grammar_strategy()) {
        let p = prune(&g);
        let before = enumerate_words(&g, "A", 3, usize::MAX).unwrap();
        let after = if p.rules.contains_key("A") {
            enumerate_words(&p, "A", 3, usize::MAX).unwrap()
        } else {
            Vec::new()
        };
        prop_assert_eq!(before, after);
        prop_assert_eq!(prune(&p), p);
    }

    #[test]
    fn scripts_are_deterministic(g in grammar_strategy(), d in 1u32..3) {
        let tables = assign_tables(&g, None).unwrap();
        let a = translate_grammar(&g, "A", &tables, &TranslateOptions::finitized(d)).unwrap().render();
        let b = translate_grammar(&g, "A", &tables, &TranslateOptions::finitized(d)).unwrap().render();
        prop_assert_eq!(a, b);
    }
}

// ---------------------------------------------------------------------------
// Repositories and inhabitation

proptest! {
    #![proptest_config(ProptestConfig::with_cases(300))]

    #[test]
    fn repository_round_trips(seed in any::<u64>()) {
        let inst = random_instance(seed, 4);
        let text = inst.repo.to_string();
        let parsed = parse_repository(&text).unwrap();
        prop_assert_eq!(&parsed, &inst.repo);
        prop_assert_eq!(parse_repository(&parsed.to_string()).unwrap(), parsed);
    }

    #[test]
    fn substitution_count_is_a_product(seed in any::<u64>()) {
        let inst = random_instance(seed, 4);
        for c in &inst.repo.combinators {
            let expected: usize = c.ty.variables().iter().map(|v| inst.repo.variable_kinds[v].len()).product();
            prop_assert_eq!(clssmt::repository::substitutions(&inst.repo, &c.name).unwrap().len(), expected);
        }
    }

    #[test]
    fn every_rule_has_a_typing_witness(seed in any::<u64>()) {
        let inst = random_instance(seed, 3);
        let g = inhabit(&InhabitationRequest { repo: &inst.repo, goal: inst.goal.clone() }).unwrap();
        for (lhs, alts) in &g.rules {
            let lhs_ty = parse_type(lhs).unwrap();
            for rule in alts {
                prop_assert!(rule_is_witnessed(&inst.repo, &lhs_ty, rule), "{lhs} ↦ {rule}");
            }
        }
    }

    #[test]
    fn grammar_words_are_exactly_the_typed_terms(seed in any::<u64>()) {
        let inst = random_instance(seed, 3);
        let oracle = TypingOracle::new(&inst.repo);
        let Some(candidates) = oracle.typeable_terms(4, 4000) else {
            return Ok(());
        };
        let typed: Vec<Term> = candidates.into_iter().filter(|t| oracle.has_type(t, &inst.goal)).collect();
        let g = inhabit_pruned(&InhabitationRequest { repo: &inst.repo, goal: inst.goal.clone() }).unwrap();
        let words = if g.rules.contains_key(&g.start) {
            enumerate_words(&g, &g.start, 4, usize::MAX).unwrap()
        } else {
            Vec::new()
        };
        let typed: std::collections::BTreeSet<Term> = typed.into_iter().collect();
        let words: std::collections::BTreeSet<Term> = words.into_iter().collect();
        prop_assert_eq!(words, typed, "repository:\n{}goal: {}", inst.repo, inst.goal);
    }
}

/// Independent check of one rule: the paths of `c` that accept the argument
/// nonterminals as sources have targets whose intersection is below `lhs`.
fn rule_is_witnessed(repo: &Repository, lhs: &Type, rule: &clssmt::Rule) -> bool {
    let tax = &repo.taxonomy;
    let args: Vec<Type> = rule.args.iter().map(|a| parse_type(a).unwrap()).collect();
    let applicable: Vec<Type> = repo
        .instances(&rule.combinator)
        .unwrap()
        .iter()
        .flat_map(|t| paths(t, args.len()))
        .filter(|p| p.sources.iter().zip(&args).all(|(s, a)| subtype(a, s, tax).unwrap()))
        .map(|p| p.target)
        .collect();
    !applicable.is_empty() && subtype(&Type::intersect_all(applicable), lhs, tax).unwrap()
}
