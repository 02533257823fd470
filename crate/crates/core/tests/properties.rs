mod common;

use std::sync::Arc;

use proptest::prelude::*;
use stepwise_core::bleu::bleu_n;
use stepwise_core::grammar::enumerate_steps;
use stepwise_core::scoring::{
    ensemble_score, fluency_score, EnsembleConfig, HeuristicSaliency, SaliencyQuery, SaliencyScorer,
};
use stepwise_core::{
    evaluate_path, normalize_numeric_cell, parse_graph, parse_path, registry_default, serialize_graph, serialize_path,
    Graph, Numeric, PathNode, Triple, Value,
};

fn literal() -> impl Strategy<Value = PathNode> {
    prop::collection::vec("[a-z0-9.+-][a-z0-9_.+-]{0,5}", 1..=3)
        .prop_filter("all_rows is reserved", |ws| ws.join(" ") != "all_rows")
        .prop_map(|ws| PathNode::literal(ws.join(" ")))
}

fn leaf() -> impl Strategy<Value = PathNode> {
    prop_oneof![Just(PathNode::AllRows), literal()]
}

fn path() -> impl Strategy<Value = PathNode> {
    let node = leaf().prop_recursive(4, 24, 3, |inner| {
        ("[a-z_]{1,12}", prop::collection::vec(inner, 1..=3)).prop_map(|(m, args)| PathNode::apply(&m, args))
    });
    ("[a-z_]{1,12}", prop::collection::vec(node, 1..=3)).prop_map(|(m, args)| PathNode::apply(&m, args))
}

fn triple() -> impl Strategy<Value = Triple> {
    ("[A-Za-z0-9_.()]{1,10}", "[A-Za-z_]{1,10}", "[A-Za-z0-9_. ]{0,8}[A-Za-z0-9]")
        .prop_map(|(s, r, o)| Triple::new(&s, &r, &o).expect("non-empty fields"))
}

proptest! {
    #[test]
    fn path_text_round_trips(p in path()) {
        let text = serialize_path(&p);
        prop_assert_eq!(parse_path(&text).unwrap(), p);
    }

    #[test]
    fn reparsing_is_a_fixed_point(p in path()) {
        let once = serialize_path(&parse_path(&serialize_path(&p)).unwrap());
        prop_assert_eq!(once, serialize_path(&p));
    }

    #[test]
    fn numeric_normalization_is_idempotent(raw in "[+$-]?[0-9,]{0,7}(\\.[0-9]{0,3})?%?|[0-9 +]{1,12}= ?[0-9]{1,4}|.{0,8}") {
        if let Numeric::Num(n) = normalize_numeric_cell(&raw) {
            prop_assert_eq!(normalize_numeric_cell(&n.to_string()), Numeric::Num(n));
        }
    }

    #[test]
    fn graph_text_round_trips(ts in prop::collection::vec(triple(), 0..6)) {
        let g = Graph::from_triples(ts);
        prop_assert_eq!(parse_graph(&serialize_graph(&g)).unwrap(), g);
    }

    #[test]
    fn graph_ignores_triple_order(ts in prop::collection::vec(triple(), 1..6)) {
        let forward = ts.iter().map(Triple::to_string).collect::<Vec<_>>().join("\n");
        let backward = ts.iter().rev().map(Triple::to_string).collect::<Vec<_>>().join(" # ");
        prop_assert_eq!(parse_graph(&forward).unwrap(), parse_graph(&backward).unwrap());
    }

    #[test]
    fn fluency_ignores_token_order(mut lps in prop::collection::vec(-20.0f64..=0.0, 1..20), seed in any::<u64>()) {
        let a = fluency_score(&lps).unwrap();
        prop_assert!(a > 0.0 && a <= 1.0);
        let k = (seed as usize) % lps.len();
        lps.rotate_left(k);
        lps.reverse();
        prop_assert!((fluency_score(&lps).unwrap() - a).abs() < 1e-12);
    }

    #[test]
    fn ensemble_is_bounded_and_monotone(alpha in 0.0f64..=1.0, sf in 0.0f64..=1.0, ssc in 0.0f64..=1.0, d in 0.0f64..=1.0) {
        let cfg = EnsembleConfig::new(alpha).unwrap();
        let s = ensemble_score(sf, ssc, &cfg);
        prop_assert!((0.0..=1.0).contains(&s));
        prop_assert!(ensemble_score((sf + d).min(1.0), ssc, &cfg) >= s - 1e-15);
        prop_assert!(ensemble_score(sf, (ssc + d).min(1.0), &cfg) >= s - 1e-15);
        prop_assert!((ensemble_score(sf, sf, &cfg) - sf).abs() < 1e-12);
    }

    #[test]
    fn bleu_is_a_probability(
        hyp in prop::collection::vec("[a-d]", 0..8),
        reference in prop::collection::vec("[a-d]", 1..8),
        n in 1usize..=4,
    ) {
        let b = bleu_n(&[hyp.join(" ")], &[vec![reference.join(" ")]], n).unwrap();
        prop_assert!((0.0..=1.0).contains(&b));
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn one_step_results_ignore_row_order(seed in any::<u64>()) {
        let reg = registry_default();
        let scorer = HeuristicSaliency::default();
        let mut rng = common::rng(seed);
        let t = common::random_table(&mut rng, 4, 6);
        let u = common::shuffled(&t, &mut rng);
        let root = Value::Table(Arc::clone(&t));
        for step in enumerate_steps(&PathNode::AllRows, &root, &t, &reg) {
            let p = step.graft(&PathNode::AllRows);
            prop_assert_eq!(evaluate_path(&t, &p, &reg), evaluate_path(&u, &p, &reg));
            let a = scorer.score(SaliencyQuery { table: &t, partial_path: &p }).unwrap();
            let b = scorer.score(SaliencyQuery { table: &u, partial_path: &p }).unwrap();
            prop_assert_eq!(a, b);
            prop_assert!((0.0..=1.0).contains(&a));
        }
    }
}
