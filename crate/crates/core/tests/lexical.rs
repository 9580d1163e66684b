mod common;

use std::collections::BTreeSet;

use proptest::prelude::*;
use reformir::prf::{relevance_model, rm3_expand, FeedbackSet, WeightedQuery};
use reformir::text::porter::stem;
use reformir::text::{AnalyzerConfig, Bm25Params, Document, Index};

use common::{bm25_closed_form, three_doc_index};

#[test]
fn porter_matches_reference_fixture() {
    let fixture = include_str!("fixtures/porter.tsv");
    let mut mismatches = Vec::new();
    for line in fixture.lines() {
        let (word, want) = line.split_once('\t').unwrap();
        let got = stem(word);
        if got != want {
            mismatches.push(format!("{word}: {got} != {want}"));
        }
    }
    assert!(mismatches.is_empty(), "{} mismatches: {:?}", mismatches.len(), &mismatches[..mismatches.len().min(20)]);
}

#[test]
fn analyzer_pipeline_order() {
    let cfg = AnalyzerConfig::plain()
        .with_stopwords(BTreeSet::from(["the".to_string()]));
    assert_eq!(cfg.tokenize("The cat, the CAT!"), ["cat", "cat"]);
    let stemmed = AnalyzerConfig::plain().with_stemming(true);
    assert_eq!(stemmed.tokenize("running runner"), [stem("running"), stem("runner")]);
    // stopwords are matched before stemming
    let cfg = AnalyzerConfig::plain()
        .with_stemming(true)
        .with_stopwords(BTreeSet::from(["running".to_string()]));
    assert_eq!(cfg.tokenize("running runs"), ["run"]);
}

#[test]
fn bm25_three_doc_corpus() {
    let index = three_doc_index();
    let avgdl = 7.0 / 3.0;
    for (term, doc, df, tf, dl) in [
        ("a", "d1", 2.0, 1.0, 2.0),
        ("a", "d2", 2.0, 2.0, 3.0),
        ("c", "d3", 2.0, 1.0, 2.0),
        ("b", "d1", 1.0, 1.0, 2.0),
    ] {
        let got = index.bm25_term(term, doc).unwrap();
        let want = bm25_closed_form(3.0, df, tf, dl, avgdl);
        assert!((got - want).abs() < 1e-12, "{term}/{doc}: {got} vs {want}");
    }
    assert_eq!(index.bm25_term("zzz", "d1").unwrap(), 0.0);
    assert!(index.bm25_term("a", "nope").is_err());
}

#[test]
fn search_ties_break_on_doc_id() {
    let index = Index::build(
        [Document::new("b", "x"), Document::new("a", "x"), Document::new("c", "y")],
        AnalyzerConfig::plain(),
        Bm25Params::default(),
    )
    .unwrap();
    let list = index.search("q", "x", 10);
    assert_eq!(list.doc_ids().collect::<Vec<_>>(), ["a", "b"]);
}

#[test]
fn rm3_interpolation() {
    let index = Index::build(
        [Document::new("dx", "x x y"), Document::new("dz", "z")],
        AnalyzerConfig::plain(),
        Bm25Params::default(),
    )
    .unwrap();
    let model = relevance_model(&index, &FeedbackSet::new(vec![("dx".into(), 1.0)]).unwrap(), 10).unwrap();
    let original = WeightedQuery::from_terms(&["x".to_string(), "q".to_string()]);
    let expanded = rm3_expand(&original, &model, 0.3);
    assert!((expanded.weight("x") - (0.3 * 0.5 + 0.7 * 2.0 / 3.0)).abs() < 1e-12);
    assert!((expanded.weight("q") - 0.15).abs() < 1e-12);
    assert!((expanded.weight("y") - 0.7 / 3.0).abs() < 1e-12);
    assert!((expanded.total_weight() - 1.0).abs() < 1e-12);
}

proptest! {
    #[test]
    fn bm25_is_nonnegative_and_additive(
        docs in proptest::collection::vec(proptest::collection::vec(0u8..6, 1..12), 1..15),
        query in proptest::collection::vec(0u8..8, 1..5),
    ) {
        let word = |t: u8| format!("t{t}");
        let index = Index::build(
            docs.iter().enumerate().map(|(i, d)| {
                Document::new(format!("d{i:02}"), d.iter().map(|&t| word(t)).collect::<Vec<_>>().join(" "))
            }),
            AnalyzerConfig::plain(),
            Bm25Params::default(),
        ).unwrap();
        let terms: Vec<String> = query.iter().map(|&t| word(t)).collect();
        let dense = index.score_all(&terms);
        for (i, &s) in dense.iter().enumerate() {
            let id = format!("d{i:02}");
            prop_assert!(s >= 0.0);
            let sum: f64 = terms.iter().map(|t| index.bm25_term(t, &id).unwrap()).sum();
            prop_assert!((s - sum).abs() < 1e-9);
        }
    }

    #[test]
    fn stems_never_grow_and_keep_the_first_letter(word in "[a-z]{1,12}") {
        let once = stem(&word);
        prop_assert!(once.len() <= word.len());
        prop_assert!(word.starts_with(&once[..once.len().min(1)]));
    }
}
