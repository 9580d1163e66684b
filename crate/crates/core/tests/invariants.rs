//! Property tests for the loop, the surrogate, fusion and the metrics.

mod common;

use std::collections::{BTreeSet, HashSet};

use proptest::prelude::*;
use reformir::baselines::rrf_fuse;
use reformir::eval::{ndcg_ids, recall_ids, Gain, Qrels};
use reformir::pool::{feature_labels, FeatureMatrix};
use reformir::reformir::{optimize, select_batch, LoopConfig, LoopInputs, NoText};
use reformir::surrogate::{Observation, SurrogateModel};
use reformir::teacher::{LinearTeacher, RecordingTeacher};
use reformir::text::RankedList;

fn matrix(rows: Vec<Vec<f64>>) -> FeatureMatrix {
    let m = rows[0].len() - 2;
    FeatureMatrix {
        doc_order: (0..rows.len()).map(|i| format!("d{i:03}")).collect(),
        rows,
        labels: feature_labels(m),
        standardization: None,
        rm3_missing: false,
    }
}

fn rows_strategy() -> impl Strategy<Value = Vec<Vec<f64>>> {
    (3usize..6).prop_flat_map(|dim| proptest::collection::vec(proptest::collection::vec(-3.0..3.0f64, dim), 1..80))
}

fn ranked(ids: &[String]) -> RankedList {
    RankedList::from_scores("q", ids.iter().enumerate().map(|(i, d)| (d.clone(), -(i as f64))).collect())
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn loop_spends_exactly_the_budget(rows in rows_strategy(), budget in 0usize..120, batch in 1usize..20, seed in 0u64..1000) {
        let n = rows.len();
        let dim = rows[0].len();
        let mut teacher = RecordingTeacher::new(LinearTeacher::new(vec![0.2; dim], 0.01, seed));
        let config = LoopConfig { budget, batch_size: batch, seed, rm3_refresh: false, ..LoopConfig::default() };
        let result = optimize(
            LoopInputs { query_id: "q", query: "orig", features: matrix(rows), texts: &NoText, refresher: None },
            &mut teacher,
            &config,
        );
        let expected = budget.min(n);
        prop_assert_eq!(result.teacher_evaluations(), expected);
        prop_assert_eq!(teacher.scored_docs(), expected);

        // trace covers every scored doc once, in scoring order
        let from_trace: Vec<&str> = result.trace.iter().flat_map(|t| t.selected.iter().map(String::as_str)).collect();
        let from_scored: Vec<&str> = result.scored.iter().map(|s| s.doc_id.as_str()).collect();
        prop_assert_eq!(&from_trace, &from_scored);
        let unique: HashSet<&str> = from_scored.iter().copied().collect();
        prop_assert_eq!(unique.len(), from_scored.len());
        for (i, t) in result.trace.iter().enumerate() {
            prop_assert_eq!(t.batch, i);
            prop_assert!(t.selected.len() <= batch && !t.selected.is_empty());
            if i + 1 < result.trace.len() {
                prop_assert_eq!(t.selected.len(), batch);
            }
            prop_assert!(t.mean_error.is_some_and(|e| e >= 0.0));
        }
        for call in teacher.calls() {
            prop_assert_eq!(call.query.as_str(), "orig");
        }
        // ranking is the scored set sorted by score then id
        for pair in result.ranking.windows(2) {
            prop_assert!(pair[0].score > pair[1].score || (pair[0].score == pair[1].score && pair[0].doc_id < pair[1].doc_id));
        }
    }

    #[test]
    fn batch_choice_ignores_positive_rescaling(scores in proptest::collection::vec(-5.0..5.0f64, 1..50), scale in 0.01..100.0f64, b in 1usize..10, remaining in 0usize..60) {
        let ids: Vec<String> = (0..scores.len()).map(|i| format!("d{i:02}")).collect();
        let plain: Vec<(&str, f64)> = ids.iter().map(String::as_str).zip(scores.iter().copied()).collect();
        let scaled: Vec<(&str, f64)> = plain.iter().map(|&(d, s)| (d, s * scale)).collect();
        let a = select_batch(&plain, b, remaining);
        prop_assert_eq!(a.len(), b.min(remaining).min(scores.len()));
        prop_assert_eq!(a, select_batch(&scaled, b, remaining));
    }

    #[test]
    fn refit_never_increases_training_loss(rows in rows_strategy(), seed in 0u64..1000, ridge in prop_oneof![Just(0.0), Just(1e-3), Just(1.0)]) {
        let dim = rows[0].len();
        let mut model = SurrogateModel::new(dim, ridge, seed);
        for (chunk_no, chunk) in rows.chunks(7).enumerate() {
            let batch: Vec<Observation> = chunk.iter().enumerate().map(|(i, x)| Observation {
                doc_id: format!("{chunk_no}-{i}"),
                x: x.clone(),
                y: x.iter().sum::<f64>().sin(),
                batch: chunk_no,
            }).collect();
            let before = model.weights().to_vec();
            model.update(batch).unwrap();
            // the refit minimizes the loss over everything seen so far
            let tol = 1e-9 * (1.0 + model.training_loss(&before));
            prop_assert!(model.training_loss(model.weights()) <= model.training_loss(&before) + tol);
            prop_assert_eq!(model.refit(), model.weights().to_vec());
        }
    }

    #[test]
    fn rrf_is_order_invariant_and_covers_the_union(lists in proptest::collection::vec(proptest::collection::btree_set(0u8..30, 0..12), 1..6), rot in 0usize..6) {
        let lists: Vec<RankedList> = lists.iter().map(|s| {
            let mut v: Vec<String> = s.iter().map(|d| format!("d{d:02}")).collect();
            v.reverse();
            ranked(&v)
        }).collect();
        let mut rotated = lists.clone();
        rotated.rotate_left(rot % lists.len());
        rotated.reverse();
        let a = rrf_fuse(&lists, 60.0);
        let b = rrf_fuse(&rotated, 60.0);
        prop_assert_eq!(&a, &b);
        let union: BTreeSet<&str> = lists.iter().flat_map(|l| l.doc_ids()).collect();
        let fused: BTreeSet<&str> = a.doc_ids().collect();
        prop_assert_eq!(union, fused);
    }

    #[test]
    fn recall_grows_with_depth_and_ndcg_stays_in_unit_range(grades in proptest::collection::vec(0u32..4, 1..20), rot in 0usize..100) {
        let mut qrels = Qrels::new();
        let ids: Vec<String> = (0..grades.len()).map(|i| format!("d{i:02}")).collect();
        for (d, &g) in ids.iter().zip(&grades) {
            qrels.insert("q", d, g).unwrap();
        }
        let mut view: Vec<&str> = ids.iter().map(String::as_str).collect();
        let shift = rot % view.len();
        view.rotate_left(shift);
        let mut last = 0.0;
        for c in 1..=grades.len() + 2 {
            let Some(r) = recall_ids(&view, &qrels, "q", c, 1) else { return Ok(()) };
            prop_assert!(r >= last && r <= 1.0);
            last = r;
            let n = ndcg_ids(&view, &qrels, "q", c, Gain::Linear).unwrap();
            prop_assert!((0.0..=1.0 + 1e-12).contains(&n));
            let e = ndcg_ids(&view, &qrels, "q", c, Gain::Exponential).unwrap();
            prop_assert!((0.0..=1.0 + 1e-12).contains(&e));
        }
        prop_assert!((last - 1.0).abs() < 1e-12);
    }
}

#[test]
fn surrogate_is_linear_in_features() {
    let model = SurrogateModel::new(4, 1e-3, 9);
    let x = [0.3, -1.0, 2.0, 0.5];
    let y = [1.5, 0.2, -0.7, 0.0];
    let sum: Vec<f64> = x.iter().zip(&y).map(|(a, b)| 2.0 * a + b).collect();
    let lhs = model.utility(&sum).unwrap();
    let rhs = 2.0 * model.utility(&x).unwrap() + model.utility(&y).unwrap();
    assert!((lhs - rhs).abs() < 1e-12);
    assert!(model.utility(&[1.0]).is_err());
}

#[test]
fn duplicate_observations_are_rejected() {
    let mut model = SurrogateModel::new(2, 1e-3, 1);
    let obs = |id: &str| Observation { doc_id: id.into(), x: vec![1.0, 0.0], y: 0.5, batch: 0 };
    model.update(vec![obs("a")]).unwrap();
    assert!(model.update(vec![obs("a")]).is_err());
    assert!(model.update(vec![obs("b"), obs("b")]).is_err());
    assert_eq!(model.observations().len(), 1);
}
