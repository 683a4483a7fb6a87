mod common;

use std::collections::HashMap;

use kgqa_core::classifier::GeneralizationLevel;
use kgqa_core::dataset::{AnswerSet, QuestionRecord};
use kgqa_core::metrics::{evaluate, question_prf, PredictionRecord};
use proptest::prelude::*;

const TOL: f64 = 1e-9;

#[test]
fn fixture_per_question_values() {
    let (gold, preds, levels) = common::fixture_inputs();
    let report = evaluate(&gold, &preds, &levels).unwrap();
    for (score, &(p, r, f1, hits)) in report.questions.iter().zip(&common::FIXTURE_PRF) {
        assert!((score.prf.precision - p).abs() < TOL, "{}", score.question_id);
        assert!((score.prf.recall - r).abs() < TOL, "{}", score.question_id);
        assert!((score.prf.f1 - f1).abs() < TOL, "{}", score.question_id);
        assert_eq!(score.hits_at_1.map(f64::from), hits, "{}", score.question_id);
    }
}

#[test]
fn fixture_level_values() {
    let (gold, preds, levels) = common::fixture_inputs();
    let report = evaluate(&gold, &preds, &levels).unwrap();
    let got = [&report.overall, &report.iid, &report.compositional, &report.zero_shot];
    for (m, &(p, r, f1, h, c, pa, inc)) in got.iter().zip(&common::FIXTURE_LEVELS) {
        assert!((m.precision - p).abs() < TOL);
        assert!((m.recall - r).abs() < TOL);
        assert!((m.f1 - f1).abs() < TOL);
        assert!((m.hits_at_1.unwrap() - h).abs() < TOL);
        assert_eq!((m.correct, m.partial, m.incorrect), (c, pa, inc));
    }
    assert!(report.decomposition_error() < TOL);
}

fn answers() -> impl Strategy<Value = Vec<String>> {
    prop::collection::vec(prop::sample::select(vec!["a", "b", "c", "d", "e"]).prop_map(String::from), 0..4)
}

fn case() -> impl Strategy<Value = Vec<(Vec<String>, Vec<String>, bool, u8)>> {
    prop::collection::vec((answers(), answers(), any::<bool>(), 0..3u8), 1..20)
}

fn inputs(
    cases: &[(Vec<String>, Vec<String>, bool, u8)],
) -> (Vec<QuestionRecord>, Vec<PredictionRecord>, HashMap<String, GeneralizationLevel>) {
    let mut gold = Vec::new();
    let mut preds = Vec::new();
    let mut levels = HashMap::new();
    for (i, (g, p, ranked, level)) in cases.iter().enumerate() {
        let id = format!("q{i}");
        let mut r = QuestionRecord::new(id.clone(), "", "ASK {}");
        r.answers = Some(AnswerSet::new(g));
        gold.push(r);
        preds.push(PredictionRecord {
            question_id: id.clone(),
            answers: p.clone(),
            ranked: *ranked,
        });
        levels.insert(id, GeneralizationLevel::ALL[*level as usize]);
    }
    (gold, preds, levels)
}

proptest! {
    #[test]
    fn prediction_order_is_irrelevant(cases in case()) {
        let (gold, mut preds, levels) = inputs(&cases);
        let a = evaluate(&gold, &preds, &levels).unwrap();
        preds.reverse();
        let b = evaluate(&gold, &preds, &levels).unwrap();
        prop_assert_eq!(a, b);
    }

    #[test]
    fn overall_decomposes_into_levels(cases in case()) {
        let (gold, preds, levels) = inputs(&cases);
        let report = evaluate(&gold, &preds, &levels).unwrap();
        prop_assert!(report.decomposition_error() < TOL);
        for m in [&report.overall, &report.iid, &report.compositional, &report.zero_shot] {
            for v in [m.precision, m.recall, m.f1, m.hits_at_1.unwrap_or(0.0)] {
                prop_assert!((0.0..=1.0).contains(&v));
            }
        }
    }

    #[test]
    fn adding_a_gold_answer_never_lowers_recall(g in answers(), p in answers()) {
        let gold = AnswerSet::new(&g);
        let Some(extra) = g.first() else { return Ok(()) };
        let before = question_prf(&gold, &AnswerSet::new(&p)).recall;
        let mut more = p.clone();
        more.push(extra.clone());
        let after = question_prf(&gold, &AnswerSet::new(&more)).recall;
        prop_assert!(after >= before);
    }
}
