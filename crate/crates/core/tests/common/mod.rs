#![allow(dead_code)]

use std::collections::{BTreeSet, HashMap};

use kgqa_core::classifier::GeneralizationLevel;
use kgqa_core::dataset::{AnswerSet, Dataset, QuestionRecord};
use kgqa_core::metrics::PredictionRecord;
use kgqa_core::resplit::SplitMix64;

/// Naive level of `q` given the term sets of the training questions.
pub fn oracle_level(train: &[BTreeSet<String>], q: &BTreeSet<String>) -> GeneralizationLevel {
    let seen: BTreeSet<&String> = train.iter().flatten().collect();
    if q.iter().any(|t| !seen.contains(t)) {
        GeneralizationLevel::ZeroShot
    } else if train.contains(q) {
        GeneralizationLevel::Iid
    } else {
        GeneralizationLevel::Compositional
    }
}

/// A synthetic dataset whose group structure is known up front.
pub struct Synthetic {
    pub dataset: Dataset,
    /// Expected term set of every record, by id.
    pub terms: HashMap<String, BTreeSet<String>>,
    pub groups: usize,
}

/// `n` records in `groups` distinct term-set groups over a small shared
/// relation pool, so the three levels all occur. Some groups carry a term
/// of their own. Every group has at least one record.
pub fn synthetic(seed: u64, n: usize, groups: usize) -> Synthetic {
    assert!(groups <= n && groups < 255);
    let mut rng = SplitMix64::new(seed);
    let pool = 8u64;
    let group_terms: Vec<Vec<String>> = (0..groups)
        .map(|g| {
            let mask = g as u64 + 1;
            let mut t: Vec<String> = (0..pool)
                .filter(|b| mask & (1 << b) != 0)
                .map(|b| format!("dbo:r{b}"))
                .collect();
            if rng.below(4) == 0 {
                t.push(format!("dbo:own{g}"));
            }
            t
        })
        .collect();
    let mut assignment: Vec<usize> = (0..groups).collect();
    assignment.extend((groups..n).map(|_| rng.below(groups as u64) as usize));
    for i in (1..n).rev() {
        let j = rng.below(i as u64 + 1) as usize;
        assignment.swap(i, j);
    }
    let mut terms = HashMap::new();
    let records = assignment
        .iter()
        .enumerate()
        .map(|(i, &g)| {
            let triples: Vec<String> = group_terms[g]
                .iter()
                .enumerate()
                .map(|(k, rel)| format!("?x {rel} ?y{k}"))
                .collect();
            let query = format!("SELECT DISTINCT ?x WHERE {{ {} }}", triples.join(" . "));
            let id = format!("r{i}");
            terms.insert(id.clone(), group_terms[g].iter().cloned().collect());
            let mut r = QuestionRecord::new(id, format!("question {i}"), query);
            r.answers = Some(AnswerSet::new([format!("ans{}", g % 3)]));
            r
        })
        .collect();
    Synthetic {
        dataset: Dataset::new("synthetic", "dbpedia", records).unwrap(),
        terms,
        groups,
    }
}

pub struct FixtureQuestion {
    pub id: &'static str,
    pub level: GeneralizationLevel,
    pub gold: &'static [&'static str],
    /// `None`: no prediction line for this question.
    pub pred: Option<(&'static [&'static str], bool)>,
}

/// The 10-question metrics fixture.
pub const FIXTURE: [FixtureQuestion; 10] = {
    use GeneralizationLevel::*;
    [
        FixtureQuestion { id: "f1", level: Iid, gold: &["a"], pred: Some((&["a"], true)) },
        FixtureQuestion { id: "f2", level: Iid, gold: &["a", "b"], pred: Some((&["a"], true)) },
        FixtureQuestion { id: "f3", level: Iid, gold: &["a", "b", "c"], pred: Some((&["d", "a"], true)) },
        FixtureQuestion { id: "f4", level: Compositional, gold: &["a"], pred: None },
        FixtureQuestion { id: "f5", level: Compositional, gold: &[], pred: None },
        FixtureQuestion { id: "f6", level: Compositional, gold: &["x", "y"], pred: Some((&["y", "x"], false)) },
        FixtureQuestion { id: "f7", level: ZeroShot, gold: &["a", "b", "c", "d"], pred: Some((&["a", "b", "e"], true)) },
        FixtureQuestion { id: "f8", level: ZeroShot, gold: &["TRUE"], pred: Some((&["True"], true)) },
        FixtureQuestion { id: "f9", level: ZeroShot, gold: &["a"], pred: Some((&["b"], true)) },
        FixtureQuestion { id: "f10", level: ZeroShot, gold: &[], pred: Some((&["a"], true)) },
    ]
};

/// Per-question (P, R, F1, Hits@1), computed by hand with exact fractions.
pub const FIXTURE_PRF: [(f64, f64, f64, Option<f64>); 10] = [
    (1.0, 1.0, 1.0, Some(1.0)),
    (1.0, 0.5, 2.0 / 3.0, Some(1.0)),
    (0.5, 1.0 / 3.0, 0.4, Some(0.0)),
    (0.0, 0.0, 0.0, Some(0.0)),
    (1.0, 1.0, 1.0, Some(0.0)),
    (1.0, 1.0, 1.0, None),
    (2.0 / 3.0, 0.5, 4.0 / 7.0, Some(1.0)),
    (1.0, 1.0, 1.0, Some(1.0)),
    (0.0, 0.0, 0.0, Some(0.0)),
    (0.0, 0.0, 0.0, Some(0.0)),
];

/// Expected (P, R, F1, Hits@1, correct, partial, incorrect) for overall,
/// then i.i.d., compositional, zero-shot.
pub const FIXTURE_LEVELS: [(f64, f64, f64, f64, usize, usize, usize); 4] = [
    (37.0 / 60.0, 8.0 / 15.0, 296.0 / 525.0, 4.0 / 9.0, 4, 3, 3),
    (5.0 / 6.0, 11.0 / 18.0, 31.0 / 45.0, 2.0 / 3.0, 1, 2, 0),
    (2.0 / 3.0, 2.0 / 3.0, 2.0 / 3.0, 0.0, 2, 0, 1),
    (5.0 / 12.0, 3.0 / 8.0, 11.0 / 28.0, 0.5, 1, 1, 2),
];

pub fn fixture_inputs() -> (Vec<QuestionRecord>, Vec<PredictionRecord>, HashMap<String, GeneralizationLevel>) {
    let mut gold = Vec::new();
    let mut preds = Vec::new();
    let mut levels = HashMap::new();
    for q in &FIXTURE {
        let mut r = QuestionRecord::new(q.id, "", "ASK {}");
        r.answers = Some(AnswerSet::new(q.gold.iter().copied()));
        gold.push(r);
        levels.insert(q.id.to_string(), q.level);
        if let Some((answers, ranked)) = q.pred {
            preds.push(PredictionRecord {
                question_id: q.id.to_string(),
                answers: answers.iter().map(|s| s.to_string()).collect(),
                ranked,
            });
        }
    }
    (gold, preds, levels)
}
