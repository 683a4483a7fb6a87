//! Per-question and per-level answer metrics: macro Precision, Recall, F1
//! and Hits@1.

use std::collections::{HashMap, HashSet};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::classifier::GeneralizationLevel;
use crate::dataset::{AnswerSet, QuestionRecord};

#[derive(Debug, Error)]
pub enum MetricsError {
    #[error("prediction for unknown question id '{0}'")]
    UnknownQuestionId(String),
    #[error("more than one prediction for question id '{0}'")]
    DuplicatePrediction(String),
    #[error("no generalization level assigned to question '{0}'")]
    MissingLevel(String),
    #[error("predictions line {line}: {message}")]
    Line { line: usize, message: String },
}

fn default_ranked() -> bool {
    true
}

/// One line of a predictions file. `answers[0]` is the top-ranked answer
/// unless `ranked` is false.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PredictionRecord {
    pub question_id: String,
    pub answers: Vec<String>,
    #[serde(default = "default_ranked")]
    pub ranked: bool,
}

/// Parse JSONL predictions; blank lines are skipped.
pub fn load_predictions(bytes: &[u8]) -> Result<Vec<PredictionRecord>, MetricsError> {
    let text = String::from_utf8_lossy(bytes);
    let mut out = Vec::new();
    for (i, line) in text.lines().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let p = serde_json::from_str(line).map_err(|e| MetricsError::Line {
            line: i + 1,
            message: e.to_string(),
        })?;
        out.push(p);
    }
    Ok(out)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Prf {
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
}

/// Set-overlap P/R/F1. Both sets empty scores `(1, 1, 1)`.
pub fn question_prf(gold: &AnswerSet, pred: &AnswerSet) -> Prf {
    if gold.is_empty() && pred.is_empty() {
        return Prf {
            precision: 1.0,
            recall: 1.0,
            f1: 1.0,
        };
    }
    let hit = pred.values.intersection(&gold.values).count() as f64;
    let precision = if pred.is_empty() { 0.0 } else { hit / pred.len() as f64 };
    let recall = if gold.is_empty() { 0.0 } else { hit / gold.len() as f64 };
    let f1 = if precision + recall == 0.0 {
        0.0
    } else {
        2.0 * precision * recall / (precision + recall)
    };
    Prf { precision, recall, f1 }
}

/// 1 iff `ranked[0]` is a gold answer.
pub fn hits_at_1(gold: &AnswerSet, ranked: &[String]) -> u8 {
    match ranked.first() {
        Some(top) if gold.contains(top) => 1,
        _ => 0,
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Outcome {
    Correct,
    Partial,
    Incorrect,
}

impl Outcome {
    pub fn of(f1: f64) -> Self {
        if f1 >= 1.0 {
            Outcome::Correct
        } else if f1 > 0.0 {
            Outcome::Partial
        } else {
            Outcome::Incorrect
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QuestionScore {
    pub question_id: String,
    pub level: GeneralizationLevel,
    #[serde(flatten)]
    pub prf: Prf,
    /// `None` when the prediction is marked unranked.
    pub hits_at_1: Option<u8>,
    pub outcome: Outcome,
}

/// Macro averages over one group of questions; all zero for an empty group.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct LevelMetrics {
    pub questions: usize,
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
    /// Mean over questions with a ranked prediction; `None` if there are none.
    pub hits_at_1: Option<f64>,
    pub hits_evaluated: usize,
    pub correct: usize,
    pub partial: usize,
    pub incorrect: usize,
}

impl LevelMetrics {
    fn of<'a>(scores: impl IntoIterator<Item = &'a QuestionScore>) -> Self {
        let mut m = LevelMetrics::default();
        let mut hits = 0.0;
        for s in scores {
            m.questions += 1;
            m.precision += s.prf.precision;
            m.recall += s.prf.recall;
            m.f1 += s.prf.f1;
            if let Some(h) = s.hits_at_1 {
                m.hits_evaluated += 1;
                hits += f64::from(h);
            }
            match s.outcome {
                Outcome::Correct => m.correct += 1,
                Outcome::Partial => m.partial += 1,
                Outcome::Incorrect => m.incorrect += 1,
            }
        }
        if m.questions > 0 {
            let n = m.questions as f64;
            m.precision /= n;
            m.recall /= n;
            m.f1 /= n;
        }
        if m.hits_evaluated > 0 {
            m.hits_at_1 = Some(hits / m.hits_evaluated as f64);
        }
        m
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub overall: LevelMetrics,
    pub iid: LevelMetrics,
    pub compositional: LevelMetrics,
    pub zero_shot: LevelMetrics,
    /// Gold records without answers; not scored.
    pub skipped_no_gold: usize,
    pub questions: Vec<QuestionScore>,
}

impl EvalReport {
    pub fn level(&self, level: GeneralizationLevel) -> &LevelMetrics {
        match level {
            GeneralizationLevel::Iid => &self.iid,
            GeneralizationLevel::Compositional => &self.compositional,
            GeneralizationLevel::ZeroShot => &self.zero_shot,
        }
    }

    /// Largest gap between an overall metric and the count-weighted mean of
    /// the three level metrics. Zero up to rounding on every report.
    pub fn decomposition_error(&self) -> f64 {
        let levels = GeneralizationLevel::ALL.map(|l| self.level(l));
        let weighted = |f: &dyn Fn(&LevelMetrics) -> f64, w: &dyn Fn(&LevelMetrics) -> usize, total: usize| {
            if total == 0 {
                0.0
            } else {
                levels.iter().map(|m| f(m) * w(m) as f64).sum::<f64>() / total as f64
            }
        };
        let n = self.overall.questions;
        let q = |m: &LevelMetrics| m.questions;
        let mut err: f64 = 0.0;
        err = err.max((self.overall.precision - weighted(&|m| m.precision, &q, n)).abs());
        err = err.max((self.overall.recall - weighted(&|m| m.recall, &q, n)).abs());
        err = err.max((self.overall.f1 - weighted(&|m| m.f1, &q, n)).abs());
        let h = self.overall.hits_evaluated;
        let hits = weighted(&|m| m.hits_at_1.unwrap_or(0.0), &|m| m.hits_evaluated, h);
        err = err.max((self.overall.hits_at_1.unwrap_or(0.0) - hits).abs());
        let counts = |f: &dyn Fn(&LevelMetrics) -> usize| levels.iter().map(|m| f(m)).sum::<usize>();
        if counts(&|m| m.questions) != n
            || counts(&|m| m.correct) != self.overall.correct
            || counts(&|m| m.partial) != self.overall.partial
            || counts(&|m| m.incorrect) != self.overall.incorrect
        {
            return f64::INFINITY;
        }
        err
    }

    pub fn to_json_pretty(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("report serializes");
        s.push('\n');
        s
    }

    /// Aligned table: P, R, F1, Hits@1 for Overall and each level, in
    /// percent, followed by outcome counts.
    pub fn to_table(&self) -> String {
        let groups: [(&str, &LevelMetrics); 4] = [
            ("Overall", &self.overall),
            ("I.I.D.", &self.iid),
            ("Compositional", &self.compositional),
            ("Zero-Shot", &self.zero_shot),
        ];
        let mut head1 = String::new();
        let mut head2 = String::new();
        let mut row = String::new();
        for (name, m) in groups {
            head1.push_str(&format!("| {name:<29} "));
            head2.push_str(&format!("| {:>6} {:>6} {:>6} {:>8} ", "P", "R", "F1", "Hits@1"));
            let hits = m
                .hits_at_1
                .map(|h| format!("{:.2}", 100.0 * h))
                .unwrap_or_else(|| "n/a".into());
            row.push_str(&format!(
                "| {:>6.2} {:>6.2} {:>6.2} {:>8} ",
                100.0 * m.precision,
                100.0 * m.recall,
                100.0 * m.f1,
                hits
            ));
        }
        let mut out = format!("{head1}|\n{head2}|\n{row}|\n\n");
        out.push_str(&format!(
            "{:<15} {:>9} {:>9} {:>9} {:>9}\n",
            "level", "questions", "correct", "partial", "incorrect"
        ));
        for (name, m) in groups {
            out.push_str(&format!(
                "{:<15} {:>9} {:>9} {:>9} {:>9}\n",
                name, m.questions, m.correct, m.partial, m.incorrect
            ));
        }
        if self.skipped_no_gold > 0 {
            out.push_str(&format!("skipped (no gold answers): {}\n", self.skipped_no_gold));
        }
        out
    }
}

/// Score `predictions` against the gold answers of `gold`, grouped by
/// `levels`. Missing predictions count as empty; gold records without an
/// answer set are skipped.
pub fn evaluate(
    gold: &[QuestionRecord],
    predictions: &[PredictionRecord],
    levels: &HashMap<String, GeneralizationLevel>,
) -> Result<EvalReport, MetricsError> {
    let gold_ids: HashSet<&str> = gold.iter().map(|r| r.id.as_str()).collect();
    let mut by_id: HashMap<&str, &PredictionRecord> = HashMap::new();
    for p in predictions {
        if !gold_ids.contains(p.question_id.as_str()) {
            return Err(MetricsError::UnknownQuestionId(p.question_id.clone()));
        }
        if by_id.insert(&p.question_id, p).is_some() {
            return Err(MetricsError::DuplicatePrediction(p.question_id.clone()));
        }
    }

    let mut scored = Vec::new();
    let mut skipped = 0;
    for r in gold {
        let Some(answers) = &r.answers else {
            skipped += 1;
            continue;
        };
        let level = *levels.get(&r.id).ok_or_else(|| MetricsError::MissingLevel(r.id.clone()))?;
        scored.push((r, answers, level));
    }

    let questions: Vec<QuestionScore> = scored
        .par_iter()
        .map(|&(r, answers, level)| {
            let pred = by_id.get(r.id.as_str());
            let pred_answers = pred.map(|p| p.answers.as_slice()).unwrap_or_default();
            let prf = question_prf(answers, &AnswerSet::new(pred_answers.iter().map(String::as_str)));
            let hits = match pred {
                Some(p) if !p.ranked => None,
                _ => Some(hits_at_1(answers, pred_answers)),
            };
            QuestionScore {
                question_id: r.id.clone(),
                level,
                prf,
                hits_at_1: hits,
                outcome: Outcome::of(prf.f1),
            }
        })
        .collect();

    let unranked = questions.iter().filter(|q| q.hits_at_1.is_none()).count();
    if unranked > 0 {
        tracing::warn!(unranked, "Hits@1 not applicable to unranked predictions");
    }
    let at = |l| LevelMetrics::of(questions.iter().filter(|q| q.level == l));
    Ok(EvalReport {
        overall: LevelMetrics::of(&questions),
        iid: at(GeneralizationLevel::Iid),
        compositional: at(GeneralizationLevel::Compositional),
        zero_shot: at(GeneralizationLevel::ZeroShot),
        skipped_no_gold: skipped,
        questions,
    })
}
