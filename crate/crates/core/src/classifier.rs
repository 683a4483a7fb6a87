//! Generalization-level classification of test questions against a
//! training split.

use std::collections::{BTreeMap, HashMap, HashSet};
use std::fmt;
use std::str::FromStr;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::dataset::{QuestionRecord, FLAG_NO_QUERY};
use crate::sparql::{extract_terms, GroupKey, KgProfile, SchemaTermSet};

/// Ordered `Iid < Compositional < ZeroShot`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum GeneralizationLevel {
    #[serde(rename = "iid")]
    Iid,
    #[serde(rename = "compositional")]
    Compositional,
    #[serde(rename = "zero_shot")]
    ZeroShot,
}

impl GeneralizationLevel {
    pub const ALL: [GeneralizationLevel; 3] = [
        GeneralizationLevel::Iid,
        GeneralizationLevel::Compositional,
        GeneralizationLevel::ZeroShot,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            GeneralizationLevel::Iid => "iid",
            GeneralizationLevel::Compositional => "compositional",
            GeneralizationLevel::ZeroShot => "zero_shot",
        }
    }

    pub fn label(self) -> &'static str {
        match self {
            GeneralizationLevel::Iid => "I.I.D.",
            GeneralizationLevel::Compositional => "Compositional",
            GeneralizationLevel::ZeroShot => "Zero-Shot",
        }
    }
}

impl fmt::Display for GeneralizationLevel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for GeneralizationLevel {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().replace('-', "_").as_str() {
            "iid" | "i.i.d." => Ok(GeneralizationLevel::Iid),
            "compositional" | "compo" => Ok(GeneralizationLevel::Compositional),
            "zero_shot" | "zeroshot" | "zero" => Ok(GeneralizationLevel::ZeroShot),
            _ => Err(format!("unknown generalization level '{s}'")),
        }
    }
}

#[derive(Debug, Error)]
pub enum ClassifyError {
    #[error("no classifiable record in the test set ({excluded} excluded)")]
    EmptyTestSet { excluded: usize },
}

/// Schema terms seen in training plus the dictionary of seen term tuples.
/// Group ids are assigned in insertion order, starting at 0.
#[derive(Debug, Clone, Default)]
pub struct TrainIndex {
    term_set: HashSet<String>,
    group_dict: HashMap<GroupKey, usize>,
}

impl TrainIndex {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn from_term_sets<'a>(sets: impl IntoIterator<Item = &'a SchemaTermSet>) -> Self {
        let mut index = Self::new();
        for s in sets {
            index.insert(s);
        }
        index
    }

    /// Add one training question's terms; returns its group id.
    pub fn insert(&mut self, terms: &SchemaTermSet) -> usize {
        for t in terms {
            if !self.term_set.contains(t) {
                self.term_set.insert(t.clone());
            }
        }
        let next = self.group_dict.len();
        *self.group_dict.entry(terms.canonical_key()).or_insert(next)
    }

    pub fn term_set(&self) -> &HashSet<String> {
        &self.term_set
    }

    pub fn group_dict(&self) -> &HashMap<GroupKey, usize> {
        &self.group_dict
    }

    pub fn group_id(&self, key: &GroupKey) -> Option<usize> {
        self.group_dict.get(key).copied()
    }

    pub fn contains_term(&self, term: &str) -> bool {
        self.term_set.contains(term)
    }

    pub fn is_empty(&self) -> bool {
        self.group_dict.is_empty()
    }
}

/// Level of one question: i.i.d. if its term tuple was seen in training,
/// otherwise zero-shot if any single term is unseen, else compositional.
pub fn determine_level(q_terms: &SchemaTermSet, index: &TrainIndex) -> GeneralizationLevel {
    determine_level_keyed(q_terms, &q_terms.canonical_key(), index)
}

fn determine_level_keyed(q_terms: &SchemaTermSet, key: &GroupKey, index: &TrainIndex) -> GeneralizationLevel {
    if index.group_dict.contains_key(key) {
        return GeneralizationLevel::Iid;
    }
    if q_terms.iter().any(|t| !index.term_set.contains(t)) {
        GeneralizationLevel::ZeroShot
    } else {
        GeneralizationLevel::Compositional
    }
}

/// A record together with its extracted terms and group key.
#[derive(Debug, Clone, PartialEq)]
pub struct AnalyzedRecord {
    pub record: QuestionRecord,
    pub terms: SchemaTermSet,
    pub key: GroupKey,
}

impl AnalyzedRecord {
    pub fn id(&self) -> &str {
        &self.record.id
    }

    pub fn level_against(&self, index: &TrainIndex) -> GeneralizationLevel {
        determine_level_keyed(&self.terms, &self.key, index)
    }
}

/// A record that cannot take part in classification.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ExcludedRecord {
    pub id: String,
    pub reason: String,
}

/// Extract terms for every record, in parallel. Output order follows input
/// order; records without a query or with an unlexable one are excluded.
pub fn analyze(records: &[QuestionRecord], profile: &KgProfile) -> (Vec<AnalyzedRecord>, Vec<ExcludedRecord>) {
    let results: Vec<Result<AnalyzedRecord, ExcludedRecord>> = records
        .par_iter()
        .map(|r| analyze_one(r, profile))
        .collect();
    let mut ok = Vec::with_capacity(results.len());
    let mut excluded = Vec::new();
    for res in results {
        match res {
            Ok(a) => ok.push(a),
            Err(e) => excluded.push(e),
        }
    }
    (ok, excluded)
}

fn analyze_one(r: &QuestionRecord, profile: &KgProfile) -> Result<AnalyzedRecord, ExcludedRecord> {
    if r.logical_form.trim().is_empty() || r.is_flagged(FLAG_NO_QUERY) {
        return Err(ExcludedRecord {
            id: r.id.clone(),
            reason: "no SPARQL query".into(),
        });
    }
    match extract_terms(&r.logical_form, profile) {
        Ok(terms) => Ok(AnalyzedRecord {
            record: r.clone(),
            key: terms.canonical_key(),
            terms,
        }),
        Err(e) => Err(ExcludedRecord {
            id: r.id.clone(),
            reason: e.to_string(),
        }),
    }
}

/// Index over the classifiable training records, in input order.
pub fn build_index(train_records: &[QuestionRecord], profile: &KgProfile) -> TrainIndex {
    let (analyzed, _) = analyze(train_records, profile);
    index_of(&analyzed)
}

pub fn index_of(analyzed: &[AnalyzedRecord]) -> TrainIndex {
    TrainIndex::from_term_sets(analyzed.iter().map(|a| &a.terms))
}

/// Test records partitioned by level.
#[derive(Debug, Clone)]
pub struct LevelSplit<T> {
    pub zero: Vec<T>,
    pub compo: Vec<T>,
    pub iid: Vec<T>,
    pub excluded: Vec<ExcludedRecord>,
}

impl<T> Default for LevelSplit<T> {
    fn default() -> Self {
        Self {
            zero: Vec::new(),
            compo: Vec::new(),
            iid: Vec::new(),
            excluded: Vec::new(),
        }
    }
}

impl<T> LevelSplit<T> {
    pub fn get(&self, level: GeneralizationLevel) -> &[T] {
        match level {
            GeneralizationLevel::Iid => &self.iid,
            GeneralizationLevel::Compositional => &self.compo,
            GeneralizationLevel::ZeroShot => &self.zero,
        }
    }

    pub fn classified(&self) -> usize {
        self.zero.len() + self.compo.len() + self.iid.len()
    }
}

/// Classify already-analysed test records against `index`.
pub fn split_analyzed(test: Vec<AnalyzedRecord>, index: &TrainIndex) -> LevelSplit<AnalyzedRecord> {
    let mut out = LevelSplit::default();
    for a in test {
        match a.level_against(index) {
            GeneralizationLevel::ZeroShot => out.zero.push(a),
            GeneralizationLevel::Compositional => out.compo.push(a),
            GeneralizationLevel::Iid => out.iid.push(a),
        }
    }
    out
}

/// Partition `test_records` by level relative to `train_records`,
/// preserving input order within each level.
pub fn level_split(
    test_records: &[QuestionRecord],
    train_records: &[QuestionRecord],
    profile: &KgProfile,
) -> LevelSplit<QuestionRecord> {
    let index = build_index(train_records, profile);
    let (test, excluded) = analyze(test_records, profile);
    let split = split_analyzed(test, &index);
    let unwrap = |v: Vec<AnalyzedRecord>| v.into_iter().map(|a| a.record).collect();
    LevelSplit {
        zero: unwrap(split.zero),
        compo: unwrap(split.compo),
        iid: unwrap(split.iid),
        excluded,
    }
}

/// Per-record labels (`None` for excluded records), in input order.
pub fn classify(
    test_records: &[QuestionRecord],
    train_records: &[QuestionRecord],
    profile: &KgProfile,
) -> Vec<(String, Result<GeneralizationLevel, ExcludedRecord>)> {
    let index = build_index(train_records, profile);
    test_records
        .par_iter()
        .map(|r| {
            let label = analyze_one(r, profile).map(|a| a.level_against(&index));
            (r.id.clone(), label)
        })
        .collect()
}

/// Counts and shares of the three levels over the classifiable test records.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LevelStats {
    pub counts: BTreeMap<GeneralizationLevel, usize>,
    pub percentages: BTreeMap<GeneralizationLevel, f64>,
    pub classified: usize,
    pub excluded: usize,
}

impl LevelStats {
    pub fn from_counts(iid: usize, compo: usize, zero: usize, excluded: usize) -> Result<Self, ClassifyError> {
        let total = iid + compo + zero;
        if total == 0 {
            return Err(ClassifyError::EmptyTestSet { excluded });
        }
        let counts: BTreeMap<_, _> = [
            (GeneralizationLevel::Iid, iid),
            (GeneralizationLevel::Compositional, compo),
            (GeneralizationLevel::ZeroShot, zero),
        ]
        .into_iter()
        .collect();
        let percentages = counts
            .iter()
            .map(|(&l, &c)| (l, c as f64 / total as f64))
            .collect();
        Ok(Self {
            counts,
            percentages,
            classified: total,
            excluded,
        })
    }

    pub fn count(&self, level: GeneralizationLevel) -> usize {
        self.counts.get(&level).copied().unwrap_or(0)
    }

    pub fn fraction(&self, level: GeneralizationLevel) -> f64 {
        self.percentages.get(&level).copied().unwrap_or(0.0)
    }

    /// `level,count,percent` with percent in 0..100, two decimals.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("level,count,percent\n");
        for level in GeneralizationLevel::ALL {
            out.push_str(&format!(
                "{},{},{:.2}\n",
                level,
                self.count(level),
                100.0 * self.fraction(level)
            ));
        }
        out.push_str(&format!("excluded,{},\n", self.excluded));
        out
    }

    pub fn to_table(&self) -> String {
        let mut out = format!("{:<15} {:>7} {:>9}\n", "level", "count", "percent");
        for level in GeneralizationLevel::ALL {
            out.push_str(&format!(
                "{:<15} {:>7} {:>8.2}%\n",
                level.label(),
                self.count(level),
                100.0 * self.fraction(level)
            ));
        }
        out.push_str(&format!("{:<15} {:>7}\n", "classified", self.classified));
        out.push_str(&format!("{:<15} {:>7}\n", "excluded", self.excluded));
        out
    }
}

pub fn stats(
    test_records: &[QuestionRecord],
    train_records: &[QuestionRecord],
    profile: &KgProfile,
) -> Result<LevelStats, ClassifyError> {
    let split = level_split(test_records, train_records, profile);
    LevelStats::from_counts(split.iid.len(), split.compo.len(), split.zero.len(), split.excluded.len())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn set(terms: &[&str]) -> SchemaTermSet {
        SchemaTermSet::new(terms.iter().copied()).unwrap()
    }

    fn rec(id: &str, q: &str) -> QuestionRecord {
        QuestionRecord::new(id, "", q)
    }

    const COUNTRIES: &str =
        "SELECT (COUNT(DISTINCT ?country) AS ?result) WHERE { ?country wdt:P31 wd:Q6256. ?country wdt:P30 wd:Q49. }";

    #[test]
    fn index_of_worked_example() {
        let idx = build_index(&[rec("1", COUNTRIES)], &KgProfile::wikidata());
        assert_eq!(idx.group_dict().len(), 1);
        assert_eq!(idx.group_id(&set(&["COUNT", "wdt:P30", "wdt:P31"]).canonical_key()), Some(0));
        assert_eq!(idx.term_set().len(), 3);
    }

    #[test]
    fn empty_and_duplicate_training() {
        assert!(build_index(&[], &KgProfile::wikidata()).is_empty());
        let idx = build_index(&[rec("1", COUNTRIES), rec("2", COUNTRIES)], &KgProfile::wikidata());
        assert_eq!(idx.group_dict().len(), 1);
    }

    #[test]
    fn group_ids_follow_insertion_order() {
        let mut idx = TrainIndex::new();
        assert_eq!(idx.insert(&set(&["b"])), 0);
        assert_eq!(idx.insert(&set(&["a"])), 1);
        assert_eq!(idx.insert(&set(&["b"])), 0);
        assert_eq!(idx.insert(&set(&[])), 2);
    }

    #[test]
    fn three_branches() {
        let idx = TrainIndex::from_term_sets([&set(&["COUNT", "wdt:P30", "wdt:P31"])]);
        assert_eq!(
            determine_level(&set(&["COUNT", "wdt:P30", "wdt:P31"]), &idx),
            GeneralizationLevel::Iid
        );
        assert_eq!(determine_level(&set(&["wdt:P30", "wdt:P31"]), &idx), GeneralizationLevel::Compositional);
        assert_eq!(determine_level(&set(&["wdt:P30", "wdt:P999"]), &idx), GeneralizationLevel::ZeroShot);
    }

    #[test]
    fn empty_term_sets() {
        let idx = TrainIndex::from_term_sets([&set(&["a"])]);
        assert_eq!(determine_level(&set(&[]), &idx), GeneralizationLevel::Compositional);
        let idx = TrainIndex::from_term_sets([&set(&[])]);
        assert_eq!(determine_level(&set(&[]), &idx), GeneralizationLevel::Iid);
    }

    #[test]
    fn level_order() {
        assert!(GeneralizationLevel::ZeroShot > GeneralizationLevel::Compositional);
        assert!(GeneralizationLevel::Compositional > GeneralizationLevel::Iid);
    }

    #[test]
    fn split_and_stats() {
        let p = KgProfile::dbpedia();
        let train = vec![
            rec("t1", "ASK { ?x dbo:a ?y }"),
            rec("t2", "ASK { ?x dbo:b ?y }"),
        ];
        let test = vec![
            rec("q1", "ASK { ?x dbo:a ?y }"),
            rec("q2", "ASK { ?x dbo:a ?y . ?y dbo:b ?z }"),
            rec("q3", "ASK { ?x dbo:c ?y }"),
            rec("q4", "ASK { ?x dbo:a ?y"),
            rec("q5", ""),
        ];
        let split = level_split(&test, &train, &p);
        assert_eq!(split.iid.len(), 1);
        assert_eq!(split.compo[0].id, "q2");
        assert_eq!(split.zero[0].id, "q3");
        assert_eq!(split.excluded.len(), 2);

        let s = stats(&test, &train, &p).unwrap();
        assert_eq!(s.classified, 3);
        assert_eq!(s.excluded, 2);
        let sum: f64 = s.percentages.values().sum();
        assert!((sum - 1.0).abs() < 1e-9);
        assert!(s.to_csv().starts_with("level,count,percent\niid,1,33.33\n"));
    }

    #[test]
    fn test_equals_train_is_all_iid() {
        let p = KgProfile::dbpedia();
        let train = vec![rec("1", "ASK { ?x dbo:a ?y }"), rec("2", "SELECT ?x WHERE { ?x dbo:b ?y FILTER(?y > 3) }")];
        let s = stats(&train, &train, &p).unwrap();
        assert_eq!(s.fraction(GeneralizationLevel::Iid), 1.0);
        assert_eq!(s.fraction(GeneralizationLevel::ZeroShot), 0.0);
    }

    #[test]
    fn empty_test_set_is_an_error() {
        let p = KgProfile::dbpedia();
        assert!(matches!(
            stats(&[rec("x", "")], &[], &p),
            Err(ClassifyError::EmptyTestSet { excluded: 1 })
        ));
    }
}
