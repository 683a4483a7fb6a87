//! Question records, benchmark loaders, split manifests and the download cache.

mod fetch;
mod generic;
mod lcquad;
mod manifest;
mod qald;

use std::collections::{BTreeMap, BTreeSet, HashSet};
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use fetch::{
    builtin_catalog, default_cache_dir, fetch, load_catalog, CatalogEntry, DownloadSource, FetchError, FetchedFile,
    FileOrHttp, Transport, CACHE_DIR_ENV,
};
pub use generic::{load_generic, save_generic};
pub use lcquad::{load_lcquad1, load_lcquad2};
pub use manifest::{apply_manifest, SplitLists, SplitManifest, SplitName, SplitRatios};
pub use qald::load_qald;

/// `extras` flag set on records without a usable SPARQL query.
pub const FLAG_NO_QUERY: &str = "no_query";
/// `extras` flag set when the question text came from a secondary field.
pub const FLAG_FALLBACK_TEXT: &str = "fallback_text";
/// `extras` flag set on records without any question text.
pub const FLAG_NO_TEXT: &str = "no_text";

#[derive(Debug, Error)]
pub enum DatasetError {
    #[error("malformed document: {0}")]
    MalformedDocument(String),
    #[error("line {line}: {message}")]
    Line { line: usize, message: String },
    #[error("duplicate record id '{0}'")]
    DuplicateId(String),
    #[error("unknown record id '{0}'")]
    UnknownId(String),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SourceSplit {
    Train,
    Dev,
    Test,
    #[default]
    Unsplit,
}

impl SourceSplit {
    pub fn as_str(self) -> &'static str {
        match self {
            SourceSplit::Train => "train",
            SourceSplit::Dev => "dev",
            SourceSplit::Test => "test",
            SourceSplit::Unsplit => "unsplit",
        }
    }
}

impl fmt::Display for SourceSplit {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for SourceSplit {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "train" => Ok(SourceSplit::Train),
            "dev" | "valid" | "validation" => Ok(SourceSplit::Dev),
            "test" => Ok(SourceSplit::Test),
            "unsplit" | "all" => Ok(SourceSplit::Unsplit),
            other => Err(format!("unknown split '{other}'")),
        }
    }
}

/// Gold answers in canonical lexical form. Serialized as a JSON array;
/// deserialized values are canonicalized.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct AnswerSet {
    #[serde(deserialize_with = "canonical_values")]
    pub values: BTreeSet<String>,
}

fn canonical_values<'de, D: serde::Deserializer<'de>>(d: D) -> Result<BTreeSet<String>, D::Error> {
    let raw = Vec::<String>::deserialize(d)?;
    Ok(AnswerSet::new(raw).values)
}

impl AnswerSet {
    /// Trims every value and lowercases booleans; duplicates collapse.
    pub fn new<I, S>(values: I) -> Self
    where
        I: IntoIterator<Item = S>,
        S: AsRef<str>,
    {
        let values = values
            .into_iter()
            .map(|v| canonical_answer(v.as_ref()))
            .collect();
        Self { values }
    }

    pub fn boolean(value: bool) -> Self {
        Self::new([if value { "true" } else { "false" }])
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn contains(&self, value: &str) -> bool {
        self.values.contains(canonical_answer(value).as_str())
    }
}

pub(crate) fn canonical_answer(value: &str) -> String {
    let v = value.trim();
    if v.eq_ignore_ascii_case("true") || v.eq_ignore_ascii_case("false") {
        v.to_ascii_lowercase()
    } else {
        v.to_string()
    }
}

/// One benchmark question.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct QuestionRecord {
    pub id: String,
    pub text: String,
    pub language: String,
    pub logical_form: String,
    #[serde(default)]
    pub answers: Option<AnswerSet>,
    #[serde(default)]
    pub source_split: SourceSplit,
    #[serde(default)]
    pub extras: BTreeMap<String, String>,
}

impl QuestionRecord {
    pub fn new(id: impl Into<String>, text: impl Into<String>, logical_form: impl Into<String>) -> Self {
        Self {
            id: id.into(),
            text: text.into(),
            language: "en".into(),
            logical_form: logical_form.into(),
            answers: None,
            source_split: SourceSplit::Unsplit,
            extras: BTreeMap::new(),
        }
    }

    pub fn flag(&mut self, name: &str) {
        self.extras.insert(name.to_string(), "true".to_string());
    }

    pub fn is_flagged(&self, name: &str) -> bool {
        self.extras.get(name).is_some_and(|v| v == "true")
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Dataset {
    pub name: String,
    pub kg_profile_name: String,
    pub records: Vec<QuestionRecord>,
}

impl Dataset {
    /// Builds a dataset, rejecting duplicate ids.
    pub fn new(
        name: impl Into<String>,
        kg_profile_name: impl Into<String>,
        records: Vec<QuestionRecord>,
    ) -> Result<Self, DatasetError> {
        let ds = Self {
            name: name.into(),
            kg_profile_name: kg_profile_name.into(),
            records,
        };
        ds.check_unique_ids()?;
        Ok(ds)
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    pub fn check_unique_ids(&self) -> Result<(), DatasetError> {
        let mut seen = HashSet::with_capacity(self.records.len());
        for r in &self.records {
            if r.id.is_empty() {
                return Err(DatasetError::MalformedDocument("record with empty id".into()));
            }
            if !seen.insert(r.id.as_str()) {
                return Err(DatasetError::DuplicateId(r.id.clone()));
            }
        }
        Ok(())
    }

    pub fn get(&self, id: &str) -> Option<&QuestionRecord> {
        self.records.iter().find(|r| r.id == id)
    }

    /// Concatenate several parts (typically the official train and test
    /// files) into one dataset. Fails on colliding ids; see
    /// [`Dataset::qualify_ids`].
    pub fn merge(name: impl Into<String>, parts: Vec<Dataset>) -> Result<Self, DatasetError> {
        let kg = parts.first().map(|p| p.kg_profile_name.clone()).unwrap_or_default();
        let records = parts.into_iter().flat_map(|p| p.records).collect();
        Self::new(name, kg, records)
    }

    /// Prefix every id with its source split (`train-17`) and keep the
    /// original under `extras["original_id"]`.
    pub fn qualify_ids(&mut self) {
        for r in &mut self.records {
            let original = std::mem::take(&mut r.id);
            r.id = format!("{}-{}", r.source_split, original);
            r.extras.insert("original_id".into(), original);
        }
    }

    pub fn split(&self, split: SourceSplit) -> Vec<QuestionRecord> {
        self.records
            .iter()
            .filter(|r| r.source_split == split)
            .cloned()
            .collect()
    }
}

/// Supported input formats.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum DatasetFormat {
    Qald,
    #[serde(rename = "lcquad1")]
    LcQuad1,
    #[serde(rename = "lcquad2")]
    LcQuad2,
    Generic,
}

impl DatasetFormat {
    pub fn default_profile(self) -> &'static str {
        match self {
            DatasetFormat::Qald | DatasetFormat::LcQuad1 => "dbpedia",
            DatasetFormat::LcQuad2 => "wikidata",
            DatasetFormat::Generic => "dbpedia",
        }
    }

    /// Parse `bytes` in this format. `name` is used for generic files, whose
    /// lines carry no dataset name.
    pub fn load(self, bytes: &[u8], split: SourceSplit, name: &str) -> Result<Dataset, DatasetError> {
        match self {
            DatasetFormat::Qald => load_qald(bytes, split),
            DatasetFormat::LcQuad1 => load_lcquad1(bytes, split),
            DatasetFormat::LcQuad2 => load_lcquad2(bytes, split),
            DatasetFormat::Generic => load_generic(bytes, name, self.default_profile()),
        }
    }
}

impl FromStr for DatasetFormat {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().replace(['-', '_', '.'], "").as_str() {
            "qald" | "qald9" => Ok(DatasetFormat::Qald),
            "lcquad1" | "lcquad" => Ok(DatasetFormat::LcQuad1),
            "lcquad2" => Ok(DatasetFormat::LcQuad2),
            "generic" | "jsonl" => Ok(DatasetFormat::Generic),
            _ => Err(format!("unknown dataset format '{s}' (qald, lcquad1, lcquad2, generic)")),
        }
    }
}

impl fmt::Display for DatasetFormat {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            DatasetFormat::Qald => "qald",
            DatasetFormat::LcQuad1 => "lcquad1",
            DatasetFormat::LcQuad2 => "lcquad2",
            DatasetFormat::Generic => "generic",
        })
    }
}

/// JSON ids may be strings or numbers.
pub(crate) fn json_id(value: &serde_json::Value) -> Option<String> {
    match value {
        serde_json::Value::String(s) if !s.is_empty() => Some(s.clone()),
        serde_json::Value::Number(n) => Some(n.to_string()),
        _ => None,
    }
}

/// Render a pass-through JSON value as an `extras` string.
pub(crate) fn json_extra(value: &serde_json::Value) -> Option<String> {
    match value {
        serde_json::Value::Null => None,
        serde_json::Value::String(s) => Some(s.clone()),
        other => Some(other.to_string()),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn answers_canonicalize() {
        let a = AnswerSet::new([" http://x ", "http://x", "TRUE", "Berlin"]);
        assert_eq!(a.len(), 3);
        assert!(a.contains("true"));
        assert!(a.contains("Berlin"));
        assert!(!a.contains("berlin"));
    }

    #[test]
    fn duplicate_ids_rejected() {
        let r = QuestionRecord::new("1", "q", "ASK {}");
        let err = Dataset::new("d", "dbpedia", vec![r.clone(), r]).unwrap_err();
        assert!(matches!(err, DatasetError::DuplicateId(id) if id == "1"));
    }

    #[test]
    fn merge_and_qualify() {
        let mut a = QuestionRecord::new("1", "q", "ASK {}");
        a.source_split = SourceSplit::Train;
        let mut b = a.clone();
        b.source_split = SourceSplit::Test;
        let parts = vec![
            Dataset::new("d", "dbpedia", vec![a]).unwrap(),
            Dataset::new("d", "dbpedia", vec![b]).unwrap(),
        ];
        assert!(Dataset::merge("d", parts.clone()).is_err());
        let mut parts = parts;
        for p in &mut parts {
            p.qualify_ids();
        }
        let merged = Dataset::merge("d", parts).unwrap();
        let ids: Vec<_> = merged.records.iter().map(|r| r.id.as_str()).collect();
        assert_eq!(ids, ["train-1", "test-1"]);
        assert_eq!(merged.records[0].extras["original_id"], "1");
    }

    #[test]
    fn format_names() {
        assert_eq!("LC-QuAD2".parse::<DatasetFormat>().unwrap(), DatasetFormat::LcQuad2);
        assert_eq!("qald-9".parse::<DatasetFormat>().unwrap(), DatasetFormat::Qald);
        assert!("csv".parse::<DatasetFormat>().is_err());
    }
}
