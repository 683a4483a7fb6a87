use serde_json::Value;

use super::{
    json_extra, json_id, Dataset, DatasetError, QuestionRecord, SourceSplit, FLAG_FALLBACK_TEXT,
    FLAG_NO_QUERY, FLAG_NO_TEXT,
};

fn entries(bytes: &[u8]) -> Result<Vec<Value>, DatasetError> {
    match serde_json::from_slice(bytes)? {
        Value::Array(items) => Ok(items),
        _ => Err(DatasetError::MalformedDocument("expected a top-level JSON array".into())),
    }
}

/// Non-empty, trimmed string field. LC-QuAD 2.0 uses `null` and the literal
/// `"[]"` for missing questions.
fn text_field(entry: &Value, key: &str) -> Option<String> {
    let s = entry.get(key)?.as_str()?.trim();
    (!s.is_empty() && s != "[]").then(|| s.to_string())
}

/// LC-QuAD 1.0: `[{"_id", "corrected_question", "sparql_query", ...}]`.
pub fn load_lcquad1(bytes: &[u8], split: SourceSplit) -> Result<Dataset, DatasetError> {
    let mut records = Vec::new();
    for (index, entry) in entries(bytes)?.iter().enumerate() {
        let id = entry
            .get("_id")
            .and_then(json_id)
            .ok_or_else(|| DatasetError::MalformedDocument(format!("entry #{index} has no \"_id\"")))?;
        let malformed = |what: &str| DatasetError::MalformedDocument(format!("entry '{id}': {what}"));

        let sparql = entry
            .get("sparql_query")
            .ok_or_else(|| malformed("missing \"sparql_query\""))?
            .as_str()
            .unwrap_or("")
            .trim()
            .to_string();

        let (text, fallback) = match text_field(entry, "corrected_question") {
            Some(t) => (t, false),
            None => match text_field(entry, "intermediary_question") {
                Some(t) => (t, true),
                None => return Err(malformed("missing \"corrected_question\"")),
            },
        };

        let mut record = QuestionRecord::new(id.clone(), text, sparql);
        record.source_split = split;
        if fallback {
            record.flag(FLAG_FALLBACK_TEXT);
        }
        if record.logical_form.is_empty() {
            record.flag(FLAG_NO_QUERY);
        }
        for key in ["sparql_template_id", "intermediary_question"] {
            if let Some(v) = entry.get(key).and_then(json_extra) {
                record.extras.insert(key.to_string(), v);
            }
        }
        records.push(record);
    }
    Dataset::new("lc-quad", "dbpedia", records)
}

/// LC-QuAD 2.0: `[{"uid", "question", "NNQT_question", "sparql_wikidata", ...}]`.
/// Only the Wikidata query is used.
pub fn load_lcquad2(bytes: &[u8], split: SourceSplit) -> Result<Dataset, DatasetError> {
    let mut records = Vec::new();
    for (index, entry) in entries(bytes)?.iter().enumerate() {
        let id = entry
            .get("uid")
            .and_then(json_id)
            .ok_or_else(|| DatasetError::MalformedDocument(format!("entry #{index} has no \"uid\"")))?;
        if entry.get("sparql_wikidata").is_none() {
            return Err(DatasetError::MalformedDocument(format!(
                "entry '{id}': missing \"sparql_wikidata\""
            )));
        }
        let sparql = text_field(entry, "sparql_wikidata").unwrap_or_default();

        let mut record = QuestionRecord::new(id, String::new(), sparql);
        record.source_split = split;
        match text_field(entry, "question") {
            Some(t) => record.text = t,
            None => match text_field(entry, "NNQT_question") {
                Some(t) => {
                    record.text = t;
                    record.flag(FLAG_FALLBACK_TEXT);
                }
                None => record.flag(FLAG_NO_TEXT),
            },
        }
        if record.logical_form.is_empty() {
            record.flag(FLAG_NO_QUERY);
        }
        for key in ["NNQT_question", "paraphrased_question", "template_id", "template", "subgraph"] {
            if let Some(v) = entry.get(key).and_then(json_extra) {
                record.extras.insert(key.to_string(), v);
            }
        }
        records.push(record);
    }
    Dataset::new("lc-quad-2.0", "wikidata", records)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn lcquad1_entries() {
        let doc = r#"[
          {"_id": "1501", "corrected_question": "Who is the spouse of Ada?", "intermediary_question": "What is the <spouse> of <Ada>?",
           "sparql_query": "SELECT DISTINCT ?uri WHERE { <http://dbpedia.org/resource/Ada> <http://dbpedia.org/ontology/spouse> ?uri }",
           "sparql_template_id": 2},
          {"_id": "1502", "intermediary_question": "What is the <team> of <X>?", "sparql_query": "SELECT ?u WHERE { ?u <http://dbpedia.org/ontology/team> ?t }"}
        ]"#;
        let ds = load_lcquad1(doc.as_bytes(), SourceSplit::Train).unwrap();
        assert_eq!(ds.len(), 2);
        assert_eq!(ds.records[0].text, "Who is the spouse of Ada?");
        assert_eq!(ds.records[0].extras["sparql_template_id"], "2");
        assert!(ds.records[0].answers.is_none());
        assert!(!ds.records[0].is_flagged(FLAG_FALLBACK_TEXT));
        assert_eq!(ds.records[1].text, "What is the <team> of <X>?");
        assert!(ds.records[1].is_flagged(FLAG_FALLBACK_TEXT));
    }

    #[test]
    fn lcquad1_missing_keys() {
        let err = load_lcquad1(br#"[{"_id": "9", "sparql_query": "ASK {}"}]"#, SourceSplit::Train).unwrap_err();
        assert!(err.to_string().contains("'9'"));
        assert!(load_lcquad1(br#"[{"corrected_question": "x"}]"#, SourceSplit::Train).is_err());
        assert!(load_lcquad1(br#"{"a": 1}"#, SourceSplit::Train).is_err());
    }

    #[test]
    fn empty_arrays() {
        assert!(load_lcquad1(b"[]", SourceSplit::Test).unwrap().is_empty());
        assert!(load_lcquad2(b"[]", SourceSplit::Test).unwrap().is_empty());
    }

    #[test]
    fn lcquad2_entries_and_flags() {
        let doc = r#"[
          {"uid": 19719, "question": "What is the continent of Canada?", "NNQT_question": "What is {continent} of {Canada}",
           "sparql_wikidata": " select distinct ?obj where { wd:Q16 wdt:P30 ?obj . ?obj wdt:P31 wd:Q5107 } ",
           "sparql_dbpedia18": "ignored", "template_id": 1, "subgraph": "simple question right"},
          {"uid": 19720, "question": null, "NNQT_question": "What is {population} of {Canada}", "sparql_wikidata": "select ?x where { wd:Q16 wdt:P1082 ?x }"},
          {"uid": 19721, "question": "[]", "sparql_wikidata": ""}
        ]"#;
        let ds = load_lcquad2(doc.as_bytes(), SourceSplit::Train).unwrap();
        assert_eq!(ds.len(), 3);
        assert_eq!(ds.records[0].id, "19719");
        assert!(ds.records[0].logical_form.starts_with("select distinct"));
        assert_eq!(ds.records[0].extras["template_id"], "1");
        assert!(!ds.records[0].extras.contains_key("sparql_dbpedia18"));
        assert_eq!(ds.records[1].text, "What is {population} of {Canada}");
        assert!(ds.records[1].is_flagged(FLAG_FALLBACK_TEXT));
        assert!(ds.records[2].is_flagged(FLAG_NO_TEXT));
        assert!(ds.records[2].is_flagged(FLAG_NO_QUERY));
    }
}
