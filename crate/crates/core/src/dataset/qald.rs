use serde_json::Value;

use super::{
    json_extra, json_id, AnswerSet, Dataset, DatasetError, QuestionRecord, SourceSplit, FLAG_NO_QUERY,
    FLAG_NO_TEXT,
};

const PASS_THROUGH: [&str; 5] = ["answertype", "aggregation", "onlydbo", "hybrid", "createdBy"];

/// Load a QALD-format JSON document (`{"questions": [...]}`).
pub fn load_qald(bytes: &[u8], split: SourceSplit) -> Result<Dataset, DatasetError> {
    let doc: Value = serde_json::from_slice(bytes)?;
    let questions = doc
        .get("questions")
        .and_then(Value::as_array)
        .ok_or_else(|| DatasetError::MalformedDocument("missing top-level \"questions\" array".into()))?;
    let name = doc
        .pointer("/dataset/id")
        .and_then(Value::as_str)
        .unwrap_or("qald")
        .to_string();

    let mut records = Vec::with_capacity(questions.len());
    for (index, entry) in questions.iter().enumerate() {
        records.push(parse_entry(entry, index, split)?);
    }
    Dataset::new(name, "dbpedia", records)
}

fn parse_entry(entry: &Value, index: usize, split: SourceSplit) -> Result<QuestionRecord, DatasetError> {
    let id = entry
        .get("id")
        .and_then(json_id)
        .ok_or_else(|| DatasetError::MalformedDocument(format!("question #{index} has no \"id\"")))?;
    let malformed = |what: &str| DatasetError::MalformedDocument(format!("question '{id}': {what}"));

    let translations = entry
        .get("question")
        .and_then(Value::as_array)
        .ok_or_else(|| malformed("missing \"question\" array"))?;
    let pick = translations
        .iter()
        .find(|t| t.get("language").and_then(Value::as_str) == Some("en"))
        .or_else(|| translations.first());
    let (language, text) = match pick {
        Some(t) => (
            t.get("language").and_then(Value::as_str).unwrap_or("und").to_string(),
            t.get("string").and_then(Value::as_str).unwrap_or("").to_string(),
        ),
        None => ("und".to_string(), String::new()),
    };

    let query = entry.get("query").ok_or_else(|| malformed("missing \"query\""))?;
    let sparql = query
        .get("sparql")
        .and_then(Value::as_str)
        .unwrap_or("")
        .trim()
        .to_string();

    let mut record = QuestionRecord::new(id.clone(), text, sparql);
    record.language = language;
    record.source_split = split;
    if record.logical_form.is_empty() {
        record.flag(FLAG_NO_QUERY);
    }
    if record.text.trim().is_empty() {
        record.flag(FLAG_NO_TEXT);
    }
    record.answers = entry.get("answers").and_then(parse_answers);
    for key in PASS_THROUGH {
        if let Some(v) = entry.get(key).and_then(json_extra) {
            record.extras.insert(key.to_string(), v);
        }
    }
    Ok(record)
}

/// SPARQL-results JSON, either bare or wrapped in a one-element array.
fn parse_answers(value: &Value) -> Option<AnswerSet> {
    let results: Vec<&Value> = match value {
        Value::Array(items) => items.iter().collect(),
        Value::Object(_) => vec![value],
        _ => return None,
    };
    if results.is_empty() {
        return None;
    }
    let mut values = Vec::new();
    for res in results {
        if let Some(b) = res.get("boolean").and_then(Value::as_bool) {
            return Some(AnswerSet::boolean(b));
        }
        let first_var = res
            .pointer("/head/vars/0")
            .and_then(Value::as_str)
            .map(str::to_string);
        let bindings = res.pointer("/results/bindings").and_then(Value::as_array);
        for binding in bindings.into_iter().flatten() {
            let cell = match &first_var {
                Some(var) => binding.get(var),
                None => binding.as_object().and_then(|o| o.values().next()),
            };
            if let Some(v) = cell.and_then(|c| c.get("value")).and_then(Value::as_str) {
                values.push(v.to_string());
            }
        }
    }
    Some(AnswerSet::new(values))
}
