use std::collections::HashSet;

use super::{Dataset, DatasetError, QuestionRecord};

/// Parse line-delimited JSON, one [`QuestionRecord`] per line. Blank lines
/// are ignored; errors carry the 1-based line number.
pub fn load_generic(bytes: &[u8], name: &str, kg_profile_name: &str) -> Result<Dataset, DatasetError> {
    let text = std::str::from_utf8(bytes).map_err(|e| DatasetError::Line {
        line: 1 + bytes[..e.valid_up_to()].iter().filter(|&&b| b == b'\n').count(),
        message: "invalid UTF-8".into(),
    })?;
    let mut records = Vec::new();
    let mut seen = HashSet::new();
    for (index, line) in text.lines().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let record: QuestionRecord = serde_json::from_str(line).map_err(|e| DatasetError::Line {
            line: index + 1,
            message: e.to_string(),
        })?;
        if record.id.is_empty() {
            return Err(DatasetError::Line {
                line: index + 1,
                message: "empty id".into(),
            });
        }
        if !seen.insert(record.id.clone()) {
            return Err(DatasetError::DuplicateId(record.id));
        }
        records.push(record);
    }
    Ok(Dataset {
        name: name.to_string(),
        kg_profile_name: kg_profile_name.to_string(),
        records,
    })
}

pub fn save_generic(dataset: &Dataset) -> Vec<u8> {
    save_records(&dataset.records)
}

pub(crate) fn save_records<'a>(records: impl IntoIterator<Item = &'a QuestionRecord>) -> Vec<u8> {
    let mut out = Vec::new();
    for r in records {
        serde_json::to_writer(&mut out, r).expect("records serialize");
        out.push(b'\n');
    }
    out
}
