use std::fs;
use std::io::{BufWriter, Write};
use std::path::Path;

use serde::Serialize;
use serde_json::Value;

use super::{tokenize, CorpusError, NewsPair, StructureLabel, SUMMARY_SENTENCES};

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct LineError {
    /// 1-based line number.
    pub line: usize,
    pub message: String,
}

#[derive(Clone, Debug, Default)]
pub struct LoadReport {
    pub pairs: Vec<NewsPair>,
    pub errors: Vec<LineError>,
}

#[derive(Serialize)]
struct PairRecord<'a> {
    id: &'a str,
    article: String,
    summary: Vec<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    label: Option<StructureLabel>,
    #[serde(skip_serializing_if = "Option::is_none")]
    category: Option<&'a str>,
}

fn field<'a>(obj: &'a serde_json::Map<String, Value>, name: &str) -> Result<&'a Value, String> {
    obj.get(name).ok_or_else(|| format!("missing required field {name:?}"))
}

/// Parses and validates one JSONL record.
pub fn parse_pair_line(line: &str) -> Result<NewsPair, String> {
    let value: Value = serde_json::from_str(line).map_err(|e| format!("malformed JSON: {e}"))?;
    let obj = value.as_object().ok_or("record is not a JSON object")?;
    for key in obj.keys() {
        if !matches!(key.as_str(), "id" | "article" | "summary" | "label" | "category") {
            return Err(format!("unknown field {key:?}"));
        }
    }
    let id = field(obj, "id")?.as_str().ok_or("field \"id\" must be a string")?.to_string();
    let article = tokenize(field(obj, "article")?.as_str().ok_or("field \"article\" must be a string")?);
    if article.is_empty() {
        return Err("article has no tokens".into());
    }
    let sentences = field(obj, "summary")?.as_array().ok_or("field \"summary\" must be an array")?;
    if sentences.len() != SUMMARY_SENTENCES {
        return Err(format!("summary has {} sentences, expected {SUMMARY_SENTENCES}", sentences.len()));
    }
    let mut summary: [Vec<String>; SUMMARY_SENTENCES] = Default::default();
    for (k, s) in sentences.iter().enumerate() {
        let text = s.as_str().ok_or("summary sentences must be strings")?;
        summary[k] = tokenize(text);
        if summary[k].is_empty() {
            return Err(format!("summary sentence {} is empty", k + 1));
        }
    }
    let label = match obj.get("label") {
        None | Some(Value::Null) => None,
        Some(Value::String(s)) => Some(s.parse::<StructureLabel>().map_err(|e| e.to_string())?),
        Some(_) => return Err("field \"label\" must be a string".into()),
    };
    let category = match obj.get("category") {
        None | Some(Value::Null) => None,
        Some(Value::String(s)) => Some(s.clone()),
        Some(_) => return Err("field \"category\" must be a string".into()),
    };
    Ok(NewsPair { id, article, summary, label, category })
}

pub fn to_jsonl_line(pair: &NewsPair) -> String {
    let rec = PairRecord {
        id: &pair.id,
        article: pair.article.join(" "),
        summary: pair.summary.iter().map(|s| s.join(" ")).collect(),
        label: pair.label,
        category: pair.category.as_deref(),
    };
    serde_json::to_string(&rec).expect("record serializes")
}

/// Parses JSONL text. In strict mode the first invalid line is an error;
/// otherwise invalid lines are collected in the report. Blank lines are
/// skipped.
pub fn load_jsonl_str(text: &str, strict: bool) -> Result<LoadReport, CorpusError> {
    let mut report = LoadReport::default();
    for (idx, line) in text.lines().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        match parse_pair_line(line) {
            Ok(p) => report.pairs.push(p),
            Err(message) if strict => return Err(CorpusError::Line { line: idx + 1, message }),
            Err(message) => report.errors.push(LineError { line: idx + 1, message }),
        }
    }
    Ok(report)
}

pub fn load_jsonl(path: impl AsRef<Path>, strict: bool) -> Result<LoadReport, CorpusError> {
    load_jsonl_str(&fs::read_to_string(path)?, strict)
}

pub fn write_jsonl(path: impl AsRef<Path>, pairs: &[NewsPair]) -> Result<(), CorpusError> {
    let mut w = BufWriter::new(fs::File::create(path)?);
    for p in pairs {
        w.write_all(to_jsonl_line(p).as_bytes())?;
        w.write_all(b"\n")?;
    }
    w.flush()?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    const GOOD: &str = r#"{"id":"a1","article":"x y z","summary":["a b","c","d e"],"label":"sequence"}"#;

    #[test]
    fn empty_text_gives_no_pairs() {
        let r = load_jsonl_str("", true).unwrap();
        assert!(r.pairs.is_empty() && r.errors.is_empty());
    }

    #[test]
    fn two_sentence_summary_rejected_with_line_number() {
        let bad = r#"{"id":"b","article":"x","summary":["a","b"]}"#;
        let text = format!("{GOOD}\n{bad}\n");
        let r = load_jsonl_str(&text, false).unwrap();
        assert_eq!(r.pairs.len(), 1);
        assert_eq!(r.errors.len(), 1);
        assert_eq!(r.errors[0].line, 2);
        assert!(r.errors[0].message.contains("2 sentences"));
        match load_jsonl_str(&text, true) {
            Err(CorpusError::Line { line: 2, .. }) => {}
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn missing_field_and_bad_label() {
        let e = parse_pair_line(r#"{"id":"c","summary":["a","b","c"]}"#).unwrap_err();
        assert!(e.contains("article"));
        let e = parse_pair_line(r#"{"id":"c","article":"q","summary":["a","b","c"],"label":"chain"}"#).unwrap_err();
        assert!(e.contains("chain"));
    }

    #[test]
    fn parses_fields() {
        let p = parse_pair_line(GOOD).unwrap();
        assert_eq!(p.article, vec!["x", "y", "z"]);
        assert_eq!(p.summary[2], vec!["d", "e"]);
        assert_eq!(p.label, Some(StructureLabel::Sequence));
        assert_eq!(p.category, None);
    }

    #[test]
    fn file_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("c.jsonl");
        let mut p = parse_pair_line(GOOD).unwrap();
        p.category = Some("sports".into());
        let pairs = vec![p.clone(), NewsPair { id: "z".into(), label: None, ..p }];
        write_jsonl(&path, &pairs).unwrap();
        assert_eq!(load_jsonl(&path, true).unwrap().pairs, pairs);
    }
}
