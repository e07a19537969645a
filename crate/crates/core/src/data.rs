//! Response records, the line-delimited ingestion format and collection
//! building.
//!
//! One record per line:
//!
//! ```text
//! {"model": "m", "prompt": "p", "response": "r1", "label": "G", "emb": [0.1, -0.3, 2.0]}
//! ```
//!
//! `label` is one of `"G"` (genuine), `"H"` (hallucinated) or `"U"` (unknown).

use std::collections::{BTreeMap, HashSet};
use std::io::{BufRead, Write};

use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Label {
    #[serde(rename = "G")]
    Genuine,
    #[serde(rename = "H")]
    Hallucinated,
    #[serde(rename = "U")]
    Unknown,
}

impl Label {
    pub fn code(self) -> &'static str {
        match self {
            Label::Genuine => "G",
            Label::Hallucinated => "H",
            Label::Unknown => "U",
        }
    }

    pub fn from_code(code: &str) -> Option<Label> {
        match code {
            "G" => Some(Label::Genuine),
            "H" => Some(Label::Hallucinated),
            "U" => Some(Label::Unknown),
            _ => None,
        }
    }
}

/// One embedded response.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResponseRecord {
    #[serde(rename = "model")]
    pub model_id: String,
    #[serde(rename = "prompt")]
    pub prompt_id: String,
    #[serde(rename = "response")]
    pub response_id: String,
    pub label: Label,
    #[serde(rename = "emb")]
    pub embedding: Vec<f64>,
}

impl ResponseRecord {
    pub fn new(
        model_id: impl Into<String>,
        prompt_id: impl Into<String>,
        response_id: impl Into<String>,
        label: Label,
        embedding: Vec<f64>,
    ) -> Self {
        ResponseRecord {
            model_id: model_id.into(),
            prompt_id: prompt_id.into(),
            response_id: response_id.into(),
            label,
            embedding,
        }
    }

    /// Serialize to a single line (no trailing newline).
    pub fn to_line(&self) -> String {
        serde_json::to_string(self).expect("records always serialize")
    }
}

fn string_field(obj: &serde_json::Map<String, Value>, line: usize, key: &'static str) -> Result<String> {
    match obj.get(key) {
        Some(Value::String(s)) => Ok(s.clone()),
        Some(_) => Err(Error::Parse { line, field: key, message: "expected a string".into() }),
        None => Err(Error::Parse { line, field: key, message: "missing field".into() }),
    }
}

/// Parse one record line. `line` is 1-based and only used for diagnostics.
pub fn parse_line(text: &str, line: usize) -> Result<ResponseRecord> {
    let value: Value = serde_json::from_str(text).map_err(|e| Error::Parse {
        line,
        field: "record",
        message: e.to_string(),
    })?;
    let obj = value.as_object().ok_or_else(|| Error::Parse {
        line,
        field: "record",
        message: "expected a JSON object".into(),
    })?;

    let model_id = string_field(obj, line, "model")?;
    let prompt_id = string_field(obj, line, "prompt")?;
    let response_id = string_field(obj, line, "response")?;
    let code = string_field(obj, line, "label")?;
    let label = Label::from_code(&code).ok_or_else(|| Error::Parse {
        line,
        field: "label",
        message: format!("expected \"G\", \"H\" or \"U\", found {code:?}"),
    })?;

    let emb = match obj.get("emb") {
        Some(Value::Array(items)) => items,
        Some(_) => return Err(Error::Parse { line, field: "emb", message: "expected an array".into() }),
        None => return Err(Error::Parse { line, field: "emb", message: "missing field".into() }),
    };
    if emb.is_empty() {
        return Err(Error::Parse { line, field: "emb", message: "embedding must have at least one component".into() });
    }
    let mut embedding = Vec::with_capacity(emb.len());
    for (i, item) in emb.iter().enumerate() {
        let x = item.as_f64().ok_or_else(|| Error::Parse {
            line,
            field: "emb",
            message: format!("component {i} is not a number"),
        })?;
        if !x.is_finite() {
            return Err(Error::Parse { line, field: "emb", message: format!("component {i} is not finite") });
        }
        embedding.push(x);
    }

    Ok(ResponseRecord { model_id, prompt_id, response_id, label, embedding })
}

/// Incremental validator shared by single-stream and multi-file ingestion:
/// enforces one embedding dimension and unique `(model, prompt, response)`.
#[derive(Debug, Default)]
pub struct RecordValidator {
    dimension: Option<usize>,
    seen: HashSet<(String, String, String)>,
}

impl RecordValidator {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn dimension(&self) -> Option<usize> {
        self.dimension
    }

    pub fn check(&mut self, record: &ResponseRecord, line: usize) -> Result<()> {
        let found = record.embedding.len();
        match self.dimension {
            Some(expected) if expected != found => {
                return Err(Error::DimensionMismatch {
                    line,
                    response_id: record.response_id.clone(),
                    expected,
                    found,
                })
            }
            Some(_) => {}
            None => self.dimension = Some(found),
        }
        let key = (record.model_id.clone(), record.prompt_id.clone(), record.response_id.clone());
        if !self.seen.insert(key) {
            return Err(Error::DuplicateRecord {
                model: record.model_id.clone(),
                prompt: record.prompt_id.clone(),
                response: record.response_id.clone(),
            });
        }
        Ok(())
    }
}

/// Parse a line-delimited record stream. Blank lines are skipped.
pub fn parse_records<R: BufRead>(reader: R) -> Result<Vec<ResponseRecord>> {
    let mut validator = RecordValidator::new();
    parse_records_with(reader, &mut validator)
}

/// Like [`parse_records`] but checks against an existing validator, so that
/// several streams can be ingested as one record set.
pub fn parse_records_with<R: BufRead>(reader: R, validator: &mut RecordValidator) -> Result<Vec<ResponseRecord>> {
    let mut out = Vec::new();
    for (idx, line) in reader.lines().enumerate() {
        let line_no = idx + 1;
        let text = line.map_err(|e| Error::Parse { line: line_no, field: "record", message: e.to_string() })?;
        if text.trim().is_empty() {
            continue;
        }
        let record = parse_line(&text, line_no)?;
        validator.check(&record, line_no)?;
        out.push(record);
    }
    Ok(out)
}

pub fn write_records<W: Write>(mut writer: W, records: &[ResponseRecord]) -> std::io::Result<()> {
    for record in records {
        writeln!(writer, "{}", record.to_line())?;
    }
    Ok(())
}

/// Scale every embedding to unit L2 norm. Zero vectors are left untouched.
pub fn normalize_l2(records: &mut [ResponseRecord]) {
    for record in records {
        let norm = record.embedding.iter().map(|x| x * x).sum::<f64>().sqrt();
        if norm > 0.0 {
            record.embedding.iter_mut().for_each(|x| *x /= norm);
        }
    }
}

/// Filtering rules applied when turning records into collections.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FilterPolicy {
    pub min_class_size: usize,
    pub drop_unknown: bool,
}

impl Default for FilterPolicy {
    fn default() -> Self {
        FilterPolicy { min_class_size: 5, drop_unknown: true }
    }
}

impl FilterPolicy {
    pub fn new(min_class_size: usize, drop_unknown: bool) -> Result<Self> {
        if min_class_size < 2 {
            return Err(Error::InvalidParameter(format!(
                "min_class_size must be at least 2, got {min_class_size}"
            )));
        }
        Ok(FilterPolicy { min_class_size, drop_unknown })
    }
}

/// Why a `(model, prompt)` group was dropped.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DropReason {
    GenuineBelowThreshold,
    HallucinatedBelowThreshold,
    BothBelowThreshold,
    ContainsUnknown,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct FilterSummary {
    pub input_records: usize,
    pub unknown_removed: usize,
    pub groups_total: usize,
    pub groups_kept: usize,
    pub dropped_groups: usize,
    pub dropped_records: usize,
    pub reasons: BTreeMap<DropReason, usize>,
}

/// All labeled records for one `(model, prompt)` pair.
#[derive(Debug, Clone, PartialEq)]
pub struct PromptCollection {
    pub model_id: String,
    pub prompt_id: String,
    pub dimension: usize,
    pub records: Vec<ResponseRecord>,
    pub genuine_count: usize,
    pub hallucinated_count: usize,
}

impl PromptCollection {
    /// Build a collection, checking that records share key and dimension and
    /// carry no `Unknown` labels.
    pub fn new(model_id: impl Into<String>, prompt_id: impl Into<String>, records: Vec<ResponseRecord>) -> Result<Self> {
        let model_id = model_id.into();
        let prompt_id = prompt_id.into();
        let first = records.first().ok_or(Error::Empty("collection records"))?;
        let dimension = first.embedding.len();
        let mut genuine_count = 0;
        let mut hallucinated_count = 0;
        for r in &records {
            if r.model_id != model_id || r.prompt_id != prompt_id {
                return Err(Error::InvalidParameter(format!(
                    "record {:?} belongs to ({}, {}), not ({model_id}, {prompt_id})",
                    r.response_id, r.model_id, r.prompt_id
                )));
            }
            if r.embedding.len() != dimension {
                return Err(Error::Dimension { expected: dimension, found: r.embedding.len() });
            }
            if r.embedding.iter().any(|x| !x.is_finite()) {
                return Err(Error::NonFinite("embedding"));
            }
            match r.label {
                Label::Genuine => genuine_count += 1,
                Label::Hallucinated => hallucinated_count += 1,
                Label::Unknown => {
                    return Err(Error::InvalidParameter("collections cannot hold Unknown labels".into()))
                }
            }
        }
        Ok(PromptCollection { model_id, prompt_id, dimension, records, genuine_count, hallucinated_count })
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    /// `"model/prompt"`, used for reporting and seed derivation.
    pub fn key(&self) -> String {
        format!("{}/{}", self.model_id, self.prompt_id)
    }

    pub fn labels(&self) -> Vec<Label> {
        self.records.iter().map(|r| r.label).collect()
    }

    pub fn points(&self) -> Vec<&[f64]> {
        self.records.iter().map(|r| r.embedding.as_slice()).collect()
    }

    pub fn class_points(&self, label: Label) -> Vec<&[f64]> {
        self.records
            .iter()
            .filter(|r| r.label == label)
            .map(|r| r.embedding.as_slice())
            .collect()
    }

    /// Indices of records carrying `label`, in record order.
    pub fn class_indices(&self, label: Label) -> Vec<usize> {
        self.records
            .iter()
            .enumerate()
            .filter(|(_, r)| r.label == label)
            .map(|(i, _)| i)
            .collect()
    }

    /// The sub-collection at `indices` (kept in the given order).
    pub fn subset(&self, indices: &[usize]) -> Result<PromptCollection> {
        let records = indices.iter().map(|&i| self.records[i].clone()).collect();
        PromptCollection::new(self.model_id.clone(), self.prompt_id.clone(), records)
    }
}

/// Group records by `(model, prompt)` and apply `policy`.
///
/// Output collections are ordered by key; records inside a collection keep
/// their input order.
pub fn build_collections(records: Vec<ResponseRecord>, policy: &FilterPolicy) -> (Vec<PromptCollection>, FilterSummary) {
    let mut summary = FilterSummary { input_records: records.len(), ..Default::default() };
    let mut groups: BTreeMap<(String, String), Vec<ResponseRecord>> = BTreeMap::new();
    for r in records {
        groups.entry((r.model_id.clone(), r.prompt_id.clone())).or_default().push(r);
    }
    summary.groups_total = groups.len();

    let mut out = Vec::new();
    for ((model, prompt), mut group) in groups {
        let has_unknown = group.iter().any(|r| r.label == Label::Unknown);
        if has_unknown {
            if policy.drop_unknown {
                let before = group.len();
                group.retain(|r| r.label != Label::Unknown);
                summary.unknown_removed += before - group.len();
            } else {
                summary.dropped_groups += 1;
                summary.dropped_records += group.len();
                *summary.reasons.entry(DropReason::ContainsUnknown).or_default() += 1;
                continue;
            }
        }
        let g = group.iter().filter(|r| r.label == Label::Genuine).count();
        let h = group.len() - g;
        let reason = match (g < policy.min_class_size, h < policy.min_class_size) {
            (true, true) => Some(DropReason::BothBelowThreshold),
            (true, false) => Some(DropReason::GenuineBelowThreshold),
            (false, true) => Some(DropReason::HallucinatedBelowThreshold),
            (false, false) => None,
        };
        if let Some(reason) = reason {
            summary.dropped_groups += 1;
            summary.dropped_records += group.len();
            *summary.reasons.entry(reason).or_default() += 1;
            continue;
        }
        match PromptCollection::new(model, prompt, group) {
            Ok(c) => out.push(c),
            // mixed dimensions are rejected at parse time; count anything else as dropped
            Err(_) => summary.dropped_groups += 1,
        }
    }
    summary.groups_kept = out.len();
    (out, summary)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn rec(prompt: &str, id: usize, label: Label) -> ResponseRecord {
        ResponseRecord::new("m", prompt, format!("r{id}"), label, vec![id as f64, 1.0])
    }

    #[test]
    fn parses_genuine_and_unknown_lines() {
        let text = r#"{"model":"m","prompt":"p","response":"a","label":"G","emb":[1.0,2.0,3.0]}
{"model":"m","prompt":"p","response":"b","label":"U","emb":[0,0,1]}
"#;
        let recs = parse_records(text.as_bytes()).unwrap();
        assert_eq!(recs.len(), 2);
        assert_eq!(recs[0].label, Label::Genuine);
        assert_eq!(recs[0].embedding, vec![1.0, 2.0, 3.0]);
        assert_eq!(recs[1].label, Label::Unknown);
    }

    #[test]
    fn missing_embedding_names_line_and_field() {
        let text = "{\"model\":\"m\",\"prompt\":\"p\",\"response\":\"a\",\"label\":\"G\",\"emb\":[1]}\n\
                    {\"model\":\"m\",\"prompt\":\"p\",\"response\":\"b\",\"label\":\"G\"}\n";
        match parse_records(text.as_bytes()) {
            Err(Error::Parse { line: 2, field: "emb", .. }) => {}
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn bad_label_and_dimension_mismatch() {
        let bad = r#"{"model":"m","prompt":"p","response":"a","label":"X","emb":[1]}"#;
        assert!(matches!(parse_records(bad.as_bytes()), Err(Error::Parse { field: "label", .. })));

        let text = "{\"model\":\"m\",\"prompt\":\"p\",\"response\":\"a\",\"label\":\"G\",\"emb\":[1,2]}\n\
                    {\"model\":\"m\",\"prompt\":\"p\",\"response\":\"b\",\"label\":\"H\",\"emb\":[1]}\n";
        match parse_records(text.as_bytes()) {
            Err(Error::DimensionMismatch { line: 2, response_id, expected: 2, found: 1 }) => assert_eq!(response_id, "b"),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn duplicates_are_rejected() {
        let line = r#"{"model":"m","prompt":"p","response":"a","label":"G","emb":[1]}"#;
        let text = format!("{line}\n{line}\n");
        assert!(matches!(parse_records(text.as_bytes()), Err(Error::DuplicateRecord { .. })));
    }

    #[test]
    fn small_class_group_is_dropped() {
        let mut records = Vec::new();
        for i in 0..10 {
            records.push(rec("p", i, Label::Genuine));
        }
        for i in 10..13 {
            records.push(rec("p", i, Label::Hallucinated));
        }
        let (cols, summary) = build_collections(records, &FilterPolicy::default());
        assert!(cols.is_empty());
        assert_eq!(summary.dropped_groups, 1);
        assert_eq!(summary.dropped_records, 13);
        assert_eq!(summary.reasons[&DropReason::HallucinatedBelowThreshold], 1);
    }

    #[test]
    fn threshold_boundary_keeps_group_without_unknowns() {
        let mut records = Vec::new();
        for i in 0..5 {
            records.push(rec("p", i, Label::Genuine));
            records.push(rec("p", 100 + i, Label::Hallucinated));
        }
        records.push(rec("p", 200, Label::Unknown));
        records.push(rec("p", 201, Label::Unknown));
        let (cols, summary) = build_collections(records, &FilterPolicy::default());
        assert_eq!(cols.len(), 1);
        assert_eq!(cols[0].len(), 10);
        assert_eq!((cols[0].genuine_count, cols[0].hallucinated_count), (5, 5));
        assert_eq!(summary.unknown_removed, 2);
    }

    #[test]
    fn keep_unknown_policy_drops_the_group() {
        let mut records: Vec<_> = (0..6).map(|i| rec("p", i, Label::Genuine)).collect();
        records.extend((6..12).map(|i| rec("p", i, Label::Hallucinated)));
        records.push(rec("p", 99, Label::Unknown));
        let policy = FilterPolicy::new(5, false).unwrap();
        let (cols, summary) = build_collections(records, &policy);
        assert!(cols.is_empty());
        assert_eq!(summary.reasons[&DropReason::ContainsUnknown], 1);
    }

    #[test]
    fn empty_input_is_valid() {
        let (cols, summary) = build_collections(Vec::new(), &FilterPolicy::default());
        assert!(cols.is_empty());
        assert_eq!(summary, FilterSummary::default());
    }

    #[test]
    fn policy_rejects_tiny_threshold() {
        assert!(FilterPolicy::new(1, true).is_err());
    }

    #[test]
    fn normalize_makes_unit_vectors() {
        let mut recs = vec![rec("p", 3, Label::Genuine)];
        recs[0].embedding = vec![3.0, 4.0];
        normalize_l2(&mut recs);
        assert!((recs[0].embedding[0] - 0.6).abs() < 1e-15);
        assert!((recs[0].embedding[1] - 0.8).abs() < 1e-15);
    }

    fn arb_record() -> impl Strategy<Value = ResponseRecord> {
        (
            "[a-z]{1,4}",
            "[a-z0-9 ]{1,6}",
            "[a-zA-Z0-9\"\\\\]{1,6}",
            prop_oneof![Just(Label::Genuine), Just(Label::Hallucinated), Just(Label::Unknown)],
            prop::collection::vec(-1e6f64..1e6, 1..6),
        )
            .prop_map(|(m, p, r, l, e)| ResponseRecord::new(m, p, r, l, e))
    }

    proptest! {
        #[test]
        fn serialize_then_parse_is_identity(rec in arb_record()) {
            let parsed = parse_line(&rec.to_line(), 1).unwrap();
            prop_assert_eq!(parsed, rec);
        }

        #[test]
        fn grouping_ignores_input_order(seed in 0u64..1000) {
            use rand::seq::SliceRandom;
            let mut records = Vec::new();
            for p in ["a", "b", "c"] {
                for i in 0..6 { records.push(rec(p, i, Label::Genuine)); }
                for i in 6..12 { records.push(rec(p, i, Label::Hallucinated)); }
            }
            let (base, _) = build_collections(records.clone(), &FilterPolicy::default());
            records.shuffle(&mut crate::seed::Seed(seed).rng());
            let (shuffled, _) = build_collections(records, &FilterPolicy::default());
            prop_assert_eq!(base.len(), shuffled.len());
            for (a, b) in base.iter().zip(&shuffled) {
                prop_assert_eq!(&a.prompt_id, &b.prompt_id);
                let mut ia: Vec<_> = a.records.iter().map(|r| r.response_id.clone()).collect();
                let mut ib: Vec<_> = b.records.iter().map(|r| r.response_id.clone()).collect();
                ia.sort();
                ib.sort();
                prop_assert_eq!(ia, ib);
            }
        }
    }
}
