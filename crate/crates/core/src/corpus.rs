//! Auction-record ingestion and metadata-augmented text rendering.

use std::collections::HashMap;
use std::io::{BufRead, BufReader, Read, Write};

use chrono::NaiveDate;
use serde::{Deserialize, Serialize};
use serde_json::Value;
use thiserror::Error;

/// Column order shared by the CSV header, JSONL keys and the JSONL re-export.
pub const FIELD_NAMES: [&str; 10] = [
    "record_id",
    "artist",
    "title",
    "object_type",
    "material",
    "dimensions",
    "auction_house",
    "sale_date",
    "catalogue_number",
    "source_url",
];

#[derive(Debug, Error)]
pub enum CorpusError {
    #[error("duplicate record id {id:?} at data row {row}")]
    DuplicateId { id: String, row: usize },
    #[error("csv input has no record_id column")]
    MissingIdColumn,
    #[error("csv error: {0}")]
    Csv(#[from] csv::Error),
    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SourceFormat {
    Csv,
    Jsonl,
}

impl std::str::FromStr for SourceFormat {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "csv" => Ok(Self::Csv),
            "jsonl" | "ndjson" => Ok(Self::Jsonl),
            other => Err(format!("unknown record format {other:?} (expected csv or jsonl)")),
        }
    }
}

/// One auction catalogue entry.
///
/// Free-text fields that were empty in the source are stored as empty strings
/// (required columns) or `None` (optional columns); both count as absent when
/// the record is rendered.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct AuctionRecord {
    pub record_id: String,
    #[serde(default)]
    pub artist: String,
    #[serde(default)]
    pub title: String,
    #[serde(default)]
    pub object_type: String,
    #[serde(default)]
    pub material: Option<String>,
    #[serde(default)]
    pub dimensions: Option<String>,
    #[serde(default)]
    pub auction_house: String,
    #[serde(default)]
    pub sale_date: Option<NaiveDate>,
    #[serde(default)]
    pub catalogue_number: Option<String>,
    #[serde(default)]
    pub source_url: Option<String>,
}

impl AuctionRecord {
    /// Record with only an id; the remaining fields are filled by the caller.
    pub fn new(record_id: impl Into<String>) -> Self {
        Self {
            record_id: record_id.into(),
            artist: String::new(),
            title: String::new(),
            object_type: String::new(),
            material: None,
            dimensions: None,
            auction_house: String::new(),
            sale_date: None,
            catalogue_number: None,
            source_url: None,
        }
    }

    /// Canonical string value of a named field, `None` when absent or empty.
    pub fn field(&self, name: &str) -> Option<Option<String>> {
        let value = match name {
            "record_id" => Some(self.record_id.clone()),
            "artist" => Some(self.artist.clone()),
            "title" => Some(self.title.clone()),
            "object_type" => Some(self.object_type.clone()),
            "material" => self.material.clone(),
            "dimensions" => self.dimensions.clone(),
            "auction_house" => Some(self.auction_house.clone()),
            "sale_date" => self.sale_date.map(|d| d.format("%Y-%m-%d").to_string()),
            "catalogue_number" => self.catalogue_number.clone(),
            "source_url" => self.source_url.clone(),
            _ => return None,
        };
        Some(value.filter(|v| !v.is_empty()))
    }

    /// Name of the printed catalogue, used as the public source when no scan URL exists.
    pub fn catalogue_name(&self) -> String {
        let mut name = self.auction_house.trim().to_string();
        if let Some(date) = self.sale_date {
            if !name.is_empty() {
                name.push(' ');
            }
            name.push_str(&date.format("%Y").to_string());
        }
        if name.is_empty() {
            "Unknown Auction Catalogue".to_string()
        } else {
            name.push_str(" Auction Catalogue");
            name
        }
    }

    /// Scan URL when present, otherwise the catalogue name.
    pub fn public_source(&self) -> String {
        match self.source_url.as_deref().filter(|u| !u.is_empty()) {
            Some(url) => url.to_string(),
            None => self.catalogue_name(),
        }
    }
}

/// The text that gets embedded for one record.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct AugmentedDocument {
    pub record_id: String,
    pub text: String,
    pub char_length: usize,
}

/// Labeled clauses, in rendering order.
const CLAUSES: [(&str, &str); 8] = [
    ("Auction House", "auction_house"),
    ("Sale Date", "sale_date"),
    ("Artist", "artist"),
    ("Title", "title"),
    ("Object Type", "object_type"),
    ("Material", "material"),
    ("Dimensions", "dimensions"),
    ("Catalogue Number", "catalogue_number"),
];

/// Keys of the trailing `Metadata:` map and the record field each one reads.
const METADATA_KEYS: [(&str, &str); 5] = [
    ("source", "source_url"),
    ("sale_date", "sale_date"),
    ("artist", "artist"),
    ("auction_house", "auction_house"),
    ("dimensions", "dimensions"),
];

/// Human-readable labels of the clauses `augment` may emit, in order.
pub fn clause_labels() -> impl Iterator<Item = &'static str> {
    CLAUSES.iter().map(|(label, _)| *label).chain(std::iter::once("Metadata"))
}

fn quote(value: &str) -> String {
    let mut out = String::with_capacity(value.len() + 2);
    out.push('\'');
    for c in value.chars() {
        if c == '\'' || c == '\\' {
            out.push('\\');
        }
        out.push(c);
    }
    out.push('\'');
    out
}

/// Renders a record as a single space-joined string of `Label: value` clauses
/// followed by a `Metadata: {...}` map. Absent fields are skipped.
pub fn augment(record: &AuctionRecord) -> AugmentedDocument {
    let mut parts: Vec<String> = Vec::with_capacity(CLAUSES.len() + 1);
    for (label, key) in CLAUSES {
        if let Some(Some(value)) = record.field(key) {
            parts.push(format!("{label}: {value}"));
        }
    }
    let metadata: Vec<String> = METADATA_KEYS
        .iter()
        .filter_map(|(name, key)| {
            record
                .field(key)
                .flatten()
                .map(|v| format!("{}: {}", quote(name), quote(&v)))
        })
        .collect();
    parts.push(format!("Metadata: {{{}}}", metadata.join(", ")));

    let text = parts.join(" ");
    AugmentedDocument {
        record_id: record.record_id.clone(),
        char_length: text.chars().count(),
        text,
    }
}

/// Ordered, id-addressable set of records.
#[derive(Debug, Clone, Default)]
pub struct Corpus {
    records: Vec<AuctionRecord>,
    by_id: HashMap<String, usize>,
}

impl Corpus {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn from_records(records: Vec<AuctionRecord>) -> Result<Self, CorpusError> {
        let mut corpus = Self::new();
        for (i, record) in records.into_iter().enumerate() {
            corpus.insert(record, i + 1)?;
        }
        Ok(corpus)
    }

    fn insert(&mut self, record: AuctionRecord, row: usize) -> Result<(), CorpusError> {
        if self.by_id.contains_key(&record.record_id) {
            return Err(CorpusError::DuplicateId {
                id: record.record_id,
                row,
            });
        }
        self.by_id.insert(record.record_id.clone(), self.records.len());
        self.records.push(record);
        Ok(())
    }

    pub fn get(&self, record_id: &str) -> Option<&AuctionRecord> {
        self.by_id.get(record_id).map(|&i| &self.records[i])
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    /// Records in ingestion order.
    pub fn iter(&self) -> std::slice::Iter<'_, AuctionRecord> {
        self.records.iter()
    }

    pub fn records(&self) -> &[AuctionRecord] {
        &self.records
    }

    /// Writes one JSON object per line with keys in [`FIELD_NAMES`] order.
    pub fn write_jsonl<W: Write>(&self, mut out: W) -> std::io::Result<()> {
        for record in &self.records {
            let mut map = serde_json::Map::new();
            for name in FIELD_NAMES {
                let value = match record.field(name).flatten() {
                    Some(v) => Value::String(v),
                    None => Value::Null,
                };
                map.insert(name.to_string(), value);
            }
            serde_json::to_writer(&mut out, &Value::Object(map))?;
            out.write_all(b"\n")?;
        }
        out.flush()
    }
}

impl<'a> IntoIterator for &'a Corpus {
    type Item = &'a AuctionRecord;
    type IntoIter = std::slice::Iter<'a, AuctionRecord>;

    fn into_iter(self) -> Self::IntoIter {
        self.records.iter()
    }
}

/// Convenience lookup mirroring [`Corpus::get`].
pub fn get_record<'a>(corpus: &'a Corpus, record_id: &str) -> Option<&'a AuctionRecord> {
    corpus.get(record_id)
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct RejectedRow {
    /// 1-based data row (header excluded; blank JSONL lines are not counted).
    pub row: usize,
    pub reason: String,
}

#[derive(Debug, Clone)]
pub struct ParseOutcome {
    pub corpus: Corpus,
    pub rejected: Vec<RejectedRow>,
    /// Number of values dropped because their column/key is not a record field.
    pub dropped_unknown: usize,
    pub unknown_columns: Vec<String>,
    pub data_rows: usize,
}

/// Accepts `YYYY-MM-DD`, `YYYY-MM-DD HH:MM:SS`, RFC 3339-ish `T` timestamps and `DD.MM.YYYY`.
pub fn parse_sale_date(raw: &str) -> Option<NaiveDate> {
    let raw = raw.trim();
    let date_part = raw.split([' ', 'T']).next().unwrap_or(raw);
    NaiveDate::parse_from_str(date_part, "%Y-%m-%d")
        .or_else(|_| NaiveDate::parse_from_str(date_part, "%d.%m.%Y"))
        .ok()
}

fn non_empty(value: Option<String>) -> Option<String> {
    value.map(|v| v.trim().to_string()).filter(|v| !v.is_empty())
}

/// Builds a record from named raw values; `Err` carries the rejection reason.
fn record_from_fields(mut fields: HashMap<&'static str, String>) -> Result<AuctionRecord, String> {
    let record_id = non_empty(fields.remove("record_id")).ok_or("missing record_id")?;
    let sale_date = match non_empty(fields.remove("sale_date")) {
        None => None,
        Some(raw) => Some(parse_sale_date(&raw).ok_or_else(|| format!("unparseable sale_date {raw:?}"))?),
    };
    let mut take = |k: &str| non_empty(fields.remove(k));
    Ok(AuctionRecord {
        record_id,
        artist: take("artist").unwrap_or_default(),
        title: take("title").unwrap_or_default(),
        object_type: take("object_type").unwrap_or_default(),
        material: take("material"),
        dimensions: take("dimensions"),
        auction_house: take("auction_house").unwrap_or_default(),
        sale_date,
        catalogue_number: take("catalogue_number"),
        source_url: take("source_url"),
    })
}

fn known_field(name: &str) -> Option<&'static str> {
    FIELD_NAMES.iter().copied().find(|f| *f == name.trim())
}

/// Parses a CSV or JSONL export into a corpus.
///
/// Malformed rows are skipped and reported; a duplicate record id aborts the parse.
pub fn parse_records<R: Read>(source: R, format: SourceFormat) -> Result<ParseOutcome, CorpusError> {
    match format {
        SourceFormat::Csv => parse_csv(source),
        SourceFormat::Jsonl => parse_jsonl(source),
    }
}

fn parse_csv<R: Read>(source: R) -> Result<ParseOutcome, CorpusError> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(true)
        .flexible(true)
        .from_reader(source);
    let headers = reader.headers()?.clone();
    let columns: Vec<Option<&'static str>> = headers.iter().map(known_field).collect();
    if !columns.contains(&Some("record_id")) {
        return Err(CorpusError::MissingIdColumn);
    }
    let unknown_columns: Vec<String> = headers
        .iter()
        .zip(&columns)
        .filter(|(_, c)| c.is_none())
        .map(|(h, _)| h.to_string())
        .collect();

    let mut out = ParseOutcome {
        corpus: Corpus::new(),
        rejected: Vec::new(),
        dropped_unknown: 0,
        unknown_columns,
        data_rows: 0,
    };
    for (i, row) in reader.records().enumerate() {
        let row_no = i + 1;
        out.data_rows += 1;
        let row = match row {
            Ok(row) => row,
            Err(e) => {
                out.rejected.push(RejectedRow { row: row_no, reason: e.to_string() });
                continue;
            }
        };
        let mut fields = HashMap::new();
        for (value, column) in row.iter().zip(&columns) {
            match column {
                Some(name) => {
                    fields.insert(*name, value.to_string());
                }
                None if !value.is_empty() => out.dropped_unknown += 1,
                None => {}
            }
        }
        match record_from_fields(fields) {
            Ok(record) => out.corpus.insert(record, row_no)?,
            Err(reason) => out.rejected.push(RejectedRow { row: row_no, reason }),
        }
    }
    if out.dropped_unknown > 0 {
        tracing::warn!(dropped = out.dropped_unknown, columns = ?out.unknown_columns, "dropped unknown columns");
    }
    Ok(out)
}

fn json_scalar(value: Value) -> Option<String> {
    match value {
        Value::Null => None,
        Value::String(s) => Some(s),
        Value::Number(n) => Some(n.to_string()),
        Value::Bool(b) => Some(b.to_string()),
        other => Some(other.to_string()),
    }
}

fn parse_jsonl<R: Read>(source: R) -> Result<ParseOutcome, CorpusError> {
    let mut out = ParseOutcome {
        corpus: Corpus::new(),
        rejected: Vec::new(),
        dropped_unknown: 0,
        unknown_columns: Vec::new(),
        data_rows: 0,
    };
    for line in BufReader::new(source).lines() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        out.data_rows += 1;
        let row_no = out.data_rows;
        let object = match serde_json::from_str::<Value>(&line) {
            Ok(Value::Object(map)) => map,
            Ok(_) => {
                out.rejected.push(RejectedRow { row: row_no, reason: "line is not a JSON object".into() });
                continue;
            }
            Err(e) => {
                out.rejected.push(RejectedRow { row: row_no, reason: format!("invalid JSON: {e}") });
                continue;
            }
        };
        let mut fields = HashMap::new();
        for (key, value) in object {
            match known_field(&key) {
                Some(name) => {
                    if let Some(v) = json_scalar(value) {
                        fields.insert(name, v);
                    }
                }
                None => {
                    out.dropped_unknown += 1;
                    if !out.unknown_columns.contains(&key) {
                        out.unknown_columns.push(key);
                    }
                }
            }
        }
        match record_from_fields(fields) {
            Ok(record) => out.corpus.insert(record, row_no)?,
            Err(reason) => out.rejected.push(RejectedRow { row: row_no, reason }),
        }
    }
    if out.dropped_unknown > 0 {
        tracing::warn!(dropped = out.dropped_unknown, keys = ?out.unknown_columns, "dropped unknown keys");
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    const HEADER: &str =
        "record_id,artist,title,object_type,material,dimensions,auction_house,sale_date,catalogue_number,source_url\n";

    fn dix_row() -> String {
        format!(
            "{HEADER}D1,\"Dix, Otto\",Mutter und Kind,Gemälde,,76 cm x 70 cm,Fischer,1939-06-30,,http://digi.ub.uni-heidelberg.de/diglit/fischer1939_06_30\n"
        )
    }

    #[test]
    fn parses_dix_row() {
        let out = parse_records(dix_row().as_bytes(), SourceFormat::Csv).unwrap();
        assert_eq!(out.corpus.len(), 1);
        assert!(out.rejected.is_empty());
        let r = out.corpus.get("D1").unwrap();
        assert_eq!(r.artist, "Dix, Otto");
        assert_eq!(r.auction_house, "Fischer");
        assert_eq!(r.object_type, "Gemälde");
        assert_eq!(r.dimensions.as_deref(), Some("76 cm x 70 cm"));
        assert_eq!(r.sale_date, NaiveDate::from_ymd_opt(1939, 6, 30));
        assert_eq!(r.material, None);
        assert_eq!(
            r.source_url.as_deref(),
            Some("http://digi.ub.uni-heidelberg.de/diglit/fischer1939_06_30")
        );
    }

    #[test]
    fn header_only_is_empty_corpus() {
        let out = parse_records(HEADER.as_bytes(), SourceFormat::Csv).unwrap();
        assert!(out.corpus.is_empty());
        assert!(out.rejected.is_empty());
        assert_eq!(out.data_rows, 0);
    }

    #[test]
    fn missing_id_row_is_rejected() {
        let src = format!("{HEADER}A,x,,,,,H,1930-01-01,,\n,y,,,,,H,1930-01-01,,\nC,z,,,,,H,1930-01-02,,\n");
        let out = parse_records(src.as_bytes(), SourceFormat::Csv).unwrap();
        assert_eq!(out.corpus.len(), 2);
        assert_eq!(out.rejected.len(), 1);
        assert_eq!(out.rejected[0].row, 2);
        assert_eq!(out.rejected.len() + out.corpus.len(), out.data_rows);
    }

    #[test]
    fn bad_date_is_rejected() {
        let src = format!("{HEADER}A,x,,,,,H,1930-02-30,,\n");
        let out = parse_records(src.as_bytes(), SourceFormat::Csv).unwrap();
        assert!(out.corpus.is_empty());
        assert!(out.rejected[0].reason.contains("sale_date"));
    }

    #[test]
    fn duplicate_id_is_fatal() {
        let src = format!("{HEADER}A,x,,,,,H,,,\nA,y,,,,,H,,,\n");
        match parse_records(src.as_bytes(), SourceFormat::Csv) {
            Err(CorpusError::DuplicateId { id, row }) => {
                assert_eq!(id, "A");
                assert_eq!(row, 2);
            }
            other => panic!("expected DuplicateId, got {other:?}"),
        }
    }

    #[test]
    fn unknown_columns_are_counted() {
        let src = "record_id,artist,lot_notes\nA,x,foo\nB,y,\n";
        let out = parse_records(src.as_bytes(), SourceFormat::Csv).unwrap();
        assert_eq!(out.corpus.len(), 2);
        assert_eq!(out.dropped_unknown, 1);
        assert_eq!(out.unknown_columns, vec!["lot_notes".to_string()]);
    }

    #[test]
    fn timestamp_dates_are_canonicalized() {
        assert_eq!(parse_sale_date("1939-06-30 00:00:00"), NaiveDate::from_ymd_opt(1939, 6, 30));
        assert_eq!(parse_sale_date("30.06.1939"), NaiveDate::from_ymd_opt(1939, 6, 30));
        assert_eq!(parse_sale_date("June 1939"), None);
    }

    #[test]
    fn jsonl_rows() {
        let src = "{\"record_id\":\"A\",\"artist\":\"x\",\"catalogue_number\":12,\"extra\":1}\n\nnot json\n{\"artist\":\"y\"}\n";
        let out = parse_records(src.as_bytes(), SourceFormat::Jsonl).unwrap();
        assert_eq!(out.corpus.len(), 1);
        assert_eq!(out.data_rows, 3);
        assert_eq!(out.rejected.iter().map(|r| r.row).collect::<Vec<_>>(), vec![2, 3]);
        assert_eq!(out.corpus.get("A").unwrap().catalogue_number.as_deref(), Some("12"));
        assert_eq!(out.dropped_unknown, 1);
    }

    #[test]
    fn sparse_record_omits_absent_clauses() {
        let mut r = AuctionRecord::new("R");
        r.artist = "Dix, Otto".into();
        r.auction_house = "Fischer".into();
        r.sale_date = NaiveDate::from_ymd_opt(1939, 6, 30);
        let doc = augment(&r);
        assert_eq!(
            doc.text,
            "Auction House: Fischer Sale Date: 1939-06-30 Artist: Dix, Otto Metadata: \
             {'sale_date': '1939-06-30', 'artist': 'Dix, Otto', 'auction_house': 'Fischer'}"
        );
        assert!(!doc.text.contains("Material:"));
        assert!(!doc.text.contains("Title:"));
        assert_eq!(doc.char_length, doc.text.chars().count());
    }

    #[test]
    fn augment_is_deterministic() {
        let out = parse_records(dix_row().as_bytes(), SourceFormat::Csv).unwrap();
        let r = out.corpus.get("D1").unwrap();
        assert_eq!(augment(r), augment(r));
    }

    #[test]
    fn metadata_quotes_are_escaped() {
        let mut r = AuctionRecord::new("Q");
        r.artist = "O'Keeffe, Georgia".into();
        assert!(augment(&r).text.contains(r"'artist': 'O\'Keeffe, Georgia'"));
    }

    #[test]
    fn lookup() {
        let out = parse_records(dix_row().as_bytes(), SourceFormat::Csv).unwrap();
        assert_eq!(get_record(&out.corpus, "D1").unwrap().record_id, "D1");
        assert!(get_record(&out.corpus, "missing").is_none());
    }

    #[test]
    fn public_source_falls_back_to_catalogue() {
        let mut r = AuctionRecord::new("R");
        r.auction_house = "Hahn (Heinrich)".into();
        r.sale_date = NaiveDate::from_ymd_opt(1944, 3, 21);
        assert_eq!(r.public_source(), "Hahn (Heinrich) 1944 Auction Catalogue");
        r.source_url = Some("http://example.org/scan".into());
        assert_eq!(r.public_source(), "http://example.org/scan");
    }
}
