use std::collections::BTreeMap;
use std::io::{BufRead, BufReader, Read};

use chrono::{DateTime, Utc};
use serde::{Deserialize, Serialize};

use super::EvalError;

/// A human 1–3 judgement of a query's final output.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RatingSubmission {
    pub query_id: String,
    pub rating: u8,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub note: Option<String>,
    pub timestamp: DateTime<Utc>,
}

pub fn validate_rating(rating: i64) -> Result<u8, EvalError> {
    match rating {
        1..=3 => Ok(rating as u8),
        _ => Err(EvalError::InvalidRating(rating)),
    }
}

/// Reads `query_id,rating` rows; `#` lines are comments and later rows win.
pub fn load_ratings_csv<R: Read>(source: R) -> Result<BTreeMap<String, u8>, EvalError> {
    let mut reader = csv::ReaderBuilder::new().comment(Some(b'#')).trim(csv::Trim::All).from_reader(source);
    let mut out = BTreeMap::new();
    for row in reader.deserialize::<(String, i64)>() {
        let (query_id, rating) = row?;
        out.insert(query_id, validate_rating(rating)?);
    }
    Ok(out)
}

/// Reads an append-only JSONL journal of submissions.
pub fn read_rating_journal<R: Read>(source: R) -> Result<Vec<RatingSubmission>, EvalError> {
    let mut out = Vec::new();
    for (i, line) in BufReader::new(source).lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let sub: RatingSubmission =
            serde_json::from_str(&line).map_err(|e| EvalError::BadLine { line: i + 1, message: e.to_string() })?;
        validate_rating(sub.rating as i64)?;
        out.push(sub);
    }
    Ok(out)
}

/// Latest rating per query, by journal order.
pub fn latest_ratings(journal: &[RatingSubmission]) -> BTreeMap<String, u8> {
    journal.iter().map(|s| (s.query_id.clone(), s.rating)).collect()
}
