use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};

use super::EvalError;
use crate::corpus::{AuctionRecord, Corpus, FIELD_NAMES};

/// Boolean filter over record fields, standing in for a SQL `WHERE` clause.
///
/// Serialized externally tagged, e.g.
/// `{"and": [{"contains": {"field": "artist", "value": "dix"}}, {"year_equals": {"field": "sale_date", "year": 1939}}]}`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Predicate {
    /// Exact, case-sensitive match against the canonical field value.
    Equals { field: String, value: String },
    /// Case-insensitive substring match; absent fields never match.
    Contains { field: String, value: String },
    YearEquals { field: String, year: i32 },
    And(Vec<Predicate>),
    Or(Vec<Predicate>),
    Not(Box<Predicate>),
}

impl Predicate {
    pub fn equals(field: &str, value: &str) -> Self {
        Self::Equals { field: field.into(), value: value.into() }
    }

    pub fn contains(field: &str, value: &str) -> Self {
        Self::Contains { field: field.into(), value: value.into() }
    }

    pub fn year_equals(field: &str, year: i32) -> Self {
        Self::YearEquals { field: field.into(), year }
    }

    pub fn not(inner: Predicate) -> Self {
        Self::Not(Box::new(inner))
    }

    /// Checks that every referenced field exists.
    pub fn validate(&self) -> Result<(), EvalError> {
        match self {
            Self::Equals { field, .. } | Self::Contains { field, .. } => {
                if FIELD_NAMES.contains(&field.as_str()) {
                    Ok(())
                } else {
                    Err(EvalError::UnknownField(field.clone()))
                }
            }
            Self::YearEquals { field, .. } => match field.as_str() {
                "sale_date" => Ok(()),
                f if FIELD_NAMES.contains(&f) => Err(EvalError::NotADateField(field.clone())),
                _ => Err(EvalError::UnknownField(field.clone())),
            },
            Self::And(ps) | Self::Or(ps) => ps.iter().try_for_each(Predicate::validate),
            Self::Not(p) => p.validate(),
        }
    }

    /// Evaluates a validated predicate.
    pub fn matches(&self, record: &AuctionRecord) -> bool {
        match self {
            Self::Equals { field, value } => record.field(field).flatten().is_some_and(|v| &v == value),
            Self::Contains { field, value } => record
                .field(field)
                .flatten()
                .is_some_and(|v| v.to_lowercase().contains(&value.to_lowercase())),
            Self::YearEquals { year, .. } => {
                record.sale_date.is_some_and(|d| chrono::Datelike::year(&d) == *year)
            }
            Self::And(ps) => ps.iter().all(|p| p.matches(record)),
            Self::Or(ps) => ps.iter().any(|p| p.matches(record)),
            Self::Not(p) => !p.matches(record),
        }
    }
}

/// Ids of all records satisfying `pred`.
pub fn ground_truth(pred: &Predicate, corpus: &Corpus) -> Result<BTreeSet<String>, EvalError> {
    pred.validate()?;
    Ok(corpus.iter().filter(|r| pred.matches(r)).map(|r| r.record_id.clone()).collect())
}
