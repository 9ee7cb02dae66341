use std::collections::BTreeSet;

use super::{Category, EvalError};

/// Share of `expected` found in `observed`, in percent.
///
/// Extra observed ids never lower the score. `None` when nothing is expected;
/// out-of-scope queries are scored with [`out_of_scope_score`] instead.
pub fn completeness(expected: &BTreeSet<String>, observed: &BTreeSet<String>) -> Option<f64> {
    if expected.is_empty() {
        return None;
    }
    let found = expected.intersection(observed).count();
    Some(100.0 * found as f64 / expected.len() as f64)
}

/// 100 when an out-of-scope query produced no relevant records, else 0.
pub fn out_of_scope_score(category: Category, final_ids: &BTreeSet<String>) -> Result<f64, EvalError> {
    if category != Category::OutOfScope {
        return Err(EvalError::WrongCategory(category));
    }
    Ok(if final_ids.is_empty() { 100.0 } else { 0.0 })
}

/// One-decimal display form used in report tables.
pub fn display_percent(value: f64) -> String {
    format!("{value:.1}")
}
