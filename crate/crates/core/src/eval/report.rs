use std::collections::BTreeSet;
use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use super::{display_percent, Category, EvalError};
use crate::embedding::EmbeddingSpec;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QueryResultMetrics {
    pub query_id: String,
    pub text: String,
    pub category: Category,
    pub language_tag: String,
    pub approximate_ground_truth: bool,
    pub expected_ids: BTreeSet<String>,
    /// Top-k in rank order.
    pub retrieved_ids: Vec<String>,
    pub final_ids: Vec<String>,
    pub retrieval_completeness: Option<f64>,
    pub output_completeness: Option<f64>,
    pub manual_rating: Option<u8>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CategoryRow {
    pub category: Category,
    pub query_count: usize,
    pub mean_retrieval_completeness: Option<f64>,
    pub mean_output_completeness: Option<f64>,
    pub mean_rating: Option<f64>,
    pub approximate_ground_truth: bool,
    pub failed_queries: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConfigSnapshot {
    pub k: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub similarity_floor: Option<f32>,
    pub embedder: EmbeddingSpec,
    pub client: String,
    pub template_version: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvaluationReport {
    pub generated_at: String,
    pub config: ConfigSnapshot,
    pub queries: Vec<QueryResultMetrics>,
    pub categories: Vec<CategoryRow>,
}

fn mean(values: impl Iterator<Item = f64>) -> Option<f64> {
    let (sum, n) = values.fold((0.0, 0usize), |(s, n), v| (s + v, n + 1));
    (n > 0).then(|| sum / n as f64)
}

impl EvaluationReport {
    /// Builds category rows from per-query metrics, sorted by query id.
    pub fn assemble(mut queries: Vec<QueryResultMetrics>, config: ConfigSnapshot) -> Self {
        queries.sort_by(|a, b| a.query_id.cmp(&b.query_id));
        let categories = Category::ALL
            .iter()
            .filter_map(|&category| {
                let members: Vec<&QueryResultMetrics> = queries.iter().filter(|q| q.category == category).collect();
                if members.is_empty() {
                    return None;
                }
                Some(CategoryRow {
                    category,
                    query_count: members.len(),
                    mean_retrieval_completeness: mean(members.iter().filter_map(|q| q.retrieval_completeness)),
                    mean_output_completeness: mean(members.iter().filter_map(|q| q.output_completeness)),
                    mean_rating: mean(members.iter().filter_map(|q| q.manual_rating.map(f64::from))),
                    approximate_ground_truth: members.iter().any(|q| q.approximate_ground_truth),
                    failed_queries: members.iter().filter(|q| q.error.is_some()).count(),
                })
            })
            .collect();
        Self { generated_at: chrono::Utc::now().to_rfc3339(), config, queries, categories }
    }

    pub fn category(&self, category: Category) -> Option<&CategoryRow> {
        self.categories.iter().find(|r| r.category == category)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ReportFormat {
    TableText,
    Json,
    Csv,
}

impl std::str::FromStr for ReportFormat {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "table" | "table-text" | "text" => Ok(Self::TableText),
            "json" => Ok(Self::Json),
            "csv" => Ok(Self::Csv),
            other => Err(format!("unknown report format {other:?} (expected table-text, json or csv)")),
        }
    }
}

pub const TABLE_HEADERS: [&str; 4] =
    ["Query Category", "Number of Queries", "Average Completeness (%)", "Average Output Rating"];

const CSV_HEADERS: [&str; 7] = [
    "category",
    "query_count",
    "mean_retrieval_completeness",
    "mean_output_completeness",
    "mean_rating",
    "approximate_ground_truth",
    "failed_queries",
];

fn table(out: &mut String, title: &str, rows: &[[String; 4]]) {
    let mut widths = TABLE_HEADERS.map(|h| h.chars().count());
    for row in rows {
        for (w, cell) in widths.iter_mut().zip(row) {
            *w = (*w).max(cell.chars().count());
        }
    }
    let line = |cells: &[&str]| {
        let padded: Vec<String> = cells.iter().zip(widths).map(|(c, w)| format!("{c:<w$}")).collect();
        padded.join(" | ").trim_end().to_string()
    };
    let _ = writeln!(out, "{title}");
    let _ = writeln!(out, "{}", line(&TABLE_HEADERS));
    let _ = writeln!(out, "{}", widths.iter().map(|w| "-".repeat(*w)).collect::<Vec<_>>().join("-|-"));
    for row in rows {
        let cells: Vec<&str> = row.iter().map(String::as_str).collect();
        let _ = writeln!(out, "{}", line(&cells));
    }
}

fn render_table(report: &EvaluationReport) -> String {
    let rating = |r: &CategoryRow| r.mean_rating.map(|v| format!("{v:.2}")).unwrap_or_else(|| "n/a".into());
    let pct = |v: Option<f64>| v.map(display_percent).unwrap_or_else(|| "n/a".into());
    let name = |r: &CategoryRow| {
        if r.approximate_ground_truth {
            format!("{} *", r.category.display_name())
        } else {
            r.category.display_name().to_string()
        }
    };
    let rows = |stage: fn(&CategoryRow) -> Option<f64>| -> Vec<[String; 4]> {
        report
            .categories
            .iter()
            .map(|r| [name(r), r.query_count.to_string(), pct(stage(r)), rating(r)])
            .collect()
    };

    let mut out = String::new();
    table(
        &mut out,
        &format!("Retrieval stage (top-{} candidates)", report.config.k),
        &rows(|r| r.mean_retrieval_completeness),
    );
    out.push('\n');
    table(&mut out, "Output stage (final summarised records)", &rows(|r| r.mean_output_completeness));
    if report.categories.iter().any(|r| r.approximate_ground_truth) {
        out.push_str("\n* expected records approximated by keyword predicates\n");
    }
    let failed: Vec<&str> =
        report.queries.iter().filter(|q| q.error.is_some()).map(|q| q.query_id.as_str()).collect();
    if !failed.is_empty() {
        let _ = writeln!(out, "\nFailed queries: {}", failed.join(", "));
    }
    out
}

fn render_csv(report: &EvaluationReport) -> Result<Vec<u8>, EvalError> {
    let opt = |v: Option<f64>| v.map(|v| v.to_string()).unwrap_or_default();
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(CSV_HEADERS)?;
    for r in &report.categories {
        w.write_record([
            r.category.display_name().to_string(),
            r.query_count.to_string(),
            opt(r.mean_retrieval_completeness),
            opt(r.mean_output_completeness),
            opt(r.mean_rating),
            r.approximate_ground_truth.to_string(),
            r.failed_queries.to_string(),
        ])?;
    }
    w.into_inner().map_err(|e| EvalError::Io(e.into_error()))
}

/// Renders the report. CSV rows carry full-precision category means.
pub fn render_report(report: &EvaluationReport, format: ReportFormat) -> Result<Vec<u8>, EvalError> {
    match format {
        ReportFormat::TableText => Ok(render_table(report).into_bytes()),
        ReportFormat::Json => {
            let mut v = serde_json::to_vec_pretty(report).map_err(|e| EvalError::Config(e.to_string()))?;
            v.push(b'\n');
            Ok(v)
        }
        ReportFormat::Csv => render_csv(report),
    }
}
