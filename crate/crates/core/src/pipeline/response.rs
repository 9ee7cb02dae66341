//! Structured model output: the fenced JSON contract, tolerant parsing with
//! no-fabrication enforcement, and the human-readable rendering.

use std::collections::{HashMap, HashSet};
use std::fmt;

use serde::{Deserialize, Deserializer, Serialize, Serializer};
use serde_json::Value;
use thiserror::Error;

pub const NOT_SPECIFIED: &str = "Not specified";
pub const NOT_PROVIDED: &str = "Not provided";

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum ParseError {
    #[error("no structured JSON block found in model output")]
    NoStructuredBlock,
    #[error("structured block does not match the output contract: {0}")]
    Schema(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum RelevanceLabel {
    HighlyRelevant,
    PartiallyRelevant,
    Irrelevant,
}

impl RelevanceLabel {
    pub fn as_str(self) -> &'static str {
        match self {
            Self::HighlyRelevant => "HighlyRelevant",
            Self::PartiallyRelevant => "PartiallyRelevant",
            Self::Irrelevant => "Irrelevant",
        }
    }

    pub fn display_name(self) -> &'static str {
        match self {
            Self::HighlyRelevant => "Highly Relevant",
            Self::PartiallyRelevant => "Partially Relevant",
            Self::Irrelevant => "Irrelevant",
        }
    }

    /// Position on the 1-3 manual rating scale.
    pub fn rating(self) -> u8 {
        match self {
            Self::HighlyRelevant => 3,
            Self::PartiallyRelevant => 2,
            Self::Irrelevant => 1,
        }
    }

    /// Accepts `HighlyRelevant`, `Highly Relevant`, `highly_relevant`, etc.
    pub fn parse_loose(s: &str) -> Option<Self> {
        let key: String = s.chars().filter(|c| c.is_alphanumeric()).collect::<String>().to_lowercase();
        match key.as_str() {
            "highlyrelevant" | "relevant" | "high" | "3" => Some(Self::HighlyRelevant),
            "partiallyrelevant" | "partlyrelevant" | "partial" | "somewhatrelevant" | "2" => {
                Some(Self::PartiallyRelevant)
            }
            "irrelevant" | "notrelevant" | "none" | "1" => Some(Self::Irrelevant),
            _ => None,
        }
    }
}

impl fmt::Display for RelevanceLabel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.display_name())
    }
}

impl Serialize for RelevanceLabel {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        s.serialize_str(self.as_str())
    }
}

impl<'de> Deserialize<'de> for RelevanceLabel {
    fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        let raw = Value::deserialize(d)?;
        let text = match &raw {
            Value::String(s) => s.clone(),
            Value::Number(n) => n.to_string(),
            other => other.to_string(),
        };
        Self::parse_loose(&text).ok_or_else(|| serde::de::Error::custom(format!("unknown relevance label {text:?}")))
    }
}

fn not_specified() -> String {
    NOT_SPECIFIED.to_string()
}

fn not_provided() -> String {
    NOT_PROVIDED.to_string()
}

/// Strings, numbers or null; null and blank become the given placeholder later.
fn lenient_string<'de, D: Deserializer<'de>>(d: D) -> Result<Option<String>, D::Error> {
    Ok(match Value::deserialize(d)? {
        Value::Null => None,
        Value::String(s) => Some(s),
        other => Some(other.to_string()),
    })
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ObjectSummary {
    pub record_id: String,
    #[serde(default = "not_specified")]
    pub title: String,
    #[serde(default = "not_specified")]
    pub artist: String,
    #[serde(default = "not_specified")]
    pub auction_house: String,
    #[serde(default = "not_specified")]
    pub material: String,
    #[serde(default = "not_specified")]
    pub dimensions: String,
    #[serde(default = "not_specified")]
    pub description: String,
    #[serde(default = "not_specified")]
    pub location: String,
    #[serde(default = "not_provided")]
    pub provenance_info: String,
    #[serde(default = "not_specified")]
    pub public_source: String,
}

impl ObjectSummary {
    pub fn empty(record_id: impl Into<String>) -> Self {
        Self {
            record_id: record_id.into(),
            title: not_specified(),
            artist: not_specified(),
            auction_house: not_specified(),
            material: not_specified(),
            dimensions: not_specified(),
            description: not_specified(),
            location: not_specified(),
            provenance_info: not_provided(),
            public_source: not_specified(),
        }
    }
}

/// Raw, possibly incomplete object as a model may emit it.
#[derive(Debug, Deserialize)]
struct LooseObject {
    #[serde(default, deserialize_with = "lenient_string")]
    record_id: Option<String>,
    #[serde(flatten)]
    rest: HashMap<String, Value>,
}

impl LooseObject {
    fn into_summary(self, record_id: String) -> ObjectSummary {
        let mut s = ObjectSummary::empty(record_id);
        let get = |key: &str, slot: &mut String| {
            if let Some(v) = self.rest.get(key) {
                let text = match v {
                    Value::String(t) => t.trim().to_string(),
                    Value::Null => String::new(),
                    other => other.to_string(),
                };
                if !text.is_empty() {
                    *slot = text;
                }
            }
        };
        get("title", &mut s.title);
        get("artist", &mut s.artist);
        get("auction_house", &mut s.auction_house);
        get("material", &mut s.material);
        get("dimensions", &mut s.dimensions);
        get("description", &mut s.description);
        get("location", &mut s.location);
        get("provenance_info", &mut s.provenance_info);
        get("public_source", &mut s.public_source);
        s
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Exclusion {
    pub record_id: String,
    pub reason: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RelevanceJudgement {
    pub record_id: String,
    pub label: RelevanceLabel,
    #[serde(default)]
    pub reason: String,
}

/// The JSON object inside the fenced block.
#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct ModelOutput {
    #[serde(default)]
    pub classification: String,
    #[serde(default)]
    pub relevant_objects: Vec<ObjectSummary>,
    #[serde(default)]
    pub exclusions: Vec<Exclusion>,
    #[serde(default)]
    pub relevance_labels: Vec<RelevanceJudgement>,
}

#[derive(Debug, Deserialize)]
struct LooseOutput {
    #[serde(default, alias = "query_classification", deserialize_with = "lenient_string")]
    classification: Option<String>,
    #[serde(default)]
    relevant_objects: Vec<LooseObject>,
    #[serde(default)]
    exclusions: Vec<LooseExclusion>,
    #[serde(default)]
    relevance_labels: Vec<LooseJudgement>,
}

#[derive(Debug, Deserialize)]
struct LooseExclusion {
    #[serde(default, deserialize_with = "lenient_string")]
    record_id: Option<String>,
    #[serde(default, deserialize_with = "lenient_string")]
    reason: Option<String>,
}

#[derive(Debug, Deserialize)]
struct LooseJudgement {
    #[serde(default, deserialize_with = "lenient_string")]
    record_id: Option<String>,
    #[serde(default, deserialize_with = "lenient_string")]
    label: Option<String>,
    #[serde(default, deserialize_with = "lenient_string")]
    reason: Option<String>,
}

/// Parsed and sanitized generation result.
#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct GenerationResult {
    pub query_classification: String,
    pub relevant_objects: Vec<ObjectSummary>,
    pub exclusions: Vec<Exclusion>,
    pub relevance_labels: Vec<RelevanceJudgement>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub warnings: Vec<String>,
}

impl GenerationResult {
    /// Ids of the relevant objects, in the model's order.
    pub fn final_ids(&self) -> Vec<String> {
        self.relevant_objects.iter().map(|o| o.record_id.clone()).collect()
    }

    /// Every record id the result refers to.
    pub fn mentioned_ids(&self) -> HashSet<&str> {
        self.relevant_objects
            .iter()
            .map(|o| o.record_id.as_str())
            .chain(self.exclusions.iter().map(|e| e.record_id.as_str()))
            .chain(self.relevance_labels.iter().map(|l| l.record_id.as_str()))
            .collect()
    }

    pub fn label_of(&self, record_id: &str) -> Option<RelevanceLabel> {
        self.relevance_labels.iter().find(|l| l.record_id == record_id).map(|l| l.label)
    }

    pub fn to_model_output(&self) -> ModelOutput {
        ModelOutput {
            classification: self.query_classification.clone(),
            relevant_objects: self.relevant_objects.clone(),
            exclusions: self.exclusions.clone(),
            relevance_labels: self.relevance_labels.clone(),
        }
    }
}

/// Finds the structured object: a ```json fence first, then any fence, then
/// the first bare `{...}` that carries one of the contract keys.
fn extract_block(raw: &str) -> Option<Value> {
    const KEYS: [&str; 4] = ["classification", "relevant_objects", "exclusions", "relevance_labels"];
    let has_contract_key = |v: &Value| v.as_object().is_some_and(|m| KEYS.iter().any(|k| m.contains_key(*k)));

    let mut fenced = Vec::new();
    let mut rest = raw;
    while let Some(start) = rest.find("```") {
        let after = &rest[start + 3..];
        let Some(end) = after.find("```") else { break };
        let body = &after[..end];
        let (tag, content) = match body.find('\n') {
            Some(nl) => (body[..nl].trim(), &body[nl + 1..]),
            None => ("", body),
        };
        fenced.push((tag.eq_ignore_ascii_case("json"), content));
        rest = &after[end + 3..];
    }
    fenced.sort_by_key(|(is_json, _)| !*is_json);
    for (_, content) in fenced {
        if let Ok(v) = serde_json::from_str::<Value>(content.trim()) {
            if has_contract_key(&v) {
                return Some(v);
            }
        }
    }

    for (i, _) in raw.match_indices('{') {
        let mut stream = serde_json::Deserializer::from_str(&raw[i..]).into_iter::<Value>();
        if let Some(Ok(v)) = stream.next() {
            if has_contract_key(&v) {
                return Some(v);
            }
        }
    }
    None
}

/// Parses a model reply against the retrieved context.
///
/// Anything that refers to a record id outside `context_ids` is dropped with a
/// warning. Every context record ends up with exactly one relevance label and
/// every context record that is not a relevant object gets an exclusion.
pub fn parse_response(raw: &str, context_ids: &[String]) -> Result<GenerationResult, ParseError> {
    let value = extract_block(raw).ok_or(ParseError::NoStructuredBlock)?;
    let loose: LooseOutput = serde_json::from_value(value).map_err(|e| ParseError::Schema(e.to_string()))?;

    let known: HashSet<&str> = context_ids.iter().map(String::as_str).collect();
    let mut warnings = Vec::new();
    let mut accept = |id: Option<String>, what: &str, seen: &mut HashSet<String>| -> Option<String> {
        let id = id.map(|s| s.trim().to_string()).filter(|s| !s.is_empty());
        match id {
            None => {
                warnings.push(format!("dropped {what} without a record_id"));
                None
            }
            Some(id) if !known.contains(id.as_str()) => {
                warnings.push(format!("dropped {what} with unknown record_id {id:?}"));
                None
            }
            Some(id) if !seen.insert(id.clone()) => {
                warnings.push(format!("dropped duplicate {what} for {id:?}"));
                None
            }
            Some(id) => Some(id),
        }
    };

    let mut seen = HashSet::new();
    let relevant_objects: Vec<ObjectSummary> = loose
        .relevant_objects
        .into_iter()
        .filter_map(|o| {
            let id = accept(o.record_id.clone(), "relevant object", &mut seen)?;
            Some(o.into_summary(id))
        })
        .collect();
    let included: HashSet<String> = seen;

    let mut seen = HashSet::new();
    let mut exclusions: Vec<Exclusion> = Vec::new();
    for e in loose.exclusions {
        if let Some(id) = accept(e.record_id, "exclusion", &mut seen) {
            exclusions.push(Exclusion { record_id: id, reason: e.reason.unwrap_or_default() });
        }
    }

    let mut seen = HashSet::new();
    let mut labels: Vec<RelevanceJudgement> = Vec::new();
    let mut bad_labels = Vec::new();
    for j in loose.relevance_labels {
        let raw_label = j.label.clone().unwrap_or_default();
        let Some(label) = RelevanceLabel::parse_loose(&raw_label) else {
            bad_labels.push(format!("ignored unrecognised relevance label {raw_label:?}"));
            continue;
        };
        if let Some(id) = accept(j.record_id, "relevance label", &mut seen) {
            labels.push(RelevanceJudgement { record_id: id, label, reason: j.reason.unwrap_or_default() });
        }
    }
    warnings.extend(bad_labels);

    // Totality: one label per context record, one exclusion per non-included record.
    let labelled: HashSet<String> = labels.iter().map(|l| l.record_id.clone()).collect();
    for id in context_ids {
        if !labelled.contains(id) {
            let (label, reason) = if included.contains(id) {
                (RelevanceLabel::HighlyRelevant, "listed as a relevant object without an explicit label")
            } else {
                (RelevanceLabel::Irrelevant, "no relevance label returned by the model")
            };
            warnings.push(format!("filled missing relevance label for {id:?}"));
            labels.push(RelevanceJudgement { record_id: id.clone(), label, reason: reason.into() });
        }
    }
    exclusions.retain(|e| {
        let keep = !included.contains(&e.record_id);
        if !keep {
            warnings.push(format!("dropped exclusion for included record {:?}", e.record_id));
        }
        keep
    });
    let excluded: HashSet<String> = exclusions.iter().map(|e| e.record_id.clone()).collect();
    for id in context_ids {
        if !included.contains(id) && !excluded.contains(id) {
            let reason = labels
                .iter()
                .find(|l| &l.record_id == id)
                .map(|l| l.reason.clone())
                .filter(|r| !r.is_empty())
                .unwrap_or_else(|| "not selected by the model".to_string());
            exclusions.push(Exclusion { record_id: id.clone(), reason });
        }
    }

    for w in &warnings {
        tracing::warn!(warning = %w, "model output sanitized");
    }
    Ok(GenerationResult {
        query_classification: loose
            .classification
            .map(|c| c.trim().to_string())
            .filter(|c| !c.is_empty())
            .unwrap_or_else(|| "unclassified".to_string()),
        relevant_objects,
        exclusions,
        relevance_labels: labels,
        warnings,
    })
}

/// Human-readable report with the section headings historians expect.
pub fn render_text(output: &ModelOutput) -> String {
    let mut s = String::new();
    s.push_str(&format!("The research question is classified as {}.\n\n", output.classification));
    s.push_str("Relevant Objects:\n");
    if output.relevant_objects.is_empty() {
        s.push_str("\nNo relevant records were found among the retrieved candidates.\n");
    }
    for o in &output.relevant_objects {
        s.push('\n');
        s.push_str(&format!("- Record : {}\n", o.record_id));
        s.push_str(&format!("- Title : {}\n", o.title));
        s.push_str(&format!("- Artist : {}\n", o.artist));
        s.push_str(&format!("- Auction House : {}\n", o.auction_house));
        s.push_str(&format!("- Material : {}\n", o.material));
        s.push_str(&format!("- Dimensions : {}\n", o.dimensions));
        s.push_str(&format!("- Description : {}\n", o.description));
        s.push_str(&format!("- Location : {}\n", o.location));
        s.push_str(&format!("- Provenance Information : {}\n", o.provenance_info));
        s.push_str(&format!("- Public Source : {}\n", o.public_source));
    }
    s.push_str("\nExplanation of Inclusion/Exclusion Criteria:\n\n");
    for o in &output.relevant_objects {
        let reason = output
            .relevance_labels
            .iter()
            .find(|l| l.record_id == o.record_id)
            .map(|l| l.reason.as_str())
            .unwrap_or("");
        s.push_str(&format!("- Included {} '{}': {}\n", o.record_id, o.title, reason));
    }
    for e in &output.exclusions {
        s.push_str(&format!("- Excluded {}: {}\n", e.record_id, e.reason));
    }
    if output.relevant_objects.is_empty() && output.exclusions.is_empty() {
        s.push_str("- No candidate records to assess.\n");
    }
    s.push_str("\nRelevance Evaluation\n\n");
    for l in &output.relevance_labels {
        s.push_str(&format!("- {} – {}: {}\n", l.label.display_name(), l.record_id, l.reason));
    }
    s
}

/// Full model-style reply: readable sections followed by the fenced JSON block.
pub fn render_structured(output: &ModelOutput) -> String {
    let json = serde_json::to_string_pretty(output).expect("model output serializes");
    format!("{}\n```json\n{}\n```\n", render_text(output), json)
}
