use serde::{Deserialize, Serialize};

use super::RetrievedDocument;

/// Versioned system message; the wording lives in one template file.
pub const SYSTEM_TEMPLATE: &str = include_str!("../../templates/system_prompt_v1.txt");
pub const TEMPLATE_VERSION: &str = "v1";

pub const NO_CANDIDATES_BLOCK: &str = "No candidate records were retrieved for this query. \
Report that no relevant records were found: use the classification \"out-of-scope\", \
return empty relevant_objects, exclusions and relevance_labels lists, and explain why.";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ContextBlock {
    pub record_id: String,
    pub text: String,
    pub score: f32,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PromptBundle {
    pub system_message: String,
    /// Ordered by descending similarity.
    pub context_blocks: Vec<ContextBlock>,
    pub user_query: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ChatMessage {
    pub role: String,
    pub content: String,
}

pub fn record_marker(record_id: &str) -> String {
    format!("[record_id: {record_id}]")
}

/// Assembles the system message and context. Context keeps retrieval order.
pub fn build_prompt(query: &str, context: &[RetrievedDocument]) -> PromptBundle {
    PromptBundle {
        system_message: SYSTEM_TEMPLATE.trim_end().to_string(),
        context_blocks: context
            .iter()
            .map(|c| ContextBlock {
                record_id: c.hit.record_id.clone(),
                text: c.document.text.clone(),
                score: c.hit.score,
            })
            .collect(),
        user_query: query.to_string(),
    }
}

impl PromptBundle {
    pub fn context_ids(&self) -> Vec<String> {
        self.context_blocks.iter().map(|b| b.record_id.clone()).collect()
    }

    /// The user turn: the question, then one marked block per candidate.
    pub fn user_message(&self) -> String {
        let mut out = String::new();
        out.push_str("Research question:\n");
        out.push_str(&self.user_query);
        out.push_str("\n\n");
        if self.context_blocks.is_empty() {
            out.push_str(NO_CANDIDATES_BLOCK);
            out.push('\n');
            return out;
        }
        out.push_str(&format!(
            "Candidate records ({}, most similar first):\n",
            self.context_blocks.len()
        ));
        for block in &self.context_blocks {
            out.push('\n');
            out.push_str(&record_marker(&block.record_id));
            out.push_str(&format!(" (similarity {:.4})\n", block.score));
            out.push_str(&block.text);
            out.push('\n');
        }
        out
    }

    pub fn messages(&self) -> Vec<ChatMessage> {
        vec![
            ChatMessage { role: "system".into(), content: self.system_message.clone() },
            ChatMessage { role: "user".into(), content: self.user_message() },
        ]
    }
}
