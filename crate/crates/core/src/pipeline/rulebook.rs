//! Deterministic relevance rules used by the stub generator.
//!
//! A record is relevant when its augmented text contains every content term
//! of the query (case-insensitive). A term is a query word that is not a
//! stopword, together with its plural-stripped forms and any glossary
//! equivalents, so that "paintings" matches "Gemälde" and "炭笔" matches
//! "Kohle".

use std::collections::BTreeSet;

/// One query concept and the substrings that count as a mention of it.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ContentTerm {
    pub word: String,
    pub alternatives: BTreeSet<String>,
}

impl ContentTerm {
    pub fn matches(&self, haystack_lower: &str) -> bool {
        self.alternatives.iter().any(|a| haystack_lower.contains(a.as_str()))
    }
}

const STOPWORDS: &[&str] = &[
    // English
    "about", "after", "also", "among", "and", "another", "any", "anything", "are", "artist", "artists",
    "artwork", "artworks", "attributed", "auction", "auctioned", "auctions", "been", "before", "being",
    "between", "both", "depict", "depicted", "depicting", "depicts", "does", "each", "every", "feature",
    "featuring", "figure", "find", "from", "have", "into", "item", "items", "like", "made", "many",
    "more", "most", "motif", "motifs", "object", "objects", "only", "other", "piece", "pieces", "please",
    "record", "records", "retrieve", "search", "show", "sold", "some", "such", "than", "that", "their",
    "them", "there", "these", "they", "this", "those", "through", "under", "upon", "wearing", "were",
    "what", "when", "where", "which", "while", "with", "within", "without", "work", "works", "would",
    // German
    "alle", "auch", "aus", "beim", "dass", "dem", "den", "der", "des", "die", "das", "durch", "eine",
    "einem", "einen", "einer", "eines", "gibt", "mit", "nach", "oder", "sind", "über", "und", "vom",
    "von", "wurde", "wurden", "zum", "zur", "verkauft", "versteigert", "werke",
    // Russian
    "были", "году", "года", "аукционе", "аукцион", "проданные", "проданы", "которые", "работы", "все",
];

/// (query-side keys, record-side equivalents). Latin and Cyrillic keys match
/// as word prefixes; CJK keys match as substrings of the query.
const GLOSSARY: &[(&[&str], &[&str])] = &[
    (&["painting", "painted", "gemälde", "картин", "живопис", "油画", "绘画"], &["gemälde"]),
    (&["drawing", "zeichnung", "рисун", "素描"], &["zeichnung"]),
    (&["sculpt", "skulptur", "plastik", "скульптур", "雕塑"], &["skulptur", "plastik", "bildwerk"]),
    (&["charcoal", "kohle", "угл", "уголь", "炭笔", "木炭"], &["kohle"]),
    (&["signed", "signiert", "подпис", "签名"], &["signiert", "monogramm"]),
    (&["watercolo", "aquarell", "акварел", "水彩"], &["aquarell"]),
    (&["etching", "radierung", "офорт", "蚀刻"], &["radierung"]),
    (&["portrait", "bildnis", "портрет", "肖像"], &["bildnis", "brustbild", "halbfigur"]),
    (&["jewel", "schmuck", "украшен", "珠宝"], &["goldkette", "schmuck", "juwel", "medaillon", "perlen"]),
    (&["terracotta", "terrakotta", "терракот", "陶"], &["terrakotta", "gebrannter ton"]),
    (&["venice", "venedig", "венец", "威尼斯"], &["venedig"]),
    (&["still life", "stillleben", "натюрморт", "静物"], &["stillleben"]),
    (&["landscape", "landschaft", "пейзаж", "风景"], &["landschaft"]),
    (&["winter", "зим", "冬"], &["winter", "schnee", "verschneit"]),
    (&["snow", "schnee", "снег", "雪"], &["schnee", "verschneit", "winter"]),
    (&["family", "familie", "семь", "家庭"], &["familie"]),
    (&["oil", "öl", "масл", "油"], &["öl", "oel"]),
    (&["canvas", "leinwand", "холст", "画布"], &["leinwand"]),
    (&["wood", "holz", "дерев", "木板"], &["holz"]),
    (&["woman", "women", "frau", "dame", "женщин", "女"], &["frau", "dame", "mädchen"]),
    (&["hat", "hut", "шляп", "帽"], &["hut"]),
    (&["italian", "italien", "итальян", "意大利"], &["italienisch"]),
    (&["century", "jahrhundert", "век", "世纪"], &["jahrhundert", "jh."]),
];

/// Words shorter than four characters that still carry meaning.
const SHORT_CONTENT_WORDS: &[&str] = &["hat", "oil", "öl"];

fn is_cjk(c: char) -> bool {
    matches!(c as u32, 0x3040..=0x30ff | 0x3400..=0x4dbf | 0x4e00..=0x9fff | 0xf900..=0xfaff | 0xac00..=0xd7af)
}

fn strip_plural(word: &str) -> Vec<String> {
    let chars = word.chars().count();
    let mut out = Vec::new();
    for suffix in ["es", "en", "s", "n"] {
        if chars > 5 && word.ends_with(suffix) {
            out.push(word[..word.len() - suffix.len()].to_string());
        }
    }
    out
}

/// Content terms of a query, in order of first appearance.
pub fn content_terms(query: &str) -> Vec<ContentTerm> {
    let lower = query.to_lowercase();
    let mut terms: Vec<ContentTerm> = Vec::new();
    let mut push = |word: String, alternatives: BTreeSet<String>| {
        if !terms.iter().any(|t| t.word == word) {
            terms.push(ContentTerm { word, alternatives });
        }
    };

    for token in lower.split(|c: char| !c.is_alphanumeric()).filter(|t| !t.is_empty()) {
        if token.chars().any(is_cjk) {
            // No word boundaries: only glossary concepts are recognised.
            let mut hits: Vec<(usize, &str, &[&str])> = GLOSSARY
                .iter()
                .filter_map(|(keys, equivalents)| {
                    keys.iter()
                        .filter(|k| k.chars().any(is_cjk))
                        .find_map(|k| token.find(*k).map(|at| (at, *k, *equivalents)))
                })
                .collect();
            hits.sort_by_key(|(at, _, _)| *at);
            for (_, key, equivalents) in hits {
                push(key.to_string(), equivalents.iter().map(|e| e.to_string()).collect());
            }
            continue;
        }
        let numeric = token.chars().all(|c| c.is_ascii_digit());
        if !numeric && token.chars().count() < 4 && !SHORT_CONTENT_WORDS.contains(&token) {
            continue;
        }
        if STOPWORDS.contains(&token) {
            continue;
        }
        let mut alternatives: BTreeSet<String> = BTreeSet::from([token.to_string()]);
        alternatives.extend(strip_plural(token));
        for (keys, equivalents) in GLOSSARY {
            if keys.iter().any(|k| !k.contains(' ') && token.starts_with(k)) {
                alternatives.extend(equivalents.iter().map(|e| e.to_string()));
            }
        }
        push(token.to_string(), alternatives);
    }
    terms
}

/// Terms of `terms` not found in `text`.
pub fn missing_terms<'a>(terms: &'a [ContentTerm], text: &str) -> Vec<&'a ContentTerm> {
    let lower = text.to_lowercase();
    terms.iter().filter(|t| !t.matches(&lower)).collect()
}

/// Splits an augmented text back into its labeled clause values.
pub fn split_clauses(text: &str) -> Vec<(&'static str, String)> {
    let mut found: Vec<(&'static str, usize, usize)> = Vec::new();
    let mut cursor = 0;
    for label in crate::corpus::clause_labels() {
        let needle = format!("{label}: ");
        let mut search_from = cursor;
        while let Some(rel) = text[search_from..].find(&needle) {
            let at = search_from + rel;
            if at == 0 || text[..at].ends_with(' ') {
                found.push((label, at, at + needle.len()));
                cursor = at + needle.len();
                break;
            }
            search_from = at + needle.len();
        }
    }
    found
        .iter()
        .enumerate()
        .map(|(i, (label, _, value_start))| {
            let end = found.get(i + 1).map(|n| n.1).unwrap_or(text.len());
            (*label, text[*value_start..end].trim_end().to_string())
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn words(q: &str) -> Vec<String> {
        content_terms(q).into_iter().map(|t| t.word).collect()
    }

    #[test]
    fn dix_query_terms() {
        assert_eq!(
            words("Were there any paintings by Otto Dix sold at Fischer in 1939?"),
            ["paintings", "otto", "fischer", "1939"]
        );
        let terms = content_terms("paintings");
        assert!(terms[0].matches("object type: gemälde"));
    }

    #[test]
    fn cjk_uses_glossary() {
        let terms = content_terms("Max Liebermann 签名的炭笔素描");
        let w: Vec<_> = terms.iter().map(|t| t.word.as_str()).collect();
        assert_eq!(w, ["liebermann", "签名", "炭笔", "素描"]);
        assert!(terms[2].matches("material: kohle auf papier"));
    }

    #[test]
    fn cyrillic_prefixes() {
        let terms = content_terms("Картины Otto Dix, проданные на аукционе Fischer в 1939 году");
        let w: Vec<_> = terms.iter().map(|t| t.word.as_str()).collect();
        assert_eq!(w, ["картины", "otto", "fischer", "1939"]);
        assert!(terms[0].alternatives.contains("gemälde"));
    }

    #[test]
    fn plural_stripping() {
        let terms = content_terms("Radierungen");
        assert!(terms[0].matches("object type: radierung"));
    }

    #[test]
    fn clause_split() {
        let text = "Auction House: Fischer Sale Date: 1939-06-30 Artist: Dix, Otto Title: Mutter: und Kind Object Type: Gemälde Metadata: {'artist': 'Dix, Otto'}";
        let clauses = split_clauses(text);
        assert_eq!(clauses[0], ("Auction House", "Fischer".to_string()));
        assert_eq!(clauses[3], ("Title", "Mutter: und Kind".to_string()));
        assert_eq!(clauses[4], ("Object Type", "Gemälde".to_string()));
        assert_eq!(clauses.last().unwrap().0, "Metadata");
    }
}
