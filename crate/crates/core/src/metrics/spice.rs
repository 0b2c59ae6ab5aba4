//! Content-word F1 stand-in for scene-graph SPICE. Reported as "SPICE-proxy".

use std::collections::BTreeSet;

use super::tokenize;

pub const STOPWORDS_VERSION: &str = "stopwords/1";

/// Fixed English stopword list.
pub const STOPWORDS: &[&str] = &[
    "a", "about", "after", "afterwards", "again", "all", "also", "an", "and", "any", "are", "as",
    "at", "be", "been", "before", "being", "both", "but", "by", "can", "could", "did", "do",
    "does", "during", "each", "for", "from", "had", "has", "have", "having", "he", "her", "here",
    "him", "his", "how", "i", "if", "in", "into", "is", "it", "its", "itself", "just", "me",
    "more", "most", "my", "no", "nor", "not", "of", "off", "on", "once", "only", "or", "other",
    "our", "out", "over", "own", "part", "same", "she", "should", "so", "some", "such", "than",
    "that", "the", "their", "them", "then", "there", "these", "they", "this", "those", "through",
    "to", "too", "under", "until", "up", "very", "was", "we", "were", "what", "when", "where",
    "which", "while", "who", "whom", "why", "will", "with", "would", "you", "your",
];

const SUFFIXES: &[&str] = &["ing", "ed", "es", "s"];
const MIN_STEM: usize = 4;

/// Strips the first matching suffix whose removal leaves at least 4 letters.
pub fn stem(word: &str) -> String {
    for suf in SUFFIXES {
        if let Some(base) = word.strip_suffix(suf) {
            if base.chars().count() >= MIN_STEM {
                return base.to_string();
            }
        }
    }
    word.to_string()
}

pub fn content_words(text: &str) -> BTreeSet<String> {
    tokenize(text)
        .into_iter()
        .filter(|t| !STOPWORDS.contains(&t.as_str()))
        .map(|t| stem(&t))
        .collect()
}

/// F1 between the candidate's content words and the union over references.
pub fn spice_proxy(candidate: &str, refs: &[String]) -> f64 {
    let cand = content_words(candidate);
    let refs: BTreeSet<String> = refs.iter().flat_map(|r| content_words(r)).collect();
    if cand.is_empty() || refs.is_empty() {
        return 0.0;
    }
    let hits = cand.intersection(&refs).count() as f64;
    if hits == 0.0 {
        return 0.0;
    }
    let p = hits / cand.len() as f64;
    let r = hits / refs.len() as f64;
    2.0 * p * r / (p + r)
}
