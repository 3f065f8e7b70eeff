//! Noun-phrase concept extraction over a closed vocabulary:
//! `determiner? adjective* noun+`, with the determiner left out of the span.

use regex::Regex;

use super::RecognizerBackend;
use crate::backend::BackendError;
use crate::model::{char_len, EntityType, Mention, Span};

const DETERMINERS: &[&str] = &["a", "an", "the", "this", "that", "these", "those", "its", "their"];

const ADJECTIVES: &[&str] = &[
    "academic",
    "ancient",
    "federal",
    "famous",
    "former",
    "german",
    "higher",
    "historic",
    "independent",
    "international",
    "large",
    "local",
    "major",
    "modern",
    "national",
    "new",
    "old",
    "political",
    "private",
    "public",
    "small",
    "sovereign",
    "technical",
];

const NOUNS: &[&str] = &[
    "architect",
    "architecture",
    "art",
    "artist",
    "capital",
    "city",
    "college",
    "company",
    "country",
    "design",
    "education",
    "institution",
    "museum",
    "movement",
    "nation",
    "organization",
    "painter",
    "person",
    "region",
    "river",
    "school",
    "state",
    "town",
    "university",
    "village",
];

#[derive(Debug, Clone)]
pub struct ConceptExtractor {
    pattern: Regex,
}

impl ConceptExtractor {
    pub const ID: &'static str = "concepts";

    pub fn new(determiners: &[&str], adjectives: &[&str], nouns: &[&str]) -> Self {
        let alt = |words: &[&str]| {
            let mut w: Vec<String> = words.iter().map(|w| regex::escape(w)).collect();
            // Longer alternatives first so "nation" does not shadow "national".
            w.sort_by(|a, b| b.len().cmp(&a.len()).then(a.cmp(b)));
            w.join("|")
        };
        let (det, adj, noun) = (alt(determiners), alt(adjectives), alt(nouns));
        let pattern = format!(r"(?i)\b(?:(?:{det})\s+)?((?:(?:{adj})\s+)*(?:{noun})(?:\s+(?:{noun}))*)\b");
        Self { pattern: Regex::new(&pattern).expect("concept pattern is valid") }
    }

    pub fn find(&self, text: &str) -> Vec<Mention> {
        self.pattern
            .captures_iter(text)
            .filter_map(|caps| caps.get(1))
            .map(|m| {
                let start = char_len(&text[..m.start()]);
                let end = start + char_len(m.as_str());
                Mention {
                    span: Span::new(start, end),
                    surface: m.as_str().to_string(),
                    etype: EntityType::Concept,
                    source: Self::ID.to_string(),
                    preferred_iri: None,
                }
            })
            .collect()
    }
}

impl Default for ConceptExtractor {
    fn default() -> Self {
        Self::new(DETERMINERS, ADJECTIVES, NOUNS)
    }
}

impl RecognizerBackend for ConceptExtractor {
    fn id(&self) -> &str {
        Self::ID
    }

    fn recognize(&self, text: &str) -> Result<Vec<Mention>, BackendError> {
        Ok(self.find(text))
    }
}
