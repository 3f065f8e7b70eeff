//! Relation extraction over recognized mentions and linking of relation
//! surfaces to indexed properties.
//!
//! The reference extractor reads a pattern table, one rule per line:
//! `template<TAB>predicate-surface`. A template starts with `<X>` (the
//! subject mention), ends with `<Y>` (the object mention) and has literal
//! words or `<NP>` gaps in between. `<NP>` matches one or more words within
//! the sentence. Words are separated by whitespace or commas in the text.

use std::collections::HashSet;
use std::path::Path;
use std::sync::Arc;

use regex::Regex;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::backend::BackendError;
use crate::discovery::{recognize_all, RecognizerBackend};
use crate::index::{KbIndex, RecordKind, RetrievalConfig};
use crate::model::{byte_offset, char_len, PropertyRecord, Span};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExtractedRelation {
    pub subject: Span,
    pub object: Span,
    pub predicate_surface: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub linked_property: Option<PropertyRecord>,
}

/// Finds `(subject, predicate, object)` assertions in text.
pub trait ExtractorBackend: Send + Sync {
    fn id(&self) -> &str;
    fn extract(&self, text: &str) -> Result<Vec<ExtractedRelation>, BackendError>;
}

#[derive(Debug, Error)]
pub enum PatternError {
    #[error("pattern line {line}: {message}")]
    Syntax { line: usize, message: String },
    #[error("reading pattern table {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
}

pub const DEFAULT_PATTERNS: &str = "\
<X> is a <NP> in <Y>\tcountry
<X> is an <NP> in <Y>\tcountry
<X> was founded by <Y>\tfounded by
<X> founded by <Y>\tfounded by
<X> was founded in <Y>\tinception
<X> founded in <Y>\tinception
<X> was born in <Y>\tplace of birth
<X> is a <Y>\tinstance of
<X> is an <Y>\tinstance of
";

#[derive(Debug, Clone)]
pub struct Pattern {
    pub template: String,
    pub predicate_surface: String,
    gap: Regex,
}

impl Pattern {
    pub fn new(template: &str, predicate_surface: &str) -> Result<Self, String> {
        let words: Vec<&str> = template.split_whitespace().collect();
        if words.len() < 3 || words[0] != "<X>" || words[words.len() - 1] != "<Y>" {
            return Err("template must start with <X> and end with <Y>".into());
        }
        let middle = &words[1..words.len() - 1];
        if middle.iter().any(|w| *w == "<X>" || *w == "<Y>") {
            return Err("<X> and <Y> may appear only once".into());
        }
        if predicate_surface.trim().is_empty() {
            return Err("empty predicate surface".into());
        }
        let sep = r"[\s,]+";
        let parts: Vec<String> = middle
            .iter()
            .map(|w| match *w {
                "<NP>" => r"[^\s,.!?]+(?:[\s,]+[^\s,.!?]+)*?".to_string(),
                w => format!("(?i:{})", regex::escape(w)),
            })
            .collect();
        let gap = Regex::new(&format!("^{sep}{}{sep}$", parts.join(sep))).map_err(|e| e.to_string())?;
        Ok(Self { template: words.join(" "), predicate_surface: predicate_surface.trim().to_string(), gap })
    }

    /// Whether the text strictly between two mentions fits the template.
    pub fn matches_gap(&self, gap: &str) -> bool {
        self.gap.is_match(gap)
    }
}

#[derive(Debug, Clone)]
pub struct PatternTable {
    patterns: Vec<Pattern>,
}

impl PatternTable {
    pub fn parse(text: &str) -> Result<Self, PatternError> {
        let mut patterns = Vec::new();
        for (n, line) in text.lines().enumerate() {
            if line.trim().is_empty() || line.starts_with('#') {
                continue;
            }
            let syntax = |message: String| PatternError::Syntax { line: n + 1, message };
            let (template, surface) = line.split_once('\t').ok_or_else(|| syntax("missing tab".into()))?;
            patterns.push(Pattern::new(template, surface).map_err(syntax)?);
        }
        Ok(Self { patterns })
    }

    pub fn load(path: &Path) -> Result<Self, PatternError> {
        let text = std::fs::read_to_string(path)
            .map_err(|source| PatternError::Io { path: path.display().to_string(), source })?;
        Self::parse(&text)
    }

    pub fn patterns(&self) -> &[Pattern] {
        &self.patterns
    }
}

impl Default for PatternTable {
    fn default() -> Self {
        Self::parse(DEFAULT_PATTERNS).expect("default pattern table parses")
    }
}

/// Applies a pattern table to the mentions found by its recognizers. For each
/// subject mention and rule, the nearest following object mention that fits
/// is taken.
#[derive(Clone)]
pub struct PatternExtractor {
    recognizers: Vec<Arc<dyn RecognizerBackend>>,
    table: PatternTable,
}

impl PatternExtractor {
    pub const ID: &'static str = "patterns";

    pub fn new(recognizers: Vec<Arc<dyn RecognizerBackend>>, table: PatternTable) -> Self {
        Self { recognizers, table }
    }
}

impl ExtractorBackend for PatternExtractor {
    fn id(&self) -> &str {
        Self::ID
    }

    fn extract(&self, text: &str) -> Result<Vec<ExtractedRelation>, BackendError> {
        let (mentions, _) = recognize_all(text, &self.recognizers);
        let mut out = Vec::new();
        for (i, subject) in mentions.iter().enumerate() {
            for pattern in &self.table.patterns {
                let hit = mentions[i + 1..].iter().find(|object| {
                    let from = byte_offset(text, subject.span.end);
                    let to = byte_offset(text, object.span.start);
                    pattern.matches_gap(&text[from..to])
                });
                if let Some(object) = hit {
                    out.push(ExtractedRelation {
                        subject: subject.span,
                        object: object.span,
                        predicate_surface: pattern.predicate_surface.clone(),
                        linked_property: None,
                    });
                }
            }
        }
        Ok(out)
    }
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct RelationExtraction {
    pub relations: Vec<ExtractedRelation>,
    pub warnings: Vec<String>,
}

/// Runs `backend`, dropping invalid relations and duplicates.
pub fn extract(text: &str, backend: &dyn ExtractorBackend) -> RelationExtraction {
    let mut warnings = Vec::new();
    let raw = backend.extract(text).unwrap_or_else(|e| {
        warnings.push(e.to_string());
        Vec::new()
    });
    let len = char_len(text);
    let valid = |s: &Span| s.start < s.end && s.end <= len;
    let mut seen = HashSet::new();
    let mut relations = Vec::new();
    let mut invalid = 0;
    for r in raw {
        if !valid(&r.subject) || !valid(&r.object) || r.subject == r.object {
            invalid += 1;
            continue;
        }
        if seen.insert((r.subject, r.object, r.predicate_surface.clone())) {
            relations.push(r);
        }
    }
    if invalid > 0 {
        warnings.push(format!("extractor {}: dropped {invalid} relation(s) with invalid spans", backend.id()));
    }
    RelationExtraction { relations, warnings }
}

/// The best property for a relation surface, if any clears the threshold.
pub fn link_relation(surface: &str, index: &KbIndex, config: &RetrievalConfig) -> Option<PropertyRecord> {
    index.search(RecordKind::Property, surface, config).into_iter().next().map(|c| c.record)
}

/// Extraction followed by property linking. Unlinked relations are kept with
/// `linked_property = None`; fusion ignores them.
pub fn extract_and_link(
    text: &str,
    backend: &dyn ExtractorBackend,
    index: &KbIndex,
    config: &RetrievalConfig,
) -> RelationExtraction {
    let mut result = extract(text, backend);
    for r in &mut result.relations {
        r.linked_property = link_relation(&r.predicate_surface, index, config);
    }
    result
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::discovery::{Gazetteer, GazetteerRecognizer, LiteralRecognizer};

    fn extractor(gazetteer: &str) -> PatternExtractor {
        let gaz = GazetteerRecognizer::new(Gazetteer::parse(gazetteer).unwrap());
        PatternExtractor::new(vec![Arc::new(gaz), Arc::new(LiteralRecognizer)], PatternTable::default())
    }

    fn triples(text: &str, e: &PatternExtractor) -> Vec<(String, String, String)> {
        extract(text, e)
            .relations
            .into_iter()
            .map(|r| {
                (
                    r.subject.slice(text).unwrap().to_string(),
                    r.predicate_surface,
                    r.object.slice(text).unwrap().to_string(),
                )
            })
            .collect()
    }

    #[test]
    fn country_pattern_on_fixture_sentence() {
        let e = extractor("Weimar\tGPE\nGermany\tGPE\n");
        assert_eq!(
            triples("Weimar is a city in Germany.", &e),
            [("Weimar".into(), "country".into(), "Germany".into())]
        );
    }

    #[test]
    fn founded_by_and_inception() {
        let e = extractor("Bauhaus\tORG\nWalter Gropius\tPERSON\n");
        let text = "The Bauhaus, founded by Walter Gropius. The Bauhaus was founded in 1919.";
        assert_eq!(
            triples(text, &e),
            [
                ("Bauhaus".into(), "founded by".into(), "Walter Gropius".into()),
                ("Bauhaus".into(), "inception".into(), "1919".into()),
            ]
        );
    }

    #[test]
    fn gaps_stay_inside_the_sentence() {
        let e = extractor("Weimar\tGPE\nGermany\tGPE\n");
        assert!(triples("Weimar is a city. Germany is big.", &e).is_empty());
        assert!(triples("Nothing to see here.", &e).is_empty());
    }

    #[test]
    fn instance_of_needs_an_object_mention() {
        let e = extractor("Weimar\tGPE\ncity\tCONCEPT\nGermany\tGPE\n");
        let found = triples("Weimar is a city in Germany.", &e);
        assert!(found.contains(&("Weimar".into(), "instance of".into(), "city".into())));
        assert!(found.contains(&("Weimar".into(), "country".into(), "Germany".into())));
    }

    #[test]
    fn table_syntax_errors() {
        assert!(matches!(PatternTable::parse("<X> is <Y>\n"), Err(PatternError::Syntax { line: 1, .. })));
        assert!(PatternTable::parse("# c\n<X> of <Y>\tpart of\n").is_ok());
        assert!(PatternTable::parse("<X> of\tpart of\n").is_err());
        assert!(PatternTable::parse("<X> <Y> of <Y>\tx\n").is_err());
    }

    struct Dup;

    impl ExtractorBackend for Dup {
        fn id(&self) -> &str {
            "dup"
        }
        fn extract(&self, _: &str) -> Result<Vec<ExtractedRelation>, BackendError> {
            let r = ExtractedRelation {
                subject: Span::new(0, 1),
                object: Span::new(2, 3),
                predicate_surface: "p".into(),
                linked_property: None,
            };
            let mut same = r.clone();
            same.object = same.subject;
            Ok(vec![r.clone(), r, same])
        }
    }

    #[test]
    fn extract_dedupes_and_validates() {
        let out = extract("a b", &Dup);
        assert_eq!(out.relations.len(), 1);
        assert_eq!(out.warnings.len(), 1);
    }
}
