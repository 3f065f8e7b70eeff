//! Longest-match gazetteer recognizer.
//!
//! File format, one entry per line: `surface<TAB>TYPE[<TAB>preferred-IRI]`.
//! Blank lines and lines starting with `#` are ignored.

use std::collections::HashMap;
use std::path::Path;

use thiserror::Error;

use super::RecognizerBackend;
use crate::backend::BackendError;
use crate::index::tokenize::tokens;
use crate::model::{EntityType, Iri, Mention, Span};

#[derive(Debug, Error)]
pub enum GazetteerError {
    #[error("gazetteer line {line}: {message}")]
    Syntax { line: usize, message: String },
    #[error("reading gazetteer {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct GazetteerEntry {
    pub surface: String,
    pub etype: EntityType,
    pub preferred_iri: Option<Iri>,
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct Gazetteer {
    entries: Vec<GazetteerEntry>,
}

impl Gazetteer {
    pub fn from_entries(entries: Vec<GazetteerEntry>) -> Self {
        Self { entries }
    }

    pub fn parse(text: &str) -> Result<Self, GazetteerError> {
        let mut entries = Vec::new();
        for (n, line) in text.lines().enumerate() {
            if line.trim().is_empty() || line.starts_with('#') {
                continue;
            }
            let syntax = |message: String| GazetteerError::Syntax { line: n + 1, message };
            let mut cols = line.split('\t');
            let surface = cols.next().unwrap_or_default().trim();
            let etype = cols.next().ok_or_else(|| syntax("missing type column".into()))?;
            let etype: EntityType = etype.parse().map_err(syntax)?;
            let preferred_iri = match cols.next().map(str::trim).filter(|s| !s.is_empty()) {
                Some(iri) => Some(Iri::parse(iri).map_err(|e| syntax(e.to_string()))?),
                None => None,
            };
            if surface.is_empty() {
                return Err(syntax("empty surface".into()));
            }
            entries.push(GazetteerEntry { surface: surface.to_string(), etype, preferred_iri });
        }
        Ok(Self { entries })
    }

    pub fn load(path: &Path) -> Result<Self, GazetteerError> {
        let text = std::fs::read_to_string(path)
            .map_err(|source| GazetteerError::Io { path: path.display().to_string(), source })?;
        Self::parse(&text)
    }

    pub fn entries(&self) -> &[GazetteerEntry] {
        &self.entries
    }
}

/// Matches gazetteer surfaces at word boundaries, longest entry first. A
/// case-sensitive pass runs before a case-insensitive one over what is left.
#[derive(Debug, Clone)]
pub struct GazetteerRecognizer {
    id: String,
    entries: Vec<(Vec<char>, GazetteerEntry)>,
    /// Lowercased first token -> entry indices, longest surface first.
    by_first_token: HashMap<String, Vec<usize>>,
}

impl GazetteerRecognizer {
    pub const ID: &'static str = "gazetteer";

    pub fn new(gazetteer: Gazetteer) -> Self {
        let entries: Vec<_> =
            gazetteer.entries.into_iter().map(|e| (e.surface.chars().collect::<Vec<_>>(), e)).collect();
        let mut by_first_token: HashMap<String, Vec<usize>> = HashMap::new();
        for (i, (chars, e)) in entries.iter().enumerate() {
            if !chars[0].is_alphanumeric() {
                continue;
            }
            if let Some(first) = tokens(&e.surface).next() {
                by_first_token.entry(first).or_default().push(i);
            }
        }
        for list in by_first_token.values_mut() {
            list.sort_by(|&a, &b| entries[b].0.len().cmp(&entries[a].0.len()).then(a.cmp(&b)));
        }
        Self { id: Self::ID.to_string(), entries, by_first_token }
    }

    pub fn with_id(mut self, id: impl Into<String>) -> Self {
        self.id = id.into();
        self
    }

    pub fn find(&self, text: &str) -> Vec<Mention> {
        let chars: Vec<char> = text.chars().collect();
        let mut taken = vec![false; chars.len()];
        let mut found: Vec<(Span, usize)> = Vec::new();
        for case_sensitive in [true, false] {
            let mut pos = 0;
            while pos < chars.len() {
                if !is_word_start(&chars, pos) || taken[pos] {
                    pos += 1;
                    continue;
                }
                match self.longest_at(&chars, pos, &taken, case_sensitive) {
                    Some((end, entry)) => {
                        taken[pos..end].iter_mut().for_each(|t| *t = true);
                        found.push((Span::new(pos, end), entry));
                        pos = end;
                    }
                    None => pos += 1,
                }
            }
        }
        found.sort_by_key(|(span, _)| *span);
        found
            .into_iter()
            .map(|(span, entry)| {
                let e = &self.entries[entry].1;
                Mention {
                    span,
                    surface: chars[span.start..span.end].iter().collect(),
                    etype: e.etype,
                    source: self.id.clone(),
                    preferred_iri: e.preferred_iri.clone(),
                }
            })
            .collect()
    }

    fn longest_at(&self, chars: &[char], pos: usize, taken: &[bool], case_sensitive: bool) -> Option<(usize, usize)> {
        let word_end = (pos..chars.len()).find(|&i| !chars[i].is_alphanumeric()).unwrap_or(chars.len());
        let first: String = chars[pos..word_end].iter().collect::<String>().to_lowercase();
        let candidates = self.by_first_token.get(&first)?;
        candidates.iter().copied().find_map(|i| {
            let surface = &self.entries[i].0;
            let end = pos + surface.len();
            let fits = end <= chars.len()
                && is_word_end(chars, end)
                && !taken[pos..end].iter().any(|&t| t)
                && chars[pos..end].iter().zip(surface).all(|(a, b)| {
                    if case_sensitive {
                        a == b
                    } else {
                        a.to_lowercase().eq(b.to_lowercase())
                    }
                });
            fits.then_some((end, i))
        })
    }
}

fn is_word_start(chars: &[char], pos: usize) -> bool {
    chars[pos].is_alphanumeric() && (pos == 0 || !chars[pos - 1].is_alphanumeric())
}

fn is_word_end(chars: &[char], end: usize) -> bool {
    end == chars.len() || !chars[end].is_alphanumeric() || !chars[end - 1].is_alphanumeric()
}

impl RecognizerBackend for GazetteerRecognizer {
    fn id(&self) -> &str {
        &self.id
    }

    fn recognize(&self, text: &str) -> Result<Vec<Mention>, BackendError> {
        Ok(self.find(text))
    }
}
