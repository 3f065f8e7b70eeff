//! Literal classification and normalization for numeric and temporal mentions.

use std::sync::LazyLock;

use regex::Regex;
use serde::{Deserialize, Serialize};

use super::RecognizerBackend;
use crate::backend::BackendError;
use crate::model::{char_len, EntityType, LiteralKind, LiteralValue, Mention, Span};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum MentionClass {
    Linkable,
    NumericLiteral,
    TemporalLiteral,
}

impl MentionClass {
    pub fn literal_kind(self) -> Option<LiteralKind> {
        match self {
            Self::Linkable => None,
            Self::NumericLiteral => Some(LiteralKind::Numeric),
            Self::TemporalLiteral => Some(LiteralKind::Temporal),
        }
    }
}

pub fn classify_mention(m: &Mention) -> MentionClass {
    match m.etype {
        EntityType::Percent | EntityType::Money | EntityType::Quantity | EntityType::Cardinal | EntityType::Ordinal => {
            MentionClass::NumericLiteral
        }
        EntityType::Date | EntityType::Time => MentionClass::TemporalLiteral,
        _ => MentionClass::Linkable,
    }
}

static INTEGER: LazyLock<Regex> = LazyLock::new(|| Regex::new(r"^[+-]?\d+$").unwrap());
static DECIMAL: LazyLock<Regex> = LazyLock::new(|| Regex::new(r"^[+-]?(\d+\.\d*|\.\d+)$").unwrap());
static GROUPED: LazyLock<Regex> = LazyLock::new(|| Regex::new(r"^[+-]?\d{1,3}(,\d{3})+(\.\d+)?$").unwrap());
static ORDINAL: LazyLock<Regex> = LazyLock::new(|| Regex::new(r"(?i)^(\d+)(st|nd|rd|th)$").unwrap());
static YEAR: LazyLock<Regex> = LazyLock::new(|| Regex::new(r"^\d{4}$").unwrap());
static ISO_DATE: LazyLock<Regex> = LazyLock::new(|| Regex::new(r"^(\d{4})-(\d{2})-(\d{2})$").unwrap());
static ISO_DATETIME: LazyLock<Regex> =
    LazyLock::new(|| Regex::new(r"^(\d{4})-(\d{2})-(\d{2})[T ](\d{2}):(\d{2})(?::(\d{2}))?Z?$").unwrap());
static DAY_MONTH_YEAR: LazyLock<Regex> =
    LazyLock::new(|| Regex::new(r"(?i)^(\d{1,2})\s+([a-z]+)\.?\s+(\d{4})$").unwrap());
static MONTH_DAY_YEAR: LazyLock<Regex> =
    LazyLock::new(|| Regex::new(r"(?i)^([a-z]+)\.?\s+(\d{1,2}),?\s+(\d{4})$").unwrap());
static CLOCK: LazyLock<Regex> =
    LazyLock::new(|| Regex::new(r"(?i)^(\d{1,2}):(\d{2})(?::(\d{2}))?\s*(am|pm|a\.m\.|p\.m\.)?$").unwrap());

/// Normalizes a literal mention. Anything unparseable keeps its surface as an
/// `xsd:string`.
pub fn parse_literal(m: &Mention, kind: LiteralKind) -> LiteralValue {
    let surface = m.surface.trim();
    let parsed = match kind {
        LiteralKind::Numeric => parse_numeric(surface),
        LiteralKind::Temporal => parse_temporal(surface, m.etype),
    };
    parsed.unwrap_or_else(|| LiteralValue::new(kind, surface, "string"))
}

fn parse_numeric(surface: &str) -> Option<LiteralValue> {
    let lower = surface.to_lowercase();
    let mut s: String = lower
        .replace("per cent", "")
        .replace("percent", "")
        .chars()
        .filter(|c| !matches!(c, '$' | '€' | '£' | '¥' | '₹' | '%' | '\u{2009}' | '\u{202f}' | '_'))
        .collect();
    s = s.trim().to_string();
    if let Some(caps) = ORDINAL.captures(&s) {
        s = caps[1].to_string();
    }
    if GROUPED.is_match(&s) {
        s.retain(|c| c != ',');
    }
    let s = s.strip_prefix('+').unwrap_or(&s).to_string();
    if INTEGER.is_match(&s) {
        Some(LiteralValue::new(LiteralKind::Numeric, s, "integer"))
    } else if DECIMAL.is_match(&s) {
        Some(LiteralValue::new(LiteralKind::Numeric, s, "decimal"))
    } else {
        None
    }
}

fn parse_temporal(surface: &str, etype: EntityType) -> Option<LiteralValue> {
    let date = |y: &str, m: u32, d: u32| -> Option<LiteralValue> {
        let year: u32 = y.parse().ok()?;
        valid_date(year, m, d).then(|| LiteralValue::new(LiteralKind::Temporal, format!("{y}-{m:02}-{d:02}"), "date"))
    };
    if etype == EntityType::Time {
        if let Some(c) = CLOCK.captures(surface) {
            let mut hour: u32 = c[1].parse().ok()?;
            let minute: u32 = c[2].parse().ok()?;
            let second: u32 = c.get(3).map_or(Some(0), |s| s.as_str().parse().ok())?;
            if let Some(suffix) = c.get(4) {
                if !(1..=12).contains(&hour) {
                    return None;
                }
                let pm = suffix.as_str().to_lowercase().starts_with('p');
                hour = match (hour, pm) {
                    (12, false) => 0,
                    (12, true) => 12,
                    (h, true) => h + 12,
                    (h, false) => h,
                };
            }
            return (hour < 24 && minute < 60 && second < 60).then(|| {
                LiteralValue::new(LiteralKind::Temporal, format!("{hour:02}:{minute:02}:{second:02}"), "time")
            });
        }
    }
    if YEAR.is_match(surface) {
        return Some(LiteralValue::new(LiteralKind::Temporal, surface, "date"));
    }
    if let Some(c) = ISO_DATE.captures(surface) {
        return date(&c[1], c[2].parse().ok()?, c[3].parse().ok()?);
    }
    if let Some(c) = ISO_DATETIME.captures(surface) {
        let (h, mi): (u32, u32) = (c[4].parse().ok()?, c[5].parse().ok()?);
        let s: u32 = c.get(6).map_or(Some(0), |s| s.as_str().parse().ok())?;
        let d = date(&c[1], c[2].parse().ok()?, c[3].parse().ok()?)?;
        return (h < 24 && mi < 60 && s < 60).then(|| {
            LiteralValue::new(LiteralKind::Temporal, format!("{}T{h:02}:{mi:02}:{s:02}", d.lexical), "dateTime")
        });
    }
    if let Some(c) = DAY_MONTH_YEAR.captures(surface) {
        return date(&c[3], month(&c[2])?, c[1].parse().ok()?);
    }
    if let Some(c) = MONTH_DAY_YEAR.captures(surface) {
        return date(&c[3], month(&c[1])?, c[2].parse().ok()?);
    }
    None
}

fn month(name: &str) -> Option<u32> {
    const MONTHS: [&str; 12] = [
        "january",
        "february",
        "march",
        "april",
        "may",
        "june",
        "july",
        "august",
        "september",
        "october",
        "november",
        "december",
    ];
    let name = name.to_lowercase();
    if name.len() < 3 {
        return None;
    }
    MONTHS.iter().position(|m| m.starts_with(&name)).map(|i| i as u32 + 1)
}

fn valid_date(year: u32, month: u32, day: u32) -> bool {
    let leap = (year.is_multiple_of(4) && !year.is_multiple_of(100)) || year.is_multiple_of(400);
    let days = match month {
        1 | 3 | 5 | 7 | 8 | 10 | 12 => 31,
        4 | 6 | 9 | 11 => 30,
        2 if leap => 29,
        2 => 28,
        _ => return false,
    };
    (1..=days).contains(&day)
}

const MONTH_NAMES: &str = "January|February|March|April|May|June|July|August|September|October|November|December";

static LITERAL_SPANS: LazyLock<Vec<(Regex, EntityType)>> = LazyLock::new(|| {
    let dmy = format!(r"\b\d{{1,2}}\s+(?:{MONTH_NAMES})\s+\d{{4}}\b");
    let mdy = format!(r"\b(?:{MONTH_NAMES})\s+\d{{1,2}},?\s+\d{{4}}\b");
    [
        (r"\b\d{4}-\d{2}-\d{2}(?:T\d{2}:\d{2}(?::\d{2})?Z?)?\b", EntityType::Date),
        (dmy.as_str(), EntityType::Date),
        (mdy.as_str(), EntityType::Date),
        (r"[$€£]\s?\d[\d,]*(?:\.\d+)?", EntityType::Money),
        (r"\b\d+(?:\.\d+)?\s?(?:%|percent\b)", EntityType::Percent),
        (r"\b(?:1\d|20)\d{2}\b", EntityType::Date),
    ]
    .into_iter()
    .map(|(p, t)| (Regex::new(p).unwrap(), t))
    .collect()
});

/// Regex recognizer for dates, years, money and percentages. Earlier
/// patterns claim their spans first.
#[derive(Debug, Clone, Copy, Default)]
pub struct LiteralRecognizer;

impl LiteralRecognizer {
    pub const ID: &'static str = "literals";

    pub fn find(&self, text: &str) -> Vec<Mention> {
        let mut found: Vec<Mention> = Vec::new();
        for (pattern, etype) in LITERAL_SPANS.iter() {
            for m in pattern.find_iter(text) {
                let start = char_len(&text[..m.start()]);
                let span = Span::new(start, start + char_len(m.as_str()));
                if found.iter().all(|f| !f.span.overlaps(&span)) {
                    found.push(Mention {
                        span,
                        surface: m.as_str().to_string(),
                        etype: *etype,
                        source: Self::ID.to_string(),
                        preferred_iri: None,
                    });
                }
            }
        }
        found.sort_by_key(|m| m.span);
        found
    }
}

impl RecognizerBackend for LiteralRecognizer {
    fn id(&self) -> &str {
        Self::ID
    }

    fn recognize(&self, text: &str) -> Result<Vec<Mention>, BackendError> {
        Ok(self.find(text))
    }
}
