//! Line-delimited entity/property dumps and the index admission rules.
//!
//! One JSON object per line:
//! `{id, label, description, aliases[], outgoing[{property, target}], category?, disambiguation?, commonness_override?}`.
//! A `target` is either a bare id (`"Q183"`) or a literal `{"value": "1860", "datatype": "xsd:date"}`.

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::model::{Iri, XSD};

#[derive(Debug, Clone, PartialEq, Deserialize)]
pub struct DumpRecord {
    pub id: String,
    pub label: String,
    #[serde(default)]
    pub description: String,
    #[serde(default)]
    pub aliases: Vec<String>,
    #[serde(default)]
    pub outgoing: Vec<DumpEdge>,
    #[serde(default)]
    pub category: bool,
    #[serde(default)]
    pub disambiguation: bool,
    #[serde(default)]
    pub commonness_override: Option<u64>,
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
pub struct DumpEdge {
    pub property: String,
    pub target: DumpTarget,
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(untagged)]
pub enum DumpTarget {
    Id(String),
    Literal {
        value: String,
        #[serde(default)]
        datatype: Option<String>,
    },
}

/// Namespaces bare identifiers are expanded against.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Namespaces {
    pub entity: String,
    pub property: String,
}

impl Default for Namespaces {
    fn default() -> Self {
        Self { entity: crate::model::WD_ENTITY.into(), property: crate::model::WD_DIRECT.into() }
    }
}

impl Namespaces {
    pub fn entity(&self, id: &str) -> Iri {
        expand(&self.entity, id)
    }

    pub fn property(&self, id: &str) -> Iri {
        expand(&self.property, id)
    }
}

/// Absolute IRIs (anything with a scheme separator) pass through unchanged.
fn expand(namespace: &str, id: &str) -> Iri {
    if id.contains(':') {
        Iri::new_unchecked(id)
    } else {
        Iri::new_unchecked(format!("{namespace}{id}"))
    }
}

/// `xsd:date` style prefixes, absolute IRIs, or `xsd:string` when absent.
pub fn expand_datatype(datatype: Option<&str>) -> Iri {
    match datatype {
        None => Iri::new_unchecked(format!("{XSD}string")),
        Some(dt) => match dt.strip_prefix("xsd:") {
            Some(local) => Iri::new_unchecked(format!("{XSD}{local}")),
            None => Iri::new_unchecked(dt),
        },
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum FilterRule {
    ValidIri,
    HasProperty,
    NotCategory,
    NotDisambiguation,
}

impl fmt::Display for FilterRule {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Self::ValidIri => "invalid IRI",
            Self::HasProperty => "no outgoing property",
            Self::NotCategory => "category page",
            Self::NotDisambiguation => "disambiguation page",
        })
    }
}

/// Returns the first admission rule `record` violates, checked in rule order.
pub fn check_rules(record: &DumpRecord, iri: &Iri) -> Result<(), FilterRule> {
    if record.id.trim().is_empty() || !iri.is_valid() {
        Err(FilterRule::ValidIri)
    } else if record.outgoing.is_empty() {
        Err(FilterRule::HasProperty)
    } else if record.category {
        Err(FilterRule::NotCategory)
    } else if record.disambiguation {
        Err(FilterRule::NotDisambiguation)
    } else {
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct RejectCounts {
    pub invalid_iri: usize,
    pub no_properties: usize,
    pub category: usize,
    pub disambiguation: usize,
}

impl RejectCounts {
    pub fn total(&self) -> usize {
        self.invalid_iri + self.no_properties + self.category + self.disambiguation
    }

    pub(crate) fn count(&mut self, rule: FilterRule) {
        match rule {
            FilterRule::ValidIri => self.invalid_iri += 1,
            FilterRule::HasProperty => self.no_properties += 1,
            FilterRule::NotCategory => self.category += 1,
            FilterRule::NotDisambiguation => self.disambiguation += 1,
        }
    }
}

/// Outcome of ingesting one dump. `read = kept + malformed + duplicates + rejected.total()`.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct IngestStats {
    pub read: usize,
    pub kept: usize,
    pub malformed: usize,
    pub duplicates: usize,
    pub rejected: RejectCounts,
}

impl fmt::Display for IngestStats {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "kept {} of {} (invalid IRI {}, no properties {}, category {}, disambiguation {}, malformed {}, duplicate {})",
            self.kept,
            self.read,
            self.rejected.invalid_iri,
            self.rejected.no_properties,
            self.rejected.category,
            self.rejected.disambiguation,
            self.malformed,
            self.duplicates
        )
    }
}
