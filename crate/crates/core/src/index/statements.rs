//! The set of knowledge-base statements seen in the ingested dumps.

use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};

use crate::model::{Iri, Node};

#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(untagged)]
pub enum StatementObject {
    Iri(Iri),
    Literal { lexical: String, datatype: Iri },
}

impl StatementObject {
    /// The statement object a graph node would correspond to; blank nodes have none.
    pub fn from_node(node: &Node) -> Option<Self> {
        match node {
            Node::Entity(e) => Some(Self::Iri(e.iri.clone())),
            Node::Literal(l) => Some(Self::Literal { lexical: l.lexical.clone(), datatype: l.datatype.clone() }),
            Node::Unlinked(_) => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct Statement {
    pub subject: Iri,
    pub property: Iri,
    pub object: StatementObject,
}

/// Existence lookup for `(subject, property, object)` statements.
pub trait FactStore: Send + Sync {
    fn contains(&self, subject: &Iri, property: &Iri, object: &StatementObject) -> bool;
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct StatementStore {
    statements: BTreeSet<Statement>,
}

impl StatementStore {
    pub fn insert(&mut self, statement: Statement) -> bool {
        self.statements.insert(statement)
    }

    pub fn len(&self) -> usize {
        self.statements.len()
    }

    pub fn is_empty(&self) -> bool {
        self.statements.is_empty()
    }

    /// Statements in sorted order.
    pub fn iter(&self) -> impl Iterator<Item = &Statement> {
        self.statements.iter()
    }
}

impl FromIterator<Statement> for StatementStore {
    fn from_iter<T: IntoIterator<Item = Statement>>(iter: T) -> Self {
        Self { statements: iter.into_iter().collect() }
    }
}

impl FactStore for StatementStore {
    fn contains(&self, subject: &Iri, property: &Iri, object: &StatementObject) -> bool {
        // BTreeSet lookups need an owned key.
        self.statements.contains(&Statement {
            subject: subject.clone(),
            property: property.clone(),
            object: object.clone(),
        })
    }
}
