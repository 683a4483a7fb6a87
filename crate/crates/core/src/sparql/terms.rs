use std::collections::BTreeSet;
use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Separator used in [`GroupKey`]s. It can never occur in an IRI, a prefixed
/// name or a profile entry, which is what makes the key injective.
pub const TERM_SEPARATOR: char = '\u{1f}';

/// Sorted, duplicate-free set of schema terms extracted from one query.
#[derive(Debug, Clone, Default, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(transparent)]
pub struct SchemaTermSet {
    terms: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("invalid schema term {0:?}: terms must be non-empty and free of the unit separator")]
pub struct InvalidTerm(pub String);

impl SchemaTermSet {
    pub fn new<I, S>(terms: I) -> Result<Self, InvalidTerm>
    where
        I: IntoIterator<Item = S>,
        S: Into<String>,
    {
        let set: BTreeSet<String> = terms.into_iter().map(Into::into).collect();
        if let Some(bad) = set.iter().find(|t| t.is_empty() || t.contains(TERM_SEPARATOR)) {
            return Err(InvalidTerm(bad.clone()));
        }
        Ok(Self {
            terms: set.into_iter().collect(),
        })
    }

    pub(crate) fn from_sorted_set(set: BTreeSet<String>) -> Self {
        debug_assert!(set.iter().all(|t| !t.is_empty() && !t.contains(TERM_SEPARATOR)));
        Self {
            terms: set.into_iter().collect(),
        }
    }

    pub fn terms(&self) -> &[String] {
        &self.terms
    }

    pub fn iter(&self) -> impl Iterator<Item = &str> {
        self.terms.iter().map(String::as_str)
    }

    pub fn len(&self) -> usize {
        self.terms.len()
    }

    pub fn is_empty(&self) -> bool {
        self.terms.is_empty()
    }

    pub fn contains(&self, term: &str) -> bool {
        self.terms.binary_search_by(|t| t.as_str().cmp(term)).is_ok()
    }

    pub fn canonical_key(&self) -> GroupKey {
        canonical_key(self)
    }
}

impl<'a> IntoIterator for &'a SchemaTermSet {
    type Item = &'a String;
    type IntoIter = std::slice::Iter<'a, String>;

    fn into_iter(self) -> Self::IntoIter {
        self.terms.iter()
    }
}

/// Serialized sorted term tuple; questions with equal keys form one group.
#[derive(Debug, Clone, Default, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(transparent)]
pub struct GroupKey(String);

impl GroupKey {
    pub fn as_str(&self) -> &str {
        &self.0
    }

    /// The terms the key was built from.
    pub fn terms(&self) -> impl Iterator<Item = &str> {
        self.0.split(TERM_SEPARATOR).filter(|t| !t.is_empty())
    }
}

impl fmt::Display for GroupKey {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let mut first = true;
        write!(f, "(")?;
        for t in self.terms() {
            if !first {
                write!(f, ", ")?;
            }
            write!(f, "{t:?}")?;
            first = false;
        }
        write!(f, ")")
    }
}

pub fn canonical_key(terms: &SchemaTermSet) -> GroupKey {
    let mut sep = [0u8; 4];
    GroupKey(terms.terms.join(TERM_SEPARATOR.encode_utf8(&mut sep)))
}
