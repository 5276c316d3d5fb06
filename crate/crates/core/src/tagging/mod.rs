//! Human-in-the-loop term tagging.
//!
//! An analyst walks down the TF-IDF ranked term list, groups similar terms
//! under a common alias and gives each group an entity. The resulting
//! vocabulary is applied to the token documents to obtain per-order tags.

mod effort;
mod session;
mod vocabulary;

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::corpus::TokenDoc;
use crate::features::FeatureError;

pub use effort::{EffortAction, EffortEvent, EffortLog};
pub use session::{
    AssignOutcome, JournalRecord, NextTerms, Progress, QueueTerm, SessionOptions, Suggestion, TaggingSession,
    DEFAULT_SIMILARITY_THRESHOLD,
};
pub use vocabulary::{TagEntry, TagVocabulary};

/// Nestor entity of a tagged term.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum TagEntity {
    /// Problem
    P,
    /// Solution
    S,
    /// Item
    I,
    /// Ambiguous
    U,
    /// Irrelevant
    X,
}

impl TagEntity {
    pub const ALL: [TagEntity; 5] = [TagEntity::P, TagEntity::S, TagEntity::I, TagEntity::U, TagEntity::X];

    pub fn as_str(self) -> &'static str {
        match self {
            TagEntity::P => "P",
            TagEntity::S => "S",
            TagEntity::I => "I",
            TagEntity::U => "U",
            TagEntity::X => "X",
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            TagEntity::P => "Problem",
            TagEntity::S => "Solution",
            TagEntity::I => "Item",
            TagEntity::U => "Ambiguous",
            TagEntity::X => "Irrelevant",
        }
    }
}

impl fmt::Display for TagEntity {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for TagEntity {
    type Err = TaggingError;

    /// Accepts the letter or the full name, case-insensitively.
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let s = s.trim();
        TagEntity::ALL
            .into_iter()
            .find(|e| e.as_str().eq_ignore_ascii_case(s) || e.name().eq_ignore_ascii_case(s))
            .ok_or_else(|| TaggingError::InvalidEntity(s.to_string()))
    }
}

#[derive(Debug, thiserror::Error)]
pub enum TaggingError {
    #[error("invalid entity `{0}` (expected one of P, S, I, U, X)")]
    InvalidEntity(String),
    #[error("term `{0}` is not in the session vocabulary")]
    UnknownTerm(String),
    #[error("entity {0} requires a non-empty alias")]
    EmptyAlias(TagEntity),
    #[error("no terms given")]
    NoTerms,
    #[error("similarity threshold must lie in [0, 1], got {0}")]
    InvalidThreshold(f64),
    #[error("manual effort must be a finite, non-negative number of hours, got {0}")]
    InvalidHours(f64),
    #[error("term `{0}` appears more than once in the vocabulary file")]
    DuplicateTerm(String),
    #[error("vocabulary line {line}: {message}")]
    InvalidVocabularyRow { line: u64, message: String },
    #[error("journal {path}, line {line}: {message}")]
    Journal { path: String, line: usize, message: String },
    #[error("{path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("csv: {0}")]
    Csv(#[from] csv::Error),
    #[error(transparent)]
    Features(#[from] FeatureError),
}

/// One (alias, entity) tag found in a document, with the token positions that carry it.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct DocTag {
    pub alias: String,
    pub entity: TagEntity,
    pub positions: Vec<usize>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TaggedDoc {
    pub work_order_id: String,
    pub tokens: Vec<String>,
    /// Sorted by (alias, entity).
    pub tags: Vec<DocTag>,
}

impl TaggedDoc {
    pub fn has_tag(&self, alias: &str, entity: TagEntity) -> bool {
        self.tags.iter().any(|t| t.alias == alias && t.entity == entity)
    }
}

/// Token documents annotated with a vocabulary.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TaggedCorpus {
    pub docs: Vec<TaggedDoc>,
    /// Every (alias, entity) pair the vocabulary defines, excluding `X`.
    pub aliases: BTreeSet<(String, TagEntity)>,
    pub corpus_fingerprint: String,
}

/// Stable identifier of a token corpus (ids and tokens, in order).
pub fn corpus_fingerprint(docs: &[TokenDoc]) -> String {
    let mut hasher = Sha256::new();
    for doc in docs {
        hasher.update(doc.work_order_id.as_bytes());
        hasher.update([0x1f]);
        for t in &doc.tokens {
            hasher.update(t.as_bytes());
            hasher.update([0x20]);
        }
        hasher.update([0x1e]);
    }
    hex::encode(&hasher.finalize()[..8])
}

/// Annotates each document with the (alias, entity) pairs of its tagged tokens.
///
/// Irrelevant (`X`) terms produce no tags.
pub fn apply_tags(docs: &[TokenDoc], vocabulary: &TagVocabulary) -> TaggedCorpus {
    let tagged_docs = docs
        .iter()
        .map(|doc| {
            let mut tags: BTreeMap<(String, TagEntity), Vec<usize>> = BTreeMap::new();
            for (pos, token) in doc.tokens.iter().enumerate() {
                if let Some(entry) = vocabulary.get(token) {
                    if entry.entity != TagEntity::X {
                        tags.entry((entry.alias.clone(), entry.entity)).or_default().push(pos);
                    }
                }
            }
            TaggedDoc {
                work_order_id: doc.work_order_id.clone(),
                tokens: doc.tokens.clone(),
                tags: tags
                    .into_iter()
                    .map(|((alias, entity), positions)| DocTag { alias, entity, positions })
                    .collect(),
            }
        })
        .collect();
    TaggedCorpus {
        docs: tagged_docs,
        aliases: vocabulary
            .iter()
            .filter(|(_, e)| e.entity != TagEntity::X)
            .map(|(_, e)| (e.alias.clone(), e.entity))
            .collect(),
        corpus_fingerprint: corpus_fingerprint(docs),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use chrono::{TimeZone, Utc};

    fn doc(id: &str, tokens: &[&str]) -> TokenDoc {
        TokenDoc {
            work_order_id: id.into(),
            tokens: tokens.iter().map(|t| t.to_string()).collect(),
        }
    }

    fn vocab(entries: &[(&str, &str, TagEntity)]) -> TagVocabulary {
        let at = Utc.with_ymd_and_hms(2024, 1, 1, 0, 0, 0).unwrap();
        let mut v = TagVocabulary::default();
        for (term, alias, entity) in entries {
            v.insert(term, alias, *entity, at).unwrap();
        }
        v
    }

    #[test]
    fn entity_parsing() {
        assert_eq!("p".parse::<TagEntity>().unwrap(), TagEntity::P);
        assert_eq!("Irrelevant".parse::<TagEntity>().unwrap(), TagEntity::X);
        assert!(matches!("Q".parse::<TagEntity>(), Err(TaggingError::InvalidEntity(_))));
    }

    #[test]
    fn thermo_relay_example() {
        let v = vocab(&[("relay", "relay", TagEntity::I), ("exchanged", "replace", TagEntity::S)]);
        let tagged = apply_tags(&[doc("3", &["thermo", "relay", "exchanged"])], &v);
        let tags: Vec<(&str, TagEntity)> = tagged.docs[0].tags.iter().map(|t| (t.alias.as_str(), t.entity)).collect();
        assert_eq!(tags, [("relay", TagEntity::I), ("replace", TagEntity::S)]);
    }

    #[test]
    fn untagged_doc_has_no_tags() {
        let v = vocab(&[("relay", "relay", TagEntity::I)]);
        assert!(apply_tags(&[doc("1", &["blade", "inspection"])], &v).docs[0].tags.is_empty());
    }

    #[test]
    fn shared_alias_collects_positions() {
        let v = vocab(&[("fault", "failure", TagEntity::P), ("error", "failure", TagEntity::P)]);
        let tagged = apply_tags(&[doc("1", &["fault", "converter", "error"])], &v);
        assert_eq!(tagged.docs[0].tags.len(), 1);
        assert_eq!(tagged.docs[0].tags[0].positions, [0, 2]);
    }

    #[test]
    fn irrelevant_terms_are_suppressed() {
        let v = vocab(&[("the", "", TagEntity::X), ("fault", "failure", TagEntity::P)]);
        let tagged = apply_tags(&[doc("1", &["the", "fault"])], &v);
        assert_eq!(tagged.docs[0].tags.len(), 1);
        assert!(!tagged.aliases.iter().any(|(_, e)| *e == TagEntity::X));
    }

    #[test]
    fn fingerprint_depends_on_content() {
        let a = corpus_fingerprint(&[doc("1", &["ab", "c"])]);
        let b = corpus_fingerprint(&[doc("1", &["a", "bc"])]);
        assert_ne!(a, b);
        assert_eq!(a, corpus_fingerprint(&[doc("1", &["ab", "c"])]));
    }
}
