use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::fs::{self, OpenOptions};
use std::io::Write;
use std::path::{Path, PathBuf};

use chrono::{DateTime, Utc};
use serde::{Deserialize, Serialize};

use super::vocabulary::normalize_alias;
use super::{apply_tags, EffortAction, EffortEvent, EffortLog, TagEntity, TagVocabulary, TaggedCorpus, TaggingError};
use crate::corpus::TokenDoc;
use crate::features::{build_vocabulary, corpus_term_scores, ScoreAggregate, TermScore, TfidfVariant};

pub const DEFAULT_SIMILARITY_THRESHOLD: f64 = 0.75;

/// How the term queue is ranked.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default)]
pub struct SessionOptions {
    pub tfidf: TfidfVariant,
    pub aggregate: ScoreAggregate,
}

/// One line of the append-only session journal.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "event", rename_all = "snake_case")]
pub enum JournalRecord {
    Open {
        at: DateTime<Utc>,
    },
    Close {
        at: DateTime<Utc>,
    },
    Assign {
        at: DateTime<Utc>,
        terms: Vec<String>,
        alias: String,
        entity: TagEntity,
    },
    ManualHours {
        hours: f64,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QueueTerm {
    pub term: String,
    pub score: f64,
    pub document_frequency: usize,
    pub occurrences: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NextTerms {
    pub terms: Vec<QueueTerm>,
    /// Share of token occurrences whose term is already tagged.
    pub coverage: f64,
    pub remaining: usize,
    pub version: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Suggestion {
    pub term: String,
    pub similarity: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AssignOutcome {
    pub version: u64,
    pub assigned: Vec<String>,
    /// Terms that already had an entry, which was replaced.
    pub reassigned: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Progress {
    pub version: u64,
    pub total_terms: usize,
    pub tagged_terms: usize,
    pub untagged_terms: usize,
    pub coverage: f64,
    pub terms_per_entity: BTreeMap<TagEntity, usize>,
    /// Share of token occurrences tagged as ambiguous; these never satisfy a rule.
    pub ambiguous_share: f64,
    pub effort_hours: f64,
}

/// State of one tagging session over a fixed corpus.
///
/// Every mutation is appended to the journal (when one is configured) before
/// it is applied, so reopening with the same journal restores the state.
#[derive(Debug)]
pub struct TaggingSession {
    docs: Vec<TokenDoc>,
    ranking: Vec<TermScore>,
    occurrences: HashMap<String, usize>,
    total_occurrences: usize,
    vocabulary: TagVocabulary,
    version: u64,
    effort: EffortLog,
    journal: Option<PathBuf>,
}

impl TaggingSession {
    /// In-memory session without a journal.
    pub fn new(docs: Vec<TokenDoc>, options: SessionOptions) -> Result<Self, TaggingError> {
        let vocab = build_vocabulary(&docs, 1)?;
        let ranking = corpus_term_scores(&docs, &vocab, options.tfidf, options.aggregate);
        let mut occurrences: HashMap<String, usize> = HashMap::new();
        for doc in &docs {
            for t in &doc.tokens {
                *occurrences.entry(t.clone()).or_default() += 1;
            }
        }
        let total_occurrences = occurrences.values().sum();
        Ok(Self {
            docs,
            ranking,
            occurrences,
            total_occurrences,
            vocabulary: TagVocabulary::default(),
            version: 0,
            effort: EffortLog::default(),
            journal: None,
        })
    }

    /// Opens a journaled session, replaying any existing journal, and records an open event.
    pub fn open(
        docs: Vec<TokenDoc>,
        options: SessionOptions,
        journal: impl AsRef<Path>,
        at: DateTime<Utc>,
    ) -> Result<Self, TaggingError> {
        let path = journal.as_ref().to_path_buf();
        let mut session = Self::new(docs, options)?;
        if path.exists() {
            let text = fs::read_to_string(&path).map_err(|source| TaggingError::Io {
                path: path.display().to_string(),
                source,
            })?;
            for (i, line) in text.lines().enumerate().filter(|(_, l)| !l.trim().is_empty()) {
                let journal_error = |message: String| TaggingError::Journal {
                    path: path.display().to_string(),
                    line: i + 1,
                    message,
                };
                let record: JournalRecord = serde_json::from_str(line).map_err(|e| journal_error(e.to_string()))?;
                session.apply_record(record).map_err(|e| journal_error(e.to_string()))?;
            }
        }
        session.journal = Some(path);
        session.commit(JournalRecord::Open { at })?;
        Ok(session)
    }

    fn write_journal(&self, record: &JournalRecord) -> Result<(), TaggingError> {
        let Some(path) = &self.journal else {
            return Ok(());
        };
        let io_error = |source| TaggingError::Io {
            path: path.display().to_string(),
            source,
        };
        let mut file = OpenOptions::new().create(true).append(true).open(path).map_err(io_error)?;
        let mut line = serde_json::to_string(record).expect("journal record serializes");
        line.push('\n');
        file.write_all(line.as_bytes()).map_err(io_error)?;
        file.sync_data().map_err(io_error)
    }

    fn validate(&self, record: &JournalRecord) -> Result<(), TaggingError> {
        match record {
            JournalRecord::Assign {
                terms, alias, entity, ..
            } => {
                if terms.is_empty() {
                    return Err(TaggingError::NoTerms);
                }
                if let Some(t) = terms.iter().find(|t| !self.occurrences.contains_key(t.as_str())) {
                    return Err(TaggingError::UnknownTerm(t.clone()));
                }
                normalize_alias(alias, *entity).map(|_| ())
            }
            JournalRecord::ManualHours { hours } if !(hours.is_finite() && *hours >= 0.0) => {
                Err(TaggingError::InvalidHours(*hours))
            }
            _ => Ok(()),
        }
    }

    fn apply_record(&mut self, record: JournalRecord) -> Result<Option<AssignOutcome>, TaggingError> {
        self.validate(&record)?;
        let outcome = match record {
            JournalRecord::Open { at } | JournalRecord::Close { at } => {
                let action = if matches!(record, JournalRecord::Open { .. }) {
                    EffortAction::Open
                } else {
                    EffortAction::Close
                };
                self.effort.record(EffortEvent {
                    at,
                    action,
                    term: None,
                    alias: None,
                    entity: None,
                });
                None
            }
            JournalRecord::ManualHours { hours } => {
                self.effort.manual_hours = Some(hours);
                None
            }
            JournalRecord::Assign {
                at,
                terms,
                alias,
                entity,
            } => {
                let unique: BTreeSet<String> = terms.into_iter().collect();
                let mut assigned = Vec::new();
                let mut reassigned = Vec::new();
                for term in unique {
                    let previous = self.vocabulary.insert(&term, &alias, entity, at)?;
                    let entry = self.vocabulary.get(&term).expect("just inserted");
                    self.effort.record(EffortEvent {
                        at,
                        action: if previous.is_some() {
                            EffortAction::Reassign
                        } else {
                            EffortAction::Assign
                        },
                        term: Some(term.clone()),
                        alias: Some(entry.alias.clone()),
                        entity: Some(entity),
                    });
                    if previous.is_some() {
                        reassigned.push(term.clone());
                    }
                    assigned.push(term);
                }
                self.version += 1;
                Some(AssignOutcome {
                    version: self.version,
                    assigned,
                    reassigned,
                })
            }
        };
        Ok(outcome)
    }

    fn commit(&mut self, record: JournalRecord) -> Result<Option<AssignOutcome>, TaggingError> {
        self.validate(&record)?;
        self.write_journal(&record)?;
        self.apply_record(record)
    }

    /// Maps every term to `alias` with `entity`. Tagged terms are overwritten.
    pub fn assign(
        &mut self,
        terms: &[String],
        alias: &str,
        entity: TagEntity,
        at: DateTime<Utc>,
    ) -> Result<AssignOutcome, TaggingError> {
        let record = JournalRecord::Assign {
            at,
            terms: terms.iter().map(|t| t.trim().to_lowercase()).collect(),
            alias: alias.to_string(),
            entity,
        };
        Ok(self.commit(record)?.expect("assign yields an outcome"))
    }

    pub fn close(&mut self, at: DateTime<Utc>) -> Result<(), TaggingError> {
        self.commit(JournalRecord::Close { at }).map(|_| ())
    }

    pub fn set_manual_hours(&mut self, hours: f64) -> Result<(), TaggingError> {
        self.commit(JournalRecord::ManualHours { hours }).map(|_| ())
    }

    pub fn docs(&self) -> &[TokenDoc] {
        &self.docs
    }

    pub fn vocabulary(&self) -> &TagVocabulary {
        &self.vocabulary
    }

    pub fn effort(&self) -> &EffortLog {
        &self.effort
    }

    /// Incremented on every assignment.
    pub fn version(&self) -> u64 {
        self.version
    }

    /// Full ranking, tagged terms included.
    pub fn ranking(&self) -> &[TermScore] {
        &self.ranking
    }

    pub fn coverage(&self) -> f64 {
        if self.total_occurrences == 0 {
            return 1.0;
        }
        let covered: usize = self
            .vocabulary
            .iter()
            .map(|(t, _)| self.occurrences.get(t).copied().unwrap_or(0))
            .sum();
        covered as f64 / self.total_occurrences as f64
    }

    /// The `n` highest ranked untagged terms.
    pub fn next_terms(&self, n: usize) -> NextTerms {
        let untagged = self.ranking.iter().filter(|s| !self.vocabulary.contains(&s.term));
        let remaining = untagged.clone().count();
        NextTerms {
            terms: untagged
                .take(n)
                .map(|s| QueueTerm {
                    term: s.term.clone(),
                    score: s.score,
                    document_frequency: s.document_frequency,
                    occurrences: self.occurrences[&s.term],
                })
                .collect(),
            coverage: self.coverage(),
            remaining,
            version: self.version,
        }
    }

    /// Untagged terms whose normalized Levenshtein similarity to `term` is at least `threshold`.
    pub fn suggest_similar(&self, term: &str, threshold: f64) -> Result<Vec<Suggestion>, TaggingError> {
        if !(0.0..=1.0).contains(&threshold) {
            return Err(TaggingError::InvalidThreshold(threshold));
        }
        if !self.occurrences.contains_key(term) {
            return Err(TaggingError::UnknownTerm(term.to_string()));
        }
        let mut out: Vec<Suggestion> = self
            .ranking
            .iter()
            .filter(|s| s.term != term && !self.vocabulary.contains(&s.term))
            .map(|s| Suggestion {
                term: s.term.clone(),
                similarity: strsim::normalized_levenshtein(term, &s.term),
            })
            .filter(|s| s.similarity >= threshold)
            .collect();
        out.sort_by(|a, b| b.similarity.total_cmp(&a.similarity).then_with(|| a.term.cmp(&b.term)));
        Ok(out)
    }

    pub fn progress(&self) -> Progress {
        let mut terms_per_entity: BTreeMap<TagEntity, usize> = TagEntity::ALL.iter().map(|e| (*e, 0)).collect();
        let mut ambiguous = 0usize;
        for (term, entry) in self.vocabulary.iter() {
            *terms_per_entity.entry(entry.entity).or_default() += 1;
            if entry.entity == TagEntity::U {
                ambiguous += self.occurrences.get(term).copied().unwrap_or(0);
            }
        }
        let total_terms = self.ranking.len();
        Progress {
            version: self.version,
            total_terms,
            tagged_terms: self.vocabulary.len(),
            untagged_terms: total_terms - self.vocabulary.len(),
            coverage: self.coverage(),
            terms_per_entity,
            ambiguous_share: if self.total_occurrences == 0 {
                0.0
            } else {
                ambiguous as f64 / self.total_occurrences as f64
            },
            effort_hours: self.effort.total_hours(),
        }
    }

    /// Tags the session corpus with the current vocabulary.
    pub fn apply(&self) -> TaggedCorpus {
        apply_tags(&self.docs, &self.vocabulary)
    }
}
