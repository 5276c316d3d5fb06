//! Rules that pick failure-relevant work orders from a tagged corpus.
//!
//! * R1: orders tagged with the failure alias (as a problem).
//! * R2: R1 without orders whose failure mentions are all negated.
//! * R3: orders with any problem (`P`) tag.
//! * R4: R3 without orders whose problem mentions are all negated.
//!
//! A mention is negated when a cue word occurs within `window` tokens before it.

use std::collections::BTreeSet;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::tagging::{TagEntity, TaggedCorpus, TaggedDoc};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum RuleId {
    R1,
    R2,
    R3,
    R4,
}

impl RuleId {
    pub const ALL: [RuleId; 4] = [RuleId::R1, RuleId::R2, RuleId::R3, RuleId::R4];

    /// Whether the rule is keyed on the failure alias.
    pub fn uses_failure_alias(self) -> bool {
        matches!(self, RuleId::R1 | RuleId::R2)
    }
}

impl fmt::Display for RuleId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{self:?}")
    }
}

impl FromStr for RuleId {
    type Err = RuleError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.trim().to_ascii_uppercase().as_str() {
            "R1" | "1" => Ok(RuleId::R1),
            "R2" | "2" => Ok(RuleId::R2),
            "R3" | "3" => Ok(RuleId::R3),
            "R4" | "4" => Ok(RuleId::R4),
            _ => Err(RuleError::UnknownRule(s.to_string())),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum RuleError {
    #[error("unknown rule `{0}` (expected R1, R2, R3 or R4)")]
    UnknownRule(String),
    #[error("failure alias `{0}` is not tagged as a problem (P) in the vocabulary")]
    UnknownFailureAlias(String),
    #[error("negation window must be at least 1")]
    InvalidWindow,
    #[error("selections were computed on different corpora")]
    MismatchedCorpora,
    #[error("expected one selection for each of R1..R4")]
    IncompleteSelections,
    #[error("subset chain violated: {0}")]
    ChainViolation(String),
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default)]
pub struct NegationConfig {
    pub cues: BTreeSet<String>,
    pub window: usize,
}

impl Default for NegationConfig {
    fn default() -> Self {
        Self {
            cues: ["no", "not", "without", "none", "kein", "keine", "keinen", "nicht"]
                .into_iter()
                .map(String::from)
                .collect(),
            window: 3,
        }
    }
}

impl NegationConfig {
    pub fn validate(&self) -> Result<(), RuleError> {
        if self.window < 1 {
            return Err(RuleError::InvalidWindow);
        }
        Ok(())
    }

    /// Whether a cue precedes `position` within the window.
    pub fn is_negated(&self, tokens: &[String], position: usize) -> bool {
        tokens[position.saturating_sub(self.window)..position]
            .iter()
            .any(|t| self.cues.contains(&t.to_lowercase()))
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RuleSelection {
    pub rule: RuleId,
    pub selected_ids: BTreeSet<String>,
    /// Orders dropped because every qualifying mention was negated (R2, R4).
    pub excluded_by_negation: BTreeSet<String>,
    pub corpus_fingerprint: String,
}

fn failure_positions(doc: &TaggedDoc, alias: &str) -> Vec<usize> {
    doc.tags
        .iter()
        .filter(|t| t.entity == TagEntity::P && t.alias == alias)
        .flat_map(|t| t.positions.iter().copied())
        .collect()
}

fn problem_positions(doc: &TaggedDoc) -> Vec<usize> {
    doc.tags
        .iter()
        .filter(|t| t.entity == TagEntity::P)
        .flat_map(|t| t.positions.iter().copied())
        .collect()
}

/// Evaluates one rule. `failure_alias` is only consulted by R1 and R2 and must
/// be a problem alias of the vocabulary, which keeps R1 inside R3.
pub fn select(
    rule: RuleId,
    tagged: &TaggedCorpus,
    failure_alias: &str,
    negation: &NegationConfig,
) -> Result<RuleSelection, RuleError> {
    negation.validate()?;
    let alias = failure_alias.trim().to_lowercase();
    if rule.uses_failure_alias() && !tagged.aliases.contains(&(alias.clone(), TagEntity::P)) {
        return Err(RuleError::UnknownFailureAlias(failure_alias.to_string()));
    }
    let mut selected_ids = BTreeSet::new();
    let mut excluded_by_negation = BTreeSet::new();
    for doc in &tagged.docs {
        let positions = match rule {
            RuleId::R1 | RuleId::R2 => failure_positions(doc, &alias),
            RuleId::R3 | RuleId::R4 => problem_positions(doc),
        };
        if positions.is_empty() {
            continue;
        }
        let checks_negation = matches!(rule, RuleId::R2 | RuleId::R4);
        if checks_negation && positions.iter().all(|&p| negation.is_negated(&doc.tokens, p)) {
            excluded_by_negation.insert(doc.work_order_id.clone());
        } else {
            selected_ids.insert(doc.work_order_id.clone());
        }
    }
    Ok(RuleSelection {
        rule,
        selected_ids,
        excluded_by_negation,
        corpus_fingerprint: tagged.corpus_fingerprint.clone(),
    })
}

/// All four selections, in rule order.
pub fn select_all(
    tagged: &TaggedCorpus,
    failure_alias: &str,
    negation: &NegationConfig,
) -> Result<Vec<RuleSelection>, RuleError> {
    RuleId::ALL
        .iter()
        .map(|&r| select(r, tagged, failure_alias, negation))
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RuleSummaryRow {
    pub rule: RuleId,
    pub selected: usize,
    pub excluded_by_negation: usize,
    pub fraction_of_corpus: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RuleReport {
    pub corpus_size: usize,
    pub rows: Vec<RuleSummaryRow>,
}

fn check_subset(sub: &RuleSelection, sup: &RuleSelection) -> Result<(), RuleError> {
    match sub.selected_ids.difference(&sup.selected_ids).next() {
        Some(id) => Err(RuleError::ChainViolation(format!(
            "order {id} is selected by {} but not by {}",
            sub.rule, sup.rule
        ))),
        None => Ok(()),
    }
}

/// Per-rule counts, after checking R2 ⊆ R1 ⊆ R3 and R4 ⊆ R3.
pub fn rule_report(selections: &[RuleSelection], corpus_size: usize) -> Result<RuleReport, RuleError> {
    let find = |r: RuleId| -> Result<&RuleSelection, RuleError> {
        let mut it = selections.iter().filter(|s| s.rule == r);
        match (it.next(), it.next()) {
            (Some(s), None) => Ok(s),
            _ => Err(RuleError::IncompleteSelections),
        }
    };
    let [r1, r2, r3, r4] = [find(RuleId::R1)?, find(RuleId::R2)?, find(RuleId::R3)?, find(RuleId::R4)?];
    if selections.len() != 4 || [r2, r3, r4].iter().any(|s| s.corpus_fingerprint != r1.corpus_fingerprint) {
        return Err(RuleError::MismatchedCorpora);
    }
    check_subset(r2, r1)?;
    check_subset(r1, r3)?;
    check_subset(r4, r3)?;
    let rows = [r1, r2, r3, r4]
        .iter()
        .map(|s| RuleSummaryRow {
            rule: s.rule,
            selected: s.selected_ids.len(),
            excluded_by_negation: s.excluded_by_negation.len(),
            fraction_of_corpus: if corpus_size == 0 {
                0.0
            } else {
                s.selected_ids.len() as f64 / corpus_size as f64
            },
        })
        .collect();
    Ok(RuleReport { corpus_size, rows })
}
