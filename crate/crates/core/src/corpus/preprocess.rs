use std::collections::BTreeSet;
use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{CorpusError, TokenDoc, WorkOrder};

const STOPWORDS_EN: &str = include_str!("../../data/stopwords_en.txt");
const STOPWORDS_DE: &str = include_str!("../../data/stopwords_de.txt");
const JUNKWORDS: &str = include_str!("../../data/junkwords.txt");

/// A set of lowercase words loaded from a one-word-per-line file.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct WordList(BTreeSet<String>);

impl WordList {
    /// Parses one token per line. Blank lines and `#` comments are skipped.
    pub fn parse(text: &str) -> Self {
        WordList(
            text.lines()
                .map(|l| l.split('#').next().unwrap_or("").trim())
                .filter(|l| !l.is_empty())
                .map(str::to_lowercase)
                .collect(),
        )
    }

    pub fn from_file(path: impl AsRef<Path>) -> Result<Self, CorpusError> {
        let path = path.as_ref();
        let text = fs::read_to_string(path).map_err(|e| CorpusError::io(path, e))?;
        Ok(Self::parse(&text))
    }

    /// Shipped English and German stop words.
    pub fn default_stopwords() -> Self {
        let mut list = Self::parse(STOPWORDS_EN);
        list.extend(Self::parse(STOPWORDS_DE));
        list
    }

    pub fn default_junkwords() -> Self {
        Self::parse(JUNKWORDS)
    }

    pub fn extend(&mut self, other: WordList) {
        self.0.extend(other.0);
    }

    pub fn contains(&self, word: &str) -> bool {
        self.0.contains(word)
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = &str> {
        self.0.iter().map(String::as_str)
    }
}

impl<S: Into<String>> FromIterator<S> for WordList {
    fn from_iter<I: IntoIterator<Item = S>>(iter: I) -> Self {
        WordList(iter.into_iter().map(|s| s.into().to_lowercase()).collect())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DropReason {
    /// The raw description was blank.
    EmptyDescription,
    /// Nothing survived cleaning and word removal.
    EmptyAfterCleaning,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct DroppedRow {
    pub work_order_id: String,
    pub reason: DropReason,
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct DropReport {
    pub kept: usize,
    pub dropped_count: usize,
    pub dropped: Vec<DroppedRow>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Preprocessed {
    pub docs: Vec<TokenDoc>,
    pub report: DropReport,
}

// Letters without a lowercase mapping (e.g. mathematical capitals) cannot be
// represented in a token and become separators.
fn lowercase(text: &str) -> String {
    text.to_lowercase()
        .chars()
        .map(|c| if c.is_uppercase() { ' ' } else { c })
        .collect()
}

fn normalize_whitespace(text: &str) -> String {
    text.split_whitespace().collect::<Vec<_>>().join(" ")
}

// Punctuation and symbols become separators so that "sensor/cable" yields two tokens.
fn strip_punctuation(text: &str) -> String {
    text.chars()
        .map(|c| if c.is_alphanumeric() || c.is_whitespace() { c } else { ' ' })
        .collect()
}

fn strip_digits(text: &str) -> String {
    text.chars().filter(|c| !c.is_numeric()).collect()
}

/// Cleans a single description into tokens.
///
/// Steps, in order: lowercase, whitespace normalization, punctuation removal,
/// digit removal, whitespace tokenization, junk-word removal, stop-word removal.
pub fn tokenize(text: &str, stopwords: &WordList, junkwords: &WordList) -> Vec<String> {
    let lowered = lowercase(text);
    let normalized = normalize_whitespace(&lowered);
    let no_punct = strip_punctuation(&normalized);
    let no_digits = strip_digits(&no_punct);
    no_digits
        .split_whitespace()
        .filter(|t| !junkwords.contains(t))
        .filter(|t| !stopwords.contains(t))
        .map(str::to_string)
        .collect()
}

/// Turns work orders into token documents, dropping rows that end up empty.
pub fn preprocess(orders: &[WorkOrder], stopwords: &WordList, junkwords: &WordList) -> Preprocessed {
    let mut docs = Vec::with_capacity(orders.len());
    let mut report = DropReport::default();
    for order in orders {
        let tokens = tokenize(&order.description, stopwords, junkwords);
        if tokens.is_empty() {
            let reason = if order.description.trim().is_empty() {
                DropReason::EmptyDescription
            } else {
                DropReason::EmptyAfterCleaning
            };
            report.dropped.push(DroppedRow {
                work_order_id: order.id.clone(),
                reason,
            });
        } else {
            docs.push(TokenDoc {
                work_order_id: order.id.clone(),
                tokens,
            });
        }
    }
    report.kept = docs.len();
    report.dropped_count = report.dropped.len();
    Preprocessed { docs, report }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::ZeusCode;
    use chrono::NaiveDate;
    use proptest::prelude::*;

    fn order(id: &str, text: &str) -> WorkOrder {
        WorkOrder {
            id: id.into(),
            turbine_id: "WT1".into(),
            start_date: NaiveDate::from_ymd_opt(2023, 1, 1).unwrap(),
            description: text.into(),
            zeus_code: None,
        }
    }

    fn defaults() -> (WordList, WordList) {
        (WordList::default_stopwords(), WordList::default_junkwords())
    }

    #[test]
    fn worked_example_sentences() {
        let (stop, junk) = defaults();
        assert_eq!(
            tokenize("Troubleshooting at crane on outside platform performed.", &stop, &junk),
            ["troubleshooting", "crane", "outside", "platform", "performed"]
        );
        assert_eq!(
            tokenize("Pitch batteries exchanged at axle 2.", &stop, &junk),
            ["pitch", "batteries", "exchanged", "axle"]
        );
        assert_eq!(
            tokenize("Grommets are in position. No correction needed.", &stop, &junk),
            ["grommets", "position", "no", "correction", "needed"]
        );
    }

    #[test]
    fn negation_cues_survive_defaults() {
        let (stop, junk) = defaults();
        for cue in ["no", "not", "none", "without", "kein", "keine", "keinen", "nicht"] {
            assert!(!stop.contains(cue), "{cue} must not be a default stop word");
            assert!(!junk.contains(cue));
        }
    }

    #[test]
    fn german_text_keeps_umlauts() {
        let (stop, junk) = defaults();
        assert_eq!(
            tokenize("Getriebeöl-Filter GETAUSCHT, keine Störung!", &stop, &junk),
            ["getriebeöl", "filter", "getauscht", "keine", "störung"]
        );
    }

    #[test]
    fn blank_rows_are_dropped_and_reported() {
        let (stop, junk) = defaults();
        let orders = vec![order("a", "   "), order("b", "Fixed connector cable."), order("c", "at the 42 ...")];
        let out = preprocess(&orders, &stop, &junk);
        assert_eq!(out.docs.len(), 1);
        assert_eq!(out.docs[0].work_order_id, "b");
        assert_eq!(out.report.dropped_count, 2);
        assert_eq!(out.report.dropped[0].reason, DropReason::EmptyDescription);
        assert_eq!(out.report.dropped[1].reason, DropReason::EmptyAfterCleaning);
        let json = serde_json::to_value(&out.report).unwrap();
        assert_eq!(json["dropped"][1]["reason"], "empty_after_cleaning");
    }

    #[test]
    fn word_list_parsing() {
        let list = WordList::parse("# header\nFoo\n\n bar # trailing\n#baz\n");
        assert_eq!(list.iter().collect::<Vec<_>>(), ["bar", "foo"]);
    }

    #[test]
    fn dropping_empty_rows_shifts_class_shares() {
        // Only the preventive class has blank descriptions, so the other shares can only grow.
        let (stop, junk) = defaults();
        let mut orders = Vec::new();
        for i in 0..30 {
            let (code, text) = match i % 3 {
                0 => (ZeusCode::Corrective, "gearbox failure repaired"),
                1 => (ZeusCode::Preventive, if i % 2 == 0 { "" } else { "annual inspection" }),
                _ => (ZeusCode::Insignificant, "note"),
            };
            let mut o = order(&i.to_string(), text);
            o.zeus_code = Some(code);
            orders.push(o);
        }
        let share = |ids: Vec<&str>, code| {
            let n = ids.len() as f64;
            ids.iter()
                .filter(|id| orders.iter().any(|o| o.id == **id && o.zeus_code == Some(code)))
                .count() as f64
                / n
        };
        let before: Vec<&str> = orders.iter().map(|o| o.id.as_str()).collect();
        let out = preprocess(&orders, &stop, &junk);
        let after: Vec<&str> = out.docs.iter().map(|d| d.work_order_id.as_str()).collect();
        assert!(share(after.clone(), ZeusCode::Corrective) > share(before.clone(), ZeusCode::Corrective));
        assert!(share(after.clone(), ZeusCode::Insignificant) > share(before.clone(), ZeusCode::Insignificant));
        assert!(share(after, ZeusCode::Preventive) < share(before, ZeusCode::Preventive));
    }

    proptest! {
        #[test]
        fn tokens_are_clean(text in "\\PC{0,80}") {
            let (stop, junk) = defaults();
            for token in tokenize(&text, &stop, &junk) {
                prop_assert!(!token.is_empty());
                for c in token.chars() {
                    prop_assert!(c.is_alphabetic(), "{token:?} contains {c:?}");
                    prop_assert!(!c.is_uppercase(), "{token:?} contains {c:?}");
                }
            }
        }

        #[test]
        fn preprocessing_is_idempotent(text in "[ a-zA-ZäöüÄÖÜß0-9.,;:!?/()-]{0,80}") {
            let (stop, junk) = defaults();
            let once = tokenize(&text, &stop, &junk);
            let twice = tokenize(&once.join(" "), &stop, &junk);
            prop_assert_eq!(once, twice);
        }

        #[test]
        fn every_doc_maps_to_one_order(texts in proptest::collection::vec("[ a-z0-9.]{0,20}", 0..20)) {
            let (stop, junk) = defaults();
            let orders: Vec<WorkOrder> = texts.iter().enumerate().map(|(i, t)| order(&i.to_string(), t)).collect();
            let out = preprocess(&orders, &stop, &junk);
            prop_assert_eq!(out.docs.len() + out.report.dropped_count, orders.len());
            for doc in &out.docs {
                prop_assert_eq!(orders.iter().filter(|o| o.id == doc.work_order_id).count(), 1);
            }
        }
    }
}
