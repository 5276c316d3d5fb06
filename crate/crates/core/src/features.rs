//! Vocabulary, count vectors and TF-IDF weighting.
//!
//! The same representations back the ZEUS classifiers and the ranking of terms
//! in a tagging session.

use std::collections::{BTreeMap, BTreeSet, HashMap};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::corpus::TokenDoc;

/// Sparse row: `(column, weight)` pairs with strictly increasing columns.
pub type SparseRow = Vec<(usize, f64)>;

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum FeatureError {
    #[error("cannot build a vocabulary from an empty corpus")]
    EmptyCorpus,
    #[error("min_df must be at least 1")]
    InvalidMinDf,
    #[error("expected a count-weighted matrix, got {0:?}")]
    NotCountWeighted(Weighting),
    #[error("matrix was built against vocabulary {matrix}, not {vocabulary}")]
    VocabularyMismatch { matrix: String, vocabulary: String },
    #[error("invalid vocabulary: {0}")]
    InvalidVocabulary(String),
}

/// IDF formula used for TF-IDF weighting.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TfidfVariant {
    /// `ln(N / df)`, raw term counts, no normalization.
    #[default]
    Plain,
    /// `ln((1 + N) / (1 + df)) + 1`, raw term counts.
    Smooth,
}

impl TfidfVariant {
    pub fn idf(self, n_docs: usize, df: usize) -> f64 {
        match self {
            TfidfVariant::Plain => (n_docs as f64 / df as f64).ln(),
            TfidfVariant::Smooth => ((1 + n_docs) as f64 / (1 + df) as f64).ln() + 1.0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Weighting {
    Count,
    Tfidf(TfidfVariant),
}

/// How per-document TF-IDF weights are aggregated into one corpus-level term score.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ScoreAggregate {
    #[default]
    Sum,
    Mean,
    Max,
}

/// Lexicographically ordered term list with document frequencies.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FeatureVocabulary {
    terms: Vec<String>,
    index: HashMap<String, usize>,
    document_frequency: Vec<usize>,
    n_docs: usize,
}

#[derive(Serialize, Deserialize)]
struct VocabularyEntry {
    term: String,
    index: usize,
    df: usize,
}

#[derive(Serialize, Deserialize)]
struct VocabularyFile {
    n_docs: usize,
    terms: Vec<VocabularyEntry>,
}

impl Serialize for FeatureVocabulary {
    fn serialize<S: serde::Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        VocabularyFile {
            n_docs: self.n_docs,
            terms: self
                .terms
                .iter()
                .enumerate()
                .map(|(index, term)| VocabularyEntry {
                    term: term.clone(),
                    index,
                    df: self.document_frequency[index],
                })
                .collect(),
        }
        .serialize(serializer)
    }
}

impl<'de> Deserialize<'de> for FeatureVocabulary {
    fn deserialize<D: serde::Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        let file = VocabularyFile::deserialize(deserializer)?;
        FeatureVocabulary::from_entries(
            file.n_docs,
            file.terms.into_iter().map(|e| (e.term, e.index, e.df)).collect(),
        )
        .map_err(serde::de::Error::custom)
    }
}

impl FeatureVocabulary {
    fn from_entries(n_docs: usize, mut entries: Vec<(String, usize, usize)>) -> Result<Self, FeatureError> {
        entries.sort_by_key(|e| e.1);
        let mut terms = Vec::with_capacity(entries.len());
        let mut index = HashMap::with_capacity(entries.len());
        let mut document_frequency = Vec::with_capacity(entries.len());
        for (pos, (term, idx, df)) in entries.into_iter().enumerate() {
            if idx != pos {
                return Err(FeatureError::InvalidVocabulary(format!("index {idx} out of sequence")));
            }
            if df == 0 || df > n_docs {
                return Err(FeatureError::InvalidVocabulary(format!("df of `{term}` is {df}")));
            }
            if index.insert(term.clone(), idx).is_some() {
                return Err(FeatureError::InvalidVocabulary(format!("duplicate term `{term}`")));
            }
            terms.push(term);
            document_frequency.push(df);
        }
        Ok(Self {
            terms,
            index,
            document_frequency,
            n_docs,
        })
    }

    pub fn len(&self) -> usize {
        self.terms.len()
    }

    pub fn is_empty(&self) -> bool {
        self.terms.is_empty()
    }

    pub fn terms(&self) -> &[String] {
        &self.terms
    }

    pub fn index_of(&self, term: &str) -> Option<usize> {
        self.index.get(term).copied()
    }

    pub fn term(&self, column: usize) -> &str {
        &self.terms[column]
    }

    pub fn document_frequency(&self, column: usize) -> usize {
        self.document_frequency[column]
    }

    /// Number of documents the vocabulary was built from.
    pub fn n_docs(&self) -> usize {
        self.n_docs
    }

    /// Short content hash identifying this vocabulary.
    pub fn fingerprint(&self) -> String {
        let mut hasher = Sha256::new();
        hasher.update(self.n_docs.to_le_bytes());
        for (term, df) in self.terms.iter().zip(&self.document_frequency) {
            hasher.update(term.as_bytes());
            hasher.update([0]);
            hasher.update(df.to_le_bytes());
        }
        hex::encode(&hasher.finalize()[..8])
    }
}

/// Builds the vocabulary of tokens occurring in at least `min_df` documents.
pub fn build_vocabulary(docs: &[TokenDoc], min_df: usize) -> Result<FeatureVocabulary, FeatureError> {
    if docs.is_empty() {
        return Err(FeatureError::EmptyCorpus);
    }
    if min_df == 0 {
        return Err(FeatureError::InvalidMinDf);
    }
    let mut df: BTreeMap<&str, usize> = BTreeMap::new();
    for doc in docs {
        let unique: BTreeSet<&str> = doc.tokens.iter().map(String::as_str).collect();
        for t in unique {
            *df.entry(t).or_default() += 1;
        }
    }
    let entries = df
        .into_iter()
        .filter(|(_, n)| *n >= min_df)
        .enumerate()
        .map(|(i, (t, n))| (t.to_string(), i, n))
        .collect();
    FeatureVocabulary::from_entries(docs.len(), entries)
}

/// Sparse document-term matrix.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeatureMatrix {
    pub rows: Vec<SparseRow>,
    pub n_cols: usize,
    pub weighting: Weighting,
    /// Fingerprint of the vocabulary the columns refer to.
    pub vocabulary_id: String,
    /// Rows whose tokens were all out of vocabulary.
    pub empty_rows: Vec<usize>,
}

impl FeatureMatrix {
    pub fn n_rows(&self) -> usize {
        self.rows.len()
    }

    pub fn to_dense(&self) -> Vec<Vec<f64>> {
        self.rows
            .iter()
            .map(|row| {
                let mut dense = vec![0.0; self.n_cols];
                for &(c, w) in row {
                    dense[c] = w;
                }
                dense
            })
            .collect()
    }

    /// Matrix restricted to the given rows, in the given order.
    pub fn select_rows(&self, rows: &[usize]) -> FeatureMatrix {
        let selected: Vec<SparseRow> = rows.iter().map(|&r| self.rows[r].clone()).collect();
        let empty_rows = selected
            .iter()
            .enumerate()
            .filter(|(_, r)| r.is_empty())
            .map(|(i, _)| i)
            .collect();
        FeatureMatrix {
            rows: selected,
            n_cols: self.n_cols,
            weighting: self.weighting,
            vocabulary_id: self.vocabulary_id.clone(),
            empty_rows,
        }
    }
}

fn count_row(tokens: &[String], vocab: &FeatureVocabulary) -> SparseRow {
    let mut counts: BTreeMap<usize, f64> = BTreeMap::new();
    for t in tokens {
        if let Some(c) = vocab.index_of(t) {
            *counts.entry(c).or_default() += 1.0;
        }
    }
    counts.into_iter().collect()
}

/// Term occurrence counts per document. Out-of-vocabulary tokens are ignored.
pub fn vectorize_counts(docs: &[TokenDoc], vocab: &FeatureVocabulary) -> FeatureMatrix {
    let rows: Vec<SparseRow> = docs.par_iter().map(|d| count_row(&d.tokens, vocab)).collect();
    let empty_rows = rows
        .iter()
        .enumerate()
        .filter(|(_, r)| r.is_empty())
        .map(|(i, _)| i)
        .collect();
    FeatureMatrix {
        rows,
        n_cols: vocab.len(),
        weighting: Weighting::Count,
        vocabulary_id: vocab.fingerprint(),
        empty_rows,
    }
}

/// Reweights a count matrix with `tf * idf`, idf taken from the vocabulary's corpus.
pub fn tfidf(
    matrix: &FeatureMatrix,
    vocab: &FeatureVocabulary,
    variant: TfidfVariant,
) -> Result<FeatureMatrix, FeatureError> {
    if matrix.weighting != Weighting::Count {
        return Err(FeatureError::NotCountWeighted(matrix.weighting));
    }
    let vocabulary = vocab.fingerprint();
    if matrix.vocabulary_id != vocabulary {
        return Err(FeatureError::VocabularyMismatch {
            matrix: matrix.vocabulary_id.clone(),
            vocabulary,
        });
    }
    let idf: Vec<f64> = (0..vocab.len())
        .map(|c| variant.idf(vocab.n_docs(), vocab.document_frequency(c)))
        .collect();
    let rows = matrix
        .rows
        .iter()
        .map(|row| row.iter().map(|&(c, tf)| (c, tf * idf[c])).collect())
        .collect();
    Ok(FeatureMatrix {
        rows,
        n_cols: matrix.n_cols,
        weighting: Weighting::Tfidf(variant),
        vocabulary_id: matrix.vocabulary_id.clone(),
        empty_rows: matrix.empty_rows.clone(),
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TermScore {
    pub term: String,
    pub score: f64,
    pub document_frequency: usize,
}

/// Ranks vocabulary terms by aggregated TF-IDF over the corpus.
///
/// Sorted by descending score; ties go to the lexicographically smaller term.
pub fn corpus_term_scores(
    docs: &[TokenDoc],
    vocab: &FeatureVocabulary,
    variant: TfidfVariant,
    aggregate: ScoreAggregate,
) -> Vec<TermScore> {
    let counts = vectorize_counts(docs, vocab);
    let weighted = tfidf(&counts, vocab, variant).expect("count matrix built from this vocabulary");
    let mut scores = vec![0.0_f64; vocab.len()];
    for row in &weighted.rows {
        for &(c, w) in row {
            scores[c] = match aggregate {
                ScoreAggregate::Sum | ScoreAggregate::Mean => scores[c] + w,
                ScoreAggregate::Max => scores[c].max(w),
            };
        }
    }
    if aggregate == ScoreAggregate::Mean && !docs.is_empty() {
        for s in &mut scores {
            *s /= docs.len() as f64;
        }
    }
    let mut ranked: Vec<TermScore> = scores
        .into_iter()
        .enumerate()
        .map(|(c, score)| TermScore {
            term: vocab.term(c).to_string(),
            score,
            document_frequency: vocab.document_frequency(c),
        })
        .collect();
    ranked.sort_by(|a, b| b.score.total_cmp(&a.score).then_with(|| a.term.cmp(&b.term)));
    ranked
}

#[cfg(test)]
mod tests {
    use super::*;

    fn docs(raw: &[&[&str]]) -> Vec<TokenDoc> {
        raw.iter()
            .enumerate()
            .map(|(i, toks)| TokenDoc {
                work_order_id: i.to_string(),
                tokens: toks.iter().map(|s| s.to_string()).collect(),
            })
            .collect()
    }

    #[test]
    fn vocabulary_with_min_df() {
        let d = docs(&[&["a", "b"], &["b", "c"]]);
        let v = build_vocabulary(&d, 1).unwrap();
        assert_eq!(v.terms(), ["a", "b", "c"]);
        assert_eq!((0..3).map(|c| v.document_frequency(c)).collect::<Vec<_>>(), [1, 2, 1]);
        let v2 = build_vocabulary(&d, 2).unwrap();
        assert_eq!(v2.terms(), ["b"]);
    }

    #[test]
    fn vocabulary_errors() {
        assert_eq!(build_vocabulary(&[], 1), Err(FeatureError::EmptyCorpus));
        assert_eq!(build_vocabulary(&docs(&[&["a"]]), 0), Err(FeatureError::InvalidMinDf));
    }

    #[test]
    fn vocabulary_json_round_trip() {
        let v = build_vocabulary(&docs(&[&["x", "y"], &["y"]]), 1).unwrap();
        let json = serde_json::to_value(&v).unwrap();
        assert_eq!(json["terms"][1]["term"], "y");
        assert_eq!(json["terms"][1]["df"], 2);
        let back: FeatureVocabulary = serde_json::from_value(json).unwrap();
        assert_eq!(back, v);
        assert_eq!(back.fingerprint(), v.fingerprint());

        let bad = serde_json::json!({"n_docs": 1, "terms": [{"term": "a", "index": 0, "df": 0}]});
        assert!(serde_json::from_value::<FeatureVocabulary>(bad).is_err());
    }

    #[test]
    fn counts_and_oov() {
        let v = build_vocabulary(&docs(&[&["a"], &["b"], &["c"]]), 1).unwrap();
        let m = vectorize_counts(&docs(&[&["b", "b", "c"], &["zzz", "qqq"]]), &v);
        assert_eq!(m.rows[0], vec![(1, 2.0), (2, 1.0)]);
        assert!(m.rows[1].is_empty());
        assert_eq!(m.empty_rows, vec![1]);
        assert_eq!(m.n_rows(), 2);
    }

    #[test]
    fn tfidf_hand_values() {
        let d = docs(&[&["a"], &["a", "b"]]);
        let v = build_vocabulary(&d, 1).unwrap();
        let m = tfidf(&vectorize_counts(&d, &v), &v, TfidfVariant::Plain).unwrap();
        // a occurs in every document
        assert_eq!(m.rows[0], vec![(0, 0.0)]);
        assert_eq!(m.rows[1][0], (0, 0.0));
        assert!((m.rows[1][1].1 - std::f64::consts::LN_2).abs() < 1e-15);
    }

    #[test]
    fn tfidf_requires_counts() {
        let d = docs(&[&["a"], &["b"]]);
        let v = build_vocabulary(&d, 1).unwrap();
        let once = tfidf(&vectorize_counts(&d, &v), &v, TfidfVariant::Plain).unwrap();
        assert!(matches!(
            tfidf(&once, &v, TfidfVariant::Plain),
            Err(FeatureError::NotCountWeighted(_))
        ));
        let other = build_vocabulary(&docs(&[&["a"], &["c"]]), 1).unwrap();
        assert!(matches!(
            tfidf(&vectorize_counts(&d, &v), &other, TfidfVariant::Plain),
            Err(FeatureError::VocabularyMismatch { .. })
        ));
    }

    #[test]
    fn tfidf_is_linear_in_counts() {
        let d = docs(&[&["a", "b", "b"], &["b", "c"], &["c"]]);
        let v = build_vocabulary(&d, 1).unwrap();
        let mut counts = vectorize_counts(&d, &v);
        let base = tfidf(&counts, &v, TfidfVariant::Plain).unwrap();
        for (_, w) in counts.rows[0].iter_mut() {
            *w *= 3.0;
        }
        let scaled = tfidf(&counts, &v, TfidfVariant::Plain).unwrap();
        for (x, y) in base.rows[0].iter().zip(&scaled.rows[0]) {
            assert!((3.0 * x.1 - y.1).abs() < 1e-12);
        }
    }

    #[test]
    fn single_doc_scores_are_zero_and_lexicographic() {
        let d = docs(&[&["pitch", "axle", "battery"]]);
        let v = build_vocabulary(&d, 1).unwrap();
        let ranked = corpus_term_scores(&d, &v, TfidfVariant::Plain, ScoreAggregate::Sum);
        let terms: Vec<&str> = ranked.iter().map(|t| t.term.as_str()).collect();
        assert_eq!(terms, ["axle", "battery", "pitch"]);
        assert!(ranked.iter().all(|t| t.score == 0.0));
    }

    #[test]
    fn duplicating_a_doc_keeps_order_of_absent_terms() {
        let base = docs(&[&["a"], &["a", "b"], &["b"], &["c"], &["d", "d"], &["e", "c", "d"]]);
        let order = |d: &[TokenDoc]| -> Vec<String> {
            let v = build_vocabulary(d, 1).unwrap();
            corpus_term_scores(d, &v, TfidfVariant::Plain, ScoreAggregate::Sum)
                .into_iter()
                .map(|t| t.term)
                .collect()
        };
        let before = order(&base);
        let mut more = base.clone();
        more.push(base[1].clone());
        let after = order(&more);
        let absent = |o: &[String]| -> Vec<String> { o.iter().filter(|t| *t != "a" && *t != "b").cloned().collect() };
        assert_eq!(absent(&before), absent(&after));
    }

    #[test]
    fn aggregates() {
        let d = docs(&[&["a", "a"], &["b"], &["a", "c"]]);
        let v = build_vocabulary(&d, 1).unwrap();
        let get = |agg| {
            corpus_term_scores(&d, &v, TfidfVariant::Plain, agg)
                .into_iter()
                .map(|t| (t.term, t.score))
                .collect::<BTreeMap<_, _>>()
        };
        let idf_a = (3.0_f64 / 2.0).ln();
        let sum = get(ScoreAggregate::Sum);
        let mean = get(ScoreAggregate::Mean);
        let max = get(ScoreAggregate::Max);
        assert!((sum["a"] - 3.0 * idf_a).abs() < 1e-12);
        assert!((mean["a"] - idf_a).abs() < 1e-12);
        assert!((max["a"] - 2.0 * idf_a).abs() < 1e-12);
    }

    #[test]
    fn smooth_variant_never_zero() {
        assert!(TfidfVariant::Smooth.idf(5, 5) > 0.0);
        assert_eq!(TfidfVariant::Plain.idf(5, 5), 0.0);
    }
}
