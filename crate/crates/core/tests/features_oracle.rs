//! Sparse feature code checked against dense brute-force recomputation.

use std::collections::BTreeSet;

use mwo_core::corpus::TokenDoc;
use mwo_core::features::{
    build_vocabulary, corpus_term_scores, tfidf, vectorize_counts, ScoreAggregate, TfidfVariant,
};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn doc(i: usize, tokens: Vec<String>) -> TokenDoc {
    TokenDoc {
        work_order_id: format!("d{i}"),
        tokens,
    }
}

fn random_corpus(rng: &mut ChaCha8Rng, n_docs: usize, alphabet: usize) -> Vec<TokenDoc> {
    (0..n_docs)
        .map(|i| {
            let len = rng.gen_range(1..12);
            doc(i, (0..len).map(|_| format!("t{}", rng.gen_range(0..alphabet))).collect())
        })
        .collect()
}

#[test]
fn vocabulary_matches_set_comprehension_on_1000_docs() {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let docs = random_corpus(&mut rng, 1000, 400);
    for min_df in [1, 3, 10] {
        let vocab = build_vocabulary(&docs, min_df).unwrap();
        let all: BTreeSet<&String> = docs.iter().flat_map(|d| d.tokens.iter()).collect();
        let expected: Vec<String> = all
            .into_iter()
            .filter(|t| docs.iter().filter(|d| d.tokens.contains(t)).count() >= min_df)
            .cloned()
            .collect();
        assert_eq!(vocab.terms(), expected.as_slice());
        for (c, t) in vocab.terms().iter().enumerate() {
            assert_eq!(vocab.index_of(t), Some(c));
            assert_eq!(vocab.document_frequency(c), docs.iter().filter(|d| d.tokens.contains(t)).count());
        }
    }
}

#[test]
fn vocabulary_is_deterministic() {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let mut docs = random_corpus(&mut rng, 200, 50);
    let a = build_vocabulary(&docs, 1).unwrap();
    docs.reverse();
    let b = build_vocabulary(&docs, 1).unwrap();
    assert_eq!(a.terms(), b.terms());
    assert_eq!(a.fingerprint(), b.fingerprint());
}

#[test]
fn ranking_of_four_doc_corpus() {
    let raw: [&[&str]; 4] = [&["a"], &["a", "b"], &["b"], &["c"]];
    let docs: Vec<TokenDoc> = raw
        .iter()
        .enumerate()
        .map(|(i, t)| doc(i, t.iter().map(|s| s.to_string()).collect()))
        .collect();
    let vocab = build_vocabulary(&docs, 1).unwrap();

    // brute force over every (doc, term) pair
    let n = docs.len() as f64;
    let mut oracle: Vec<(String, f64)> = ["a", "b", "c"]
        .iter()
        .map(|t| {
            let df = docs.iter().filter(|d| d.tokens.iter().any(|x| x == t)).count() as f64;
            let score: f64 = docs
                .iter()
                .map(|d| d.tokens.iter().filter(|x| x == t).count() as f64 * (n / df).ln())
                .sum();
            (t.to_string(), score)
        })
        .collect();
    oracle.sort_by(|x, y| y.1.total_cmp(&x.1).then(x.0.cmp(&y.0)));

    let ranked = corpus_term_scores(&docs, &vocab, TfidfVariant::Plain, ScoreAggregate::Sum);
    let got: Vec<(String, f64)> = ranked.into_iter().map(|t| (t.term, t.score)).collect();
    assert_eq!(got, oracle);
    // all three terms tie at ln 4
    assert_eq!(got.iter().map(|t| t.0.as_str()).collect::<Vec<_>>(), ["a", "b", "c"]);
    assert!((got[2].1 - 4f64.ln()).abs() < 1e-15);
}

proptest! {
    #[test]
    fn sparse_equals_dense(seed in 0u64..10_000, n_docs in 1usize..50, alphabet in 1usize..30) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let docs = random_corpus(&mut rng, n_docs, alphabet);
        let vocab = build_vocabulary(&docs, 1).unwrap();
        let counts = vectorize_counts(&docs, &vocab);
        let weighted = tfidf(&counts, &vocab, TfidfVariant::Plain).unwrap();
        let dense_counts = counts.to_dense();
        let dense_tfidf = weighted.to_dense();

        let n = docs.len() as f64;
        for (d, document) in docs.iter().enumerate() {
            for (c, term) in vocab.terms().iter().enumerate() {
                let tf = document.tokens.iter().filter(|t| *t == term).count() as f64;
                let df = docs.iter().filter(|x| x.tokens.contains(term)).count() as f64;
                prop_assert_eq!(dense_counts[d][c], tf);
                let w = tf * (n / df).ln();
                prop_assert_eq!(dense_tfidf[d][c], w);
                prop_assert!(w >= 0.0);
                prop_assert_eq!(w == 0.0, tf == 0.0 || df == n);
            }
        }
        for row in &weighted.rows {
            prop_assert!(row.windows(2).all(|p| p[0].0 < p[1].0));
            prop_assert!(row.iter().all(|&(c, _)| c < vocab.len()));
        }
    }
}
