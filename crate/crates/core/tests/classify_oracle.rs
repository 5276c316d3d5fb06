use mwo_core::classify::{
    evaluate, loss_and_gradient, oversample_random, oversample_smote, train_lr, train_nb, Classifier, LrConfig,
    LrParams, TrainingSet,
};
use mwo_core::features::{FeatureMatrix, SparseRow, Weighting};
use mwo_core::ZeusCode;
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

const FOUR: [ZeusCode; 4] = [
    ZeusCode::Corrective,
    ZeusCode::Preventive,
    ZeusCode::Unresolved,
    ZeusCode::Insignificant,
];

fn matrix(rows: Vec<SparseRow>, n_cols: usize, weighting: Weighting) -> FeatureMatrix {
    FeatureMatrix {
        empty_rows: rows.iter().enumerate().filter(|(_, r)| r.is_empty()).map(|(i, _)| i).collect(),
        rows,
        n_cols,
        weighting,
        vocabulary_id: "fixture".into(),
    }
}

fn sparse(dense: &[f64]) -> SparseRow {
    dense.iter().enumerate().filter(|(_, v)| **v != 0.0).map(|(i, v)| (i, *v)).collect()
}

fn densify(row: &SparseRow, n: usize) -> Vec<f64> {
    let mut d = vec![0.0; n];
    for &(c, v) in row {
        d[c] = v;
    }
    d
}

fn random_rows(rng: &mut ChaCha8Rng, n_docs: usize, n_terms: usize) -> Vec<SparseRow> {
    (0..n_docs)
        .map(|_| {
            let dense: Vec<f64> = (0..n_terms)
                .map(|_| if rng.gen_bool(0.4) { rng.gen_range(1..4) as f64 } else { 0.0 })
                .collect();
            sparse(&dense)
        })
        .collect()
}

// Dense re-implementation of the regularized cross-entropy, used for finite differences.
fn dense_loss(w: &[Vec<f64>], b: &[f64], x: &[Vec<f64>], y: &[usize], lambda: f64) -> f64 {
    let mut total = 0.0;
    for (xi, &yi) in x.iter().zip(y) {
        let z: Vec<f64> = w.iter().zip(b).map(|(wk, bk)| bk + wk.iter().zip(xi).map(|(a, c)| a * c).sum::<f64>()).collect();
        let m = z.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        let lse = m + z.iter().map(|v| (v - m).exp()).sum::<f64>().ln();
        total += lse - z[yi];
    }
    let reg: f64 = w.iter().flatten().map(|v| v * v).sum();
    total / x.len() as f64 + 0.5 * lambda * reg
}

#[test]
fn lr_gradient_matches_central_differences() {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let mut worst: f64 = 0.0;
    for _ in 0..25 {
        let n_docs = rng.gen_range(2..=10);
        let n_terms = rng.gen_range(1..=20);
        let rows = random_rows(&mut rng, n_docs, n_terms);
        let targets: Vec<usize> = (0..n_docs).map(|_| rng.gen_range(0..4)).collect();
        let lambda = rng.gen_range(0.0..0.5);
        let params = LrParams {
            weights: (0..4).map(|_| (0..n_terms).map(|_| rng.gen_range(-1.0..1.0)).collect()).collect(),
            bias: (0..4).map(|_| rng.gen_range(-1.0..1.0)).collect(),
        };
        let (loss, grad) = loss_and_gradient(&params, &rows, &targets, lambda);
        let x: Vec<Vec<f64>> = rows.iter().map(|r| densify(r, n_terms)).collect();
        assert!((loss - dense_loss(&params.weights, &params.bias, &x, &targets, lambda)).abs() < 1e-12);

        let h = 1e-5;
        let rel = |a: f64, n: f64| (a - n).abs() / a.abs().max(n.abs()).max(1e-6);
        for k in 0..4 {
            for t in 0..n_terms {
                let mut plus = params.weights.clone();
                let mut minus = params.weights.clone();
                plus[k][t] += h;
                minus[k][t] -= h;
                let numeric = (dense_loss(&plus, &params.bias, &x, &targets, lambda)
                    - dense_loss(&minus, &params.bias, &x, &targets, lambda))
                    / (2.0 * h);
                worst = worst.max(rel(grad.weights[k][t], numeric));
            }
            let mut plus = params.bias.clone();
            let mut minus = params.bias.clone();
            plus[k] += h;
            minus[k] -= h;
            let numeric = (dense_loss(&params.weights, &plus, &x, &targets, lambda)
                - dense_loss(&params.weights, &minus, &x, &targets, lambda))
                / (2.0 * h);
            worst = worst.max(rel(grad.bias[k], numeric));
        }
    }
    assert!(worst < 1e-4, "max relative gradient error {worst}");
}

struct Oracle {
    retained: Vec<(ZeusCode, f64, f64, f64, f64)>,
    macro_avg: [f64; 3],
    weighted: [f64; 3],
    accuracy: f64,
}

// Straightforward counting implementation, independent of the library code.
fn brute_force_metrics(pred: &[ZeusCode], truth: &[ZeusCode], min_support: usize) -> Oracle {
    let mut classes: Vec<ZeusCode> = Vec::new();
    for c in truth.iter().chain(pred) {
        if !classes.contains(c) {
            classes.push(*c);
        }
    }
    classes.sort();
    let mut retained = Vec::new();
    for &c in &classes {
        let mut tp = 0.0;
        let mut fp = 0.0;
        let mut fn_ = 0.0;
        for (p, t) in pred.iter().zip(truth) {
            match (*p == c, *t == c) {
                (true, true) => tp += 1.0,
                (true, false) => fp += 1.0,
                (false, true) => fn_ += 1.0,
                _ => {}
            }
        }
        let support = tp + fn_;
        if support < min_support.max(1) as f64 || tp + fp == 0.0 {
            continue;
        }
        let p = tp / (tp + fp);
        let r = tp / support;
        let f = if p + r == 0.0 { 0.0 } else { 2.0 * p * r / (p + r) };
        retained.push((c, p, r, f, support));
    }
    let total: f64 = retained.iter().map(|x| x.4).sum();
    let n = retained.len() as f64;
    let mut macro_avg = [0.0; 3];
    let mut weighted = [0.0; 3];
    for &(_, p, r, f, s) in &retained {
        for (i, v) in [p, r, f].into_iter().enumerate() {
            macro_avg[i] += v / n;
            weighted[i] += v * s / total;
        }
    }
    let correct = pred.iter().zip(truth).filter(|(p, t)| p == t).count();
    Oracle {
        retained,
        macro_avg,
        weighted,
        accuracy: correct as f64 / truth.len() as f64,
    }
}

#[test]
fn metrics_match_brute_force_on_random_labelings() {
    let mut rng = ChaCha8Rng::seed_from_u64(2024);
    for trial in 0..50 {
        let truth: Vec<ZeusCode> = (0..50).map(|_| FOUR[rng.gen_range(0..4)]).collect();
        let pred: Vec<ZeusCode> = truth
            .iter()
            .map(|t| if rng.gen_bool(0.6) { *t } else { FOUR[rng.gen_range(0..4)] })
            .collect();
        let min_support = if trial % 5 == 0 { 12 } else { 1 };
        let report = evaluate(&pred, &truth, min_support).unwrap();
        let oracle = brute_force_metrics(&pred, &truth, min_support);
        assert_eq!(report.per_class.len(), oracle.retained.len());
        for (m, o) in report.per_class.iter().zip(&oracle.retained) {
            assert_eq!(m.code, o.0);
            assert!((m.precision - o.1).abs() < 1e-9);
            assert!((m.recall - o.2).abs() < 1e-9);
            assert!((m.f1 - o.3).abs() < 1e-9);
            assert_eq!(m.support as f64, o.4);
        }
        let got = [report.macro_avg, report.weighted_avg];
        for (a, o) in got.iter().zip([oracle.macro_avg, oracle.weighted]) {
            assert!((a.precision - o[0]).abs() < 1e-9);
            assert!((a.recall - o[1]).abs() < 1e-9);
            assert!((a.f1 - o[2]).abs() < 1e-9);
        }
        assert!((report.accuracy - oracle.accuracy).abs() < 1e-9);
        if report.dropped_classes.is_empty() {
            assert!((report.weighted_avg.recall - report.accuracy).abs() < 1e-12);
        }
    }
}

#[test]
fn evaluate_is_permutation_invariant() {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let truth: Vec<ZeusCode> = (0..40).map(|_| FOUR[rng.gen_range(0..4)]).collect();
    let pred: Vec<ZeusCode> = (0..40).map(|_| FOUR[rng.gen_range(0..4)]).collect();
    let base = evaluate(&pred, &truth, 1).unwrap();
    let mut order: Vec<usize> = (0..40).collect();
    order.reverse();
    order.rotate_left(7);
    let p2: Vec<_> = order.iter().map(|&i| pred[i]).collect();
    let t2: Vec<_> = order.iter().map(|&i| truth[i]).collect();
    assert_eq!(evaluate(&p2, &t2, 1).unwrap(), base);
}

fn fixture_sets() -> Vec<(TrainingSet, TrainingSet)> {
    let mut out = Vec::new();
    for seed in 0..6 {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let n_terms = 12;
        let mut rows = Vec::new();
        let mut labels = Vec::new();
        for (k, class) in FOUR.iter().enumerate() {
            for _ in 0..(3 + 2 * k) {
                let mut dense: Vec<f64> = (0..n_terms).map(|_| if rng.gen_bool(0.2) { 1.0 } else { 0.0 }).collect();
                dense[k * 3] += rng.gen_range(1..4) as f64;
                rows.push(sparse(&dense));
                labels.push(*class);
            }
        }
        let counts = TrainingSet::new(matrix(rows.clone(), n_terms, Weighting::Count), labels.clone());
        let scaled: Vec<SparseRow> = rows
            .iter()
            .map(|r| r.iter().map(|&(c, v)| (c, v * 0.7)).collect())
            .collect();
        let tfidf_like = TrainingSet::new(matrix(scaled, n_terms, Weighting::Tfidf(Default::default())), labels);
        out.push((counts, tfidf_like));
    }
    out
}

#[test]
fn predicted_distributions_are_proper() {
    for (counts, weighted) in fixture_sets() {
        let nb = Classifier::NaiveBayes(train_nb(&counts, &FOUR, 1.0).unwrap());
        let lr = Classifier::LogisticRegression(train_lr(&weighted, &FOUR, &LrConfig::default()).unwrap());
        for (model, set) in [(nb, &counts), (lr, &weighted)] {
            for p in model.predict_proba(&set.features()).unwrap() {
                assert!(p.iter().all(|x| *x >= 0.0));
                assert!((p.iter().sum::<f64>() - 1.0).abs() < 1e-9);
            }
        }
    }
}

#[test]
fn nb_probabilities_match_dense_bayes_rule() {
    let (counts, _) = fixture_sets().remove(0);
    let nb = train_nb(&counts, &FOUR, 0.5).unwrap();
    let n_terms = counts.n_cols;
    let dense: Vec<Vec<f64>> = counts.rows.iter().map(|r| densify(r, n_terms)).collect();
    for (i, x) in dense.iter().take(5).enumerate() {
        let mut joint = Vec::new();
        for (k, class) in FOUR.iter().enumerate() {
            let members: Vec<usize> = (0..dense.len()).filter(|&j| counts.labels[j] == *class).collect();
            let prior = members.len() as f64 / dense.len() as f64;
            let mass: Vec<f64> = (0..n_terms).map(|t| members.iter().map(|&j| dense[j][t]).sum()).collect();
            let total: f64 = mass.iter().sum::<f64>() + 0.5 * n_terms as f64;
            let mut ll = prior.ln();
            for t in 0..n_terms {
                ll += x[t] * ((mass[t] + 0.5) / total).ln();
            }
            joint.push(ll);
            assert!((nb.class_log_prior[k] - prior.ln()).abs() < 1e-12);
        }
        let m = joint.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        let z: f64 = joint.iter().map(|j| (j - m).exp()).sum();
        let got = nb.predict_proba_row(&counts.rows[i]);
        for (g, j) in got.iter().zip(&joint) {
            assert!((g - (j - m).exp() / z).abs() < 1e-12);
        }
    }
}

#[test]
fn lr_trace_is_non_increasing_for_small_steps() {
    for (_, weighted) in fixture_sets() {
        let cfg = LrConfig {
            learning_rate: 0.1,
            max_epochs: 200,
            ..LrConfig::default()
        };
        let m = train_lr(&weighted, &FOUR, &cfg).unwrap();
        assert!(m.training_trace.windows(2).all(|w| w[1] <= w[0]));
        assert!((m.training_trace[0] - 4f64.ln()).abs() < 1e-12);
    }
}

// Finds originals a, b of `class` and u in [0, 1] with row = a + u (b - a), coordinate-wise.
fn is_convex_combination(row: &[f64], originals: &[Vec<f64>]) -> bool {
    for a in originals {
        for b in originals {
            let mut u: Option<f64> = None;
            let mut ok = true;
            for ((r, x), y) in row.iter().zip(a).zip(b) {
                let span = y - x;
                if span.abs() < 1e-12 {
                    ok &= (r - x).abs() < 1e-9;
                } else {
                    let ui = (r - x) / span;
                    match u {
                        None => u = Some(ui),
                        Some(u0) => ok &= (u0 - ui).abs() < 1e-9,
                    }
                }
                if !ok {
                    break;
                }
            }
            if ok && u.is_none_or(|u| (-1e-12..=1.0 + 1e-12).contains(&u)) {
                return true;
            }
        }
    }
    false
}

fn class_counts(set: &TrainingSet) -> Vec<usize> {
    set.class_counts().into_iter().map(|(_, n)| n).collect()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn oversamplers_balance_and_smote_interpolates(
        sizes in proptest::collection::vec(2usize..9, 2..5),
        n_terms in 1usize..5,
        k in 1usize..6,
        seed in any::<u64>(),
    ) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut dense_rows = Vec::new();
        let mut labels = Vec::new();
        for (i, &n) in sizes.iter().enumerate() {
            for _ in 0..n {
                dense_rows.push((0..n_terms).map(|_| rng.gen_range(0..4) as f64).collect::<Vec<f64>>());
                labels.push(FOUR[i]);
            }
        }
        let rows: Vec<SparseRow> = dense_rows.iter().map(|d| sparse(d)).collect();
        let set = TrainingSet::new(matrix(rows, n_terms, Weighting::Count), labels.clone());
        let majority = *sizes.iter().max().unwrap();

        let ro = oversample_random(&set, seed);
        prop_assert!(class_counts(&ro).iter().all(|&c| c == majority));
        prop_assert_eq!(&ro.rows[..set.len()], &set.rows[..]);

        let (smote, warnings) = oversample_smote(&set, k, seed).unwrap();
        prop_assert!(warnings.is_empty());
        prop_assert!(class_counts(&smote).iter().all(|&c| c == majority));
        prop_assert_eq!(&smote.rows[..set.len()], &set.rows[..]);
        for (row, label) in smote.rows[set.len()..].iter().zip(&smote.labels[set.len()..]) {
            let originals: Vec<Vec<f64>> = (0..set.len())
                .filter(|&i| labels[i] == *label)
                .map(|i| dense_rows[i].clone())
                .collect();
            prop_assert!(is_convex_combination(&densify(row, n_terms), &originals));
        }
    }
}
