use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::{distinct, ClassifyError};
use crate::corpus::ZeusCode;

/// Train/test partition of row indices.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Split {
    pub train: Vec<usize>,
    pub test: Vec<usize>,
    pub test_fraction: f64,
    pub seed: u64,
    pub warnings: Vec<String>,
}

/// Per-class shuffled split keeping class proportions.
///
/// Each class contributes `round(n_c * test_fraction)` rows to the test set,
/// capped so at least one row stays in training. Classes with a single row go
/// to training entirely.
pub fn stratified_split(labels: &[ZeusCode], test_fraction: f64, seed: u64) -> Result<Split, ClassifyError> {
    if !(test_fraction > 0.0 && test_fraction < 1.0) {
        return Err(ClassifyError::InvalidTestFraction(test_fraction));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut train = Vec::new();
    let mut test = Vec::new();
    let mut warnings = Vec::new();
    for class in distinct(labels) {
        let mut rows: Vec<usize> = (0..labels.len()).filter(|&i| labels[i] == class).collect();
        if rows.len() < 2 {
            warnings.push(format!(
                "class {class} has {} sample(s) and cannot be stratified; kept in training",
                rows.len()
            ));
            train.extend(rows);
            continue;
        }
        rows.shuffle(&mut rng);
        let n_test = ((rows.len() as f64 * test_fraction).round() as usize).min(rows.len() - 1);
        test.extend_from_slice(&rows[..n_test]);
        train.extend_from_slice(&rows[n_test..]);
    }
    train.sort_unstable();
    test.sort_unstable();
    Ok(Split {
        train,
        test,
        test_fraction,
        seed,
        warnings,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn labels(counts: &[(ZeusCode, usize)]) -> Vec<ZeusCode> {
        counts.iter().flat_map(|&(c, n)| std::iter::repeat_n(c, n)).collect()
    }

    #[test]
    fn proportional_counts() {
        let l = labels(&[(ZeusCode::Corrective, 60), (ZeusCode::Preventive, 40)]);
        let s = stratified_split(&l, 0.3, 1).unwrap();
        let in_test = |c| s.test.iter().filter(|&&i| l[i] == c).count();
        assert_eq!(in_test(ZeusCode::Corrective), 18);
        assert_eq!(in_test(ZeusCode::Preventive), 12);
        assert_eq!(s.train.len() + s.test.len(), 100);
        assert!(s.train.iter().all(|i| !s.test.contains(i)));
    }

    #[test]
    fn singleton_class_goes_to_train() {
        let l = labels(&[(ZeusCode::Corrective, 10), (ZeusCode::Unresolved, 1)]);
        let s = stratified_split(&l, 0.3, 5).unwrap();
        assert!(s.train.contains(&10));
        assert_eq!(s.warnings.len(), 1);
        assert!(s.warnings[0].contains("02-08-96"));
    }

    #[test]
    fn deterministic_per_seed() {
        let l = labels(&[(ZeusCode::Corrective, 33), (ZeusCode::Preventive, 17), (ZeusCode::Insignificant, 5)]);
        assert_eq!(stratified_split(&l, 0.3, 9).unwrap(), stratified_split(&l, 0.3, 9).unwrap());
        assert_ne!(stratified_split(&l, 0.3, 9).unwrap().test, stratified_split(&l, 0.3, 10).unwrap().test);
    }

    #[test]
    fn rejects_bad_fraction() {
        for f in [0.0, 1.0, -0.1, f64::NAN] {
            assert!(stratified_split(&[ZeusCode::Corrective], f, 0).is_err());
        }
    }

    #[test]
    fn two_sample_class_keeps_one_in_train() {
        let l = labels(&[(ZeusCode::Undefined, 2)]);
        let s = stratified_split(&l, 0.9, 0).unwrap();
        assert_eq!(s.train.len(), 1);
        assert_eq!(s.test.len(), 1);
    }
}
