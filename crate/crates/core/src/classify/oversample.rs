use std::collections::BTreeMap;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::{ClassifyError, TrainingSet};
use crate::corpus::ZeusCode;
use crate::features::SparseRow;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Oversampler {
    None,
    /// Random oversampling: duplicate minority rows with replacement.
    Ro,
    Smote,
}

impl std::str::FromStr for Oversampler {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "none" => Ok(Oversampler::None),
            "ro" | "random" => Ok(Oversampler::Ro),
            "smote" => Ok(Oversampler::Smote),
            other => Err(format!("unknown oversampler `{other}` (expected none, ro or smote)")),
        }
    }
}

/// Where a training row came from. Indices refer to rows of the input set.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum RowOrigin {
    Original(usize),
    Duplicate(usize),
    Synthetic { base: usize, neighbor: usize, u: f64 },
}

/// `base + u * (neighbor - base)` on sparse rows.
pub fn interpolate(base: &SparseRow, neighbor: &SparseRow, u: f64) -> SparseRow {
    let mut out = Vec::with_capacity(base.len().max(neighbor.len()));
    let (mut i, mut j) = (0, 0);
    loop {
        let (col, a, b) = match (base.get(i), neighbor.get(j)) {
            (Some(&(ca, va)), Some(&(cb, vb))) if ca == cb => {
                i += 1;
                j += 1;
                (ca, va, vb)
            }
            (Some(&(ca, va)), Some(&(cb, _))) if ca < cb => {
                i += 1;
                (ca, va, 0.0)
            }
            (Some(&(ca, va)), None) => {
                i += 1;
                (ca, va, 0.0)
            }
            (_, Some(&(cb, vb))) => {
                j += 1;
                (cb, 0.0, vb)
            }
            (None, None) => break,
        };
        let v = a + u * (b - a);
        if v != 0.0 {
            out.push((col, v));
        }
    }
    out
}

fn squared_distance(a: &SparseRow, b: &SparseRow) -> f64 {
    let (mut i, mut j, mut acc) = (0, 0, 0.0);
    while i < a.len() || j < b.len() {
        let d = match (a.get(i), b.get(j)) {
            (Some(&(ca, va)), Some(&(cb, vb))) if ca == cb => {
                i += 1;
                j += 1;
                va - vb
            }
            (Some(&(ca, va)), Some(&(cb, _))) if ca < cb => {
                i += 1;
                va
            }
            (Some(&(_, va)), None) => {
                i += 1;
                va
            }
            (_, Some(&(_, vb))) => {
                j += 1;
                vb
            }
            (None, None) => unreachable!(),
        };
        acc += d * d;
    }
    acc
}

fn rows_by_class(set: &TrainingSet) -> BTreeMap<ZeusCode, Vec<usize>> {
    let mut by_class: BTreeMap<ZeusCode, Vec<usize>> = BTreeMap::new();
    for (i, &label) in set.labels.iter().enumerate() {
        by_class.entry(label).or_default().push(i);
    }
    by_class
}

fn push_row(set: &mut TrainingSet, row: SparseRow, label: ZeusCode, origin: RowOrigin) {
    set.rows.push(row);
    set.labels.push(label);
    set.origin.push(origin);
}

fn fresh_copy(train: &TrainingSet) -> TrainingSet {
    let mut out = train.clone();
    out.origin = (0..out.len()).map(RowOrigin::Original).collect();
    out
}

/// Duplicates minority rows at random until every class matches the majority count.
pub fn oversample_random(train: &TrainingSet, seed: u64) -> TrainingSet {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let by_class = rows_by_class(train);
    let target = by_class.values().map(Vec::len).max().unwrap_or(0);
    let mut out = fresh_copy(train);
    for (class, members) in &by_class {
        for _ in members.len()..target {
            let src = members[rng.gen_range(0..members.len())];
            push_row(&mut out, train.rows[src].clone(), *class, RowOrigin::Duplicate(src));
        }
    }
    out
}

/// SMOTE: synthetic rows interpolated between a minority row and one of its
/// `k` nearest same-class neighbours (Euclidean), until classes are balanced.
///
/// Classes with a single row cannot be interpolated and fall back to
/// duplication; a warning is returned for each of them.
pub fn oversample_smote(
    train: &TrainingSet,
    k_neighbors: usize,
    seed: u64,
) -> Result<(TrainingSet, Vec<String>), ClassifyError> {
    if k_neighbors < 1 {
        return Err(ClassifyError::InvalidNeighbors);
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let by_class = rows_by_class(train);
    let target = by_class.values().map(Vec::len).max().unwrap_or(0);
    let mut out = fresh_copy(train);
    let mut warnings = Vec::new();
    for (class, members) in &by_class {
        let missing = target - members.len();
        if missing == 0 {
            continue;
        }
        if members.len() < 2 {
            warnings.push(format!(
                "class {class} has a single training row; SMOTE falls back to duplication"
            ));
            for _ in 0..missing {
                push_row(&mut out, train.rows[members[0]].clone(), *class, RowOrigin::Duplicate(members[0]));
            }
            continue;
        }
        let k = k_neighbors.min(members.len() - 1);
        let neighbors: Vec<Vec<usize>> = members
            .iter()
            .map(|&i| {
                let mut others: Vec<(f64, usize)> = members
                    .iter()
                    .filter(|&&j| j != i)
                    .map(|&j| (squared_distance(&train.rows[i], &train.rows[j]), j))
                    .collect();
                others.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
                others.into_iter().take(k).map(|(_, j)| j).collect()
            })
            .collect();
        for _ in 0..missing {
            let pick = rng.gen_range(0..members.len());
            let base = members[pick];
            let neighbor = neighbors[pick][rng.gen_range(0..k)];
            let u: f64 = rng.gen();
            let row = interpolate(&train.rows[base], &train.rows[neighbor], u);
            push_row(&mut out, row, *class, RowOrigin::Synthetic { base, neighbor, u });
        }
    }
    Ok((out, warnings))
}

/// Applies the chosen oversampler. Returns the augmented set and any warnings.
pub fn oversample(
    train: &TrainingSet,
    method: Oversampler,
    k_neighbors: usize,
    seed: u64,
) -> Result<(TrainingSet, Vec<String>), ClassifyError> {
    match method {
        Oversampler::None => Ok((fresh_copy(train), Vec::new())),
        Oversampler::Ro => Ok((oversample_random(train, seed), Vec::new())),
        Oversampler::Smote => oversample_smote(train, k_neighbors, seed),
    }
}
