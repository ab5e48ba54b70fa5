use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SplitSpec {
    /// Data combination 1 to 5: train+val takes 65% to 85% in steps of 5%.
    pub comb: u8,
    /// Share of the train+val pool held out for validation.
    pub val_fraction_within: f64,
    pub seed: u64,
    pub stratified: bool,
}

impl Default for SplitSpec {
    fn default() -> Self {
        Self { comb: 2, val_fraction_within: 0.15, seed: 0, stratified: true }
    }
}

impl SplitSpec {
    pub fn train_val_fraction(&self) -> Result<f64> {
        match self.comb {
            1..=5 => Ok(0.60 + 0.05 * self.comb as f64),
            c => Err(Error::Split(format!("comb must be 1 to 5, got {c}"))),
        }
    }
}

/// Row indices of the three subsets, each sorted ascending.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Split {
    pub train: Vec<usize>,
    pub val: Vec<usize>,
    pub test: Vec<usize>,
}

/// Random train/validation/test partition of `labels.len()` rows.
///
/// Stratified splits give every class its proportional share of each subset,
/// rounding by largest remainder so the subset totals match the unstratified
/// sizes.
pub fn split(labels: &[u8], spec: &SplitSpec) -> Result<Split> {
    let m = labels.len();
    let train_val = spec.train_val_fraction()?;
    if !(0.0..1.0).contains(&spec.val_fraction_within) {
        return Err(Error::Split(format!("val_fraction_within {} outside [0, 1)", spec.val_fraction_within)));
    }
    if m < 10 {
        return Err(Error::Split(format!("need at least 10 rows, got {m}")));
    }
    let groups = if spec.stratified {
        let groups = class_groups(labels);
        if let Some((c, g)) = groups.iter().find(|(_, g)| g.len() < 3) {
            return Err(Error::Split(format!("class {c} has {} rows, stratification needs 3", g.len())));
        }
        groups.into_iter().map(|(_, g)| g).collect()
    } else {
        vec![(0..m).collect::<Vec<_>>()]
    };
    let sizes: Vec<usize> = groups.iter().map(Vec::len).collect();
    let n_test = (m as f64 * (1.0 - train_val)).round() as usize;
    let test_per = largest_remainder(&sizes, n_test);
    let pool: Vec<usize> = sizes.iter().zip(&test_per).map(|(s, t)| s - t).collect();
    let n_val = (pool.iter().sum::<usize>() as f64 * spec.val_fraction_within).round() as usize;
    let val_per = largest_remainder(&pool, n_val);

    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let mut out = Split { train: Vec::new(), val: Vec::new(), test: Vec::new() };
    for (k, mut g) in groups.into_iter().enumerate() {
        g.shuffle(&mut rng);
        let (test, rest) = g.split_at(test_per[k]);
        let (val, train) = rest.split_at(val_per[k]);
        out.test.extend_from_slice(test);
        out.val.extend_from_slice(val);
        out.train.extend_from_slice(train);
    }
    out.train.sort_unstable();
    out.val.sort_unstable();
    out.test.sort_unstable();
    Ok(out)
}

/// Assigns rows to `folds` folds, dealing each shuffled class round-robin so
/// class shares stay balanced. Every row lands in exactly one fold.
pub fn stratified_folds(labels: &[u8], folds: usize, seed: u64) -> Result<Vec<Vec<usize>>> {
    if folds < 2 || folds > labels.len() {
        return Err(Error::Split(format!("cannot make {folds} folds from {} rows", labels.len())));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut out = vec![Vec::new(); folds];
    let mut next = 0;
    for (_, mut g) in class_groups(labels) {
        g.shuffle(&mut rng);
        for i in g {
            out[next].push(i);
            next = (next + 1) % folds;
        }
    }
    for f in &mut out {
        f.sort_unstable();
    }
    Ok(out)
}

fn class_groups(labels: &[u8]) -> Vec<(u8, Vec<usize>)> {
    let mut classes: Vec<u8> = labels.to_vec();
    classes.sort_unstable();
    classes.dedup();
    classes
        .into_iter()
        .map(|c| (c, (0..labels.len()).filter(|&i| labels[i] == c).collect()))
        .collect()
}

/// Splits `total` over groups in proportion to `sizes` (Hamilton method).
fn largest_remainder(sizes: &[usize], total: usize) -> Vec<usize> {
    let m: usize = sizes.iter().sum();
    if m == 0 {
        return vec![0; sizes.len()];
    }
    let quota: Vec<f64> = sizes.iter().map(|&s| s as f64 * total as f64 / m as f64).collect();
    let mut out: Vec<usize> = quota.iter().map(|q| q.floor() as usize).collect();
    let mut order: Vec<usize> = (0..sizes.len()).collect();
    order.sort_by(|&a, &b| (quota[b] - quota[b].floor()).total_cmp(&(quota[a] - quota[a].floor())).then(a.cmp(&b)));
    let mut left = total - out.iter().sum::<usize>();
    for &k in order.iter().cycle() {
        if left == 0 {
            break;
        }
        if out[k] < sizes[k] {
            out[k] += 1;
            left -= 1;
        }
    }
    out
}
