use ndarray::{Array2, ArrayView1};
use serde::{Deserialize, Serialize};

use super::{split::stratified_folds, Dataset};
use crate::{Error, Result};

/// Added to every feature before cosine distances inside k-NN, so rows of a
/// completely failed specimen (all g = 0) still have a direction.
pub const COSINE_OFFSET: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Metric {
    #[default]
    Cosine,
    Euclidean,
}

/// `1 − x·y / (‖x‖ ‖y‖)`, evaluated as `½ ‖x/‖x‖ − y/‖y‖‖²` so nearly
/// parallel vectors keep their small distances instead of rounding to zero.
pub fn cosine_distance(x: ArrayView1<f64>, y: ArrayView1<f64>) -> Result<f64> {
    if x.len() != y.len() {
        return Err(Error::Distance(format!("lengths {} and {}", x.len(), y.len())));
    }
    let (nx, ny) = (x.dot(&x).sqrt(), y.dot(&y).sqrt());
    if nx == 0.0 || ny == 0.0 {
        return Err(Error::Distance("cosine distance of a zero vector".into()));
    }
    let sq: f64 = x.iter().zip(y).map(|(a, b)| (a / nx - b / ny).powi(2)).sum();
    Ok((0.5 * sq).min(2.0))
}

pub fn euclidean_distance(x: ArrayView1<f64>, y: ArrayView1<f64>) -> Result<f64> {
    if x.len() != y.len() {
        return Err(Error::Distance(format!("lengths {} and {}", x.len(), y.len())));
    }
    Ok(x.iter().zip(y).map(|(a, b)| (a - b) * (a - b)).sum::<f64>().sqrt())
}

/// Exact k-nearest-neighbour classifier.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct KnnModel {
    pub k: usize,
    pub metric: Metric,
    pub data: Array2<f64>,
    pub labels: Vec<u8>,
}

impl KnnModel {
    pub fn fit(train: &Dataset, k: usize, metric: Metric) -> Result<Self> {
        if k == 0 || k > train.len() {
            return Err(Error::Parameter(format!("k = {k} with {} training patterns", train.len())));
        }
        let data = match metric {
            Metric::Cosine => train.x.mapv(|v| v + COSINE_OFFSET),
            Metric::Euclidean => train.x.clone(),
        };
        Ok(Self { k, metric, data, labels: train.y.clone() })
    }

    fn distance(&self, query: ArrayView1<f64>, i: usize) -> Result<f64> {
        match self.metric {
            Metric::Cosine => cosine_distance(query, self.data.row(i)),
            Metric::Euclidean => euclidean_distance(query, self.data.row(i)),
        }
    }

    /// Training rows sorted by distance to `query`, nearest first; equal
    /// distances keep row order.
    fn ranked(&self, query: ArrayView1<f64>) -> Result<Vec<(f64, usize)>> {
        let q = match self.metric {
            Metric::Cosine => query.mapv(|v| v + COSINE_OFFSET),
            Metric::Euclidean => query.to_owned(),
        };
        let mut d = (0..self.labels.len())
            .map(|i| Ok((self.distance(q.view(), i)?, i)))
            .collect::<Result<Vec<_>>>()?;
        d.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
        Ok(d)
    }

    pub fn predict(&self, query: ArrayView1<f64>) -> Result<u8> {
        let ranked = self.ranked(query)?;
        Ok(vote(&ranked, &self.labels, self.k))
    }

    pub fn predict_all(&self, x: &Array2<f64>) -> Result<Vec<u8>> {
        x.rows().into_iter().map(|r| self.predict(r)).collect()
    }
}

/// Majority class of the `k` nearest; a tie goes to the tied class met first
/// in distance order.
fn vote(ranked: &[(f64, usize)], labels: &[u8], k: usize) -> u8 {
    let mut counts = [0usize; 256];
    for &(_, i) in &ranked[..k] {
        counts[labels[i] as usize] += 1;
    }
    let best = counts.iter().max().copied().unwrap_or(0);
    ranked[..k].iter().map(|&(_, i)| labels[i]).find(|&c| counts[c as usize] == best).unwrap()
}

/// Mean validation accuracy over stratified folds for each candidate `k`.
pub fn knn_cross_validate(
    data: &Dataset,
    k_candidates: &[usize],
    folds: usize,
    metric: Metric,
    seed: u64,
) -> Result<Vec<(usize, f64)>> {
    let parts = stratified_folds(&data.y, folds, seed)?;
    let k_max = k_candidates.iter().copied().max().unwrap_or(0);
    let mut sums = vec![0.0; k_candidates.len()];
    for (f, val) in parts.iter().enumerate() {
        let train: Vec<usize> = parts.iter().enumerate().filter(|&(g, _)| g != f).flat_map(|(_, p)| p.iter().copied()).collect();
        if val.is_empty() || k_max > train.len() {
            return Err(Error::Split(format!("fold {f} leaves {} training rows for k = {k_max}", train.len())));
        }
        let model = KnnModel::fit(&data.subset(&train), k_max, metric)?;
        let mut correct = vec![0usize; k_candidates.len()];
        for &i in val {
            let ranked = model.ranked(data.row(i))?;
            for (slot, &k) in k_candidates.iter().enumerate() {
                if vote(&ranked, &model.labels, k) == data.y[i] {
                    correct[slot] += 1;
                }
            }
        }
        for (s, c) in sums.iter_mut().zip(&correct) {
            *s += *c as f64 / val.len() as f64;
        }
    }
    Ok(k_candidates.iter().zip(sums).map(|(&k, s)| (k, s / folds as f64)).collect())
}
