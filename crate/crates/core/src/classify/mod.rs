//! Splitting, k-NN, the one-hidden-layer network and evaluation metrics.

mod ann;
mod knn;
mod metrics;
mod split;
mod task;

use ndarray::{Array2, ArrayView1, Axis};
use serde::{Deserialize, Serialize};

use crate::{Error, Result};

pub use ann::{AnnModel, AnnParams};
pub use knn::{cosine_distance, euclidean_distance, knn_cross_validate, KnnModel, Metric, COSINE_OFFSET};
pub use metrics::{accuracy, ConfusionMatrix};
pub use split::{split, stratified_folds, Split, SplitSpec};
pub use task::{patterns, CaseData, Task, TaskData};

/// Patterns (one per row) with their class labels.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Dataset {
    pub x: Array2<f64>,
    pub y: Vec<u8>,
    pub class_domain: Vec<u8>,
}

impl Dataset {
    pub fn new(x: Array2<f64>, y: Vec<u8>, class_domain: Vec<u8>) -> Result<Self> {
        if x.nrows() != y.len() {
            return Err(Error::Data(format!("{} patterns but {} labels", x.nrows(), y.len())));
        }
        if let Some(bad) = y.iter().find(|c| !class_domain.contains(c)) {
            return Err(Error::Data(format!("label {bad} outside class domain {class_domain:?}")));
        }
        if x.iter().any(|v| !v.is_finite()) {
            return Err(Error::Data("non-finite pattern entry".into()));
        }
        Ok(Self { x, y, class_domain })
    }

    pub fn len(&self) -> usize {
        self.y.len()
    }

    pub fn is_empty(&self) -> bool {
        self.y.is_empty()
    }

    pub fn n_features(&self) -> usize {
        self.x.ncols()
    }

    pub fn row(&self, i: usize) -> ArrayView1<'_, f64> {
        self.x.row(i)
    }

    /// The rows `idx`, in that order.
    pub fn subset(&self, idx: &[usize]) -> Dataset {
        Dataset {
            x: self.x.select(Axis(0), idx),
            y: idx.iter().map(|&i| self.y[i]).collect(),
            class_domain: self.class_domain.clone(),
        }
    }
}
