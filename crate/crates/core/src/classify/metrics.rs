use serde::{Deserialize, Serialize};

use crate::{Error, Result};

/// Fraction of correctly classified patterns.
pub fn accuracy(preds: &[u8], labels: &[u8]) -> Result<f64> {
    if preds.len() != labels.len() {
        return Err(Error::Data(format!("{} predictions for {} labels", preds.len(), labels.len())));
    }
    if preds.is_empty() {
        return Err(Error::Data("accuracy of an empty set".into()));
    }
    let hits = preds.iter().zip(labels).filter(|(p, l)| p == l).count();
    Ok(hits as f64 / preds.len() as f64)
}

/// Counts with rows for the actual class and columns for the predicted one,
/// both in `class_domain` order.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ConfusionMatrix {
    pub class_domain: Vec<u8>,
    pub counts: Vec<Vec<u64>>,
}

impl ConfusionMatrix {
    pub fn new(preds: &[u8], labels: &[u8], class_domain: &[u8]) -> Result<Self> {
        if preds.len() != labels.len() {
            return Err(Error::Data(format!("{} predictions for {} labels", preds.len(), labels.len())));
        }
        let c = class_domain.len();
        let slot = |v: u8| {
            class_domain.iter().position(|&d| d == v).ok_or_else(|| Error::Data(format!("class {v} outside domain {class_domain:?}")))
        };
        let mut counts = vec![vec![0u64; c]; c];
        for (&p, &l) in preds.iter().zip(labels) {
            counts[slot(l)?][slot(p)?] += 1;
        }
        Ok(Self { class_domain: class_domain.to_vec(), counts })
    }

    pub fn total(&self) -> u64 {
        self.counts.iter().flatten().sum()
    }

    pub fn total_accuracy(&self) -> f64 {
        let hits: u64 = (0..self.counts.len()).map(|i| self.counts[i][i]).sum();
        hits as f64 / self.total() as f64
    }

    /// Per-class recall; `None` for classes with no actual members.
    pub fn recall(&self) -> Vec<Option<f64>> {
        self.counts
            .iter()
            .enumerate()
            .map(|(i, row)| {
                let n: u64 = row.iter().sum();
                (n > 0).then(|| row[i] as f64 / n as f64)
            })
            .collect()
    }

    pub fn to_json(&self) -> serde_json::Value {
        serde_json::json!({
            "class_domain": self.class_domain,
            "counts": self.counts,
            "recall": self.recall(),
            "total_accuracy": self.total_accuracy(),
            "total": self.total(),
        })
    }
}
