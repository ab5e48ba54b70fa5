use ndarray::{Array2, ArrayView1};
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::Dataset;
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AnnParams {
    pub hidden: usize,
    pub learning_rate: f64,
    pub batch_size: usize,
    pub max_epochs: usize,
    /// Epochs without a better validation accuracy before stopping.
    pub patience: usize,
    /// Min-max scale each input to `[0, 1]` over the training set.
    #[serde(default = "yes")]
    pub scale_inputs: bool,
}

fn yes() -> bool {
    true
}

impl Default for AnnParams {
    fn default() -> Self {
        Self { hidden: 5, learning_rate: 0.5, batch_size: 32, max_epochs: 2000, patience: 50, scale_inputs: true }
    }
}

/// Feed-forward network with one sigmoid hidden layer and sigmoid outputs,
/// one output unit per class. Weights are row-major, one row per unit.
/// Inputs enter as `(x − input_min) / input_range`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AnnModel {
    pub sizes: [usize; 3],
    pub input_min: Vec<f64>,
    pub input_range: Vec<f64>,
    pub w1: Vec<f64>,
    pub b1: Vec<f64>,
    pub w2: Vec<f64>,
    pub b2: Vec<f64>,
    pub class_domain: Vec<u8>,
    pub params: AnnParams,
    /// Epochs actually run and the one whose weights were kept.
    pub epochs_run: usize,
    pub best_epoch: usize,
}

fn sigmoid(z: f64) -> f64 {
    1.0 / (1.0 + (-z).exp())
}

impl AnnModel {
    /// All-zero network.
    pub fn zeros(n_in: usize, class_domain: Vec<u8>, params: AnnParams) -> Self {
        let (h, c) = (params.hidden, class_domain.len());
        Self {
            sizes: [n_in, h, c],
            input_min: vec![0.0; n_in],
            input_range: vec![1.0; n_in],
            w1: vec![0.0; h * n_in],
            b1: vec![0.0; h],
            w2: vec![0.0; c * h],
            b2: vec![0.0; c],
            class_domain,
            params,
            epochs_run: 0,
            best_epoch: 0,
        }
    }

    /// Uniform Glorot initialisation.
    pub fn random(n_in: usize, class_domain: Vec<u8>, params: AnnParams, rng: &mut impl Rng) -> Self {
        let mut m = Self::zeros(n_in, class_domain, params);
        let [n, h, c] = m.sizes;
        let r1 = (6.0 / (n + h) as f64).sqrt();
        let r2 = (6.0 / (h + c) as f64).sqrt();
        m.w1.iter_mut().for_each(|w| *w = rng.random_range(-r1..r1));
        m.w2.iter_mut().for_each(|w| *w = rng.random_range(-r2..r2));
        m
    }

    pub fn n_parameters(&self) -> usize {
        self.w1.len() + self.b1.len() + self.w2.len() + self.b2.len()
    }

    /// Parameters flattened as `w1, b1, w2, b2`.
    pub fn parameters(&self) -> Vec<f64> {
        [&self.w1[..], &self.b1, &self.w2, &self.b2].concat()
    }

    pub fn set_parameters(&mut self, p: &[f64]) -> Result<()> {
        if p.len() != self.n_parameters() {
            return Err(Error::Parameter(format!("{} parameters for a network with {}", p.len(), self.n_parameters())));
        }
        let (a, rest) = p.split_at(self.w1.len());
        let (b, rest) = rest.split_at(self.b1.len());
        let (c, d) = rest.split_at(self.w2.len());
        self.w1.copy_from_slice(a);
        self.b1.copy_from_slice(b);
        self.w2.copy_from_slice(c);
        self.b2.copy_from_slice(d);
        Ok(())
    }

    fn descend(&mut self, grad: &[f64], rate: f64) {
        let params = self.w1.iter_mut().chain(&mut self.b1).chain(&mut self.w2).chain(&mut self.b2);
        for (w, g) in params.zip(grad) {
            *w -= rate * g;
        }
    }

    fn scaled(&self, v: f64, i: usize) -> f64 {
        (v - self.input_min[i]) / self.input_range[i]
    }

    fn hidden(&self, x: ArrayView1<f64>) -> Vec<f64> {
        let [n, h, _] = self.sizes;
        (0..h)
            .map(|j| {
                let w = &self.w1[j * n..(j + 1) * n];
                let z: f64 = (0..n).map(|i| w[i] * self.scaled(x[i], i)).sum();
                sigmoid(self.b1[j] + z)
            })
            .collect()
    }

    fn output(&self, hid: &[f64]) -> Vec<f64> {
        let [_, h, c] = self.sizes;
        (0..c)
            .map(|k| {
                let w = &self.w2[k * h..(k + 1) * h];
                sigmoid(self.b2[k] + w.iter().zip(hid).map(|(a, b)| a * b).sum::<f64>())
            })
            .collect()
    }

    /// Output activations, each in (0, 1).
    pub fn forward(&self, x: ArrayView1<f64>) -> Vec<f64> {
        self.output(&self.hidden(x))
    }

    /// Class of the largest output; the first one on exact ties.
    pub fn predict(&self, x: ArrayView1<f64>) -> u8 {
        let y = self.forward(x);
        let mut best = 0;
        for k in 1..y.len() {
            if y[k] > y[best] {
                best = k;
            }
        }
        self.class_domain[best]
    }

    pub fn predict_all(&self, x: &Array2<f64>) -> Vec<u8> {
        x.rows().into_iter().map(|r| self.predict(r)).collect()
    }

    /// Mean binary cross-entropy against one-hot targets over `rows`, and
    /// its gradient in the layout of [`parameters`](Self::parameters).
    pub fn loss_and_gradient(&self, x: &Array2<f64>, target: &[usize], rows: &[usize]) -> (f64, Vec<f64>) {
        let [n, h, c] = self.sizes;
        let mut grad = vec![0.0; self.n_parameters()];
        let (g_w1, rest) = grad.split_at_mut(h * n);
        let (g_b1, rest) = rest.split_at_mut(h);
        let (g_w2, g_b2) = rest.split_at_mut(c * h);
        let scale = 1.0 / rows.len() as f64;
        let mut loss = 0.0;
        let mut delta_h = vec![0.0; h];
        for &r in rows {
            let xr = x.row(r);
            let hid = self.hidden(xr);
            let out = self.output(&hid);
            delta_h.iter_mut().for_each(|d| *d = 0.0);
            for k in 0..c {
                let t = if target[r] == k { 1.0 } else { 0.0 };
                let y = out[k];
                loss -= t * y.max(f64::MIN_POSITIVE).ln() + (1.0 - t) * (1.0 - y).max(f64::MIN_POSITIVE).ln();
                let d = (y - t) * scale;
                g_b2[k] += d;
                for j in 0..h {
                    g_w2[k * h + j] += d * hid[j];
                    delta_h[j] += d * self.w2[k * h + j];
                }
            }
            for j in 0..h {
                let d = delta_h[j] * hid[j] * (1.0 - hid[j]);
                g_b1[j] += d;
                for (i, &xi) in xr.iter().enumerate() {
                    g_w1[j * n + i] += d * self.scaled(xi, i);
                }
            }
        }
        (loss * scale, grad)
    }

    /// Mini-batch gradient descent from a seeded Glorot start. With a
    /// non-empty `val` set the weights of the best validation epoch are
    /// kept and training stops after `patience` epochs without improvement.
    pub fn train(train: &Dataset, val: &Dataset, params: AnnParams, seed: u64) -> Result<Self> {
        if train.is_empty() {
            return Err(Error::Training("empty training set".into()));
        }
        if params.hidden == 0 || params.batch_size == 0 || !(params.learning_rate > 0.0) {
            return Err(Error::Parameter(format!("bad network settings {params:?}")));
        }
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let domain = train.class_domain.clone();
        let mut model = Self::random(train.n_features(), domain.clone(), params, &mut rng);
        if params.scale_inputs {
            for (i, col) in train.x.columns().into_iter().enumerate() {
                let lo = col.iter().copied().fold(f64::INFINITY, f64::min);
                let hi = col.iter().copied().fold(f64::NEG_INFINITY, f64::max);
                model.input_min[i] = lo;
                model.input_range[i] = if hi > lo { hi - lo } else { 1.0 };
            }
        }
        let index_of = |c: u8| domain.iter().position(|&d| d == c).unwrap();
        let target: Vec<usize> = train.y.iter().map(|&c| index_of(c)).collect();

        let mut order: Vec<usize> = (0..train.len()).collect();
        let mut best = (f64::NEG_INFINITY, model.parameters(), 0);
        let mut epoch = 0;
        while epoch < params.max_epochs {
            epoch += 1;
            order.shuffle(&mut rng);
            let mut total = 0.0;
            for batch in order.chunks(params.batch_size) {
                let (loss, grad) = model.loss_and_gradient(&train.x, &target, batch);
                if !loss.is_finite() || grad.iter().any(|g| !g.is_finite()) {
                    return Err(Error::Training(format!("non-finite loss {loss} in epoch {epoch}")));
                }
                total += loss * batch.len() as f64;
                model.descend(&grad, params.learning_rate);
            }
            if !(total / train.len() as f64).is_finite() {
                return Err(Error::Training(format!("non-finite mean loss in epoch {epoch}")));
            }
            if val.is_empty() {
                continue;
            }
            let acc = hits(&model, val) as f64 / val.len() as f64;
            if acc > best.0 {
                best = (acc, model.parameters(), epoch);
            } else if epoch - best.2 >= params.patience {
                break;
            }
        }
        model.epochs_run = epoch;
        if val.is_empty() {
            model.best_epoch = epoch;
        } else {
            model.set_parameters(&best.1)?;
            model.best_epoch = best.2;
        }
        Ok(model)
    }
}

fn hits(model: &AnnModel, data: &Dataset) -> usize {
    (0..data.len()).filter(|&i| model.predict(data.row(i)) == data.y[i]).count()
}
