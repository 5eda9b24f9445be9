//! Single-layer softmax classifier trained by distributed SGD.
//!
//! Parameters are flattened class-major: `theta[c·(F+1) + f]` is the weight of
//! feature `f` for class `c`, and `theta[c·(F+1) + F]` is the class bias, so
//! `d = (F + 1)·C` (7850 for MNIST).

use rand::seq::{index, SliceRandom};
use rand::Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::dataset::Dataset;
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct SoftmaxModel {
    pub features: usize,
    pub classes: usize,
}

impl SoftmaxModel {
    pub fn new(features: usize, classes: usize) -> Self {
        Self { features, classes }
    }

    pub fn for_dataset(data: &Dataset) -> Self {
        Self::new(data.dim(), data.classes())
    }

    pub fn dim(&self) -> usize {
        (self.features + 1) * self.classes
    }

    /// Small Gaussian initialization.
    pub fn init_params<R: Rng + ?Sized>(&self, std: f64, rng: &mut R) -> Vec<f64> {
        let normal = Normal::new(0.0, std).expect("init std must be finite and non-negative");
        (0..self.dim()).map(|_| normal.sample(rng)).collect()
    }

    fn check(&self, theta: &[f64], data: &Dataset) -> Result<()> {
        if theta.len() != self.dim() {
            return Err(Error::invalid(format!("theta has {} entries, model needs {}", theta.len(), self.dim())));
        }
        if data.dim() != self.features || data.classes() != self.classes {
            return Err(Error::invalid("dataset shape does not match the model"));
        }
        Ok(())
    }

    /// Writes class probabilities of `x` into `p`; returns `(log Z, logit of class y)`.
    fn probabilities(&self, theta: &[f64], x: &[f64], y: usize, p: &mut [f64]) -> (f64, f64) {
        let stride = self.features + 1;
        for (c, pc) in p.iter_mut().enumerate() {
            let row = &theta[c * stride..(c + 1) * stride];
            *pc = row[self.features] + dot(&row[..self.features], x);
        }
        let logit_y = p[y];
        let max = p.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let mut z = 0.0;
        for v in p.iter_mut() {
            *v = (*v - max).exp();
            z += *v;
        }
        p.iter_mut().for_each(|v| *v /= z);
        (max + z.ln(), logit_y)
    }

    /// Mean cross-entropy and its gradient over the given rows.
    pub fn batch_gradient(&self, theta: &[f64], data: &Dataset, rows: &[usize]) -> Result<(Vec<f64>, f64)> {
        self.check(theta, data)?;
        if rows.is_empty() {
            return Err(Error::invalid("gradient over an empty batch"));
        }
        let stride = self.features + 1;
        let mut grad = vec![0.0; self.dim()];
        let mut p = vec![0.0; self.classes];
        let mut x = vec![0.0; self.features];
        let mut loss = 0.0;
        for &i in rows {
            widen(data.example(i), &mut x);
            let y = data.label(i);
            let (log_z, logit_y) = self.probabilities(theta, &x, y, &mut p);
            loss += log_z - logit_y;
            p[y] -= 1.0;
            for (c, &err) in p.iter().enumerate() {
                let g = &mut grad[c * stride..(c + 1) * stride];
                for (gf, &v) in g[..self.features].iter_mut().zip(&x) {
                    *gf += err * v;
                }
                g[self.features] += err;
            }
        }
        let inv = 1.0 / rows.len() as f64;
        grad.iter_mut().for_each(|g| *g *= inv);
        Ok((grad, loss * inv))
    }
}

fn widen(src: &[f32], dst: &mut [f64]) {
    for (d, &s) in dst.iter_mut().zip(src) {
        *d = s as f64;
    }
}

/// Dot product with four independent accumulators, so it vectorizes.
fn dot(a: &[f64], b: &[f64]) -> f64 {
    let mut acc = [0.0; 4];
    let (ca, cb) = (a.chunks_exact(4), b.chunks_exact(4));
    let tail: f64 = ca.remainder().iter().zip(cb.remainder()).map(|(x, y)| x * y).sum();
    for (x, y) in ca.zip(cb) {
        for j in 0..4 {
            acc[j] += x[j] * y[j];
        }
    }
    (acc[0] + acc[1]) + (acc[2] + acc[3]) + tail
}

/// A worker's cached training examples.
#[derive(Debug, Clone, PartialEq)]
pub struct DatasetShard<'a> {
    pub owner: usize,
    data: &'a Dataset,
    indices: Vec<usize>,
}

impl<'a> DatasetShard<'a> {
    pub fn new(owner: usize, data: &'a Dataset, indices: Vec<usize>) -> Result<Self> {
        if let Some(&bad) = indices.iter().find(|&&i| i >= data.len()) {
            return Err(Error::invalid(format!("shard index {bad} outside a dataset of {}", data.len())));
        }
        Ok(Self { owner, data, indices })
    }

    pub fn len(&self) -> usize {
        self.indices.len()
    }

    pub fn is_empty(&self) -> bool {
        self.indices.is_empty()
    }

    pub fn indices(&self) -> &[usize] {
        &self.indices
    }

    pub fn data(&self) -> &'a Dataset {
        self.data
    }
}

/// Gradient and loss of one worker. A batch equal to the shard size uses the
/// whole cache without touching `rng`; smaller batches are drawn uniformly
/// without replacement.
pub fn local_gradient<R: Rng + ?Sized>(
    model: &SoftmaxModel,
    theta: &[f64],
    shard: &DatasetShard<'_>,
    batch_size: usize,
    rng: &mut R,
) -> Result<(Vec<f64>, f64)> {
    if shard.is_empty() {
        return Err(Error::invalid(format!("worker {} has an empty shard", shard.owner)));
    }
    if batch_size == 0 || batch_size > shard.len() {
        return Err(Error::invalid(format!("batch size {batch_size} for a shard of {}", shard.len())));
    }
    if batch_size == shard.len() {
        return model.batch_gradient(theta, shard.data, &shard.indices);
    }
    let rows: Vec<usize> = index::sample(rng, shard.len(), batch_size).into_iter().map(|j| shard.indices[j]).collect();
    model.batch_gradient(theta, shard.data, &rows)
}

/// Splits a dataset into `workers` shards of `shard_size` examples.
///
/// Without `overlap`, shards are disjoint slices of one permutation and
/// `workers·shard_size` must not exceed the dataset. With `overlap`, every
/// shard is an independent draw without replacement.
pub fn shard_dataset<'a, R: Rng + ?Sized>(
    data: &'a Dataset,
    workers: usize,
    shard_size: usize,
    overlap: bool,
    rng: &mut R,
) -> Result<Vec<DatasetShard<'a>>> {
    if workers == 0 || shard_size == 0 {
        return Err(Error::invalid("need at least one worker and a positive shard size"));
    }
    if shard_size > data.len() {
        return Err(Error::invalid(format!("shard size {shard_size} exceeds the {} examples", data.len())));
    }
    if overlap {
        return (0..workers)
            .map(|m| DatasetShard::new(m, data, index::sample(rng, data.len(), shard_size).into_vec()))
            .collect();
    }
    if workers * shard_size > data.len() {
        return Err(Error::invalid(format!(
            "{workers} disjoint shards of {shard_size} need {} examples, dataset has {}",
            workers * shard_size,
            data.len()
        )));
    }
    let mut order: Vec<usize> = (0..data.len()).collect();
    order.shuffle(rng);
    order
        .chunks_exact(shard_size)
        .take(workers)
        .enumerate()
        .map(|(m, c)| DatasetShard::new(m, data, c.to_vec()))
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum OptimizerConfig {
    Sgd { learning_rate: f64 },
    Adam { learning_rate: f64, beta1: f64, beta2: f64, epsilon: f64 },
}

impl Default for OptimizerConfig {
    fn default() -> Self {
        OptimizerConfig::Adam { learning_rate: 1e-3, beta1: 0.9, beta2: 0.999, epsilon: 1e-8 }
    }
}

impl OptimizerConfig {
    pub fn validate(&self) -> Result<()> {
        let ok = match *self {
            OptimizerConfig::Sgd { learning_rate } => learning_rate > 0.0 && learning_rate.is_finite(),
            OptimizerConfig::Adam { learning_rate, beta1, beta2, epsilon } => {
                learning_rate > 0.0
                    && learning_rate.is_finite()
                    && (0.0..1.0).contains(&beta1)
                    && (0.0..1.0).contains(&beta2)
                    && epsilon > 0.0
            }
        };
        if ok {
            Ok(())
        } else {
            Err(Error::config(format!("invalid optimizer settings {self:?}")))
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct OptimizerState {
    pub config: OptimizerConfig,
    pub step: u64,
    pub first_moment: Vec<f64>,
    pub second_moment: Vec<f64>,
}

impl OptimizerState {
    pub fn new(config: OptimizerConfig, dim: usize) -> Self {
        let moments = match config {
            OptimizerConfig::Sgd { .. } => 0,
            OptimizerConfig::Adam { .. } => dim,
        };
        Self { config, step: 0, first_moment: vec![0.0; moments], second_moment: vec![0.0; moments] }
    }
}

/// Applies one optimizer step with the recovered gradient.
pub fn global_update(theta: &mut [f64], state: &mut OptimizerState, g_hat: &[f64]) -> Result<()> {
    if g_hat.len() != theta.len() {
        return Err(Error::invalid(format!("gradient has {} entries, theta {}", g_hat.len(), theta.len())));
    }
    if let Some(i) = g_hat.iter().position(|g| !g.is_finite()) {
        return Err(Error::NonFinite(format!("recovered gradient entry {i} is {}", g_hat[i])));
    }
    state.step += 1;
    match state.config {
        OptimizerConfig::Sgd { learning_rate } => {
            for (t, g) in theta.iter_mut().zip(g_hat) {
                *t -= learning_rate * g;
            }
        }
        OptimizerConfig::Adam { learning_rate, beta1, beta2, epsilon } => {
            if state.first_moment.len() != theta.len() {
                return Err(Error::invalid("Adam moments do not match theta"));
            }
            let c1 = 1.0 - beta1.powf(state.step as f64);
            let c2 = 1.0 - beta2.powf(state.step as f64);
            for i in 0..theta.len() {
                let m = &mut state.first_moment[i];
                let v = &mut state.second_moment[i];
                *m = beta1 * *m + (1.0 - beta1) * g_hat[i];
                *v = beta2 * *v + (1.0 - beta2) * g_hat[i] * g_hat[i];
                theta[i] -= learning_rate * (*m / c1) / ((*v / c2).sqrt() + epsilon);
            }
        }
    }
    Ok(())
}

/// Argmax accuracy and mean cross-entropy on a dataset.
pub fn evaluate(model: &SoftmaxModel, theta: &[f64], data: &Dataset) -> Result<(f64, f64)> {
    model.check(theta, data)?;
    if data.is_empty() {
        return Err(Error::invalid("evaluation on an empty dataset"));
    }
    let mut p = vec![0.0; model.classes];
    let mut x = vec![0.0; model.features];
    let (mut correct, mut loss) = (0usize, 0.0);
    for i in 0..data.len() {
        widen(data.example(i), &mut x);
        let y = data.label(i);
        let (log_z, logit_y) = model.probabilities(theta, &x, y, &mut p);
        let best = p.iter().enumerate().fold(0, |b, (c, &v)| if v > p[b] { c } else { b });
        correct += usize::from(best == y);
        loss += log_z - logit_y;
    }
    let n = data.len() as f64;
    Ok((correct as f64 / n, loss / n))
}
