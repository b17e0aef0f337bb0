use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::{Dataset, LossKind, Network, ParamKind, Targets};
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Optimizer {
    Sgd,
    Adam { beta1: f64, beta2: f64, eps: f64 },
}

impl Optimizer {
    /// Adam with `β₁ = 0.9`, `β₂ = 0.999`, `ε = 1e-8`.
    pub fn adam() -> Self {
        Optimizer::Adam {
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrainConfig {
    pub optimizer: Optimizer,
    pub learning_rate: f64,
    pub batch_size: usize,
    /// Zero epochs returns the network unchanged with an empty trace.
    pub epochs: usize,
    pub seed: u64,
    /// Train only TT cores; dense layers and biases stay fixed.
    pub freeze_non_tt: bool,
}

impl TrainConfig {
    pub fn sgd(learning_rate: f64, batch_size: usize, epochs: usize, seed: u64) -> Self {
        Self {
            optimizer: Optimizer::Sgd,
            learning_rate,
            batch_size,
            epochs,
            seed,
            freeze_non_tt: false,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.learning_rate.is_finite() && self.learning_rate >= 0.0) {
            return Err(Error::Config(format!(
                "learning rate must be ≥ 0, got {}",
                self.learning_rate
            )));
        }
        if self.batch_size == 0 {
            return Err(Error::Config("batch size must be positive".into()));
        }
        if let Optimizer::Adam { beta1, beta2, eps } = self.optimizer {
            if !((0.0..1.0).contains(&beta1) && (0.0..1.0).contains(&beta2) && eps > 0.0) {
                return Err(Error::Config("Adam needs β₁, β₂ ∈ [0, 1) and ε > 0".into()));
            }
        }
        Ok(())
    }
}

/// Loss (and accuracy for cross-entropy) over a whole dataset.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Metrics {
    pub loss: f64,
    pub accuracy: Option<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct EpochMetrics {
    /// 1-based.
    pub epoch: usize,
    pub train: Metrics,
    pub val: Option<Metrics>,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct TrainTrace {
    pub epochs: Vec<EpochMetrics>,
}

impl TrainTrace {
    pub fn last(&self) -> Option<&EpochMetrics> {
        self.epochs.last()
    }
}

const EVAL_CHUNK: usize = 256;

/// Mean loss over all rows, evaluated in fixed-size chunks.
pub fn evaluate(net: &Network, data: &Dataset) -> Result<Metrics> {
    let n = data.len();
    let mut loss = 0.0;
    let mut correct = 0usize;
    let idx: Vec<usize> = (0..n).collect();
    for chunk in idx.chunks(EVAL_CHUNK) {
        let part = data.select(chunk);
        let b = chunk.len();
        let (l, _) = net.loss_and_gradients(part.inputs(), part.targets(), b)?;
        loss += l * b as f64;
        if let Targets::Labels { labels, .. } = part.targets() {
            let out = net.forward_batch(part.inputs(), b)?;
            correct += out
                .chunks_exact(net.out_dim())
                .zip(labels)
                .filter(|(row, &label)| argmax(row) == label)
                .count();
        }
    }
    Ok(Metrics {
        loss: loss / n as f64,
        accuracy: (net.loss_kind() == LossKind::CrossEntropy).then(|| correct as f64 / n as f64),
    })
}

fn argmax(row: &[f64]) -> usize {
    row.iter()
        .enumerate()
        .fold(
            (0, f64::NEG_INFINITY),
            |(bi, bv), (i, &v)| if v > bv { (i, v) } else { (bi, bv) },
        )
        .0
}

/// Minibatch training with a seeded shuffle every epoch.
///
/// After each epoch the metrics are evaluated on the full training set and,
/// if given, the validation set.
pub fn train(net: &Network, data: &Dataset, val: Option<&Dataset>, cfg: &TrainConfig) -> Result<(Network, TrainTrace)> {
    cfg.validate()?;
    if data.is_empty() {
        return Err(Error::Data("empty training set".into()));
    }
    if data.features() != net.in_dim() || val.is_some_and(|v| v.features() != net.in_dim()) {
        return Err(Error::ShapeMismatch(format!(
            "dataset has {} features, network expects {}",
            data.features(),
            net.in_dim()
        )));
    }
    let mut net = net.clone();
    let trainable: Vec<bool> = net
        .param_kinds()
        .into_iter()
        .map(|k| !cfg.freeze_non_tt || k == ParamKind::TTCore)
        .collect();
    let sizes: Vec<usize> = net.params().iter().map(|p| p.len()).collect();
    let mut m: Vec<Vec<f64>> = sizes.iter().map(|&s| vec![0.0; s]).collect();
    let mut v = m.clone();
    let mut step = 0i32;

    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut order: Vec<usize> = (0..data.len()).collect();
    let mut trace = TrainTrace::default();
    for epoch in 1..=cfg.epochs {
        order.shuffle(&mut rng);
        for chunk in order.chunks(cfg.batch_size) {
            let batch = data.select(chunk);
            let (_, grads) = net.loss_and_gradients(batch.inputs(), batch.targets(), chunk.len())?;
            step += 1;
            let lr = cfg.learning_rate;
            for (g, ((p, grad), on)) in net.params_mut().into_iter().zip(&grads).zip(&trainable).enumerate() {
                if !on {
                    continue;
                }
                match cfg.optimizer {
                    Optimizer::Sgd => p.iter_mut().zip(grad).for_each(|(w, d)| *w -= lr * d),
                    Optimizer::Adam { beta1, beta2, eps } => {
                        let (c1, c2) = (1.0 - beta1.powi(step), 1.0 - beta2.powi(step));
                        for (((w, d), mi), vi) in p.iter_mut().zip(grad).zip(&mut m[g]).zip(&mut v[g]) {
                            *mi = beta1 * *mi + (1.0 - beta1) * d;
                            *vi = beta2 * *vi + (1.0 - beta2) * d * d;
                            *w -= lr * (*mi / c1) / ((*vi / c2).sqrt() + eps);
                        }
                    }
                }
            }
        }
        if net.params().iter().any(|p| p.iter().any(|x| !x.is_finite())) {
            return Err(Error::NumericalFailure(format!("parameters diverged in epoch {epoch}")));
        }
        trace.epochs.push(EpochMetrics {
            epoch,
            train: evaluate(&net, data)?,
            val: val.map(|v| evaluate(&net, v)).transpose()?,
        });
    }
    Ok((net, trace))
}
