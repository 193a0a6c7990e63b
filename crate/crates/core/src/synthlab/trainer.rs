use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{class_metrics, ClassReport};
use crate::dynamics::{DynamicsLog, EpochMatrix};
use crate::error::{HlabError, Result};
use crate::geometry::FeatureSet;

const INIT_STD: f64 = 0.01;

/// Mini-batch SGD with momentum, weight decay and step learning-rate decay.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    pub epochs: usize,
    pub learning_rate: f64,
    pub momentum: f64,
    pub weight_decay: f64,
    pub batch_size: usize,
    /// 0-based epochs from which the learning rate is multiplied by `lr_decay_factor`.
    pub lr_decay_epochs: Vec<usize>,
    pub lr_decay_factor: f64,
    pub seed: u64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            epochs: 200,
            learning_rate: 0.1,
            momentum: 0.9,
            weight_decay: 5e-4,
            batch_size: 128,
            lr_decay_epochs: vec![60, 120, 160],
            lr_decay_factor: 0.2,
            seed: 0,
        }
    }
}

impl TrainConfig {
    fn validate(&self, n: usize) -> Result<()> {
        if self.epochs < 2 {
            return Err(HlabError::Parameter(format!("epochs must be >= 2, got {}", self.epochs)));
        }
        if self.batch_size == 0 || self.batch_size > n {
            return Err(HlabError::Parameter(format!(
                "batch size {} must be in 1..={n}",
                self.batch_size
            )));
        }
        if !(self.learning_rate > 0.0 && self.learning_rate.is_finite()) {
            return Err(HlabError::Parameter("learning rate must be positive".into()));
        }
        if !(0.0..1.0).contains(&self.momentum) {
            return Err(HlabError::Parameter("momentum must lie in [0, 1)".into()));
        }
        if !(self.weight_decay >= 0.0) || !(self.lr_decay_factor > 0.0 && self.lr_decay_factor <= 1.0) {
            return Err(HlabError::Parameter("weight decay or decay factor out of range".into()));
        }
        Ok(())
    }

    pub fn lr_at(&self, epoch: usize) -> f64 {
        let steps = self.lr_decay_epochs.iter().filter(|&&e| e <= epoch).count();
        self.learning_rate * self.lr_decay_factor.powi(steps as i32)
    }
}

/// Affine softmax classifier `z = W x + b`.
#[derive(Debug, Clone, PartialEq)]
pub struct LinearModel {
    pub k_classes: usize,
    pub dim: usize,
    /// Row-major `k x d`.
    pub weights: Vec<f64>,
    pub bias: Vec<f64>,
}

impl LinearModel {
    pub fn logits_into(&self, x: &[f64], out: &mut [f64]) {
        for (c, o) in out.iter_mut().enumerate() {
            let w = &self.weights[c * self.dim..(c + 1) * self.dim];
            *o = self.bias[c] + w.iter().zip(x).map(|(a, b)| a * b).sum::<f64>();
        }
    }

    /// Argmax class per row; ties go to the lowest class id.
    pub fn predict(&self, fs: &FeatureSet) -> Vec<usize> {
        let mut z = vec![0.0; self.k_classes];
        (0..fs.n_samples())
            .map(|i| {
                self.logits_into(fs.row(i), &mut z);
                argmax(&z)
            })
            .collect()
    }
}

fn argmax(z: &[f64]) -> usize {
    let mut best = 0;
    for (c, &v) in z.iter().enumerate().skip(1) {
        if v > z[best] {
            best = c;
        }
    }
    best
}

#[derive(Debug, Clone)]
pub struct TrainResult {
    pub log: DynamicsLog,
    pub model: LinearModel,
    /// Final-model metrics on the training set.
    pub train_report: ClassReport,
    /// Final-model metrics on the evaluation set, when one was given.
    pub eval_report: Option<ClassReport>,
}

/// Trains one linear softmax model on `train`, logging margin, loss,
/// correctness and error norm for every sample in every epoch. Each sample is
/// logged from the logits of its minibatch before that batch's update.
pub fn train_reference(train: &FeatureSet, cfg: &TrainConfig, eval: Option<&FeatureSet>) -> Result<TrainResult> {
    let n = train.n_samples();
    let d = train.dim();
    let k = train.k_classes();
    cfg.validate(n)?;
    if k < 2 {
        return Err(HlabError::Parameter("training needs at least two classes".into()));
    }
    if let Some(ev) = eval {
        if ev.dim() != d || ev.k_classes() != k {
            return Err(HlabError::Incompatible("evaluation set shape differs from training set".into()));
        }
    }
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut model = LinearModel {
        k_classes: k,
        dim: d,
        weights: (0..k * d)
            .map(|_| {
                let z: f64 = StandardNormal.sample(&mut rng);
                INIT_STD * z
            })
            .collect(),
        bias: vec![0.0; k],
    };
    let mut vel_w = vec![0.0; k * d];
    let mut vel_b = vec![0.0; k];
    let mut grad_w = vec![0.0; k * d];
    let mut grad_b = vec![0.0; k];

    let e_total = cfg.epochs;
    let mut margin = vec![0f32; e_total * n];
    let mut loss = vec![0f32; e_total * n];
    let mut correct = vec![false; e_total * n];
    let mut errnorm = vec![0f32; e_total * n];

    let mut order: Vec<usize> = (0..n).collect();
    let mut z = vec![0.0; k];
    let mut p = vec![0.0; k];
    for epoch in 0..e_total {
        let lr = cfg.lr_at(epoch);
        order.shuffle(&mut rng);
        for batch in order.chunks(cfg.batch_size) {
            grad_w.iter_mut().for_each(|g| *g = 0.0);
            grad_b.iter_mut().for_each(|g| *g = 0.0);
            for &i in batch {
                let x = train.row(i);
                let y = train.labels()[i];
                model.logits_into(x, &mut z);
                let zmax = z.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
                let mut sum = 0.0;
                for (pc, &zc) in p.iter_mut().zip(&z) {
                    *pc = (zc - zmax).exp();
                    sum += *pc;
                }
                p.iter_mut().for_each(|pc| *pc /= sum);
                let ce = zmax + sum.ln() - z[y];
                if !ce.is_finite() {
                    return Err(HlabError::Training {
                        epoch,
                        reason: format!("loss is {ce} for sample {i}"),
                    });
                }
                let other = z
                    .iter()
                    .enumerate()
                    .filter(|&(c, _)| c != y)
                    .map(|(_, &v)| v)
                    .fold(f64::NEG_INFINITY, f64::max);
                let mut err2 = 0.0;
                for c in 0..k {
                    let dz = p[c] - if c == y { 1.0 } else { 0.0 };
                    err2 += dz * dz;
                    grad_b[c] += dz;
                    for (g, &xj) in grad_w[c * d..(c + 1) * d].iter_mut().zip(x) {
                        *g += dz * xj;
                    }
                }
                let at = epoch * n + i;
                margin[at] = (z[y] - other) as f32;
                loss[at] = ce as f32;
                correct[at] = argmax(&z) == y;
                errnorm[at] = err2.sqrt() as f32;
            }
            let scale = 1.0 / batch.len() as f64;
            for ((w, v), g) in model.weights.iter_mut().zip(&mut vel_w).zip(&grad_w) {
                let g = g * scale + cfg.weight_decay * *w;
                *v = cfg.momentum * *v + g;
                *w -= lr * *v;
            }
            for ((b, v), g) in model.bias.iter_mut().zip(&mut vel_b).zip(&grad_b) {
                let g = g * scale + cfg.weight_decay * *b;
                *v = cfg.momentum * *v + g;
                *b -= lr * *v;
            }
        }
        if model.weights.iter().chain(&model.bias).any(|v| !v.is_finite()) {
            return Err(HlabError::Training {
                epoch,
                reason: "parameters diverged".into(),
            });
        }
    }

    let log = DynamicsLog::new(format!("linear-seed{}", cfg.seed), n, e_total)
        .with_margin(EpochMatrix::new(e_total, n, margin)?)?
        .with_loss(EpochMatrix::new(e_total, n, loss)?)?
        .with_correct(EpochMatrix::new(e_total, n, correct)?)?
        .with_errnorm(EpochMatrix::new(e_total, n, errnorm)?)?;
    let train_report = class_metrics(&model.predict(train), train.labels(), k)?;
    let eval_report = eval
        .map(|ev| class_metrics(&model.predict(ev), ev.labels(), k))
        .transpose()?;
    Ok(TrainResult {
        log,
        model,
        train_report,
        eval_report,
    })
}

/// Trains `n_models` models with seeds `cfg.seed, cfg.seed + 1, ...` in
/// parallel; results are in seed order.
pub fn train_ensemble(
    train: &FeatureSet,
    cfg: &TrainConfig,
    n_models: usize,
    eval: Option<&FeatureSet>,
) -> Result<Vec<TrainResult>> {
    (0..n_models as u64)
        .into_par_iter()
        .map(|m| {
            let cfg = TrainConfig {
                seed: cfg.seed.wrapping_add(m),
                ..cfg.clone()
            };
            train_reference(train, &cfg, eval)
        })
        .collect()
}
