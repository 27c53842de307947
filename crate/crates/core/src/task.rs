//! Synthetic classification task and the softmax-regression model trained on it.
//!
//! Ten Gaussian blobs in 64 pixel-like features valued in `[0, 1]`. Class `c`
//! brightens its own block of six features, so every pair of classes is
//! equally far apart. The last four features sit in a dark corner (near zero)
//! for every class; the backdoor trigger lights them up.

use rand::seq::SliceRandom;
use rand::Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::rng::{stream, Stream};

pub const CLASSES: usize = 10;
pub const FEATURES: usize = 64;
pub const TRIGGER_FEATURES: [usize; 4] = [60, 61, 62, 63];
pub const TARGET_CLASS: usize = 0;
pub const TRIGGER_VALUE: f64 = 1.0;

/// Width of the feature block that each class brightens.
const BLOCK: usize = (FEATURES - TRIGGER_FEATURES.len()) / CLASSES;

/// Parameters of softmax regression: `CLASSES × FEATURES` weights then `CLASSES` biases.
pub const PARAM_COUNT: usize = CLASSES * FEATURES + CLASSES;

#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    pub features: Vec<[f64; FEATURES]>,
    pub labels: Vec<usize>,
}

impl Dataset {
    pub fn new() -> Self {
        Dataset {
            features: Vec::new(),
            labels: Vec::new(),
        }
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn push(&mut self, x: [f64; FEATURES], y: usize) {
        self.features.push(x);
        self.labels.push(y);
    }

    /// Indices of samples grouped by label.
    pub fn by_class(&self) -> Vec<Vec<usize>> {
        let mut out = vec![Vec::new(); CLASSES];
        for (i, &y) in self.labels.iter().enumerate() {
            out[y].push(i);
        }
        out
    }
}

impl Default for Dataset {
    fn default() -> Self {
        Self::new()
    }
}

/// Sets `mask` features to the trigger value.
pub fn apply_trigger(x: &mut [f64; FEATURES], mask: &[usize]) {
    for &j in mask {
        x[j] = TRIGGER_VALUE;
    }
}

/// The generated task: class centers plus held-out evaluation data.
#[derive(Debug, Clone)]
pub struct ToyTask {
    centers: Vec<[f64; FEATURES]>,
    noise: f64,
    pub train: Dataset,
    pub test: Dataset,
    pub public: Dataset,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TaskSize {
    pub train: usize,
    pub test: usize,
    /// Samples the session owner uses to pretrain the initial global model.
    pub public: usize,
    pub noise: f64,
}

impl Default for TaskSize {
    fn default() -> Self {
        TaskSize {
            train: 6000,
            test: 2000,
            public: 300,
            noise: 0.22,
        }
    }
}

impl ToyTask {
    pub fn generate(seed: u64, size: TaskSize) -> Self {
        let centers: Vec<[f64; FEATURES]> = (0..CLASSES)
            .map(|c| {
                let mut x = [0.0; FEATURES];
                for (j, v) in x.iter_mut().enumerate() {
                    *v = if TRIGGER_FEATURES.contains(&j) {
                        0.02
                    } else if j / BLOCK == c {
                        0.7
                    } else {
                        0.3
                    };
                }
                x
            })
            .collect();
        let mut task = ToyTask {
            centers,
            noise: size.noise,
            train: Dataset::new(),
            test: Dataset::new(),
            public: Dataset::new(),
        };
        task.train = task.sample(&mut stream(seed, Stream::Task, 1), size.train);
        task.test = task.sample(&mut stream(seed, Stream::Task, 2), size.test);
        task.public = task.sample(&mut stream(seed, Stream::Task, 3), size.public);
        task
    }

    /// Balanced draw: `n` samples cycling through classes, shuffled.
    fn sample<R: Rng>(&self, rng: &mut R, n: usize) -> Dataset {
        let noise = Normal::new(0.0, self.noise).expect("positive noise");
        let corner = Normal::new(0.0, 0.02).expect("positive noise");
        let mut order: Vec<usize> = (0..n).map(|i| i % CLASSES).collect();
        order.shuffle(rng);
        let mut data = Dataset::new();
        for y in order {
            let mut x = [0.0; FEATURES];
            for (j, v) in x.iter_mut().enumerate() {
                let eps = if TRIGGER_FEATURES.contains(&j) {
                    corner.sample(rng)
                } else {
                    noise.sample(rng)
                };
                *v = (self.centers[y][j] + eps).clamp(0.0, 1.0);
            }
            data.push(x, y);
        }
        data
    }
}

/// Softmax regression over the toy features.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Model {
    pub weights: Vec<f64>,
}

impl Model {
    pub fn zeros() -> Self {
        Model {
            weights: vec![0.0; PARAM_COUNT],
        }
    }

    pub fn from_weights(weights: Vec<f64>) -> Self {
        assert_eq!(weights.len(), PARAM_COUNT, "weight vector length");
        Model { weights }
    }

    pub fn random<R: Rng>(rng: &mut R, scale: f64) -> Self {
        Model {
            weights: (0..PARAM_COUNT).map(|_| rng.gen_range(-scale..scale)).collect(),
        }
    }

    pub fn logits(&self, x: &[f64; FEATURES]) -> [f64; CLASSES] {
        let mut out = [0.0; CLASSES];
        for (c, o) in out.iter_mut().enumerate() {
            let row = &self.weights[c * FEATURES..(c + 1) * FEATURES];
            *o = self.weights[CLASSES * FEATURES + c]
                + row.iter().zip(x).map(|(w, v)| w * v).sum::<f64>();
        }
        out
    }

    pub fn predict(&self, x: &[f64; FEATURES]) -> usize {
        let l = self.logits(x);
        (0..CLASSES).max_by(|&a, &b| l[a].total_cmp(&l[b])).unwrap_or(0)
    }

    /// Mean cross-entropy and its gradient over `idx` samples of `data`.
    pub fn loss_grad(&self, data: &Dataset, idx: &[usize]) -> (f64, Vec<f64>) {
        let mut grad = vec![0.0; PARAM_COUNT];
        let mut loss = 0.0;
        for &i in idx {
            let x = &data.features[i];
            let y = data.labels[i];
            let p = softmax(&self.logits(x));
            loss -= p[y].max(1e-300).ln();
            for c in 0..CLASSES {
                let d = p[c] - if c == y { 1.0 } else { 0.0 };
                let row = &mut grad[c * FEATURES..(c + 1) * FEATURES];
                for (g, v) in row.iter_mut().zip(x) {
                    *g += d * v;
                }
                grad[CLASSES * FEATURES + c] += d;
            }
        }
        let n = idx.len().max(1) as f64;
        grad.iter_mut().for_each(|g| *g /= n);
        (loss / n, grad)
    }

    pub fn loss(&self, data: &Dataset) -> f64 {
        let idx: Vec<usize> = (0..data.len()).collect();
        self.loss_grad(data, &idx).0
    }
}

fn softmax(l: &[f64; CLASSES]) -> [f64; CLASSES] {
    let m = l.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let mut p = [0.0; CLASSES];
    let mut z = 0.0;
    for (pi, li) in p.iter_mut().zip(l) {
        *pi = (li - m).exp();
        z += *pi;
    }
    p.iter_mut().for_each(|v| *v /= z);
    p
}

/// Clean-test accuracy.
pub fn main_accuracy(model: &Model, test: &Dataset) -> Option<f64> {
    if test.is_empty() {
        return None;
    }
    let hits = (0..test.len())
        .filter(|&i| model.predict(&test.features[i]) == test.labels[i])
        .count();
    Some(hits as f64 / test.len() as f64)
}

/// Fraction of triggered non-target test samples classified as the target class.
pub fn backdoor_accuracy(model: &Model, test: &Dataset, mask: &[usize], target: usize) -> Option<f64> {
    let mut total = 0usize;
    let mut hits = 0usize;
    for i in 0..test.len() {
        if test.labels[i] == target {
            continue;
        }
        let mut x = test.features[i];
        apply_trigger(&mut x, mask);
        total += 1;
        if model.predict(&x) == target {
            hits += 1;
        }
    }
    (total > 0).then(|| hits as f64 / total as f64)
}

/// Plain mini-batch SGD on cross-entropy.
pub fn sgd<R: Rng>(model: &mut Model, data: &Dataset, epochs: usize, lr: f64, batch: usize, rng: &mut R) {
    let mut order: Vec<usize> = (0..data.len()).collect();
    for _ in 0..epochs {
        order.shuffle(rng);
        for chunk in order.chunks(batch.max(1)) {
            let (_, g) = model.loss_grad(data, chunk);
            for (w, gi) in model.weights.iter_mut().zip(&g) {
                *w -= lr * gi;
            }
        }
    }
}
