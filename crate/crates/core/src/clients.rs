//! Client side: data partitioning, local training (honest and adversarial),
//! offset generation and chunked encryption of updates.

use std::str::FromStr;

use ckks::{cipher_count, Ciphertext, CkksContext, PublicKey};
use rand::seq::SliceRandom;
use rand::Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::rng::{stream, Stream};
use crate::task::{apply_trigger, Dataset, Model, CLASSES, FEATURES, PARAM_COUNT};

#[derive(Debug, Error)]
pub enum ClientError {
    #[error("model has {got} parameters, expected {expected}")]
    Dimension { expected: usize, got: usize },
    #[error("training diverged (non-finite loss or weights)")]
    NonFinite,
    #[error("invalid attack configuration: {0}")]
    InvalidAttack(String),
    #[error("offset needs at least two parameters")]
    TooFewParams,
    #[error(transparent)]
    He(#[from] ckks::HeError),
}

pub type Result<T> = std::result::Result<T, ClientError>;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AttackMode {
    Benign,
    Untargeted,
    Backdoor,
    ConstrainAndScale,
    Dba,
}

impl AttackMode {
    pub fn name(self) -> &'static str {
        match self {
            AttackMode::Benign => "benign",
            AttackMode::Untargeted => "untargeted",
            AttackMode::Backdoor => "backdoor",
            AttackMode::ConstrainAndScale => "constrain_and_scale",
            AttackMode::Dba => "dba",
        }
    }

    /// Whether the attack plants a trigger (and so has a meaningful BA).
    pub fn is_backdoor(self) -> bool {
        matches!(self, AttackMode::Backdoor | AttackMode::ConstrainAndScale | AttackMode::Dba)
    }
}

impl std::fmt::Display for AttackMode {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for AttackMode {
    type Err = ClientError;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().replace('-', "_").as_str() {
            "benign" | "none" => Ok(AttackMode::Benign),
            "untargeted" => Ok(AttackMode::Untargeted),
            "backdoor" => Ok(AttackMode::Backdoor),
            "constrain_and_scale" | "cas" => Ok(AttackMode::ConstrainAndScale),
            "dba" => Ok(AttackMode::Dba),
            other => Err(ClientError::InvalidAttack(format!("unknown attack mode {other:?}"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AttackConfig {
    pub mode: AttackMode,
    /// Fraction of clients that are malicious.
    pub pmr: f64,
    /// Poisoned samples added, as a fraction of the client's clean samples.
    pub pdr: f64,
    /// Task-loss weight in constrain-and-scale; the distance term gets `1 - alpha`.
    pub alpha: f64,
    pub target_class: usize,
    /// Boost applied to the malicious delta: `W <- G + gamma (W - G)`.
    pub scale_gamma: f64,
}

impl Default for AttackConfig {
    fn default() -> Self {
        AttackConfig {
            mode: AttackMode::ConstrainAndScale,
            pmr: 0.5,
            pdr: 0.5,
            alpha: 0.7,
            target_class: crate::task::TARGET_CLASS,
            scale_gamma: 10.0,
        }
    }
}

impl AttackConfig {
    /// PMR may reach 0.5: the defense only needs the benign group to be the
    /// one closest to the previous global model, not a strict majority.
    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(ClientError::InvalidAttack(m));
        if !(0.0..=0.5).contains(&self.pmr) {
            return bad(format!("pmr {} outside [0, 0.5]", self.pmr));
        }
        if !(0.0..=1.0).contains(&self.pdr) {
            return bad(format!("pdr {} outside [0, 1]", self.pdr));
        }
        if !(self.alpha > 0.0 && self.alpha <= 1.0) {
            return bad(format!("alpha {} outside (0, 1]", self.alpha));
        }
        if self.target_class >= CLASSES {
            return bad(format!("target class {}", self.target_class));
        }
        if !(self.scale_gamma.is_finite() && self.scale_gamma > 0.0) {
            return bad(format!("scale_gamma {}", self.scale_gamma));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    pub epochs: usize,
    pub lr: f64,
    pub batch_size: usize,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            epochs: 2,
            lr: 0.1,
            batch_size: 20,
        }
    }
}

/// What a client does this round.
#[derive(Debug, Clone, PartialEq)]
pub enum Behavior<'a> {
    Honest,
    Malicious {
        attack: &'a AttackConfig,
        /// Trigger features this client plants (a shard under DBA).
        trigger: &'a [usize],
    },
}

/// Splits the trigger mask into `parts` disjoint, non-empty shards (round-robin).
pub fn dba_shards(mask: &[usize], parts: usize) -> Vec<Vec<usize>> {
    let parts = parts.clamp(1, mask.len().max(1));
    let mut shards = vec![Vec::new(); parts];
    for (i, &j) in mask.iter().enumerate() {
        shards[i % parts].push(j);
    }
    shards
}

/// Client `k` is assigned class `k mod C` and gets `round(rate · per_client)`
/// samples from it; the rest is drawn uniformly from the other classes.
///
/// When several clients ask for more samples of a class than exist, every
/// request for that class is scaled down proportionally.
pub fn partition_non_iid<R: Rng>(
    data: &Dataset,
    n_clients: usize,
    rate: f64,
    per_client: usize,
    rng: &mut R,
) -> Vec<Dataset> {
    assert!((0.0..=1.0).contains(&rate), "rate in [0, 1]");
    let mut pools = data.by_class();
    for p in pools.iter_mut() {
        p.shuffle(rng);
    }
    let mut plan = vec![[0usize; CLASSES]; n_clients];
    for (k, counts) in plan.iter_mut().enumerate() {
        let own = k % CLASSES;
        let from_own = (rate * per_client as f64).round() as usize;
        counts[own] = from_own;
        for _ in from_own..per_client {
            let mut c = rng.gen_range(0..CLASSES - 1);
            if c >= own {
                c += 1;
            }
            counts[c] += 1;
        }
    }
    for c in 0..CLASSES {
        let demand: usize = plan.iter().map(|p| p[c]).sum();
        if demand > pools[c].len() {
            let ratio = pools[c].len() as f64 / demand as f64;
            for p in plan.iter_mut() {
                p[c] = (p[c] as f64 * ratio).floor() as usize;
            }
        }
    }
    let mut cursor = [0usize; CLASSES];
    plan.iter()
        .map(|counts| {
            let mut d = Dataset::new();
            for c in 0..CLASSES {
                for &i in &pools[c][cursor[c]..cursor[c] + counts[c]] {
                    d.push(data.features[i], data.labels[i]);
                }
                cursor[c] += counts[c];
            }
            d
        })
        .collect()
}

/// Adds `round(pdr · n)` triggered copies of non-target samples, relabeled to the target.
pub fn poison_dataset<R: Rng>(data: &Dataset, pdr: f64, trigger: &[usize], target: usize, rng: &mut R) -> Dataset {
    let mut out = data.clone();
    let candidates: Vec<usize> = (0..data.len()).filter(|&i| data.labels[i] != target).collect();
    if candidates.is_empty() {
        return out;
    }
    let n = (pdr * data.len() as f64).round() as usize;
    for _ in 0..n {
        let i = *candidates.choose(rng).expect("non-empty");
        let mut x: [f64; FEATURES] = data.features[i];
        apply_trigger(&mut x, trigger);
        out.push(x, target);
    }
    out
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// `1 - cos(w, g)`.
pub fn cosine_distance(w: &[f64], g: &[f64]) -> f64 {
    let nw = dot(w, w).sqrt();
    let ng = dot(g, g).sqrt();
    if nw <= 1e-12 || ng <= 1e-12 {
        return 1.0;
    }
    1.0 - dot(w, g) / (nw * ng)
}

/// Gradient of [`cosine_distance`] with respect to `w`:
/// `-(g / (|w||g|) - (w·g) w / (|w|³|g|))`.
pub fn cosine_distance_grad(w: &[f64], g: &[f64]) -> Vec<f64> {
    let nw = dot(w, w).sqrt();
    let ng = dot(g, g).sqrt();
    if nw <= 1e-12 || ng <= 1e-12 {
        return vec![0.0; w.len()];
    }
    let wg = dot(w, g);
    w.iter()
        .zip(g)
        .map(|(wi, gi)| -(gi / (nw * ng) - wg * wi / (nw.powi(3) * ng)))
        .collect()
}

/// Local training from the previous global model.
pub fn train_local(data: &Dataset, g_prev: &[f64], behavior: &Behavior<'_>, cfg: &TrainConfig, seed: u64) -> Result<Model> {
    if g_prev.len() != PARAM_COUNT {
        return Err(ClientError::Dimension {
            expected: PARAM_COUNT,
            got: g_prev.len(),
        });
    }
    let mut rng = stream(seed, Stream::ClientTrain, 0);
    let mut model = Model::from_weights(g_prev.to_vec());
    let (attack, trigger) = match behavior {
        Behavior::Honest => {
            crate::task::sgd(&mut model, data, cfg.epochs, cfg.lr, cfg.batch_size, &mut rng);
            return finite(model);
        }
        Behavior::Malicious { attack, trigger } => (*attack, *trigger),
    };
    attack.validate()?;
    let (train_set, alpha) = match attack.mode {
        AttackMode::Benign => (data.clone(), 1.0),
        AttackMode::Untargeted => {
            let mut d = data.clone();
            for y in d.labels.iter_mut() {
                *y = rng.gen_range(0..CLASSES);
            }
            (d, 1.0)
        }
        AttackMode::Backdoor | AttackMode::Dba => {
            (poison_dataset(data, attack.pdr, trigger, attack.target_class, &mut rng), 1.0)
        }
        AttackMode::ConstrainAndScale => (
            poison_dataset(data, attack.pdr, trigger, attack.target_class, &mut rng),
            attack.alpha,
        ),
    };

    let mut order: Vec<usize> = (0..train_set.len()).collect();
    for _ in 0..cfg.epochs {
        order.shuffle(&mut rng);
        for chunk in order.chunks(cfg.batch_size.max(1)) {
            let (_, g_task) = model.loss_grad(&train_set, chunk);
            let g_dist = if alpha < 1.0 {
                cosine_distance_grad(&model.weights, g_prev)
            } else {
                vec![0.0; PARAM_COUNT]
            };
            for ((w, gt), gd) in model.weights.iter_mut().zip(&g_task).zip(&g_dist) {
                *w -= cfg.lr * (alpha * gt + (1.0 - alpha) * gd);
            }
        }
    }
    let gamma = match attack.mode {
        AttackMode::Untargeted | AttackMode::ConstrainAndScale | AttackMode::Dba => attack.scale_gamma,
        AttackMode::Benign | AttackMode::Backdoor => 1.0,
    };
    if gamma != 1.0 {
        for (w, g) in model.weights.iter_mut().zip(g_prev) {
            *w = g + gamma * (*w - g);
        }
    }
    finite(model)
}

fn finite(model: Model) -> Result<Model> {
    if model.weights.iter().all(|w| w.is_finite()) {
        Ok(model)
    } else {
        Err(ClientError::NonFinite)
    }
}

/// Scalar obfuscation offset added to every weight before encryption.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Offset {
    pub delta: f64,
    pub f_s: f64,
    pub sigma_w: f64,
    /// Set when the weights have zero spread, so `delta` is zero.
    pub degenerate: bool,
}

pub const MAX_OFFSET_FACTOR: f64 = 100.0;
pub const MIN_OFFSET_FACTOR: f64 = 0.01;

/// `delta = σ_W · f_s` with `f_s` uniform on `[-bound, bound]`, resampled while `|f_s| < 0.01`.
///
/// `bound` is clamped to `[0.02, 100]`.
pub fn generate_offset<R: Rng>(weights: &[f64], bound: f64, rng: &mut R) -> Result<Offset> {
    if weights.len() < 2 {
        return Err(ClientError::TooFewParams);
    }
    let bound = bound.clamp(2.0 * MIN_OFFSET_FACTOR, MAX_OFFSET_FACTOR);
    let n = weights.len() as f64;
    let mean = weights.iter().sum::<f64>() / n;
    let sigma_w = if weights.iter().all(|&w| w == weights[0]) {
        0.0
    } else {
        (weights.iter().map(|w| (w - mean).powi(2)).sum::<f64>() / n).sqrt()
    };
    let f_s = loop {
        let f: f64 = rng.gen_range(-bound..=bound);
        if f.abs() >= MIN_OFFSET_FACTOR {
            break f;
        }
    };
    Ok(Offset {
        delta: sigma_w * f_s,
        f_s,
        sigma_w,
        degenerate: sigma_w == 0.0,
    })
}

/// A client's encrypted submission.
#[derive(Debug, Clone, PartialEq)]
pub struct EncryptedModel {
    pub chunks: Vec<Ciphertext>,
    /// `delta` replicated into every slot.
    pub offset_cipher: Ciphertext,
}

/// `W' = W + delta`, split into `cipher_count` slot-sized chunks (the last
/// ones zero-padded), each encrypted under `pk`.
pub fn encrypt_update<R: Rng>(
    weights: &[f64],
    offset: &Offset,
    ctx: &CkksContext,
    pk: &PublicKey,
    rng: &mut R,
) -> Result<EncryptedModel> {
    let shifted = shift(weights, offset.delta);
    let slots = ctx.slot_count();
    let n = cipher_count(weights.len(), ctx.params().poly_degree);
    let chunks = (0..n)
        .map(|j| {
            let lo = (j * slots).min(shifted.len());
            let hi = ((j + 1) * slots).min(shifted.len());
            ctx.encrypt(&shifted[lo..hi], pk, rng)
        })
        .collect::<ckks::Result<Vec<_>>>()?;
    let offset_cipher = ctx.encrypt(&vec![offset.delta; slots], pk, rng)?;
    Ok(EncryptedModel { chunks, offset_cipher })
}

/// `w + delta` element-wise.
pub fn shift(weights: &[f64], delta: f64) -> Vec<f64> {
    weights.iter().map(|w| w + delta).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::task::{TaskSize, ToyTask, TRIGGER_FEATURES};
    use rand::SeedableRng;
    use rand_chacha::ChaCha20Rng;

    #[test]
    fn attack_mode_parses() {
        assert_eq!("constrain-and-scale".parse::<AttackMode>().unwrap(), AttackMode::ConstrainAndScale);
        assert_eq!("DBA".parse::<AttackMode>().unwrap(), AttackMode::Dba);
        assert!("nope".parse::<AttackMode>().is_err());
    }

    #[test]
    fn shards_are_disjoint_and_cover_the_mask() {
        let shards = dba_shards(&TRIGGER_FEATURES, 3);
        let mut all: Vec<usize> = shards.concat();
        all.sort();
        assert_eq!(all, TRIGGER_FEATURES.to_vec());
        assert!(shards.iter().all(|s| !s.is_empty()));
        // more attackers than features: still one feature each
        assert_eq!(dba_shards(&TRIGGER_FEATURES, 9).len(), 4);
    }

    #[test]
    fn cosine_gradient_matches_finite_differences() {
        let mut rng = ChaCha20Rng::seed_from_u64(11);
        let w: Vec<f64> = (0..50).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let g: Vec<f64> = (0..50).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let grad = cosine_distance_grad(&w, &g);
        let eps = 1e-6;
        for k in 0..50 {
            let mut up = w.clone();
            up[k] += eps;
            let mut dn = w.clone();
            dn[k] -= eps;
            let fd = (cosine_distance(&up, &g) - cosine_distance(&dn, &g)) / (2.0 * eps);
            assert!((fd - grad[k]).abs() <= 1e-4 * fd.abs().max(1e-3), "{k}: {fd} vs {}", grad[k]);
        }
    }

    #[test]
    fn offsets_are_deterministic_and_bounded() {
        let w: Vec<f64> = (0..100).map(|i| i as f64 / 10.0).collect();
        let a = generate_offset(&w, 100.0, &mut ChaCha20Rng::seed_from_u64(4)).unwrap();
        let b = generate_offset(&w, 100.0, &mut ChaCha20Rng::seed_from_u64(4)).unwrap();
        assert_eq!(a, b);
        assert!((a.delta - a.sigma_w * a.f_s).abs() < 1e-12);
        let flat = generate_offset(&[0.3; 10], 100.0, &mut ChaCha20Rng::seed_from_u64(4)).unwrap();
        assert_eq!(flat.delta, 0.0);
        assert!(flat.degenerate);
        assert!(generate_offset(&[1.0], 1.0, &mut ChaCha20Rng::seed_from_u64(4)).is_err());
    }

    #[test]
    fn non_iid_partition_takes_the_requested_share() {
        let task = ToyTask::generate(3, TaskSize::default());
        let mut rng = ChaCha20Rng::seed_from_u64(5);
        let parts = partition_non_iid(&task.train, 10, 0.7, 100, &mut rng);
        assert_eq!(parts.len(), 10);
        let own = parts[3].labels.iter().filter(|&&y| y == 3).count();
        assert_eq!(own, 70);
        assert_eq!(parts[3].len(), 100);
        let single = partition_non_iid(&task.train, 4, 1.0, 50, &mut rng);
        assert!(single[2].labels.iter().all(|&y| y == 2));
    }

    #[test]
    fn starved_classes_are_scaled_down() {
        let task = ToyTask::generate(3, TaskSize { train: 200, ..TaskSize::default() });
        let mut rng = ChaCha20Rng::seed_from_u64(5);
        // 20 clients, every other one wants 50 samples of its class; only 20 exist per class
        let parts = partition_non_iid(&task.train, 20, 1.0, 50, &mut rng);
        let class0: usize = parts.iter().map(|p| p.labels.iter().filter(|&&y| y == 0).count()).sum();
        assert!(class0 <= 20);
    }

    #[test]
    fn zero_epochs_returns_previous_global() {
        let task = ToyTask::generate(3, TaskSize { train: 100, ..TaskSize::default() });
        let g: Vec<f64> = (0..PARAM_COUNT).map(|i| (i as f64).sin()).collect();
        let cfg = TrainConfig { epochs: 0, ..TrainConfig::default() };
        let m = train_local(&task.train, &g, &Behavior::Honest, &cfg, 1).unwrap();
        assert_eq!(m.weights, g);
        assert!(train_local(&task.train, &g[..10], &Behavior::Honest, &cfg, 1).is_err());
    }
}
