use std::collections::BTreeSet;
use std::sync::Arc;

use ckks::HeParams;
use log::{debug, info, warn};
use rand::seq::SliceRandom;
use rand::Rng;
use rayon::prelude::*;

use super::config::ScenarioConfig;
use super::metrics::{evaluate_model, round_row, GroundTruth, RoundMetrics};
use crate::clients::{dba_shards, encrypt_update, generate_offset, partition_non_iid, train_local, AttackMode, Behavior, EncryptedModel};
use crate::defender::{DecryptionService, Defender};
use crate::error::{Error, ProtocolError, Result};
use crate::gateway::Gateway;
use crate::ledger::{Identity, Ledger, SharedLedger};
use crate::oracle::{KeyOracle, ModelOracle};
use crate::rng::{index, stream, Stream};
use crate::task::{sgd, Model, ToyTask, CLASSES, TRIGGER_FEATURES};

/// Everything a finished run leaves behind.
pub struct ScenarioOutcome {
    pub config: ScenarioConfig,
    pub session_id: String,
    pub metrics: Vec<RoundMetrics>,
    pub ledger: SharedLedger,
    pub truth: GroundTruth,
    pub clients: Vec<Identity>,
    pub task: ToyTask,
}

impl ScenarioOutcome {
    pub fn ledger_export(&self) -> String {
        self.ledger.read().expect("ledger poisoned").export_string()
    }

    pub fn final_metrics(&self) -> &RoundMetrics {
        self.metrics.last().expect("at least one round")
    }
}

/// Initial global model: a short training run on the owner's public sample.
pub fn pretrain_global(task: &ToyTask, epochs: usize, lr: f64, batch: usize, seed: u64) -> Vec<f64> {
    let mut model = Model::zeros();
    let mut rng = stream(seed, Stream::Pretrain, 0);
    sgd(&mut model, &task.public, epochs, lr, batch, &mut rng);
    model.weights
}

/// Chooses `count` malicious clients, spreading them over the clients' home
/// classes so that no class loses all of its honest clients while another
/// still has spares.
pub fn pick_malicious(n_clients: usize, count: usize, seed: u64) -> BTreeSet<usize> {
    let mut rng = stream(seed, Stream::Roles, 0);
    let mut by_class: Vec<Vec<usize>> = vec![Vec::new(); CLASSES];
    for k in 0..n_clients {
        by_class[k % CLASSES].push(k);
    }
    let mut classes: Vec<usize> = (0..CLASSES).collect();
    classes.shuffle(&mut rng);
    for members in by_class.iter_mut() {
        members.shuffle(&mut rng);
    }
    let depth = by_class.iter().map(Vec::len).max().unwrap_or(0);
    let mut order = Vec::with_capacity(n_clients);
    for d in 0..depth {
        order.extend(classes.iter().filter_map(|&c| by_class[c].get(d).copied()));
    }
    order.into_iter().take(count).collect()
}

struct Client {
    identity: Identity,
    malicious: bool,
    trigger: Vec<usize>,
    data: crate::task::Dataset,
}

/// Runs a full multi-round session and collects per-round metrics.
pub fn run_scenario(cfg: &ScenarioConfig) -> Result<ScenarioOutcome> {
    cfg.validate()?;
    let task = ToyTask::generate(cfg.seed, cfg.task);
    let partitions = partition_non_iid(
        &task.train,
        cfg.n_clients,
        cfg.non_iid_rate,
        cfg.samples_per_client,
        &mut stream(cfg.seed, Stream::Partition, 0),
    );

    let ledger: SharedLedger = Ledger::new().shared();
    let (models, keys) = match &cfg.storage_dir {
        Some(dir) => (ModelOracle::on_disk(dir.join("oracle-a"))?, KeyOracle::on_disk(dir.join("oracle-b"))?),
        None => (ModelOracle::in_memory(), KeyOracle::in_memory()),
    };
    let defender = Arc::new(Defender::new(ledger.clone(), keys));
    let gateway = Gateway::new(
        ledger.clone(),
        models,
        defender.clone() as Arc<dyn DecryptionService>,
        cfg.seed,
    );

    let n_malicious = cfg.malicious_count();
    let malicious_idx: BTreeSet<usize> = pick_malicious(cfg.n_clients, n_malicious, cfg.seed);
    let shards = dba_shards(&TRIGGER_FEATURES, n_malicious.max(1));
    let mut clients = Vec::with_capacity(cfg.n_clients);
    for (k, data) in partitions.into_iter().enumerate() {
        let identity = ledger
            .write()
            .expect("ledger poisoned")
            .register_client(&format!("wallet-{:03}", k))?;
        let malicious = malicious_idx.contains(&k);
        let trigger = if malicious && cfg.attack_mode == AttackMode::Dba {
            let rank = malicious_idx.iter().position(|&m| m == k).expect("member");
            shards[rank % shards.len()].clone()
        } else {
            TRIGGER_FEATURES.to_vec()
        };
        clients.push(Client {
            identity,
            malicious,
            trigger,
            data,
        });
    }
    let truth = GroundTruth {
        malicious_clients: clients
            .iter()
            .filter(|c| c.malicious)
            .map(|c| c.identity.client_id.clone())
            .collect(),
        poisoned_rounds: cfg.poisoned_round_set(),
    };

    let g0 = pretrain_global(&task, cfg.pretrain_epochs, cfg.lr, cfg.batch_size, cfg.seed);
    // masking plus one multiply: two rescaling primes above the base
    let params = HeParams::with_levels(cfg.poly_degree, 2)?;
    let session_id = gateway.init_session("owner", cfg.rounds, cfg.session_reward, &params, &g0, cfg.seed)?;
    let session = gateway.session(&session_id)?;
    let attack = cfg.attack();
    let train_cfg = cfg.train();

    let mut metrics = Vec::with_capacity(cfg.rounds as usize);
    for round in 1..=cfg.rounds {
        let g_prev = gateway.latest_global(&session_id)?.global_weights;
        let poisoned = cfg.is_poisoned_round(round);

        // client phase: independent, parallel
        let submissions: Vec<Option<EncryptedModel>> = clients
            .par_iter()
            .enumerate()
            .map(|(k, c)| -> Result<Option<EncryptedModel>> {
                let idx = index(round as u64, k as u64, 0);
                if stream(cfg.seed, Stream::Dropout, idx).gen::<f64>() < cfg.dropout_prob {
                    return Ok(None);
                }
                let behavior = if c.malicious && poisoned {
                    Behavior::Malicious {
                        attack: &attack,
                        trigger: &c.trigger,
                    }
                } else {
                    Behavior::Honest
                };
                let train_seed = stream(cfg.seed, Stream::ClientTrain, idx).gen::<u64>();
                let model = train_local(&c.data, &g_prev, &behavior, &train_cfg, train_seed)?;
                let offset = generate_offset(&model.weights, cfg.f_s_range, &mut stream(cfg.seed, Stream::ClientOffset, idx))?;
                let enc = encrypt_update(
                    &model.weights,
                    &offset,
                    &session.ctx,
                    &session.keys.public_key,
                    &mut stream(cfg.seed, Stream::ClientEncrypt, idx),
                )?;
                Ok(Some(enc))
            })
            .collect::<Result<Vec<_>>>()?;

        let mut submitted = BTreeSet::new();
        for (c, sub) in clients.iter().zip(&submissions) {
            if let Some(m) = sub {
                gateway.model_process(&session_id, m, &c.identity.client_id)?;
                submitted.insert(c.identity.client_id.clone());
            }
        }
        debug!("round {round}: {} submissions", submitted.len());

        let mut selected = BTreeSet::new();
        let mut flagged = BTreeSet::new();
        let mut reward = 0.0;
        let global = if submitted.is_empty() {
            warn!("round {round}: every client dropped out, keeping the previous global");
            gateway.carry_forward(&session_id)?
        } else {
            let groups = if cfg.defense {
                gateway.analyze_round(&session_id)?;
                defender.poisoning_defense(&session_id, round)?
            } else {
                defender.accept_all(&session_id, round)?
            };
            let owner = |model_id: &String| {
                ledger
                    .read()
                    .expect("ledger poisoned")
                    .model_owner(model_id)
                    .map(str::to_string)
            };
            selected = groups.benign_ids.iter().filter_map(owner).collect();
            flagged = groups.malicious_ids.iter().filter_map(owner).collect();
            reward = defender.training_reward(&session_id, round)?;
            match gateway.private_aggregate(&session_id) {
                Ok(g) => g,
                Err(ProtocolError::PrivacyAnomaly(batch)) => {
                    warn!("round {round}: aggregation of batch {batch} refused, keeping the previous global");
                    gateway.carry_forward(&session_id)?
                }
                Err(e) => return Err(e.into()),
            }
        };

        let (ma, ba) = evaluate_model(&global.global_weights, &task.test)
            .ok_or_else(|| Error::Output("empty test set".into()))?;
        let r_c = defender.contract_reward_query(&session_id)?;
        let row = round_row(
            round,
            ma,
            ba,
            &submitted,
            &selected,
            &flagged,
            &truth.malicious_in(round),
            reward,
            r_c,
        );
        info!(
            "round {round}: MA={:.4} BA={:.4} TPR={:.2} TNR={:.2} selected {}/{}",
            row.ma, row.ba, row.tpr, row.tnr, row.n_selected, row.n_submitted
        );
        metrics.push(row);
    }

    Ok(ScenarioOutcome {
        config: cfg.clone(),
        session_id,
        metrics,
        ledger,
        truth,
        clients: clients.into_iter().map(|c| c.identity).collect(),
        task,
    })
}
