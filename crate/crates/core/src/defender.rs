//! The Defender contract: sole holder of the session secret key.
//!
//! It decrypts only what passes the release rules (slot-constant sums, or
//! aggregates of at least two offset-masked models), records a privacy
//! penalty otherwise, splits distance scores into benign and malicious groups,
//! and computes both rewards.

use std::collections::HashMap;
use std::sync::{Arc, Mutex, RwLock};

use ckks::{Ciphertext, CkksContext, EvaluationKeys, HeParams, SecretKey};
use log::{debug, warn};

use crate::density::{split_scores, DEFAULT_RESOLUTION};
use crate::error::ProtocolError;
use crate::ledger::{Filter, GroupTx, PrivacyTx, RewardTx, SharedLedger, Transaction, TxType};
use crate::oracle::{Capability, KeyOracle, KeyRecord, Role};
use crate::wire::{Bt2cRequest, Bt2cResponse, DecryptionResult, WireResult};

pub type Result<T> = std::result::Result<T, ProtocolError>;

/// Slot-variation threshold separating sums from model chunks.
pub const VARIATION_TOLERANCE: f64 = 0.05;

/// Magnitude below which a decrypted array is treated as a (near-)zero sum
/// and its variation is measured against this floor instead of its maximum.
pub const NOISE_FLOOR: f64 = 1e-3;

/// Share of the session reward reserved for the contracts.
pub const CONTRACT_SHARE: f64 = 0.1;

/// Operations the Gateway may request; none of them exposes the secret key.
pub trait DecryptionService: Send + Sync {
    fn provision_session(&self, session_id: &str, params: &HeParams, seed: u64) -> Result<EvaluationKeys>;

    /// One request/response exchange in the JSON wire format.
    fn decrypt_batch(&self, request_json: &str) -> Result<String>;
}

/// `|(max - min) / max|`, zero for constant arrays, with the denominator
/// raised to `floor` when the array is that close to zero.
pub fn variation(rho: &[f64], floor: f64) -> f64 {
    if rho.is_empty() {
        return 0.0;
    }
    let max = rho.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let min = rho.iter().cloned().fold(f64::INFINITY, f64::min);
    if max == min {
        return 0.0;
    }
    let denom = if max.abs() < floor {
        max.abs().max(min.abs()).max(floor)
    } else {
        max.abs()
    };
    ((max - min) / denom).abs()
}

/// Release decision for one decrypted array.
#[derive(Debug, Clone, PartialEq)]
pub enum Release {
    Sum(f64),
    Model(Vec<f64>),
    Anomaly,
}

/// Applies the release rules with `offsets` being the plaintext offsets of
/// the `K = offsets.len()` implicated models.
pub fn classify(rho: &[f64], offsets: &[f64], noise_floor: f64) -> Release {
    if variation(rho, noise_floor) <= VARIATION_TOLERANCE {
        return Release::Sum(rho.iter().sum::<f64>() / rho.len().max(1) as f64);
    }
    let k = offsets.len();
    if k > 1 {
        let total: f64 = offsets.iter().sum();
        Release::Model(rho.iter().map(|r| (r - total) / k as f64).collect())
    } else {
        Release::Anomaly
    }
}

/// Penalty value recorded with a new anomaly: `0.1 · R · e^{-(φ+1)/s}`.
pub fn penalty_reward(session_reward: f64, anomalies_before: usize, sessions: usize) -> f64 {
    CONTRACT_SHARE * session_reward * (-((anomalies_before + 1) as f64) / sessions.max(1) as f64).exp()
}

/// Contract reward level after `anomalies` penalties over `sessions` sessions:
/// `0.1 · R · e^{-φ/s}`. Equals [`penalty_reward`] right after an anomaly and
/// recovers toward `0.1 · R` as sessions accumulate.
pub fn contract_reward_level(session_reward: f64, anomalies: usize, sessions: usize) -> f64 {
    CONTRACT_SHARE * session_reward * (-(anomalies as f64) / sessions.max(1) as f64).exp()
}

struct SessionSlot {
    ctx: Arc<CkksContext>,
    lock: Mutex<()>,
}

pub struct Defender {
    ledger: SharedLedger,
    keys: KeyOracle,
    capability: Capability,
    sessions: RwLock<HashMap<String, Arc<SessionSlot>>>,
    noise_floor: f64,
    resolution: usize,
}

impl Defender {
    pub fn new(ledger: SharedLedger, keys: KeyOracle) -> Self {
        Defender {
            ledger,
            keys,
            capability: Capability::issue(Role::Defender),
            sessions: RwLock::new(HashMap::new()),
            noise_floor: NOISE_FLOOR,
            resolution: DEFAULT_RESOLUTION,
        }
    }

    pub fn capability(&self) -> &Capability {
        &self.capability
    }

    fn slot(&self, session_id: &str) -> Result<Arc<SessionSlot>> {
        self.sessions
            .read()
            .expect("session map poisoned")
            .get(session_id)
            .cloned()
            .ok_or_else(|| ProtocolError::UnknownSession(session_id.to_string()))
    }

    fn secret_key(&self, session_id: &str) -> Result<SecretKey> {
        let rec = self.keys.load_key(&self.capability, session_id)?;
        Ok(SecretKey::from_bytes(&rec.secret_key)?)
    }

    fn session_reward(&self, session_id: &str) -> Result<(f64, u32)> {
        let ledger = self.ledger.read().expect("ledger poisoned");
        let init = ledger
            .session(session_id)
            .ok_or_else(|| ProtocolError::UnknownSession(session_id.to_string()))?;
        Ok((init.session_reward, init.total_rounds))
    }

    /// Offsets (slot mean of each decrypted offset cipher) of the models the
    /// current round implicates: the selected group once a split exists,
    /// every submission of the round before that.
    fn implicated_offsets(&self, session_id: &str, ctx: &CkksContext, sk: &SecretKey) -> Result<Vec<f64>> {
        let ciphers: Vec<String> = {
            let ledger = self.ledger.read().expect("ledger poisoned");
            let Some(round) = ledger.current_round(session_id) else {
                return Ok(Vec::new());
            };
            let stored = ledger.storage_txs(session_id, round);
            match ledger.group_tx(session_id, round) {
                Some(g) => stored
                    .iter()
                    .filter(|t| g.benign_ids.contains(&t.model_id))
                    .map(|t| t.offset_cipher.clone())
                    .collect(),
                None => stored.iter().map(|t| t.offset_cipher.clone()).collect(),
            }
        };
        ciphers
            .iter()
            .map(|b64| {
                let ct = Ciphertext::from_base64(b64)?;
                let slots = ctx.decrypt(&ct, sk)?;
                Ok(slots.iter().sum::<f64>() / slots.len() as f64)
            })
            .collect()
    }

    /// Decrypts a batch under the release rules. If any cipher would reveal a
    /// single model, a penalty is recorded and the whole batch comes back empty.
    pub fn secure_decryption(&self, session_id: &str, ciphers: &[Ciphertext]) -> Result<Vec<DecryptionResult>> {
        let slot = self.slot(session_id)?;
        let _serial = slot.lock.lock().expect("session lock poisoned");
        let sk = self.secret_key(session_id)?;
        let mut offsets: Option<Vec<f64>> = None;
        let mut out = Vec::with_capacity(ciphers.len());
        let mut anomaly = false;
        for ct in ciphers {
            let rho = slot.ctx.decrypt(ct, &sk)?;
            let release = if variation(&rho, self.noise_floor) <= VARIATION_TOLERANCE {
                classify(&rho, &[], self.noise_floor)
            } else {
                if offsets.is_none() {
                    offsets = Some(self.implicated_offsets(session_id, &slot.ctx, &sk)?);
                }
                classify(&rho, offsets.as_deref().unwrap_or(&[]), self.noise_floor)
            };
            match release {
                Release::Sum(v) => out.push(DecryptionResult::Sum(v)),
                Release::Model(v) => out.push(DecryptionResult::Model(v)),
                Release::Anomaly => {
                    anomaly = true;
                    break;
                }
            }
        }
        if anomaly {
            let r_c = self.record_anomaly(session_id)?;
            warn!("session {session_id}: single-model decryption refused, contract reward now {r_c:.6}");
            return Ok(vec![DecryptionResult::Empty; ciphers.len()]);
        }
        Ok(out)
    }

    fn record_anomaly(&self, session_id: &str) -> Result<f64> {
        let mut ledger = self.ledger.write().expect("ledger poisoned");
        let r = ledger
            .session(session_id)
            .ok_or_else(|| ProtocolError::UnknownSession(session_id.to_string()))?
            .session_reward;
        let phi = ledger.count(TxType::TT4);
        let s = ledger.count(TxType::TT1);
        let r_c = penalty_reward(r, phi, s);
        ledger.append(Transaction::TT4(PrivacyTx {
            session_id: session_id.to_string(),
            contract_reward: r_c,
        }))?;
        Ok(r_c)
    }

    /// Groups the round's distance scores and records the split.
    pub fn poisoning_defense(&self, session_id: &str, round: u32) -> Result<GroupTx> {
        let (ids, scores) = self.round_scores(session_id, round)?;
        let groups = split_scores(&scores, self.resolution)?;
        debug!("session {session_id} round {round}: {} score groups", groups.len());
        let mut benign = Vec::new();
        let mut malicious = Vec::new();
        for (g, members) in groups.iter().enumerate() {
            for &i in members {
                if g == 0 {
                    benign.push(ids[i].clone());
                } else {
                    malicious.push(ids[i].clone());
                }
            }
        }
        self.commit_groups(session_id, round, benign, malicious)
    }

    /// Records every submission of the round as benign (defense disabled).
    pub fn accept_all(&self, session_id: &str, round: u32) -> Result<GroupTx> {
        let ids: Vec<String> = {
            let ledger = self.ledger.read().expect("ledger poisoned");
            ledger.storage_txs(session_id, round).iter().map(|t| t.model_id.clone()).collect()
        };
        if ids.is_empty() {
            return Err(ProtocolError::NoSubmissions(session_id.to_string(), round));
        }
        self.commit_groups(session_id, round, ids, Vec::new())
    }

    fn commit_groups(&self, session_id: &str, round: u32, benign: Vec<String>, malicious: Vec<String>) -> Result<GroupTx> {
        let tx = GroupTx {
            session_id: session_id.to_string(),
            round,
            benign_ids: benign,
            malicious_ids: malicious,
        };
        self.ledger
            .write()
            .expect("ledger poisoned")
            .append(Transaction::TT5(tx.clone()))?;
        Ok(tx)
    }

    /// Model ids and scores of the round, in submission order.
    fn round_scores(&self, session_id: &str, round: u32) -> Result<(Vec<String>, Vec<f64>)> {
        let ledger = self.ledger.read().expect("ledger poisoned");
        if ledger.session(session_id).is_none() {
            return Err(ProtocolError::UnknownSession(session_id.to_string()));
        }
        let scores: HashMap<String, f64> = ledger
            .query(&Filter::of(TxType::TT3).session(session_id).round(round))
            .into_iter()
            .filter_map(|tx| match tx {
                Transaction::TT3(s) => Some((s.model_id.clone(), s.score)),
                _ => None,
            })
            .collect();
        let mut ids = Vec::new();
        let mut values = Vec::new();
        for t in ledger.storage_txs(session_id, round) {
            let score = scores.get(&t.model_id).ok_or_else(|| {
                ProtocolError::UnexpectedResult(format!("model {} has no distance score", t.model_id))
            })?;
            ids.push(t.model_id.clone());
            values.push(*score);
        }
        if ids.is_empty() {
            return Err(ProtocolError::NoSubmissions(session_id.to_string(), round));
        }
        Ok((ids, values))
    }

    /// `R_τ = (R - R_C) / (T · |g_1|)`, recorded for the round. Returns 0
    /// without recording anything if the benign group is empty.
    pub fn training_reward(&self, session_id: &str, round: u32) -> Result<f64> {
        let (r, t) = self.session_reward(session_id)?;
        let r_c = self.contract_reward_query(session_id)?;
        let benign = {
            let ledger = self.ledger.read().expect("ledger poisoned");
            ledger
                .group_tx(session_id, round)
                .map(|g| g.benign_ids.len())
                .ok_or_else(|| ProtocolError::UnexpectedResult(format!("no group split for round {round}")))?
        };
        if benign == 0 {
            return Ok(0.0);
        }
        let r_tau = training_reward_value(r, r_c, t, benign);
        self.ledger
            .write()
            .expect("ledger poisoned")
            .append(Transaction::TT6(RewardTx {
                session_id: session_id.to_string(),
                round,
                training_reward: r_tau,
            }))?;
        Ok(r_tau)
    }

    /// Latest penalty-adjusted contract reward of the session, `0.1 · R` if none.
    pub fn contract_reward_query(&self, session_id: &str) -> Result<f64> {
        let ledger = self.ledger.read().expect("ledger poisoned");
        contract_reward_from(&ledger, session_id)
    }
}

/// Contract reward of a session as recorded in `ledger`.
pub fn contract_reward_from(ledger: &crate::ledger::Ledger, session_id: &str) -> Result<f64> {
    let init = ledger
        .session(session_id)
        .ok_or_else(|| ProtocolError::UnknownSession(session_id.to_string()))?;
    Ok(match ledger.latest(&Filter::of(TxType::TT4).session(session_id)) {
        Some(Transaction::TT4(p)) => p.contract_reward,
        _ => CONTRACT_SHARE * init.session_reward,
    })
}

pub fn training_reward_value(session_reward: f64, contract_reward: f64, rounds: u32, benign: usize) -> f64 {
    ((session_reward - contract_reward) / (rounds as f64 * benign as f64)).max(0.0)
}

impl DecryptionService for Defender {
    fn provision_session(&self, session_id: &str, params: &HeParams, seed: u64) -> Result<EvaluationKeys> {
        let ctx = CkksContext::new(params.clone())?;
        let material = ctx.keygen(seed);
        self.keys.store_key(
            &self.capability,
            &KeyRecord {
                session_id: session_id.to_string(),
                secret_key: material.secret_key.to_bytes(),
            },
        )?;
        self.sessions.write().expect("session map poisoned").insert(
            session_id.to_string(),
            Arc::new(SessionSlot {
                ctx: Arc::new(ctx),
                lock: Mutex::new(()),
            }),
        );
        Ok(material.evaluation_keys())
    }

    fn decrypt_batch(&self, request_json: &str) -> Result<String> {
        let req: Bt2cRequest =
            serde_json::from_str(request_json).map_err(|e| ProtocolError::Wire(e.to_string()))?;
        let ciphers = req
            .ciphers
            .iter()
            .map(|c| Ciphertext::from_base64(&c.cipher))
            .collect::<ckks::Result<Vec<_>>>()?;
        let results = self.secure_decryption(&req.session_id, &ciphers)?;
        let resp = Bt2cResponse {
            batch_id: req.batch_id,
            results: req
                .ciphers
                .into_iter()
                .zip(results)
                .map(|(c, r)| WireResult::new(c.handle, r))
                .collect(),
        };
        serde_json::to_string(&resp).map_err(|e| ProtocolError::Wire(e.to_string()))
    }
}
