//! The Gateway contract: stores encrypted submissions, computes encrypted
//! cosine distances and aggregates, and asks the Defender to open only the
//! reduced results. It never holds a secret key.

use std::collections::HashMap;
use std::sync::{Arc, RwLock};

use ckks::{cipher_count, Ciphertext, CkksContext, EvaluationKeys, HeParams};
use log::{debug, info};
use rand::seq::SliceRandom;
use rand::Rng;
use rand_chacha::ChaCha20Rng;
use rayon::prelude::*;
use sha2::{Digest, Sha256};

use crate::clients::EncryptedModel;
use crate::defender::DecryptionService;
use crate::error::ProtocolError;
use crate::ledger::{EncryptionContext, GlobalTx, InitTx, ScoreTx, SharedLedger, StorageTx, Transaction, TxType};
use crate::oracle::{Capability, ModelDocument, ModelOracle, Role};
use crate::rng::{index, stream, Stream};
use crate::wire::{Bt2cRequest, Bt2cResponse, DecryptionResult, HandledCipher};

pub type Result<T> = std::result::Result<T, ProtocolError>;

/// Public per-session material: everything a client needs to submit.
pub struct GatewaySession {
    pub session_id: String,
    pub ctx: Arc<CkksContext>,
    pub keys: EvaluationKeys,
    pub param_count: usize,
    pub total_rounds: u32,
    tag: u64,
}

impl GatewaySession {
    pub fn chunk_count(&self) -> usize {
        cipher_count(self.param_count, self.ctx.params().poly_degree)
    }

    /// Logical (unpadded) length of chunk `j`.
    pub fn chunk_len(&self, j: usize) -> usize {
        let slots = self.ctx.slot_count();
        self.param_count.saturating_sub(j * slots).min(slots)
    }
}

/// Shuffled batch; the permutation stays with the Gateway.
pub struct ShuffledBatch {
    pub handles: Vec<String>,
    pub ciphers: Vec<Ciphertext>,
    /// `permutation[k]` is the original index of the cipher at position `k`.
    permutation: Vec<usize>,
}

impl ShuffledBatch {
    pub fn new(ciphers: Vec<Ciphertext>, rng: &mut ChaCha20Rng) -> Self {
        let n = ciphers.len();
        let mut permutation: Vec<usize> = (0..n).collect();
        permutation.shuffle(rng);
        let handles: Vec<String> = (0..n).map(|_| format!("{:016x}", rng.gen::<u64>())).collect();
        let mut slots: Vec<Option<Ciphertext>> = ciphers.into_iter().map(Some).collect();
        let ciphers = permutation
            .iter()
            .map(|&i| slots[i].take().expect("permutation is a bijection"))
            .collect();
        ShuffledBatch {
            handles,
            ciphers,
            permutation,
        }
    }

    /// Puts per-position values back in original order.
    pub fn unshuffle<T: Clone>(&self, shuffled: &[T]) -> Vec<T> {
        let mut out: Vec<Option<T>> = vec![None; shuffled.len()];
        for (k, &i) in self.permutation.iter().enumerate() {
            out[i] = Some(shuffled[k].clone());
        }
        out.into_iter().map(|v| v.expect("bijection")).collect()
    }
}

pub struct Gateway {
    ledger: SharedLedger,
    models: ModelOracle,
    capability: Capability,
    defender: Arc<dyn DecryptionService>,
    sessions: RwLock<HashMap<String, Arc<GatewaySession>>>,
    seed: u64,
}

fn tag_of(session_id: &str) -> u64 {
    let d = Sha256::digest(session_id.as_bytes());
    u64::from_le_bytes(d[..8].try_into().expect("8 bytes")) & 0xFFFF
}

fn round_to_u64(round: u32) -> u64 {
    round as u64 & 0xFFFF
}

impl Gateway {
    pub fn new(ledger: SharedLedger, models: ModelOracle, defender: Arc<dyn DecryptionService>, seed: u64) -> Self {
        Gateway {
            ledger,
            models,
            capability: Capability::issue(Role::Gateway),
            defender,
            sessions: RwLock::new(HashMap::new()),
            seed,
        }
    }

    pub fn capability(&self) -> &Capability {
        &self.capability
    }

    pub fn session(&self, session_id: &str) -> Result<Arc<GatewaySession>> {
        self.sessions
            .read()
            .expect("session map poisoned")
            .get(session_id)
            .cloned()
            .ok_or_else(|| ProtocolError::UnknownSession(session_id.to_string()))
    }

    /// Opens a session: the Defender provisions keys, TT1 is recorded, and the
    /// owner's initial global model is published as the round-0 global.
    pub fn init_session(
        &self,
        owner_id: &str,
        total_rounds: u32,
        session_reward: f64,
        params: &HeParams,
        initial_global: &[f64],
        key_seed: u64,
    ) -> Result<String> {
        if total_rounds < 1 {
            return Err(ProtocolError::InvalidSession("total rounds must be at least 1".into()));
        }
        if !(session_reward.is_finite() && session_reward > 0.0) {
            return Err(ProtocolError::InvalidSession(format!("session reward {session_reward}")));
        }
        if initial_global.len() < 2 || initial_global.iter().any(|w| !w.is_finite()) {
            return Err(ProtocolError::InvalidSession("initial global model".into()));
        }
        params.validate()?;
        let session_id = {
            let ledger = self.ledger.read().expect("ledger poisoned");
            format!("session-{:04}", ledger.count(TxType::TT1) + 1)
        };
        let keys = self.defender.provision_session(&session_id, params, key_seed)?;
        let ctx = Arc::new(CkksContext::new(params.clone())?);
        let public_key_ref = hex::encode(Sha256::digest(keys.public_key.to_bytes()));
        self.ledger
            .write()
            .expect("ledger poisoned")
            .append(Transaction::TT1(InitTx {
                session_id: session_id.clone(),
                owner_id: owner_id.to_string(),
                public_key_ref,
                encryption_context: EncryptionContext {
                    poly_degree: params.poly_degree,
                },
                total_rounds,
                session_reward,
            }))?;
        let session = Arc::new(GatewaySession {
            session_id: session_id.clone(),
            ctx,
            keys,
            param_count: initial_global.len(),
            total_rounds,
            tag: tag_of(&session_id),
        });
        self.sessions
            .write()
            .expect("session map poisoned")
            .insert(session_id.clone(), session.clone());
        self.publish_global(&session, 0, initial_global.to_vec())?;
        info!("opened {session_id}: {total_rounds} rounds, reward {session_reward}");
        Ok(session_id)
    }

    /// Round currently accepting submissions (one past the latest global).
    pub fn current_round(&self, session_id: &str) -> Result<u32> {
        let session = self.session(session_id)?;
        let ledger = self.ledger.read().expect("ledger poisoned");
        let last = ledger
            .previous_global(session_id, u32::MAX)
            .map(|g| g.round)
            .ok_or_else(|| ProtocolError::MissingGlobal(session_id.to_string()))?;
        if last >= session.total_rounds {
            return Err(ProtocolError::SessionFinished(session_id.to_string()));
        }
        Ok(last + 1)
    }

    /// Plaintext weights of the latest global model.
    pub fn latest_global(&self, session_id: &str) -> Result<GlobalTx> {
        let ledger = self.ledger.read().expect("ledger poisoned");
        ledger
            .previous_global(session_id, u32::MAX)
            .cloned()
            .ok_or_else(|| ProtocolError::MissingGlobal(session_id.to_string()))
    }

    /// Accepts an encrypted submission into Oracle A and records it.
    pub fn model_process(&self, session_id: &str, m: &EncryptedModel, client_id: &str) -> Result<String> {
        let session = self.session(session_id)?;
        let round = self.current_round(session_id)?;
        if !self.ledger.read().expect("ledger poisoned").is_registered(client_id) {
            return Err(ProtocolError::UnregisteredClient(client_id.to_string()));
        }
        let expected = session.chunk_count();
        if m.chunks.len() != expected {
            return Err(ProtocolError::ChunkCount {
                expected,
                got: m.chunks.len(),
            });
        }
        let top = session.ctx.params().max_level();
        let n = session.ctx.params().poly_degree;
        for ct in m.chunks.iter().chain(std::iter::once(&m.offset_cipher)) {
            if ct.poly_degree() != n || ct.level() != top {
                return Err(ProtocolError::UnexpectedResult(
                    "submission not encrypted under the session context".into(),
                ));
            }
        }
        let digest = Sha256::digest(format!("{session_id}|{round}|{client_id}").as_bytes());
        let model_id = format!("m{:03}-{}", round, hex::encode(&digest[..6]));
        let offset_cipher = m.offset_cipher.to_base64();
        self.models.store_model(
            &self.capability,
            &ModelDocument {
                model_id: model_id.clone(),
                client_id: client_id.to_string(),
                cipher_texts: m.chunks.iter().map(Ciphertext::to_base64).collect(),
                offset_cipher: offset_cipher.clone(),
            },
        )?;
        self.ledger
            .write()
            .expect("ledger poisoned")
            .append(Transaction::TT2(StorageTx {
                session_id: session_id.to_string(),
                round,
                client_id: client_id.to_string(),
                model_id: model_id.clone(),
                offset_cipher,
            }))?;
        Ok(model_id)
    }

    fn load_model(&self, model_id: &str) -> Result<(Vec<Ciphertext>, Ciphertext)> {
        let doc = self.models.load_model(&self.capability, model_id)?;
        let chunks = doc
            .cipher_texts
            .iter()
            .map(|c| Ciphertext::from_base64(c))
            .collect::<ckks::Result<Vec<_>>>()?;
        Ok((chunks, Ciphertext::from_base64(&doc.offset_cipher)?))
    }

    fn previous_encrypted_global(&self, session_id: &str, round: u32) -> Result<Vec<Ciphertext>> {
        let ledger = self.ledger.read().expect("ledger poisoned");
        let g = ledger
            .previous_global(session_id, round)
            .ok_or_else(|| ProtocolError::MissingGlobal(session_id.to_string()))?;
        Ok(g.encrypted_global
            .iter()
            .map(|c| Ciphertext::from_base64(c))
            .collect::<ckks::Result<Vec<_>>>()?)
    }

    /// Position of `model_id` among the round's submissions.
    fn model_position(&self, session_id: &str, round: u32, model_id: &str) -> Result<usize> {
        let ledger = self.ledger.read().expect("ledger poisoned");
        ledger
            .storage_txs(session_id, round)
            .iter()
            .position(|t| t.model_id == model_id)
            .ok_or_else(|| ProtocolError::UnexpectedResult(format!("model {model_id} not submitted in round {round}")))
    }

    /// One shuffled request/response exchange with the Defender.
    fn bt2c(&self, session_id: &str, batch_id: String, ciphers: Vec<Ciphertext>, rng: &mut ChaCha20Rng) -> Result<Vec<DecryptionResult>> {
        let batch = ShuffledBatch::new(ciphers, rng);
        let req = Bt2cRequest {
            session_id: session_id.to_string(),
            batch_id: batch_id.clone(),
            ciphers: batch
                .handles
                .iter()
                .zip(&batch.ciphers)
                .map(|(h, c)| HandledCipher {
                    handle: h.clone(),
                    cipher: c.to_base64(),
                })
                .collect(),
        };
        let json = serde_json::to_string(&req).map_err(|e| ProtocolError::Wire(e.to_string()))?;
        let reply = self.defender.decrypt_batch(&json)?;
        let resp: Bt2cResponse = serde_json::from_str(&reply).map_err(|e| ProtocolError::Wire(e.to_string()))?;
        if resp.batch_id != batch_id || resp.results.len() != batch.handles.len() {
            return Err(ProtocolError::Wire(format!("response does not match batch {batch_id}")));
        }
        let by_handle: HashMap<&str, DecryptionResult> = resp
            .results
            .iter()
            .map(|r| {
                r.result()
                    .map(|v| (r.handle.as_str(), v))
                    .ok_or_else(|| ProtocolError::Wire(format!("inconsistent result for {}", r.handle)))
            })
            .collect::<Result<_>>()?;
        let shuffled = batch
            .handles
            .iter()
            .map(|h| {
                by_handle
                    .get(h.as_str())
                    .cloned()
                    .ok_or_else(|| ProtocolError::Wire(format!("missing handle {h}")))
            })
            .collect::<Result<Vec<_>>>()?;
        if shuffled.iter().any(|r| matches!(r, DecryptionResult::Empty)) {
            return Err(ProtocolError::PrivacyAnomaly(batch_id));
        }
        Ok(batch.unshuffle(&shuffled))
    }

    fn sum_of(&self, session_id: &str, batch_id: String, ciphers: Vec<Ciphertext>, rng: &mut ChaCha20Rng) -> Result<f64> {
        let results = self.bt2c(session_id, batch_id, ciphers, rng)?;
        results
            .iter()
            .map(|r| match r {
                DecryptionResult::Sum(v) => Ok(*v),
                other => Err(ProtocolError::UnexpectedResult(format!("expected a sum, got {:?}", other.kind()))),
            })
            .sum()
    }

    /// Encrypted cosine distance between the previous global and a submitted
    /// model, both shifted by the model's offset. Does not touch the ledger.
    pub fn compute_cosine_distance(&self, session_id: &str, model_id: &str) -> Result<f64> {
        let session = self.session(session_id)?;
        let round = self.current_round(session_id)?;
        let position = self.model_position(session_id, round, model_id)? as u64;
        let (w, delta) = self.load_model(model_id)?;
        let g = self.previous_encrypted_global(session_id, round)?;
        let ctx = &session.ctx;
        let keys = &session.keys;
        let slots = ctx.slot_count();

        let mut z_d = Vec::with_capacity(w.len());
        let mut z_g = Vec::with_capacity(w.len());
        let mut z_l = Vec::with_capacity(w.len());
        for (j, (wj, gj)) in w.iter().zip(&g).enumerate() {
            let shifted = ctx.add(gj, &delta)?;
            z_d.push(ctx.sum_slots(&ctx.multiply(&shifted, wj, &keys.relin_key)?, &keys.galois_keys)?);
            // padding slots of G* + δ* hold δ; mask them before squaring
            let len = session.chunk_len(j);
            let shifted = if len < slots {
                let mask: Vec<f64> = (0..slots).map(|i| if i < len { 1.0 } else { 0.0 }).collect();
                let q = ctx.level_modulus(shifted.level()) as f64;
                ctx.multiply_plain(&shifted, &mask, q)?
            } else {
                shifted
            };
            z_g.push(ctx.sum_slots(&ctx.multiply(&shifted, &shifted, &keys.relin_key)?, &keys.galois_keys)?);
            z_l.push(ctx.sum_slots(&ctx.multiply(wj, wj, &keys.relin_key)?, &keys.galois_keys)?);
        }
        let mut sums = [0.0; 3];
        for (sub, batch) in [z_d, z_g, z_l].into_iter().enumerate() {
            let mut rng = stream(
                self.seed,
                Stream::Shuffle,
                index(session.tag, (round_to_u64(round) << 8) | position, sub as u64),
            );
            sums[sub] = self.sum_of(session_id, format!("{model_id}-d{sub}"), batch, &mut rng)?;
        }
        let [x_d, x_g, x_l] = sums;
        debug!("{model_id}: X_D={x_d:.6} X_G={x_g:.6} X_L={x_l:.6}");
        Ok(cosine_score(x_d, x_g, x_l))
    }

    /// Computes and records the distance score of one model.
    pub fn private_cosine_distance(&self, session_id: &str, model_id: &str) -> Result<f64> {
        let score = self.compute_cosine_distance(session_id, model_id)?;
        let round = self.current_round(session_id)?;
        self.record_score(session_id, round, model_id, score)?;
        Ok(score)
    }

    fn record_score(&self, session_id: &str, round: u32, model_id: &str, score: f64) -> Result<()> {
        self.ledger
            .write()
            .expect("ledger poisoned")
            .append(Transaction::TT3(ScoreTx {
                session_id: session_id.to_string(),
                round,
                model_id: model_id.to_string(),
                score,
            }))?;
        Ok(())
    }

    /// Scores every submission of the current round (in parallel) and
    /// records them in submission order.
    pub fn analyze_round(&self, session_id: &str) -> Result<Vec<(String, f64)>> {
        let round = self.current_round(session_id)?;
        let ids: Vec<String> = {
            let ledger = self.ledger.read().expect("ledger poisoned");
            ledger.storage_txs(session_id, round).iter().map(|t| t.model_id.clone()).collect()
        };
        let scores = ids
            .par_iter()
            .map(|id| self.compute_cosine_distance(session_id, id))
            .collect::<Result<Vec<_>>>()?;
        for (id, &s) in ids.iter().zip(&scores) {
            self.record_score(session_id, round, id, s)?;
        }
        Ok(ids.into_iter().zip(scores).collect())
    }

    /// Sums the selected models chunk-wise under encryption, has the Defender
    /// open the offset-corrected average, and publishes the new global.
    pub fn private_aggregate(&self, session_id: &str) -> Result<GlobalTx> {
        let session = self.session(session_id)?;
        let round = self.current_round(session_id)?;
        let selected = {
            let ledger = self.ledger.read().expect("ledger poisoned");
            ledger
                .group_tx(session_id, round)
                .map(|g| g.benign_ids.clone())
                .ok_or_else(|| ProtocolError::UnexpectedResult(format!("no group split for round {round}")))?
        };
        if selected.is_empty() {
            return Err(ProtocolError::EmptySelection);
        }
        let ctx = &session.ctx;
        let models = selected
            .par_iter()
            .map(|id| self.load_model(id).map(|(chunks, _)| chunks))
            .collect::<Result<Vec<_>>>()?;
        let mut z = models[0].clone();
        for m in &models[1..] {
            for (acc, c) in z.iter_mut().zip(m) {
                *acc = ctx.add(acc, c)?;
            }
        }
        let mut rng = stream(
            self.seed,
            Stream::Shuffle,
            index(session.tag, (round_to_u64(round) << 8) | 0xFF, 0xFF),
        );
        let results = self.bt2c(session_id, format!("{session_id}-r{round}-agg"), z, &mut rng)?;
        let mut weights = Vec::with_capacity(session.param_count);
        for (j, r) in results.iter().enumerate() {
            let len = session.chunk_len(j);
            match r {
                DecryptionResult::Model(v) => weights.extend_from_slice(&v[..len]),
                DecryptionResult::Sum(_) if len == 0 => {}
                other => {
                    return Err(ProtocolError::UnexpectedResult(format!(
                        "aggregate chunk {j} came back as {:?}",
                        other.kind()
                    )))
                }
            }
        }
        self.publish_global(&session, round, weights)
    }

    /// Publishes the previous global again for the current round, used when
    /// a round cannot be aggregated.
    pub fn carry_forward(&self, session_id: &str) -> Result<GlobalTx> {
        let round = self.current_round(session_id)?;
        let prev = {
            let ledger = self.ledger.read().expect("ledger poisoned");
            ledger
                .previous_global(session_id, round)
                .cloned()
                .ok_or_else(|| ProtocolError::MissingGlobal(session_id.to_string()))?
        };
        let tx = GlobalTx {
            round,
            global_id: format!("{session_id}-g{round}"),
            ..prev
        };
        self.ledger
            .write()
            .expect("ledger poisoned")
            .append(Transaction::TT7(tx.clone()))?;
        Ok(tx)
    }

    fn publish_global(&self, session: &GatewaySession, round: u32, weights: Vec<f64>) -> Result<GlobalTx> {
        let ctx = &session.ctx;
        let slots = ctx.slot_count();
        let mut rng = stream(self.seed, Stream::GlobalEncrypt, index(session.tag, round_to_u64(round), 0));
        let encrypted_global = (0..session.chunk_count())
            .map(|j| {
                let lo = (j * slots).min(weights.len());
                let hi = ((j + 1) * slots).min(weights.len());
                ctx.encrypt(&weights[lo..hi], &session.keys.public_key, &mut rng)
                    .map(|c| c.to_base64())
            })
            .collect::<ckks::Result<Vec<_>>>()?;
        let tx = GlobalTx {
            session_id: session.session_id.clone(),
            round,
            global_id: format!("{}-g{round}", session.session_id),
            global_weights: weights,
            encrypted_global,
        };
        self.ledger
            .write()
            .expect("ledger poisoned")
            .append(Transaction::TT7(tx.clone()))?;
        Ok(tx)
    }
}

/// `1 - X_D / (√X_G · √X_L)`, or 1 when either magnitude is (numerically) zero.
pub fn cosine_score(x_d: f64, x_g: f64, x_l: f64) -> f64 {
    if x_g <= 1e-12 || x_l <= 1e-12 {
        return 1.0;
    }
    1.0 - x_d / (x_g.sqrt() * x_l.sqrt())
}
