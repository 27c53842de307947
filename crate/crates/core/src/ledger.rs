//! Append-only, hash-chained transaction log and the membership service.
//!
//! Consensus is not modeled: a single writer appends blocks of one
//! transaction each. Referential checks run before a transaction is
//! committed, so every committed prefix satisfies the schema invariants.

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::io::{BufRead, Write};
use std::sync::{Arc, RwLock};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum LedgerError {
    #[error("unknown session {0}")]
    UnknownSession(String),
    #[error("session {0} already initialized")]
    DuplicateSession(String),
    #[error("model {model_id} has no storage transaction in session {session_id} round {round}")]
    UnknownModel {
        session_id: String,
        round: u32,
        model_id: String,
    },
    #[error("model id {0} already stored")]
    DuplicateModel(String),
    #[error("{kind} already recorded for session {session_id} round {round}")]
    DuplicateRecord {
        kind: TxType,
        session_id: String,
        round: u32,
    },
    #[error("score for model {0} already recorded")]
    DuplicateScore(String),
    #[error("group split does not partition the round's models: {0}")]
    GroupMismatch(String),
    #[error("invalid value: {0}")]
    InvalidValue(String),
    #[error("wallet {0} already registered")]
    DuplicateWallet(String),
    #[error("hash chain broken at height {0}")]
    BrokenChain(u64),
    #[error("line {line}: {source}")]
    Decode {
        line: usize,
        source: serde_json::Error,
    },
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, LedgerError>;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum TxType {
    TT1,
    TT2,
    TT3,
    TT4,
    TT5,
    TT6,
    TT7,
}

impl std::fmt::Display for TxType {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{self:?}")
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EncryptionContext {
    pub poly_degree: usize,
}

/// Session initialization.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InitTx {
    pub session_id: String,
    pub owner_id: String,
    pub public_key_ref: String,
    pub encryption_context: EncryptionContext,
    pub total_rounds: u32,
    pub session_reward: f64,
}

/// One submitted encrypted model.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StorageTx {
    pub session_id: String,
    pub round: u32,
    pub client_id: String,
    pub model_id: String,
    /// base64 canonical ciphertext of the replicated offset
    pub offset_cipher: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScoreTx {
    pub session_id: String,
    pub round: u32,
    pub model_id: String,
    pub score: f64,
}

/// Privacy anomaly with the recomputed contract reward.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PrivacyTx {
    pub session_id: String,
    pub contract_reward: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GroupTx {
    pub session_id: String,
    pub round: u32,
    pub benign_ids: Vec<String>,
    pub malicious_ids: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RewardTx {
    pub session_id: String,
    pub round: u32,
    pub training_reward: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GlobalTx {
    pub session_id: String,
    pub round: u32,
    pub global_id: String,
    pub global_weights: Vec<f64>,
    /// base64 canonical ciphertexts, one per chunk
    pub encrypted_global: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type")]
pub enum Transaction {
    TT1(InitTx),
    TT2(StorageTx),
    TT3(ScoreTx),
    TT4(PrivacyTx),
    TT5(GroupTx),
    TT6(RewardTx),
    TT7(GlobalTx),
}

impl Transaction {
    pub fn tx_type(&self) -> TxType {
        match self {
            Transaction::TT1(_) => TxType::TT1,
            Transaction::TT2(_) => TxType::TT2,
            Transaction::TT3(_) => TxType::TT3,
            Transaction::TT4(_) => TxType::TT4,
            Transaction::TT5(_) => TxType::TT5,
            Transaction::TT6(_) => TxType::TT6,
            Transaction::TT7(_) => TxType::TT7,
        }
    }

    pub fn session_id(&self) -> &str {
        match self {
            Transaction::TT1(t) => &t.session_id,
            Transaction::TT2(t) => &t.session_id,
            Transaction::TT3(t) => &t.session_id,
            Transaction::TT4(t) => &t.session_id,
            Transaction::TT5(t) => &t.session_id,
            Transaction::TT6(t) => &t.session_id,
            Transaction::TT7(t) => &t.session_id,
        }
    }

    /// Round number, for the transaction types that carry one.
    pub fn round(&self) -> Option<u32> {
        match self {
            Transaction::TT1(_) | Transaction::TT4(_) => None,
            Transaction::TT2(t) => Some(t.round),
            Transaction::TT3(t) => Some(t.round),
            Transaction::TT5(t) => Some(t.round),
            Transaction::TT6(t) => Some(t.round),
            Transaction::TT7(t) => Some(t.round),
        }
    }

    /// Field-ordered canonical encoding used for block hashing.
    pub fn canonical_bytes(&self) -> Vec<u8> {
        serde_json::to_vec(self).expect("transactions always serialize")
    }
}

pub type Digest256 = [u8; 32];

#[derive(Debug, Clone, PartialEq)]
pub struct Block {
    pub height: u64,
    pub prev_hash: Digest256,
    pub tx_list: Vec<Transaction>,
    pub hash: Digest256,
}

impl Block {
    pub fn compute_hash(prev_hash: &Digest256, txs: &[Transaction]) -> Digest256 {
        let mut h = Sha256::new();
        h.update(prev_hash);
        for tx in txs {
            let bytes = tx.canonical_bytes();
            h.update((bytes.len() as u64).to_le_bytes());
            h.update(&bytes);
        }
        h.finalize().into()
    }
}

/// Reference to a committed transaction.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct BlockRef {
    pub height: u64,
    pub hash: Digest256,
}

/// Selection criteria for [`Ledger::query`]; `None` matches anything.
#[derive(Debug, Clone, Default)]
pub struct Filter {
    pub tx_type: Option<TxType>,
    pub session_id: Option<String>,
    pub round: Option<u32>,
}

impl Filter {
    pub fn of(tx_type: TxType) -> Self {
        Filter {
            tx_type: Some(tx_type),
            ..Default::default()
        }
    }

    pub fn session(mut self, session_id: &str) -> Self {
        self.session_id = Some(session_id.to_string());
        self
    }

    pub fn round(mut self, round: u32) -> Self {
        self.round = Some(round);
        self
    }

    fn matches(&self, tx: &Transaction) -> bool {
        self.tx_type.is_none_or(|t| tx.tx_type() == t)
            && self.session_id.as_deref().is_none_or(|s| tx.session_id() == s)
            && self.round.is_none_or(|r| tx.round() == Some(r))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Identity {
    pub client_id: String,
    pub wallet: String,
    pub balance: f64,
}

/// Per-round bookkeeping that the referential checks need.
#[derive(Debug, Default, Clone)]
struct RoundIndex {
    models: Vec<String>,
    scored: BTreeSet<String>,
    groups: bool,
    reward: bool,
    global: bool,
}

#[derive(Debug, Default)]
pub struct Ledger {
    blocks: Vec<Block>,
    sessions: BTreeMap<String, InitTx>,
    rounds: HashMap<(String, u32), RoundIndex>,
    model_owner: HashMap<String, String>,
    counts: BTreeMap<TxType, usize>,
    balances: BTreeMap<String, f64>,
    identities: BTreeMap<String, Identity>,
    wallets: HashMap<String, String>,
}

/// Shared handle: one writer at a time, any number of readers.
pub type SharedLedger = Arc<RwLock<Ledger>>;

const GENESIS: Digest256 = [0u8; 32];

impl Ledger {
    pub fn new() -> Self {
        Ledger::default()
    }

    pub fn shared(self) -> SharedLedger {
        Arc::new(RwLock::new(self))
    }

    pub fn height(&self) -> u64 {
        self.blocks.len() as u64
    }

    pub fn blocks(&self) -> &[Block] {
        &self.blocks
    }

    pub fn transactions(&self) -> impl Iterator<Item = &Transaction> {
        self.blocks.iter().flat_map(|b| b.tx_list.iter())
    }

    pub fn session(&self, session_id: &str) -> Option<&InitTx> {
        self.sessions.get(session_id)
    }

    /// Validates and commits `tx` in a new block.
    pub fn append(&mut self, tx: Transaction) -> Result<BlockRef> {
        self.validate(&tx)?;
        self.apply(&tx);
        let prev_hash = self.blocks.last().map_or(GENESIS, |b| b.hash);
        let tx_list = vec![tx];
        let hash = Block::compute_hash(&prev_hash, &tx_list);
        let height = self.blocks.len() as u64;
        self.blocks.push(Block {
            height,
            prev_hash,
            tx_list,
            hash,
        });
        Ok(BlockRef { height, hash })
    }

    fn validate(&self, tx: &Transaction) -> Result<()> {
        let sid = tx.session_id();
        if let Transaction::TT1(t) = tx {
            if self.sessions.contains_key(sid) {
                return Err(LedgerError::DuplicateSession(sid.to_string()));
            }
            if t.total_rounds == 0 {
                return Err(LedgerError::InvalidValue("total_rounds must be >= 1".into()));
            }
            non_negative("session_reward", t.session_reward)?;
            return Ok(());
        }
        if !self.sessions.contains_key(sid) {
            return Err(LedgerError::UnknownSession(sid.to_string()));
        }
        let round_of = |round: u32| self.rounds.get(&(sid.to_string(), round));
        let duplicate = |kind, round| LedgerError::DuplicateRecord {
            kind,
            session_id: sid.to_string(),
            round,
        };
        match tx {
            Transaction::TT1(_) => unreachable!(),
            Transaction::TT2(t) => {
                if self.model_owner.contains_key(&t.model_id) {
                    return Err(LedgerError::DuplicateModel(t.model_id.clone()));
                }
            }
            Transaction::TT3(t) => {
                let idx = round_of(t.round);
                if !idx.is_some_and(|i| i.models.contains(&t.model_id)) {
                    return Err(LedgerError::UnknownModel {
                        session_id: sid.to_string(),
                        round: t.round,
                        model_id: t.model_id.clone(),
                    });
                }
                if idx.is_some_and(|i| i.scored.contains(&t.model_id)) {
                    return Err(LedgerError::DuplicateScore(t.model_id.clone()));
                }
                if !t.score.is_finite() {
                    return Err(LedgerError::InvalidValue(format!("score {}", t.score)));
                }
            }
            Transaction::TT4(t) => non_negative("contract_reward", t.contract_reward)?,
            Transaction::TT5(t) => {
                let idx = round_of(t.round);
                if idx.is_some_and(|i| i.groups) {
                    return Err(duplicate(TxType::TT5, t.round));
                }
                let benign: BTreeSet<&String> = t.benign_ids.iter().collect();
                let malicious: BTreeSet<&String> = t.malicious_ids.iter().collect();
                if benign.len() != t.benign_ids.len() || malicious.len() != t.malicious_ids.len() {
                    return Err(LedgerError::GroupMismatch("repeated model id".into()));
                }
                if benign.intersection(&malicious).next().is_some() {
                    return Err(LedgerError::GroupMismatch("benign and malicious overlap".into()));
                }
                let union: BTreeSet<&String> = benign.union(&malicious).copied().collect();
                let submitted: BTreeSet<&String> =
                    idx.map(|i| i.models.iter().collect()).unwrap_or_default();
                if union != submitted {
                    return Err(LedgerError::GroupMismatch(format!(
                        "{} grouped vs {} submitted",
                        union.len(),
                        submitted.len()
                    )));
                }
            }
            Transaction::TT6(t) => {
                if round_of(t.round).is_some_and(|i| i.reward) {
                    return Err(duplicate(TxType::TT6, t.round));
                }
                if !round_of(t.round).is_some_and(|i| i.groups) {
                    return Err(LedgerError::InvalidValue(format!(
                        "training reward for round {} without a group split",
                        t.round
                    )));
                }
                non_negative("training_reward", t.training_reward)?;
            }
            Transaction::TT7(t) => {
                if round_of(t.round).is_some_and(|i| i.global) {
                    return Err(duplicate(TxType::TT7, t.round));
                }
                if t.global_weights.iter().any(|w| !w.is_finite()) {
                    return Err(LedgerError::InvalidValue("non-finite global weight".into()));
                }
            }
        }
        Ok(())
    }

    fn apply(&mut self, tx: &Transaction) {
        *self.counts.entry(tx.tx_type()).or_default() += 1;
        let sid = tx.session_id().to_string();
        match tx {
            Transaction::TT1(t) => {
                self.sessions.insert(sid, t.clone());
            }
            Transaction::TT2(t) => {
                self.model_owner.insert(t.model_id.clone(), t.client_id.clone());
                self.rounds
                    .entry((sid, t.round))
                    .or_default()
                    .models
                    .push(t.model_id.clone());
            }
            Transaction::TT3(t) => {
                self.rounds
                    .entry((sid, t.round))
                    .or_default()
                    .scored
                    .insert(t.model_id.clone());
            }
            Transaction::TT4(_) => {}
            Transaction::TT5(t) => self.rounds.entry((sid, t.round)).or_default().groups = true,
            Transaction::TT6(t) => {
                self.rounds.entry((sid.clone(), t.round)).or_default().reward = true;
                let benign = self
                    .latest(&Filter::of(TxType::TT5).session(&sid).round(t.round))
                    .and_then(|tx| match tx {
                        Transaction::TT5(g) => Some(g.benign_ids.clone()),
                        _ => None,
                    })
                    .unwrap_or_default();
                for model_id in benign {
                    if let Some(client) = self.model_owner.get(&model_id) {
                        *self.balances.entry(client.clone()).or_default() += t.training_reward;
                    }
                }
            }
            Transaction::TT7(t) => self.rounds.entry((sid, t.round)).or_default().global = true,
        }
    }

    /// Matching transactions in append order.
    pub fn query(&self, filter: &Filter) -> Vec<&Transaction> {
        self.transactions().filter(|tx| filter.matches(tx)).collect()
    }

    pub fn latest(&self, filter: &Filter) -> Option<&Transaction> {
        self.blocks
            .iter()
            .rev()
            .flat_map(|b| b.tx_list.iter().rev())
            .find(|tx| filter.matches(tx))
    }

    /// Number of committed transactions of `tx_type` across all sessions.
    pub fn count(&self, tx_type: TxType) -> usize {
        self.counts.get(&tx_type).copied().unwrap_or(0)
    }

    /// Storage transactions of one round, in submission order.
    pub fn storage_txs(&self, session_id: &str, round: u32) -> Vec<&StorageTx> {
        self.query(&Filter::of(TxType::TT2).session(session_id).round(round))
            .into_iter()
            .filter_map(|tx| match tx {
                Transaction::TT2(t) => Some(t),
                _ => None,
            })
            .collect()
    }

    pub fn group_tx(&self, session_id: &str, round: u32) -> Option<&GroupTx> {
        match self.latest(&Filter::of(TxType::TT5).session(session_id).round(round)) {
            Some(Transaction::TT5(g)) => Some(g),
            _ => None,
        }
    }

    /// Most recent global model of the session committed for a round `< before_round`.
    pub fn previous_global(&self, session_id: &str, before_round: u32) -> Option<&GlobalTx> {
        self.query(&Filter::of(TxType::TT7).session(session_id))
            .into_iter()
            .rev()
            .find_map(|tx| match tx {
                Transaction::TT7(g) if g.round < before_round => Some(g),
                _ => None,
            })
    }

    /// Highest round with a storage transaction in the session.
    pub fn current_round(&self, session_id: &str) -> Option<u32> {
        self.query(&Filter::of(TxType::TT2).session(session_id))
            .into_iter()
            .filter_map(Transaction::round)
            .max()
    }

    pub fn model_owner(&self, model_id: &str) -> Option<&str> {
        self.model_owner.get(model_id).map(String::as_str)
    }

    // ------------------------------------------------------------ membership

    /// Issues a fresh identity for `wallet`.
    pub fn register_client(&mut self, wallet: &str) -> Result<Identity> {
        if self.wallets.contains_key(wallet) {
            return Err(LedgerError::DuplicateWallet(wallet.to_string()));
        }
        let digest = Sha256::digest(format!("msp:{}:{wallet}", self.identities.len()));
        let client_id = format!("client-{}", hex::encode(&digest[..8]));
        let identity = Identity {
            client_id: client_id.clone(),
            wallet: wallet.to_string(),
            balance: 0.0,
        };
        self.wallets.insert(wallet.to_string(), client_id.clone());
        self.identities.insert(client_id, identity.clone());
        Ok(identity)
    }

    pub fn is_registered(&self, client_id: &str) -> bool {
        self.identities.contains_key(client_id)
    }

    /// Current identity with the token balance accumulated from committed rewards.
    pub fn identity(&self, client_id: &str) -> Option<Identity> {
        self.identities.get(client_id).map(|id| Identity {
            balance: self.balance(client_id),
            ..id.clone()
        })
    }

    pub fn balance(&self, client_id: &str) -> f64 {
        self.balances.get(client_id).copied().unwrap_or(0.0)
    }

    // ----------------------------------------------------------- integrity

    /// Recomputes every block hash and link.
    pub fn verify(&self) -> Result<()> {
        verify_blocks(&self.blocks)
    }

    // -------------------------------------------------------------- export

    /// One JSON object per line, one transaction per line, in commit order.
    pub fn export_jsonl<W: Write>(&self, mut out: W) -> Result<()> {
        for tx in self.transactions() {
            serde_json::to_writer(&mut out, tx).map_err(|e| LedgerError::Io(e.into()))?;
            out.write_all(b"\n")?;
        }
        Ok(())
    }

    pub fn export_string(&self) -> String {
        let mut buf = Vec::new();
        self.export_jsonl(&mut buf).expect("writing to memory");
        String::from_utf8(buf).expect("json is utf-8")
    }

    /// Rebuilds a ledger by re-appending every exported transaction.
    pub fn import_jsonl<R: BufRead>(input: R) -> Result<Ledger> {
        let mut ledger = Ledger::new();
        for (i, line) in input.lines().enumerate() {
            let line = line?;
            if line.trim().is_empty() {
                continue;
            }
            let tx: Transaction = serde_json::from_str(&line)
                .map_err(|source| LedgerError::Decode { line: i + 1, source })?;
            ledger.append(tx)?;
        }
        Ok(ledger)
    }
}

pub fn verify_blocks(blocks: &[Block]) -> Result<()> {
    let mut prev = GENESIS;
    for (i, b) in blocks.iter().enumerate() {
        if b.height != i as u64 || b.prev_hash != prev || Block::compute_hash(&prev, &b.tx_list) != b.hash {
            return Err(LedgerError::BrokenChain(i as u64));
        }
        prev = b.hash;
    }
    Ok(())
}

fn non_negative(name: &str, v: f64) -> Result<()> {
    if !(v.is_finite() && v >= 0.0) {
        return Err(LedgerError::InvalidValue(format!("{name} = {v}")));
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn init(session: &str) -> Transaction {
        Transaction::TT1(InitTx {
            session_id: session.into(),
            owner_id: "owner".into(),
            public_key_ref: "pk".into(),
            encryption_context: EncryptionContext { poly_degree: 4096 },
            total_rounds: 10,
            session_reward: 100.0,
        })
    }

    fn store(session: &str, round: u32, client: &str, model: &str) -> Transaction {
        Transaction::TT2(StorageTx {
            session_id: session.into(),
            round,
            client_id: client.into(),
            model_id: model.into(),
            offset_cipher: "AA==".into(),
        })
    }

    fn score(session: &str, round: u32, model: &str, c: f64) -> Transaction {
        Transaction::TT3(ScoreTx {
            session_id: session.into(),
            round,
            model_id: model.into(),
            score: c,
        })
    }

    fn penalty(session: &str, r: f64) -> Transaction {
        Transaction::TT4(PrivacyTx {
            session_id: session.into(),
            contract_reward: r,
        })
    }

    #[test]
    fn init_then_store_are_queryable() {
        let mut l = Ledger::new();
        l.append(init("s1")).unwrap();
        l.append(store("s1", 1, "c1", "m1")).unwrap();
        assert_eq!(l.query(&Filter::of(TxType::TT1)).len(), 1);
        assert_eq!(l.query(&Filter::of(TxType::TT2).session("s1")).len(), 1);
        assert_eq!(l.height(), 2);
        l.verify().unwrap();
    }

    #[test]
    fn dangling_references_are_rejected() {
        let mut l = Ledger::new();
        assert!(matches!(
            l.append(store("nope", 1, "c1", "m1")),
            Err(LedgerError::UnknownSession(_))
        ));
        l.append(init("s1")).unwrap();
        assert!(matches!(
            l.append(score("s1", 1, "m9", 0.1)),
            Err(LedgerError::UnknownModel { .. })
        ));
        l.append(store("s1", 1, "c1", "m1")).unwrap();
        l.append(score("s1", 1, "m1", 0.1)).unwrap();
        assert!(matches!(
            l.append(score("s1", 1, "m1", 0.2)),
            Err(LedgerError::DuplicateScore(_))
        ));
        // nothing half-committed
        assert_eq!(l.count(TxType::TT3), 1);
    }

    #[test]
    fn tampering_breaks_the_chain() {
        let mut l = Ledger::new();
        l.append(init("s1")).unwrap();
        l.append(store("s1", 1, "c1", "m1")).unwrap();
        l.append(score("s1", 1, "m1", 0.25)).unwrap();
        let mut blocks = l.blocks().to_vec();
        verify_blocks(&blocks).unwrap();
        if let Transaction::TT3(s) = &mut blocks[2].tx_list[0] {
            s.score = 0.0;
        }
        assert!(matches!(verify_blocks(&blocks), Err(LedgerError::BrokenChain(2))));
    }

    #[test]
    fn query_orders_and_filters() {
        let mut l = Ledger::new();
        assert!(l.query(&Filter::default()).is_empty());
        l.append(init("s1")).unwrap();
        for m in ["a", "b", "c"] {
            l.append(store("s1", 2, "c1", m)).unwrap();
        }
        for (m, c) in [("b", 0.2), ("a", 0.1), ("c", 0.3)] {
            l.append(score("s1", 2, m, c)).unwrap();
        }
        let scores: Vec<f64> = l
            .query(&Filter::of(TxType::TT3).round(2))
            .into_iter()
            .map(|tx| match tx {
                Transaction::TT3(s) => s.score,
                _ => unreachable!(),
            })
            .collect();
        assert_eq!(scores, vec![0.2, 0.1, 0.3]);
        assert!(l.query(&Filter::of(TxType::TT3).round(1)).is_empty());
    }

    #[test]
    fn counts_are_global_and_monotone() {
        let mut l = Ledger::new();
        assert_eq!(l.count(TxType::TT1), 0);
        let mut last = 0;
        for i in 0..5 {
            l.append(init(&format!("s{i}"))).unwrap();
            assert!(l.count(TxType::TT1) > last);
            last = l.count(TxType::TT1);
        }
        l.append(penalty("s0", 3.0)).unwrap();
        l.append(penalty("s3", 2.0)).unwrap();
        assert_eq!(l.count(TxType::TT1), 5);
        assert_eq!(l.count(TxType::TT4), 2);
        assert_eq!(l.query(&Filter::of(TxType::TT4)).len(), 2);
    }

    #[test]
    fn groups_must_partition_round_models() {
        let mut l = Ledger::new();
        l.append(init("s1")).unwrap();
        l.append(store("s1", 1, "c1", "m1")).unwrap();
        l.append(store("s1", 1, "c2", "m2")).unwrap();
        let group = |b: &[&str], m: &[&str]| {
            Transaction::TT5(GroupTx {
                session_id: "s1".into(),
                round: 1,
                benign_ids: b.iter().map(|s| s.to_string()).collect(),
                malicious_ids: m.iter().map(|s| s.to_string()).collect(),
            })
        };
        assert!(l.append(group(&["m1"], &[])).is_err());
        assert!(l.append(group(&["m1", "m2"], &["m2"])).is_err());
        l.append(group(&["m1"], &["m2"])).unwrap();
        assert!(l.append(group(&["m1"], &["m2"])).is_err());
    }

    #[test]
    fn rewards_credit_benign_clients() {
        let mut l = Ledger::new();
        let a = l.register_client("wallet-a").unwrap();
        let b = l.register_client("wallet-b").unwrap();
        assert_eq!(a.balance, 0.0);
        l.append(init("s1")).unwrap();
        l.append(store("s1", 1, &a.client_id, "m1")).unwrap();
        l.append(store("s1", 1, &b.client_id, "m2")).unwrap();
        l.append(Transaction::TT5(GroupTx {
            session_id: "s1".into(),
            round: 1,
            benign_ids: vec!["m1".into()],
            malicious_ids: vec!["m2".into()],
        }))
        .unwrap();
        l.append(Transaction::TT6(RewardTx {
            session_id: "s1".into(),
            round: 1,
            training_reward: 9.0,
        }))
        .unwrap();
        assert_eq!(l.identity(&a.client_id).unwrap().balance, 9.0);
        assert_eq!(l.balance(&b.client_id), 0.0);
    }

    #[test]
    fn msp_rejects_duplicate_wallets() {
        let mut l = Ledger::new();
        let ids: BTreeSet<String> = (0..30)
            .map(|i| l.register_client(&format!("w{i}")).unwrap().client_id)
            .collect();
        assert_eq!(ids.len(), 30);
        assert!(matches!(
            l.register_client("w3"),
            Err(LedgerError::DuplicateWallet(_))
        ));
    }

    #[test]
    fn export_import_roundtrip() {
        let mut l = Ledger::new();
        l.append(init("s1")).unwrap();
        l.append(store("s1", 1, "c1", "m1")).unwrap();
        l.append(score("s1", 1, "m1", 0.123456789)).unwrap();
        l.append(penalty("s1", 3.6787944117144233)).unwrap();
        let text = l.export_string();
        assert_eq!(text.lines().count(), 4);
        assert!(text.lines().next().unwrap().contains("\"total_rounds\":10"));
        let back = Ledger::import_jsonl(text.as_bytes()).unwrap();
        assert_eq!(back.export_string(), text);
        assert_eq!(back.blocks().last().unwrap().hash, l.blocks().last().unwrap().hash);
    }

    #[test]
    fn rejects_negative_rewards() {
        let mut l = Ledger::new();
        l.append(init("s1")).unwrap();
        assert!(l.append(penalty("s1", -1.0)).is_err());
    }
}
