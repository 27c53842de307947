//! JSON messages exchanged between the two contracts during a decryption round.

use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Bt2cRequest {
    pub session_id: String,
    pub batch_id: String,
    /// `(handle, base64 ciphertext)` pairs in shuffled order.
    pub ciphers: Vec<HandledCipher>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HandledCipher {
    pub handle: String,
    pub cipher: String,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ResultKind {
    Sum,
    Model,
    Empty,
}

/// What the Defender releases for one cipher.
#[derive(Debug, Clone, PartialEq)]
pub enum DecryptionResult {
    Sum(f64),
    Model(Vec<f64>),
    Empty,
}

impl DecryptionResult {
    pub fn kind(&self) -> ResultKind {
        match self {
            DecryptionResult::Sum(_) => ResultKind::Sum,
            DecryptionResult::Model(_) => ResultKind::Model,
            DecryptionResult::Empty => ResultKind::Empty,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Payload {
    Sum(f64),
    Model(Vec<f64>),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WireResult {
    pub handle: String,
    pub kind: ResultKind,
    #[serde(default)]
    pub payload: Option<Payload>,
}

impl WireResult {
    pub fn new(handle: String, result: DecryptionResult) -> Self {
        let kind = result.kind();
        let payload = match result {
            DecryptionResult::Sum(v) => Some(Payload::Sum(v)),
            DecryptionResult::Model(v) => Some(Payload::Model(v)),
            DecryptionResult::Empty => None,
        };
        WireResult { handle, kind, payload }
    }

    /// Reassembles the typed result; `None` when kind and payload disagree.
    pub fn result(&self) -> Option<DecryptionResult> {
        match (self.kind, &self.payload) {
            (ResultKind::Sum, Some(Payload::Sum(v))) => Some(DecryptionResult::Sum(*v)),
            (ResultKind::Model, Some(Payload::Model(v))) => Some(DecryptionResult::Model(v.clone())),
            (ResultKind::Empty, None) => Some(DecryptionResult::Empty),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Bt2cResponse {
    pub batch_id: String,
    pub results: Vec<WireResult>,
}
