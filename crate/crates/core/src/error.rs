use thiserror::Error;

use crate::clients::ClientError;
use crate::density::DensityError;
use crate::harness::ConfigError;
use crate::ledger::LedgerError;
use crate::oracle::OracleError;

/// Failures of the two contracts.
#[derive(Debug, Error)]
pub enum ProtocolError {
    #[error(transparent)]
    Ledger(#[from] LedgerError),
    #[error(transparent)]
    Oracle(#[from] OracleError),
    #[error(transparent)]
    He(#[from] ckks::HeError),
    #[error(transparent)]
    Density(#[from] DensityError),
    #[error("unknown session {0}")]
    UnknownSession(String),
    #[error("invalid session parameters: {0}")]
    InvalidSession(String),
    #[error("client {0} is not registered")]
    UnregisteredClient(String),
    #[error("expected {expected} chunk ciphers, got {got}")]
    ChunkCount { expected: usize, got: usize },
    #[error("session {0} has completed all rounds")]
    SessionFinished(String),
    #[error("decryption refused for batch {0} (privacy anomaly recorded)")]
    PrivacyAnomaly(String),
    #[error("no models selected for aggregation")]
    EmptySelection,
    #[error("unexpected decryption result: {0}")]
    UnexpectedResult(String),
    #[error("no global model recorded for session {0}")]
    MissingGlobal(String),
    #[error("no submissions for session {0} round {1}")]
    NoSubmissions(String, u32),
    #[error("malformed message: {0}")]
    Wire(String),
}

/// Top-level error for scenario runs and the command line.
#[derive(Debug, Error)]
pub enum Error {
    #[error(transparent)]
    Protocol(#[from] ProtocolError),
    #[error(transparent)]
    Client(#[from] ClientError),
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error(transparent)]
    Ledger(#[from] LedgerError),
    #[error(transparent)]
    Oracle(#[from] OracleError),
    #[error(transparent)]
    He(#[from] ckks::HeError),
    #[error("output error: {0}")]
    Output(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl Error {
    /// Short machine-readable category for the command line.
    pub fn code(&self) -> &'static str {
        match self {
            Error::Protocol(_) => "protocol",
            Error::Client(_) => "client",
            Error::Config(_) => "config",
            Error::Ledger(_) => "ledger",
            Error::Oracle(_) => "oracle",
            Error::He(_) => "he",
            Error::Output(_) | Error::Io(_) => "io",
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
