//! Storage oracles: one store of encrypted models owned by the Gateway and
//! one store of secret keys owned by the Defender.
//!
//! Every call carries the caller's [`Capability`]; a store refuses any
//! capability whose role differs from its owner.

use std::collections::HashMap;
use std::fs;
use std::path::{Path, PathBuf};
use std::sync::{Arc, RwLock};

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum OracleError {
    #[error("{caller:?} capability cannot access the {owner:?} oracle")]
    AccessDenied { caller: Role, owner: Role },
    #[error("no entry for {0}")]
    NotFound(String),
    #[error("malformed document {id}: {reason}")]
    Malformed { id: String, reason: String },
    #[error("invalid identifier {0:?}")]
    InvalidId(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, OracleError>;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Role {
    Gateway,
    Defender,
}

/// Proof of role carried by a contract instance.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Capability {
    role: Role,
}

impl Capability {
    pub fn issue(role: Role) -> Self {
        Capability { role }
    }

    pub fn role(&self) -> Role {
        self.role
    }
}

/// Document holding one client's encrypted model.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ModelDocument {
    pub model_id: String,
    pub client_id: String,
    pub cipher_texts: Vec<String>,
    pub offset_cipher: String,
}

#[derive(Clone, PartialEq, Eq)]
pub struct KeyRecord {
    pub session_id: String,
    pub secret_key: Vec<u8>,
}

impl std::fmt::Debug for KeyRecord {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("KeyRecord")
            .field("session_id", &self.session_id)
            .field("secret_key", &format_args!("<{} bytes>", self.secret_key.len()))
            .finish()
    }
}

/// Raw byte storage shared by both oracle kinds.
pub trait Backend: Send + Sync {
    fn put(&self, name: &str, bytes: &[u8]) -> Result<()>;
    fn get(&self, name: &str) -> Result<Option<Vec<u8>>>;
}

#[derive(Debug, Default)]
pub struct MemoryBackend {
    entries: RwLock<HashMap<String, Vec<u8>>>,
}

impl Backend for MemoryBackend {
    fn put(&self, name: &str, bytes: &[u8]) -> Result<()> {
        self.entries
            .write()
            .expect("oracle lock poisoned")
            .insert(name.to_string(), bytes.to_vec());
        Ok(())
    }

    fn get(&self, name: &str) -> Result<Option<Vec<u8>>> {
        Ok(self.entries.read().expect("oracle lock poisoned").get(name).cloned())
    }
}

/// One file per entry inside a directory.
#[derive(Debug)]
pub struct DirectoryBackend {
    root: PathBuf,
    write_lock: std::sync::Mutex<()>,
}

impl DirectoryBackend {
    pub fn open(root: impl AsRef<Path>) -> Result<Self> {
        fs::create_dir_all(root.as_ref())?;
        Ok(DirectoryBackend {
            root: root.as_ref().to_path_buf(),
            write_lock: std::sync::Mutex::new(()),
        })
    }
}

impl Backend for DirectoryBackend {
    fn put(&self, name: &str, bytes: &[u8]) -> Result<()> {
        let _guard = self.write_lock.lock().expect("oracle lock poisoned");
        // write then rename so readers never observe a partial file
        let tmp = self.root.join(format!(".{name}.tmp"));
        fs::write(&tmp, bytes)?;
        fs::rename(tmp, self.root.join(name))?;
        Ok(())
    }

    fn get(&self, name: &str) -> Result<Option<Vec<u8>>> {
        match fs::read(self.root.join(name)) {
            Ok(bytes) => Ok(Some(bytes)),
            Err(e) if e.kind() == std::io::ErrorKind::NotFound => Ok(None),
            Err(e) => Err(e.into()),
        }
    }
}

fn check_id(id: &str) -> Result<()> {
    let ok = !id.is_empty()
        && id
            .chars()
            .all(|c| c.is_ascii_alphanumeric() || c == '-' || c == '_');
    if ok {
        Ok(())
    } else {
        Err(OracleError::InvalidId(id.to_string()))
    }
}

fn authorize(cap: &Capability, owner: Role) -> Result<()> {
    if cap.role == owner {
        Ok(())
    } else {
        Err(OracleError::AccessDenied {
            caller: cap.role,
            owner,
        })
    }
}

/// Oracle A: encrypted model documents, Gateway only.
#[derive(Clone)]
pub struct ModelOracle {
    backend: Arc<dyn Backend>,
}

impl ModelOracle {
    pub fn in_memory() -> Self {
        ModelOracle {
            backend: Arc::new(MemoryBackend::default()),
        }
    }

    pub fn on_disk(dir: impl AsRef<Path>) -> Result<Self> {
        Ok(ModelOracle {
            backend: Arc::new(DirectoryBackend::open(dir)?),
        })
    }

    pub fn store_model(&self, cap: &Capability, doc: &ModelDocument) -> Result<String> {
        authorize(cap, Role::Gateway)?;
        check_id(&doc.model_id)?;
        let bytes = serde_json::to_vec(doc).map_err(|e| OracleError::Malformed {
            id: doc.model_id.clone(),
            reason: e.to_string(),
        })?;
        self.backend.put(&format!("{}.json", doc.model_id), &bytes)?;
        Ok(doc.model_id.clone())
    }

    pub fn load_model(&self, cap: &Capability, model_id: &str) -> Result<ModelDocument> {
        authorize(cap, Role::Gateway)?;
        check_id(model_id)?;
        let bytes = self
            .backend
            .get(&format!("{model_id}.json"))?
            .ok_or_else(|| OracleError::NotFound(model_id.to_string()))?;
        serde_json::from_slice(&bytes).map_err(|e| OracleError::Malformed {
            id: model_id.to_string(),
            reason: e.to_string(),
        })
    }
}

/// Oracle B: session secret keys, Defender only.
#[derive(Clone)]
pub struct KeyOracle {
    backend: Arc<dyn Backend>,
}

impl KeyOracle {
    pub fn in_memory() -> Self {
        KeyOracle {
            backend: Arc::new(MemoryBackend::default()),
        }
    }

    pub fn on_disk(dir: impl AsRef<Path>) -> Result<Self> {
        Ok(KeyOracle {
            backend: Arc::new(DirectoryBackend::open(dir)?),
        })
    }

    pub fn store_key(&self, cap: &Capability, rec: &KeyRecord) -> Result<()> {
        authorize(cap, Role::Defender)?;
        check_id(&rec.session_id)?;
        self.backend.put(&format!("{}.key", rec.session_id), &rec.secret_key)
    }

    pub fn load_key(&self, cap: &Capability, session_id: &str) -> Result<KeyRecord> {
        authorize(cap, Role::Defender)?;
        check_id(session_id)?;
        let secret_key = self
            .backend
            .get(&format!("{session_id}.key"))?
            .ok_or_else(|| OracleError::NotFound(session_id.to_string()))?;
        Ok(KeyRecord {
            session_id: session_id.to_string(),
            secret_key,
        })
    }
}
