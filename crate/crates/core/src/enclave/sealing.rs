//! Sealed storage bound to a platform and an enclave or signer identity.

use std::collections::BTreeMap;
use std::fs;
use std::io;
use std::path::{Path, PathBuf};
use std::sync::{Arc, Mutex};

use hkdf::Hkdf;
use sha2::Sha256;

use super::EnclaveError;
use crate::ccip::wire::{Reader, Writer};
use crate::crypto::aead::{open_raw, seal_raw};
use crate::crypto::{sha256_parts, Hash32, Nonce};

const SEAL_SALT: &[u8] = b"ccrelay/seal/v1";

/// A simulated CPU: a public identifier and a fused root key that never
/// leaves the hardware.
#[derive(Clone)]
pub struct Platform {
    id: [u8; 16],
    root_key: [u8; 32],
}

impl Platform {
    pub fn from_seed(seed: &[u8]) -> Self {
        let id_hash = sha256_parts(&[b"ccrelay/platform-id", seed]);
        let root = sha256_parts(&[b"ccrelay/platform-root", seed]);
        let mut id = [0u8; 16];
        id.copy_from_slice(&id_hash.as_bytes()[..16]);
        Self { id, root_key: root.0 }
    }

    pub fn id(&self) -> [u8; 16] {
        self.id
    }

    pub(crate) fn seal_key(&self, policy: SealPolicy, identity: &Hash32) -> [u8; 32] {
        let hk = Hkdf::<Sha256>::new(Some(SEAL_SALT), &self.root_key);
        let mut info = vec![policy as u8];
        info.extend_from_slice(identity.as_bytes());
        let mut key = [0u8; 32];
        hk.expand(&info, &mut key).expect("32-byte okm");
        key
    }
}

impl std::fmt::Debug for Platform {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "Platform({})", hex::encode(self.id))
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum SealPolicy {
    /// Only an enclave with the same measurement on the same platform.
    EnclaveIdentity = 1,
    /// Any enclave from the same signer on the same platform.
    SigningIdentity = 2,
}

impl SealPolicy {
    pub fn from_u8(v: u8) -> Option<Self> {
        match v {
            1 => Some(SealPolicy::EnclaveIdentity),
            2 => Some(SealPolicy::SigningIdentity),
            _ => None,
        }
    }
}

/// File layout: policy:u8, nonce:12, length:u32, ciphertext||tag.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct SealedBlob {
    pub policy: SealPolicy,
    pub nonce: Nonce,
    pub ciphertext: Vec<u8>,
}

impl SealedBlob {
    pub fn to_bytes(&self) -> Vec<u8> {
        let mut w = Writer::new();
        w.u8(self.policy as u8).raw(&self.nonce.0).bytes(&self.ciphertext);
        w.into_bytes()
    }

    pub fn from_bytes(raw: &[u8]) -> Result<Self, EnclaveError> {
        let mut r = Reader::new(raw);
        let bad = |_| EnclaveError::Storage("malformed sealed blob".into());
        let policy = SealPolicy::from_u8(r.u8().map_err(bad)?)
            .ok_or_else(|| EnclaveError::Storage("unknown seal policy".into()))?;
        let nonce = Nonce(r.array().map_err(bad)?);
        let ciphertext = r.bytes().map_err(bad)?.to_vec();
        r.finish().map_err(bad)?;
        Ok(Self { policy, nonce, ciphertext })
    }
}

/// Data domain mixed into the associated data, so blobs holding internal key
/// material cannot be opened through the public unseal operation.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub(crate) enum SealDomain {
    Public = 0,
    Internal = 1,
}

pub(crate) fn seal_with(key: &[u8; 32], policy: SealPolicy, domain: SealDomain, nonce: Nonce, plaintext: &[u8]) -> SealedBlob {
    let aad = [policy as u8, domain as u8];
    SealedBlob { policy, nonce, ciphertext: seal_raw(key, &nonce, plaintext, &aad) }
}

pub(crate) fn unseal_with(key: &[u8; 32], domain: SealDomain, blob: &SealedBlob) -> Result<Vec<u8>, EnclaveError> {
    let aad = [blob.policy as u8, domain as u8];
    open_raw(key, &blob.nonce, &blob.ciphertext, &aad).map_err(|_| EnclaveError::UnsealFailed)
}

/// Untrusted persistent storage for sealed blobs: an in-memory map, written
/// through to a directory when one is configured. Clones share contents, which
/// lets a restarted enclave find what its predecessor wrote.
#[derive(Clone, Debug, Default)]
pub struct BlobStore {
    blobs: Arc<Mutex<BTreeMap<String, Vec<u8>>>>,
    dir: Option<PathBuf>,
}

impl BlobStore {
    pub fn in_memory() -> Self {
        Self::default()
    }

    /// Opens a directory, loading any `*.sealed` files already present.
    pub fn open(dir: &Path) -> io::Result<Self> {
        fs::create_dir_all(dir)?;
        let mut blobs = BTreeMap::new();
        for entry in fs::read_dir(dir)? {
            let path = entry?.path();
            if path.extension().and_then(|e| e.to_str()) == Some("sealed") {
                if let Some(stem) = path.file_stem().and_then(|s| s.to_str()) {
                    blobs.insert(stem.to_string(), fs::read(&path)?);
                }
            }
        }
        Ok(Self { blobs: Arc::new(Mutex::new(blobs)), dir: Some(dir.to_path_buf()) })
    }

    pub fn put(&self, name: &str, blob: &SealedBlob) -> Result<(), EnclaveError> {
        let bytes = blob.to_bytes();
        if let Some(dir) = &self.dir {
            let tmp = dir.join(format!("{name}.tmp"));
            fs::write(&tmp, &bytes).map_err(|e| EnclaveError::Storage(e.to_string()))?;
            fs::rename(&tmp, dir.join(format!("{name}.sealed")))
                .map_err(|e| EnclaveError::Storage(e.to_string()))?;
        }
        self.blobs.lock().expect("blob store lock").insert(name.to_string(), bytes);
        Ok(())
    }

    pub fn get(&self, name: &str) -> Result<Option<SealedBlob>, EnclaveError> {
        let raw = self.blobs.lock().expect("blob store lock").get(name).cloned();
        raw.map(|r| SealedBlob::from_bytes(&r)).transpose()
    }

    pub fn names(&self) -> Vec<String> {
        self.blobs.lock().expect("blob store lock").keys().cloned().collect()
    }

    /// Raw stored bytes, as an attacker with disk access would see them.
    pub fn raw(&self, name: &str) -> Option<Vec<u8>> {
        self.blobs.lock().expect("blob store lock").get(name).cloned()
    }
}
