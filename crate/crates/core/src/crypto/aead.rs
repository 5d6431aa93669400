//! AES-256-GCM with explicit, counter-derived 96-bit nonces.

use std::fmt;

use aes_gcm::aead::{Aead, KeyInit, Payload};
use aes_gcm::Aes256Gcm;

use super::ecdh::CommunicationKey;
use super::CryptoError;

pub const TAG_LEN: usize = 16;

#[derive(Clone, Copy, PartialEq, Eq, Hash)]
pub struct Nonce(pub [u8; 12]);

impl fmt::Debug for Nonce {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "Nonce({})", hex::encode(self.0))
    }
}

/// Nonce generator for one `(key, direction)` pair.
///
/// Layout: 4-byte lane identifying the direction and sender, then an 8-byte
/// big-endian counter. Distinct lanes never collide, and a lane never repeats
/// a counter value.
#[derive(Clone, Debug, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
pub struct NonceSequence {
    lane: u32,
    next: u64,
}

/// Router to relay.
pub const LANE_ROUTER_TO_RELAY: u32 = 0x0000_0001;

/// Relay to router; the low bits carry the sending relay node.
pub fn lane_relay_to_router(node: u32) -> u32 {
    0x8000_0000 | (node & 0x7fff_ffff)
}

impl NonceSequence {
    pub fn new(lane: u32) -> Self {
        Self { lane, next: 0 }
    }

    /// Continue a sequence from a persisted counter.
    pub fn resume(lane: u32, next: u64) -> Self {
        Self { lane, next }
    }

    pub fn lane(&self) -> u32 {
        self.lane
    }

    pub fn position(&self) -> u64 {
        self.next
    }

    pub fn next_nonce(&mut self) -> Result<Nonce, CryptoError> {
        if self.next == u64::MAX {
            return Err(CryptoError::NonceExhausted);
        }
        let mut n = [0u8; 12];
        n[..4].copy_from_slice(&self.lane.to_be_bytes());
        n[4..].copy_from_slice(&self.next.to_be_bytes());
        self.next += 1;
        Ok(Nonce(n))
    }
}

/// Returns `ciphertext || tag`.
pub fn aead_encrypt(
    key: &CommunicationKey,
    nonce: &Nonce,
    plaintext: &[u8],
    associated_data: &[u8],
) -> Vec<u8> {
    seal_raw(key.as_bytes(), nonce, plaintext, associated_data)
}

pub fn aead_decrypt(
    key: &CommunicationKey,
    nonce: &Nonce,
    ciphertext: &[u8],
    associated_data: &[u8],
) -> Result<Vec<u8>, CryptoError> {
    open_raw(key.as_bytes(), nonce, ciphertext, associated_data)
}

pub(crate) fn seal_raw(key: &[u8; 32], nonce: &Nonce, plaintext: &[u8], aad: &[u8]) -> Vec<u8> {
    let cipher = Aes256Gcm::new(key.into());
    cipher
        .encrypt((&nonce.0).into(), Payload { msg: plaintext, aad })
        .expect("in-memory AES-GCM encryption does not fail")
}

pub(crate) fn open_raw(
    key: &[u8; 32],
    nonce: &Nonce,
    ciphertext: &[u8],
    aad: &[u8],
) -> Result<Vec<u8>, CryptoError> {
    if ciphertext.len() < TAG_LEN {
        return Err(CryptoError::Authentication);
    }
    let cipher = Aes256Gcm::new(key.into());
    cipher
        .decrypt((&nonce.0).into(), Payload { msg: ciphertext, aad })
        .map_err(|_| CryptoError::Authentication)
}
