//! Simulated trusted execution environment for relay nodes.
//!
//! [`EnclaveInstance`] owns the relay secret, every router communication key,
//! the access-control tables and decrypted payloads. None of these cross its
//! public surface; callers get verdicts, opaque handles, quotes, sealed blobs,
//! public points and ciphertexts.

mod attestation;
mod bootstrap;
mod instance;
mod sealing;

pub use attestation::{
    measurement_of, report_data_for, signer_identity_of, verify_quote, AttestationAuthority,
    AttestationQuote,
};
pub use bootstrap::{bootstrap_threshold, share_index_of, ChannelOffer, ShareEnvelope, ShareFault};
pub use instance::{
    key_fingerprint, DenyReason, EnclaveConfig, EnclaveInstance, KeyExchangeAck, KeyOffer,
    UnpackError, UnpackHandle, Verification, VerifiedKind,
};
pub use sealing::{BlobStore, Platform, SealPolicy, SealedBlob};

use crate::acl::AclError;
use crate::crypto::CryptoError;

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum EnclaveError {
    #[error("relay secret not established")]
    NoSecret,
    #[error("router is not registered")]
    UnknownRouter,
    #[error("handle is stale")]
    StaleHandle,
    #[error("handle has not been verified")]
    NotVerified,
    #[error("sealed blob does not open under this identity")]
    UnsealFailed,
    #[error("storage: {0}")]
    Storage(String),
    #[error(transparent)]
    Acl(AclError),
    #[error(transparent)]
    Crypto(CryptoError),
    #[error("attestation of node {node} failed")]
    AttestationFailed { node: u32 },
    #[error("share from node {from} failed verification")]
    ShareVerification { from: u32 },
    #[error("need {need} shares, have {have}")]
    InsufficientShares { have: usize, need: usize },
    #[error("recovered secret does not match the commitments")]
    SecretCheckFailed,
    #[error("bootstrap: {0}")]
    Bootstrap(&'static str),
}

#[cfg(test)]
mod tests;
