//! Cryptographic building blocks with no protocol knowledge.

pub mod aead;
pub mod ecdh;
pub mod field;
pub mod hash;
pub mod scalar;
pub mod sig;
pub mod vss;

pub use aead::{aead_decrypt, aead_encrypt, Nonce, NonceSequence};
pub use ecdh::{
    ecdh_derive, ecdh_derive_from_bytes, ecdh_respond, CommunicationKey, CurveParams, CurvePoint,
    EcScalar, KeyExchangeMessage,
};
pub use field::FieldParams;
pub use hash::{sha256, sha256_parts, Hash32};
pub use scalar::ModScalar;
pub use sig::{sign, verify_sig, PublicKey, Signature, SigningKeypair};
pub use vss::{
    threshold_for, vss_check_secret, vss_deal, vss_deal_with_coefficients, vss_recover,
    vss_verify_share, CommitmentVector, FeldmanDeal, Share,
};

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum CryptoError {
    #[error("invalid group parameters: {0}")]
    InvalidParams(&'static str),
    #[error("invalid deal: {0}")]
    InvalidDeal(&'static str),
    #[error("need {need} shares, have {have}")]
    InsufficientShares { have: usize, need: usize },
    #[error("duplicate or zero share index {0}")]
    DuplicateShareIndex(u32),
    #[error("encoding: {0}")]
    Encoding(&'static str),
    #[error("point is not on the curve")]
    PointOffCurve,
    #[error("point at infinity")]
    PointAtInfinity,
    #[error("scalar out of range")]
    ScalarOutOfRange,
    #[error("authentication failed")]
    Authentication,
    #[error("nonce space exhausted")]
    NonceExhausted,
}
