//! Cross-chain interoperability protocol: transaction types, the canonical
//! wire format, payload sealing and structural validity rules.

mod codec;
mod envelope;
mod types;
mod validate;
pub mod wire;

pub use codec::{
    decode, decode_payload, decode_registration, decode_rule, encode, encode_payload,
    encode_registration, encode_rule, tx_hash,
};
pub use envelope::{open_payload, payload_aad, seal_payload, ForwardEnvelope, OpenError};
pub use types::{
    Call, CcipHeader, ChainId, CrossChainPayload, CrossChainTransaction, PayloadEnvelope,
    RegistrationPayload, SealedPayload, TxType, WIRE_VERSION,
};
pub use validate::{validate_structure, ValidityError};

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum CodecError {
    #[error("truncated at offset {offset}: need {need} bytes, have {have}")]
    Truncated { offset: usize, need: usize, have: usize },
    #[error("length prefix at offset {offset} declares {declared}, only {available} available")]
    LengthOverflow { offset: usize, declared: usize, available: usize },
    #[error("{0} trailing bytes after frame")]
    TrailingBytes(usize),
    #[error("unknown transaction type {0}")]
    UnknownType(u8),
    #[error("unsupported wire version {0}")]
    BadVersion(u8),
    #[error("invalid curve point in {0}")]
    InvalidPoint(&'static str),
    #[error("invalid utf-8 at offset {offset}")]
    InvalidUtf8 { offset: usize },
    #[error("invalid tag {tag} for {field}")]
    InvalidTag { field: &'static str, tag: u8 },
    #[error("invalid value for {0}")]
    InvalidValue(&'static str),
}
