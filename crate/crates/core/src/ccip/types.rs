use std::net::SocketAddrV4;

use crate::acl::AccessRule;
use crate::crypto::{Hash32, KeyExchangeMessage, Nonce, PublicKey, Signature, SigningKeypair};

pub type ChainId = u32;

pub const WIRE_VERSION: u8 = 1;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum TxType {
    Registration = 0,
    Request = 1,
    Response = 2,
}

impl TxType {
    pub fn from_u8(v: u8) -> Option<Self> {
        match v {
            0 => Some(TxType::Registration),
            1 => Some(TxType::Request),
            2 => Some(TxType::Response),
            _ => None,
        }
    }

    pub fn as_u8(self) -> u8 {
        self as u8
    }

    pub fn name(self) -> &'static str {
        match self {
            TxType::Registration => "registration",
            TxType::Request => "request",
            TxType::Response => "response",
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct CcipHeader {
    pub src_chain: ChainId,
    pub dst_chain: ChainId,
    pub tx_type: TxType,
    /// Unique per router; `(router_public_key, seq_num)` is globally unique.
    pub seq_num: u64,
    /// Packaging time at the router, unix milliseconds.
    pub timestamp1: u64,
    pub router_public_key: PublicKey,
    pub signature: Signature,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct RegistrationPayload {
    /// The router's `B = b*G`.
    pub key_message: KeyExchangeMessage,
    pub router_addr: SocketAddrV4,
    pub access_control_table: Vec<AccessRule>,
}

/// A function name with positional byte-string arguments.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct Call {
    pub function: String,
    pub args: Vec<Vec<u8>>,
}

impl Call {
    pub fn new(function: impl Into<String>, args: Vec<Vec<u8>>) -> Self {
        Self { function: function.into(), args }
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct CrossChainPayload {
    pub src_contract: String,
    pub dst_contract: String,
    /// Event emission time, unix milliseconds.
    pub timestamp2: u64,
    pub originator_public_key: PublicKey,
    pub originator_signature: Signature,
    /// Zero for a request; the request's transaction hash for a response.
    pub session_hash: Hash32,
    /// Validity window after `timestamp2`, milliseconds.
    pub timeout: u64,
    pub input: Call,
    pub callback: Option<Call>,
    pub extra: Vec<u8>,
}

impl CrossChainPayload {
    /// Bytes covered by the originator signature.
    pub fn originator_signing_bytes(&self) -> Vec<u8> {
        super::codec::originator_signing_bytes(self)
    }

    pub fn sign_originator(&mut self, keypair: &SigningKeypair) {
        self.originator_public_key = keypair.public_key();
        self.originator_signature = keypair.sign(&self.originator_signing_bytes());
    }

    pub fn verify_originator(&self) -> bool {
        crate::crypto::verify_sig(
            &self.originator_public_key,
            &self.originator_signing_bytes(),
            &self.originator_signature,
        )
    }

    pub fn is_expired(&self, now: u64) -> bool {
        now > self.timestamp2.saturating_add(self.timeout)
    }
}

/// AEAD output for a request or response payload.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct SealedPayload {
    pub nonce: Nonce,
    pub ciphertext: Vec<u8>,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum PayloadEnvelope {
    /// Registrations travel in plaintext.
    Registration(RegistrationPayload),
    /// Requests and responses are always encrypted in transit.
    Sealed(SealedPayload),
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct CrossChainTransaction {
    pub header: CcipHeader,
    pub payload: PayloadEnvelope,
}

impl CrossChainTransaction {
    /// Bytes covered by the router signature: every header field except the
    /// signature, followed by the payload section.
    pub fn signing_bytes(&self) -> Vec<u8> {
        super::codec::router_signing_bytes(self)
    }

    pub fn sign(&mut self, router: &SigningKeypair) {
        self.header.router_public_key = router.public_key();
        self.header.signature = router.sign(&self.signing_bytes());
    }

    pub fn verify_router_signature(&self) -> bool {
        crate::crypto::verify_sig(&self.header.router_public_key, &self.signing_bytes(), &self.header.signature)
    }

    pub fn envelope_matches_type(&self) -> bool {
        matches!(
            (&self.payload, self.header.tx_type),
            (PayloadEnvelope::Registration(_), TxType::Registration)
                | (PayloadEnvelope::Sealed(_), TxType::Request | TxType::Response)
        )
    }

    pub fn registration(&self) -> Option<&RegistrationPayload> {
        match &self.payload {
            PayloadEnvelope::Registration(r) => Some(r),
            PayloadEnvelope::Sealed(_) => None,
        }
    }

    pub fn sealed(&self) -> Option<&SealedPayload> {
        match &self.payload {
            PayloadEnvelope::Sealed(s) => Some(s),
            PayloadEnvelope::Registration(_) => None,
        }
    }
}
