//! AEAD binding for request/response payloads and relay-to-router forwards.

use super::wire::{Reader, Writer};
use super::{
    decode_payload, encode_payload, CcipHeader, ChainId, CodecError, CrossChainPayload,
    SealedPayload, TxType, WIRE_VERSION,
};
use crate::crypto::{aead_decrypt, aead_encrypt, CommunicationKey, CryptoError, Hash32, Nonce};

/// Associated data for a sealed payload: router key, type and chain pair.
///
/// `seq_num` and `timestamp1` are left out on purpose; they are protected by
/// the router signature, and keeping them out of the AEAD lets a header-only
/// tamper reach (and be rejected by) the signature check.
pub fn payload_aad(header: &CcipHeader) -> Vec<u8> {
    let mut w = Writer::new();
    w.raw(header.router_public_key.as_bytes())
        .u8(header.tx_type.as_u8())
        .u32(header.src_chain)
        .u32(header.dst_chain);
    w.into_bytes()
}

pub fn seal_payload(
    key: &CommunicationKey,
    nonce: Nonce,
    header: &CcipHeader,
    payload: &CrossChainPayload,
) -> SealedPayload {
    let ciphertext = aead_encrypt(key, &nonce, &encode_payload(payload), &payload_aad(header));
    SealedPayload { nonce, ciphertext }
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum OpenError {
    #[error("payload authentication failed")]
    Authentication,
    #[error("payload plaintext malformed: {0}")]
    Malformed(CodecError),
}

pub fn open_payload(
    key: &CommunicationKey,
    header: &CcipHeader,
    sealed: &SealedPayload,
) -> Result<CrossChainPayload, OpenError> {
    let plain = aead_decrypt(key, &sealed.nonce, &sealed.ciphertext, &payload_aad(header))
        .map_err(|_| OpenError::Authentication)?;
    decode_payload(&plain).map_err(OpenError::Malformed)
}

/// A verified payload re-encrypted by a relay enclave for the destination router.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ForwardEnvelope {
    /// Hash of the relayed transaction.
    pub request_hash: Hash32,
    pub src_chain: ChainId,
    pub dst_chain: ChainId,
    pub tx_type: TxType,
    pub relay_node: u32,
    pub nonce: Nonce,
    pub ciphertext: Vec<u8>,
}

impl ForwardEnvelope {
    pub fn aad(&self) -> Vec<u8> {
        let mut w = Writer::new();
        w.u8(WIRE_VERSION)
            .raw(self.request_hash.as_bytes())
            .u32(self.src_chain)
            .u32(self.dst_chain)
            .u8(self.tx_type.as_u8())
            .u32(self.relay_node);
        w.into_bytes()
    }

    #[allow(clippy::too_many_arguments)]
    pub fn seal(
        key: &CommunicationKey,
        nonce: Nonce,
        request_hash: Hash32,
        src_chain: ChainId,
        dst_chain: ChainId,
        tx_type: TxType,
        relay_node: u32,
        payload: &CrossChainPayload,
    ) -> Self {
        let mut env = Self {
            request_hash,
            src_chain,
            dst_chain,
            tx_type,
            relay_node,
            nonce,
            ciphertext: Vec::new(),
        };
        env.ciphertext = aead_encrypt(key, &nonce, &encode_payload(payload), &env.aad());
        env
    }

    pub fn open(&self, key: &CommunicationKey) -> Result<CrossChainPayload, OpenError> {
        let plain = aead_decrypt(key, &self.nonce, &self.ciphertext, &self.aad())
            .map_err(|_: CryptoError| OpenError::Authentication)?;
        decode_payload(&plain).map_err(OpenError::Malformed)
    }

    pub fn encode(&self) -> Vec<u8> {
        let mut w = Writer::new();
        w.raw(&self.aad()).raw(&self.nonce.0).bytes(&self.ciphertext);
        w.into_bytes()
    }

    pub fn decode(raw: &[u8]) -> Result<Self, CodecError> {
        let mut r = Reader::new(raw);
        let version = r.u8()?;
        if version != WIRE_VERSION {
            return Err(CodecError::BadVersion(version));
        }
        let request_hash = Hash32(r.array()?);
        let src_chain = r.u32()?;
        let dst_chain = r.u32()?;
        let ty = r.u8()?;
        let tx_type = TxType::from_u8(ty).ok_or(CodecError::UnknownType(ty))?;
        let relay_node = r.u32()?;
        let nonce = Nonce(r.array()?);
        let ciphertext = r.bytes()?.to_vec();
        r.finish()?;
        Ok(Self { request_hash, src_chain, dst_chain, tx_type, relay_node, nonce, ciphertext })
    }
}
