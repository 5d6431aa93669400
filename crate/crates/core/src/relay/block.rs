//! Relay blocks, per-transaction verdicts and their canonical encoding.

use crate::ccip::wire::{Reader, Writer};
use crate::ccip::{decode, encode, tx_hash, ChainId, CodecError, CrossChainTransaction, ForwardEnvelope};
use crate::crypto::{sha256, verify_sig, Hash32, KeyExchangeMessage, PublicKey, Signature, SigningKeypair};
use crate::enclave::{DenyReason, UnpackError};

const BLOCK_VERSION: u8 = 1;

/// Why a transaction was refused before reaching the access-control decision.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum RejectReason {
    UnknownRouter,
    RouterChainMismatch,
    BadRouterSignature,
    Aead,
    Malformed,
    Expired,
    Replay,
    OutOfWindow,
    UnknownDestination,
    NotCertified,
    NoRelaySecret,
}

impl RejectReason {
    pub fn code(&self) -> &'static str {
        match self {
            RejectReason::UnknownRouter => "unknown-router",
            RejectReason::RouterChainMismatch => "router-chain-mismatch",
            RejectReason::BadRouterSignature => "bad-signature",
            RejectReason::Aead => "aead",
            RejectReason::Malformed => "malformed",
            RejectReason::Expired => "expired",
            RejectReason::Replay => "replay",
            RejectReason::OutOfWindow => "out-of-window",
            RejectReason::UnknownDestination => "unknown-destination",
            RejectReason::NotCertified => "not-certified",
            RejectReason::NoRelaySecret => "no-relay-secret",
        }
    }

    pub const ALL: [RejectReason; 11] = [
        RejectReason::UnknownRouter,
        RejectReason::RouterChainMismatch,
        RejectReason::BadRouterSignature,
        RejectReason::Aead,
        RejectReason::Malformed,
        RejectReason::Expired,
        RejectReason::Replay,
        RejectReason::OutOfWindow,
        RejectReason::UnknownDestination,
        RejectReason::NotCertified,
        RejectReason::NoRelaySecret,
    ];

    fn tag(&self) -> u8 {
        Self::ALL.iter().position(|r| r == self).expect("listed") as u8
    }

    fn from_tag(tag: u8) -> Option<Self> {
        Self::ALL.get(tag as usize).copied()
    }
}

impl From<UnpackError> for RejectReason {
    fn from(e: UnpackError) -> Self {
        match e {
            UnpackError::UnknownRouter => RejectReason::UnknownRouter,
            UnpackError::RouterChainMismatch => RejectReason::RouterChainMismatch,
            UnpackError::BadRouterSignature => RejectReason::BadRouterSignature,
            UnpackError::Aead => RejectReason::Aead,
            UnpackError::Malformed(_) => RejectReason::Malformed,
            UnpackError::Expired => RejectReason::Expired,
        }
    }
}

const DENY_REASONS: [DenyReason; 5] = [
    DenyReason::BadOriginatorSignature,
    DenyReason::AccessDenied,
    DenyReason::Expired,
    DenyReason::UnknownSession,
    DenyReason::Malformed,
];

/// Outcome recorded for every transaction in a block.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub enum Verdict {
    /// Router key installed and access-control table registered.
    Registered,
    /// Request verified and forwarded; a session is open until its response or timeout.
    Opened { timeout: u64 },
    /// Request without a callback verified and forwarded; no session.
    Delivered,
    /// Response verified and forwarded; the session is closed.
    Closed { session: Hash32 },
    /// Response to a session that already has one.
    DuplicateResponse { session: Hash32 },
    /// Response after the session timed out.
    SessionExpired { session: Hash32 },
    /// Refused by the enclave's verification step.
    Denied(DenyReason),
    Rejected(RejectReason),
}

impl Verdict {
    pub fn code(&self) -> &'static str {
        match self {
            Verdict::Registered => "registered",
            Verdict::Opened { .. } => "verified",
            Verdict::Delivered => "verified",
            Verdict::Closed { .. } => "verified",
            Verdict::DuplicateResponse { .. } => "duplicate-response",
            Verdict::SessionExpired { .. } => "session-expired",
            Verdict::Denied(d) => d.code(),
            Verdict::Rejected(r) => r.code(),
        }
    }

    pub fn is_verified(&self) -> bool {
        matches!(self, Verdict::Opened { .. } | Verdict::Delivered | Verdict::Closed { .. })
    }

    pub fn is_denied(&self) -> bool {
        matches!(self, Verdict::Denied(_))
    }

    /// Session a response verdict refers to.
    pub fn response_session(&self) -> Option<Hash32> {
        match self {
            Verdict::Closed { session } | Verdict::DuplicateResponse { session } | Verdict::SessionExpired { session } => {
                Some(*session)
            }
            _ => None,
        }
    }

    fn write(&self, w: &mut Writer) {
        match self {
            Verdict::Registered => {
                w.u8(0);
            }
            Verdict::Opened { timeout } => {
                w.u8(1).u64(*timeout);
            }
            Verdict::Delivered => {
                w.u8(2);
            }
            Verdict::Closed { session } => {
                w.u8(3).raw(session.as_bytes());
            }
            Verdict::DuplicateResponse { session } => {
                w.u8(4).raw(session.as_bytes());
            }
            Verdict::SessionExpired { session } => {
                w.u8(5).raw(session.as_bytes());
            }
            Verdict::Denied(d) => {
                w.u8(6).u8(DENY_REASONS.iter().position(|x| x == d).expect("listed") as u8);
            }
            Verdict::Rejected(r) => {
                w.u8(7).u8(r.tag());
            }
        }
    }

    fn read(r: &mut Reader<'_>) -> Result<Self, CodecError> {
        Ok(match r.u8()? {
            0 => Verdict::Registered,
            1 => Verdict::Opened { timeout: r.u64()? },
            2 => Verdict::Delivered,
            3 => Verdict::Closed { session: Hash32(r.array()?) },
            4 => Verdict::DuplicateResponse { session: Hash32(r.array()?) },
            5 => Verdict::SessionExpired { session: Hash32(r.array()?) },
            6 => {
                let tag = r.u8()?;
                Verdict::Denied(
                    *DENY_REASONS.get(tag as usize).ok_or(CodecError::InvalidTag { field: "deny reason", tag })?,
                )
            }
            7 => {
                let tag = r.u8()?;
                Verdict::Rejected(RejectReason::from_tag(tag).ok_or(CodecError::InvalidTag { field: "reject reason", tag })?)
            }
            tag => return Err(CodecError::InvalidTag { field: "verdict", tag }),
        })
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ForwardRecord {
    pub dst_router: PublicKey,
    pub envelope: ForwardEnvelope,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct BlockEntry {
    pub tx: CrossChainTransaction,
    pub verdict: Verdict,
    pub forward: Option<ForwardRecord>,
}

impl BlockEntry {
    pub fn tx_hash(&self) -> Hash32 {
        tx_hash(&self.tx)
    }
}

/// A router's `B` point, published so every relay node can derive its key.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct KeyAnnouncement {
    pub router: PublicKey,
    pub chain: ChainId,
    pub point: KeyExchangeMessage,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct RelayBlock {
    pub height: u64,
    pub parent_hash: Hash32,
    pub timestamp: u64,
    pub producer: u32,
    pub entries: Vec<BlockEntry>,
    pub key_announcements: Vec<KeyAnnouncement>,
    pub signature: Signature,
}

impl RelayBlock {
    fn write_unsigned(&self, w: &mut Writer) {
        w.u8(BLOCK_VERSION)
            .u64(self.height)
            .raw(self.parent_hash.as_bytes())
            .u64(self.timestamp)
            .u32(self.producer)
            .u32(self.entries.len() as u32);
        for e in &self.entries {
            w.bytes(&encode(&e.tx));
            e.verdict.write(w);
            match &e.forward {
                None => {
                    w.u8(0);
                }
                Some(f) => {
                    w.u8(1).raw(f.dst_router.as_bytes()).bytes(&f.envelope.encode());
                }
            }
        }
        w.u32(self.key_announcements.len() as u32);
        for a in &self.key_announcements {
            w.raw(a.router.as_bytes()).u32(a.chain).raw(&a.point.to_bytes());
        }
    }

    pub fn signing_bytes(&self) -> Vec<u8> {
        let mut w = Writer::new();
        self.write_unsigned(&mut w);
        w.into_bytes()
    }

    pub fn sign(&mut self, producer: &SigningKeypair) {
        self.signature = producer.sign(&self.signing_bytes());
    }

    pub fn verify_signature(&self, producer: &PublicKey) -> bool {
        verify_sig(producer, &self.signing_bytes(), &self.signature)
    }

    pub fn encode(&self) -> Vec<u8> {
        let mut w = Writer::new();
        self.write_unsigned(&mut w);
        w.raw(self.signature.as_bytes());
        w.into_bytes()
    }

    pub fn decode(raw: &[u8]) -> Result<Self, CodecError> {
        let mut r = Reader::new(raw);
        let version = r.u8()?;
        if version != BLOCK_VERSION {
            return Err(CodecError::BadVersion(version));
        }
        let height = r.u64()?;
        let parent_hash = Hash32(r.array()?);
        let timestamp = r.u64()?;
        let producer = r.u32()?;
        let n = r.count(4 + 1 + 1)?;
        let mut entries = Vec::with_capacity(n);
        for _ in 0..n {
            let tx = decode(r.bytes()?)?;
            let verdict = Verdict::read(&mut r)?;
            let forward = match r.u8()? {
                0 => None,
                1 => {
                    let pk: [u8; 33] = r.array()?;
                    let dst_router = PublicKey::from_bytes(&pk).map_err(|_| CodecError::InvalidPoint("forward router"))?;
                    let envelope = ForwardEnvelope::decode(r.bytes()?)?;
                    Some(ForwardRecord { dst_router, envelope })
                }
                tag => return Err(CodecError::InvalidTag { field: "forward", tag }),
            };
            entries.push(BlockEntry { tx, verdict, forward });
        }
        let n = r.count(33 + 4 + 33)?;
        let mut key_announcements = Vec::with_capacity(n);
        for _ in 0..n {
            let pk: [u8; 33] = r.array()?;
            let router = PublicKey::from_bytes(&pk).map_err(|_| CodecError::InvalidPoint("announced router"))?;
            let chain = r.u32()?;
            let point: [u8; 33] = r.array()?;
            let point = KeyExchangeMessage::from_bytes(&point).map_err(|_| CodecError::InvalidPoint("announced point"))?;
            key_announcements.push(KeyAnnouncement { router, chain, point });
        }
        let signature = Signature::from_bytes(r.array()?);
        r.finish()?;
        Ok(Self { height, parent_hash, timestamp, producer, entries, key_announcements, signature })
    }

    pub fn hash(&self) -> Hash32 {
        sha256(&self.encode())
    }

    pub fn max_timestamp1(&self) -> Option<u64> {
        self.entries.iter().map(|e| e.tx.header.timestamp1).max()
    }
}
