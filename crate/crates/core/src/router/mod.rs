//! Parachain router: registers with the relay, packs contract calls into
//! encrypted transactions and unpacks forwards from the relay.

use std::collections::{BTreeMap, BTreeSet};
use std::net::SocketAddrV4;
use std::path::Path;

use rand::RngCore;
use serde::{Deserialize, Serialize};

use crate::acl::AccessRule;
use crate::ccip::{
    seal_payload, tx_hash, Call, CcipHeader, ChainId, CrossChainPayload, CrossChainTransaction, ForwardEnvelope,
    OpenError, PayloadEnvelope, RegistrationPayload, TxType,
};
use crate::crypto::aead::LANE_ROUTER_TO_RELAY;
use crate::crypto::{
    ecdh_derive, ecdh_respond, CommunicationKey, CryptoError, CurveParams, EcScalar, Hash32, KeyExchangeMessage,
    NonceSequence, PublicKey, Signature, SigningKeypair,
};
use crate::enclave::{key_fingerprint, verify_quote, KeyOffer};
use crate::{Millis, SecurityKnobs};

#[derive(Clone, Debug, PartialEq, Eq, thiserror::Error)]
pub enum RouterError {
    #[error("router has no communication key yet")]
    NotRegistered,
    #[error("relay key offer failed attestation")]
    Attestation,
    #[error("originator signature does not verify")]
    BadOriginatorSignature,
    #[error("forward could not be decrypted")]
    Decrypt,
    #[error("forward is for chain {0}, not this router")]
    WrongDestination(ChainId),
    #[error("request already executed")]
    DuplicateRequest,
    #[error("response already received")]
    DuplicateResponse,
    #[error("no outstanding request for this response")]
    UnknownSession,
    #[error("request has no callback")]
    NoCallback,
    #[error(transparent)]
    Crypto(CryptoError),
    #[error("state file: {0}")]
    State(String),
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct RouterConfig {
    pub chain: ChainId,
    pub relay_chain_id: ChainId,
    pub addr: SocketAddrV4,
    /// Key of the attestation service that signs relay quotes.
    pub attestation_authority: PublicKey,
    /// Enclave measurement the relay must report.
    pub expected_measurement: Hash32,
    #[serde(default)]
    pub knobs: SecurityKnobs,
}

/// A cross-chain call emitted by a user on the hub contract.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct CrossChainEvent {
    pub dst_chain: ChainId,
    /// Signed by the originator; `session_hash` is ignored.
    pub payload: CrossChainPayload,
}

/// A request forwarded by the relay, decrypted and ready to execute.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct InboundRequest {
    pub request_hash: Hash32,
    pub src_chain: ChainId,
    pub payload: CrossChainPayload,
}

/// A response to one of this router's own requests.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct InboundResponse {
    pub session: Hash32,
    pub src_chain: ChainId,
    pub payload: CrossChainPayload,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum Inbound {
    Request(InboundRequest),
    Response(InboundResponse),
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
struct Outstanding {
    dst_chain: ChainId,
    sent_at: Millis,
}

/// Result argument appended to a callback: `0x00 || value` or `0x01 || message`.
pub fn encode_result(result: &Result<Vec<u8>, String>) -> Vec<u8> {
    match result {
        Ok(v) => [&[0u8][..], v].concat(),
        Err(e) => [&[1u8][..], e.as_bytes()].concat(),
    }
}

pub fn decode_result(bytes: &[u8]) -> Option<Result<Vec<u8>, String>> {
    match bytes.split_first()? {
        (0, v) => Some(Ok(v.to_vec())),
        (1, e) => Some(Err(String::from_utf8_lossy(e).into_owned())),
        _ => None,
    }
}

pub struct Router {
    config: RouterConfig,
    keypair: SigningKeypair,
    exchange_secret: EcScalar,
    key: Option<CommunicationKey>,
    acl: Vec<AccessRule>,
    next_seq: u64,
    nonces: NonceSequence,
    outstanding: BTreeMap<Hash32, Outstanding>,
    answered: BTreeSet<Hash32>,
    executed: BTreeSet<Hash32>,
}

impl Router {
    pub fn new<R: RngCore + ?Sized>(config: RouterConfig, keypair: SigningKeypair, rng: &mut R) -> Self {
        Self {
            config,
            keypair,
            exchange_secret: EcScalar::random(rng),
            key: None,
            acl: Vec::new(),
            next_seq: 1,
            nonces: NonceSequence::new(LANE_ROUTER_TO_RELAY),
            outstanding: BTreeMap::new(),
            answered: BTreeSet::new(),
            executed: BTreeSet::new(),
        }
    }

    pub fn config(&self) -> &RouterConfig {
        &self.config
    }

    pub fn chain(&self) -> ChainId {
        self.config.chain
    }

    pub fn public_key(&self) -> PublicKey {
        self.keypair.public_key()
    }

    pub fn is_registered(&self) -> bool {
        self.key.is_some()
    }

    /// Fingerprint of the communication key, comparable with the enclave's ack.
    pub fn key_fingerprint(&self) -> Option<Hash32> {
        self.key.as_ref().map(key_fingerprint)
    }

    pub fn exchange_point(&self) -> KeyExchangeMessage {
        ecdh_respond(&CurveParams::secp256k1(), &self.exchange_secret)
    }

    pub fn set_acl(&mut self, rules: Vec<AccessRule>) {
        self.acl = rules;
    }

    pub fn outstanding(&self) -> usize {
        self.outstanding.len()
    }

    pub fn next_seq(&self) -> u64 {
        self.next_seq
    }

    fn header(&mut self, dst_chain: ChainId, tx_type: TxType, now: Millis) -> CcipHeader {
        let seq_num = self.next_seq;
        self.next_seq += 1;
        CcipHeader {
            src_chain: self.config.chain,
            dst_chain,
            tx_type,
            seq_num,
            timestamp1: now,
            router_public_key: self.keypair.public_key(),
            signature: Signature::EMPTY,
        }
    }

    /// Checks the relay's quote, derives `k = b*A` and builds the signed
    /// registration transaction carrying `B`, the address and the ACL table.
    pub fn complete_registration(&mut self, offer: &KeyOffer, now: Millis) -> Result<CrossChainTransaction, RouterError> {
        if !self.config.knobs.skip_attestation
            && !verify_quote(
                &offer.quote,
                &self.config.attestation_authority,
                &self.config.expected_measurement,
                &KeyOffer::expected_report_data(&offer.point),
            )
        {
            return Err(RouterError::Attestation);
        }
        let key = ecdh_derive(&CurveParams::secp256k1(), &self.exchange_secret, &offer.point).map_err(RouterError::Crypto)?;
        self.key = Some(key);
        let header = self.header(self.config.relay_chain_id, TxType::Registration, now);
        let mut tx = CrossChainTransaction {
            header,
            payload: PayloadEnvelope::Registration(RegistrationPayload {
                key_message: self.exchange_point(),
                router_addr: self.config.addr,
                access_control_table: self.acl.clone(),
            }),
        };
        tx.sign(&self.keypair);
        Ok(tx)
    }

    fn seal(
        &mut self,
        dst_chain: ChainId,
        tx_type: TxType,
        payload: &CrossChainPayload,
        now: Millis,
    ) -> Result<CrossChainTransaction, RouterError> {
        let key = self.key.clone().ok_or(RouterError::NotRegistered)?;
        let header = self.header(dst_chain, tx_type, now);
        let nonce = self.nonces.next_nonce().map_err(RouterError::Crypto)?;
        let sealed = seal_payload(&key, nonce, &header, payload);
        let mut tx = CrossChainTransaction { header, payload: PayloadEnvelope::Sealed(sealed) };
        tx.sign(&self.keypair);
        Ok(tx)
    }

    /// Packs a user-signed request emitted on this chain.
    pub fn pack(
        &mut self,
        dst_chain: ChainId,
        payload: &CrossChainPayload,
        now: Millis,
    ) -> Result<CrossChainTransaction, RouterError> {
        if !payload.verify_originator() {
            return Err(RouterError::BadOriginatorSignature);
        }
        self.pack_unverified(dst_chain, payload, now)
    }

    pub fn pack_event(&mut self, event: &CrossChainEvent, now: Millis) -> Result<CrossChainTransaction, RouterError> {
        self.pack(event.dst_chain, &event.payload, now)
    }

    /// Same as [`pack`](Self::pack) without the originator check, as a
    /// compromised router would do.
    pub fn pack_unverified(
        &mut self,
        dst_chain: ChainId,
        payload: &CrossChainPayload,
        now: Millis,
    ) -> Result<CrossChainTransaction, RouterError> {
        let mut payload = payload.clone();
        payload.session_hash = Hash32::ZERO;
        let tx = self.seal(dst_chain, TxType::Request, &payload, now)?;
        if payload.callback.is_some() {
            self.outstanding.insert(tx_hash(&tx), Outstanding { dst_chain, sent_at: now });
        }
        Ok(tx)
    }

    /// Decrypts a forward from the relay. Each request executes at most once
    /// and each outstanding request accepts at most one response.
    pub fn receive(&mut self, env: &ForwardEnvelope) -> Result<Inbound, RouterError> {
        if env.dst_chain != self.config.chain {
            return Err(RouterError::WrongDestination(env.dst_chain));
        }
        let key = self.key.as_ref().ok_or(RouterError::NotRegistered)?;
        let payload = env.open(key).map_err(|e: OpenError| match e {
            OpenError::Authentication | OpenError::Malformed(_) => RouterError::Decrypt,
        })?;
        match env.tx_type {
            TxType::Request => {
                if !self.executed.insert(env.request_hash) {
                    return Err(RouterError::DuplicateRequest);
                }
                Ok(Inbound::Request(InboundRequest { request_hash: env.request_hash, src_chain: env.src_chain, payload }))
            }
            TxType::Response => {
                let session = payload.session_hash;
                if self.answered.contains(&session) {
                    return Err(RouterError::DuplicateResponse);
                }
                if self.outstanding.remove(&session).is_none() {
                    return Err(RouterError::UnknownSession);
                }
                self.answered.insert(session);
                Ok(Inbound::Response(InboundResponse { session, src_chain: env.src_chain, payload }))
            }
            TxType::Registration => Err(RouterError::Decrypt),
        }
    }

    /// Builds the response for an executed request: the named callback with
    /// the encoded result appended, signed by this router as originator.
    pub fn pack_response(
        &mut self,
        request: &InboundRequest,
        result: &Result<Vec<u8>, String>,
        now: Millis,
    ) -> Result<CrossChainTransaction, RouterError> {
        let callback = request.payload.callback.as_ref().ok_or(RouterError::NoCallback)?;
        let mut args = callback.args.clone();
        args.push(encode_result(result));
        let mut payload = CrossChainPayload {
            src_contract: request.payload.dst_contract.clone(),
            dst_contract: request.payload.src_contract.clone(),
            timestamp2: now,
            originator_public_key: self.keypair.public_key(),
            originator_signature: Signature::EMPTY,
            session_hash: request.request_hash,
            timeout: request.payload.timeout,
            input: Call::new(callback.function.clone(), args),
            callback: None,
            extra: Vec::new(),
        };
        payload.sign_originator(&self.keypair);
        self.seal(request.src_chain, TxType::Response, &payload, now)
    }

    /// Stops waiting for one response. Returns whether it was outstanding.
    pub fn abandon(&mut self, session: &Hash32) -> bool {
        self.outstanding.remove(session).is_some()
    }

    /// Requests with no response after `timeout` are dropped and returned.
    pub fn expire_outstanding(&mut self, now: Millis, timeout: u64) -> Vec<Hash32> {
        let expired: Vec<Hash32> = self
            .outstanding
            .iter()
            .filter(|(_, o)| now > o.sent_at.saturating_add(timeout))
            .map(|(h, _)| *h)
            .collect();
        for h in &expired {
            self.outstanding.remove(h);
        }
        expired
    }

    pub fn save(&self, path: &Path) -> Result<(), RouterError> {
        let state = RouterState {
            config: self.config.clone(),
            signing_key: hex::encode(self.keypair.secret_bytes()),
            exchange_secret: hex::encode(self.exchange_secret.to_be_bytes()),
            key: self.key.as_ref().map(|k| hex::encode(k.as_bytes())),
            acl: crate::acl::format_rules(&self.acl),
            next_seq: self.next_seq,
            nonces: self.nonces.clone(),
            outstanding: self.outstanding.iter().map(|(h, o)| (h.to_hex(), o.clone())).collect(),
            answered: self.answered.iter().copied().collect(),
            executed: self.executed.iter().copied().collect(),
        };
        let text = serde_json::to_string_pretty(&state).map_err(|e| RouterError::State(e.to_string()))?;
        std::fs::write(path, text).map_err(|e| RouterError::State(e.to_string()))
    }

    pub fn load(path: &Path) -> Result<Self, RouterError> {
        let err = |e: &dyn std::fmt::Display| RouterError::State(e.to_string());
        let text = std::fs::read_to_string(path).map_err(|e| err(&e))?;
        let s: RouterState = serde_json::from_str(&text).map_err(|e| err(&e))?;
        let bytes32 = |h: &str| -> Result<[u8; 32], RouterError> {
            hex::decode(h).map_err(|e| err(&e))?.try_into().map_err(|_| RouterError::State("key length".into()))
        };
        let outstanding = s
            .outstanding
            .into_iter()
            .map(|(h, o)| h.parse::<Hash32>().map(|h| (h, o)).map_err(|e| err(&e)))
            .collect::<Result<_, _>>()?;
        Ok(Self {
            keypair: SigningKeypair::from_secret_bytes(&bytes32(&s.signing_key)?).map_err(RouterError::Crypto)?,
            exchange_secret: EcScalar::from_be_bytes(&bytes32(&s.exchange_secret)?).map_err(RouterError::Crypto)?,
            key: s.key.as_deref().map(bytes32).transpose()?.map(CommunicationKey::from_bytes),
            acl: crate::acl::parse_rules(&s.acl).map_err(|e| err(&e))?,
            config: s.config,
            next_seq: s.next_seq,
            nonces: s.nonces,
            outstanding,
            answered: s.answered.into_iter().collect(),
            executed: s.executed.into_iter().collect(),
        })
    }
}

#[derive(Serialize, Deserialize)]
struct RouterState {
    config: RouterConfig,
    signing_key: String,
    exchange_secret: String,
    key: Option<String>,
    acl: String,
    next_seq: u64,
    nonces: NonceSequence,
    outstanding: BTreeMap<String, Outstanding>,
    answered: Vec<Hash32>,
    executed: Vec<Hash32>,
}
