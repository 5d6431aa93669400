use std::collections::BTreeMap;
use std::net::{Ipv4Addr, SocketAddrV4};

use rand::{RngCore, SeedableRng};
use rand_chacha::ChaCha20Rng;

use super::attestation::{measurement_of, report_data_for, signer_identity_of, AttestationAuthority, AttestationQuote};
use super::bootstrap::BootstrapState;
use super::sealing::{seal_with, unseal_with, BlobStore, Platform, SealDomain, SealPolicy, SealedBlob};
use super::EnclaveError;
use crate::acl::{AccessRequest, AccessRule, AclStore, AclVerdict, TableHandle};
use crate::ccip::wire::{Reader, Writer};
use crate::ccip::{
    decode_rule, encode_rule, open_payload, tx_hash, CcipHeader, ChainId, CodecError, CrossChainPayload,
    CrossChainTransaction, ForwardEnvelope, OpenError, PayloadEnvelope, TxType,
};
use crate::crypto::aead::{lane_relay_to_router, NonceSequence};
use crate::crypto::{
    aead_decrypt, ecdh_derive, ecdh_respond, sha256_parts, CommunicationKey, CurveParams, EcScalar, Hash32,
    KeyExchangeMessage, Nonce, PublicKey,
};
use crate::SecurityKnobs;

const BLOB_SECRET: &str = "relay-secret";
const BLOB_EPOCH: &str = "boot-epoch";
const KEY_OFFER_DOMAIN: &[u8] = b"ccrelay/key-offer/v1";

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct EnclaveConfig {
    pub build_id: String,
    pub signer: String,
}

impl Default for EnclaveConfig {
    fn default() -> Self {
        Self { build_id: "ccrelay-enclave/1".into(), signer: "ccrelay-release".into() }
    }
}

/// The relay's public key-exchange point with a quote binding it.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct KeyOffer {
    pub node_id: u32,
    pub point: KeyExchangeMessage,
    pub quote: AttestationQuote,
}

impl KeyOffer {
    /// Report data an honest quote over `point` carries.
    pub fn expected_report_data(point: &KeyExchangeMessage) -> [u8; 64] {
        let mut data = KEY_OFFER_DOMAIN.to_vec();
        data.extend_from_slice(&point.to_bytes());
        report_data_for(&data)
    }

    pub fn encode(&self) -> Vec<u8> {
        let mut w = Writer::new();
        w.u32(self.node_id).raw(&self.point.to_bytes()).raw(&self.quote.encode());
        w.into_bytes()
    }

    pub fn decode(raw: &[u8]) -> Result<Self, CodecError> {
        let mut r = Reader::new(raw);
        let node_id = r.u32()?;
        let point: [u8; 33] = r.array()?;
        let point = KeyExchangeMessage::from_bytes(&point).map_err(|_| CodecError::InvalidPoint("offer point"))?;
        let quote = AttestationQuote::read(&mut r)?;
        r.finish()?;
        Ok(Self { node_id, point, quote })
    }
}

/// Proof that a router key was installed. The fingerprint is a one-way hash
/// of the communication key, comparable with the router's own.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct KeyExchangeAck {
    pub router: PublicKey,
    pub chain: ChainId,
    pub key_fingerprint: Hash32,
}

pub fn key_fingerprint(key: &CommunicationKey) -> Hash32 {
    sha256_parts(&[b"ccrelay/key-fingerprint/v1", key.as_bytes()])
}

/// Opaque reference to a payload decrypted inside the enclave.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct UnpackHandle(u64);

#[derive(Clone, Debug, PartialEq, Eq, thiserror::Error)]
pub enum UnpackError {
    #[error("router is not registered")]
    UnknownRouter,
    #[error("router is registered for a different chain")]
    RouterChainMismatch,
    #[error("router signature does not verify")]
    BadRouterSignature,
    #[error("payload authentication failed")]
    Aead,
    #[error("malformed: {0}")]
    Malformed(&'static str),
    #[error("expired")]
    Expired,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum VerifiedKind {
    /// A request; `expects_response` is set when it names a callback.
    Request { timeout: u64, expects_response: bool },
    /// A response for the session opened by request `session`.
    Response { session: Hash32 },
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum DenyReason {
    BadOriginatorSignature,
    AccessDenied,
    Expired,
    UnknownSession,
    Malformed,
}

impl DenyReason {
    pub fn code(&self) -> &'static str {
        match self {
            DenyReason::BadOriginatorSignature => "bad-originator-signature",
            DenyReason::AccessDenied => "access-denied",
            DenyReason::Expired => "expired",
            DenyReason::UnknownSession => "unknown-session",
            DenyReason::Malformed => "malformed",
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum Verification {
    Verified(VerifiedKind),
    Denied(DenyReason),
}

struct RouterEntry {
    chain: ChainId,
    addr: SocketAddrV4,
    point: KeyExchangeMessage,
    key: CommunicationKey,
}

/// What a response must match, captured when its request was verified.
struct SessionBinding {
    src_chain: ChainId,
    dst_chain: ChainId,
    src_contract: String,
    callback_function: Option<String>,
}

struct Opened {
    tx_hash: Hash32,
    header: CcipHeader,
    payload: CrossChainPayload,
    verified: bool,
}

/// One relay node's enclave. Secrets and plaintext stay in private fields;
/// public operations return verdicts, handles, quotes, sealed blobs, public
/// points or ciphertexts.
pub struct EnclaveInstance {
    node_id: u32,
    platform: Platform,
    measurement: Hash32,
    signer: Hash32,
    quoter: AttestationAuthority,
    rng: ChaCha20Rng,
    store: BlobStore,
    knobs: SecurityKnobs,
    secret: Option<EcScalar>,
    routers: BTreeMap<PublicKey, RouterEntry>,
    acl: AclStore,
    sessions: BTreeMap<Hash32, SessionBinding>,
    opened: BTreeMap<u64, Opened>,
    next_handle: u64,
    epoch: u32,
    forward_nonces: NonceSequence,
    pub(super) bootstrap: BootstrapState,
}

impl EnclaveInstance {
    /// Starts an enclave. Sealed state already in `store` (from an earlier
    /// run of the same identity on the same platform) is restored.
    pub fn launch(
        node_id: u32,
        platform: Platform,
        config: &EnclaveConfig,
        quoter: AttestationAuthority,
        store: BlobStore,
        rng_seed: u64,
    ) -> Result<Self, EnclaveError> {
        let mut enclave = Self {
            node_id,
            measurement: measurement_of(&config.build_id),
            signer: signer_identity_of(&config.signer),
            platform,
            quoter,
            rng: ChaCha20Rng::seed_from_u64(rng_seed),
            store,
            knobs: SecurityKnobs::default(),
            secret: None,
            routers: BTreeMap::new(),
            acl: AclStore::new(),
            sessions: BTreeMap::new(),
            opened: BTreeMap::new(),
            next_handle: 1,
            epoch: 0,
            forward_nonces: NonceSequence::new(lane_relay_to_router(node_id)),
            bootstrap: BootstrapState::default(),
        };
        enclave.restore()?;
        Ok(enclave)
    }

    fn restore(&mut self) -> Result<(), EnclaveError> {
        if let Some(blob) = self.store.get(BLOB_EPOCH)? {
            let raw = self.unseal_internal(&blob)?;
            let prev: [u8; 4] = raw.as_slice().try_into().map_err(|_| EnclaveError::Storage("epoch".into()))?;
            self.epoch = u32::from_be_bytes(prev).checked_add(1).ok_or(EnclaveError::Storage("epoch".into()))?;
        }
        let epoch_blob = self.seal_internal(&self.epoch.to_be_bytes());
        self.store.put(BLOB_EPOCH, &epoch_blob)?;
        // Forward counters restart in a fresh 2^32 window per boot, so a
        // restarted node never reuses a nonce under a router key.
        self.forward_nonces = NonceSequence::resume(lane_relay_to_router(self.node_id), u64::from(self.epoch) << 32);

        if let Some(blob) = self.store.get(BLOB_SECRET)? {
            let raw = self.unseal_internal(&blob)?;
            self.secret = Some(EcScalar::from_be_bytes(&raw).map_err(EnclaveError::Crypto)?);
        }
        for name in self.store.names() {
            if let Some(hex_pk) = name.strip_prefix("router-") {
                let blob = self.store.get(&name)?.expect("listed");
                let raw = self.unseal_internal(&blob)?;
                let pk: PublicKey = hex_pk.parse().map_err(|_| EnclaveError::Storage(name.clone()))?;
                let entry = decode_router_entry(&raw).ok_or_else(|| EnclaveError::Storage(name.clone()))?;
                self.routers.insert(pk, entry);
            } else if let Some(chain) = name.strip_prefix("acl-") {
                let blob = self.store.get(&name)?.expect("listed");
                let raw = self.unseal_internal(&blob)?;
                let chain: ChainId = chain.parse().map_err(|_| EnclaveError::Storage(name.clone()))?;
                let rules = decode_rules(&raw).ok_or_else(|| EnclaveError::Storage(name.clone()))?;
                self.acl.register_table(chain, rules).map_err(EnclaveError::Acl)?;
            }
        }
        Ok(())
    }

    pub fn node_id(&self) -> u32 {
        self.node_id
    }

    pub fn measurement(&self) -> Hash32 {
        self.measurement
    }

    pub fn signing_identity(&self) -> Hash32 {
        self.signer
    }

    pub fn platform_id(&self) -> [u8; 16] {
        self.platform.id()
    }

    pub fn boot_epoch(&self) -> u32 {
        self.epoch
    }

    pub fn set_knobs(&mut self, knobs: SecurityKnobs) {
        self.knobs = knobs;
    }

    pub fn has_secret(&self) -> bool {
        self.secret.is_some()
    }

    pub fn has_router(&self, router: &PublicKey) -> bool {
        self.routers.contains_key(router)
    }

    /// `A = s*G`, once the relay secret is established.
    pub fn public_point(&self) -> Option<KeyExchangeMessage> {
        self.secret.as_ref().map(|s| ecdh_respond(&CurveParams::secp256k1(), s))
    }

    // Sealing.

    fn identity_for(&self, policy: SealPolicy) -> Hash32 {
        match policy {
            SealPolicy::EnclaveIdentity => self.measurement,
            SealPolicy::SigningIdentity => self.signer,
        }
    }

    fn fresh_nonce(&mut self) -> Nonce {
        let mut n = [0u8; 12];
        self.rng.fill_bytes(&mut n);
        Nonce(n)
    }

    pub fn seal(&mut self, policy: SealPolicy, plaintext: &[u8]) -> SealedBlob {
        let key = self.platform.seal_key(policy, &self.identity_for(policy));
        let nonce = self.fresh_nonce();
        seal_with(&key, policy, SealDomain::Public, nonce, plaintext)
    }

    /// Opens a blob produced by [`seal`](Self::seal) under a matching identity.
    pub fn unseal(&self, blob: &SealedBlob) -> Result<Vec<u8>, EnclaveError> {
        let key = self.platform.seal_key(blob.policy, &self.identity_for(blob.policy));
        unseal_with(&key, SealDomain::Public, blob)
    }

    fn seal_internal(&mut self, plaintext: &[u8]) -> SealedBlob {
        let policy = SealPolicy::EnclaveIdentity;
        let key = self.platform.seal_key(policy, &self.measurement);
        let nonce = self.fresh_nonce();
        seal_with(&key, policy, SealDomain::Internal, nonce, plaintext)
    }

    fn unseal_internal(&self, blob: &SealedBlob) -> Result<Vec<u8>, EnclaveError> {
        let key = self.platform.seal_key(blob.policy, &self.identity_for(blob.policy));
        unseal_with(&key, SealDomain::Internal, blob)
    }

    pub(super) fn install_secret(&mut self, secret: EcScalar) -> Result<KeyExchangeMessage, EnclaveError> {
        let blob = self.seal_internal(&secret.to_be_bytes());
        self.store.put(BLOB_SECRET, &blob)?;
        self.secret = Some(secret);
        Ok(self.public_point().expect("just installed"))
    }

    // Attestation.

    pub fn produce_quote(&self, report_data: [u8; 64]) -> AttestationQuote {
        self.quoter.issue(self.measurement, self.platform.id(), report_data)
    }

    pub(super) fn quote_authority(&self) -> PublicKey {
        self.quoter.public_key()
    }

    pub(super) fn rng(&mut self) -> &mut ChaCha20Rng {
        &mut self.rng
    }

    // Key exchange.

    pub fn key_offer(&self) -> Result<KeyOffer, EnclaveError> {
        let point = self.public_point().ok_or(EnclaveError::NoSecret)?;
        let quote = self.produce_quote(KeyOffer::expected_report_data(&point));
        Ok(KeyOffer { node_id: self.node_id, point, quote })
    }

    /// Derives `k = s*B` for a router, seals it and keeps it inside.
    pub fn enclave_keyexchange(
        &mut self,
        router_point: &KeyExchangeMessage,
        router: PublicKey,
        chain: ChainId,
        addr: SocketAddrV4,
    ) -> Result<KeyExchangeAck, EnclaveError> {
        let secret = self.secret.as_ref().ok_or(EnclaveError::NoSecret)?;
        let key = ecdh_derive(&CurveParams::secp256k1(), secret, router_point).map_err(EnclaveError::Crypto)?;
        let fingerprint = key_fingerprint(&key);
        let entry = RouterEntry { chain, addr, point: *router_point, key };
        let blob = self.seal_internal(&encode_router_entry(&entry));
        self.store.put(&format!("router-{}", router.to_hex()), &blob)?;
        self.routers.insert(router, entry);
        Ok(KeyExchangeAck { router, chain, key_fingerprint: fingerprint })
    }

    /// Same as [`enclave_keyexchange`](Self::enclave_keyexchange) for an encoded point;
    /// off-curve encodings are rejected.
    pub fn enclave_keyexchange_bytes(
        &mut self,
        router_point: &[u8],
        router: PublicKey,
        chain: ChainId,
        addr: SocketAddrV4,
    ) -> Result<KeyExchangeAck, EnclaveError> {
        let point = KeyExchangeMessage::from_bytes(router_point).map_err(EnclaveError::Crypto)?;
        self.enclave_keyexchange(&point, router, chain, addr)
    }

    /// Whether a probe encrypted by `router` under its key opens here.
    pub fn probe(&self, router: &PublicKey, nonce: &Nonce, ciphertext: &[u8], aad: &[u8]) -> bool {
        self.routers
            .get(router)
            .is_some_and(|e| aead_decrypt(&e.key, nonce, ciphertext, aad).is_ok())
    }

    pub fn register_acl(&mut self, chain: ChainId, rules: Vec<AccessRule>) -> Result<TableHandle, EnclaveError> {
        let encoded = encode_rules(&rules);
        let handle = self.acl.register_table(chain, rules).map_err(EnclaveError::Acl)?;
        let blob = self.seal_internal(&encoded);
        self.store.put(&format!("acl-{chain}"), &blob)?;
        Ok(handle)
    }

    pub fn router_address(&self, router: &PublicKey) -> Option<SocketAddrV4> {
        self.routers.get(router).map(|e| e.addr)
    }

    pub fn router_point(&self, router: &PublicKey) -> Option<KeyExchangeMessage> {
        self.routers.get(router).map(|e| e.point)
    }

    // Transaction processing.

    fn open_tx(&self, tx: &CrossChainTransaction) -> Result<(CrossChainPayload, Hash32), UnpackError> {
        let sealed = match &tx.payload {
            PayloadEnvelope::Sealed(s) if tx.header.tx_type != TxType::Registration => s,
            _ => return Err(UnpackError::Malformed("not a sealed request or response")),
        };
        let entry = self.routers.get(&tx.header.router_public_key).ok_or(UnpackError::UnknownRouter)?;
        if entry.chain != tx.header.src_chain {
            return Err(UnpackError::RouterChainMismatch);
        }
        if !self.knobs.skip_router_signature && !tx.verify_router_signature() {
            return Err(UnpackError::BadRouterSignature);
        }
        let payload = open_payload(&entry.key, &tx.header, sealed).map_err(|e| match e {
            OpenError::Authentication => UnpackError::Aead,
            OpenError::Malformed(_) => UnpackError::Malformed("payload encoding"),
        })?;
        let zero = payload.session_hash.is_zero();
        match tx.header.tx_type {
            TxType::Request if !zero => return Err(UnpackError::Malformed("request with session hash")),
            TxType::Response if zero => return Err(UnpackError::Malformed("response without session hash")),
            _ => {}
        }
        Ok((payload, tx_hash(tx)))
    }

    /// Submission-time screen: everything `enclave_unpack` checks, plus expiry.
    pub fn precheck(&self, tx: &CrossChainTransaction, now: u64) -> Result<(), UnpackError> {
        let (payload, _) = self.open_tx(tx)?;
        if payload.is_expired(now) {
            return Err(UnpackError::Expired);
        }
        Ok(())
    }

    /// Checks the router signature and decrypts; the plaintext stays inside.
    pub fn enclave_unpack(&mut self, tx: &CrossChainTransaction) -> Result<UnpackHandle, UnpackError> {
        let (payload, hash) = self.open_tx(tx)?;
        let id = self.next_handle;
        self.next_handle += 1;
        self.opened.insert(id, Opened { tx_hash: hash, header: tx.header.clone(), payload, verified: false });
        Ok(UnpackHandle(id))
    }

    /// Originator signature, expiry and access control for requests; session
    /// binding for responses.
    pub fn enclave_verify(&mut self, handle: UnpackHandle, now: u64) -> Result<Verification, EnclaveError> {
        let opened = self.opened.get(&handle.0).ok_or(EnclaveError::StaleHandle)?;
        let (header, payload) = (&opened.header, &opened.payload);
        let knobs = self.knobs;
        let verdict = (|| {
            if !knobs.skip_originator_signature && !payload.verify_originator() {
                return Verification::Denied(DenyReason::BadOriginatorSignature);
            }
            if payload.is_expired(now) {
                return Verification::Denied(DenyReason::Expired);
            }
            match header.tx_type {
                TxType::Request => {
                    let allowed = knobs.skip_acl
                        || AccessRequest::project(header, payload)
                            .is_some_and(|req| self.acl.check(&req) == AclVerdict::Allow);
                    if !allowed {
                        return Verification::Denied(DenyReason::AccessDenied);
                    }
                    Verification::Verified(VerifiedKind::Request {
                        timeout: payload.timeout,
                        expects_response: payload.callback.is_some(),
                    })
                }
                TxType::Response => {
                    let Some(binding) = self.sessions.get(&payload.session_hash) else {
                        return Verification::Denied(DenyReason::UnknownSession);
                    };
                    // Only the router of the requested chain may answer, and
                    // only into the callback the requester named.
                    let responder_ok = header.src_chain == binding.dst_chain
                        && header.dst_chain == binding.src_chain
                        && payload.originator_public_key == header.router_public_key;
                    let target_ok = payload.dst_contract == binding.src_contract
                        && binding.callback_function.as_deref() == Some(payload.input.function.as_str());
                    if !(knobs.skip_acl || responder_ok && target_ok) {
                        return Verification::Denied(DenyReason::AccessDenied);
                    }
                    Verification::Verified(VerifiedKind::Response { session: payload.session_hash })
                }
                TxType::Registration => Verification::Denied(DenyReason::Malformed),
            }
        })();
        if let Verification::Verified(kind) = &verdict {
            let (hash, binding) = (opened.tx_hash, binding_for(header, payload));
            if matches!(kind, VerifiedKind::Request { .. }) {
                self.sessions.insert(hash, binding);
            }
            self.opened.get_mut(&handle.0).expect("present").verified = true;
        }
        Ok(verdict)
    }

    /// Re-encrypts a verified payload for `dst_router` under that router's key
    /// with a fresh nonce. Consumes the handle.
    pub fn enclave_reencrypt(
        &mut self,
        handle: UnpackHandle,
        dst_router: &PublicKey,
    ) -> Result<ForwardEnvelope, EnclaveError> {
        let opened = self.opened.get(&handle.0).ok_or(EnclaveError::StaleHandle)?;
        if !opened.verified {
            return Err(EnclaveError::NotVerified);
        }
        let entry = self.routers.get(dst_router).ok_or(EnclaveError::UnknownRouter)?;
        let nonce = self.forward_nonces.next_nonce().map_err(EnclaveError::Crypto)?;
        let env = ForwardEnvelope::seal(
            &entry.key,
            nonce,
            opened.tx_hash,
            opened.header.src_chain,
            opened.header.dst_chain,
            opened.header.tx_type,
            self.node_id,
            &opened.payload,
        );
        self.opened.remove(&handle.0);
        Ok(env)
    }

    pub fn discard(&mut self, handle: UnpackHandle) {
        self.opened.remove(&handle.0);
    }

    pub fn open_handles(&self) -> usize {
        self.opened.len()
    }

    /// Follower path: learn the session binding of a request that another
    /// node verified, without re-running access control.
    pub fn absorb_request(&mut self, tx: &CrossChainTransaction) -> Result<(), UnpackError> {
        let (payload, hash) = self.open_tx(tx)?;
        if tx.header.tx_type == TxType::Request {
            self.sessions.insert(hash, binding_for(&tx.header, &payload));
        }
        Ok(())
    }
}

fn binding_for(header: &CcipHeader, payload: &CrossChainPayload) -> SessionBinding {
    SessionBinding {
        src_chain: header.src_chain,
        dst_chain: header.dst_chain,
        src_contract: payload.src_contract.clone(),
        callback_function: payload.callback.as_ref().map(|c| c.function.clone()),
    }
}

fn encode_router_entry(e: &RouterEntry) -> Vec<u8> {
    let mut w = Writer::new();
    w.u32(e.chain)
        .raw(&e.addr.ip().octets())
        .u16(e.addr.port())
        .raw(&e.point.to_bytes())
        .raw(e.key.as_bytes());
    w.into_bytes()
}

fn decode_router_entry(raw: &[u8]) -> Option<RouterEntry> {
    let mut r = Reader::new(raw);
    let chain = r.u32().ok()?;
    let ip = Ipv4Addr::from(r.array::<4>().ok()?);
    let port = r.u16().ok()?;
    let point = KeyExchangeMessage::from_bytes(&r.array::<33>().ok()?).ok()?;
    let key = CommunicationKey::from_bytes(r.array().ok()?);
    r.finish().ok()?;
    Some(RouterEntry { chain, addr: SocketAddrV4::new(ip, port), point, key })
}

fn encode_rules(rules: &[AccessRule]) -> Vec<u8> {
    let mut w = Writer::new();
    w.u32(rules.len() as u32);
    for rule in rules {
        w.bytes(&encode_rule(rule));
    }
    w.into_bytes()
}

fn decode_rules(raw: &[u8]) -> Option<Vec<AccessRule>> {
    let mut r = Reader::new(raw);
    let n = r.count(4).ok()?;
    let rules = (0..n).map(|_| decode_rule(r.bytes().ok()?).ok()).collect::<Option<Vec<_>>>()?;
    r.finish().ok()?;
    Some(rules)
}

// Test-only introspection port. Compiled only for unit tests or with the
// `introspection` feature, never in a default build.
#[cfg(any(test, feature = "introspection"))]
impl EnclaveInstance {
    pub fn introspect_payload(&self, handle: UnpackHandle) -> Option<CrossChainPayload> {
        self.opened.get(&handle.0).map(|o| o.payload.clone())
    }

    pub fn introspect_secret(&self) -> Option<[u8; 32]> {
        self.secret.as_ref().map(EcScalar::to_be_bytes)
    }

    pub fn introspect_router_key(&self, router: &PublicKey) -> Option<CommunicationKey> {
        self.routers.get(router).map(|e| e.key.clone())
    }
}
