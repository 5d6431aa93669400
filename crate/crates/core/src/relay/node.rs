use std::collections::{BTreeMap, BTreeSet, VecDeque};
use std::net::SocketAddrV4;

use serde::Serialize;
use tracing::debug;

use super::block::{BlockEntry, ForwardRecord, KeyAnnouncement, RejectReason, RelayBlock, Verdict};
use super::config::RelayConfig;
use super::session::{SessionRecord, SessionState, SessionTable};
use super::store::ChainStore;
use super::RelayError;
use crate::ccip::wire::Writer;
use crate::ccip::{decode, tx_hash, ChainId, CodecError, CrossChainTransaction, ForwardEnvelope, TxType};
use crate::crypto::{sha256, Hash32, KeyExchangeMessage, PublicKey, Signature, SigningKeypair};
use crate::enclave::{DenyReason, EnclaveError, EnclaveInstance, KeyOffer, UnpackError, Verification, VerifiedKind};
use crate::Millis;

#[derive(Clone, Debug, PartialEq, Eq, thiserror::Error)]
pub enum SubmitError {
    #[error("undecodable transaction: {0}")]
    Decode(CodecError),
    #[error("rejected: {}", .0.code())]
    Rejected(RejectReason),
}

impl SubmitError {
    pub fn code(&self) -> &'static str {
        match self {
            SubmitError::Decode(_) => "malformed",
            SubmitError::Rejected(r) => r.code(),
        }
    }
}

impl From<RejectReason> for SubmitError {
    fn from(r: RejectReason) -> Self {
        SubmitError::Rejected(r)
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct RouterRecord {
    pub chain: ChainId,
    pub public_key: PublicKey,
    pub addr: SocketAddrV4,
    pub registered_height: u64,
}

/// A forward waiting to be sent to a destination router.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Delivery {
    pub height: u64,
    pub tx_hash: Hash32,
    pub dst_router: PublicKey,
    pub addr: SocketAddrV4,
    pub envelope: ForwardEnvelope,
    pub attempt: u32,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct ForwardFailure {
    pub height: u64,
    pub tx_hash: Hash32,
    pub dst_router: PublicKey,
    pub attempts: u32,
}

struct Pending {
    tx: CrossChainTransaction,
    arrival: u64,
}

/// One relay-chain node: untrusted host logic around an [`EnclaveInstance`].
pub struct RelayNode {
    id: u32,
    config: RelayConfig,
    keypair: SigningKeypair,
    enclave: EnclaveInstance,
    chain: Vec<RelayBlock>,
    tip_hash: Hash32,
    mempool: Vec<Pending>,
    arrivals: u64,
    seen: BTreeSet<(PublicKey, u64)>,
    newest_ts1: BTreeMap<PublicKey, u64>,
    routers: BTreeMap<ChainId, RouterRecord>,
    router_chain: BTreeMap<PublicKey, ChainId>,
    sessions: SessionTable,
    outbox: VecDeque<Delivery>,
    failures: Vec<ForwardFailure>,
    store: Option<ChainStore>,
}

impl RelayNode {
    pub fn new(
        id: u32,
        config: RelayConfig,
        keypair: SigningKeypair,
        mut enclave: EnclaveInstance,
    ) -> Result<Self, RelayError> {
        if config.authority(id) != Some(&keypair.public_key()) {
            return Err(RelayError::NotAnAuthority(id));
        }
        if enclave.node_id() != id {
            return Err(RelayError::EnclaveMismatch);
        }
        enclave.set_knobs(config.knobs);
        Ok(Self {
            id,
            config,
            keypair,
            enclave,
            chain: Vec::new(),
            tip_hash: Hash32::ZERO,
            mempool: Vec::new(),
            arrivals: 0,
            seen: BTreeSet::new(),
            newest_ts1: BTreeMap::new(),
            routers: BTreeMap::new(),
            router_chain: BTreeMap::new(),
            sessions: SessionTable::default(),
            outbox: VecDeque::new(),
            failures: Vec::new(),
            store: None,
        })
    }

    /// Persists every block this node appends from now on.
    pub fn with_store(mut self, store: ChainStore) -> Self {
        self.store = Some(store);
        self
    }

    /// Rebuilds host state by replaying a stored chain.
    pub fn replay(&mut self, blocks: Vec<RelayBlock>) -> Result<(), RelayError> {
        let store = self.store.take();
        let result = blocks.into_iter().try_for_each(|b| self.apply_block(b));
        self.store = store;
        result
    }

    pub fn id(&self) -> u32 {
        self.id
    }

    pub fn config(&self) -> &RelayConfig {
        &self.config
    }

    pub fn public_key(&self) -> PublicKey {
        self.keypair.public_key()
    }

    pub fn enclave(&self) -> &EnclaveInstance {
        &self.enclave
    }

    pub fn enclave_mut(&mut self) -> &mut EnclaveInstance {
        &mut self.enclave
    }

    pub fn key_offer(&self) -> Result<KeyOffer, EnclaveError> {
        self.enclave.key_offer()
    }

    pub fn height(&self) -> u64 {
        self.chain.len() as u64
    }

    pub fn tip_hash(&self) -> Hash32 {
        self.tip_hash
    }

    pub fn blocks(&self) -> &[RelayBlock] {
        &self.chain
    }

    pub fn mempool_len(&self) -> usize {
        self.mempool.len()
    }

    pub fn sessions(&self) -> &SessionTable {
        &self.sessions
    }

    pub fn routers(&self) -> impl Iterator<Item = &RouterRecord> {
        self.routers.values()
    }

    pub fn router_for_chain(&self, chain: ChainId) -> Option<&RouterRecord> {
        self.routers.get(&chain)
    }

    pub fn forward_failures(&self) -> &[ForwardFailure] {
        &self.failures
    }

    pub fn is_scheduled(&self, height: u64) -> bool {
        self.config.scheduled_producer(height) == self.id
    }

    /// Whether a block is due: `B` pending transactions, or `T` elapsed since
    /// the last block with anything pending.
    pub fn block_due(&self, now: Millis) -> bool {
        if self.mempool.is_empty() || !self.is_scheduled(self.height() + 1) {
            return false;
        }
        let last = self.chain.last().map_or(0, |b| b.timestamp);
        self.mempool.len() >= self.config.batch_size || now.saturating_sub(last) >= self.config.batch_interval
    }

    // Submission.

    pub fn submit(&mut self, raw: &[u8], now: Millis) -> Result<Hash32, SubmitError> {
        let tx = decode(raw).map_err(SubmitError::Decode)?;
        self.submit_tx(tx, now)
    }

    /// Screens a transaction and queues it for the next block.
    pub fn submit_tx(&mut self, tx: CrossChainTransaction, now: Millis) -> Result<Hash32, SubmitError> {
        let result = self.screen(&tx, now);
        if let Err(e) = &result {
            debug!(node = self.id, seq = tx.header.seq_num, reason = e.code(), "submission rejected");
            return Err(e.clone());
        }
        let hash = tx_hash(&tx);
        self.arrivals += 1;
        self.mempool.push(Pending { tx, arrival: self.arrivals });
        Ok(hash)
    }

    fn screen(&self, tx: &CrossChainTransaction, now: Millis) -> Result<(), SubmitError> {
        let knobs = self.config.knobs;
        let h = &tx.header;
        if !tx.envelope_matches_type() {
            return Err(RejectReason::Malformed.into());
        }
        if !knobs.skip_router_signature && !tx.verify_router_signature() {
            return Err(RejectReason::BadRouterSignature.into());
        }
        if h.tx_type == TxType::Registration {
            self.check_registration(tx)?;
        } else {
            match self.router_chain.get(&h.router_public_key) {
                None => return Err(RejectReason::UnknownRouter.into()),
                Some(c) if *c != h.src_chain => return Err(RejectReason::RouterChainMismatch.into()),
                Some(_) => {}
            }
        }
        let key = (h.router_public_key, h.seq_num);
        if !knobs.skip_replay_check
            && (self.seen.contains(&key) || self.mempool.iter().any(|p| pending_key(&p.tx) == key))
        {
            return Err(RejectReason::Replay.into());
        }
        if !knobs.skip_ordering && self.out_of_window(tx) {
            return Err(RejectReason::OutOfWindow.into());
        }
        if h.tx_type != TxType::Registration {
            self.enclave.precheck(tx, now).map_err(|e| SubmitError::Rejected(e.into()))?;
        }
        Ok(())
    }

    fn check_registration(&self, tx: &CrossChainTransaction) -> Result<(), RejectReason> {
        let h = &tx.header;
        if h.dst_chain != self.config.relay_chain_id || tx.registration().is_none() {
            return Err(RejectReason::Malformed);
        }
        if self.config.router_certificates.get(&h.src_chain) != Some(&h.router_public_key) {
            return Err(RejectReason::NotCertified);
        }
        if !self.enclave.has_secret() {
            return Err(RejectReason::NoRelaySecret);
        }
        Ok(())
    }

    fn out_of_window(&self, tx: &CrossChainTransaction) -> bool {
        self.newest_ts1
            .get(&tx.header.router_public_key)
            .is_some_and(|newest| tx.header.timestamp1 < *newest)
    }

    // Block production.

    /// Builds, signs and appends the next block from up to `B` pending
    /// transactions. Only the scheduled producer may call this.
    pub fn produce_block(&mut self, now: Millis) -> Result<RelayBlock, RelayError> {
        let height = self.height() + 1;
        if !self.is_scheduled(height) {
            return Err(RelayError::NotScheduled { height, node: self.id });
        }
        let timestamp = now.max(self.chain.last().map_or(0, |b| b.timestamp));
        self.sessions.sweep(timestamp);

        if self.config.knobs.skip_ordering {
            self.mempool.sort_by_key(|p| p.arrival);
        } else {
            self.mempool.sort_by_key(|p| (p.tx.header.timestamp1, p.tx.header.seq_num, p.arrival));
        }
        let take = self.mempool.len().min(self.config.batch_size.max(1));
        let batch: Vec<Pending> = self.mempool.drain(..take).collect();

        let mut entries = Vec::with_capacity(batch.len());
        let mut key_announcements = Vec::new();
        for p in batch {
            let (verdict, forward) = self.process(&p.tx, height, timestamp, &mut key_announcements);
            self.note_included(&p.tx, &verdict);
            if let Some(f) = &forward {
                if let Some(r) = self.routers.values().find(|r| r.public_key == f.dst_router) {
                    self.outbox.push_back(Delivery {
                        height,
                        tx_hash: tx_hash(&p.tx),
                        dst_router: f.dst_router,
                        addr: r.addr,
                        envelope: f.envelope.clone(),
                        attempt: 1,
                    });
                }
            }
            entries.push(BlockEntry { tx: p.tx, verdict, forward });
        }

        let mut block = RelayBlock {
            height,
            parent_hash: self.tip_hash,
            timestamp,
            producer: self.id,
            entries,
            key_announcements,
            signature: Signature::EMPTY,
        };
        block.sign(&self.keypair);
        self.append(block.clone())?;
        Ok(block)
    }

    fn process(
        &mut self,
        tx: &CrossChainTransaction,
        height: u64,
        now: Millis,
        announcements: &mut Vec<KeyAnnouncement>,
    ) -> (Verdict, Option<ForwardRecord>) {
        let knobs = self.config.knobs;
        let key = pending_key(tx);
        if !knobs.skip_replay_check && self.seen.contains(&key) {
            return (Verdict::Rejected(RejectReason::Replay), None);
        }
        if !knobs.skip_ordering && self.out_of_window(tx) {
            return (Verdict::Rejected(RejectReason::OutOfWindow), None);
        }
        if tx.header.tx_type == TxType::Registration {
            let v = match self.check_registration(tx).and_then(|_| self.register(tx, height)) {
                Ok(a) => {
                    announcements.push(a);
                    Verdict::Registered
                }
                Err(r) => Verdict::Rejected(r),
            };
            return (v, None);
        }
        self.process_sealed(tx, height, now)
    }

    fn register(&mut self, tx: &CrossChainTransaction, height: u64) -> Result<KeyAnnouncement, RejectReason> {
        let reg = tx.registration().ok_or(RejectReason::Malformed)?;
        let h = &tx.header;
        self.enclave
            .register_acl(h.src_chain, reg.access_control_table.clone())
            .map_err(|_| RejectReason::Malformed)?;
        self.enclave
            .enclave_keyexchange(&reg.key_message, h.router_public_key, h.src_chain, reg.router_addr)
            .map_err(|e| match e {
                EnclaveError::NoSecret => RejectReason::NoRelaySecret,
                _ => RejectReason::Malformed,
            })?;
        if let Some(old) = self.routers.get(&h.src_chain) {
            self.router_chain.remove(&old.public_key);
        }
        self.routers.insert(
            h.src_chain,
            RouterRecord {
                chain: h.src_chain,
                public_key: h.router_public_key,
                addr: reg.router_addr,
                registered_height: height,
            },
        );
        self.router_chain.insert(h.router_public_key, h.src_chain);
        Ok(KeyAnnouncement { router: h.router_public_key, chain: h.src_chain, point: reg.key_message })
    }

    fn process_sealed(
        &mut self,
        tx: &CrossChainTransaction,
        height: u64,
        now: Millis,
    ) -> (Verdict, Option<ForwardRecord>) {
        let handle = match self.enclave.enclave_unpack(tx) {
            Ok(h) => h,
            Err(e) => return (Verdict::Rejected(RejectReason::from(e)), None),
        };
        let verification = match self.enclave.enclave_verify(handle, now) {
            Ok(v) => v,
            Err(_) => {
                self.enclave.discard(handle);
                return (Verdict::Rejected(RejectReason::Malformed), None);
            }
        };
        let verdict = match verification {
            Verification::Denied(d) => {
                self.enclave.discard(handle);
                return (Verdict::Denied(d), None);
            }
            Verification::Verified(VerifiedKind::Request { timeout, expects_response }) => {
                if expects_response {
                    Verdict::Opened { timeout }
                } else {
                    Verdict::Delivered
                }
            }
            Verification::Verified(VerifiedKind::Response { session }) => {
                match self.sessions.get(&session).map(|s| s.state) {
                    None => {
                        self.enclave.discard(handle);
                        return (Verdict::Denied(DenyReason::UnknownSession), None);
                    }
                    Some(SessionState::Responded) => {
                        self.enclave.discard(handle);
                        return (Verdict::DuplicateResponse { session }, None);
                    }
                    Some(SessionState::Expired) => {
                        self.enclave.discard(handle);
                        return (Verdict::SessionExpired { session }, None);
                    }
                    Some(SessionState::Open) => Verdict::Closed { session },
                }
            }
        };
        let Some(dst) = self.routers.get(&tx.header.dst_chain).map(|r| r.public_key) else {
            self.enclave.discard(handle);
            return (Verdict::Rejected(RejectReason::UnknownDestination), None);
        };
        let envelope = match self.enclave.enclave_reencrypt(handle, &dst) {
            Ok(e) => e,
            Err(_) => return (Verdict::Rejected(RejectReason::UnknownDestination), None),
        };
        self.apply_session_effect(tx, &verdict, height, now);
        (verdict, Some(ForwardRecord { dst_router: dst, envelope }))
    }

    /// Session-table change implied by a verdict; shared by producer and followers.
    fn apply_session_effect(&mut self, tx: &CrossChainTransaction, verdict: &Verdict, height: u64, at: Millis) {
        match verdict {
            Verdict::Opened { timeout } => self.sessions.open(SessionRecord {
                session: tx_hash(tx),
                src_chain: tx.header.src_chain,
                dst_chain: tx.header.dst_chain,
                opened_height: height,
                opened_at: at,
                timeout: *timeout,
                state: SessionState::Open,
                closed_at: None,
                response: None,
            }),
            Verdict::Closed { session } => {
                self.sessions.respond(session, tx_hash(tx), at);
            }
            _ => {}
        }
    }

    /// Records `(router, seq)` and the router's newest `timestamp1` for
    /// transactions whose router was authenticated.
    fn note_included(&mut self, tx: &CrossChainTransaction, verdict: &Verdict) {
        if let Verdict::Rejected(
            RejectReason::Replay
            | RejectReason::OutOfWindow
            | RejectReason::BadRouterSignature
            | RejectReason::UnknownRouter
            | RejectReason::RouterChainMismatch
            | RejectReason::NotCertified,
        ) = verdict
        {
            return;
        }
        let (pk, seq) = pending_key(tx);
        self.seen.insert((pk, seq));
        let newest = self.newest_ts1.entry(pk).or_insert(0);
        *newest = (*newest).max(tx.header.timestamp1);
    }

    fn append(&mut self, block: RelayBlock) -> Result<(), RelayError> {
        if let Some(store) = &self.store {
            store.append(&block).map_err(|e| RelayError::Storage(e.to_string()))?;
        }
        self.tip_hash = block.hash();
        self.chain.push(block);
        Ok(())
    }

    // Following.

    /// Checks a block from another producer and replays its effects.
    pub fn apply_block(&mut self, block: RelayBlock) -> Result<(), RelayError> {
        let expected = self.height() + 1;
        if block.height != expected {
            return Err(RelayError::WrongHeight { expected, got: block.height });
        }
        if block.parent_hash != self.tip_hash {
            return Err(RelayError::WrongParent { height: block.height });
        }
        let scheduled = self.config.scheduled_producer(block.height);
        if block.producer != scheduled {
            return Err(RelayError::WrongProducer { height: block.height, producer: block.producer });
        }
        let key = self.config.authority(scheduled).ok_or(RelayError::NotAnAuthority(scheduled))?;
        if !block.verify_signature(key) {
            return Err(RelayError::BadBlockSignature { height: block.height });
        }
        if block.timestamp < self.chain.last().map_or(0, |b| b.timestamp) {
            return Err(RelayError::TimestampRegression { height: block.height });
        }

        self.sessions.sweep(block.timestamp);
        for e in &block.entries {
            match &e.verdict {
                Verdict::Registered => {
                    if let Err(r) = self.register(&e.tx, block.height) {
                        debug!(node = self.id, height = block.height, reason = r.code(), "follower registration failed");
                    }
                }
                Verdict::Opened { .. } => {
                    if let Err(err) = self.enclave.absorb_request(&e.tx) {
                        debug!(node = self.id, height = block.height, %err, "follower could not absorb request");
                    }
                }
                _ => {}
            }
            self.apply_session_effect(&e.tx, &e.verdict, block.height, block.timestamp);
            self.note_included(&e.tx, &e.verdict);
            let included = pending_key(&e.tx);
            self.mempool.retain(|p| pending_key(&p.tx) != included);
        }
        self.append(block)
    }

    // Forwarding.

    /// Forwards produced by this node that have not been handed out yet.
    pub fn take_deliveries(&mut self) -> Vec<Delivery> {
        self.outbox.drain(..).collect()
    }

    /// Reports a failed send. Requeues unless the attempt budget is spent.
    pub fn delivery_failed(&mut self, mut d: Delivery) -> bool {
        if d.attempt >= self.config.max_forward_attempts {
            self.failures.push(ForwardFailure {
                height: d.height,
                tx_hash: d.tx_hash,
                dst_router: d.dst_router,
                attempts: d.attempt,
            });
            return false;
        }
        d.attempt += 1;
        self.outbox.push_back(d);
        true
    }

    /// Digest of the replicated host state, for convergence checks.
    pub fn state_digest(&self) -> Hash32 {
        let mut w = Writer::new();
        w.raw(self.tip_hash.as_bytes());
        w.u32(self.seen.len() as u32);
        for (pk, seq) in &self.seen {
            w.raw(pk.as_bytes()).u64(*seq);
        }
        for (pk, ts) in &self.newest_ts1 {
            w.raw(pk.as_bytes()).u64(*ts);
        }
        for r in self.routers.values() {
            w.u32(r.chain).raw(r.public_key.as_bytes());
        }
        for s in self.sessions.iter() {
            w.raw(s.session.as_bytes()).u8(s.state as u8).u64(s.opened_at);
        }
        sha256(&w.into_bytes())
    }

    /// Router `B` point as installed in this node's enclave.
    pub fn router_point(&self, router: &PublicKey) -> Option<KeyExchangeMessage> {
        self.enclave.router_point(router)
    }
}

fn pending_key(tx: &CrossChainTransaction) -> (PublicKey, u64) {
    (tx.header.router_public_key, tx.header.seq_num)
}

impl From<UnpackError> for SubmitError {
    fn from(e: UnpackError) -> Self {
        SubmitError::Rejected(e.into())
    }
}
