//! Discrete-event execution of a [`Scenario`].

use std::collections::{BTreeMap, BTreeSet};
use std::net::{Ipv4Addr, SocketAddrV4};
use std::path::Path;

use rand::SeedableRng;
use serde::{Deserialize, Serialize};
use tracing::{debug, warn};

use super::adversary::{Adversary, AdversaryAction, AdversaryEvent};
use super::contract::KvContract;
use super::network::{CapturedFrame, Endpoint, Frame, FrameKind, SimNetwork};
use super::parachain::MockParachain;
use super::scenario::{user_keypair, ContractSection, FieldChoice, Scenario, ScenarioError};
use crate::ccip::{encode, tx_hash, Call, ChainId, CrossChainPayload, ForwardEnvelope};
use crate::crypto::{FieldParams, Hash32, SigningKeypair};
use crate::enclave::{
    measurement_of, AttestationAuthority, BlobStore, DenyReason, EnclaveConfig, EnclaveInstance, KeyOffer, Platform,
};
use crate::relay::{
    bootstrap_relay, BootstrapError, BootstrapFaults, BootstrapReport, ChainStore, RelayBlock, RelayConfig, RelayNode,
    Verdict,
};
use crate::router::{decode_result, CrossChainEvent, Inbound, InboundRequest, Router, RouterConfig, RouterError};
use crate::Millis;

#[derive(Debug, thiserror::Error)]
pub enum SimError {
    #[error(transparent)]
    Scenario(#[from] ScenarioError),
    #[error("relay bootstrap failed: {0}")]
    Bootstrap(#[from] BootstrapError),
    #[error("relay setup: {0}")]
    Setup(String),
    #[error("watchdog: no progress by {time} ms, {open} transactions unfinished")]
    Deadlock { time: Millis, open: usize },
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Outcome {
    Completed,
    Denied,
    Expired,
    Rejected,
}

/// Milestones of one cross-chain transaction, in virtual milliseconds.
#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TxTimeline {
    pub index: usize,
    pub label: Option<String>,
    /// Position in the workload list, `None` for adversary-built traffic.
    pub workload: Option<usize>,
    pub src_chain: ChainId,
    pub dst_chain: ChainId,
    pub request_hash: Option<Hash32>,
    pub seq_num: Option<u64>,
    pub timestamp1: Option<Millis>,
    pub emit: Millis,
    pub pack: Option<Millis>,
    pub submit: Option<Millis>,
    pub included: Option<Millis>,
    pub height: Option<u64>,
    pub forward: Option<Millis>,
    pub execute: Option<Millis>,
    pub response: Option<Millis>,
    pub callback: Option<Millis>,
    pub verdict: Option<String>,
    pub response_verdict: Option<String>,
    pub outcome: Option<Outcome>,
    pub reason: Option<String>,
    /// Execution result seen by the requester (`ok:` or `err:` prefix).
    pub result: Option<String>,
    pub timeout: u64,
    pub expects_response: bool,
}

impl TxTimeline {
    pub fn is_terminal(&self) -> bool {
        self.outcome.is_some()
    }

    /// Emission to callback (or to execution for one-way calls).
    pub fn latency(&self) -> Option<Millis> {
        let end = if self.expects_response { self.callback } else { self.execute };
        (self.outcome == Some(Outcome::Completed)).then(|| end.map(|e| e - self.emit)).flatten()
    }

    fn finish(&mut self, outcome: Outcome, reason: impl Into<String>) {
        if self.outcome.is_none() {
            self.outcome = Some(outcome);
            let reason = reason.into();
            self.reason = (!reason.is_empty()).then_some(reason);
        }
    }
}

/// A transaction frame handed to a relay node.
#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct SubmitRecord {
    pub time: Millis,
    pub node: u32,
    pub frame: u64,
    pub gossip: bool,
    pub adversarial: bool,
    pub tx_hash: Option<Hash32>,
    pub seq_num: Option<u64>,
    /// `accepted` or a reject code.
    pub result: String,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct RouterIncident {
    pub time: Millis,
    pub chain: ChainId,
    pub code: &'static str,
}

pub fn router_error_code(e: &RouterError) -> &'static str {
    match e {
        RouterError::NotRegistered => "not-registered",
        RouterError::Attestation => "attestation",
        RouterError::BadOriginatorSignature => "bad-originator-signature",
        RouterError::Decrypt => "decrypt",
        RouterError::WrongDestination(_) => "wrong-destination",
        RouterError::DuplicateRequest => "duplicate-request",
        RouterError::DuplicateResponse => "duplicate-response",
        RouterError::UnknownSession => "unknown-session",
        RouterError::NoCallback => "no-callback",
        RouterError::Crypto(_) => "crypto",
        RouterError::State(_) => "state",
    }
}

pub struct SimulationResult {
    pub scenario: Scenario,
    pub end_time: Millis,
    pub bootstrap: BootstrapReport,
    pub timelines: Vec<TxTimeline>,
    pub submissions: Vec<SubmitRecord>,
    pub router_incidents: Vec<RouterIncident>,
    pub registered: BTreeMap<ChainId, bool>,
    /// The longest chain among online nodes.
    pub blocks: Vec<RelayBlock>,
    /// Whether every online node ended with the same replicated state.
    pub converged: bool,
    pub contracts: BTreeMap<ChainId, Vec<KvContract>>,
    pub capture: Vec<CapturedFrame>,
    pub adversary_log: Vec<AdversaryEvent>,
    /// Request payloads the adversary managed to decrypt.
    pub leaked: Vec<CrossChainPayload>,
}

impl SimulationResult {
    pub fn workload(&self) -> impl Iterator<Item = &TxTimeline> {
        self.timelines.iter().filter(|t| t.workload.is_some())
    }

    pub fn all_completed(&self) -> bool {
        self.workload().all(|t| t.outcome == Some(Outcome::Completed))
    }

    pub fn contract(&self, chain: ChainId, id: &str) -> Option<&KvContract> {
        self.contracts.get(&chain)?.iter().find(|c| c.id == id)
    }

    pub fn batch_sizes(&self) -> Vec<usize> {
        self.blocks.iter().map(|b| b.entries.len()).collect()
    }
}

#[derive(Clone, Debug)]
enum ExecTag {
    Request { timeline: Option<usize>, request: InboundRequest },
    Callback { timeline: Option<usize> },
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
enum Leg {
    Request,
    Response,
}

#[derive(Clone, Debug)]
enum Timer {
    ParaBlock(ChainId),
    RelayTick,
    SendOffers,
    RegistrationDeadline,
    Emit { workload: usize, i: u32 },
    Adversary(usize),
    Deadline(usize),
}

pub(crate) fn scenario_authority() -> AttestationAuthority {
    AttestationAuthority::from_seed(b"scenario/attestation-service")
}

pub(crate) fn scenario_node_key(i: u32) -> SigningKeypair {
    SigningKeypair::from_seed(format!("scenario/relay-node-{i}").as_bytes())
}

pub(crate) fn scenario_router_key(chain: ChainId) -> SigningKeypair {
    SigningKeypair::from_seed(format!("scenario/router-{chain}").as_bytes())
}

fn router_addr(chain: ChainId) -> SocketAddrV4 {
    let [_, _, hi, lo] = chain.to_be_bytes();
    SocketAddrV4::new(Ipv4Addr::new(10, 1, hi, lo), 7000)
}

/// How long a router waits for a key offer before giving up.
const REGISTRATION_TIMEOUT: Millis = 1_000;

fn mix(seed: u64, salt: u64) -> u64 {
    let h = crate::crypto::sha256_parts(&[&seed.to_be_bytes(), &salt.to_be_bytes()]);
    u64::from_be_bytes(h.as_bytes()[..8].try_into().expect("8 bytes"))
}

fn contract_of(k: &ContractSection) -> KvContract {
    KvContract::new(k.id.clone()).with_state(k.state.iter().map(|(key, v)| (key.clone(), v.clone().into_bytes())))
}

struct Assembly {
    nodes: Vec<RelayNode>,
    bootstrap: BootstrapReport,
    routers: BTreeMap<ChainId, Router>,
}

/// Relay nodes (bootstrapped) and unregistered routers for a scenario.
fn assemble(s: &Scenario, dir: Option<&Path>) -> Result<Assembly, SimError> {
    s.validate()?;
    let r = &s.relay;
    let enclave_config = EnclaveConfig::default();

    let mut config = RelayConfig::new(r.chain_id, (0..r.nodes).map(|i| scenario_node_key(i).public_key()).collect());
    config.rotation = r.rotation;
    config.batch_size = r.batch_size;
    config.batch_interval = r.batch_interval_ms;
    config.max_forward_attempts = r.max_forward_attempts;
    config.knobs = s.knobs;
    for c in &s.chains {
        config.router_certificates.insert(c.id, scenario_router_key(c.id).public_key());
    }

    let mut nodes = Vec::new();
    for i in 0..r.nodes {
        let enclave = EnclaveInstance::launch(
            i,
            Platform::from_seed(format!("scenario/platform-{i}").as_bytes()),
            &enclave_config,
            scenario_authority(),
            BlobStore::in_memory(),
            mix(s.seed, u64::from(i)),
        )
        .map_err(|e| SimError::Setup(e.to_string()))?;
        let mut node =
            RelayNode::new(i, config.clone(), scenario_node_key(i), enclave).map_err(|e| SimError::Setup(e.to_string()))?;
        if let Some(dir) = dir {
            let store = ChainStore::open(dir.join(format!("node-{i}"))).map_err(|e| SimError::Setup(e.to_string()))?;
            node = node.with_store(store);
        }
        nodes.push(node);
    }
    let faults = BootstrapFaults { offline: r.offline.clone(), corrupt_share_to: None };
    let bootstrap = match r.field {
        FieldChoice::Toy => bootstrap_relay(&mut nodes, &FieldParams::<u64>::toy(), 0, &faults)?,
        FieldChoice::Production => bootstrap_relay(&mut nodes, &FieldParams::production(), 0, &faults)?,
    };

    let mut routers = BTreeMap::new();
    let mut rng = rand_chacha::ChaCha20Rng::seed_from_u64(mix(s.seed, 0xc4a1));
    for c in &s.chains {
        let rc = RouterConfig {
            chain: c.id,
            relay_chain_id: r.chain_id,
            addr: router_addr(c.id),
            attestation_authority: scenario_authority().public_key(),
            expected_measurement: measurement_of(&enclave_config.build_id),
            knobs: s.knobs,
        };
        let mut router = Router::new(rc, scenario_router_key(c.id), &mut rng);
        router.set_acl(s.acl_rules(c)?);
        routers.insert(c.id, router);
    }
    Ok(Assembly { nodes, bootstrap, routers })
}

/// A scenario's relay and routers with registration already done, for
/// driving the components directly instead of through the scheduler.
pub struct Deployment {
    /// Online nodes only; node 0 always produces when rotation is off.
    pub nodes: Vec<RelayNode>,
    pub routers: BTreeMap<ChainId, Router>,
    pub contracts: BTreeMap<ChainId, Vec<KvContract>>,
    pub bootstrap: BootstrapReport,
}

impl Deployment {
    /// Builds everything at time `now` and registers every router through
    /// node 0; the other online nodes apply the resulting blocks.
    pub fn new(scenario: &Scenario, now: Millis) -> Result<Self, SimError> {
        let Assembly { nodes, bootstrap, mut routers } = assemble(scenario, None)?;
        let mut nodes: Vec<RelayNode> =
            nodes.into_iter().filter(|n| !scenario.relay.offline.contains(&n.id())).collect();
        for (chain, router) in routers.iter_mut() {
            let offer = nodes[0].key_offer().map_err(|e| SimError::Setup(e.to_string()))?;
            let tx = router
                .complete_registration(&offer, now)
                .map_err(|e| SimError::Setup(format!("router {chain}: {e}")))?;
            nodes[0].submit_tx(tx, now).map_err(|e| SimError::Setup(format!("router {chain}: {}", e.code())))?;
        }
        while nodes[0].mempool_len() > 0 {
            let block = nodes[0].produce_block(now).map_err(|e| SimError::Setup(e.to_string()))?;
            nodes[0].take_deliveries();
            for n in nodes.iter_mut().skip(1) {
                n.apply_block(block.clone()).map_err(|e| SimError::Setup(e.to_string()))?;
            }
        }
        let contracts = scenario.chains.iter().map(|c| (c.id, c.contracts.iter().map(contract_of).collect())).collect();
        Ok(Self { nodes, routers, contracts, bootstrap })
    }
}

pub struct Simulation {
    scenario: Scenario,
    now: Millis,
    timers: BTreeMap<(Millis, u64), Timer>,
    timer_seq: u64,
    net: SimNetwork,
    nodes: Vec<RelayNode>,
    online: BTreeSet<u32>,
    block_buffer: BTreeMap<u32, BTreeMap<u64, RelayBlock>>,
    routers: BTreeMap<ChainId, Router>,
    registration_failed: BTreeSet<ChainId>,
    parachains: BTreeMap<ChainId, MockParachain<ExecTag>>,
    timelines: Vec<TxTimeline>,
    by_event: BTreeMap<(ChainId, usize), usize>,
    by_hash: BTreeMap<Hash32, (usize, Leg)>,
    by_frame: BTreeMap<u64, (usize, Leg)>,
    pending_emits: usize,
    pending_adversary: usize,
    submissions: Vec<SubmitRecord>,
    incidents: Vec<RouterIncident>,
    bootstrap: BootstrapReport,
}

impl Simulation {
    pub fn new(scenario: Scenario) -> Result<Self, SimError> {
        Self::build(scenario, None)
    }

    /// Like [`new`](Self::new), persisting each node's chain under `dir/node-<i>`.
    pub fn with_chain_dir(scenario: Scenario, dir: &Path) -> Result<Self, SimError> {
        Self::build(scenario, Some(dir))
    }

    fn build(scenario: Scenario, dir: Option<&Path>) -> Result<Self, SimError> {
        let Assembly { nodes, bootstrap, routers } = assemble(&scenario, dir)?;
        let s = &scenario;
        let r = &s.relay;
        let online: BTreeSet<u32> = (0..r.nodes).filter(|i| !r.offline.contains(i)).collect();
        let mut parachains = BTreeMap::new();
        for c in &s.chains {
            let mut para = MockParachain::new(c.id, c.block_interval_ms);
            for k in &c.contracts {
                para.deploy(contract_of(k));
            }
            parachains.insert(c.id, para);
        }

        let adversary = Adversary::new(s.adversary.clone());
        let mut net = SimNetwork::new(s.seed, s.network.default, adversary);
        for l in &s.network.links {
            net.set_link(l.from, l.to, l.link());
        }

        let mut sim = Self {
            now: 0,
            timers: BTreeMap::new(),
            timer_seq: 0,
            net,
            nodes,
            online,
            block_buffer: BTreeMap::new(),
            routers,
            registration_failed: BTreeSet::new(),
            parachains,
            timelines: Vec::new(),
            by_event: BTreeMap::new(),
            by_hash: BTreeMap::new(),
            by_frame: BTreeMap::new(),
            pending_emits: 0,
            pending_adversary: 0,
            submissions: Vec::new(),
            incidents: Vec::new(),
            bootstrap,
            scenario,
        };
        sim.schedule(0, Timer::SendOffers);
        sim.schedule(REGISTRATION_TIMEOUT, Timer::RegistrationDeadline);
        sim.schedule(sim.scenario.relay.batch_interval_ms, Timer::RelayTick);
        let chains: Vec<(ChainId, Millis)> =
            sim.scenario.chains.iter().map(|c| (c.id, c.block_interval_ms)).collect();
        for (id, interval) in chains {
            sim.schedule(interval, Timer::ParaBlock(id));
        }
        let emits: Vec<(usize, u32, Millis)> = sim
            .scenario
            .workload
            .iter()
            .enumerate()
            .flat_map(|(w, wl)| (0..wl.count).map(move |i| (w, i, wl.start_ms + u64::from(i) * wl.every_ms)))
            .collect();
        for (workload, i, at) in emits {
            sim.pending_emits += 1;
            sim.schedule(at, Timer::Emit { workload, i });
        }
        let clock_actions: Vec<(usize, Millis)> = sim
            .scenario
            .adversary
            .iter()
            .enumerate()
            .filter_map(|(i, a)| a.scheduled_at().map(|t| (i, t)))
            .collect();
        for (i, at) in clock_actions {
            sim.pending_adversary += 1;
            sim.schedule(at, Timer::Adversary(i));
        }
        Ok(sim)
    }

    fn schedule(&mut self, at: Millis, timer: Timer) {
        self.timer_seq += 1;
        self.timers.insert((at, self.timer_seq), timer);
    }

    fn idle(&self) -> bool {
        self.pending_emits == 0
            && self.pending_adversary == 0
            && self.timelines.iter().all(TxTimeline::is_terminal)
            && self.net.in_flight() == 0
            && self.online.iter().all(|&i| self.nodes[i as usize].mempool_len() == 0)
            && self.routers.keys().all(|c| self.routers[c].is_registered() || self.registration_failed.contains(c))
    }

    pub fn run(mut self) -> Result<SimulationResult, SimError> {
        loop {
            if self.now > 0 && self.idle() {
                break;
            }
            let next_timer = self.timers.keys().next().map(|k| k.0);
            let next_frame = self.net.next_time();
            let t = match (next_timer, next_frame) {
                (Some(a), Some(b)) => a.min(b),
                (Some(a), None) => a,
                (None, Some(b)) => b,
                (None, None) => break,
            };
            if t > self.scenario.max_time_ms {
                let open = self.timelines.iter().filter(|t| !t.is_terminal()).count() + self.pending_emits;
                return Err(SimError::Deadlock { time: self.now, open });
            }
            self.now = t;
            if next_timer == Some(t) {
                let (_, timer) = self.timers.pop_first().expect("present");
                self.on_timer(timer);
            } else {
                let (_, frame) = self.net.pop().expect("present");
                self.on_frame(frame);
            }
        }
        Ok(self.finish())
    }

    fn finish(self) -> SimulationResult {
        let online: Vec<&RelayNode> = self.online.iter().map(|&i| &self.nodes[i as usize]).collect();
        let longest = online.iter().max_by_key(|n| n.height()).expect("node 0 is online");
        let digest = longest.state_digest();
        let converged = online.iter().all(|n| n.state_digest() == digest);
        let leaked = self.net.adversary().decrypt_captured(self.net.capture());
        SimulationResult {
            end_time: self.now,
            bootstrap: self.bootstrap,
            timelines: self.timelines,
            submissions: self.submissions,
            router_incidents: self.incidents,
            registered: self.routers.iter().map(|(c, r)| (*c, r.is_registered())).collect(),
            blocks: longest.blocks().to_vec(),
            converged,
            contracts: self
                .parachains
                .iter()
                .map(|(c, p)| {
                    let ids: Vec<String> =
                        self.scenario.chain(*c).map(|s| s.contracts.iter().map(|k| k.id.clone()).collect()).unwrap_or_default();
                    (*c, ids.iter().filter_map(|id| p.contract(id).cloned()).collect())
                })
                .collect(),
            capture: self.net.capture().to_vec(),
            adversary_log: self.net.adversary().log().to_vec(),
            leaked,
            scenario: self.scenario,
        }
    }

    fn incident(&mut self, chain: ChainId, e: &RouterError) {
        debug!(chain, error = %e, "router incident");
        self.incidents.push(RouterIncident { time: self.now, chain, code: router_error_code(e) });
    }

    fn endpoint_of(&self, chain: ChainId) -> u32 {
        self.scenario.chain(chain).map_or(0, |c| c.relay_endpoint)
    }

    // Timers.

    fn on_timer(&mut self, timer: Timer) {
        match timer {
            Timer::SendOffers => {
                let chains: Vec<ChainId> = self.routers.keys().copied().collect();
                for chain in chains {
                    let node = self.endpoint_of(chain);
                    match self.nodes[node as usize].key_offer() {
                        Ok(offer) => {
                            self.net.send(self.now, Endpoint::Relay(node), Endpoint::Router(chain), FrameKind::KeyOffer, offer.encode());
                        }
                        Err(e) => {
                            warn!(node, error = %e, "no key offer");
                            self.registration_failed.insert(chain);
                        }
                    }
                }
            }
            Timer::RegistrationDeadline => {
                let stuck: Vec<ChainId> = self
                    .routers
                    .iter()
                    .filter(|(c, r)| !r.is_registered() && !self.registration_failed.contains(c))
                    .map(|(c, _)| *c)
                    .collect();
                for chain in stuck {
                    warn!(chain, "no key offer arrived");
                    self.incidents.push(RouterIncident { time: self.now, chain, code: "relay-unreachable" });
                    self.registration_failed.insert(chain);
                }
            }
            Timer::RelayTick => {
                self.maybe_produce();
                let next = self.now + self.scenario.relay.batch_interval_ms;
                self.schedule(next, Timer::RelayTick);
            }
            Timer::ParaBlock(chain) => {
                self.para_block(chain);
                let next = self.now + self.parachains[&chain].block_interval;
                self.schedule(next, Timer::ParaBlock(chain));
            }
            Timer::Emit { workload, i } => {
                self.pending_emits -= 1;
                self.emit(workload, i);
            }
            Timer::Adversary(i) => {
                self.pending_adversary -= 1;
                self.adversary_action(i);
            }
            Timer::Deadline(idx) => self.deadline(idx),
        }
    }

    fn emit(&mut self, workload: usize, i: u32) {
        let w = self.scenario.workload[workload].clone();
        let payload = w.payload(i, self.now);
        let idx = self.new_timeline(Some(workload), w.label.clone(), w.chain, w.dst_chain, &payload);
        let event = CrossChainEvent { dst_chain: w.dst_chain, payload };
        match self.parachains.get_mut(&w.chain).expect("validated").hub_emit(event) {
            Ok(receipt) => {
                self.by_event.insert((w.chain, receipt.index), idx);
            }
            Err(e) => self.timelines[idx].finish(Outcome::Rejected, e.to_string()),
        }
    }

    fn new_timeline(
        &mut self,
        workload: Option<usize>,
        label: Option<String>,
        src: ChainId,
        dst: ChainId,
        payload: &CrossChainPayload,
    ) -> usize {
        let index = self.timelines.len();
        self.timelines.push(TxTimeline {
            index,
            label,
            workload,
            src_chain: src,
            dst_chain: dst,
            emit: self.now,
            timeout: payload.timeout,
            expects_response: payload.callback.is_some(),
            ..Default::default()
        });
        self.schedule(self.now + payload.timeout, Timer::Deadline(index));
        index
    }

    fn deadline(&mut self, idx: usize) {
        let t = &self.timelines[idx];
        if t.is_terminal() {
            return;
        }
        let waiting_on_callback = t.expects_response && t.callback.is_none() && t.result.is_none();
        let waiting_on_execution = !t.expects_response && t.forward.is_none();
        if waiting_on_callback || waiting_on_execution {
            if let (Some(h), true) = (t.request_hash, t.expects_response) {
                let src = t.src_chain;
                self.routers.get_mut(&src).expect("router").abandon(&h);
            }
            self.timelines[idx].finish(Outcome::Expired, "timeout");
        }
    }

    fn para_block(&mut self, chain: ChainId) {
        let block = self.parachains.get_mut(&chain).expect("chain").produce_block(self.now);
        for (index, event) in block.events {
            let idx = self.by_event.get(&(chain, index)).copied();
            let router = self.routers.get_mut(&chain).expect("router");
            match router.pack_event(&event, self.now) {
                Ok(tx) => {
                    if let Some(idx) = idx {
                        let t = &mut self.timelines[idx];
                        t.pack = Some(self.now);
                        t.request_hash = Some(tx_hash(&tx));
                        t.seq_num = Some(tx.header.seq_num);
                        t.timestamp1 = Some(tx.header.timestamp1);
                        self.by_hash.insert(tx_hash(&tx), (idx, Leg::Request));
                    }
                    self.send_tx(chain, &encode(&tx), idx.map(|i| (i, Leg::Request)));
                }
                Err(e) => {
                    self.incident(chain, &e);
                    if let Some(idx) = idx {
                        self.timelines[idx].finish(Outcome::Rejected, router_error_code(&e));
                    }
                }
            }
        }
        for (tag, result) in block.executions {
            match tag {
                ExecTag::Request { timeline, request } => {
                    if let Some(idx) = timeline {
                        let t = &mut self.timelines[idx];
                        t.execute = Some(self.now);
                        if !t.expects_response {
                            t.result = Some(result_text(&result));
                            t.finish(Outcome::Completed, "");
                        }
                    }
                    if request.payload.callback.is_none() {
                        continue;
                    }
                    let router = self.routers.get_mut(&chain).expect("router");
                    match router.pack_response(&request, &result, self.now) {
                        Ok(tx) => {
                            if let Some(idx) = timeline {
                                self.timelines[idx].response = Some(self.now);
                                self.by_hash.insert(tx_hash(&tx), (idx, Leg::Response));
                            }
                            self.send_tx(chain, &encode(&tx), timeline.map(|i| (i, Leg::Response)));
                        }
                        Err(e) => self.incident(chain, &e),
                    }
                }
                ExecTag::Callback { timeline } => {
                    if let Some(idx) = timeline {
                        let t = &mut self.timelines[idx];
                        t.callback = Some(self.now);
                        match result {
                            Ok(_) => t.finish(Outcome::Completed, ""),
                            Err(e) => t.finish(Outcome::Rejected, format!("callback failed: {e}")),
                        }
                    }
                }
            }
        }
    }

    fn send_tx(&mut self, chain: ChainId, bytes: &[u8], link: Option<(usize, Leg)>) {
        let node = self.endpoint_of(chain);
        let id = self.net.send(self.now, Endpoint::Router(chain), Endpoint::Relay(node), FrameKind::Submit, bytes.to_vec());
        if let Some(l) = link {
            self.by_frame.insert(id, l);
        }
    }

    fn adversary_action(&mut self, i: usize) {
        match self.scenario.adversary[i].clone() {
            AdversaryAction::Inject { from, to, kind, hex, .. } => {
                let bytes = hex::decode(hex.trim()).unwrap_or_default();
                self.net.inject(self.now, from, to, kind, bytes);
            }
            AdversaryAction::Masquerade {
                chain,
                as_user,
                dst_chain,
                src_contract,
                dst_contract,
                function,
                args,
                callback,
                timeout_ms,
                ..
            } => {
                let forger = SigningKeypair::from_seed(b"adversary/forger");
                let mut payload = CrossChainPayload {
                    src_contract,
                    dst_contract,
                    timestamp2: self.now,
                    originator_public_key: forger.public_key(),
                    originator_signature: crate::crypto::Signature::EMPTY,
                    session_hash: Hash32::ZERO,
                    timeout: timeout_ms,
                    input: Call::new(function, args.into_iter().map(String::into_bytes).collect()),
                    callback: callback.map(|f| Call::new(f, vec![])),
                    extra: Vec::new(),
                };
                payload.sign_originator(&forger);
                payload.originator_public_key = user_keypair(&as_user).public_key();
                let idx = self.new_timeline(None, Some("masquerade".into()), chain, dst_chain, &payload);
                let router = self.routers.get_mut(&chain).expect("validated");
                match router.pack_unverified(dst_chain, &payload, self.now) {
                    Ok(tx) => {
                        let t = &mut self.timelines[idx];
                        t.pack = Some(self.now);
                        t.request_hash = Some(tx_hash(&tx));
                        t.seq_num = Some(tx.header.seq_num);
                        t.timestamp1 = Some(tx.header.timestamp1);
                        self.by_hash.insert(tx_hash(&tx), (idx, Leg::Request));
                        let node = self.endpoint_of(chain);
                        let id = self.net.inject(self.now, Endpoint::Router(chain), Endpoint::Relay(node), FrameKind::Submit, encode(&tx));
                        self.by_frame.insert(id, (idx, Leg::Request));
                    }
                    Err(e) => self.timelines[idx].finish(Outcome::Rejected, router_error_code(&e)),
                }
            }
            _ => {}
        }
    }

    // Frames.

    fn on_frame(&mut self, frame: Frame) {
        match (frame.kind, frame.to) {
            (FrameKind::KeyOffer, Endpoint::Router(chain)) => self.on_key_offer(chain, &frame),
            (FrameKind::Submit | FrameKind::Gossip, Endpoint::Relay(node)) => self.on_submit(node, &frame),
            (FrameKind::Block, Endpoint::Relay(node)) => self.on_block(node, &frame),
            (FrameKind::Forward, Endpoint::Router(chain)) => self.on_forward(chain, &frame),
            _ => debug!(id = frame.id, "frame to an endpoint that does not handle it"),
        }
    }

    fn on_key_offer(&mut self, chain: ChainId, frame: &Frame) {
        let Some(router) = self.routers.get_mut(&chain) else { return };
        if router.is_registered() {
            return;
        }
        let result = KeyOffer::decode(&frame.bytes)
            .map_err(|_| RouterError::Attestation)
            .and_then(|offer| router.complete_registration(&offer, self.now));
        match result {
            Ok(tx) => self.send_tx(chain, &encode(&tx), None),
            Err(e) => {
                self.incident(chain, &e);
                self.registration_failed.insert(chain);
            }
        }
    }

    fn on_submit(&mut self, node: u32, frame: &Frame) {
        if !self.online.contains(&node) {
            return;
        }
        let gossip = frame.kind == FrameKind::Gossip;
        let decoded = crate::ccip::decode(&frame.bytes).ok();
        let result = self.nodes[node as usize].submit(&frame.bytes, self.now);
        self.submissions.push(SubmitRecord {
            time: self.now,
            node,
            frame: frame.id,
            gossip,
            adversarial: frame.adversarial,
            tx_hash: decoded.as_ref().map(tx_hash),
            seq_num: decoded.as_ref().map(|t| t.header.seq_num),
            result: result.as_ref().map_or_else(|e| e.code().to_string(), |_| "accepted".to_string()),
        });
        if gossip {
            self.maybe_produce();
            return;
        }
        let link = self.by_frame.get(&frame.id).copied();
        match &result {
            Ok(_) => {
                if let Some((idx, Leg::Request)) = link {
                    self.timelines[idx].submit = Some(self.now);
                }
                let peers: Vec<u32> = self.online.iter().copied().filter(|p| *p != node).collect();
                for p in peers {
                    self.net.send(self.now, Endpoint::Relay(node), Endpoint::Relay(p), FrameKind::Gossip, frame.bytes.clone());
                }
            }
            Err(e) => match link {
                Some((idx, Leg::Request)) => self.timelines[idx].finish(Outcome::Rejected, e.code()),
                Some((idx, Leg::Response)) => self.timelines[idx].response_verdict = Some(e.code().to_string()),
                None => {}
            },
        }
        self.maybe_produce();
    }

    fn maybe_produce(&mut self) {
        let online: Vec<u32> = self.online.iter().copied().collect();
        for id in online {
            let node = &mut self.nodes[id as usize];
            if !node.block_due(self.now) {
                continue;
            }
            match node.produce_block(self.now) {
                Ok(block) => {
                    self.record_block(&block);
                    let bytes = block.encode();
                    for &p in self.online.iter().filter(|p| **p != id) {
                        self.net.send(self.now, Endpoint::Relay(id), Endpoint::Relay(p), FrameKind::Block, bytes.clone());
                    }
                    let deliveries = self.nodes[id as usize].take_deliveries();
                    for d in deliveries {
                        let chain = self.nodes[id as usize]
                            .routers()
                            .find(|r| r.public_key == d.dst_router)
                            .map(|r| r.chain)
                            .unwrap_or(d.envelope.dst_chain);
                        self.net.send(self.now, Endpoint::Relay(id), Endpoint::Router(chain), FrameKind::Forward, d.envelope.encode());
                    }
                }
                Err(e) => warn!(node = id, error = %e, "block production failed"),
            }
        }
    }

    fn record_block(&mut self, block: &RelayBlock) {
        for entry in &block.entries {
            let Some(&(idx, leg)) = self.by_hash.get(&entry.tx_hash()) else { continue };
            let t = &mut self.timelines[idx];
            let code = entry.verdict.code().to_string();
            match leg {
                Leg::Request => {
                    if t.verdict.is_some() {
                        continue;
                    }
                    t.included = Some(block.timestamp);
                    t.height = Some(block.height);
                    t.verdict = Some(code.clone());
                    match &entry.verdict {
                        Verdict::Denied(DenyReason::Expired) => t.finish(Outcome::Expired, code),
                        Verdict::Denied(_) => t.finish(Outcome::Denied, code),
                        Verdict::Rejected(_) => t.finish(Outcome::Rejected, code),
                        _ => {}
                    }
                }
                Leg::Response => {
                    if t.response_verdict.is_none() {
                        t.response_verdict = Some(code);
                    }
                }
            }
        }
    }

    fn on_block(&mut self, node: u32, frame: &Frame) {
        if !self.online.contains(&node) {
            return;
        }
        let Ok(block) = RelayBlock::decode(&frame.bytes) else {
            warn!(node, frame = frame.id, "undecodable block");
            return;
        };
        let buffer = self.block_buffer.entry(node).or_default();
        buffer.insert(block.height, block);
        loop {
            let n = &mut self.nodes[node as usize];
            let next = n.height() + 1;
            let buffer = self.block_buffer.get_mut(&node).expect("present");
            buffer.retain(|h, _| *h >= next);
            let Some(block) = buffer.remove(&next) else { break };
            if let Err(e) = n.apply_block(block) {
                warn!(node, error = %e, "block refused");
                break;
            }
        }
        self.maybe_produce();
    }

    fn on_forward(&mut self, chain: ChainId, frame: &Frame) {
        let Ok(env) = ForwardEnvelope::decode(&frame.bytes) else {
            self.incident(chain, &RouterError::Decrypt);
            return;
        };
        let link = self.by_hash.get(&env.request_hash).copied();
        let router = self.routers.get_mut(&chain).expect("router");
        match router.receive(&env) {
            Ok(Inbound::Request(request)) => {
                let timeline = link.filter(|l| l.1 == Leg::Request).map(|l| l.0);
                if let Some(idx) = timeline {
                    self.timelines[idx].forward = Some(self.now);
                }
                let contract = request.payload.dst_contract.clone();
                let call = request.payload.input.clone();
                self.parachains
                    .get_mut(&chain)
                    .expect("chain")
                    .submit_call(ExecTag::Request { timeline, request }, &contract, call);
            }
            Ok(Inbound::Response(response)) => {
                let timeline = self.by_hash.get(&response.session).map(|l| l.0);
                if let Some(idx) = timeline {
                    let t = &mut self.timelines[idx];
                    t.result = response.payload.input.args.last().and_then(|a| decode_result(a)).map(|r| result_text(&r));
                }
                let contract = response.payload.dst_contract.clone();
                self.parachains
                    .get_mut(&chain)
                    .expect("chain")
                    .submit_call(ExecTag::Callback { timeline }, &contract, response.payload.input);
            }
            Err(e) => self.incident(chain, &e),
        }
    }
}

fn result_text(r: &Result<Vec<u8>, String>) -> String {
    match r {
        Ok(v) => format!("ok:{}", String::from_utf8_lossy(v)),
        Err(e) => format!("err:{e}"),
    }
}

/// Parses, runs and returns the result of a scenario file's text.
pub fn run_scenario_text(text: &str) -> Result<SimulationResult, SimError> {
    Simulation::new(Scenario::parse(text)?)?.run()
}
