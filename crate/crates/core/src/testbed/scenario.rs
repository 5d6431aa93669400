//! Scenario files: chains, contracts, relay nodes, links, workload and
//! adversary script, all in one TOML document.

use std::collections::{BTreeMap, BTreeSet};
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::adversary::AdversaryAction;
use super::network::{Endpoint, Latency, LinkConfig};
use crate::acl::{parse_rules_with, AccessRule, AclError};
use crate::ccip::{Call, ChainId, CrossChainPayload};
use crate::crypto::{Hash32, PublicKey, Signature, SigningKeypair};
use crate::{Millis, SecurityKnobs};

#[derive(Debug, thiserror::Error)]
pub enum ScenarioError {
    #[error("reading {path}: {source}")]
    Io { path: String, source: std::io::Error },
    #[error("parse: {0}")]
    Parse(#[from] toml::de::Error),
    #[error("acl for chain {chain}: {source}")]
    Acl { chain: ChainId, source: AclError },
    #[error("invalid scenario: {0}")]
    Invalid(String),
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FieldChoice {
    /// 64-bit group, fast.
    #[default]
    Toy,
    /// 2048-bit group with a 256-bit subgroup.
    Production,
}

fn d_nodes() -> u32 {
    4
}
fn d_batch_size() -> usize {
    100
}
fn d_interval() -> Millis {
    100
}
fn d_attempts() -> u32 {
    3
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RelaySection {
    #[serde(default = "d_nodes")]
    pub nodes: u32,
    #[serde(default)]
    pub chain_id: ChainId,
    #[serde(default)]
    pub rotation: bool,
    #[serde(default = "d_batch_size")]
    pub batch_size: usize,
    #[serde(default = "d_interval")]
    pub batch_interval_ms: Millis,
    #[serde(default = "d_attempts")]
    pub max_forward_attempts: u32,
    #[serde(default)]
    pub field: FieldChoice,
    /// Nodes that never come up.
    #[serde(default)]
    pub offline: BTreeSet<u32>,
}

impl Default for RelaySection {
    fn default() -> Self {
        Self {
            nodes: d_nodes(),
            chain_id: 0,
            rotation: false,
            batch_size: d_batch_size(),
            batch_interval_ms: d_interval(),
            max_forward_attempts: d_attempts(),
            field: FieldChoice::Toy,
            offline: BTreeSet::new(),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ContractSection {
    pub id: String,
    #[serde(default)]
    pub state: BTreeMap<String, String>,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ChainSection {
    pub id: ChainId,
    #[serde(default = "d_interval")]
    pub block_interval_ms: Millis,
    #[serde(default)]
    pub contracts: Vec<ContractSection>,
    /// Rule lines; user columns may name scenario users as `@name`.
    #[serde(default)]
    pub acl: String,
    /// Relay node this chain's router talks to.
    #[serde(default)]
    pub relay_endpoint: u32,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LinkSection {
    pub from: Endpoint,
    pub to: Endpoint,
    #[serde(default = "d_latency")]
    pub latency_ms: Latency,
    #[serde(default)]
    pub loss: f64,
    #[serde(default)]
    pub duplication: f64,
}

fn d_latency() -> Latency {
    Latency::Constant(5)
}

impl LinkSection {
    pub fn link(&self) -> LinkConfig {
        LinkConfig { latency_ms: self.latency_ms, loss: self.loss, duplication: self.duplication }
    }
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NetworkSection {
    #[serde(default)]
    pub default: LinkConfig,
    #[serde(default)]
    pub links: Vec<LinkSection>,
}

fn d_contract() -> String {
    "app".into()
}
fn d_timeout() -> u64 {
    5_000
}
fn d_start() -> Millis {
    1_000
}
fn d_count() -> u32 {
    1
}

/// A batch of `count` identical hub emissions, `every_ms` apart. `{i}` in
/// an argument is replaced with the emission index.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct WorkloadSection {
    #[serde(default)]
    pub label: Option<String>,
    pub chain: ChainId,
    pub user: String,
    pub dst_chain: ChainId,
    #[serde(default = "d_contract")]
    pub src_contract: String,
    pub dst_contract: String,
    pub function: String,
    #[serde(default)]
    pub args: Vec<String>,
    #[serde(default)]
    pub callback: Option<String>,
    #[serde(default = "d_timeout")]
    pub timeout_ms: u64,
    #[serde(default = "d_start")]
    pub start_ms: Millis,
    #[serde(default = "d_count")]
    pub count: u32,
    #[serde(default)]
    pub every_ms: Millis,
}

impl WorkloadSection {
    pub fn args_for(&self, i: u32) -> Vec<Vec<u8>> {
        self.args.iter().map(|a| a.replace("{i}", &i.to_string()).into_bytes()).collect()
    }

    /// The `i`-th request of this workload, signed by its user.
    pub fn payload(&self, i: u32, now: Millis) -> CrossChainPayload {
        let user = user_keypair(&self.user);
        let mut payload = CrossChainPayload {
            src_contract: self.src_contract.clone(),
            dst_contract: self.dst_contract.clone(),
            timestamp2: now,
            originator_public_key: user.public_key(),
            originator_signature: Signature::EMPTY,
            session_hash: Hash32::ZERO,
            timeout: self.timeout_ms,
            input: Call::new(self.function.clone(), self.args_for(i)),
            callback: self.callback.as_ref().map(|f| Call::new(f.clone(), vec![])),
            extra: Vec::new(),
        };
        payload.sign_originator(&user);
        payload
    }
}

fn d_max_time() -> Millis {
    600_000
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Scenario {
    #[serde(default)]
    pub name: String,
    #[serde(default)]
    pub seed: u64,
    /// Virtual-time watchdog.
    #[serde(default = "d_max_time")]
    pub max_time_ms: Millis,
    #[serde(default)]
    pub relay: RelaySection,
    #[serde(default)]
    pub knobs: SecurityKnobs,
    pub chains: Vec<ChainSection>,
    #[serde(default)]
    pub users: Vec<String>,
    #[serde(default)]
    pub network: NetworkSection,
    #[serde(default)]
    pub workload: Vec<WorkloadSection>,
    #[serde(default)]
    pub adversary: Vec<AdversaryAction>,
}

/// Signing key for a named scenario user.
pub fn user_keypair(name: &str) -> SigningKeypair {
    SigningKeypair::from_seed(format!("scenario/user/{name}").as_bytes())
}

impl Scenario {
    pub fn load(path: &Path) -> Result<Self, ScenarioError> {
        let text = std::fs::read_to_string(path)
            .map_err(|source| ScenarioError::Io { path: path.display().to_string(), source })?;
        Self::parse(&text)
    }

    pub fn parse(text: &str) -> Result<Self, ScenarioError> {
        let s: Scenario = toml::from_str(text)?;
        s.validate()?;
        Ok(s)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("scenario serializes")
    }

    pub fn chain(&self, id: ChainId) -> Option<&ChainSection> {
        self.chains.iter().find(|c| c.id == id)
    }

    pub fn user_key(&self, name: &str) -> Option<PublicKey> {
        self.users.iter().any(|u| u == name).then(|| user_keypair(name).public_key())
    }

    pub fn acl_rules(&self, chain: &ChainSection) -> Result<Vec<AccessRule>, ScenarioError> {
        parse_rules_with(&chain.acl, |token| match token.strip_prefix('@') {
            Some(name) => self.user_key(name),
            None => token.parse().ok(),
        })
        .map_err(|source| ScenarioError::Acl { chain: chain.id, source })
    }

    pub fn validate(&self) -> Result<(), ScenarioError> {
        let bad = |m: String| Err(ScenarioError::Invalid(m));
        let r = &self.relay;
        if r.nodes == 0 {
            return bad("relay needs at least one node".into());
        }
        if r.batch_size == 0 || r.batch_interval_ms == 0 {
            return bad("batch_size and batch_interval_ms must be positive".into());
        }
        if let Some(n) = r.offline.iter().find(|n| **n >= r.nodes) {
            return bad(format!("offline node {n} does not exist"));
        }
        if r.rotation && !r.offline.is_empty() {
            return bad("offline nodes would stall a rotating producer schedule".into());
        }
        if r.offline.contains(&0) {
            return bad("node 0 produces every block without rotation and cannot be offline".into());
        }
        let mut ids = BTreeSet::new();
        for c in &self.chains {
            if c.id == r.chain_id {
                return bad(format!("chain {} collides with the relay chain id", c.id));
            }
            if !ids.insert(c.id) {
                return bad(format!("duplicate chain {}", c.id));
            }
            if c.block_interval_ms == 0 {
                return bad(format!("chain {} needs a positive block interval", c.id));
            }
            if c.relay_endpoint >= r.nodes || r.offline.contains(&c.relay_endpoint) {
                return bad(format!("chain {} uses unavailable relay node {}", c.id, c.relay_endpoint));
            }
            self.acl_rules(c)?;
        }
        let users: BTreeSet<&String> = self.users.iter().collect();
        if users.len() != self.users.len() {
            return bad("duplicate user name".into());
        }
        for (i, w) in self.workload.iter().enumerate() {
            if !ids.contains(&w.chain) || !ids.contains(&w.dst_chain) {
                return bad(format!("workload {i} names an unknown chain"));
            }
            if !users.contains(&w.user) {
                return bad(format!("workload {i} names unknown user {:?}", w.user));
            }
        }
        for (i, a) in self.adversary.iter().enumerate() {
            if let AdversaryAction::Masquerade { chain, dst_chain, as_user, .. } = a {
                if !ids.contains(chain) || !ids.contains(dst_chain) || !users.contains(as_user) {
                    return bad(format!("adversary action {i} names an unknown chain or user"));
                }
            }
        }
        Ok(())
    }
}
