//! Fixtures shared by the relay and router unit tests.

use std::net::{Ipv4Addr, SocketAddrV4};

use rand::SeedableRng;
use rand_chacha::ChaCha20Rng;

use crate::acl::parse_rules;
use crate::ccip::{Call, ChainId, CrossChainPayload};
use crate::crypto::{FieldParams, Hash32, Signature, SigningKeypair};
use crate::enclave::{measurement_of, AttestationAuthority, BlobStore, EnclaveConfig, EnclaveInstance, Platform};
use crate::relay::{bootstrap_relay, BootstrapFaults, RelayConfig, RelayNode};
use crate::router::{Router, RouterConfig};
use crate::SecurityKnobs;

pub const RELAY_CHAIN: ChainId = 0;

pub fn authority() -> AttestationAuthority {
    AttestationAuthority::from_seed(b"test-authority")
}

pub fn node_key(i: u32) -> SigningKeypair {
    SigningKeypair::from_seed(format!("relay-node-{i}").as_bytes())
}

pub fn router_key(chain: ChainId) -> SigningKeypair {
    SigningKeypair::from_seed(format!("router-{chain}").as_bytes())
}

pub fn router_addr(chain: ChainId) -> SocketAddrV4 {
    SocketAddrV4::new(Ipv4Addr::new(10, 0, 0, chain as u8), 7000)
}

pub fn relay_config(n: u32, chains: &[ChainId], knobs: SecurityKnobs) -> RelayConfig {
    let mut c = RelayConfig::new(RELAY_CHAIN, (0..n).map(|i| node_key(i).public_key()).collect());
    for &chain in chains {
        c.router_certificates.insert(chain, router_key(chain).public_key());
    }
    c.knobs = knobs;
    c
}

pub fn launch_node(i: u32, config: &RelayConfig, store: BlobStore) -> RelayNode {
    let enclave = EnclaveInstance::launch(
        i,
        Platform::from_seed(format!("platform-{i}").as_bytes()),
        &EnclaveConfig::default(),
        authority(),
        store,
        1_000 + u64::from(i),
    )
    .unwrap();
    RelayNode::new(i, config.clone(), node_key(i), enclave).unwrap()
}

/// `n` relay nodes with an established relay secret.
pub fn relay(n: u32, chains: &[ChainId], knobs: SecurityKnobs) -> Vec<RelayNode> {
    let stores: Vec<BlobStore> = (0..n).map(|_| BlobStore::in_memory()).collect();
    relay_with(&relay_config(n, chains, knobs), &stores)
}

/// Bootstrapped nodes for `config`, node `i` sealing into `stores[i]`.
pub fn relay_with(config: &RelayConfig, stores: &[BlobStore]) -> Vec<RelayNode> {
    let mut nodes: Vec<RelayNode> =
        stores.iter().enumerate().map(|(i, s)| launch_node(i as u32, config, s.clone())).collect();
    bootstrap_relay(&mut nodes, &FieldParams::<u64>::toy(), 0, &BootstrapFaults::default()).unwrap();
    nodes
}

pub fn router(chain: ChainId, knobs: SecurityKnobs) -> Router {
    let config = RouterConfig {
        chain,
        relay_chain_id: RELAY_CHAIN,
        addr: router_addr(chain),
        attestation_authority: authority().public_key(),
        expected_measurement: measurement_of(&EnclaveConfig::default().build_id),
        knobs,
    };
    Router::new(config, router_key(chain), &mut ChaCha20Rng::seed_from_u64(u64::from(chain)))
}

pub fn user() -> SigningKeypair {
    SigningKeypair::from_seed(b"test-user")
}

/// ACL for chain 2 letting [`user`] on chain 1 read `kv/price`.
pub fn read_price_rules() -> Vec<crate::acl::AccessRule> {
    parse_rules(&format!("2|1|kv|price|read|{}", user().public_key().to_hex())).unwrap()
}

pub fn read_payload(user: &SigningKeypair, path: &str, now: u64, callback: bool) -> CrossChainPayload {
    let mut p = CrossChainPayload {
        src_contract: "app".into(),
        dst_contract: "kv".into(),
        timestamp2: now,
        originator_public_key: user.public_key(),
        originator_signature: Signature::EMPTY,
        session_hash: Hash32::ZERO,
        timeout: 5_000,
        input: Call::new("read", vec![path.as_bytes().to_vec()]),
        callback: callback.then(|| Call::new("on_price", vec![])),
        extra: vec![],
    };
    p.sign_originator(user);
    p
}
