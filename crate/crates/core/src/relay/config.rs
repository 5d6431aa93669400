use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::ccip::ChainId;
use crate::crypto::PublicKey;
use crate::{Millis, SecurityKnobs};

/// Static configuration shared by every node of one relay chain.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct RelayConfig {
    /// Chain id registrations must be addressed to.
    pub relay_chain_id: ChainId,
    /// Block-signing keys; a node's id is its index here.
    pub authorities: Vec<PublicKey>,
    /// Rotate block production round-robin by height. Otherwise node 0 produces every block.
    pub rotation: bool,
    /// Maximum transactions per block (`B`).
    pub batch_size: usize,
    /// Produce a block at least this often while the mempool is non-empty (`T`).
    pub batch_interval: Millis,
    /// Router certificates: the only key allowed to register each chain.
    #[serde(with = "chain_keyed")]
    pub router_certificates: BTreeMap<ChainId, PublicKey>,
    /// Delivery attempts per forward before it is recorded as failed.
    pub max_forward_attempts: u32,
    #[serde(default)]
    pub knobs: SecurityKnobs,
}

impl RelayConfig {
    pub fn new(relay_chain_id: ChainId, authorities: Vec<PublicKey>) -> Self {
        Self {
            relay_chain_id,
            authorities,
            rotation: false,
            batch_size: 100,
            batch_interval: 100,
            router_certificates: BTreeMap::new(),
            max_forward_attempts: 3,
            knobs: SecurityKnobs::default(),
        }
    }

    /// Node expected to sign the block at `height` (heights start at 1).
    pub fn scheduled_producer(&self, height: u64) -> u32 {
        if self.rotation && !self.authorities.is_empty() {
            ((height.saturating_sub(1)) % self.authorities.len() as u64) as u32
        } else {
            0
        }
    }

    pub fn authority(&self, node: u32) -> Option<&PublicKey> {
        self.authorities.get(node as usize)
    }
}

/// TOML tables need string keys.
pub(crate) mod chain_keyed {
    use std::collections::BTreeMap;

    use serde::{de::Error, Deserialize, Deserializer, Serialize, Serializer};

    pub fn serialize<V: Serialize, S: Serializer>(map: &BTreeMap<u32, V>, s: S) -> Result<S::Ok, S::Error> {
        map.iter().map(|(k, v)| (k.to_string(), v)).collect::<BTreeMap<_, _>>().serialize(s)
    }

    pub fn deserialize<'de, V: Deserialize<'de>, D: Deserializer<'de>>(d: D) -> Result<BTreeMap<u32, V>, D::Error> {
        BTreeMap::<String, V>::deserialize(d)?
            .into_iter()
            .map(|(k, v)| k.parse().map(|k| (k, v)).map_err(D::Error::custom))
            .collect()
    }
}
