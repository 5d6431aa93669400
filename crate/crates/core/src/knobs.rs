//! Switches that disable individual defenses.
//!
//! Every field defaults to `false`. They exist so the attack suite can prove
//! each of its checks is able to fail; nothing else should set them.

use serde::{Deserialize, Serialize};

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SecurityKnobs {
    /// Relay accepts transactions without checking the router signature.
    pub skip_router_signature: bool,
    /// Relay does not track `(router, seq_num)` pairs.
    pub skip_replay_check: bool,
    /// Relay orders blocks by arrival and drops the out-of-window rule.
    pub skip_ordering: bool,
    /// Enclave does not check the originator signature.
    pub skip_originator_signature: bool,
    /// Enclave allows every request regardless of the access-control tables.
    pub skip_acl: bool,
    /// Router trusts the relay key offer without checking its attestation quote.
    pub skip_attestation: bool,
}

impl SecurityKnobs {
    pub fn any(&self) -> bool {
        *self != Self::default()
    }
}
