//! Confidential cross-chain relay.
//!
//! Parachains talk to each other only through a relay chain whose nodes run
//! simulated enclaves. Routers encrypt cross-chain payloads under a key they
//! share with every relay enclave; enclaves verify, apply fine-grained access
//! control, and re-encrypt for the destination router.

pub mod acl;
pub mod ccip;
pub mod crypto;
pub mod enclave;
pub mod knobs;
pub mod relay;
pub mod router;
pub mod testbed;

#[cfg(test)]
mod test_support;

use num_bigint::BigUint;

pub use knobs::SecurityKnobs;

/// Feldman parameters over machine words, for exhaustive tests.
pub type SmallFieldParams = crypto::FieldParams<u64>;
/// Feldman parameters at production size (256-bit subgroup order).
pub type WideFieldParams = crypto::FieldParams<BigUint>;

pub type SmallShare = crypto::Share<u64>;
pub type WideShare = crypto::Share<BigUint>;
pub type SmallDeal = crypto::FeldmanDeal<u64>;
pub type WideDeal = crypto::FeldmanDeal<BigUint>;

/// Milliseconds since an arbitrary epoch (virtual or wall clock).
pub type Millis = u64;
