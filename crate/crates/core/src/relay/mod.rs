//! Relay chain: proof-of-authority nodes that order cross-chain transactions
//! into blocks, run them through their enclaves and forward the results.

mod audit;
mod block;
mod bootstrap;
mod config;
mod node;
mod session;
mod store;

pub use audit::{audit_trail, opened_sessions, refusals, Evidence, SessionOutcome, SessionTrail};
pub use block::{BlockEntry, ForwardRecord, KeyAnnouncement, RejectReason, RelayBlock, Verdict};
pub use bootstrap::{bootstrap_relay, BootstrapError, BootstrapFaults, BootstrapReport};
pub use config::RelayConfig;
pub use node::{Delivery, ForwardFailure, RelayNode, RouterRecord, SubmitError};
pub use session::{SessionRecord, SessionState, SessionTable};
pub use store::{load_chain, ChainStore};

#[derive(Clone, Debug, PartialEq, Eq, thiserror::Error)]
pub enum RelayError {
    #[error("node {0} is not a configured authority")]
    NotAnAuthority(u32),
    #[error("enclave belongs to a different node")]
    EnclaveMismatch,
    #[error("node {node} is not scheduled for height {height}")]
    NotScheduled { height: u64, node: u32 },
    #[error("expected height {expected}, got {got}")]
    WrongHeight { expected: u64, got: u64 },
    #[error("block {height} does not extend the tip")]
    WrongParent { height: u64 },
    #[error("block {height} signed by unscheduled node {producer}")]
    WrongProducer { height: u64, producer: u32 },
    #[error("block {height} signature does not verify")]
    BadBlockSignature { height: u64 },
    #[error("block {height} timestamp goes backwards")]
    TimestampRegression { height: u64 },
    #[error("storage: {0}")]
    Storage(String),
}
