//! Fine-grained, default-deny access control evaluated inside the enclave.

mod file;
mod rule;
mod store;

pub use file::{format_rules, parse_rules, parse_rules_with};
pub use rule::{AccessRequest, AccessRule, Operation, PathPattern, UserSet, Wildcard};
pub use store::{AclStore, AclVerdict, TableHandle};

use crate::ccip::ChainId;

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum AclError {
    #[error("rule for chain {found} registered under chain {expected}")]
    ForeignRule { expected: ChainId, found: ChainId },
    #[error("user list is empty; use * for any user")]
    EmptyUserList,
    #[error("unknown operation {0:?}")]
    UnknownOperation(String),
    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },
}
