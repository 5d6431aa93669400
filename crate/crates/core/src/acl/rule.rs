use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use super::AclError;
use crate::ccip::{CcipHeader, ChainId, CrossChainPayload};
use crate::crypto::PublicKey;

/// A rule field that is either `*` or one concrete value.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub enum Wildcard<T> {
    Any,
    Exactly(T),
}

impl<T: PartialEq> Wildcard<T> {
    pub fn matches(&self, value: &T) -> bool {
        match self {
            Wildcard::Any => true,
            Wildcard::Exactly(v) => v == value,
        }
    }
}

/// `*`, an exact path, or `prefix/*` (any path starting with `prefix/`).
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub enum PathPattern {
    Any,
    Exact(String),
    /// Stored with its trailing `/`.
    Prefix(String),
}

impl PathPattern {
    pub fn parse(s: &str) -> Self {
        if s == "*" {
            PathPattern::Any
        } else if let Some(prefix) = s.strip_suffix('*').filter(|p| p.ends_with('/')) {
            PathPattern::Prefix(prefix.to_string())
        } else {
            PathPattern::Exact(s.to_string())
        }
    }

    pub fn matches(&self, path: &str) -> bool {
        match self {
            PathPattern::Any => true,
            PathPattern::Exact(p) => p == path,
            PathPattern::Prefix(prefix) => path.starts_with(prefix.as_str()),
        }
    }
}

impl fmt::Display for PathPattern {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            PathPattern::Any => f.write_str("*"),
            PathPattern::Exact(p) => f.write_str(p),
            PathPattern::Prefix(p) => write!(f, "{p}*"),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Operation {
    Read,
    Write,
    Invoke,
}

impl Operation {
    pub const ALL: [Operation; 3] = [Operation::Read, Operation::Write, Operation::Invoke];

    pub fn as_str(&self) -> &'static str {
        match self {
            Operation::Read => "read",
            Operation::Write => "write",
            Operation::Invoke => "invoke",
        }
    }
}

impl fmt::Display for Operation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Operation {
    type Err = AclError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "read" => Ok(Operation::Read),
            "write" => Ok(Operation::Write),
            "invoke" => Ok(Operation::Invoke),
            other => Err(AclError::UnknownOperation(other.to_string())),
        }
    }
}

/// Authorized users: `*` or a non-empty key list.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub enum UserSet {
    Any,
    Keys(Vec<PublicKey>),
}

impl UserSet {
    pub fn matches(&self, user: &PublicKey) -> bool {
        match self {
            UserSet::Any => true,
            UserSet::Keys(keys) => keys.contains(user),
        }
    }
}

/// One permissive access-control row.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct AccessRule {
    /// The chain that owns the resource (destination of the request).
    pub resource_blockchain: ChainId,
    /// The chain the request comes from.
    pub authorized_blockchain: Wildcard<ChainId>,
    pub contract: Wildcard<String>,
    pub resource_path: PathPattern,
    pub operate: Wildcard<Operation>,
    pub user_identity: UserSet,
}

impl AccessRule {
    pub fn validate(&self) -> Result<(), AclError> {
        if let UserSet::Keys(keys) = &self.user_identity {
            if keys.is_empty() {
                return Err(AclError::EmptyUserList);
            }
        }
        Ok(())
    }

    pub fn matches(&self, req: &AccessRequest) -> bool {
        self.resource_blockchain == req.resource_blockchain
            && self.authorized_blockchain.matches(&req.requesting_blockchain)
            && self.contract.matches(&req.contract)
            && self.resource_path.matches(&req.resource_path)
            && self.operate.matches(&req.operation)
            && self.user_identity.matches(&req.user)
    }
}

/// A fully concrete access attempt.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct AccessRequest {
    pub resource_blockchain: ChainId,
    pub requesting_blockchain: ChainId,
    pub contract: String,
    pub resource_path: String,
    pub operation: Operation,
    pub user: PublicKey,
}

impl AccessRequest {
    /// Projects a request transaction onto the rule dimensions. The destination
    /// chain owns the resource, the input function names the operation and the
    /// first input argument names the path. `None` if the function is not one
    /// of the three operations.
    pub fn project(header: &CcipHeader, payload: &CrossChainPayload) -> Option<Self> {
        let operation = payload.input.function.parse().ok()?;
        let resource_path = payload
            .input
            .args
            .first()
            .map(|a| String::from_utf8_lossy(a).into_owned())
            .unwrap_or_default();
        Some(Self {
            resource_blockchain: header.dst_chain,
            requesting_blockchain: header.src_chain,
            contract: payload.dst_contract.clone(),
            resource_path,
            operation,
            user: payload.originator_public_key,
        })
    }
}
