use std::collections::BTreeMap;
use std::sync::{Arc, RwLock};

use super::{AccessRequest, AccessRule, AclError};
use crate::ccip::ChainId;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum AclVerdict {
    Allow,
    Deny,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct TableHandle {
    pub chain: ChainId,
    pub rule_count: usize,
}

/// Per-resource-chain rule tables. Each table is swapped as a whole, so a
/// concurrent check sees either the old or the new table, never a mix.
#[derive(Debug, Default)]
pub struct AclStore {
    tables: RwLock<BTreeMap<ChainId, Arc<Vec<AccessRule>>>>,
}

impl AclStore {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn register_table(
        &self,
        chain: ChainId,
        rules: Vec<AccessRule>,
    ) -> Result<TableHandle, AclError> {
        for rule in &rules {
            if rule.resource_blockchain != chain {
                return Err(AclError::ForeignRule { expected: chain, found: rule.resource_blockchain });
            }
            rule.validate()?;
        }
        let handle = TableHandle { chain, rule_count: rules.len() };
        self.tables.write().expect("acl lock").insert(chain, Arc::new(rules));
        Ok(handle)
    }

    pub fn check(&self, request: &AccessRequest) -> AclVerdict {
        let table = self.table(request.resource_blockchain);
        match table {
            Some(rules) if rules.iter().any(|r| r.matches(request)) => AclVerdict::Allow,
            _ => AclVerdict::Deny,
        }
    }

    pub fn table(&self, chain: ChainId) -> Option<Arc<Vec<AccessRule>>> {
        self.tables.read().expect("acl lock").get(&chain).cloned()
    }

    pub fn chains(&self) -> Vec<ChainId> {
        self.tables.read().expect("acl lock").keys().copied().collect()
    }
}
