use std::collections::BTreeMap;

use super::contract::KvContract;
use crate::ccip::{Call, ChainId};
use crate::router::CrossChainEvent;
use crate::Millis;

#[derive(Clone, Debug, PartialEq, Eq, thiserror::Error)]
pub enum HubError {
    #[error("originator signature does not verify")]
    BadSignature,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct EmissionReceipt {
    pub index: usize,
    /// Block in which the event becomes visible.
    pub height: u64,
}

/// Work queued for the next block: a contract call and a caller tag.
#[derive(Clone, Debug, PartialEq, Eq)]
struct QueuedCall<T> {
    tag: T,
    contract: String,
    call: Call,
}

/// What a block confirmed.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ParaBlock<T> {
    pub height: u64,
    pub timestamp: Millis,
    pub events: Vec<(usize, CrossChainEvent)>,
    pub executions: Vec<(T, Result<Vec<u8>, String>)>,
}

/// A parachain reduced to what the relay protocol touches: a hub event log,
/// key-value contracts and a block clock.
#[derive(Clone, Debug)]
pub struct MockParachain<T> {
    pub chain: ChainId,
    pub block_interval: Millis,
    height: u64,
    contracts: BTreeMap<String, KvContract>,
    events: Vec<(u64, CrossChainEvent)>,
    unconfirmed_events: Vec<usize>,
    queued: Vec<QueuedCall<T>>,
}

impl<T: Clone> MockParachain<T> {
    pub fn new(chain: ChainId, block_interval: Millis) -> Self {
        Self {
            chain,
            block_interval,
            height: 0,
            contracts: BTreeMap::new(),
            events: Vec::new(),
            unconfirmed_events: Vec::new(),
            queued: Vec::new(),
        }
    }

    pub fn deploy(&mut self, contract: KvContract) {
        self.contracts.insert(contract.id.clone(), contract);
    }

    pub fn contract(&self, id: &str) -> Option<&KvContract> {
        self.contracts.get(id)
    }

    pub fn height(&self) -> u64 {
        self.height
    }

    /// Emitted events with the height that confirmed them (0 while unconfirmed).
    pub fn event_log(&self) -> &[(u64, CrossChainEvent)] {
        &self.events
    }

    /// Hub contract: records a user-signed cross-chain event.
    pub fn hub_emit(&mut self, event: CrossChainEvent) -> Result<EmissionReceipt, HubError> {
        if !event.payload.verify_originator() {
            return Err(HubError::BadSignature);
        }
        let index = self.events.len();
        self.events.push((0, event));
        self.unconfirmed_events.push(index);
        Ok(EmissionReceipt { index, height: self.height + 1 })
    }

    /// Queues a contract call for the next block.
    pub fn submit_call(&mut self, tag: T, contract: &str, call: Call) {
        self.queued.push(QueuedCall { tag, contract: contract.to_string(), call });
    }

    pub fn produce_block(&mut self, now: Millis) -> ParaBlock<T> {
        self.height += 1;
        let height = self.height;
        let events = self
            .unconfirmed_events
            .drain(..)
            .map(|i| {
                self.events[i].0 = height;
                (i, self.events[i].1.clone())
            })
            .collect();
        let executions = self
            .queued
            .drain(..)
            .map(|q| {
                let result = match self.contracts.get_mut(&q.contract) {
                    Some(c) => c.execute(&q.call),
                    None => Err(format!("unknown contract: {}", q.contract)),
                };
                (q.tag, result)
            })
            .collect();
        ParaBlock { height, timestamp: now, events, executions }
    }
}
