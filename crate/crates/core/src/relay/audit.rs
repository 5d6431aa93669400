//! Reconstructing what happened to a session from the chain alone.

use serde::Serialize;

use super::block::{BlockEntry, RelayBlock, Verdict};
use crate::ccip::ChainId;
use crate::crypto::{Hash32, PublicKey};
use crate::Millis;

/// One on-chain record about a transaction.
#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct Evidence {
    pub height: u64,
    pub block_timestamp: Millis,
    pub producer: u32,
    pub tx_hash: Hash32,
    pub tx_type: &'static str,
    pub src_chain: ChainId,
    pub dst_chain: ChainId,
    pub router: PublicKey,
    pub seq_num: u64,
    pub timestamp1: Millis,
    pub verdict: &'static str,
    pub forwarded: bool,
}

impl Evidence {
    fn of(block: &RelayBlock, entry: &BlockEntry) -> Self {
        let h = &entry.tx.header;
        Self {
            height: block.height,
            block_timestamp: block.timestamp,
            producer: block.producer,
            tx_hash: entry.tx_hash(),
            tx_type: h.tx_type.name(),
            src_chain: h.src_chain,
            dst_chain: h.dst_chain,
            router: h.router_public_key,
            seq_num: h.seq_num,
            timestamp1: h.timestamp1,
            verdict: entry.verdict.code(),
            forwarded: entry.forward.is_some(),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum SessionOutcome {
    /// The request never reached a block.
    Unknown,
    /// The request was refused; nothing was forwarded.
    Refused,
    /// Forwarded without a callback; no response expected.
    OneWay,
    /// Forwarded, no response yet, deadline not passed at the last block.
    Pending,
    Responded,
    /// No response was accepted before the deadline.
    Expired,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct SessionTrail {
    pub session: Hash32,
    pub outcome: SessionOutcome,
    /// Time the session's deadline passes, when one was opened.
    pub deadline: Option<Millis>,
    pub evidence: Vec<Evidence>,
}

/// Every on-chain record about `session` (the request's transaction hash):
/// the request itself and every response that named it, in chain order.
pub fn audit_trail(blocks: &[RelayBlock], session: Hash32) -> SessionTrail {
    let mut evidence = Vec::new();
    let mut outcome = SessionOutcome::Unknown;
    let mut deadline = None;
    for block in blocks {
        for entry in &block.entries {
            let is_request = entry.tx_hash() == session;
            let is_response = entry.verdict.response_session() == Some(session);
            if !(is_request || is_response) {
                continue;
            }
            evidence.push(Evidence::of(block, entry));
            if is_request && outcome == SessionOutcome::Unknown {
                outcome = match &entry.verdict {
                    Verdict::Opened { timeout } => {
                        deadline = Some(block.timestamp.saturating_add(*timeout));
                        SessionOutcome::Pending
                    }
                    Verdict::Delivered => SessionOutcome::OneWay,
                    _ => SessionOutcome::Refused,
                };
            }
            if let Verdict::Closed { .. } = entry.verdict {
                outcome = SessionOutcome::Responded;
            }
        }
    }
    if outcome == SessionOutcome::Pending {
        let last = blocks.last().map_or(0, |b| b.timestamp);
        if deadline.is_some_and(|d| last > d) {
            outcome = SessionOutcome::Expired;
        }
    }
    SessionTrail { session, outcome, deadline, evidence }
}

/// Every transaction the chain records as denied or rejected.
pub fn refusals(blocks: &[RelayBlock]) -> Vec<Evidence> {
    blocks
        .iter()
        .flat_map(|b| {
            b.entries
                .iter()
                .filter(|e| matches!(e.verdict, Verdict::Denied(_) | Verdict::Rejected(_)))
                .map(move |e| Evidence::of(b, e))
        })
        .collect()
}

/// Hashes of every request that opened a session.
pub fn opened_sessions(blocks: &[RelayBlock]) -> Vec<Hash32> {
    blocks
        .iter()
        .flat_map(|b| b.entries.iter())
        .filter(|e| matches!(e.verdict, Verdict::Opened { .. }))
        .map(|e| e.tx_hash())
        .collect()
}
