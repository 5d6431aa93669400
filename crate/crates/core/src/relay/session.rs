use std::collections::BTreeMap;

use serde::Serialize;

use crate::ccip::ChainId;
use crate::crypto::Hash32;
use crate::Millis;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum SessionState {
    Open,
    Responded,
    Expired,
}

/// A request awaiting its response. Keyed by the request's transaction hash.
#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct SessionRecord {
    pub session: Hash32,
    pub src_chain: ChainId,
    pub dst_chain: ChainId,
    pub opened_height: u64,
    pub opened_at: Millis,
    pub timeout: u64,
    pub state: SessionState,
    pub closed_at: Option<Millis>,
    pub response: Option<Hash32>,
}

impl SessionRecord {
    pub fn deadline(&self) -> Millis {
        self.opened_at.saturating_add(self.timeout)
    }
}

#[derive(Clone, Debug, Default)]
pub struct SessionTable {
    map: BTreeMap<Hash32, SessionRecord>,
}

impl SessionTable {
    pub fn open(&mut self, record: SessionRecord) {
        self.map.insert(record.session, record);
    }

    pub fn get(&self, session: &Hash32) -> Option<&SessionRecord> {
        self.map.get(session)
    }

    /// Marks an open session as answered. Returns false if it was not open.
    pub fn respond(&mut self, session: &Hash32, response: Hash32, at: Millis) -> bool {
        match self.map.get_mut(session) {
            Some(r) if r.state == SessionState::Open => {
                r.state = SessionState::Responded;
                r.closed_at = Some(at);
                r.response = Some(response);
                true
            }
            _ => false,
        }
    }

    /// Expires every open session whose deadline is before `now`.
    pub fn sweep(&mut self, now: Millis) -> Vec<Hash32> {
        let mut expired = Vec::new();
        for r in self.map.values_mut() {
            if r.state == SessionState::Open && now > r.deadline() {
                r.state = SessionState::Expired;
                r.closed_at = Some(now);
                expired.push(r.session);
            }
        }
        expired
    }

    pub fn iter(&self) -> impl Iterator<Item = &SessionRecord> {
        self.map.values()
    }

    pub fn len(&self) -> usize {
        self.map.len()
    }

    pub fn is_empty(&self) -> bool {
        self.map.is_empty()
    }

    pub fn count(&self, state: SessionState) -> usize {
        self.map.values().filter(|r| r.state == state).count()
    }
}
