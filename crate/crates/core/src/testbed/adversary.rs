//! Scripted network adversary.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use super::network::{CapturedFrame, Endpoint, Frame, FrameKind};
use crate::ccip::{decode, open_payload, ChainId, CrossChainPayload, PayloadEnvelope, TxType};
use crate::crypto::{ecdh_derive, ecdh_respond, sha256, CurveParams, EcScalar, PublicKey};
use crate::enclave::{AttestationAuthority, KeyOffer};
use crate::Millis;

fn first() -> usize {
    1
}

/// Picks the `index`-th frame (1-based) of `kind`, optionally restricted by endpoints.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct FrameSelector {
    pub kind: FrameKind,
    #[serde(default)]
    pub from: Option<Endpoint>,
    #[serde(default)]
    pub to: Option<Endpoint>,
    #[serde(default = "first")]
    pub index: usize,
}

impl FrameSelector {
    fn matches(&self, f: &Frame) -> bool {
        self.kind == f.kind && self.from.is_none_or(|e| e == f.from) && self.to.is_none_or(|e| e == f.to)
    }
}

fn default_contract() -> String {
    "app".into()
}

fn default_timeout() -> u64 {
    10_000
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "action", rename_all = "snake_case")]
pub enum AdversaryAction {
    /// Delivers a copy of the selected frame `delay_ms` after the original.
    Replay {
        #[serde(flatten)]
        target: FrameSelector,
        delay_ms: Millis,
    },
    /// XORs one byte of the selected frame in transit.
    Tamper {
        #[serde(flatten)]
        target: FrameSelector,
        offset: usize,
        #[serde(default = "xor_one")]
        xor: u8,
    },
    /// Holds the selected frame back.
    Delay {
        #[serde(flatten)]
        target: FrameSelector,
        delay_ms: Millis,
    },
    Drop {
        #[serde(flatten)]
        target: FrameSelector,
    },
    /// Replaces every relay key offer to `to` with the adversary's own point
    /// and a quote from an authority the adversary controls.
    MitmSwap { to: Endpoint },
    /// Sends raw bytes at a fixed time.
    Inject { at_ms: Millis, from: Endpoint, to: Endpoint, kind: FrameKind, hex: String },
    /// A compromised router packs a request that claims to come from
    /// `as_user` but is signed by someone else.
    Masquerade {
        at_ms: Millis,
        chain: ChainId,
        as_user: String,
        dst_chain: ChainId,
        #[serde(default = "default_contract")]
        src_contract: String,
        dst_contract: String,
        function: String,
        #[serde(default)]
        args: Vec<String>,
        #[serde(default)]
        callback: Option<String>,
        #[serde(default = "default_timeout")]
        timeout_ms: u64,
    },
}

fn xor_one() -> u8 {
    1
}

impl AdversaryAction {
    pub fn name(&self) -> &'static str {
        match self {
            AdversaryAction::Replay { .. } => "replay",
            AdversaryAction::Tamper { .. } => "tamper",
            AdversaryAction::Delay { .. } => "delay",
            AdversaryAction::Drop { .. } => "drop",
            AdversaryAction::MitmSwap { .. } => "mitm_swap",
            AdversaryAction::Inject { .. } => "inject",
            AdversaryAction::Masquerade { .. } => "masquerade",
        }
    }

    /// Time for actions that fire on the clock rather than on a frame.
    pub fn scheduled_at(&self) -> Option<Millis> {
        match self {
            AdversaryAction::Inject { at_ms, .. } | AdversaryAction::Masquerade { at_ms, .. } => Some(*at_ms),
            _ => None,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct AdversaryEvent {
    pub time: Millis,
    pub action: usize,
    pub name: &'static str,
    pub frame: u64,
}

#[derive(Debug, Default)]
pub struct Interception {
    pub delay: Millis,
    pub drop: bool,
    /// Delays after which replayed copies are sent.
    pub replays: Vec<Millis>,
}

#[derive(Default)]
pub struct Adversary {
    actions: Vec<AdversaryAction>,
    matched: Vec<usize>,
    log: Vec<AdversaryEvent>,
}

impl Adversary {
    pub fn new(actions: Vec<AdversaryAction>) -> Self {
        let matched = vec![0; actions.len()];
        Self { actions, matched, log: Vec::new() }
    }

    pub fn actions(&self) -> &[AdversaryAction] {
        &self.actions
    }

    pub fn log(&self) -> &[AdversaryEvent] {
        &self.log
    }

    fn mitm_secret() -> EcScalar {
        EcScalar::from_be_bytes(sha256(b"adversary/mitm-secret").as_bytes()).expect("valid scalar")
    }

    fn rogue_authority() -> AttestationAuthority {
        AttestationAuthority::from_seed(b"adversary/rogue-authority")
    }

    pub(crate) fn note_injection(&mut self, now: Millis, frame: u64) {
        let action = self.actions.iter().position(|a| matches!(a, AdversaryAction::Inject { .. })).unwrap_or(0);
        self.log.push(AdversaryEvent { time: now, action, name: "inject", frame });
    }

    pub(crate) fn intercept(&mut self, now: Millis, frame: &mut Frame) -> Interception {
        let mut out = Interception::default();
        for (i, action) in self.actions.iter().enumerate() {
            let fire = |sel: &FrameSelector, count: &mut usize| {
                if sel.matches(frame) {
                    *count += 1;
                    *count == sel.index
                } else {
                    false
                }
            };
            let count = &mut self.matched[i];
            let fired = match action {
                AdversaryAction::Replay { target, delay_ms } => {
                    let f = fire(target, count);
                    if f {
                        out.replays.push(*delay_ms);
                    }
                    f
                }
                AdversaryAction::Tamper { target, offset, xor } => {
                    let f = fire(target, count);
                    if f {
                        if let Some(b) = frame.bytes.get_mut(*offset) {
                            *b ^= *xor;
                        }
                        frame.adversarial = true;
                    }
                    f
                }
                AdversaryAction::Delay { target, delay_ms } => {
                    let f = fire(target, count);
                    if f {
                        out.delay += delay_ms;
                    }
                    f
                }
                AdversaryAction::Drop { target } => {
                    let f = fire(target, count);
                    out.drop |= f;
                    f
                }
                AdversaryAction::MitmSwap { to } => {
                    frame.kind == FrameKind::KeyOffer && frame.to == *to && swap_offer(frame)
                }
                AdversaryAction::Inject { .. } | AdversaryAction::Masquerade { .. } => false,
            };
            if fired {
                self.log.push(AdversaryEvent { time: now, action: i, name: action.name(), frame: frame.id });
            }
        }
        out
    }

    /// Request payloads the adversary can read: for every router that
    /// registered against the swapped point, derive its key and try every
    /// captured request from it.
    pub fn decrypt_captured(&self, capture: &[CapturedFrame]) -> Vec<CrossChainPayload> {
        if !self.actions.iter().any(|a| matches!(a, AdversaryAction::MitmSwap { .. })) {
            return Vec::new();
        }
        let s = Self::mitm_secret();
        let txs: Vec<_> = capture
            .iter()
            .filter(|c| c.kind == FrameKind::Submit && c.delivered_at.is_some())
            .filter_map(|c| decode(&c.bytes).ok())
            .collect();
        let mut keys: BTreeMap<PublicKey, _> = BTreeMap::new();
        for tx in &txs {
            if let Some(reg) = tx.registration() {
                if let Ok(k) = ecdh_derive(&CurveParams::secp256k1(), &s, &reg.key_message) {
                    keys.insert(tx.header.router_public_key, k);
                }
            }
        }
        let mut out = Vec::new();
        for tx in txs.iter().filter(|t| t.header.tx_type != TxType::Registration) {
            if let (Some(key), PayloadEnvelope::Sealed(sealed)) = (keys.get(&tx.header.router_public_key), &tx.payload) {
                if let Ok(p) = open_payload(key, &tx.header, sealed) {
                    out.push(p);
                }
            }
        }
        out
    }
}

fn swap_offer(frame: &mut Frame) -> bool {
    let Ok(mut offer) = KeyOffer::decode(&frame.bytes) else { return false };
    offer.point = ecdh_respond(&CurveParams::secp256k1(), &Adversary::mitm_secret());
    offer.quote = Adversary::rogue_authority().issue(
        offer.quote.measurement,
        offer.quote.platform_id,
        KeyOffer::expected_report_data(&offer.point),
    );
    frame.bytes = offer.encode();
    frame.adversarial = true;
    true
}
