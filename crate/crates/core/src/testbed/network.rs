//! Discrete-event message transport with per-link latency, loss,
//! duplication, a capture log and adversary hooks.

use std::cmp::Reverse;
use std::collections::{BTreeMap, BinaryHeap};
use std::fmt;
use std::str::FromStr;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha20Rng;
use serde::{Deserialize, Deserializer, Serialize, Serializer};

use super::adversary::{Adversary, Interception};
use crate::ccip::ChainId;
use crate::Millis;

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Endpoint {
    Router(ChainId),
    Relay(u32),
}

impl fmt::Display for Endpoint {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Endpoint::Router(c) => write!(f, "router-{c}"),
            Endpoint::Relay(n) => write!(f, "relay-{n}"),
        }
    }
}

impl FromStr for Endpoint {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let bad = || format!("endpoint must be router-<chain> or relay-<node>, got {s:?}");
        if let Some(c) = s.strip_prefix("router-") {
            c.parse().map(Endpoint::Router).map_err(|_| bad())
        } else if let Some(n) = s.strip_prefix("relay-") {
            n.parse().map(Endpoint::Relay).map_err(|_| bad())
        } else {
            Err(bad())
        }
    }
}

impl Serialize for Endpoint {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        s.collect_str(self)
    }
}

impl<'de> Deserialize<'de> for Endpoint {
    fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        String::deserialize(d)?.parse().map_err(serde::de::Error::custom)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum FrameKind {
    /// Relay key offer to a router.
    KeyOffer,
    /// Encoded transaction from a router to a relay node.
    Submit,
    /// Forward envelope from a relay node to a router.
    Forward,
    /// Transaction passed between relay nodes.
    Gossip,
    /// Relay block passed between relay nodes.
    Block,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Frame {
    pub id: u64,
    pub from: Endpoint,
    pub to: Endpoint,
    pub kind: FrameKind,
    pub bytes: Vec<u8>,
    pub adversarial: bool,
}

/// Constant (`latency_ms = 5`) or uniform (`latency_ms = [2, 8]`) latency.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Latency {
    Constant(Millis),
    Uniform([Millis; 2]),
}

impl Latency {
    fn sample(&self, rng: &mut ChaCha20Rng) -> Millis {
        match *self {
            Latency::Constant(ms) => ms,
            Latency::Uniform([lo, hi]) if hi > lo => rng.gen_range(lo..=hi),
            Latency::Uniform([lo, _]) => lo,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LinkConfig {
    #[serde(default = "default_latency")]
    pub latency_ms: Latency,
    #[serde(default)]
    pub loss: f64,
    #[serde(default)]
    pub duplication: f64,
}

fn default_latency() -> Latency {
    Latency::Constant(5)
}

impl Default for LinkConfig {
    fn default() -> Self {
        Self { latency_ms: default_latency(), loss: 0.0, duplication: 0.0 }
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct CapturedFrame {
    pub id: u64,
    pub sent_at: Millis,
    /// Delivery time, or `None` if the frame was lost.
    pub delivered_at: Option<Millis>,
    pub from: Endpoint,
    pub to: Endpoint,
    pub kind: FrameKind,
    pub adversarial: bool,
    #[serde(serialize_with = "hex_bytes")]
    pub bytes: Vec<u8>,
}

fn hex_bytes<S: Serializer>(b: &[u8], s: S) -> Result<S::Ok, S::Error> {
    s.serialize_str(&hex::encode(b))
}

pub struct SimNetwork {
    default_link: LinkConfig,
    links: BTreeMap<(Endpoint, Endpoint), LinkConfig>,
    rng: ChaCha20Rng,
    queue: BinaryHeap<Reverse<(Millis, u64)>>,
    in_flight: BTreeMap<u64, (Millis, Frame)>,
    fifo_tail: BTreeMap<(Endpoint, Endpoint), Millis>,
    next_id: u64,
    capture: Vec<CapturedFrame>,
    adversary: Adversary,
}

impl SimNetwork {
    pub fn new(seed: u64, default_link: LinkConfig, adversary: Adversary) -> Self {
        Self {
            default_link,
            links: BTreeMap::new(),
            rng: ChaCha20Rng::seed_from_u64(seed),
            queue: BinaryHeap::new(),
            in_flight: BTreeMap::new(),
            fifo_tail: BTreeMap::new(),
            next_id: 0,
            capture: Vec::new(),
            adversary,
        }
    }

    pub fn set_link(&mut self, from: Endpoint, to: Endpoint, link: LinkConfig) {
        self.links.insert((from, to), link);
    }

    pub fn adversary(&self) -> &Adversary {
        &self.adversary
    }

    pub fn capture(&self) -> &[CapturedFrame] {
        &self.capture
    }

    pub fn in_flight(&self) -> usize {
        self.in_flight.len()
    }

    fn fresh_id(&mut self) -> u64 {
        self.next_id += 1;
        self.next_id
    }

    /// Sends a frame. The adversary sees it first and may rewrite, delay,
    /// drop or replay it.
    pub fn send(&mut self, now: Millis, from: Endpoint, to: Endpoint, kind: FrameKind, bytes: Vec<u8>) -> u64 {
        let id = self.fresh_id();
        let mut frame = Frame { id, from, to, kind, bytes, adversarial: false };
        let Interception { delay, drop, replays } = self.adversary.intercept(now, &mut frame);
        for replay_delay in replays {
            let copy = Frame { id: self.fresh_id(), adversarial: true, ..frame.clone() };
            self.schedule(now + replay_delay, copy, true);
        }
        if drop {
            self.record(now, None, &frame);
            return id;
        }
        let hooked = frame.adversarial || delay > 0;
        self.schedule(now + delay, frame, hooked);
        id
    }

    /// Puts an adversary-built frame on the wire.
    pub fn inject(&mut self, now: Millis, from: Endpoint, to: Endpoint, kind: FrameKind, bytes: Vec<u8>) -> u64 {
        let id = self.fresh_id();
        self.adversary.note_injection(now, id);
        self.schedule(now, Frame { id, from, to, kind, bytes, adversarial: true }, true);
        id
    }

    /// Applies link latency, loss and duplication. Frames the adversary
    /// touched are exempt from FIFO so reordering is possible.
    fn schedule(&mut self, at: Millis, frame: Frame, hooked: bool) {
        let link_key = (frame.from, frame.to);
        let link = *self.links.get(&link_key).unwrap_or(&self.default_link);
        if link.loss > 0.0 && self.rng.gen_bool(link.loss.min(1.0)) {
            self.record(at, None, &frame);
            return;
        }
        let duplicate = link.duplication > 0.0 && self.rng.gen_bool(link.duplication.min(1.0));
        let mut deliver = at + link.latency_ms.sample(&mut self.rng);
        if !hooked {
            let tail = self.fifo_tail.entry(link_key).or_insert(0);
            deliver = deliver.max(*tail);
            *tail = deliver;
        }
        if duplicate {
            let copy = Frame { id: self.fresh_id(), ..frame.clone() };
            self.enqueue(deliver, copy);
        }
        self.enqueue(deliver, frame);
    }

    fn enqueue(&mut self, at: Millis, frame: Frame) {
        self.queue.push(Reverse((at, frame.id)));
        self.in_flight.insert(frame.id, (at, frame));
    }

    fn record(&mut self, sent_at: Millis, delivered_at: Option<Millis>, f: &Frame) {
        self.capture.push(CapturedFrame {
            id: f.id,
            sent_at,
            delivered_at,
            from: f.from,
            to: f.to,
            kind: f.kind,
            adversarial: f.adversarial,
            bytes: f.bytes.clone(),
        });
    }

    pub fn next_time(&self) -> Option<Millis> {
        self.queue.peek().map(|Reverse((t, _))| *t)
    }

    /// Delivers the earliest frame and logs it.
    pub fn pop(&mut self) -> Option<(Millis, Frame)> {
        let Reverse((at, id)) = self.queue.pop()?;
        let (_, frame) = self.in_flight.remove(&id).expect("queued frame is in flight");
        self.record(at, Some(at), &frame);
        Some((at, frame))
    }
}
