//! The attack suite: one adversary script per security property, each judged
//! by the reason code the defense should produce.

use std::fmt;
use std::str::FromStr;

use ccrelay_core::ccip::ChainId;
use ccrelay_core::testbed::{
    AdversaryAction, ContractSection, Endpoint, FrameKind, FrameSelector, Outcome, Scenario, SimError, Simulation,
    SimulationResult, TxTimeline, WorkloadSection,
};
use ccrelay_core::SecurityKnobs;
use serde::Serialize;

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Attack {
    Replay,
    DataRace,
    Tamper,
    Masquerade,
    Mitm,
    UnauthorizedAccess,
}

impl Attack {
    pub const ALL: [Attack; 6] =
        [Attack::Replay, Attack::DataRace, Attack::Tamper, Attack::Masquerade, Attack::Mitm, Attack::UnauthorizedAccess];

    pub fn name(self) -> &'static str {
        match self {
            Attack::Replay => "replay",
            Attack::DataRace => "data-race",
            Attack::Tamper => "tamper",
            Attack::Masquerade => "masquerade",
            Attack::Mitm => "mitm",
            Attack::UnauthorizedAccess => "unauthorized-access",
        }
    }

    /// Reason code a working defense produces.
    pub fn expected(self) -> &'static str {
        match self {
            Attack::Replay => "replay",
            Attack::DataRace => "ordered",
            Attack::Tamper => "bad-signature",
            Attack::Masquerade => "bad-originator-signature",
            Attack::Mitm => "attestation",
            Attack::UnauthorizedAccess => "access-denied",
        }
    }

    /// Knob that switches the defense off, for the negative control.
    pub fn disable(self, knobs: &mut SecurityKnobs) {
        match self {
            Attack::Replay => knobs.skip_replay_check = true,
            Attack::DataRace => knobs.skip_ordering = true,
            Attack::Tamper => knobs.skip_router_signature = true,
            Attack::Masquerade => knobs.skip_originator_signature = true,
            Attack::Mitm => knobs.skip_attestation = true,
            Attack::UnauthorizedAccess => knobs.skip_acl = true,
        }
    }
}

impl fmt::Display for Attack {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Attack {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Attack::ALL.into_iter().find(|a| a.name() == s).ok_or_else(|| {
            let names: Vec<&str> = Attack::ALL.iter().map(|a| a.name()).collect();
            format!("unknown attack {s:?}, expected one of {}", names.join(", "))
        })
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct CaseResult {
    pub attack: Attack,
    pub passed: bool,
    pub expected: &'static str,
    pub observed: String,
    /// Evidence lines, most useful when the case fails.
    pub trace: Vec<String>,
}

#[derive(Debug, thiserror::Error)]
pub enum SuiteError {
    #[error("base scenario needs at least two chains")]
    TooFewChains,
    #[error(transparent)]
    Sim(#[from] SimError),
}

const ALICE: &str = "alice";
const MALLORY: &str = "mallory";
const DATA: &str = "kv";
const APP: &str = "app";

struct Setup {
    src: ChainId,
    dst: ChainId,
}

/// Turns the base scenario into a clean stage: two chains, an app contract
/// on the source, a data contract with a price on the destination, and an
/// ACL that lets alice read and write it. Workload and adversary are cleared.
fn stage(base: &Scenario) -> Result<(Scenario, Setup), SuiteError> {
    if base.chains.len() < 2 {
        return Err(SuiteError::TooFewChains);
    }
    let mut s = base.clone();
    let (src, dst) = (s.chains[0].id, s.chains[1].id);
    s.workload.clear();
    s.adversary.clear();
    for u in [ALICE, MALLORY] {
        if !s.users.iter().any(|x| x == u) {
            s.users.push(u.into());
        }
    }
    let ensure = |contracts: &mut Vec<ContractSection>, id: &str, state: &[(&str, &str)]| {
        contracts.retain(|c| c.id != id);
        contracts.push(ContractSection {
            id: id.into(),
            state: state.iter().map(|(k, v)| (k.to_string(), v.to_string())).collect(),
        });
    };
    ensure(&mut s.chains[0].contracts, APP, &[]);
    ensure(&mut s.chains[1].contracts, DATA, &[("price", "42")]);
    s.chains[1].acl = format!("{dst} | {src} | {DATA} | * | read | @{ALICE}\n{dst} | {src} | {DATA} | * | write | @{ALICE}\n");
    Ok((s, Setup { src, dst }))
}

fn request(setup: &Setup, user: &str, function: &str, args: &[&str], label: &str, start_ms: u64) -> WorkloadSection {
    WorkloadSection {
        label: Some(label.into()),
        chain: setup.src,
        user: user.into(),
        dst_chain: setup.dst,
        src_contract: APP.into(),
        dst_contract: DATA.into(),
        function: function.into(),
        args: args.iter().map(|a| a.to_string()).collect(),
        callback: Some("on_result".into()),
        timeout_ms: 5_000,
        start_ms,
        count: 1,
        every_ms: 0,
    }
}

/// Frame selector for the `n`-th transaction the source router sends; the
/// registration is the first.
fn nth_submit(setup: &Setup, n: usize) -> FrameSelector {
    FrameSelector { kind: FrameKind::Submit, from: Some(Endpoint::Router(setup.src)), to: None, index: n }
}

pub fn scenario_for(attack: Attack, base: &Scenario) -> Result<Scenario, SuiteError> {
    let (mut s, setup) = stage(base)?;
    match attack {
        Attack::Replay => {
            s.workload.push(request(&setup, ALICE, "read", &["price"], "victim", 1_000));
            s.adversary.push(AdversaryAction::Replay { target: nth_submit(&setup, 2), delay_ms: 400 });
        }
        Attack::DataRace => {
            // Both writes land in one source block, so they share timestamp1
            // and differ only in seq_num. The first one is held back on the
            // wire so it arrives second; a block holds exactly the pair.
            s.workload.push(request(&setup, ALICE, "write", &["slot", "first"], "race-first", 1_000));
            s.workload.push(request(&setup, ALICE, "write", &["slot", "second"], "race-second", 1_000));
            s.adversary.push(AdversaryAction::Delay { target: nth_submit(&setup, 2), delay_ms: 30 });
            s.relay.batch_size = 2;
            s.relay.batch_interval_ms = 10_000;
            s.relay.rotation = false;
            for c in &mut s.chains {
                c.relay_endpoint = 0;
            }
        }
        Attack::Tamper => {
            s.workload.push(request(&setup, ALICE, "read", &["price"], "victim", 1_000));
            // Offset 17 is the last byte of seq_num in the encoded header.
            s.adversary.push(AdversaryAction::Tamper { target: nth_submit(&setup, 2), offset: 17, xor: 0x01 });
        }
        Attack::Masquerade => {
            s.adversary.push(AdversaryAction::Masquerade {
                at_ms: 1_000,
                chain: setup.src,
                as_user: ALICE.into(),
                dst_chain: setup.dst,
                src_contract: APP.into(),
                dst_contract: DATA.into(),
                function: "write".into(),
                args: vec!["price".into(), "0".into()],
                callback: Some("on_result".into()),
                timeout_ms: 5_000,
            });
        }
        Attack::Mitm => {
            s.workload.push(request(&setup, ALICE, "read", &["price"], "victim", 1_000));
            s.adversary.push(AdversaryAction::MitmSwap { to: Endpoint::Router(setup.src) });
        }
        Attack::UnauthorizedAccess => {
            s.workload.push(request(&setup, MALLORY, "read", &["price"], "intruder", 1_000));
        }
    }
    s.name = format!("attack-{}", attack.name());
    Ok(s)
}

fn labelled<'a>(r: &'a SimulationResult, label: &str) -> Option<&'a TxTimeline> {
    r.timelines.iter().find(|t| t.label.as_deref() == Some(label))
}

fn describe(t: Option<&TxTimeline>) -> String {
    match t {
        None => "missing".into(),
        Some(t) => format!(
            "{} seq={:?} verdict={:?} outcome={:?} reason={:?} result={:?}",
            t.label.as_deref().unwrap_or("-"),
            t.seq_num,
            t.verdict,
            t.outcome,
            t.reason,
            t.result
        ),
    }
}

/// Number of block entries for `hash` whose verdict passed verification.
fn verified_inclusions(r: &SimulationResult, hash: ccrelay_core::crypto::Hash32) -> usize {
    r.blocks.iter().flat_map(|b| &b.entries).filter(|e| e.tx_hash() == hash && e.verdict.is_verified()).count()
}

pub fn judge(attack: Attack, r: &SimulationResult) -> CaseResult {
    let mut trace = Vec::new();
    let (passed, observed) = match attack {
        Attack::Replay => {
            let victim = labelled(r, "victim");
            trace.push(describe(victim));
            let replays: Vec<_> = r.submissions.iter().filter(|s| s.adversarial && !s.gossip).collect();
            for s in &replays {
                trace.push(format!("replayed frame {} at {} ms: {}", s.frame, s.time, s.result));
            }
            let hash = victim.and_then(|t| t.request_hash);
            let inclusions = hash.map_or(0, |h| verified_inclusions(r, h));
            trace.push(format!("verified inclusions of the victim: {inclusions}"));
            let observed = replays.first().map_or("no replay delivered".into(), |s| s.result.clone());
            let ok = !replays.is_empty() && replays.iter().all(|s| s.result == "replay") && inclusions == 1;
            (ok, observed)
        }
        Attack::DataRace => {
            let first = labelled(r, "race-first");
            let second = labelled(r, "race-second");
            trace.push(describe(first));
            trace.push(describe(second));
            let final_value =
                r.contract(r.scenario.chains[1].id, DATA).and_then(|c| c.get("slot")).map(|v| String::from_utf8_lossy(v).into_owned());
            trace.push(format!("final slot value: {final_value:?}"));
            let order: Vec<(u64, u64)> = r
                .blocks
                .iter()
                .flat_map(|b| &b.entries)
                .filter(|e| [first, second].iter().any(|t| t.and_then(|t| t.request_hash) == Some(e.tx_hash())))
                .map(|e| (e.tx.header.timestamp1, e.tx.header.seq_num))
                .collect();
            trace.push(format!("inclusion order (timestamp1, seq_num): {order:?}"));
            let sorted = order.len() == 2 && order[0] <= order[1];
            let both_answered = [first, second].iter().all(|t| {
                t.is_some_and(|t| t.outcome == Some(Outcome::Completed) && t.result.as_deref() == Some("ok:"))
            });
            let callbacks = r.contract(r.scenario.chains[0].id, APP).map_or(0, |c| c.invocation_count("on_result"));
            trace.push(format!("callbacks executed: {callbacks}"));
            let ok = sorted && final_value.as_deref() == Some("second") && both_answered && callbacks == 2;
            (ok, if sorted { "ordered".into() } else { "arrival-order".into() })
        }
        Attack::Tamper => {
            let victim = labelled(r, "victim");
            trace.push(describe(victim));
            let tampered: Vec<_> = r.submissions.iter().filter(|s| s.adversarial && !s.gossip).collect();
            for s in &tampered {
                trace.push(format!("tampered frame {}: {}", s.frame, s.result));
            }
            let observed = tampered.first().map_or("no tampered frame delivered".into(), |s| s.result.clone());
            let ok = tampered.len() == 1
                && observed == attack.expected()
                && victim.is_some_and(|t| t.outcome == Some(Outcome::Rejected) && t.verdict.is_none());
            (ok, observed)
        }
        Attack::Masquerade => {
            let forged = labelled(r, "masquerade");
            trace.push(describe(forged));
            let data = r.contract(r.scenario.chains[1].id, DATA).and_then(|c| c.get("price")).map(|v| v.to_vec());
            trace.push(format!("price after attack: {:?}", data.as_deref().map(String::from_utf8_lossy)));
            let observed = forged.and_then(|t| t.verdict.clone()).unwrap_or_else(|| "not included".into());
            let ok = observed == attack.expected()
                && forged.is_some_and(|t| t.outcome == Some(Outcome::Denied) && t.forward.is_none())
                && data.as_deref() == Some(b"42");
            (ok, observed)
        }
        Attack::Mitm => {
            let src = r.scenario.chains[0].id;
            let incidents: Vec<_> = r.router_incidents.iter().filter(|i| i.chain == src).collect();
            for i in &incidents {
                trace.push(format!("router {} at {} ms: {}", i.chain, i.time, i.code));
            }
            trace.push(format!("registered: {:?}; payloads read by the adversary: {}", r.registered.get(&src), r.leaked.len()));
            let observed = incidents.first().map_or("registered".into(), |i| i.code.to_string());
            let ok = observed == attack.expected() && r.registered.get(&src) == Some(&false) && r.leaked.is_empty();
            (ok, observed)
        }
        Attack::UnauthorizedAccess => {
            let intruder = labelled(r, "intruder");
            trace.push(describe(intruder));
            let observed = intruder.and_then(|t| t.verdict.clone()).unwrap_or_else(|| "not included".into());
            let ok = observed == attack.expected()
                && intruder.is_some_and(|t| t.outcome == Some(Outcome::Denied) && t.forward.is_none());
            (ok, observed)
        }
    };
    CaseResult { attack, passed, expected: attack.expected(), observed, trace }
}

/// Runs one attack against `base` with `knobs` layered on top.
pub fn run_case(attack: Attack, base: &Scenario, knobs: SecurityKnobs) -> Result<CaseResult, SuiteError> {
    let mut s = scenario_for(attack, base)?;
    s.knobs = knobs;
    let r = Simulation::new(s)?.run()?;
    Ok(judge(attack, &r))
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct SuiteReport {
    pub cases: Vec<CaseResult>,
    /// For each case, whether disabling its defense made it fail.
    pub controls: Vec<(Attack, bool)>,
}

impl SuiteReport {
    pub fn passed(&self) -> bool {
        self.cases.iter().all(|c| c.passed) && self.controls.iter().all(|(_, flipped)| *flipped)
    }
}

/// Runs `attacks` with the base scenario's knobs and, if asked, once more
/// per attack with its defense disabled.
pub fn run_suite(base: &Scenario, attacks: &[Attack], negative_controls: bool) -> Result<SuiteReport, SuiteError> {
    let mut cases = Vec::new();
    let mut controls = Vec::new();
    for &a in attacks {
        cases.push(run_case(a, base, base.knobs)?);
        if negative_controls {
            let mut knobs = base.knobs;
            a.disable(&mut knobs);
            controls.push((a, !run_case(a, base, knobs)?.passed));
        }
    }
    Ok(SuiteReport { cases, controls })
}
