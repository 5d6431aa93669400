use super::*;
use crate::relay::audit_trail;

const TWO_CHAIN: &str = include_str!("../../../../scenarios/two_chain_read.toml");

fn two_chain() -> Scenario {
    Scenario::parse(TWO_CHAIN).unwrap()
}

fn small(count: u32) -> Scenario {
    let mut s = two_chain();
    s.workload[0].count = count;
    s
}

fn run(s: Scenario) -> SimulationResult {
    Simulation::new(s).unwrap().run().unwrap()
}

#[test]
fn two_chain_read_completes() {
    let r = run(two_chain());
    assert_eq!(r.workload().count(), 100);
    assert!(r.all_completed());
    assert!(r.converged);
    for t in r.workload() {
        assert_eq!(t.result.as_deref(), Some("ok:42"));
        assert_eq!(t.verdict.as_deref(), Some("verified"));
        let stamps = [Some(t.emit), t.pack, t.submit, t.included, t.forward, t.execute, t.response, t.callback];
        let stamps: Vec<u64> = stamps.iter().map(|s| s.unwrap()).collect();
        assert!(stamps.windows(2).all(|w| w[0] <= w[1]), "{t:?}");
    }
    let app = r.contract(1, "app").unwrap();
    assert_eq!(app.invocation_count("on_price"), 100);
    assert_eq!(app.get("on_price"), Some(&b"\x0042"[..]));
}

#[test]
fn same_seed_same_run() {
    let digest = |r: &SimulationResult| {
        let blocks: Vec<Vec<u8>> = r.blocks.iter().map(|b| b.encode()).collect();
        (blocks, r.timelines.clone(), r.submissions.clone(), r.capture.clone())
    };
    let a = run(small(20));
    let b = run(small(20));
    assert_eq!(digest(&a), digest(&b));

    let mut other = small(20);
    other.seed += 1;
    let c = run(other);
    assert_ne!(digest(&a).3, digest(&c).3);
}

#[test]
fn unauthorized_read_is_denied_without_forward() {
    let mut s = small(2);
    s.users.push("mallory".into());
    let mut w = s.workload[0].clone();
    w.user = "mallory".into();
    w.label = Some("intruder".into());
    s.workload.push(w);
    let r = run(s);
    let denied: Vec<&TxTimeline> = r.workload().filter(|t| t.label.as_deref() == Some("intruder")).collect();
    assert_eq!(denied.len(), 2);
    for t in &denied {
        assert_eq!(t.outcome, Some(Outcome::Denied));
        assert_eq!(t.reason.as_deref(), Some("access-denied"));
        assert!(t.forward.is_none());
        let trail = audit_trail(&r.blocks, t.request_hash.unwrap());
        assert_eq!(trail.evidence.len(), 1);
        assert!(!trail.evidence[0].forwarded);
    }
    assert!(!r.all_completed());
}

#[test]
fn error_results_travel_back() {
    let mut s = small(1);
    s.chains[1].acl = "2 | 1 | * | * | read | @alice".into();
    s.workload[0].dst_contract = "nowhere".into();
    let r = run(s);
    let t = r.workload().next().unwrap();
    assert_eq!(t.outcome, Some(Outcome::Completed));
    assert_eq!(t.result.as_deref(), Some("err:unknown contract: nowhere"));
}

#[test]
fn one_way_call_completes_at_execution() {
    let mut s = small(3);
    s.chains[1].acl = "2 | 1 | kv | counter | invoke | @alice".into();
    s.workload[0].function = "invoke".into();
    s.workload[0].args = vec!["counter".into()];
    s.workload[0].callback = None;
    let r = run(s);
    assert!(r.all_completed());
    assert!(r.workload().all(|t| t.callback.is_none() && t.response.is_none()));
    assert_eq!(r.contract(2, "kv").unwrap().invocation_count("counter"), 3);
}

#[test]
fn captured_traffic_carries_no_plaintext() {
    let mut s = small(5);
    s.chains[1].acl = "2 | 1 | kv | * | write | @alice".into();
    s.workload[0].function = "write".into();
    s.workload[0].args = vec!["marker-key-{i}".into(), "PLAINTEXT-MARKER-{i}".into()];
    let r = run(s);
    assert!(r.all_completed());
    assert_eq!(r.contract(2, "kv").unwrap().get("marker-key-4"), Some(&b"PLAINTEXT-MARKER-4"[..]));
    let markers: [&[u8]; 5] = [b"PLAINTEXT-MARKER", b"marker-key", b"on_price", b"write", b"app"];
    let after_registration = r.capture.iter().filter(|f| f.kind != FrameKind::KeyOffer);
    let mut scanned = 0;
    for f in after_registration {
        scanned += 1;
        for m in markers {
            assert!(!f.bytes.windows(m.len()).any(|w| w == m), "frame {} carries {:?}", f.id, String::from_utf8_lossy(m));
        }
    }
    assert!(scanned > 20);
    assert!(r.leaked.is_empty());
}

#[test]
fn replayed_submission_is_refused() {
    let mut s = small(2);
    s.adversary = vec![AdversaryAction::Replay {
        target: FrameSelector { kind: FrameKind::Submit, from: Some(Endpoint::Router(1)), to: None, index: 2 },
        delay_ms: 300,
    }];
    let r = run(s);
    assert!(r.all_completed());
    let replays: Vec<&SubmitRecord> = r.submissions.iter().filter(|x| x.adversarial && !x.gossip).collect();
    assert_eq!(replays.len(), 1);
    assert_eq!(replays[0].result, "replay");
    assert_eq!(r.adversary_log.len(), 1);
    assert_eq!(r.app_callbacks(), 2);
}

#[test]
fn swapped_key_offer_is_refused_by_the_router() {
    let mut s = small(1);
    s.adversary = vec![AdversaryAction::MitmSwap { to: Endpoint::Router(1) }];
    let r = run(s.clone());
    assert_eq!(r.registered[&1], false);
    assert!(r.router_incidents.iter().any(|i| i.chain == 1 && i.code == "attestation"));
    assert_eq!(r.workload().next().unwrap().reason.as_deref(), Some("not-registered"));
    assert!(r.leaked.is_empty());

    s.knobs.skip_attestation = true;
    let r = run(s);
    assert_eq!(r.registered[&1], true);
    assert_eq!(r.leaked.len(), 1);
    assert_eq!(r.leaked[0].input.args, vec![b"price".to_vec()]);
    assert_eq!(r.workload().next().unwrap().reason.as_deref(), Some("aead"));
}

#[test]
fn lost_forwards_expire() {
    let mut s = small(3);
    s.chains[1].relay_endpoint = 1;
    s.network.links.push(LinkSection {
        from: Endpoint::Relay(0),
        to: Endpoint::Router(2),
        latency_ms: Latency::Constant(5),
        loss: 1.0,
        duplication: 0.0,
    });
    s.workload[0].timeout_ms = 1_000;
    let r = run(s);
    assert!(r.workload().all(|t| t.outcome == Some(Outcome::Expired)));
    assert!(r.capture.iter().any(|f| f.kind == FrameKind::Forward && f.delivered_at.is_none()));
}

#[test]
fn duplicated_frames_do_not_double_execute() {
    let mut s = small(10);
    s.network.default.duplication = 0.5;
    let r = run(s);
    assert!(r.all_completed());
    assert_eq!(r.app_callbacks(), 10);
    assert!(r.router_incidents.iter().any(|i| i.code == "duplicate-request" || i.code == "duplicate-response")
        || r.submissions.iter().any(|x| x.result == "replay"));
}

#[test]
fn rotation_and_an_offline_node() {
    let mut s = small(10);
    s.relay.rotation = true;
    s.relay.batch_size = 3;
    let r = run(s);
    assert!(r.all_completed());
    let producers: std::collections::BTreeSet<u32> = r.blocks.iter().map(|b| b.producer).collect();
    assert_eq!(producers.len(), 4);
    assert!(r.converged);

    let mut s = small(5);
    s.relay.offline = [3].into();
    let r = run(s);
    assert!(r.all_completed());
    assert_eq!(r.bootstrap.participants, vec![0, 1, 2]);

    let mut s = small(5);
    s.relay.offline = [2, 3].into();
    assert!(matches!(Simulation::new(s), Err(SimError::Bootstrap(_))));
}

#[test]
fn watchdog_fires() {
    let mut s = small(3);
    s.max_time_ms = 1_050;
    assert!(matches!(Simulation::new(s).unwrap().run(), Err(SimError::Deadlock { .. })));
}

#[test]
fn unreachable_relay_fails_registration() {
    let mut s = small(1);
    s.adversary = vec![AdversaryAction::Drop {
        target: FrameSelector { kind: FrameKind::KeyOffer, from: None, to: Some(Endpoint::Router(1)), index: 1 },
    }];
    let r = run(s);
    assert!(r.router_incidents.iter().any(|i| i.chain == 1 && i.code == "relay-unreachable"));
    assert_eq!(r.workload().next().unwrap().reason.as_deref(), Some("not-registered"));
}

#[test]
fn persisted_chain_matches_memory() {
    let dir = tempfile::tempdir().unwrap();
    let r = Simulation::with_chain_dir(small(4), dir.path()).unwrap().run().unwrap();
    let stored = crate::relay::load_chain(&dir.path().join("node-1")).unwrap();
    assert_eq!(stored, r.blocks);
}

impl SimulationResult {
    fn app_callbacks(&self) -> u64 {
        self.contract(1, "app").unwrap().invocation_count("on_price")
    }
}
