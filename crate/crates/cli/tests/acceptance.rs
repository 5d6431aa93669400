//! Acceptance criteria, one line per criterion. Exits nonzero if any fails.

use std::collections::BTreeMap;
use std::net::{Ipv4Addr, SocketAddrV4};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::Path;
use std::time::Instant;

use ccrelay_cli::attacks::{run_suite, Attack};
use ccrelay_cli::benchmark::{batch_sweep, is_nondecreasing, run_wallclock};
use ccrelay_cli::report::{validate_jsonl, validate_summary, ScenarioReport};
use ccrelay_core::acl::{AccessRequest, AccessRule, AclStore, AclVerdict, Operation, PathPattern, UserSet, Wildcard};
use ccrelay_core::ccip::{
    decode, decode_payload, encode, tx_hash, CcipHeader, CrossChainTransaction, ForwardEnvelope, PayloadEnvelope,
    RegistrationPayload, SealedPayload, TxType,
};
use ccrelay_core::crypto::{
    ecdh_derive, ecdh_derive_from_bytes, ecdh_respond, threshold_for, vss_check_secret, vss_deal, vss_recover,
    vss_verify_share, CurveParams, EcScalar, FieldParams, KeyExchangeMessage, ModScalar, Nonce, PublicKey, Share,
    Signature, SigningKeypair,
};
use ccrelay_core::relay::{audit_trail, load_chain, SessionOutcome};
use ccrelay_core::testbed::{Outcome, Scenario, SimError, Simulation};
use num_bigint::BigUint;
use rand::{Rng, RngCore, SeedableRng};
use rand_chacha::ChaCha20Rng;

type Check = Result<String, String>;

fn ensure(cond: bool, msg: impl FnOnce() -> String) -> Result<(), String> {
    if cond {
        Ok(())
    } else {
        Err(msg())
    }
}

fn scenario(name: &str) -> Scenario {
    let path = Path::new(env!("CARGO_MANIFEST_DIR")).join("../../scenarios").join(name);
    Scenario::load(&path).expect("scenario file")
}

// 1. Feldman VSS

fn k_subsets(n: usize, k: usize) -> Vec<Vec<usize>> {
    let mut out = Vec::new();
    for mask in 0u32..(1 << n) {
        if mask.count_ones() as usize == k {
            out.push((0..n).filter(|i| mask & (1 << i) != 0).collect());
        }
    }
    out
}

fn vss_over<T: ModScalar>(params: &FieldParams<T>, rng: &mut ChaCha20Rng, deltas: &dyn Fn(&mut ChaCha20Rng) -> Vec<T>) -> Result<(usize, usize), String> {
    let (mut recovered, mut perturbed) = (0, 0);
    for n in 3..=9usize {
        let t = (2 * n + 2) / 3;
        ensure(threshold_for(n) == t, || format!("threshold for n={n} is {}, expected {t}", threshold_for(n)))?;
        for _ in 0..100 {
            let secret = T::random_below(params.q(), rng);
            let deal = vss_deal(params, n, secret.clone(), rng).map_err(|e| e.to_string())?;
            for subset in k_subsets(n, t) {
                let shares: Vec<Share<T>> = subset.iter().map(|&i| deal.shares[i].clone()).collect();
                let got = vss_recover(params, t, &shares).map_err(|e| e.to_string())?;
                ensure(got == secret, || format!("n={n} subset {subset:?} recovered a different secret"))?;
                ensure(vss_check_secret(params, &got, &deal.commitments), || format!("n={n}: E_0 mismatch"))?;
                recovered += 1;
            }
            for i in 0..n {
                let honest = &deal.shares[i];
                ensure(vss_verify_share(params, honest, &deal.commitments), || format!("n={n}: honest share {i} rejected"))?;
                for d in deltas(rng) {
                    let bad = Share { index: honest.index, value: honest.value.add_mod(&d, params.q()) };
                    ensure(!vss_verify_share(params, &bad, &deal.commitments), || format!("n={n}: perturbed share {i} accepted"))?;
                    // A perturbed share inside a recovery set no longer matches E_0.
                    let mut set: Vec<Share<T>> = deal.shares[..t].to_vec();
                    if i < t {
                        set[i] = bad;
                        let wrong = vss_recover(params, t, &set).map_err(|e| e.to_string())?;
                        ensure(!vss_check_secret(params, &wrong, &deal.commitments), || format!("n={n}: bad recovery passed"))?;
                    }
                    perturbed += 1;
                }
            }
        }
    }
    Ok((recovered, perturbed))
}

fn vss_correctness() -> Check {
    let mut rng = ChaCha20Rng::seed_from_u64(1);
    let toy = FieldParams::<u64>::toy();
    let q = *toy.q();
    // Every nonzero offset in the toy field.
    let (r1, p1) = vss_over(&toy, &mut rng, &|_| (1..q).collect())?;
    let wide = FieldParams::<u64>::new(4_611_686_018_427_377_339, 2_305_843_009_213_688_669, 4).map_err(|e| e.to_string())?;
    let wq = *wide.q();
    let (r2, p2) = vss_over(&wide, &mut rng, &|rng: &mut ChaCha20Rng| vec![1, rng.gen_range(1..wq)])?;
    Ok(format!("n=3..9 x 100 secrets x 2 fields: {} t-subset recoveries, {} perturbed shares rejected", r1 + r2, p1 + p2))
}

// 2. Key exchange

fn secp256k1_prime() -> BigUint {
    (BigUint::from(1u8) << 256u32) - (BigUint::from(1u8) << 32u32) - BigUint::from(977u32)
}

/// Euler's criterion on `x^3 + 7`: whether some point has this x-coordinate.
fn x_on_curve(x: &BigUint) -> bool {
    let p = secp256k1_prime();
    let rhs = (x.modpow(&BigUint::from(3u8), &p) + BigUint::from(7u8)) % &p;
    rhs == BigUint::from(0u8) || rhs.modpow(&((&p - 1u8) >> 1u32), &p) == BigUint::from(1u8)
}

fn key_exchange() -> Check {
    let curve = CurveParams::secp256k1();
    let mut rng = ChaCha20Rng::seed_from_u64(2);
    for i in 0..1000 {
        let s = EcScalar::random(&mut rng);
        let b = EcScalar::random(&mut rng);
        let (a_msg, b_msg) = (ecdh_respond(&curve, &s), ecdh_respond(&curve, &b));
        let relay_side = ecdh_derive(&curve, &s, &b_msg).map_err(|e| e.to_string())?;
        let router_side = ecdh_derive(&curve, &b, &a_msg).map_err(|e| e.to_string())?;
        let via_bytes = ecdh_derive_from_bytes(&curve, &b, &a_msg.to_bytes()).map_err(|e| e.to_string())?;
        ensure(relay_side.as_bytes() == router_side.as_bytes(), || format!("pair {i}: keys differ"))?;
        ensure(via_bytes.as_bytes() == router_side.as_bytes(), || format!("pair {i}: byte path differs"))?;
    }
    let p = secp256k1_prime();
    let b = EcScalar::random(&mut rng);
    let mut rejected = 0;
    let mut attempts = 0;
    while attempts < 1000 {
        let mut raw = [0u8; 33];
        rng.fill_bytes(&mut raw);
        raw[0] = if rng.gen() { 2 } else { 3 };
        let x = BigUint::from_bytes_be(&raw[1..]);
        if x < p && x_on_curve(&x) {
            continue;
        }
        attempts += 1;
        let result = catch_unwind(|| ecdh_derive_from_bytes(&curve, &b, &raw));
        if matches!(result, Ok(Err(_))) {
            rejected += 1;
        }
    }
    ensure(rejected == attempts, || format!("{rejected}/{attempts} off-curve points rejected"))?;
    Ok(format!("1000/1000 pairs agree on both paths; {rejected}/{attempts} off-curve points rejected"))
}

// 3. Codec

struct TxGen {
    rng: ChaCha20Rng,
    keys: Vec<PublicKey>,
}

impl TxGen {
    fn new(seed: u64) -> Self {
        let keys = (0..16).map(|i| SigningKeypair::from_seed(format!("acceptance/{i}").as_bytes()).public_key()).collect();
        Self { rng: ChaCha20Rng::seed_from_u64(seed), keys }
    }

    fn key(&mut self) -> PublicKey {
        self.keys[self.rng.gen_range(0..self.keys.len())]
    }

    fn text(&mut self) -> String {
        let len = self.rng.gen_range(0..12);
        (0..len).map(|_| ['a', 'b', '/', 'é', '7', '_'][self.rng.gen_range(0..6)]).collect()
    }

    fn rule(&mut self) -> AccessRule {
        let r = &mut self.rng;
        let authorized = if r.gen() { Wildcard::Any } else { Wildcard::Exactly(r.gen()) };
        let resource = r.gen();
        let op = [None, Some(Operation::Read), Some(Operation::Write), Some(Operation::Invoke)][r.gen_range(0..4)];
        let contract = if self.rng.gen() { Wildcard::Any } else { Wildcard::Exactly(self.text()) };
        let path = match self.rng.gen_range(0..3) {
            0 => PathPattern::Any,
            1 => PathPattern::Exact(self.text()),
            _ => PathPattern::Prefix(format!("{}/", self.text())),
        };
        let users = match self.rng.gen_range(0..3) {
            0 => UserSet::Any,
            n => UserSet::Keys((0..n).map(|_| self.key()).collect()),
        };
        AccessRule {
            resource_blockchain: resource,
            authorized_blockchain: authorized,
            contract,
            resource_path: path,
            operate: op.map_or(Wildcard::Any, Wildcard::Exactly),
            user_identity: users,
        }
    }

    fn tx(&mut self) -> CrossChainTransaction {
        let tx_type = [TxType::Registration, TxType::Request, TxType::Response][self.rng.gen_range(0..3)];
        let mut sig = [0u8; 64];
        self.rng.fill_bytes(&mut sig);
        let header = CcipHeader {
            src_chain: self.rng.gen(),
            dst_chain: self.rng.gen(),
            tx_type,
            seq_num: self.rng.gen(),
            timestamp1: self.rng.gen(),
            router_public_key: self.key(),
            signature: Signature::from_bytes(sig),
        };
        let payload = if tx_type == TxType::Registration {
            let point = KeyExchangeMessage::from_bytes(self.key().as_bytes()).expect("valid point");
            let n = self.rng.gen_range(0..5);
            PayloadEnvelope::Registration(RegistrationPayload {
                key_message: point,
                router_addr: SocketAddrV4::new(Ipv4Addr::from(self.rng.gen::<u32>()), self.rng.gen()),
                access_control_table: (0..n).map(|_| self.rule()).collect(),
            })
        } else {
            let mut nonce = [0u8; 12];
            self.rng.fill_bytes(&mut nonce);
            let mut ciphertext = vec![0u8; self.rng.gen_range(0..200)];
            self.rng.fill_bytes(&mut ciphertext);
            PayloadEnvelope::Sealed(SealedPayload { nonce: Nonce(nonce), ciphertext })
        };
        CrossChainTransaction { header, payload }
    }
}

fn codec() -> Check {
    let mut gen = TxGen::new(3);
    let mut corpus = Vec::new();
    for i in 0..10_000 {
        let tx = gen.tx();
        let bytes = encode(&tx);
        let back = decode(&bytes).map_err(|e| format!("tx {i}: {e}"))?;
        ensure(back == tx, || format!("tx {i}: decode(encode(tx)) != tx"))?;
        ensure(encode(&back) == bytes, || format!("tx {i}: re-encoding differs"))?;
        ensure(tx_hash(&back) == tx_hash(&tx) && tx_hash(&tx) == tx_hash(&tx.clone()), || format!("tx {i}: hash unstable"))?;
        if corpus.len() < 256 {
            corpus.push(bytes);
        }
    }

    let hook = std::panic::take_hook();
    std::panic::set_hook(Box::new(|_| {}));
    let mut rng = ChaCha20Rng::seed_from_u64(4);
    let (mut crashes, mut accepted, mut noncanonical) = (0, 0, 0);
    for i in 0..100_000 {
        let frame: Vec<u8> = if i % 2 == 0 {
            let mut f = vec![0u8; rng.gen_range(0..400)];
            rng.fill_bytes(&mut f);
            if rng.gen() && !f.is_empty() {
                f[0] = 1;
            }
            f
        } else {
            let mut f = corpus[rng.gen_range(0..corpus.len())].clone();
            for _ in 0..rng.gen_range(1..4) {
                match rng.gen_range(0..3) {
                    0 if !f.is_empty() => {
                        let at = rng.gen_range(0..f.len());
                        f[at] ^= 1 << rng.gen_range(0..8);
                    }
                    1 => f.truncate(rng.gen_range(0..=f.len())),
                    _ => f.push(rng.gen()),
                }
            }
            f
        };
        let outcome = catch_unwind(AssertUnwindSafe(|| {
            let tx = decode(&frame).ok();
            let _ = decode_payload(&frame);
            let _ = ForwardEnvelope::decode(&frame);
            tx
        }));
        match outcome {
            Err(_) => crashes += 1,
            Ok(Some(tx)) => {
                accepted += 1;
                if encode(&tx) != frame {
                    noncanonical += 1;
                }
            }
            Ok(None) => {}
        }
    }
    std::panic::set_hook(hook);
    ensure(crashes == 0, || format!("{crashes} fuzz frames crashed the decoder"))?;
    ensure(noncanonical == 0, || format!("{noncanonical} accepted frames are not canonical"))?;
    Ok(format!("10000 round trips; 100000 fuzz frames, 0 crashes ({accepted} decoded, all canonical)"))
}

// 4. ACL oracle

/// Raw rule fields as strings, judged without the crate's matchers.
struct RawRule {
    resource: u32,
    authorized: Option<u32>,
    contract: Option<&'static str>,
    path: &'static str,
    op: Option<&'static str>,
    users: Option<Vec<usize>>,
}

fn oracle(rules: &[RawRule], req: (u32, u32, &str, &str, &str, usize)) -> bool {
    let (resource, from, contract, path, op, user) = req;
    rules.iter().any(|r| {
        let path_ok = if r.path == "*" {
            true
        } else if r.path.len() >= 2 && r.path.ends_with("/*") {
            path.len() >= r.path.len() - 1 && path[..r.path.len() - 1] == r.path[..r.path.len() - 1]
        } else {
            r.path == path
        };
        r.resource == resource
            && r.authorized.map_or(true, |a| a == from)
            && r.contract.map_or(true, |c| c == contract)
            && path_ok
            && r.op.map_or(true, |o| o == op)
            && r.users.as_ref().map_or(true, |u| u.contains(&user))
    })
}

fn acl_oracle() -> Check {
    const CONTRACTS: [&str; 3] = ["kv", "vault", "app"];
    const PATHS: [&str; 6] = ["price", "balances/alice", "balances/bob", "balances", "a/b/c", "balances/"];
    const PATTERNS: [&str; 7] = ["*", "price", "balances/*", "a/*", "balances", "a/b/c", "b*"];
    const OPS: [&str; 3] = ["read", "write", "invoke"];
    let users: Vec<PublicKey> =
        (0..4).map(|i| SigningKeypair::from_seed(format!("acl-user-{i}").as_bytes()).public_key()).collect();
    let mut rng = ChaCha20Rng::seed_from_u64(5);
    let mut allows = 0;
    for case in 0..10_000 {
        let raw: Vec<RawRule> = (0..rng.gen_range(0..=16))
            .map(|_| RawRule {
                resource: rng.gen_range(1..=3),
                authorized: rng.gen::<bool>().then(|| rng.gen_range(1..=3)),
                contract: rng.gen::<bool>().then(|| CONTRACTS[rng.gen_range(0..3)]),
                path: PATTERNS[rng.gen_range(0..PATTERNS.len())],
                op: rng.gen::<bool>().then(|| OPS[rng.gen_range(0..3)]),
                users: rng.gen::<bool>().then(|| (0..rng.gen_range(1..=2)).map(|_| rng.gen_range(0..4)).collect()),
            })
            .collect();
        let store = AclStore::new();
        let mut tables: BTreeMap<u32, Vec<AccessRule>> = BTreeMap::new();
        for r in &raw {
            tables.entry(r.resource).or_default().push(AccessRule {
                resource_blockchain: r.resource,
                authorized_blockchain: r.authorized.map_or(Wildcard::Any, Wildcard::Exactly),
                contract: r.contract.map_or(Wildcard::Any, |c| Wildcard::Exactly(c.to_string())),
                resource_path: PathPattern::parse(r.path),
                operate: r.op.map_or(Wildcard::Any, |o| Wildcard::Exactly(o.parse().expect("op"))),
                user_identity: r.users.as_ref().map_or(UserSet::Any, |u| UserSet::Keys(u.iter().map(|&i| users[i]).collect())),
            });
        }
        for (chain, rules) in tables {
            store.register_table(chain, rules).map_err(|e| e.to_string())?;
        }
        let req = (
            rng.gen_range(1..=3),
            rng.gen_range(1..=3),
            CONTRACTS[rng.gen_range(0..3)],
            PATHS[rng.gen_range(0..PATHS.len())],
            OPS[rng.gen_range(0..3)],
            rng.gen_range(0..4),
        );
        let request = AccessRequest {
            resource_blockchain: req.0,
            requesting_blockchain: req.1,
            contract: req.2.into(),
            resource_path: req.3.into(),
            operation: req.4.parse().expect("op"),
            user: users[req.5],
        };
        let expected = oracle(&raw, req);
        let got = store.check(&request) == AclVerdict::Allow;
        ensure(got == expected, || format!("case {case}: store says {got}, oracle says {expected} for {req:?}"))?;
        allows += usize::from(got);
    }
    ensure((1_000..9_000).contains(&allows), || format!("degenerate sample: {allows} allows"))?;

    let empty = AclStore::new();
    empty.register_table(2, Vec::new()).map_err(|e| e.to_string())?;
    for chain in 1..=3 {
        for op in Operation::ALL {
            let r = AccessRequest {
                resource_blockchain: chain,
                requesting_blockchain: 1,
                contract: "kv".into(),
                resource_path: "price".into(),
                operation: op,
                user: users[0],
            };
            ensure(empty.check(&r) == AclVerdict::Deny, || "empty table allowed a request".into())?;
        }
    }
    Ok(format!("10000 random tables agree with the oracle ({allows} allow); empty table denies"))
}

// 5. Security suite

fn security_suite() -> Check {
    let report = run_suite(&scenario("two_chain_read.toml"), &Attack::ALL, true).map_err(|e| e.to_string())?;
    let mut failed = Vec::new();
    for c in &report.cases {
        if !c.passed {
            failed.push(format!("{} observed {} ({})", c.attack, c.observed, c.trace.join("; ")));
        }
    }
    for (a, flipped) in &report.controls {
        if !flipped {
            failed.push(format!("{a}: negative control still passes"));
        }
    }
    ensure(failed.is_empty(), || failed.join(" | "))?;
    let codes: Vec<String> = report.cases.iter().map(|c| format!("{}={}", c.attack, c.observed)).collect();
    Ok(format!("6/6 rejected [{}]; 6/6 negative controls fail", codes.join(", ")))
}

// 6 and 7. End-to-end session and accountability

fn end_to_end(dir: &Path) -> Check {
    let s = scenario("two_chain_read.toml");
    let a = Simulation::with_chain_dir(s.clone(), dir).and_then(Simulation::run).map_err(|e| e.to_string())?;
    let b = Simulation::new(s).and_then(Simulation::run).map_err(|e| e.to_string())?;
    let total = a.workload().count();
    let done = a.workload().filter(|t| t.outcome == Some(Outcome::Completed) && t.callback.is_some()).count();
    ensure(total == 100 && done == 100, || format!("{done}/{total} sessions completed"))?;
    ensure(a.workload().all(|t| t.result.as_deref() == Some("ok:42")), || "wrong result".into())?;
    let app = a.contract(1, "app").ok_or("no app contract")?;
    ensure(app.invocation_count("on_price") == 100, || format!("callback ran {} times", app.invocation_count("on_price")))?;
    ensure(app.get("on_price") == Some(&b"\x0042"[..]), || "source state not updated".into())?;
    let (ra, rb) = (ScenarioReport::from_result(&a), ScenarioReport::from_result(&b));
    let (ja, jb) = (ra.to_jsonl(), rb.to_jsonl());
    ensure(ja == jb && ra.summary_json() == rb.summary_json(), || "reports differ between seeded runs".into())?;
    validate_jsonl(&ja)?;
    validate_summary(&ra.summary_json())?;
    Ok(format!("100/100 completed, on_price executed 100 times, reports identical ({} bytes)", ja.len()))
}

fn accountability(dir: &Path) -> Check {
    let blocks = load_chain(&dir.join("node-1")).map_err(|e| e.to_string())?;
    let mut forwarded = 0;
    for b in &blocks {
        for e in b.entries.iter().filter(|e| e.forward.is_some() && e.tx.header.tx_type == TxType::Request) {
            let trail = audit_trail(&blocks, e.tx_hash());
            let ev = &trail.evidence;
            ensure(trail.outcome == SessionOutcome::Responded && ev.len() == 2, || format!("incomplete trail {trail:?}"))?;
            ensure(ev[0].tx_type == "request" && ev[0].verdict == "verified" && ev[0].forwarded, || format!("{:?}", ev[0]))?;
            ensure(ev[1].tx_type == "response" && ev[1].verdict == "verified" && ev[1].forwarded, || format!("{:?}", ev[1]))?;
            ensure(ev[0].height < ev[1].height, || "response precedes request".into())?;
            forwarded += 1;
        }
    }
    ensure(forwarded == 100, || format!("{forwarded} forwarded requests on chain"))?;

    let mut s = scenario("two_chain_read.toml");
    s.users.push("mallory".into());
    let mut w = s.workload[0].clone();
    w.user = "mallory".into();
    w.label = Some("intruder".into());
    w.count = 10;
    s.workload[0].count = 10;
    s.workload.push(w);
    let r = Simulation::new(s).and_then(Simulation::run).map_err(|e| e.to_string())?;
    let mut denied = 0;
    for t in r.workload().filter(|t| t.label.as_deref() == Some("intruder")) {
        let trail = audit_trail(&r.blocks, t.request_hash.ok_or("no hash")?);
        let ev = &trail.evidence;
        ensure(trail.outcome == SessionOutcome::Refused && ev.len() == 1, || format!("{trail:?}"))?;
        ensure(ev[0].verdict == "access-denied" && !ev[0].forwarded, || format!("{:?}", ev[0]))?;
        ensure(r.blocks.iter().flat_map(|b| &b.entries).all(|e| e.verdict.response_session() != t.request_hash), || "denied request answered".into())?;
        denied += 1;
    }
    ensure(denied == 10, || format!("{denied} denied requests"))?;
    Ok(format!("{forwarded} forwarded sessions with request and response evidence; {denied} denials with a single entry and no forward"))
}

// 8. Batching shape

fn batching_shape() -> Check {
    let s = scenario("benchmark.toml");
    let gap = s.workload[0].every_ms;
    let r = run_wallclock(&s, 4000, gap).map_err(|e| e.to_string())?;
    ensure(r.completed == 4000, || format!("{}/4000 answered", r.completed))?;
    let st = &r.sawtooth;
    ensure(st.detected, || format!("acf peak at lag {} ({:.3}), expected {:.1}", st.peak_lag, st.peak_acf, st.expected_period))?;
    let sweep = batch_sweep(&s, &[10, 100, 1000, 3000], 3).map_err(|e| e.to_string())?;
    let times: Vec<String> = sweep.iter().map(|p| format!("{}:{:.0}us", p.batch_size, p.processing_us)).collect();
    ensure(is_nondecreasing(&sweep), || format!("sweep not monotone: {}", times.join(" ")))?;
    Ok(format!(
        "4000 tx, p50 {:.1} ms; acf peak at lag {} ({:.3}) for period {:.0}; block time {}",
        r.latency.p50,
        st.peak_lag,
        st.peak_acf,
        st.expected_period,
        times.join(" ")
    ))
}

// 9. Bootstrap threshold

fn bootstrap_threshold() -> Check {
    let mut s = scenario("two_chain_read.toml");
    s.workload[0].count = 3;
    ensure(s.relay.nodes == 4 && threshold_for(4) == 3, || "expected n=4, t=3".into())?;
    s.relay.offline = [3].into();
    let sim = Simulation::new(s.clone()).map_err(|e| format!("one offline: {e}"))?;
    let r = sim.run().map_err(|e| e.to_string())?;
    ensure(r.bootstrap.participants == vec![0, 1, 2], || format!("participants {:?}", r.bootstrap.participants))?;
    ensure(r.all_completed(), || "workload failed with one node offline".into())?;
    s.relay.offline = [2, 3].into();
    match Simulation::new(s) {
        Err(SimError::Bootstrap(e)) => Ok(format!("one offline: 3 participants, workload completed; two offline: {e}")),
        Err(e) => Err(format!("two offline failed for another reason: {e}")),
        Ok(_) => Err("two offline bootstrapped".into()),
    }
}

fn main() {
    let dir = tempfile::tempdir().expect("temp dir");
    let criteria: Vec<(&str, Box<dyn Fn() -> Check>)> = vec![
        ("vss-correctness", Box::new(vss_correctness)),
        ("key-exchange", Box::new(key_exchange)),
        ("codec", Box::new(codec)),
        ("acl-oracle", Box::new(acl_oracle)),
        ("security-suite", Box::new(security_suite)),
        ("end-to-end", Box::new(|| end_to_end(dir.path()))),
        ("accountability", Box::new(|| accountability(dir.path()))),
        ("batching-shape", Box::new(batching_shape)),
        ("bootstrap-threshold", Box::new(bootstrap_threshold)),
    ];
    let mut failed = 0;
    for (i, (name, check)) in criteria.iter().enumerate() {
        let started = Instant::now();
        let result = catch_unwind(AssertUnwindSafe(check)).unwrap_or_else(|_| Err("panicked".into()));
        let secs = started.elapsed().as_secs_f64();
        match result {
            Ok(detail) => println!("PASS  {}. {name}: {detail} ({secs:.1} s)", i + 1),
            Err(why) => {
                failed += 1;
                println!("FAIL  {}. {name}: {why} ({secs:.1} s)", i + 1);
            }
        }
    }
    println!("{}/{} criteria passed", criteria.len() - failed, criteria.len());
    if failed > 0 {
        std::process::exit(1);
    }
}
