use std::net::{Ipv4Addr, SocketAddrV4};

use super::*;
use crate::acl::parse_rules;
use crate::ccip::{
    seal_payload, tx_hash, Call, CcipHeader, CrossChainPayload, CrossChainTransaction, PayloadEnvelope, TxType,
};
use crate::crypto::{
    aead_encrypt, ecdh_derive, ecdh_respond, CommunicationKey, CurveParams, EcScalar, FieldParams, Hash32,
    KeyExchangeMessage, Nonce, Signature, SigningKeypair,
};

fn authority() -> AttestationAuthority {
    AttestationAuthority::from_seed(b"authority")
}

fn launch(node: u32, platform: &Platform, build: &str, store: BlobStore) -> EnclaveInstance {
    let config = EnclaveConfig { build_id: build.into(), signer: "release".into() };
    EnclaveInstance::launch(node, platform.clone(), &config, authority(), store, 100 + u64::from(node)).unwrap()
}

/// Runs a full bootstrap among `enclaves` on the toy field.
fn bootstrap_all(enclaves: &mut [EnclaveInstance]) {
    let params = FieldParams::<u64>::toy();
    let offers: Vec<ChannelOffer> = enclaves.iter_mut().map(|e| e.channel_offer()).collect();
    let commitments = enclaves[0].deal_secret(&params, enclaves.len()).unwrap();
    for i in 1..enclaves.len() {
        let env = enclaves[0].seal_share_for(&params, &offers[i], ShareFault::None).unwrap();
        enclaves[i].accept_share(&params, &env, &offers[0], &commitments).unwrap();
    }
    for i in 1..enclaves.len() {
        for j in 0..enclaves.len() {
            if i != j {
                let env = enclaves[i].export_share_for(&offers[j]).unwrap();
                enclaves[j].accept_share(&params, &env, &offers[i], &commitments).unwrap();
            }
        }
    }
    for e in enclaves.iter_mut() {
        e.recover_secret(&params, &commitments).unwrap();
    }
}

struct RouterSide {
    keypair: SigningKeypair,
    key: CommunicationKey,
    chain: u32,
}

fn register_router(enclaves: &mut [EnclaveInstance], chain: u32, seed: &[u8]) -> RouterSide {
    let keypair = SigningKeypair::from_seed(seed);
    let offer = enclaves[0].key_offer().unwrap();
    assert!(verify_quote(
        &offer.quote,
        &authority().public_key(),
        &enclaves[0].measurement(),
        &KeyOffer::expected_report_data(&offer.point)
    ));
    let b = EcScalar::from_be_bytes(crate::crypto::sha256(seed).as_bytes()).unwrap();
    let big_b = ecdh_respond(&CurveParams::secp256k1(), &b);
    let key = ecdh_derive(&CurveParams::secp256k1(), &b, &offer.point).unwrap();
    let addr = SocketAddrV4::new(Ipv4Addr::new(10, 0, 0, chain as u8), 7000);
    for e in enclaves.iter_mut() {
        let ack = e.enclave_keyexchange(&big_b, keypair.public_key(), chain, addr).unwrap();
        assert_eq!(ack.key_fingerprint, key_fingerprint(&key));
    }
    RouterSide { keypair, key, chain }
}

fn request_tx(router: &RouterSide, user: &SigningKeypair, dst: u32, function: &str, path: &str, seq: u64) -> (CrossChainTransaction, CrossChainPayload) {
    let mut payload = CrossChainPayload {
        src_contract: "app".into(),
        dst_contract: "kv".into(),
        timestamp2: 1_000,
        originator_public_key: user.public_key(),
        originator_signature: Signature::EMPTY,
        session_hash: Hash32::ZERO,
        timeout: 10_000,
        input: Call::new(function, vec![path.as_bytes().to_vec()]),
        callback: Some(Call::new("on_result", vec![])),
        extra: vec![],
    };
    payload.sign_originator(user);
    let header = CcipHeader {
        src_chain: router.chain,
        dst_chain: dst,
        tx_type: TxType::Request,
        seq_num: seq,
        timestamp1: 1_001,
        router_public_key: router.keypair.public_key(),
        signature: Signature::EMPTY,
    };
    let sealed = seal_payload(&router.key, Nonce([seq as u8; 12]), &header, &payload);
    let mut tx = CrossChainTransaction { header, payload: PayloadEnvelope::Sealed(sealed) };
    tx.sign(&router.keypair);
    (tx, payload)
}

struct World {
    enclaves: Vec<EnclaveInstance>,
    src: RouterSide,
    dst: RouterSide,
    user: SigningKeypair,
}

fn world() -> World {
    let mut enclaves: Vec<_> = (0..3)
        .map(|i| launch(i, &Platform::from_seed(&[i as u8]), "relay", BlobStore::in_memory()))
        .collect();
    bootstrap_all(&mut enclaves);
    let src = register_router(&mut enclaves, 1, b"router-1");
    let dst = register_router(&mut enclaves, 2, b"router-2");
    let user = SigningKeypair::from_seed(b"user");
    let rules = parse_rules(&format!("2|1|kv|price|read|{}", user.public_key().to_hex())).unwrap();
    for e in enclaves.iter_mut() {
        e.register_acl(2, rules.clone()).unwrap();
    }
    World { enclaves, src, dst, user }
}

#[test]
fn seal_policy_matrix() {
    let platform = Platform::from_seed(b"cpu");
    let mut a = launch(0, &platform, "build-a", BlobStore::in_memory());
    let b_same = launch(1, &platform, "build-a", BlobStore::in_memory());
    let b_sibling = launch(2, &platform, "build-b", BlobStore::in_memory());
    let other_cpu = launch(3, &Platform::from_seed(b"other"), "build-a", BlobStore::in_memory());

    let by_enclave = a.seal(SealPolicy::EnclaveIdentity, b"x");
    let by_signer = a.seal(SealPolicy::SigningIdentity, b"y");
    assert_eq!(a.unseal(&by_enclave).unwrap(), b"x");
    assert_eq!(b_same.unseal(&by_enclave).unwrap(), b"x");
    assert_eq!(b_sibling.unseal(&by_enclave).unwrap_err(), EnclaveError::UnsealFailed);
    assert_eq!(b_sibling.unseal(&by_signer).unwrap(), b"y");
    assert!(other_cpu.unseal(&by_enclave).is_err());
    assert!(other_cpu.unseal(&by_signer).is_err());

    let mut tampered = by_signer.clone();
    tampered.ciphertext[0] ^= 1;
    assert!(a.unseal(&tampered).is_err());
    let mut flipped = by_enclave.clone();
    flipped.policy = SealPolicy::SigningIdentity;
    assert!(a.unseal(&flipped).is_err());
}

#[test]
fn internal_blobs_are_not_publicly_unsealable() {
    let store = BlobStore::in_memory();
    let mut e = vec![launch(0, &Platform::from_seed(b"p"), "relay", store.clone())];
    bootstrap_all(&mut e);
    let raw = store.raw("relay-secret").unwrap();
    let blob = SealedBlob::from_bytes(&raw).unwrap();
    assert_eq!(e[0].unseal(&blob).unwrap_err(), EnclaveError::UnsealFailed);
    assert!(!raw.windows(32).any(|w| Some(w) == e[0].introspect_secret().as_ref().map(|s| &s[..])));
}

#[test]
fn key_exchange_probe_and_restart() {
    let platform = Platform::from_seed(b"p");
    let store = BlobStore::in_memory();
    let mut e = vec![launch(0, &platform, "relay", store.clone())];
    bootstrap_all(&mut e);
    let router = register_router(&mut e, 4, b"router");
    let ct = aead_encrypt(&router.key, &Nonce([1; 12]), b"probe", b"ad");
    assert!(e[0].probe(&router.keypair.public_key(), &Nonce([1; 12]), &ct, b"ad"));
    let a_before = e[0].public_point();
    assert_eq!(e[0].boot_epoch(), 0);

    let restarted = launch(0, &platform, "relay", store.clone());
    assert_eq!(restarted.boot_epoch(), 1);
    assert_eq!(restarted.public_point(), a_before);
    assert!(restarted.probe(&router.keypair.public_key(), &Nonce([1; 12]), &ct, b"ad"));

    // A different build on the same platform cannot restore the state.
    let config = EnclaveConfig { build_id: "evil".into(), signer: "release".into() };
    let err = EnclaveInstance::launch(0, platform, &config, authority(), store, 1).err().unwrap();
    assert_eq!(err, EnclaveError::UnsealFailed);
}

#[test]
fn off_curve_router_point_rejected() {
    let mut e = vec![launch(0, &Platform::from_seed(b"p"), "relay", BlobStore::in_memory())];
    bootstrap_all(&mut e);
    let mut bad = [0u8; 33];
    bad[0] = 0x02;
    bad[32] = 5;
    let pk = SigningKeypair::from_seed(b"r").public_key();
    let addr = SocketAddrV4::new(Ipv4Addr::LOCALHOST, 1);
    assert!(matches!(e[0].enclave_keyexchange_bytes(&bad, pk, 1, addr), Err(EnclaveError::Crypto(_))));
    assert!(!e[0].has_router(&pk));
}

#[test]
fn key_offer_requires_secret() {
    let e = launch(0, &Platform::from_seed(b"p"), "relay", BlobStore::in_memory());
    assert_eq!(e.key_offer().unwrap_err(), EnclaveError::NoSecret);
}

#[test]
fn bootstrap_gives_every_enclave_the_same_secret() {
    let w = world();
    let a = w.enclaves[0].public_point().unwrap();
    assert!(w.enclaves.iter().all(|e| e.public_point() == Some(a)));
    let s = w.enclaves[0].introspect_secret().unwrap();
    assert!(w.enclaves.iter().all(|e| e.introspect_secret() == Some(s)));
}

#[test]
fn corrupted_share_names_the_dealer() {
    let params = FieldParams::<u64>::toy();
    let mut es: Vec<_> = (0..3)
        .map(|i| launch(i, &Platform::from_seed(&[i as u8]), "relay", BlobStore::in_memory()))
        .collect();
    let offers: Vec<_> = es.iter_mut().map(|e| e.channel_offer()).collect();
    let commitments = es[0].deal_secret(&params, 3).unwrap();
    let env = es[0].seal_share_for(&params, &offers[1], ShareFault::Corrupt).unwrap();
    assert_eq!(
        es[1].accept_share(&params, &env, &offers[0], &commitments).unwrap_err(),
        EnclaveError::ShareVerification { from: 0 }
    );
}

#[test]
fn unattested_peer_gets_no_share() {
    let params = FieldParams::<u64>::toy();
    let mut dealer = launch(0, &Platform::from_seed(b"a"), "relay", BlobStore::in_memory());
    let mut rogue = launch(1, &Platform::from_seed(b"b"), "rogue-build", BlobStore::in_memory());
    let rogue_offer = rogue.channel_offer();
    dealer.channel_offer();
    dealer.deal_secret(&params, 2).unwrap();
    assert_eq!(
        dealer.seal_share_for(&params, &rogue_offer, ShareFault::None).unwrap_err(),
        EnclaveError::AttestationFailed { node: 1 }
    );
}

#[test]
fn unpack_verify_reencrypt() {
    let mut w = world();
    let (tx, payload) = request_tx(&w.src, &w.user, 2, "read", "price", 1);
    let e = &mut w.enclaves[0];
    let h = e.enclave_unpack(&tx).unwrap();
    assert_eq!(e.introspect_payload(h).unwrap(), payload);
    assert_eq!(
        e.enclave_verify(h, 2_000).unwrap(),
        Verification::Verified(VerifiedKind::Request { timeout: 10_000, expects_response: true })
    );
    let env = e.enclave_reencrypt(h, &w.dst.keypair.public_key()).unwrap();
    assert_eq!(env.open(&w.dst.key).unwrap(), payload);
    assert!(env.open(&w.src.key).is_err());
    assert_ne!(env.ciphertext, tx.sealed().unwrap().ciphertext);
    assert_eq!(env.request_hash, tx_hash(&tx));
    assert_eq!(e.enclave_verify(h, 2_000).unwrap_err(), EnclaveError::StaleHandle);
    assert_eq!(e.open_handles(), 0);
}

#[test]
fn verify_denials() {
    let mut w = world();
    let e = &mut w.enclaves[1];

    let (tx, _) = request_tx(&w.src, &w.user, 2, "write", "price", 1);
    let h = e.enclave_unpack(&tx).unwrap();
    assert_eq!(e.enclave_verify(h, 2_000).unwrap(), Verification::Denied(DenyReason::AccessDenied));
    assert_eq!(e.enclave_reencrypt(h, &w.dst.keypair.public_key()).unwrap_err(), EnclaveError::NotVerified);

    let (tx, _) = request_tx(&w.src, &w.user, 2, "read", "price", 2);
    let h = e.enclave_unpack(&tx).unwrap();
    assert_eq!(e.enclave_verify(h, 11_001).unwrap(), Verification::Denied(DenyReason::Expired));

    let mallory = SigningKeypair::from_seed(b"mallory");
    let (tx, _) = request_tx(&w.src, &mallory, 2, "read", "price", 3);
    let h = e.enclave_unpack(&tx).unwrap();
    assert_eq!(e.enclave_verify(h, 2_000).unwrap(), Verification::Denied(DenyReason::AccessDenied));

    // Claims to be the authorized user but carries mallory's signature.
    let mut forged = CrossChainPayload { ..request_tx(&w.src, &w.user, 2, "read", "price", 4).1 };
    forged.originator_signature = mallory.sign(&forged.originator_signing_bytes());
    let mut tx = request_tx(&w.src, &w.user, 2, "read", "price", 4).0;
    tx.payload = PayloadEnvelope::Sealed(seal_payload(&w.src.key, Nonce([9; 12]), &tx.header, &forged));
    tx.sign(&w.src.keypair);
    let h = e.enclave_unpack(&tx).unwrap();
    assert_eq!(e.enclave_verify(h, 2_000).unwrap(), Verification::Denied(DenyReason::BadOriginatorSignature));

    let mut knobs = crate::SecurityKnobs::default();
    knobs.skip_originator_signature = true;
    e.set_knobs(knobs);
    let h = e.enclave_unpack(&tx).unwrap();
    assert!(matches!(e.enclave_verify(h, 2_000).unwrap(), Verification::Verified(_)));
}

#[test]
fn unpack_errors() {
    let mut w = world();
    let stranger = RouterSide { keypair: SigningKeypair::from_seed(b"stranger"), key: w.src.key.clone(), chain: 1 };
    let (tx, _) = request_tx(&stranger, &w.user, 2, "read", "price", 1);
    assert_eq!(w.enclaves[0].enclave_unpack(&tx).unwrap_err(), UnpackError::UnknownRouter);

    let (mut tx, _) = request_tx(&w.src, &w.user, 2, "read", "price", 1);
    if let PayloadEnvelope::Sealed(s) = &mut tx.payload {
        s.ciphertext[3] ^= 1;
    }
    assert_eq!(w.enclaves[0].enclave_unpack(&tx).unwrap_err(), UnpackError::BadRouterSignature);
    tx.sign(&w.src.keypair);
    assert_eq!(w.enclaves[0].enclave_unpack(&tx).unwrap_err(), UnpackError::Aead);

    let (mut tx, _) = request_tx(&w.src, &w.user, 2, "read", "price", 1);
    tx.header.src_chain = 2;
    tx.sign(&w.src.keypair);
    assert_eq!(w.enclaves[0].enclave_unpack(&tx).unwrap_err(), UnpackError::RouterChainMismatch);

    let (tx, _) = request_tx(&w.src, &w.user, 2, "read", "price", 1);
    assert_eq!(w.enclaves[0].precheck(&tx, 11_001), Err(UnpackError::Expired));
    assert_eq!(w.enclaves[0].precheck(&tx, 11_000), Ok(()));
    assert_eq!(w.enclaves[0].open_handles(), 0);
}

fn response_tx(w: &World, request: &CrossChainTransaction, function: &str) -> CrossChainTransaction {
    let mut payload = CrossChainPayload {
        src_contract: "kv".into(),
        dst_contract: "app".into(),
        timestamp2: 1_500,
        originator_public_key: w.dst.keypair.public_key(),
        originator_signature: Signature::EMPTY,
        session_hash: tx_hash(request),
        timeout: 10_000,
        input: Call::new(function, vec![vec![0, 42]]),
        callback: None,
        extra: vec![],
    };
    payload.sign_originator(&w.dst.keypair);
    let header = CcipHeader {
        src_chain: 2,
        dst_chain: 1,
        tx_type: TxType::Response,
        seq_num: 1,
        timestamp1: 1_600,
        router_public_key: w.dst.keypair.public_key(),
        signature: Signature::EMPTY,
    };
    let sealed = seal_payload(&w.dst.key, Nonce([7; 12]), &header, &payload);
    let mut tx = CrossChainTransaction { header, payload: PayloadEnvelope::Sealed(sealed) };
    tx.sign(&w.dst.keypair);
    tx
}

#[test]
fn responses_need_a_bound_session() {
    let mut w = world();
    let (req, _) = request_tx(&w.src, &w.user, 2, "read", "price", 1);
    let resp = response_tx(&w, &req, "on_result");

    let h = w.enclaves[0].enclave_unpack(&resp).unwrap();
    assert_eq!(w.enclaves[0].enclave_verify(h, 2_000).unwrap(), Verification::Denied(DenyReason::UnknownSession));

    let h = w.enclaves[0].enclave_unpack(&req).unwrap();
    w.enclaves[0].enclave_verify(h, 2_000).unwrap();
    w.enclaves[0].discard(h);
    let h = w.enclaves[0].enclave_unpack(&resp).unwrap();
    assert_eq!(
        w.enclaves[0].enclave_verify(h, 2_000).unwrap(),
        Verification::Verified(VerifiedKind::Response { session: tx_hash(&req) })
    );
    let env = w.enclaves[0].enclave_reencrypt(h, &w.src.keypair.public_key()).unwrap();
    assert_eq!(env.open(&w.src.key).unwrap().input.args[0], vec![0, 42]);

    // A response into a function other than the named callback is refused.
    let wrong = response_tx(&w, &req, "drain");
    let h = w.enclaves[0].enclave_unpack(&wrong).unwrap();
    assert_eq!(w.enclaves[0].enclave_verify(h, 2_000).unwrap(), Verification::Denied(DenyReason::AccessDenied));

    // Followers learn the binding by absorbing the request.
    w.enclaves[2].absorb_request(&req).unwrap();
    let h = w.enclaves[2].enclave_unpack(&resp).unwrap();
    assert!(matches!(w.enclaves[2].enclave_verify(h, 2_000).unwrap(), Verification::Verified(_)));
}

#[test]
fn forward_nonces_do_not_repeat_across_restart() {
    let platform = Platform::from_seed(b"p");
    let store = BlobStore::in_memory();
    let mut es = vec![launch(0, &platform, "relay", store.clone())];
    bootstrap_all(&mut es);
    let src = register_router(&mut es, 1, b"router-1");
    let dst = register_router(&mut es, 2, b"router-2");
    let user = SigningKeypair::from_seed(b"user");
    es[0].register_acl(2, parse_rules("2|*|*|*|*|*").unwrap()).unwrap();
    let mut nonces = std::collections::BTreeSet::new();
    for round in 0..2 {
        let e = &mut es[0];
        for seq in 0..3 {
            let (tx, _) = request_tx(&src, &user, 2, "read", "k", seq + 10 * round);
            let h = e.enclave_unpack(&tx).unwrap();
            e.enclave_verify(h, 2_000).unwrap();
            let env = e.enclave_reencrypt(h, &dst.keypair.public_key()).unwrap();
            assert!(nonces.insert(env.nonce.0));
        }
        es[0] = launch(0, &platform, "relay", store.clone());
    }
}

#[test]
fn reencrypt_to_unknown_router_fails() {
    let mut w = world();
    let (tx, _) = request_tx(&w.src, &w.user, 2, "read", "price", 1);
    let h = w.enclaves[0].enclave_unpack(&tx).unwrap();
    w.enclaves[0].enclave_verify(h, 2_000).unwrap();
    let nobody = SigningKeypair::from_seed(b"nobody").public_key();
    assert_eq!(w.enclaves[0].enclave_reencrypt(h, &nobody).unwrap_err(), EnclaveError::UnknownRouter);
}

#[test]
fn re_registration_replaces_key() {
    let mut w = world();
    let replaced: KeyExchangeMessage =
        ecdh_respond(&CurveParams::secp256k1(), &EcScalar::from_be_bytes(&[3]).unwrap());
    let pk = w.src.keypair.public_key();
    let addr = SocketAddrV4::new(Ipv4Addr::LOCALHOST, 1);
    w.enclaves[0].enclave_keyexchange(&replaced, pk, 1, addr).unwrap();
    let (tx, _) = request_tx(&w.src, &w.user, 2, "read", "price", 1);
    assert_eq!(w.enclaves[0].enclave_unpack(&tx).unwrap_err(), UnpackError::Aead);
}

/// Enumerates the public enclave surface and checks that no return type can
/// carry key material or plaintext.
#[test]
fn boundary_audit() {
    const ALLOWED: &[&str] = &[
        "Result", "Option", "Self", "bool", "u32", "u64", "usize", "Hash32", "EnclaveError", "UnpackError",
        "UnpackHandle", "Verification", "KeyOffer", "KeyExchangeAck", "AttestationQuote", "SealedBlob",
        "KeyExchangeMessage", "ForwardEnvelope", "ChannelOffer", "ShareEnvelope", "CommitmentVector", "T",
        "TableHandle", "SocketAddrV4", "PublicKey",
    ];
    // Unseal returns the caller's own sealed data; the platform id is public.
    const BYTES_ALLOWED: &[&str] = &["unseal", "platform_id"];
    let mut introspection_seen = false;
    let mut methods = 0;
    for (file, src) in [("instance.rs", include_str!("instance.rs")), ("bootstrap.rs", include_str!("bootstrap.rs"))] {
        let (surface, port) = match src.split_once("#[cfg(any(test, feature = \"introspection\"))]") {
            Some((s, p)) => (s, Some(p)),
            None => (src, None),
        };
        if let Some(port) = port {
            introspection_seen = true;
            assert!(port.contains("introspect_secret"), "{file}: port layout changed");
        }
        for sig in instance_blocks(surface).iter().flat_map(|b| public_fn_signatures(b)) {
            let name = sig.split('(').next().unwrap().trim().trim_start_matches("pub fn ").split('<').next().unwrap();
            let ret = return_type(&sig);
            methods += 1;
            for ident in ret.split(|c: char| !c.is_alphanumeric() && c != '_').filter(|s| !s.is_empty()) {
                let ok = ALLOWED.contains(&ident) || (BYTES_ALLOWED.contains(&name) && (["Vec", "u8"].contains(&ident) || ident.parse::<usize>().is_ok()));
                assert!(ok, "{file}: `{name}` returns `{ret}` ({ident} not allowed across the boundary)");
            }
        }
    }
    assert!(introspection_seen);
    assert!(methods > 20, "audit saw only {methods} methods");
    let manifest = include_str!("../../Cargo.toml");
    let default_line = manifest.lines().find(|l| l.trim_start().starts_with("default")).unwrap_or("default = []");
    assert!(!default_line.contains("introspection"), "introspection must not be a default feature");
}

/// Bodies of `impl EnclaveInstance` blocks (up to the closing brace in column 0).
fn instance_blocks(src: &str) -> Vec<&str> {
    src.match_indices("impl EnclaveInstance {")
        .map(|(pos, _)| {
            let body = &src[pos..];
            &body[..body.find("\n}").unwrap_or(body.len())]
        })
        .collect()
}

fn public_fn_signatures(src: &str) -> Vec<String> {
    let mut out = Vec::new();
    let mut rest = src;
    while let Some(pos) = rest.find("pub fn ") {
        let tail = &rest[pos..];
        let end = tail.find('{').unwrap_or(tail.len());
        out.push(tail[..end].split_whitespace().collect::<Vec<_>>().join(" "));
        rest = &tail[end..];
    }
    out
}

fn return_type(sig: &str) -> String {
    let mut depth = 0i32;
    let bytes: Vec<char> = sig.chars().collect();
    let mut after_params = None;
    for (i, c) in bytes.iter().enumerate() {
        match c {
            '(' => depth += 1,
            ')' => {
                depth -= 1;
                if depth == 0 {
                    after_params = Some(i + 1);
                    break;
                }
            }
            _ => {}
        }
    }
    let tail: String = bytes[after_params.unwrap_or(bytes.len())..].iter().collect();
    match tail.find("->") {
        Some(i) => tail[i + 2..].split(" where ").next().unwrap().trim().to_string(),
        None => String::new(),
    }
}
