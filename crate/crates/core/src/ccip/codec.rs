//! Canonical encoding. Fields appear in protocol order, integers are
//! big-endian and variable-length fields carry a 4-byte length prefix.
//!
//! ```text
//! tx      = version:u8 src:u32 dst:u32 type:u8 seq:u64 ts1:u64 router_pk:33 sig:64 section
//! section = bytes(registration)        (type 0)
//!         | nonce:12 bytes(ciphertext)  (type 1, 2)
//! ```

use std::net::{Ipv4Addr, SocketAddrV4};

use super::wire::{Reader, Writer};
use super::{
    Call, CcipHeader, CodecError, CrossChainPayload, CrossChainTransaction, PayloadEnvelope,
    RegistrationPayload, SealedPayload, TxType, WIRE_VERSION,
};
use crate::acl::{AccessRule, Operation, PathPattern, UserSet, Wildcard};
use crate::crypto::{sha256, Hash32, KeyExchangeMessage, Nonce, PublicKey, Signature};

const PK_LEN: usize = 33;
const SIG_LEN: usize = 64;

pub fn encode(tx: &CrossChainTransaction) -> Vec<u8> {
    let mut w = Writer::new();
    write_header_prefix(&mut w, &tx.header);
    w.raw(tx.header.signature.as_bytes());
    write_section(&mut w, &tx.payload);
    w.into_bytes()
}

pub fn decode(raw: &[u8]) -> Result<CrossChainTransaction, CodecError> {
    let mut r = Reader::new(raw);
    let version = r.u8()?;
    if version != WIRE_VERSION {
        return Err(CodecError::BadVersion(version));
    }
    let src_chain = r.u32()?;
    let dst_chain = r.u32()?;
    let ty = r.u8()?;
    let tx_type = TxType::from_u8(ty).ok_or(CodecError::UnknownType(ty))?;
    let seq_num = r.u64()?;
    let timestamp1 = r.u64()?;
    let router_public_key = read_pk(&mut r, "router public key")?;
    let signature = Signature::from_bytes(r.array()?);
    let payload = match tx_type {
        TxType::Registration => {
            let body = r.bytes()?;
            PayloadEnvelope::Registration(decode_registration(body)?)
        }
        TxType::Request | TxType::Response => {
            let nonce = Nonce(r.array()?);
            let ciphertext = r.bytes()?.to_vec();
            PayloadEnvelope::Sealed(SealedPayload { nonce, ciphertext })
        }
    };
    r.finish()?;
    Ok(CrossChainTransaction {
        header: CcipHeader {
            src_chain,
            dst_chain,
            tx_type,
            seq_num,
            timestamp1,
            router_public_key,
            signature,
        },
        payload,
    })
}

/// SHA-256 of the canonical encoding.
pub fn tx_hash(tx: &CrossChainTransaction) -> Hash32 {
    sha256(&encode(tx))
}

pub(crate) fn router_signing_bytes(tx: &CrossChainTransaction) -> Vec<u8> {
    let mut w = Writer::new();
    write_header_prefix(&mut w, &tx.header);
    write_section(&mut w, &tx.payload);
    w.into_bytes()
}

fn write_header_prefix(w: &mut Writer, h: &CcipHeader) {
    w.u8(WIRE_VERSION)
        .u32(h.src_chain)
        .u32(h.dst_chain)
        .u8(h.tx_type.as_u8())
        .u64(h.seq_num)
        .u64(h.timestamp1)
        .raw(h.router_public_key.as_bytes());
}

fn write_section(w: &mut Writer, payload: &PayloadEnvelope) {
    match payload {
        PayloadEnvelope::Registration(reg) => {
            w.bytes(&encode_registration(reg));
        }
        PayloadEnvelope::Sealed(sealed) => {
            w.raw(&sealed.nonce.0).bytes(&sealed.ciphertext);
        }
    }
}

fn read_pk(r: &mut Reader<'_>, field: &'static str) -> Result<PublicKey, CodecError> {
    let raw: [u8; PK_LEN] = r.array()?;
    PublicKey::from_bytes(&raw).map_err(|_| CodecError::InvalidPoint(field))
}

pub fn encode_registration(reg: &RegistrationPayload) -> Vec<u8> {
    let mut w = Writer::new();
    w.raw(&reg.key_message.to_bytes())
        .raw(&reg.router_addr.ip().octets())
        .u16(reg.router_addr.port())
        .u32(reg.access_control_table.len() as u32);
    for rule in &reg.access_control_table {
        write_rule(&mut w, rule);
    }
    w.into_bytes()
}

pub fn decode_registration(raw: &[u8]) -> Result<RegistrationPayload, CodecError> {
    let mut r = Reader::new(raw);
    let point: [u8; PK_LEN] = r.array()?;
    let key_message =
        KeyExchangeMessage::from_bytes(&point).map_err(|_| CodecError::InvalidPoint("key message"))?;
    let ip = Ipv4Addr::from(r.array::<4>()?);
    let port = r.u16()?;
    // Smallest rule: resource + four one-byte tags + user count.
    let n = r.count(4 + 4 + 4)?;
    let mut rules = Vec::with_capacity(n);
    for _ in 0..n {
        rules.push(read_rule(&mut r)?);
    }
    r.finish()?;
    Ok(RegistrationPayload { key_message, router_addr: SocketAddrV4::new(ip, port), access_control_table: rules })
}

pub fn encode_rule(rule: &AccessRule) -> Vec<u8> {
    let mut w = Writer::new();
    write_rule(&mut w, rule);
    w.into_bytes()
}

pub fn decode_rule(raw: &[u8]) -> Result<AccessRule, CodecError> {
    let mut r = Reader::new(raw);
    let rule = read_rule(&mut r)?;
    r.finish()?;
    Ok(rule)
}

fn write_rule(w: &mut Writer, rule: &AccessRule) {
    w.u32(rule.resource_blockchain);
    match rule.authorized_blockchain {
        Wildcard::Any => w.u8(0),
        Wildcard::Exactly(c) => w.u8(1).u32(c),
    };
    match &rule.contract {
        Wildcard::Any => w.u8(0),
        Wildcard::Exactly(c) => w.u8(1).str(c),
    };
    match &rule.resource_path {
        PathPattern::Any => w.u8(0),
        PathPattern::Exact(p) => w.u8(1).str(p),
        PathPattern::Prefix(p) => w.u8(2).str(p),
    };
    w.u8(match rule.operate {
        Wildcard::Any => 0,
        Wildcard::Exactly(Operation::Read) => 1,
        Wildcard::Exactly(Operation::Write) => 2,
        Wildcard::Exactly(Operation::Invoke) => 3,
    });
    match &rule.user_identity {
        UserSet::Any => {
            w.u32(0);
        }
        UserSet::Keys(keys) => {
            w.u32(keys.len() as u32);
            for k in keys {
                w.raw(k.as_bytes());
            }
        }
    }
}

fn read_rule(r: &mut Reader<'_>) -> Result<AccessRule, CodecError> {
    let resource_blockchain = r.u32()?;
    let authorized_blockchain = match r.u8()? {
        0 => Wildcard::Any,
        1 => Wildcard::Exactly(r.u32()?),
        tag => return Err(CodecError::InvalidTag { field: "authorized chain", tag }),
    };
    let contract = match r.u8()? {
        0 => Wildcard::Any,
        1 => Wildcard::Exactly(r.string()?),
        tag => return Err(CodecError::InvalidTag { field: "contract", tag }),
    };
    let resource_path = match r.u8()? {
        0 => PathPattern::Any,
        1 => PathPattern::Exact(r.string()?),
        2 => {
            let p = r.string()?;
            if !p.ends_with('/') {
                return Err(CodecError::InvalidValue("path prefix must end with '/'"));
            }
            PathPattern::Prefix(p)
        }
        tag => return Err(CodecError::InvalidTag { field: "path", tag }),
    };
    let operate = match r.u8()? {
        0 => Wildcard::Any,
        1 => Wildcard::Exactly(Operation::Read),
        2 => Wildcard::Exactly(Operation::Write),
        3 => Wildcard::Exactly(Operation::Invoke),
        tag => return Err(CodecError::InvalidTag { field: "operation", tag }),
    };
    let n = r.count(PK_LEN)?;
    let user_identity = if n == 0 {
        UserSet::Any
    } else {
        let mut keys = Vec::with_capacity(n);
        for _ in 0..n {
            keys.push(read_pk(r, "user identity")?);
        }
        UserSet::Keys(keys)
    };
    Ok(AccessRule { resource_blockchain, authorized_blockchain, contract, resource_path, operate, user_identity })
}

/// Plaintext of a sealed request or response.
pub fn encode_payload(p: &CrossChainPayload) -> Vec<u8> {
    let mut w = Writer::new();
    w.str(&p.src_contract)
        .str(&p.dst_contract)
        .u64(p.timestamp2)
        .raw(p.originator_public_key.as_bytes())
        .raw(p.originator_signature.as_bytes())
        .raw(p.session_hash.as_bytes())
        .u64(p.timeout);
    write_tail(&mut w, p);
    w.into_bytes()
}

pub fn decode_payload(raw: &[u8]) -> Result<CrossChainPayload, CodecError> {
    let mut r = Reader::new(raw);
    let src_contract = r.string()?;
    let dst_contract = r.string()?;
    let timestamp2 = r.u64()?;
    let originator_public_key = read_pk(&mut r, "originator public key")?;
    let originator_signature = Signature::from_bytes(r.array::<SIG_LEN>()?);
    let session_hash = Hash32(r.array()?);
    let timeout = r.u64()?;
    let input = read_call(&mut r)?;
    let callback = match r.u32()? {
        0 => None,
        1 => Some(read_call(&mut r)?),
        _ => return Err(CodecError::InvalidValue("callback count")),
    };
    let extra = r.bytes()?.to_vec();
    r.finish()?;
    Ok(CrossChainPayload {
        src_contract,
        dst_contract,
        timestamp2,
        originator_public_key,
        originator_signature,
        session_hash,
        timeout,
        input,
        callback,
        extra,
    })
}

pub(crate) fn originator_signing_bytes(p: &CrossChainPayload) -> Vec<u8> {
    let mut w = Writer::new();
    w.str(&p.src_contract)
        .str(&p.dst_contract)
        .u64(p.timestamp2)
        .raw(p.session_hash.as_bytes())
        .u64(p.timeout);
    write_tail(&mut w, p);
    w.into_bytes()
}

fn write_tail(w: &mut Writer, p: &CrossChainPayload) {
    write_call(w, &p.input);
    match &p.callback {
        None => {
            w.u32(0);
        }
        Some(cb) => {
            w.u32(1);
            write_call(w, cb);
        }
    }
    w.bytes(&p.extra);
}

fn write_call(w: &mut Writer, call: &Call) {
    w.str(&call.function).u32(call.args.len() as u32);
    for arg in &call.args {
        w.bytes(arg);
    }
}

fn read_call(r: &mut Reader<'_>) -> Result<Call, CodecError> {
    let function = r.string()?;
    let n = r.count(4)?;
    let mut args = Vec::with_capacity(n);
    for _ in 0..n {
        args.push(r.bytes()?.to_vec());
    }
    Ok(Call { function, args })
}
