"""Independent encoder for the transaction wire format.

Writes wire_golden.json: fixed transactions with their expected encoding and
SHA-256. Written from the format description, not from the Rust codec.
"""
import hashlib
import json
import struct
from pathlib import Path

G1 = bytes.fromhex("0279be667ef9dcbbac55a06295ce870b07029bfcdb2dce28d959f2815b16f81798")
G2 = bytes.fromhex("02c6047f9441ed7d6d3045406e95c07cd85c778e4b8cef3ca7abac09b95c709ee5")
G3 = bytes.fromhex("02f9308a019258c31049344f85f89d5229b531c845836f99b08601f113bce036f9")

u8 = lambda v: struct.pack(">B", v)
u16 = lambda v: struct.pack(">H", v)
u32 = lambda v: struct.pack(">I", v)
u64 = lambda v: struct.pack(">Q", v)
lp = lambda b: u32(len(b)) + b
s = lambda t: lp(t.encode())


def header(src, dst, ty, seq, ts1, router):
    return u8(1) + u32(src) + u32(dst) + u8(ty) + u64(seq) + u64(ts1) + router


def rule(resource, auth, contract, path, op, users):
    out = u32(resource)
    out += u8(0) if auth is None else u8(1) + u32(auth)
    out += u8(0) if contract is None else u8(1) + s(contract)
    if path == "*":
        out += u8(0)
    elif path.endswith("/*"):
        out += u8(2) + s(path[:-1])
    else:
        out += u8(1) + s(path)
    out += u8({None: 0, "read": 1, "write": 2, "invoke": 3}[op])
    out += u32(len(users)) + b"".join(users)
    return out


def registration():
    sig = bytes(range(64))
    rules = [
        rule(2, 1, "kv", "price", "read", [G3]),
        rule(2, None, None, "balances/*", None, []),
        rule(2, 7, "vault", "*", "invoke", [G1, G2]),
    ]
    body = G2 + bytes([10, 1, 0, 2]) + u16(7000) + u32(len(rules)) + b"".join(rules)
    return header(2, 0, 0, 0, 1_700_000_000_000, G1) + sig + lp(body)


def request():
    sig = bytes(255 - i for i in range(64))
    nonce = bytes(range(100, 112))
    ciphertext = bytes((i * 7) % 256 for i in range(45))
    return header(1, 2, 1, 42, 1_700_000_000_123, G3) + sig + nonce + lp(ciphertext)


def main():
    cases = {"registration": registration(), "request": request()}
    doc = {
        name: {"hex": raw.hex(), "sha256": hashlib.sha256(raw).hexdigest()}
        for name, raw in cases.items()
    }
    out = Path(__file__).with_name("wire_golden.json")
    out.write_text(json.dumps(doc, indent=2) + "\n")


if __name__ == "__main__":
    main()
