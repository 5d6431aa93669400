//! Deterministic ECDSA (RFC 6979) over SHA-256 digests.

use std::fmt;
use std::str::FromStr;

use k256::ecdsa::signature::hazmat::{PrehashSigner, PrehashVerifier};
use k256::ecdsa::{Signature as EcdsaSignature, SigningKey, VerifyingKey};
use rand::RngCore;
use serde::{Deserialize, Deserializer, Serialize, Serializer};

use super::ecdh::EcScalar;
use super::hash::sha256;
use super::CryptoError;

/// 33-byte compressed secp256k1 public key, validated on construction.
#[derive(Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct PublicKey([u8; 33]);

impl PublicKey {
    pub fn from_bytes(bytes: &[u8]) -> Result<Self, CryptoError> {
        let arr: [u8; 33] = bytes.try_into().map_err(|_| CryptoError::Encoding("public key length"))?;
        VerifyingKey::from_sec1_bytes(&arr).map_err(|_| CryptoError::PointOffCurve)?;
        Ok(Self(arr))
    }

    pub fn as_bytes(&self) -> &[u8; 33] {
        &self.0
    }

    pub fn to_hex(&self) -> String {
        hex::encode(self.0)
    }

    /// First four bytes after the parity prefix, for logs.
    pub fn short(&self) -> String {
        hex::encode(&self.0[1..5])
    }
}

impl fmt::Debug for PublicKey {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "PublicKey({})", self.short())
    }
}

impl fmt::Display for PublicKey {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.to_hex())
    }
}

impl FromStr for PublicKey {
    type Err = CryptoError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let bytes = hex::decode(s.trim()).map_err(|_| CryptoError::Encoding("public key hex"))?;
        Self::from_bytes(&bytes)
    }
}

impl Serialize for PublicKey {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        s.serialize_str(&self.to_hex())
    }
}

impl<'de> Deserialize<'de> for PublicKey {
    fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        let s = String::deserialize(d)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

/// 64-byte `r || s` signature.
#[derive(Clone, Copy, PartialEq, Eq)]
pub struct Signature([u8; 64]);

impl Signature {
    pub const EMPTY: Signature = Signature([0u8; 64]);

    pub fn from_bytes(bytes: [u8; 64]) -> Self {
        Self(bytes)
    }

    pub fn as_bytes(&self) -> &[u8; 64] {
        &self.0
    }
}

impl fmt::Debug for Signature {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "Signature({}..)", hex::encode(&self.0[..6]))
    }
}

#[derive(Clone)]
pub struct SigningKeypair {
    signing: SigningKey,
    public: PublicKey,
}

impl SigningKeypair {
    pub fn generate<R: RngCore + ?Sized>(rng: &mut R) -> Self {
        Self::from_scalar(&EcScalar::random(rng))
    }

    /// Deterministic keypair from arbitrary seed material.
    pub fn from_seed(seed: &[u8]) -> Self {
        let mut counter = 0u32;
        loop {
            let mut material = seed.to_vec();
            material.extend_from_slice(&counter.to_be_bytes());
            if let Ok(s) = EcScalar::from_be_bytes(sha256(&material).as_bytes()) {
                return Self::from_scalar(&s);
            }
            counter += 1;
        }
    }

    pub fn from_secret_bytes(bytes: &[u8]) -> Result<Self, CryptoError> {
        Ok(Self::from_scalar(&EcScalar::from_be_bytes(bytes)?))
    }

    fn from_scalar(scalar: &EcScalar) -> Self {
        let signing = SigningKey::from(*scalar.as_nonzero());
        let enc = signing.verifying_key().to_encoded_point(true);
        let public = PublicKey(enc.as_bytes().try_into().expect("33 bytes"));
        Self { signing, public }
    }

    pub fn secret_bytes(&self) -> [u8; 32] {
        self.signing.to_bytes().into()
    }

    pub fn public_key(&self) -> PublicKey {
        self.public
    }

    pub fn sign(&self, message: &[u8]) -> Signature {
        let digest = sha256(message);
        let sig: EcdsaSignature = self
            .signing
            .sign_prehash(digest.as_bytes())
            .expect("32-byte prehash is always accepted");
        Signature(sig.to_bytes().into())
    }
}

impl fmt::Debug for SigningKeypair {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("SigningKeypair").field("public", &self.public).finish_non_exhaustive()
    }
}

/// Malformed keys or signatures verify as `false`.
pub fn verify_sig(public_key: &PublicKey, message: &[u8], signature: &Signature) -> bool {
    let Ok(vk) = VerifyingKey::from_sec1_bytes(public_key.as_bytes()) else {
        return false;
    };
    let Ok(sig) = EcdsaSignature::from_slice(signature.as_bytes()) else {
        return false;
    };
    vk.verify_prehash(sha256(message).as_bytes(), &sig).is_ok()
}

pub fn sign(keypair: &SigningKeypair, message: &[u8]) -> Signature {
    keypair.sign(message)
}
