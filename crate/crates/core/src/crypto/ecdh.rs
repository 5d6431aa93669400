//! Elliptic-curve Diffie-Hellman over secp256k1 with an HKDF-SHA256 key derivation.

use std::fmt;

use hkdf::Hkdf;
use k256::elliptic_curve::sec1::ToEncodedPoint;
use k256::elliptic_curve::PrimeField;
use k256::{NonZeroScalar, ProjectivePoint, Scalar};
use rand::RngCore;
use sha2::Sha256;

use super::CryptoError;

const KDF_SALT: &[u8] = b"ccrelay/communication-key/v1";
const KDF_INFO: &[u8] = b"aes-256-gcm";

/// Identifies the curve and exposes its public constants.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct CurveParams {
    name: &'static str,
}

impl CurveParams {
    pub fn secp256k1() -> Self {
        Self { name: "secp256k1" }
    }

    pub fn name(&self) -> &'static str {
        self.name
    }

    /// Group order `N`, big-endian.
    pub fn order(&self) -> [u8; 32] {
        hex_literal(ORDER_HEX)
    }

    pub fn base_point(&self) -> CurvePoint {
        CurvePoint(k256::AffinePoint::GENERATOR)
    }
}

const ORDER_HEX: &str = "fffffffffffffffffffffffffffffffebaaedce6af48a03bbfd25e8cd0364141";

fn hex_literal(s: &str) -> [u8; 32] {
    let mut out = [0u8; 32];
    hex::decode_to_slice(s, &mut out).expect("static hex");
    out
}

/// A point on the curve other than the point at infinity.
#[derive(Clone, Copy, PartialEq, Eq)]
pub struct CurvePoint(k256::AffinePoint);

impl CurvePoint {
    /// Parses a SEC1 encoding (33-byte compressed or 65-byte uncompressed).
    ///
    /// Rejects the identity encoding and any coordinates that do not satisfy
    /// the curve equation, which defeats invalid-curve attacks.
    pub fn from_sec1(bytes: &[u8]) -> Result<Self, CryptoError> {
        match bytes {
            [0x00] => return Err(CryptoError::PointAtInfinity),
            [0x02 | 0x03, rest @ ..] if rest.len() == 32 => {}
            [0x04, rest @ ..] if rest.len() == 64 => {}
            _ => return Err(CryptoError::Encoding("sec1 point")),
        }
        let pk = k256::PublicKey::from_sec1_bytes(bytes).map_err(|_| CryptoError::PointOffCurve)?;
        Ok(Self(*pk.as_affine()))
    }

    pub fn to_bytes(&self) -> [u8; 33] {
        let enc = self.0.to_encoded_point(true);
        enc.as_bytes().try_into().expect("compressed point is 33 bytes")
    }

    pub fn x_coordinate(&self) -> [u8; 32] {
        let enc = self.0.to_encoded_point(false);
        (*enc.x().expect("not identity")).into()
    }

    pub fn negate(&self) -> Self {
        Self((-ProjectivePoint::from(self.0)).to_affine())
    }

    /// Group addition; `None` when the sum is the point at infinity.
    pub fn add(&self, other: &Self) -> Option<Self> {
        Self::from_projective(ProjectivePoint::from(self.0) + ProjectivePoint::from(other.0))
    }

    pub fn mul(&self, scalar: &EcScalar) -> Option<Self> {
        Self::from_projective(ProjectivePoint::from(self.0) * *scalar.0)
    }

    fn from_projective(p: ProjectivePoint) -> Option<Self> {
        if p == ProjectivePoint::IDENTITY {
            None
        } else {
            Some(Self(p.to_affine()))
        }
    }
}

impl fmt::Debug for CurvePoint {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "CurvePoint({})", hex::encode(self.to_bytes()))
    }
}

/// A scalar in `[1, N)`.
#[derive(Clone, Copy)]
pub struct EcScalar(NonZeroScalar);

impl PartialEq for EcScalar {
    fn eq(&self, other: &Self) -> bool {
        self.to_be_bytes() == other.to_be_bytes()
    }
}

impl Eq for EcScalar {}

impl EcScalar {
    /// Big-endian bytes of at most 32 bytes, left-padded. Rejects `0` and values `>= N`.
    pub fn from_be_bytes(bytes: &[u8]) -> Result<Self, CryptoError> {
        if bytes.len() > 32 {
            return Err(CryptoError::ScalarOutOfRange);
        }
        let mut repr = [0u8; 32];
        repr[32 - bytes.len()..].copy_from_slice(bytes);
        let scalar: Option<Scalar> = Scalar::from_repr(repr.into()).into();
        let scalar = scalar.ok_or(CryptoError::ScalarOutOfRange)?;
        let nz: Option<NonZeroScalar> = NonZeroScalar::new(scalar).into();
        nz.map(Self).ok_or(CryptoError::ScalarOutOfRange)
    }

    /// Uniform nonzero scalar by rejection sampling.
    pub fn random<R: RngCore + ?Sized>(rng: &mut R) -> Self {
        loop {
            let mut buf = [0u8; 32];
            rng.fill_bytes(&mut buf);
            if let Ok(s) = Self::from_be_bytes(&buf) {
                return s;
            }
        }
    }

    pub fn to_be_bytes(&self) -> [u8; 32] {
        self.0.to_repr().into()
    }

    pub(crate) fn as_nonzero(&self) -> &NonZeroScalar {
        &self.0
    }
}

impl fmt::Debug for EcScalar {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str("EcScalar(..)")
    }
}

/// One side's contribution to the exchange: `A = s*G` or `B = b*G`.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct KeyExchangeMessage {
    pub point: CurvePoint,
}

impl KeyExchangeMessage {
    pub fn from_bytes(bytes: &[u8]) -> Result<Self, CryptoError> {
        CurvePoint::from_sec1(bytes).map(|point| Self { point })
    }

    pub fn to_bytes(&self) -> [u8; 33] {
        self.point.to_bytes()
    }
}

/// Symmetric key shared by a router and every relay enclave.
#[derive(Clone, PartialEq, Eq)]
pub struct CommunicationKey([u8; 32]);

impl CommunicationKey {
    pub fn from_bytes(bytes: [u8; 32]) -> Self {
        Self(bytes)
    }

    pub fn as_bytes(&self) -> &[u8; 32] {
        &self.0
    }
}

impl fmt::Debug for CommunicationKey {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str("CommunicationKey(..)")
    }
}

/// Returns `secret * G`.
pub fn ecdh_respond(params: &CurveParams, secret: &EcScalar) -> KeyExchangeMessage {
    let point = params.base_point().mul(secret).expect("nonzero scalar on prime-order curve");
    KeyExchangeMessage { point }
}

/// Derives the communication key from `my_scalar * their_point`.
///
/// `ecdh_derive(b, s*G) == ecdh_derive(s, b*G)`.
pub fn ecdh_derive(
    params: &CurveParams,
    my_scalar: &EcScalar,
    their: &KeyExchangeMessage,
) -> Result<CommunicationKey, CryptoError> {
    debug_assert_eq!(params.name(), "secp256k1");
    let shared = their.point.mul(my_scalar).ok_or(CryptoError::PointAtInfinity)?;
    Ok(kdf(&shared.x_coordinate()))
}

/// Parses the peer's encoded point, then derives. Off-curve and identity encodings fail.
pub fn ecdh_derive_from_bytes(
    params: &CurveParams,
    my_scalar: &EcScalar,
    their_point: &[u8],
) -> Result<CommunicationKey, CryptoError> {
    let their = KeyExchangeMessage::from_bytes(their_point)?;
    ecdh_derive(params, my_scalar, &their)
}

pub(crate) fn kdf(shared_x: &[u8; 32]) -> CommunicationKey {
    let hk = Hkdf::<Sha256>::new(Some(KDF_SALT), shared_x);
    let mut okm = [0u8; 32];
    hk.expand(KDF_INFO, &mut okm).expect("32 bytes is a valid HKDF length");
    CommunicationKey(okm)
}
