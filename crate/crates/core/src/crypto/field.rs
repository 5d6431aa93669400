//! Prime-order subgroup parameters `(p, q, g)` for Feldman commitments.

use num_bigint::BigUint;
use num_traits::Num;

use super::scalar::{byte_width, is_probable_prime, ModScalar};
use super::CryptoError;

/// A multiplicative group `Z_p^*` together with its order-`q` subgroup generated by `g`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct FieldParams<T> {
    p: T,
    q: T,
    g: T,
}

impl<T: ModScalar> FieldParams<T> {
    /// Validates and builds parameters.
    ///
    /// Requires `p` and `q` prime, `q | p - 1`, `g^q = 1 (mod p)` and `g != 1`,
    /// so that `g` has exact order `q`.
    pub fn new(p: T, q: T, g: T) -> Result<Self, CryptoError> {
        let one = T::one();
        if !is_probable_prime(&p) || !is_probable_prime(&q) {
            return Err(CryptoError::InvalidParams("p and q must be prime"));
        }
        let p_minus_1 = p.checked_sub(&one).expect("p >= 2");
        if !p_minus_1.div_rem(&q).1.is_zero() {
            return Err(CryptoError::InvalidParams("q must divide p - 1"));
        }
        if g >= p || g.is_zero() {
            return Err(CryptoError::InvalidParams("g must lie in Z_p^*"));
        }
        if g == one || g.pow_mod(&q, &p) != one {
            return Err(CryptoError::InvalidParams("g must generate the order-q subgroup"));
        }
        Ok(Self { p, q, g })
    }

    pub fn p(&self) -> &T {
        &self.p
    }

    pub fn q(&self) -> &T {
        &self.q
    }

    pub fn g(&self) -> &T {
        &self.g
    }

    /// Fixed width of an encoded exponent (element of `Z_q`).
    pub fn scalar_width(&self) -> usize {
        byte_width(&self.q)
    }

    /// Fixed width of an encoded group element (element of `Z_p`).
    pub fn element_width(&self) -> usize {
        byte_width(&self.p)
    }

    /// `g^e mod p`.
    pub fn commit(&self, exponent: &T) -> T {
        self.g.pow_mod(exponent, &self.p)
    }

    /// True when `x` is a member of the order-`q` subgroup.
    pub fn in_subgroup(&self, x: &T) -> bool {
        !x.is_zero() && *x < self.p && x.pow_mod(&self.q, &self.p) == T::one()
    }

    /// Multiplicative inverse in `Z_q` by Fermat's little theorem.
    pub fn inv_scalar(&self, a: &T) -> Option<T> {
        let a = a.reduce(&self.q);
        if a.is_zero() {
            return None;
        }
        let exp = self.q.checked_sub(&T::from_u64(2)).expect("q >= 2");
        Some(a.pow_mod(&exp, &self.q))
    }

    pub fn encode_scalar(&self, x: &T) -> Vec<u8> {
        x.to_be_bytes_padded(self.scalar_width())
    }

    /// Decodes a fixed-width scalar; rejects wrong widths and values `>= q`.
    pub fn decode_scalar(&self, bytes: &[u8]) -> Result<T, CryptoError> {
        if bytes.len() != self.scalar_width() {
            return Err(CryptoError::Encoding("scalar width"));
        }
        let v = T::from_be_bytes(bytes).ok_or(CryptoError::Encoding("scalar overflow"))?;
        if v >= self.q {
            return Err(CryptoError::Encoding("scalar not reduced"));
        }
        Ok(v)
    }
}

impl FieldParams<u64> {
    /// `(p = 23, q = 11, g = 4)`: small enough to enumerate by hand.
    pub fn toy() -> Self {
        Self::new(23, 11, 4).expect("toy parameters are valid")
    }
}

const PRODUCTION_P: &str = "91dceeae5e40fafb6d36aa1ccada307beb0bdc483b220c74d0cdb8ad33a79cb1\
e44481c6eafa0d64091b4977bd4c493a8ee038e70872240f76c11f8f5d972eb8\
bf5e1faa3e169e99d2dae243b1bb4dc9ac092de06a213fda4c7389e943871ce3\
27d6e683898eac68a124e788cd25b044f82b99b8a5b8b65bec07c0bdfe1e6f75";
const PRODUCTION_Q: &str = "bfdb0119278a7063045b8868fafcb1b905ebd9015d5bd015b177c254a9678c09";
const PRODUCTION_G: &str = "341974fab1fba87c813ad48db77478ecabad789813c8d0cf6cfc29844673c40f\
4c0e3d590f7d0be7ca0989eacb3cb2a30b8e099edc431c11b03f0faba7c90bab\
c4bbfe1f30de5fd9812b22e15b8cbb587600c3eccb242c8d00acaa5c6448607c\
364fb46073f98f423db369838e9ef220f2687c2ff748bca4d19964f3c2a9f44e";

impl FieldParams<BigUint> {
    /// DSA-style parameters: 1024-bit `p`, 256-bit `q`.
    ///
    /// `q` is chosen below the secp256k1 group order, so every nonzero secret
    /// in `Z_q` is also a valid curve scalar.
    pub fn production() -> Self {
        let parse = |s: &str| BigUint::from_str_radix(s, 16).expect("static hex");
        Self::new(parse(PRODUCTION_P), parse(PRODUCTION_Q), parse(PRODUCTION_G))
            .expect("production parameters are valid")
    }

    /// Lifts small parameters into the arbitrary-precision representation.
    pub fn from_small(small: &FieldParams<u64>) -> Self {
        Self {
            p: BigUint::from(small.p),
            q: BigUint::from(small.q),
            g: BigUint::from(small.g),
        }
    }
}
