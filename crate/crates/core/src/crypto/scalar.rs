//! Integer scalars usable as residues modulo a prime.
//!
//! The secret-sharing code is written once against [`ModScalar`] and runs
//! unchanged over machine words (tiny fields for exhaustive tests) and
//! arbitrary-precision integers (256-bit production subgroups).

use std::fmt;

use num_bigint::{BigUint, RandBigInt};
use num_traits::{One, ToPrimitive, Zero};
use rand::RngCore;

/// An unsigned integer type that supports the modular arithmetic needed by
/// prime-order field and group operations.
///
/// All `*_mod` methods assume their operands are already reduced modulo `m`.
pub trait ModScalar: Clone + Eq + Ord + fmt::Debug + Send + Sync + Zero + One + 'static {
    fn from_u64(v: u64) -> Self;

    /// Narrows to `u64` when the value fits.
    fn to_u64(&self) -> Option<u64>;

    fn bits(&self) -> u64;

    fn reduce(&self, m: &Self) -> Self;

    fn add_mod(&self, rhs: &Self, m: &Self) -> Self;

    fn sub_mod(&self, rhs: &Self, m: &Self) -> Self;

    fn mul_mod(&self, rhs: &Self, m: &Self) -> Self;

    /// Plain subtraction; callers guarantee `self >= rhs`.
    fn checked_sub(&self, rhs: &Self) -> Option<Self>;

    /// Exact division, used only for small parameter relations such as `(p - 1) / q`.
    fn div_rem(&self, rhs: &Self) -> (Self, Self);

    /// `self^exp mod m` by square-and-multiply over the exponent bits.
    fn pow_mod(&self, exp: &Self, m: &Self) -> Self {
        let mut result = Self::one().reduce(m);
        let base = self.reduce(m);
        for i in (0..exp.bits()).rev() {
            result = result.mul_mod(&result, m);
            if exp.bit(i) {
                result = result.mul_mod(&base, m);
            }
        }
        result
    }

    fn bit(&self, i: u64) -> bool;

    /// Big-endian bytes left-padded to `width`. Panics if the value does not fit.
    fn to_be_bytes_padded(&self, width: usize) -> Vec<u8>;

    /// Parses big-endian bytes; `None` if the value does not fit the type.
    fn from_be_bytes(bytes: &[u8]) -> Option<Self>;

    /// Uniform sample in `[0, bound)`.
    fn random_below<R: RngCore + ?Sized>(bound: &Self, rng: &mut R) -> Self;
}

/// Byte width needed to hold any residue modulo `m`.
pub fn byte_width<T: ModScalar>(m: &T) -> usize {
    (m.bits() as usize).div_ceil(8).max(1)
}

impl ModScalar for u64 {
    fn from_u64(v: u64) -> Self {
        v
    }

    fn to_u64(&self) -> Option<u64> {
        Some(*self)
    }

    fn bits(&self) -> u64 {
        u64::from(64 - self.leading_zeros())
    }

    fn reduce(&self, m: &Self) -> Self {
        self % m
    }

    fn add_mod(&self, rhs: &Self, m: &Self) -> Self {
        ((u128::from(*self) + u128::from(*rhs)) % u128::from(*m)) as u64
    }

    fn sub_mod(&self, rhs: &Self, m: &Self) -> Self {
        if self >= rhs {
            (self - rhs) % m
        } else {
            match (rhs - self) % m {
                0 => 0,
                d => m - d,
            }
        }
    }

    fn mul_mod(&self, rhs: &Self, m: &Self) -> Self {
        ((u128::from(*self) * u128::from(*rhs)) % u128::from(*m)) as u64
    }

    fn checked_sub(&self, rhs: &Self) -> Option<Self> {
        u64::checked_sub(*self, *rhs)
    }

    fn div_rem(&self, rhs: &Self) -> (Self, Self) {
        (self / rhs, self % rhs)
    }

    fn bit(&self, i: u64) -> bool {
        i < 64 && (self >> i) & 1 == 1
    }

    fn to_be_bytes_padded(&self, width: usize) -> Vec<u8> {
        let raw = self.to_be_bytes();
        let significant = raw.iter().position(|b| *b != 0).unwrap_or(raw.len());
        let digits = &raw[significant..];
        assert!(digits.len() <= width, "value {self} does not fit in {width} bytes");
        let mut out = vec![0u8; width - digits.len()];
        out.extend_from_slice(digits);
        out
    }

    fn from_be_bytes(bytes: &[u8]) -> Option<Self> {
        let significant = bytes.iter().position(|b| *b != 0).unwrap_or(bytes.len());
        let digits = &bytes[significant..];
        if digits.len() > 8 {
            return None;
        }
        let mut buf = [0u8; 8];
        buf[8 - digits.len()..].copy_from_slice(digits);
        Some(u64::from_be_bytes(buf))
    }

    fn random_below<R: RngCore + ?Sized>(bound: &Self, rng: &mut R) -> Self {
        assert!(*bound > 0, "empty sampling range");
        // Rejection sampling on the smallest covering power of two.
        let mask = if bound.bits() == 64 { u64::MAX } else { (1u64 << bound.bits()) - 1 };
        loop {
            let v = rng.next_u64() & mask;
            if v < *bound {
                return v;
            }
        }
    }
}

impl ModScalar for BigUint {
    fn from_u64(v: u64) -> Self {
        BigUint::from(v)
    }

    fn to_u64(&self) -> Option<u64> {
        ToPrimitive::to_u64(self)
    }

    fn bits(&self) -> u64 {
        BigUint::bits(self)
    }

    fn reduce(&self, m: &Self) -> Self {
        self % m
    }

    fn add_mod(&self, rhs: &Self, m: &Self) -> Self {
        (self + rhs) % m
    }

    fn sub_mod(&self, rhs: &Self, m: &Self) -> Self {
        if self >= rhs {
            (self - rhs) % m
        } else {
            (m - ((rhs - self) % m)) % m
        }
    }

    fn mul_mod(&self, rhs: &Self, m: &Self) -> Self {
        (self * rhs) % m
    }

    fn pow_mod(&self, exp: &Self, m: &Self) -> Self {
        self.modpow(exp, m)
    }

    fn checked_sub(&self, rhs: &Self) -> Option<Self> {
        if self >= rhs {
            Some(self - rhs)
        } else {
            None
        }
    }

    fn div_rem(&self, rhs: &Self) -> (Self, Self) {
        (self / rhs, self % rhs)
    }

    fn bit(&self, i: u64) -> bool {
        BigUint::bit(self, i)
    }

    fn to_be_bytes_padded(&self, width: usize) -> Vec<u8> {
        let digits = if self.is_zero() { Vec::new() } else { self.to_bytes_be() };
        assert!(digits.len() <= width, "value does not fit in {width} bytes");
        let mut out = vec![0u8; width - digits.len()];
        out.extend_from_slice(&digits);
        out
    }

    fn from_be_bytes(bytes: &[u8]) -> Option<Self> {
        Some(BigUint::from_bytes_be(bytes))
    }

    fn random_below<R: RngCore + ?Sized>(bound: &Self, rng: &mut R) -> Self {
        assert!(!bound.is_zero(), "empty sampling range");
        let mut adapter = RngAdapter(rng);
        adapter.gen_biguint_below(bound)
    }
}

/// Lets `num-bigint` sample from an unsized `RngCore`.
struct RngAdapter<'a, R: RngCore + ?Sized>(&'a mut R);

impl<R: RngCore + ?Sized> RngCore for RngAdapter<'_, R> {
    fn next_u32(&mut self) -> u32 {
        self.0.next_u32()
    }

    fn next_u64(&mut self) -> u64 {
        self.0.next_u64()
    }

    fn fill_bytes(&mut self, dest: &mut [u8]) {
        self.0.fill_bytes(dest)
    }

    fn try_fill_bytes(&mut self, dest: &mut [u8]) -> Result<(), rand::Error> {
        self.0.try_fill_bytes(dest)
    }
}

/// Miller-Rabin with fixed small-prime bases. Deterministic for 64-bit
/// inputs; for larger inputs a false positive needs a number that is a strong
/// pseudoprime to all twelve bases simultaneously.
pub fn is_probable_prime<T: ModScalar>(n: &T) -> bool {
    const BASES: [u64; 12] = [2, 3, 5, 7, 11, 13, 17, 19, 23, 29, 31, 37];
    let two = T::from_u64(2);
    if *n < two {
        return false;
    }
    for b in BASES {
        let b = T::from_u64(b);
        if *n == b {
            return true;
        }
        if n.reduce(&b).is_zero() {
            return false;
        }
    }
    let one = T::one();
    let n_minus_1 = n.checked_sub(&one).expect("n >= 2");
    let mut d = n_minus_1.clone();
    let mut r = 0u32;
    while !d.bit(0) {
        d = d.div_rem(&two).0;
        r += 1;
    }
    'witness: for b in BASES {
        let mut x = T::from_u64(b).pow_mod(&d, n);
        if x == one || x == n_minus_1 {
            continue;
        }
        for _ in 1..r {
            x = x.mul_mod(&x, n);
            if x == n_minus_1 {
                continue 'witness;
            }
        }
        return false;
    }
    true
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha20Rng;

    #[test]
    fn u64_and_biguint_agree() {
        let mut rng = ChaCha20Rng::seed_from_u64(1);
        let m: u64 = 1_000_000_007;
        for _ in 0..200 {
            let a = u64::random_below(&m, &mut rng);
            let b = u64::random_below(&m, &mut rng);
            let (ba, bb, bm) = (BigUint::from(a), BigUint::from(b), BigUint::from(m));
            assert_eq!(BigUint::from(a.mul_mod(&b, &m)), ba.mul_mod(&bb, &bm));
            assert_eq!(BigUint::from(a.sub_mod(&b, &m)), ba.sub_mod(&bb, &bm));
            assert_eq!(BigUint::from(a.add_mod(&b, &m)), ba.add_mod(&bb, &bm));
            assert_eq!(BigUint::from(a.pow_mod(&b, &m)), ba.pow_mod(&bb, &bm));
        }
    }

    #[test]
    fn primality() {
        let primes: Vec<u64> = (0..200u64).filter(|n| is_probable_prime(n)).collect();
        let naive: Vec<u64> = (0..200u64)
            .filter(|n| *n >= 2 && (2..*n).all(|d| n % d != 0))
            .collect();
        assert_eq!(primes, naive);
        assert!(is_probable_prime(&18_446_744_073_709_551_557u64));
        assert!(!is_probable_prime(&3_215_031_751u64));
    }

    #[test]
    fn padded_bytes_round_trip() {
        assert_eq!(5u64.to_be_bytes_padded(3), vec![0, 0, 5]);
        assert_eq!(<u64 as ModScalar>::from_be_bytes(&[0, 0, 5]), Some(5));
        assert_eq!(<u64 as ModScalar>::from_be_bytes(&[1; 9]), None);
        let big = BigUint::from(0x0102u32);
        assert_eq!(big.to_be_bytes_padded(4), vec![0, 0, 1, 2]);
        assert_eq!(BigUint::zero().to_be_bytes_padded(2), vec![0, 0]);
    }
}
