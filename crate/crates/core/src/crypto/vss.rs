//! Feldman verifiable secret sharing over a prime-order subgroup.
//!
//! The dealer samples `f(x) = a_0 + a_1 x + ... + a_{t-1} x^{t-1} (mod q)` with
//! `a_0` the secret, hands participant `i` the share `f(i)`, and publishes
//! `E_j = g^{a_j} (mod p)`. A participant accepts its share when
//! `g^{f(i)} = prod_j E_j^{i^j} (mod p)`; any `t` shares recover `a_0` by
//! Lagrange interpolation at zero.

use std::collections::BTreeSet;

use rand::RngCore;

use super::field::FieldParams;
use super::scalar::ModScalar;
use super::CryptoError;

/// Threshold for `n` participants: `ceil(2n / 3)`.
pub fn threshold_for(n: usize) -> usize {
    (2 * n).div_ceil(3)
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Share<T> {
    pub index: u32,
    pub value: T,
}

impl<T: ModScalar> Share<T> {
    /// 4-byte big-endian index followed by the fixed-width value.
    pub fn to_bytes(&self, params: &FieldParams<T>) -> Vec<u8> {
        let mut out = self.index.to_be_bytes().to_vec();
        out.extend(params.encode_scalar(&self.value));
        out
    }

    pub fn from_bytes(params: &FieldParams<T>, bytes: &[u8]) -> Result<Self, CryptoError> {
        if bytes.len() != 4 + params.scalar_width() {
            return Err(CryptoError::Encoding("share length"));
        }
        let index = u32::from_be_bytes(bytes[..4].try_into().expect("4 bytes"));
        if index == 0 {
            return Err(CryptoError::Encoding("share index 0"));
        }
        let value = params.decode_scalar(&bytes[4..])?;
        Ok(Self { index, value })
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct CommitmentVector<T> {
    pub entries: Vec<T>,
}

impl<T: ModScalar> CommitmentVector<T> {
    pub fn threshold(&self) -> usize {
        self.entries.len()
    }

    /// `E_0 = g^{a_0}`, the public image of the secret.
    pub fn secret_commitment(&self) -> Option<&T> {
        self.entries.first()
    }

    /// Right-hand side of the share check: `prod_j E_j^{i^j} mod p`.
    pub fn evaluate(&self, params: &FieldParams<T>, index: u32) -> T {
        let i = T::from_u64(u64::from(index)).reduce(params.q());
        let mut power = T::one().reduce(params.q());
        let mut acc = T::one();
        for e in &self.entries {
            acc = acc.mul_mod(&e.pow_mod(&power, params.p()), params.p());
            power = power.mul_mod(&i, params.q());
        }
        acc
    }

    pub fn is_well_formed(&self, params: &FieldParams<T>) -> bool {
        !self.entries.is_empty() && self.entries.iter().all(|e| params.in_subgroup(e))
    }

    pub fn to_bytes(&self, params: &FieldParams<T>) -> Vec<u8> {
        let width = params.element_width();
        let mut out = (self.entries.len() as u32).to_be_bytes().to_vec();
        for e in &self.entries {
            out.extend(e.to_be_bytes_padded(width));
        }
        out
    }

    pub fn from_bytes(params: &FieldParams<T>, bytes: &[u8]) -> Result<Self, CryptoError> {
        let width = params.element_width();
        if bytes.len() < 4 {
            return Err(CryptoError::Encoding("commitment count"));
        }
        let count = u32::from_be_bytes(bytes[..4].try_into().expect("4 bytes")) as usize;
        let body = &bytes[4..];
        if body.len() != count.checked_mul(width).ok_or(CryptoError::Encoding("count"))? {
            return Err(CryptoError::Encoding("commitment length"));
        }
        let entries = body
            .chunks(width)
            .map(|c| T::from_be_bytes(c).ok_or(CryptoError::Encoding("element overflow")))
            .collect::<Result<Vec<_>, _>>()?;
        let out = Self { entries };
        if !out.is_well_formed(params) {
            return Err(CryptoError::Encoding("commitment outside subgroup"));
        }
        Ok(out)
    }
}

/// Everything the dealer produces. `coefficients` stay with the dealer.
#[derive(Clone, Debug)]
pub struct FeldmanDeal<T> {
    pub params: FieldParams<T>,
    pub n: usize,
    pub threshold: usize,
    coefficients: Vec<T>,
    pub shares: Vec<Share<T>>,
    pub commitments: CommitmentVector<T>,
}

impl<T: ModScalar> FeldmanDeal<T> {
    pub fn secret(&self) -> &T {
        &self.coefficients[0]
    }

    pub fn coefficients(&self) -> &[T] {
        &self.coefficients
    }
}

/// Deals `secret` to `n` participants with threshold `ceil(2n/3)`.
pub fn vss_deal<T: ModScalar, R: RngCore + ?Sized>(
    params: &FieldParams<T>,
    n: usize,
    secret: T,
    rng: &mut R,
) -> Result<FeldmanDeal<T>, CryptoError> {
    check_deal_inputs(params, n, &secret)?;
    let t = threshold_for(n);
    let mut coefficients = Vec::with_capacity(t);
    coefficients.push(secret);
    for _ in 1..t {
        coefficients.push(T::random_below(params.q(), rng));
    }
    vss_deal_with_coefficients(params, n, coefficients)
}

/// Deterministic dealing from explicit coefficients `a_0..a_{t-1}`.
pub fn vss_deal_with_coefficients<T: ModScalar>(
    params: &FieldParams<T>,
    n: usize,
    coefficients: Vec<T>,
) -> Result<FeldmanDeal<T>, CryptoError> {
    let secret = coefficients.first().ok_or(CryptoError::InvalidDeal("no coefficients"))?;
    check_deal_inputs(params, n, secret)?;
    let t = threshold_for(n);
    if coefficients.len() != t {
        return Err(CryptoError::InvalidDeal("coefficient count must equal the threshold"));
    }
    if coefficients.iter().any(|a| a >= params.q()) {
        return Err(CryptoError::InvalidDeal("coefficient out of range"));
    }
    let shares = (1..=n as u32)
        .map(|i| Share { index: i, value: evaluate_polynomial(params, &coefficients, i) })
        .collect();
    let commitments = CommitmentVector {
        entries: coefficients.iter().map(|a| params.commit(a)).collect(),
    };
    Ok(FeldmanDeal { params: params.clone(), n, threshold: t, coefficients, shares, commitments })
}

fn check_deal_inputs<T: ModScalar>(
    params: &FieldParams<T>,
    n: usize,
    secret: &T,
) -> Result<(), CryptoError> {
    if n == 0 {
        return Err(CryptoError::InvalidDeal("n must be at least 1"));
    }
    if secret >= params.q() {
        return Err(CryptoError::InvalidDeal("secret out of range"));
    }
    // Indices 1..=n must be distinct and nonzero in Z_q.
    if T::from_u64(n as u64) >= *params.q() {
        return Err(CryptoError::InvalidDeal("n must be smaller than q"));
    }
    Ok(())
}

/// Horner evaluation of `sum_j a_j x^j mod q`.
fn evaluate_polynomial<T: ModScalar>(params: &FieldParams<T>, coefficients: &[T], x: u32) -> T {
    let x = T::from_u64(u64::from(x)).reduce(params.q());
    coefficients
        .iter()
        .rev()
        .fold(T::zero(), |acc, a| acc.mul_mod(&x, params.q()).add_mod(a, params.q()))
}

/// Checks `g^{s_i} = prod_j E_j^{i^j} (mod p)`.
pub fn vss_verify_share<T: ModScalar>(
    params: &FieldParams<T>,
    share: &Share<T>,
    commitments: &CommitmentVector<T>,
) -> bool {
    if share.index == 0 || share.value >= *params.q() || commitments.entries.is_empty() {
        return false;
    }
    params.commit(&share.value) == commitments.evaluate(params, share.index)
}

/// Lagrange interpolation at zero over the supplied shares.
///
/// Any `threshold` or more consistent shares give the dealt secret.
pub fn vss_recover<T: ModScalar>(
    params: &FieldParams<T>,
    threshold: usize,
    shares: &[Share<T>],
) -> Result<T, CryptoError> {
    if shares.len() < threshold || shares.is_empty() {
        return Err(CryptoError::InsufficientShares { have: shares.len(), need: threshold });
    }
    let mut seen = BTreeSet::new();
    for s in shares {
        if s.index == 0 || !seen.insert(s.index) {
            return Err(CryptoError::DuplicateShareIndex(s.index));
        }
    }
    let q = params.q();
    let mut secret = T::zero();
    for k in shares {
        let xk = T::from_u64(u64::from(k.index));
        let mut num = T::one();
        let mut den = T::one();
        for j in shares.iter().filter(|j| j.index != k.index) {
            let xj = T::from_u64(u64::from(j.index));
            num = num.mul_mod(&xj, q);
            den = den.mul_mod(&xj.sub_mod(&xk, q), q);
        }
        let den_inv = params
            .inv_scalar(&den)
            .ok_or(CryptoError::DuplicateShareIndex(k.index))?;
        let coefficient = num.mul_mod(&den_inv, q);
        secret = secret.add_mod(&k.value.mul_mod(&coefficient, q), q);
    }
    Ok(secret)
}

/// `E_0 = g^s (mod p)`: ties a recovered secret back to the public commitments.
pub fn vss_check_secret<T: ModScalar>(
    params: &FieldParams<T>,
    secret: &T,
    commitments: &CommitmentVector<T>,
) -> bool {
    commitments.secret_commitment() == Some(&params.commit(secret))
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha20Rng;

    // Direct evaluation by repeated multiplication, independent of Horner and pow_mod.
    fn oracle_poly(coeffs: &[u64], x: u64, q: u64) -> u64 {
        let mut total = 0;
        for (j, a) in coeffs.iter().enumerate() {
            let mut term = *a;
            for _ in 0..j {
                term = term * x % q;
            }
            total = (total + term) % q;
        }
        total
    }

    fn oracle_pow(base: u64, exp: u64, p: u64) -> u64 {
        (0..exp).fold(1, |acc, _| acc * base % p)
    }

    #[test]
    fn toy_deal_matches_hand_values() {
        let params = FieldParams::toy();
        let deal = vss_deal_with_coefficients(&params, 3, vec![7, 3]).unwrap();
        assert_eq!(deal.threshold, 2);
        let expected: Vec<(u32, u64)> =
            (1..=3).map(|i| (i as u32, oracle_poly(&[7, 3], i, 11))).collect();
        assert_eq!(expected, vec![(1, 10), (2, 2), (3, 5)]);
        let got: Vec<(u32, u64)> = deal.shares.iter().map(|s| (s.index, s.value)).collect();
        assert_eq!(got, expected);
        assert_eq!(deal.commitments.entries, vec![oracle_pow(4, 7, 23), oracle_pow(4, 3, 23)]);
        assert_eq!(deal.commitments.entries, vec![8, 18]);
    }

    #[test]
    fn single_participant_gets_the_secret() {
        let params = FieldParams::toy();
        let mut rng = ChaCha20Rng::seed_from_u64(9);
        let deal = vss_deal(&params, 1, 5, &mut rng).unwrap();
        assert_eq!(deal.threshold, 1);
        assert_eq!(deal.shares, vec![Share { index: 1, value: 5 }]);
        assert_eq!(deal.commitments.entries, vec![oracle_pow(4, 5, 23)]);
        assert_eq!(vss_recover(&params, 1, &deal.shares).unwrap(), 5);
    }

    #[test]
    fn verify_hand_example() {
        let params = FieldParams::toy();
        let commitments = CommitmentVector { entries: vec![8, 18] };
        assert_eq!(oracle_pow(4, 10, 23), 6);
        assert_eq!(8 * 18 % 23, 6);
        assert!(vss_verify_share(&params, &Share { index: 1, value: 10 }, &commitments));
        assert!(!vss_verify_share(&params, &Share { index: 1, value: 0 }, &commitments));
        assert!(!vss_verify_share(&params, &Share { index: 1, value: 11 }, &commitments));
        assert!(!vss_verify_share(&params, &Share { index: 0, value: 7 }, &commitments));
    }

    #[test]
    fn recover_hand_example() {
        let params = FieldParams::toy();
        // Lagrange at 0 for {1, 2}: 10 * 2 + 2 * (-1) = 18 = 7 (mod 11).
        assert_eq!((10 * 2 + 11 - 2) % 11, 7);
        let s12 = [Share { index: 1, value: 10 }, Share { index: 2, value: 2 }];
        let s23 = [Share { index: 2, value: 2 }, Share { index: 3, value: 5 }];
        assert_eq!(vss_recover(&params, 2, &s12).unwrap(), 7);
        assert_eq!(vss_recover(&params, 2, &s23).unwrap(), 7);
    }

    #[test]
    fn recover_errors() {
        let params = FieldParams::toy();
        let one = [Share { index: 1, value: 10 }];
        assert!(matches!(
            vss_recover(&params, 2, &one),
            Err(CryptoError::InsufficientShares { have: 1, need: 2 })
        ));
        let dup = [Share { index: 1, value: 10 }, Share { index: 1, value: 10 }];
        assert!(matches!(vss_recover(&params, 2, &dup), Err(CryptoError::DuplicateShareIndex(1))));
    }

    #[test]
    fn deal_errors() {
        let params = FieldParams::toy();
        let mut rng = ChaCha20Rng::seed_from_u64(1);
        assert!(vss_deal(&params, 0, 1, &mut rng).is_err());
        assert!(vss_deal(&params, 3, 11, &mut rng).is_err());
        assert!(vss_deal(&params, 11, 1, &mut rng).is_err());
    }

    #[test]
    fn exhaustive_tamper_detection_on_toy_field() {
        let params = FieldParams::toy();
        let mut rng = ChaCha20Rng::seed_from_u64(3);
        for n in 1..=9 {
            let deal = vss_deal(&params, n, 4, &mut rng).unwrap();
            for share in &deal.shares {
                assert!(vss_verify_share(&params, share, &deal.commitments));
                for v in (0..11).filter(|v| *v != share.value) {
                    let bad = Share { index: share.index, value: v };
                    assert!(!vss_verify_share(&params, &bad, &deal.commitments));
                }
            }
        }
    }

    #[test]
    fn production_sized_round_trip() {
        let params = FieldParams::production();
        let mut rng = ChaCha20Rng::seed_from_u64(11);
        let secret = num_bigint::BigUint::random_below(params.q(), &mut rng);
        let deal = vss_deal(&params, 4, secret.clone(), &mut rng).unwrap();
        assert_eq!(deal.threshold, 3);
        assert!(deal.shares.iter().all(|s| vss_verify_share(&params, s, &deal.commitments)));
        let recovered = vss_recover(&params, 3, &deal.shares[1..]).unwrap();
        assert_eq!(recovered, secret);
        assert!(vss_check_secret(&params, &recovered, &deal.commitments));
        let bytes = deal.shares[0].to_bytes(&params);
        assert_eq!(bytes.len(), 36);
        assert_eq!(Share::from_bytes(&params, &bytes).unwrap(), deal.shares[0]);
        let cbytes = deal.commitments.to_bytes(&params);
        assert_eq!(CommitmentVector::from_bytes(&params, &cbytes).unwrap(), deal.commitments);
    }

    #[test]
    fn threshold_values() {
        let t: Vec<usize> = (1..=9).map(threshold_for).collect();
        assert_eq!(t, vec![1, 2, 2, 3, 4, 4, 5, 6, 6]);
    }
}
