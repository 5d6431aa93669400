use super::{CrossChainPayload, CrossChainTransaction, TxType};

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum ValidityError {
    #[error("malformed: {0}")]
    Malformed(&'static str),
    #[error("router signature does not verify")]
    BadSignature,
    #[error("expired")]
    Expired,
}

/// Structural rules for a decoded transaction. Checks run in a fixed order
/// (shape, then router signature, then expiry) so each failure has one reason.
///
/// `payload` is the opened plaintext for requests and responses, when available.
pub fn validate_structure(
    tx: &CrossChainTransaction,
    payload: Option<&CrossChainPayload>,
    now: u64,
) -> Result<(), ValidityError> {
    if !tx.envelope_matches_type() {
        return Err(ValidityError::Malformed("payload form does not match type"));
    }
    if let Some(p) = payload {
        match tx.header.tx_type {
            TxType::Registration => return Err(ValidityError::Malformed("registration has no session payload")),
            TxType::Request if !p.session_hash.is_zero() => {
                return Err(ValidityError::Malformed("request must carry a zero session hash"));
            }
            TxType::Response if p.session_hash.is_zero() => {
                return Err(ValidityError::Malformed("response must reference a session"));
            }
            _ => {}
        }
    }
    if !tx.verify_router_signature() {
        return Err(ValidityError::BadSignature);
    }
    if let Some(p) = payload {
        if p.is_expired(now) {
            return Err(ValidityError::Expired);
        }
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ccip::{seal_payload, Call, CcipHeader, PayloadEnvelope};
    use crate::crypto::{CommunicationKey, Hash32, Nonce, Signature, SigningKeypair};

    fn setup() -> (CrossChainTransaction, CrossChainPayload, SigningKeypair) {
        let router = SigningKeypair::from_seed(b"router");
        let user = SigningKeypair::from_seed(b"user");
        let mut payload = CrossChainPayload {
            src_contract: "a".into(),
            dst_contract: "kv".into(),
            timestamp2: 1_000,
            originator_public_key: user.public_key(),
            originator_signature: Signature::EMPTY,
            session_hash: Hash32::ZERO,
            timeout: 500,
            input: Call::new("read", vec![b"k".to_vec()]),
            callback: None,
            extra: vec![],
        };
        payload.sign_originator(&user);
        let header = CcipHeader {
            src_chain: 1,
            dst_chain: 2,
            tx_type: TxType::Request,
            seq_num: 1,
            timestamp1: 1_001,
            router_public_key: router.public_key(),
            signature: Signature::EMPTY,
        };
        let key = CommunicationKey::from_bytes([1; 32]);
        let sealed = seal_payload(&key, Nonce([0; 12]), &header, &payload);
        let mut tx = CrossChainTransaction { header, payload: PayloadEnvelope::Sealed(sealed) };
        tx.sign(&router);
        (tx, payload, router)
    }

    #[test]
    fn valid_until_deadline() {
        let (tx, p, _) = setup();
        assert_eq!(validate_structure(&tx, Some(&p), 1_500), Ok(()));
        assert_eq!(validate_structure(&tx, Some(&p), 1_501), Err(ValidityError::Expired));
    }

    #[test]
    fn request_with_session_hash_is_malformed() {
        let (tx, mut p, _) = setup();
        p.session_hash = Hash32([1; 32]);
        assert!(matches!(validate_structure(&tx, Some(&p), 0), Err(ValidityError::Malformed(_))));
    }

    #[test]
    fn mutated_ciphertext_breaks_signature() {
        let (mut tx, p, _) = setup();
        if let PayloadEnvelope::Sealed(s) = &mut tx.payload {
            s.ciphertext[0] ^= 1;
        }
        assert_eq!(validate_structure(&tx, Some(&p), 0), Err(ValidityError::BadSignature));
    }

    #[test]
    fn envelope_type_mismatch() {
        let (mut tx, _, router) = setup();
        tx.header.tx_type = TxType::Registration;
        tx.sign(&router);
        assert!(matches!(validate_structure(&tx, None, 0), Err(ValidityError::Malformed(_))));
    }
}
