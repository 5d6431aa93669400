//! Enclave side of relay-secret establishment: attested pairwise channels,
//! Feldman dealing, share exchange and threshold recovery.

use std::collections::BTreeMap;

use super::attestation::{report_data_for, verify_quote, AttestationQuote};
use super::instance::EnclaveInstance;
use super::EnclaveError;
use crate::ccip::wire::Writer;
use crate::crypto::{
    aead_decrypt, aead_encrypt, ecdh_derive, ecdh_respond, threshold_for, vss_check_secret, vss_deal,
    vss_recover, vss_verify_share, CommitmentVector, CommunicationKey, CurveParams, EcScalar, FieldParams,
    KeyExchangeMessage, ModScalar, Nonce, Share,
};

const CHANNEL_DOMAIN: &[u8] = b"ccrelay/bootstrap-channel/v1";

/// An enclave's ephemeral channel point, bound to its measurement by a quote.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ChannelOffer {
    pub node_id: u32,
    pub point: KeyExchangeMessage,
    pub quote: AttestationQuote,
}

impl ChannelOffer {
    pub fn expected_report_data(node_id: u32, point: &KeyExchangeMessage) -> [u8; 64] {
        let mut data = CHANNEL_DOMAIN.to_vec();
        data.extend_from_slice(&node_id.to_be_bytes());
        data.extend_from_slice(&point.to_bytes());
        report_data_for(&data)
    }
}

/// One share in transit between two enclaves, encrypted under their channel key.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ShareEnvelope {
    pub from: u32,
    pub to: u32,
    pub share_index: u32,
    pub nonce: Nonce,
    pub ciphertext: Vec<u8>,
}

impl ShareEnvelope {
    fn aad(from: u32, to: u32, share_index: u32) -> Vec<u8> {
        let mut w = Writer::new();
        w.raw(CHANNEL_DOMAIN).u32(from).u32(to).u32(share_index);
        w.into_bytes()
    }
}

/// Dealer-side fault injection for bootstrap tests.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub enum ShareFault {
    #[default]
    None,
    /// Send `share + 1` instead of the dealt share.
    Corrupt,
}

/// Share index held by a node: node ids are 0-based, share indices 1-based.
pub fn share_index_of(node_id: u32) -> u32 {
    node_id + 1
}

#[derive(Default)]
pub(crate) struct BootstrapState {
    ephemeral: Option<EcScalar>,
    /// Shares the dealer has not yet sent, by recipient index.
    outgoing: BTreeMap<u32, Vec<u8>>,
    /// Verified shares received, by share index, in encoded form.
    collected: BTreeMap<u32, Vec<u8>>,
    own_index: Option<u32>,
}

impl EnclaveInstance {
    /// Fresh ephemeral point for pairwise bootstrap channels.
    pub fn channel_offer(&mut self) -> ChannelOffer {
        let e = EcScalar::random(self.rng());
        let point = ecdh_respond(&CurveParams::secp256k1(), &e);
        self.bootstrap.ephemeral = Some(e);
        let quote = self.produce_quote(ChannelOffer::expected_report_data(self.node_id(), &point));
        ChannelOffer { node_id: self.node_id(), point, quote }
    }

    fn channel_key(&self, peer: &ChannelOffer) -> Result<CommunicationKey, EnclaveError> {
        let expected = ChannelOffer::expected_report_data(peer.node_id, &peer.point);
        if !verify_quote(&peer.quote, &self.quote_authority(), &self.measurement(), &expected) {
            return Err(EnclaveError::AttestationFailed { node: peer.node_id });
        }
        let e = self.bootstrap.ephemeral.as_ref().ok_or(EnclaveError::Bootstrap("no channel offer"))?;
        ecdh_derive(&CurveParams::secp256k1(), e, &peer.point).map_err(EnclaveError::Crypto)
    }

    /// Validator: picks a random nonzero secret below `q`, deals it to `n`
    /// nodes and keeps only the shares. Returns the public commitments.
    pub fn deal_secret<T: ModScalar>(
        &mut self,
        params: &FieldParams<T>,
        n: usize,
    ) -> Result<CommitmentVector<T>, EnclaveError> {
        let secret = loop {
            let s = T::random_below(params.q(), self.rng());
            if !s.is_zero() && EcScalar::from_be_bytes(&params.encode_scalar(&s)).is_ok() {
                break s;
            }
        };
        let deal = vss_deal(params, n, secret, self.rng()).map_err(EnclaveError::Crypto)?;
        let own = share_index_of(self.node_id());
        self.bootstrap.outgoing.clear();
        self.bootstrap.collected.clear();
        for share in &deal.shares {
            let bytes = share.to_bytes(params);
            if share.index == own {
                self.bootstrap.collected.insert(own, bytes);
            } else {
                self.bootstrap.outgoing.insert(share.index, bytes);
            }
        }
        self.bootstrap.own_index = Some(own);
        Ok(deal.commitments)
    }

    fn encrypt_share(&mut self, peer: &ChannelOffer, index: u32, mut bytes: Vec<u8>) -> Result<ShareEnvelope, EnclaveError> {
        let key = self.channel_key(peer)?;
        let mut n = [0u8; 12];
        rand::RngCore::fill_bytes(self.rng(), &mut n);
        let nonce = Nonce(n);
        let from = self.node_id();
        let aad = ShareEnvelope::aad(from, peer.node_id, index);
        let ciphertext = aead_encrypt(&key, &nonce, &bytes, &aad);
        bytes.iter_mut().for_each(|b| *b = 0);
        Ok(ShareEnvelope { from, to: peer.node_id, share_index: index, nonce, ciphertext })
    }

    /// Validator: encrypts the dealt share for `peer` after checking its quote.
    pub fn seal_share_for<T: ModScalar>(
        &mut self,
        params: &FieldParams<T>,
        peer: &ChannelOffer,
        fault: ShareFault,
    ) -> Result<ShareEnvelope, EnclaveError> {
        let index = share_index_of(peer.node_id);
        let mut bytes = self
            .bootstrap
            .outgoing
            .get(&index)
            .cloned()
            .ok_or(EnclaveError::Bootstrap("no dealt share for peer"))?;
        if fault == ShareFault::Corrupt {
            let share = Share::from_bytes(params, &bytes).map_err(EnclaveError::Crypto)?;
            let bumped = Share { index, value: share.value.add_mod(&T::one(), params.q()) };
            bytes = bumped.to_bytes(params);
        }
        self.encrypt_share(peer, index, bytes)
    }

    /// Any node: sends its own verified share to `peer`.
    pub fn export_share_for(&mut self, peer: &ChannelOffer) -> Result<ShareEnvelope, EnclaveError> {
        let own = self.bootstrap.own_index.ok_or(EnclaveError::Bootstrap("no own share"))?;
        let bytes = self.bootstrap.collected.get(&own).cloned().ok_or(EnclaveError::Bootstrap("no own share"))?;
        self.encrypt_share(peer, own, bytes)
    }

    /// Decrypts a share from `sender` and checks it against the commitments.
    /// A share for this node's own index becomes its own share.
    pub fn accept_share<T: ModScalar>(
        &mut self,
        params: &FieldParams<T>,
        envelope: &ShareEnvelope,
        sender: &ChannelOffer,
        commitments: &CommitmentVector<T>,
    ) -> Result<(), EnclaveError> {
        if envelope.to != self.node_id() || envelope.from != sender.node_id {
            return Err(EnclaveError::Bootstrap("misaddressed share"));
        }
        let key = self.channel_key(sender)?;
        let aad = ShareEnvelope::aad(envelope.from, envelope.to, envelope.share_index);
        let plain = aead_decrypt(&key, &envelope.nonce, &envelope.ciphertext, &aad)
            .map_err(|_| EnclaveError::ShareVerification { from: envelope.from })?;
        let share = Share::from_bytes(params, &plain).map_err(|_| EnclaveError::ShareVerification { from: envelope.from })?;
        if share.index != envelope.share_index || !vss_verify_share(params, &share, commitments) {
            return Err(EnclaveError::ShareVerification { from: envelope.from });
        }
        if share.index == share_index_of(self.node_id()) {
            self.bootstrap.own_index = Some(share.index);
        }
        self.bootstrap.collected.insert(share.index, plain);
        Ok(())
    }

    pub fn collected_shares(&self) -> usize {
        self.bootstrap.collected.len()
    }

    /// Interpolates the secret from the collected shares, checks `E_0 = g^s`,
    /// seals it and returns `A = s*G`.
    pub fn recover_secret<T: ModScalar>(
        &mut self,
        params: &FieldParams<T>,
        commitments: &CommitmentVector<T>,
    ) -> Result<KeyExchangeMessage, EnclaveError> {
        let t = commitments.threshold();
        let shares = self
            .bootstrap
            .collected
            .values()
            .map(|b| Share::from_bytes(params, b))
            .collect::<Result<Vec<_>, _>>()
            .map_err(EnclaveError::Crypto)?;
        if shares.len() < t {
            return Err(EnclaveError::InsufficientShares { have: shares.len(), need: t });
        }
        let secret = vss_recover(params, t, &shares).map_err(EnclaveError::Crypto)?;
        if !vss_check_secret(params, &secret, commitments) {
            return Err(EnclaveError::SecretCheckFailed);
        }
        let scalar = EcScalar::from_be_bytes(&params.encode_scalar(&secret)).map_err(EnclaveError::Crypto)?;
        self.bootstrap.outgoing.clear();
        self.bootstrap.ephemeral = None;
        self.install_secret(scalar)
    }
}

/// Threshold for a relay of `n` nodes, re-exported for callers that plan a bootstrap.
pub fn bootstrap_threshold(n: usize) -> usize {
    threshold_for(n)
}
