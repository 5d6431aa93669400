//! Simulated remote attestation. An authority keypair stands in for the
//! vendor attestation service and signs quotes over an enclave's measurement.

use sha2::{Digest, Sha512};

use crate::ccip::wire::{Reader, Writer};
use crate::ccip::CodecError;
use crate::crypto::{sha256_parts, verify_sig, Hash32, PublicKey, Signature, SigningKeypair};

const QUOTE_DOMAIN: &[u8] = b"ccrelay/quote/v1";
const REPORT_DOMAIN: &[u8] = b"ccrelay/report-data/v1";

/// Code identity: hash of a build identifier.
pub fn measurement_of(build_id: &str) -> Hash32 {
    sha256_parts(&[b"ccrelay/measurement/v1", build_id.as_bytes()])
}

/// Signing identity: hash of the name of the party that signs enclave builds.
pub fn signer_identity_of(signer: &str) -> Hash32 {
    sha256_parts(&[b"ccrelay/signer/v1", signer.as_bytes()])
}

/// 64-byte report data binding an arbitrary payload into a quote.
pub fn report_data_for(payload: &[u8]) -> [u8; 64] {
    let mut h = Sha512::new();
    h.update(REPORT_DOMAIN);
    h.update(payload);
    h.finalize().into()
}

#[derive(Clone, Debug)]
pub struct AttestationAuthority {
    keypair: SigningKeypair,
}

impl AttestationAuthority {
    pub fn from_seed(seed: &[u8]) -> Self {
        Self { keypair: SigningKeypair::from_seed(seed) }
    }

    pub fn public_key(&self) -> PublicKey {
        self.keypair.public_key()
    }

    pub(crate) fn issue(&self, measurement: Hash32, platform_id: [u8; 16], report_data: [u8; 64]) -> AttestationQuote {
        let mut quote = AttestationQuote { measurement, platform_id, report_data, signature: Signature::EMPTY };
        quote.signature = self.keypair.sign(&quote.signing_bytes());
        quote
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct AttestationQuote {
    pub measurement: Hash32,
    pub platform_id: [u8; 16],
    pub report_data: [u8; 64],
    pub signature: Signature,
}

impl AttestationQuote {
    fn signing_bytes(&self) -> Vec<u8> {
        let mut w = Writer::new();
        w.raw(QUOTE_DOMAIN).raw(self.measurement.as_bytes()).raw(&self.platform_id).raw(&self.report_data);
        w.into_bytes()
    }

    pub fn encode(&self) -> Vec<u8> {
        let mut w = Writer::new();
        w.raw(self.measurement.as_bytes())
            .raw(&self.platform_id)
            .raw(&self.report_data)
            .raw(self.signature.as_bytes());
        w.into_bytes()
    }

    pub fn read(r: &mut Reader<'_>) -> Result<Self, CodecError> {
        Ok(Self {
            measurement: Hash32(r.array()?),
            platform_id: r.array()?,
            report_data: r.array()?,
            signature: Signature::from_bytes(r.array()?),
        })
    }
}

/// True iff the authority signature is valid, the measurement is the expected
/// one and the report data binds the expected payload.
pub fn verify_quote(
    quote: &AttestationQuote,
    authority: &PublicKey,
    expected_measurement: &Hash32,
    expected_report_data: &[u8; 64],
) -> bool {
    quote.measurement == *expected_measurement
        && quote.report_data == *expected_report_data
        && verify_sig(authority, &quote.signing_bytes(), &quote.signature)
}
