//! Establishing the shared relay secret across the nodes of a relay chain.

use std::collections::BTreeSet;

use super::node::RelayNode;
use crate::crypto::{FieldParams, KeyExchangeMessage, ModScalar};
use crate::enclave::{bootstrap_threshold, EnclaveError, ShareFault};

#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct BootstrapFaults {
    /// Nodes that take no part.
    pub offline: BTreeSet<u32>,
    /// The validator sends a corrupted share to this node.
    pub corrupt_share_to: Option<u32>,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct BootstrapReport {
    pub threshold: usize,
    pub participants: Vec<u32>,
    pub public_point: KeyExchangeMessage,
}

#[derive(Clone, Debug, PartialEq, Eq, thiserror::Error)]
pub enum BootstrapError {
    #[error("validator {0} is offline or unknown")]
    ValidatorUnavailable(u32),
    #[error("node {node}: {source}")]
    Node { node: u32, source: EnclaveError },
    #[error("nodes recovered different secrets")]
    Diverged,
}

fn at(node: u32) -> impl Fn(EnclaveError) -> BootstrapError {
    move |source| BootstrapError::Node { node, source }
}

/// Runs the full protocol: attested channels, dealing by `validator`, share
/// exchange among online nodes and recovery on each of them.
pub fn bootstrap_relay<T: ModScalar>(
    nodes: &mut [RelayNode],
    params: &FieldParams<T>,
    validator: u32,
    faults: &BootstrapFaults,
) -> Result<BootstrapReport, BootstrapError> {
    let n = nodes.len();
    let online: Vec<usize> = (0..n).filter(|i| !faults.offline.contains(&nodes[*i].id())).collect();
    let dealer = online
        .iter()
        .copied()
        .find(|i| nodes[*i].id() == validator)
        .ok_or(BootstrapError::ValidatorUnavailable(validator))?;

    let offers: Vec<_> = online.iter().map(|&i| nodes[i].enclave_mut().channel_offer()).collect();
    let offer_of = |i: usize| &offers[online.iter().position(|&j| j == i).expect("online")];

    let commitments = nodes[dealer].enclave_mut().deal_secret(params, n).map_err(at(validator))?;
    for &i in online.iter().filter(|&&i| i != dealer) {
        let peer = nodes[i].id();
        let fault = if faults.corrupt_share_to == Some(peer) { ShareFault::Corrupt } else { ShareFault::None };
        let env = nodes[dealer].enclave_mut().seal_share_for(params, offer_of(i), fault).map_err(at(validator))?;
        nodes[i].enclave_mut().accept_share(params, &env, offer_of(dealer), &commitments).map_err(at(peer))?;
    }

    for &from in &online {
        for &to in online.iter().filter(|&&to| to != from) {
            let env = nodes[from].enclave_mut().export_share_for(offer_of(to)).map_err(at(nodes[from].id()))?;
            let to_id = nodes[to].id();
            nodes[to].enclave_mut().accept_share(params, &env, offer_of(from), &commitments).map_err(at(to_id))?;
        }
    }

    let mut point = None;
    for &i in &online {
        let id = nodes[i].id();
        let p = nodes[i].enclave_mut().recover_secret(params, &commitments).map_err(at(id))?;
        match point {
            None => point = Some(p),
            Some(q) if q != p => return Err(BootstrapError::Diverged),
            Some(_) => {}
        }
    }
    Ok(BootstrapReport {
        threshold: bootstrap_threshold(n),
        participants: online.iter().map(|&i| nodes[i].id()).collect(),
        public_point: point.expect("dealer is online"),
    })
}
