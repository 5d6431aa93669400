//! Deterministic simulation of parachains, routers and a relay chain on a
//! virtual network, with a scripted adversary.

pub mod adversary;
pub mod contract;
pub mod network;
pub mod parachain;
pub mod runner;
pub mod scenario;

pub use adversary::{Adversary, AdversaryAction, AdversaryEvent, FrameSelector, Interception};
pub use contract::KvContract;
pub use network::{CapturedFrame, Endpoint, Frame, FrameKind, Latency, LinkConfig, SimNetwork};
pub use parachain::{EmissionReceipt, HubError, MockParachain, ParaBlock};
pub use runner::{
    router_error_code, run_scenario_text, Deployment, Outcome, RouterIncident, SimError, Simulation, SimulationResult,
    SubmitRecord, TxTimeline,
};
pub use scenario::{
    user_keypair, ChainSection, ContractSection, FieldChoice, LinkSection, NetworkSection, RelaySection, Scenario,
    ScenarioError, WorkloadSection,
};

#[cfg(test)]
mod tests;
