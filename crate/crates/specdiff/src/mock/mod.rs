//! A deterministic simulated fleet: EL-style and CL-style API servers over
//! one shared synthetic chain, with per-node divergence injection.

pub mod chain;
pub mod inject;
pub mod responses;
pub mod server;

pub use chain::SyntheticChain;
pub use inject::{DivergenceInjection, InjectionAction, NodeSelector, Trigger};
pub use server::{
    spawn_fleet, spawn_fleet_on_ports, CapturedRequest, FleetHandle, FleetScenario, GroundTruth,
    MockError, PathLabel,
};
