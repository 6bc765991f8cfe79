//! Deterministic desk-scale testbed for UAV command-and-control over a
//! simulated 5G standalone network.

pub mod mavlink;
pub mod gtpu;
pub mod netsim;
pub mod corecp;
pub mod agents;
pub mod adversary;
pub mod harness;
