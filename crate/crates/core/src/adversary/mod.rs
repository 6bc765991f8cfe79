//! Threat-model actors: user-plane traffic generators, the SBI attack
//! script and the gNB interceptor.

pub mod interceptor;
pub mod sbi;
pub mod traffic;

pub use interceptor::{make_interceptor, Interceptor, ResignPolicy, RewriteRule};
pub use sbi::{run_sbi_attack, submit_step, SbiLogEntry, SbiStep, TwoStageScript};
pub use traffic::{run_burst, run_flood, traffic, Injected, ProfileError, TrafficGen, TrafficKind, TrafficProfile};
