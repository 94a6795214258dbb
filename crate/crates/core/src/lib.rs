//! Network revenue management with consecutive-stay requests.
//!
//! M resources each offer slots `1..=N`; over T periods at most one request
//! arrives per period and asks for a run of consecutive slots `[l,r]` on a
//! single resource. The crate holds the problem model, exact dynamic
//! programs for tiny instances, the fluid relaxations, two proposal-based
//! policies with their virtual resource statuses, and a Monte Carlo harness
//! that checks the policies against the relaxations.

pub mod error;
pub mod fluid;
pub mod generate;
pub mod instance;
pub mod interval;
pub mod ledger;
pub mod oracle;
pub mod policy_choice;
pub mod policy_reject;
pub mod rng;
pub mod sim;
pub mod slots;
pub mod verify;

pub use error::Error;
pub use fluid::{build_lp, build_sblp, extract, solve_fluid, FluidModel, FluidSolution};
pub use generate::{generate, GeneratorSpec};
pub use instance::{reduce_to_choice, validate, Instance, RequestType, Scenario, Violation};
pub use interval::{Interval, IntervalIndex};
pub use ledger::{VirtualLedger, ViolationCounters};
pub use policy_choice::{random_coupler, ChoicePolicy, CouplerInput};
pub use policy_reject::RejectPolicy;
pub use sim::{evaluate, PolicyKind, SimConfig, SimReport};
pub use slots::{split_effect, SlotState, MAX_SLOTS};
