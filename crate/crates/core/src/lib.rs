//! Multi-agent adversarial-bandit search over factored action spaces.
//!
//! A searched architecture is modelled as `N` agents, each picking one of `K`
//! operations per round. A single scalar loss is observed for the joint
//! choice and every agent must turn that shared signal into its own policy
//! update. Two credit-assignment schemes are provided:
//!
//! - **MANAS**: every agent runs an importance-weighted EXP3 update on the
//!   joint loss and samples from a softmax over its cumulative scores.
//! - **MANAS-LS**: the loss is modelled as linear in the one-hot architecture
//!   vector, refitted periodically by minimum-norm least squares, and each
//!   agent samples by Zipf's law over the rank of its fitted scores.
//!
//! The crate is `no_std` (with `alloc`). File formats, configuration parsing,
//! parallel repeats and the command-line front end live in the `agentnas`
//! companion crate.

#![no_std]
#![forbid(unsafe_code)]

extern crate alloc;

#[cfg(feature = "std")]
extern crate std;

mod error;

pub mod environment;
pub mod linalg;
pub mod policy;
pub mod regret;
pub mod runner;
pub mod topology;

pub use error::{Error, Result};
pub use topology::{ArchitectureVector, JointAction, LossValue, Topology};
