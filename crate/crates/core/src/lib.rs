//! Planning public safety power shut-offs under wildfire uncertainty.
//!
//! The crate models a transmission network ([`grid`]), samples wildfire
//! disruptions into a scenario tree ([`scenario`]), formulates the
//! multistage shut-off problem ([`formulation`]) and solves it by nested
//! decomposition ([`engine`]) with several cut families ([`cuts`]).
//! [`evaluation`] scores plans out of sample and writes reports.

pub mod backend;
pub mod cuts;
pub mod engine;
pub mod error;
pub mod evaluation;
pub mod formulation;
pub mod grid;
pub mod scenario;

#[cfg(test)]
pub(crate) mod testutil;

pub use error::{Error, Result};
